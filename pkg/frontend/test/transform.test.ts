import assert from "node:assert/strict";
import { test } from "node:test";

import { ViewTransform } from "../src/transform.js";

// The default arena raster: 168 x 98 cells at 5 cm.
const EXTENT = { originX: 0, originY: 0, widthM: 8.4, heightM: 4.9 };

test("screen-world round trip stays within one pixel over the extent", () => {
  const tf = new ViewTransform(EXTENT, 1280, 760);
  for (let i = 0; i <= 40; i++) {
    for (let j = 0; j <= 40; j++) {
      const wx = EXTENT.originX + (EXTENT.widthM * i) / 40;
      const wy = EXTENT.originY + (EXTENT.heightM * j) / 40;
      const [sx, sy] = tf.toScreen(wx, wy);
      const [bx, by] = tf.toWorld(sx, sy);
      const [sx2, sy2] = tf.toScreen(bx, by);
      assert.ok(Math.hypot(sx2 - sx, sy2 - sy) <= 1.0,
                `round trip drifted at (${wx}, ${wy})`);
      // world-space round trip as well, expressed in pixels
      assert.ok(Math.hypot(bx - wx, by - wy) * tf.scale <= 1.0);
    }
  }
});

test("aspect ratio is preserved when fitting the canvas", () => {
  for (const [w, h] of [[1280, 760], [640, 640], [300, 900]]) {
    const tf = new ViewTransform(EXTENT, w, h);
    const [x0, y0] = tf.toScreen(0, 0);
    const [x1, y1] = tf.toScreen(EXTENT.widthM, EXTENT.heightM);
    const drawnW = Math.abs(x1 - x0);
    const drawnH = Math.abs(y1 - y0);
    const aspect = drawnW / drawnH;
    assert.ok(Math.abs(aspect - EXTENT.widthM / EXTENT.heightM) < 1e-9,
              `aspect ${aspect} at canvas ${w}x${h}`);
  }
});

test("world y axis points up on screen", () => {
  const tf = new ViewTransform(EXTENT, 800, 600);
  const [, syLow] = tf.toScreen(1.0, 0.5);
  const [, syHigh] = tf.toScreen(1.0, 4.0);
  assert.ok(syHigh < syLow);
});

test("insideMap bounds clicks to the extent", () => {
  const tf = new ViewTransform(EXTENT, 800, 600);
  const [cx, cy] = tf.toScreen(4.2, 2.45);
  assert.ok(tf.insideMap(cx, cy));
  assert.ok(!tf.insideMap(-50, cy));
  assert.ok(!tf.insideMap(cx, -50));
});
