// Canvas rendering of the arena, robots, and overlays.
export const STALE_AFTER_MS = 2000;
// 95% confidence scaling for a 2-dof Gaussian: sqrt(chi2_0.95(2))
const ELLIPSE_K = Math.sqrt(5.991);
const ROBOT_COLORS = ["#2878d0", "#d07028", "#28a06a", "#a04898"];
/** 95% ellipse of the 2x2 position block of a row-major 3x3 covariance. */
export function covarianceEllipse(cov, scale) {
    const a = cov[0];
    const b = cov[1];
    const c = cov[4];
    const tr = a + c;
    const det = a * c - b * b;
    const disc = Math.sqrt(Math.max(0, (tr * tr) / 4 - det));
    const l1 = Math.max(0, tr / 2 + disc);
    const l2 = Math.max(0, tr / 2 - disc);
    const angle = Math.abs(b) < 1e-15 && a >= c ? 0 : Math.atan2(l1 - a, b || 1e-300);
    return {
        majorPx: ELLIPSE_K * Math.sqrt(l1) * scale,
        minorPx: ELLIPSE_K * Math.sqrt(l2) * scale,
        angle,
    };
}
export function robotColor(index) {
    return ROBOT_COLORS[index % ROBOT_COLORS.length];
}
export function drawMap(ctx, map, tf) {
    const cell = map.resolution_m * tf.scale;
    ctx.fillStyle = "#f4f1ea";
    const [x0, yTop] = tf.toScreen(map.origin_x_m, map.origin_y_m + map.height * map.resolution_m);
    ctx.fillRect(x0, yTop, map.width * cell, map.height * cell);
    ctx.fillStyle = "#4a4440";
    for (let iy = 0; iy < map.height; iy++) {
        const row = map.rows[iy];
        const yWorldTop = map.origin_y_m + (iy + 1) * map.resolution_m;
        for (let ix = 0; ix < map.width; ix++) {
            if (row[ix] !== "1")
                continue;
            const [sx, sy] = tf.toScreen(map.origin_x_m + ix * map.resolution_m, yWorldTop);
            ctx.fillRect(sx, sy, cell + 0.5, cell + 0.5);
        }
    }
}
export function drawCoverage(ctx, map, tf) {
    for (const beacon of map.beacons) {
        const [sx, sy] = tf.toScreen(beacon.x_m, beacon.y_m);
        ctx.beginPath();
        ctx.arc(sx, sy, map.coverage_radius_m * tf.scale, 0, 2 * Math.PI);
        ctx.fillStyle = "rgba(240, 200, 40, 0.18)";
        ctx.fill();
        ctx.strokeStyle = "rgba(200, 160, 20, 0.8)";
        ctx.setLineDash([6, 4]);
        ctx.stroke();
        ctx.setLineDash([]);
        ctx.beginPath();
        ctx.arc(sx, sy, Math.max(3, (beacon.diameter_m / 2) * tf.scale), 0, 2 * Math.PI);
        ctx.fillStyle = "#e0b020";
        ctx.fill();
    }
}
export function drawRobot(ctx, view, tf, color, selected, nowMs) {
    const stale = nowMs - view.lastUpdateMs > STALE_AFTER_MS;
    const [sx, sy] = tf.toScreen(view.x, view.y);
    if (view.trail.length > 1) {
        ctx.beginPath();
        ctx.strokeStyle = stale ? "#b8b8b8" : color + "80";
        ctx.lineWidth = 1.5;
        view.trail.forEach(([wx, wy], i) => {
            const [tx, ty] = tf.toScreen(wx, wy);
            if (i === 0)
                ctx.moveTo(tx, ty);
            else
                ctx.lineTo(tx, ty);
        });
        ctx.stroke();
    }
    const ell = covarianceEllipse(view.cov, tf.scale);
    if (ell.majorPx > 1) {
        ctx.save();
        ctx.translate(sx, sy);
        ctx.rotate(-ell.angle);
        ctx.beginPath();
        ctx.ellipse(0, 0, Math.max(ell.majorPx, 1), Math.max(ell.minorPx, 1), 0, 0, 2 * Math.PI);
        ctx.strokeStyle = stale ? "#c0c0c0" : color;
        ctx.setLineDash([3, 3]);
        ctx.stroke();
        ctx.setLineDash([]);
        ctx.restore();
    }
    const r = Math.max(5, 0.11 * tf.scale);
    ctx.beginPath();
    ctx.arc(sx, sy, r, 0, 2 * Math.PI);
    ctx.fillStyle = stale ? "#b0b0b0" : color;
    ctx.fill();
    if (selected) {
        ctx.lineWidth = 2.5;
        ctx.strokeStyle = "#202020";
        ctx.stroke();
    }
    ctx.beginPath();
    ctx.moveTo(sx, sy);
    ctx.lineTo(sx + r * 1.6 * Math.cos(-view.theta), sy + r * 1.6 * Math.sin(-view.theta));
    ctx.strokeStyle = "#ffffff";
    ctx.lineWidth = 2;
    ctx.stroke();
    if (view.inCoverage && !stale) {
        ctx.beginPath();
        ctx.arc(sx, sy, r + 3, 0, 2 * Math.PI);
        ctx.strokeStyle = "#e0b020";
        ctx.lineWidth = 2;
        ctx.stroke();
    }
    if (view.goalX !== undefined && view.goalY !== undefined &&
        (view.goalStatus === "active" || view.goalStatus === "no_path")) {
        const [gx, gy] = tf.toScreen(view.goalX, view.goalY);
        ctx.beginPath();
        ctx.moveTo(gx - 6, gy - 6);
        ctx.lineTo(gx + 6, gy + 6);
        ctx.moveTo(gx - 6, gy + 6);
        ctx.lineTo(gx + 6, gy - 6);
        ctx.strokeStyle = view.goalStatus === "no_path" ? "#d03030" : color;
        ctx.lineWidth = 2.5;
        ctx.stroke();
    }
}
export function drawPendingGoal(ctx, state, tf) {
    if (!state.pendingGoal)
        return;
    const [gx, gy] = tf.toScreen(state.pendingGoal.x, state.pendingGoal.y);
    ctx.beginPath();
    ctx.arc(gx, gy, 7, 0, 2 * Math.PI);
    ctx.strokeStyle = "#808080";
    ctx.setLineDash([2, 3]);
    ctx.stroke();
    ctx.setLineDash([]);
}
