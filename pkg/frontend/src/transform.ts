// World <-> screen mapping. World y points up, screen y points down; the
// map raster is fitted into the canvas preserving aspect ratio.

export interface MapExtent {
  originX: number; // world coords of the raster's lower-left corner
  originY: number;
  widthM: number;
  heightM: number;
}

export class ViewTransform {
  readonly scale: number; // px per meter
  readonly offsetX: number; // screen x of world originX
  readonly offsetY: number; // screen y of world originY (bottom edge)

  constructor(readonly extent: MapExtent, readonly canvasW: number,
              readonly canvasH: number, margin = 10) {
    const availW = canvasW - 2 * margin;
    const availH = canvasH - 2 * margin;
    this.scale = Math.min(availW / extent.widthM, availH / extent.heightM);
    const usedW = extent.widthM * this.scale;
    const usedH = extent.heightM * this.scale;
    this.offsetX = (canvasW - usedW) / 2;
    this.offsetY = (canvasH + usedH) / 2; // screen y of the world bottom edge
  }

  toScreen(wx: number, wy: number): [number, number] {
    return [
      this.offsetX + (wx - this.extent.originX) * this.scale,
      this.offsetY - (wy - this.extent.originY) * this.scale,
    ];
  }

  toWorld(sx: number, sy: number): [number, number] {
    return [
      this.extent.originX + (sx - this.offsetX) / this.scale,
      this.extent.originY + (this.offsetY - sy) / this.scale,
    ];
  }

  insideMap(sx: number, sy: number): boolean {
    const [wx, wy] = this.toWorld(sx, sy);
    return (
      wx >= this.extent.originX &&
      wx <= this.extent.originX + this.extent.widthM &&
      wy >= this.extent.originY &&
      wy <= this.extent.originY + this.extent.heightM
    );
  }
}
