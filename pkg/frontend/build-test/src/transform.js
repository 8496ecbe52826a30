// World <-> screen mapping. World y points up, screen y points down; the
// map raster is fitted into the canvas preserving aspect ratio.
export class ViewTransform {
    constructor(extent, canvasW, canvasH, margin = 10) {
        this.extent = extent;
        this.canvasW = canvasW;
        this.canvasH = canvasH;
        const availW = canvasW - 2 * margin;
        const availH = canvasH - 2 * margin;
        this.scale = Math.min(availW / extent.widthM, availH / extent.heightM);
        const usedW = extent.widthM * this.scale;
        const usedH = extent.heightM * this.scale;
        this.offsetX = (canvasW - usedW) / 2;
        this.offsetY = (canvasH + usedH) / 2; // screen y of the world bottom edge
    }
    toScreen(wx, wy) {
        return [
            this.offsetX + (wx - this.extent.originX) * this.scale,
            this.offsetY - (wy - this.extent.originY) * this.scale,
        ];
    }
    toWorld(sx, sy) {
        return [
            this.extent.originX + (sx - this.offsetX) / this.scale,
            this.extent.originY + (this.offsetY - sy) / this.scale,
        ];
    }
    insideMap(sx, sy) {
        const [wx, wy] = this.toWorld(sx, sy);
        return (wx >= this.extent.originX &&
            wx <= this.extent.originX + this.extent.widthM &&
            wy >= this.extent.originY &&
            wy <= this.extent.originY + this.extent.heightM);
    }
}
