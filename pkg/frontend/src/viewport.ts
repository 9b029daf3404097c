// Canvas <-> image coordinate mapping with zoom and pan. Image pixel (0,0)
// maps to canvas (offsetX, offsetY); one image pixel spans `scale` canvas
// pixels. At integer scales and offsets the round trip is exact.

export interface Point {
  x: number;
  y: number;
}

export class Viewport {
  scale = 1;
  offsetX = 0;
  offsetY = 0;

  constructor(
    public imageWidth: number,
    public imageHeight: number,
  ) {}

  toImage(cx: number, cy: number): Point {
    return {
      x: (cx - this.offsetX) / this.scale,
      y: (cy - this.offsetY) / this.scale,
    };
  }

  toCanvas(ix: number, iy: number): Point {
    return {
      x: ix * this.scale + this.offsetX,
      y: iy * this.scale + this.offsetY,
    };
  }

  inImage(p: Point): boolean {
    return p.x >= 0 && p.y >= 0 && p.x < this.imageWidth && p.y < this.imageHeight;
  }

  zoomAt(cx: number, cy: number, factor: number): void {
    const next = Math.min(16, Math.max(0.25, this.scale * factor));
    const anchor = this.toImage(cx, cy);
    this.scale = next;
    this.offsetX = cx - anchor.x * next;
    this.offsetY = cy - anchor.y * next;
  }

  setIntegerZoom(level: number): void {
    this.scale = Math.max(1, Math.round(level));
  }

  panBy(dx: number, dy: number): void {
    this.offsetX += dx;
    this.offsetY += dy;
  }

  reset(): void {
    this.scale = 1;
    this.offsetX = 0;
    this.offsetY = 0;
  }
}
