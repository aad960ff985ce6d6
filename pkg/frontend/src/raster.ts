/** Stroke model and software rasterizer for the sketch canvas.
 *
 * The raster is always re-derived from the stroke list, so undo is a plain
 * pop. Rasterization writes exact palette RGB values (or white for the
 * eraser); no anti-aliasing, keeping the exported PNG palette-exact.
 */

export interface Point {
  x: number;
  y: number;
}

export interface Stroke {
  /** palette index, or null for the eraser */
  colorIndex: number | null;
  width: number;
  points: Point[];
}

export type Tool = { kind: "brush"; colorIndex: number } | { kind: "eraser" };

export interface Rgb {
  r: number;
  g: number;
  b: number;
}

export const WHITE: Rgb = { r: 255, g: 255, b: 255 };

export function hexToRgb(hex: string): Rgb {
  const v = parseInt(hex.replace("#", ""), 16);
  return { r: (v >> 16) & 0xff, g: (v >> 8) & 0xff, b: v & 0xff };
}

export class CanvasState {
  readonly strokes: Stroke[] = [];
  tool: Tool = { kind: "brush", colorIndex: 0 };
  strokeWidth = 24;

  constructor(readonly size: number) {}

  beginStroke(p: Point): Stroke {
    const stroke: Stroke = {
      colorIndex: this.tool.kind === "brush" ? this.tool.colorIndex : null,
      width: this.strokeWidth,
      points: [clampPoint(p, this.size)],
    };
    this.strokes.push(stroke);
    return stroke;
  }

  extendStroke(p: Point): void {
    const current = this.strokes[this.strokes.length - 1];
    if (current) current.points.push(clampPoint(p, this.size));
  }

  /** One full stroke in a single call; used by scripted flows. */
  addStroke(colorIndex: number | null, width: number, points: Point[]): void {
    this.strokes.push({
      colorIndex,
      width,
      points: points.map((p) => clampPoint(p, this.size)),
    });
  }

  undo(): boolean {
    return this.strokes.pop() !== undefined;
  }

  clear(): void {
    this.strokes.length = 0;
  }
}

function clampPoint(p: Point, size: number): Point {
  return {
    x: Math.min(size - 1, Math.max(0, p.x)),
    y: Math.min(size - 1, Math.max(0, p.y)),
  };
}

function stampDisk(
  rgb: Uint8Array,
  size: number,
  cx: number,
  cy: number,
  radius: number,
  color: Rgb,
): void {
  const r2 = radius * radius;
  const y0 = Math.max(0, Math.floor(cy - radius));
  const y1 = Math.min(size - 1, Math.ceil(cy + radius));
  const x0 = Math.max(0, Math.floor(cx - radius));
  const x1 = Math.min(size - 1, Math.ceil(cx + radius));
  for (let y = y0; y <= y1; y++) {
    for (let x = x0; x <= x1; x++) {
      const dx = x - cx;
      const dy = y - cy;
      if (dx * dx + dy * dy <= r2) {
        const at = (y * size + x) * 3;
        rgb[at] = color.r;
        rgb[at + 1] = color.g;
        rgb[at + 2] = color.b;
      }
    }
  }
}

function paintStroke(rgb: Uint8Array, size: number, stroke: Stroke, palette: string[]): void {
  const hex = stroke.colorIndex === null ? null : palette[stroke.colorIndex];
  const color = hex ? hexToRgb(hex) : WHITE;
  const radius = Math.max(0.5, stroke.width / 2);
  let prev: Point | undefined;
  for (const p of stroke.points) {
    if (prev) {
      // walk the segment densely enough that disks overlap
      const dist = Math.hypot(p.x - prev.x, p.y - prev.y);
      const steps = Math.max(1, Math.ceil(dist / Math.max(1, radius / 2)));
      for (let s = 1; s <= steps; s++) {
        const t = s / steps;
        stampDisk(rgb, size, prev.x + (p.x - prev.x) * t, prev.y + (p.y - prev.y) * t, radius, color);
      }
    } else {
      stampDisk(rgb, size, p.x, p.y, radius, color);
    }
    prev = p;
  }
}

/** Derive the full RGB raster (row-major, 3 bytes per pixel) from strokes. */
export function rasterize(state: CanvasState, palette: string[]): Uint8Array {
  const rgb = new Uint8Array(state.size * state.size * 3).fill(255);
  for (const stroke of state.strokes) {
    paintStroke(rgb, state.size, stroke, palette);
  }
  return rgb;
}

/** Palette colors (by index) that have at least one painted pixel. */
export function usedColorIndices(state: CanvasState, palette: string[]): number[] {
  const raster = rasterize(state, palette);
  const seen = new Set<string>();
  for (let i = 0; i < raster.length; i += 3) {
    seen.add(`${raster[i]},${raster[i + 1]},${raster[i + 2]}`);
  }
  const used: number[] = [];
  palette.forEach((hex, idx) => {
    const c = hexToRgb(hex);
    if (seen.has(`${c.r},${c.g},${c.b}`)) used.push(idx);
  });
  return used;
}
