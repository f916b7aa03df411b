/** Box-filter downsampling of the drawing surface to the service's
 * 32x32 white-on-black pixel format.
 */

export const GRID = 32;
export const PIXELS = GRID * GRID;

/** Structural subset of ImageData, so tests can build frames by hand. */
export interface Frame {
  width: number;
  height: number;
  /** RGBA, row-major, 4 bytes per pixel. */
  data: Uint8ClampedArray;
}

/**
 * Average each grid cell's luminance into one output pixel.
 *
 * The drawing surface is black with white ink, so a straight average is
 * already in the training convention: background 0, ink high. Cell r,c
 * covers source rows floor(r*H/32)..floor((r+1)*H/32) (likewise columns),
 * which partitions any surface size exactly; 320x320 gives clean 10x10
 * boxes. Deterministic: same frame, same 1024 integers.
 */
export function rasterize(frame: Frame): number[] {
  const { width, height, data } = frame;
  if (width < GRID || height < GRID) {
    throw new Error(`surface must be at least ${GRID}x${GRID}, got ${width}x${height}`);
  }
  if (data.length !== width * height * 4) {
    throw new Error("frame data length does not match width*height RGBA");
  }
  const out = new Array<number>(PIXELS);
  for (let r = 0; r < GRID; r++) {
    const y0 = Math.floor((r * height) / GRID);
    const y1 = Math.floor(((r + 1) * height) / GRID);
    for (let c = 0; c < GRID; c++) {
      const x0 = Math.floor((c * width) / GRID);
      const x1 = Math.floor(((c + 1) * width) / GRID);
      let sum = 0;
      for (let y = y0; y < y1; y++) {
        let i = (y * width + x0) * 4;
        for (let x = x0; x < x1; x++, i += 4) {
          sum += (data[i] + data[i + 1] + data[i + 2]) / 3;
        }
      }
      out[r * GRID + c] = Math.round(sum / ((y1 - y0) * (x1 - x0)));
    }
  }
  return out;
}

/** True when no cell holds any ink. */
export function isBlank(pixels: number[]): boolean {
  return pixels.every((p) => p === 0);
}
