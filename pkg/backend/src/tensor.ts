/** Dense row-major, channel-last float planes used throughout the backend. */

export interface Plane {
  data: Float64Array;
  height: number;
  width: number;
  channels: number;
}

export function makePlane(height: number, width: number, channels: number): Plane {
  return { data: new Float64Array(height * width * channels), height, width, channels };
}

export function planeFrom(data: Float64Array | number[], height: number, width: number, channels: number): Plane {
  const arr = data instanceof Float64Array ? data : Float64Array.from(data);
  if (arr.length !== height * width * channels) {
    throw new Error(`plane data length ${arr.length} != ${height}x${width}x${channels}`);
  }
  return { data: arr, height, width, channels };
}

export function clonePlane(p: Plane): Plane {
  return { data: p.data.slice(), height: p.height, width: p.width, channels: p.channels };
}

export function at(p: Plane, y: number, x: number, c: number): number {
  return p.data[(y * p.width + x) * p.channels + c];
}

export function setAt(p: Plane, y: number, x: number, c: number, v: number): void {
  p.data[(y * p.width + x) * p.channels + c] = v;
}

/** Concatenate planes of equal spatial dims along the channel axis. */
export function concatChannels(planes: Plane[]): Plane {
  const { height, width } = planes[0];
  for (const p of planes) {
    if (p.height !== height || p.width !== width) {
      throw new Error("concatChannels: spatial dims differ");
    }
  }
  const channels = planes.reduce((acc, p) => acc + p.channels, 0);
  const out = makePlane(height, width, channels);
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      let co = 0;
      for (const p of planes) {
        for (let c = 0; c < p.channels; c++) {
          out.data[(y * width + x) * channels + co++] = at(p, y, x, c);
        }
      }
    }
  }
  return out;
}

export function maxAbsDiff(a: Plane, b: Plane): number {
  if (a.data.length !== b.data.length) throw new Error("maxAbsDiff: size mismatch");
  let worst = 0;
  for (let i = 0; i < a.data.length; i++) {
    const d = Math.abs(a.data[i] - b.data[i]);
    if (d > worst) worst = d;
  }
  return worst;
}
