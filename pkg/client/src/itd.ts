/**
 * Interaural-time-difference localization by cross-correlation.
 *
 * Positive lag means the left channel leads (the source is on the left).
 * The coarse azimuth estimate inverts the spherical-head delay model
 * tau(theta) = (a/c)(theta + sin(theta)) by bisection.
 */

export interface ItdEstimate {
  lag: number;                       // samples; > 0 left leads
  side: "left" | "right" | "undecided";
  azimuthRad: number | null;         // magnitude from the head model, signed
}

export function crossCorrelationLag(
  left: ArrayLike<number>,
  right: ArrayLike<number>,
  maxLag = 40,
): number {
  const n = Math.min(left.length, right.length);
  let bestLag = 0;
  let bestScore = -Infinity;
  for (let k = -maxLag; k <= maxLag; k++) {
    // correlate left[i - k] with right[i]
    let score = 0;
    const start = Math.max(0, k);
    const end = Math.min(n, n + k);
    for (let i = start; i < end; i++) {
      score += (left[i - k] as number) * (right[i] as number);
    }
    if (score > bestScore) {
      bestScore = score;
      bestLag = k;
    }
  }
  return bestLag;
}

export function woodworthDelay(thetaRad: number, headRadius = 0.0875, c = 343): number {
  return (headRadius / c) * (thetaRad + Math.sin(thetaRad));
}

export function inverseWoodworth(tauSeconds: number, headRadius = 0.0875, c = 343): number {
  const tauMax = woodworthDelay(Math.PI / 2, headRadius, c);
  const tau = Math.min(Math.abs(tauSeconds), tauMax);
  let lo = 0;
  let hi = Math.PI / 2;
  for (let i = 0; i < 60; i++) {
    const mid = (lo + hi) / 2;
    if (woodworthDelay(mid, headRadius, c) < tau) lo = mid;
    else hi = mid;
  }
  return (lo + hi) / 2;
}

export function localize(
  left: ArrayLike<number>,
  right: ArrayLike<number>,
  sampleRate = 22050,
  maxLag = 40,
): ItdEstimate {
  const lag = crossCorrelationLag(left, right, maxLag);
  if (lag === 0) {
    return { lag, side: "undecided", azimuthRad: null };
  }
  const azimuth = inverseWoodworth(Math.abs(lag) / sampleRate);
  return {
    lag,
    side: lag > 0 ? "left" : "right",
    azimuthRad: lag > 0 ? azimuth : -azimuth,
  };
}

/** Concatenate the (2, n) audio tensors of several steps into L/R arrays. */
export function stackStereo(frames: { shape: number[]; data: ArrayLike<number> }[]): {
  left: Float32Array;
  right: Float32Array;
} {
  let total = 0;
  for (const f of frames) total += f.shape[1];
  const left = new Float32Array(total);
  const right = new Float32Array(total);
  let cursor = 0;
  for (const f of frames) {
    const n = f.shape[1];
    for (let i = 0; i < n; i++) {
      left[cursor + i] = f.data[i] as number;
      right[cursor + i] = f.data[n + i] as number;
    }
    cursor += n;
  }
  return { left, right };
}
