/** Time <-> pixel transforms for one strip at the current zoom. */

export class TimeScale {
  constructor(
    readonly t0: number,
    readonly t1: number,
    readonly widthPx: number,
  ) {
    if (!(t1 > t0)) throw new RangeError(`empty time range [${t0}, ${t1}]`);
    if (!(widthPx > 0)) throw new RangeError(`non-positive width ${widthPx}`);
  }

  get spanS(): number {
    return this.t1 - this.t0;
  }

  /** Seconds of recording represented by one pixel column. */
  get secondsPerPixel(): number {
    return this.spanS / this.widthPx;
  }

  timeToPixel(timeS: number): number {
    return ((timeS - this.t0) / this.spanS) * this.widthPx;
  }

  pixelToTime(xPx: number): number {
    return this.t0 + (xPx / this.widthPx) * this.spanS;
  }

  /** Zoom by `factor` (>1 zooms in) keeping the time under `anchorPx` fixed. */
  zoom(factor: number, anchorPx: number): TimeScale {
    const anchorT = this.pixelToTime(anchorPx);
    const span = this.spanS / factor;
    const t0 = anchorT - (anchorPx / this.widthPx) * span;
    return new TimeScale(t0, t0 + span, this.widthPx);
  }

  pan(deltaPx: number): TimeScale {
    const shift = deltaPx * this.secondsPerPixel;
    return new TimeScale(this.t0 + shift, this.t1 + shift, this.widthPx);
  }

  /** Clamp the visible range into [lo, hi], preserving the span when possible. */
  clamp(lo: number, hi: number): TimeScale {
    const span = Math.min(this.spanS, hi - lo);
    let t0 = Math.max(lo, Math.min(this.t0, hi - span));
    return new TimeScale(t0, t0 + span, this.widthPx);
  }
}
