/** Field-viewer state: which prediction is on screen, its decoded grid, and
 * the current error card. All displayed numbers come verbatim from the
 * server response; the viewer never recomputes them. */

import { decodeGrid, type DecodedGrid } from "./grids.js";
import { SequenceGate } from "./scheduler.js";
import type { PredictResponse } from "./types.js";

export class FieldViewer {
  readonly gate = new SequenceGate();
  current: PredictResponse | null = null;
  decoded: DecodedGrid | null = null;
  lastError: string | null = null;

  /** Apply a response tagged with its request sequence number. Returns true
   * if it became the displayed frame. Stale responses are dropped; malformed
   * payloads raise the error card but keep the previous frame. */
  applyResponse(seq: number, resp: PredictResponse): boolean {
    if (!this.gate.accept(seq)) return false;
    let decoded: DecodedGrid;
    try {
      decoded = decodeGrid(resp);
    } catch (err) {
      this.lastError = err instanceof Error ? err.message : String(err);
      return false;
    }
    this.current = resp;
    this.decoded = decoded;
    this.lastError = null;
    return true;
  }

  /** Request failure: show the message, keep whatever frame is up. */
  applyError(seq: number, message: string): boolean {
    if (!this.gate.accept(seq)) return false;
    this.lastError = message;
    return true;
  }

  /** summary.representative_max of the displayed frame, untransformed. */
  get readout(): number | null {
    return this.current ? this.current.summary.representative_max : null;
  }

  formatReadout(): string {
    return this.readout === null ? "--" : String(this.readout);
  }
}
