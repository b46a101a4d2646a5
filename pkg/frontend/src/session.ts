// The field session controller: a polling loop that keeps at most one
// detect/classify pair in flight, feeds responses into the session state,
// and falls back to degraded mode (last good result + offline banner) when
// the service disappears.

import { ServiceClient } from "./api.js";
import {
  SessionState,
  adjustThreshold,
  applyResponse,
  banner,
  initialState,
  markOffline,
  visibleDetections,
} from "./state.js";
import { SightingQueue } from "./queue.js";
import type { Detection, Verdict } from "./types.js";

export type Frame = { data: Blob | ArrayBuffer; ref: string };

export class FieldSession {
  state: SessionState;
  private inFlight = false;

  constructor(
    private client: ServiceClient,
    private queue: SightingQueue,
    options?: { captureIntervalMs?: number; threshold?: number },
  ) {
    this.state = initialState(options);
  }

  get banner() {
    return banner(this.state);
  }

  get overlay(): Detection[] {
    return visibleDetections(this.state);
  }

  setThreshold(t: number): void {
    // re-filters the displayed overlay immediately; the next /detect query
    // uses exactly this value
    this.state = adjustThreshold(this.state, t);
  }

  /** One capture cycle. Skipped (returns false) while a previous query pair
   * is still pending, so slow networks never build a backlog. */
  async tick(frame: Frame): Promise<boolean> {
    if (this.inFlight) return false;
    this.inFlight = true;
    try {
      const [detectRes, classifyRes] = await Promise.all([
        this.client.detect(frame.data, this.state.threshold),
        this.client.classify(frame.data),
      ]);
      this.state = applyResponse(this.state, {
        frameRef: frame.ref,
        detections: detectRes.detections,
        classification: {
          probs: classifyRes.probs,
          label: classifyRes.label,
          dangerous: classifyRes.dangerous,
          low_confidence: classifyRes.low_confidence,
        },
      });
      await this.flushQueue();
      return true;
    } catch {
      this.state = markOffline(this.state);
      return true;
    } finally {
      this.inFlight = false;
    }
  }

  /** Record the operator's verdict on the currently frozen frame. Queued
   * locally first, so an offline post is never lost; flushes immediately
   * when the service is reachable. */
  async logSighting(verdict: Verdict, note = ""): Promise<void> {
    const last = this.state.lastResponse;
    if (!last) throw new Error("no response to log a sighting for");
    this.queue.enqueue({
      image_ref: last.frameRef,
      detections: last.detections,
      class_scores: last.classification,
      operator_note: note,
      operator_verdict: verdict,
    });
    await this.flushQueue();
  }

  pendingSightings(): number {
    return this.queue.size();
  }

  /** Push queued sightings to the service in order; called opportunistically
   * after every successful query and from reconnect handlers. */
  async flushQueue(): Promise<number> {
    return this.queue.flush(async (body) => {
      await this.client.postSighting(body);
    });
  }
}
