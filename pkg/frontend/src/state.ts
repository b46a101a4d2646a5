// Session state and the pure functions that derive what the operator sees.
//
// Invariants kept here:
// - the banner is a pure function of (last classification, connectivity);
// - the overlay only ever shows detections from the last response, filtered
//   by the current threshold;
// - the threshold stored in state is exactly what the next /detect query
//   sends.

import type { Classification, Detection } from "./types.js";

export type Banner = "none" | "safe" | "danger" | "uncertain" | "offline";

export type LastResponse = {
  frameRef: string;
  detections: Detection[];
  classification: Classification | null;
};

export type SessionState = {
  captureIntervalMs: number;
  threshold: number;
  online: boolean;
  lastResponse: LastResponse | null;
};

export const MIN_CAPTURE_INTERVAL_MS = 100;

export function initialState(options?: {
  captureIntervalMs?: number;
  threshold?: number;
}): SessionState {
  return {
    captureIntervalMs: Math.max(
      MIN_CAPTURE_INTERVAL_MS,
      options?.captureIntervalMs ?? 500,
    ),
    threshold: clampThreshold(options?.threshold ?? 0.5),
    online: true,
    lastResponse: null,
  };
}

export function clampThreshold(t: number): number {
  if (Number.isNaN(t)) return 0;
  return Math.min(1, Math.max(0, t));
}

export function adjustThreshold(state: SessionState, t: number): SessionState {
  return { ...state, threshold: clampThreshold(t) };
}

export function applyResponse(
  state: SessionState,
  response: LastResponse,
): SessionState {
  return { ...state, online: true, lastResponse: response };
}

export function markOffline(state: SessionState): SessionState {
  // degraded mode: the last good result stays on screen
  return { ...state, online: false };
}

export function visibleDetections(state: SessionState): Detection[] {
  if (!state.lastResponse) return [];
  return state.lastResponse.detections.filter((d) => d.score >= state.threshold);
}

export function computeBanner(
  classification: Classification | null,
  online: boolean,
): Banner {
  if (!online) return "offline";
  if (!classification) return "none";
  if (classification.low_confidence) return "uncertain";
  if (classification.label === "Tityus") return "danger";
  if (classification.label === "Bothriurus") return "safe";
  return "none";
}

export function banner(state: SessionState): Banner {
  return computeBanner(state.lastResponse?.classification ?? null, state.online);
}
