// Wire types mirroring the scorpid service contract.

export type Detection = {
  x: number;
  y: number;
  w: number;
  h: number;
  score: number;
  label: string;
};

export type Classification = {
  probs: Record<string, number>;
  label: string;
  dangerous: boolean;
  low_confidence: boolean;
};

export type DetectResponse = { detections: Detection[]; latency_ms: number };
export type ClassifyResponse = Classification & { latency_ms: number };

export type Verdict = "confirmed" | "rejected" | "unsure" | "unreviewed";

export type SightingBody = {
  image_ref: string;
  detections: Detection[];
  class_scores: Classification | null;
  operator_note: string;
  operator_verdict: Verdict;
};

export type Sighting = SightingBody & { id: string; timestamp: number };
