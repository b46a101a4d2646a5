// Thin client for the scorpid service. Nothing here invents data: every
// value rendered by the UI comes from one of these responses.

import type {
  ClassifyResponse,
  DetectResponse,
  Sighting,
  SightingBody,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ServiceClient {
  constructor(
    private baseUrl: string,
    private fetchFn: FetchLike = (...args) => fetch(...args),
  ) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
  }

  async detect(frame: Blob | ArrayBuffer, threshold: number): Promise<DetectResponse> {
    const res = await this.fetchFn(
      `${this.baseUrl}/detect?threshold=${threshold}`,
      { method: "POST", headers: { "content-type": "image/png" }, body: frame as BodyInit },
    );
    if (!res.ok) throw new Error(`detect failed: ${res.status}`);
    return res.json();
  }

  async classify(frame: Blob | ArrayBuffer): Promise<ClassifyResponse> {
    const res = await this.fetchFn(`${this.baseUrl}/classify`, {
      method: "POST",
      headers: { "content-type": "image/png" },
      body: frame as BodyInit,
    });
    if (!res.ok) throw new Error(`classify failed: ${res.status}`);
    return res.json();
  }

  async postSighting(body: SightingBody): Promise<Sighting> {
    const res = await this.fetchFn(`${this.baseUrl}/sightings`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!res.ok) throw new Error(`sighting post failed: ${res.status}`);
    return res.json();
  }

  async getSightings(since?: number): Promise<Sighting[]> {
    const query = since === undefined ? "" : `?since=${since}`;
    const res = await this.fetchFn(`${this.baseUrl}/sightings${query}`);
    if (!res.ok) throw new Error(`sightings fetch failed: ${res.status}`);
    return res.json();
  }

  async healthy(): Promise<boolean> {
    try {
      const res = await this.fetchFn(`${this.baseUrl}/health`);
      return res.ok;
    } catch {
      return false;
    }
  }
}
