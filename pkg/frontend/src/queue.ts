// Offline sighting queue: posts that fail stay queued and flush strictly in
// order when connectivity returns. Storage is injectable (localStorage in
// the browser, a plain map in tests).

import type { SightingBody } from "./types.js";

export type QueueStorage = {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
};

export type Pending = { body: SightingBody; queuedAt: number };

const DEFAULT_KEY = "scorpid-sighting-queue";

export class SightingQueue {
  constructor(
    private storage: QueueStorage,
    private key: string = DEFAULT_KEY,
  ) {}

  private read(): Pending[] {
    try {
      return JSON.parse(this.storage.getItem(this.key) || "[]");
    } catch {
      return [];
    }
  }

  private write(items: Pending[]): void {
    this.storage.setItem(this.key, JSON.stringify(items));
  }

  size(): number {
    return this.read().length;
  }

  peekAll(): Pending[] {
    return this.read();
  }

  enqueue(body: SightingBody, queuedAt: number = Date.now()): void {
    const items = this.read();
    items.push({ body, queuedAt });
    this.write(items);
  }

  /** Post pending sightings oldest-first; stop at the first failure so order
   * is preserved. Returns how many were flushed. */
  async flush(post: (body: SightingBody) => Promise<void>): Promise<number> {
    const items = this.read();
    let flushed = 0;
    for (const item of items) {
      try {
        await post(item.body);
        flushed += 1;
      } catch {
        break;
      }
    }
    if (flushed > 0) this.write(items.slice(flushed));
    return flushed;
  }
}

export class MemoryStorage implements QueueStorage {
  private map = new Map<string, string>();

  getItem(key: string): string | null {
    return this.map.get(key) ?? null;
  }

  setItem(key: string, value: string): void {
    this.map.set(key, value);
  }
}
