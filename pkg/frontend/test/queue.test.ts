import { describe, expect, it } from "vitest";

import { MemoryStorage, SightingQueue } from "../src/queue.js";
import type { SightingBody } from "../src/types.js";

const body = (note: string): SightingBody => ({
  image_ref: `frame-${note}`,
  detections: [],
  class_scores: null,
  operator_note: note,
  operator_verdict: "confirmed",
});

describe("SightingQueue", () => {
  it("persists entries through storage", () => {
    const storage = new MemoryStorage();
    const queue = new SightingQueue(storage);
    queue.enqueue(body("one"));
    queue.enqueue(body("two"));
    expect(new SightingQueue(storage).size()).toBe(2);
  });

  it("flushes strictly in enqueue order", async () => {
    const queue = new SightingQueue(new MemoryStorage());
    for (const n of ["a", "b", "c"]) queue.enqueue(body(n));
    const posted: string[] = [];
    const flushed = await queue.flush(async (b) => {
      posted.push(b.operator_note);
    });
    expect(flushed).toBe(3);
    expect(posted).toEqual(["a", "b", "c"]);
    expect(queue.size()).toBe(0);
  });

  it("stops at the first failure and keeps order", async () => {
    const queue = new SightingQueue(new MemoryStorage());
    for (const n of ["a", "b", "c"]) queue.enqueue(body(n));
    let calls = 0;
    const flushed = await queue.flush(async () => {
      calls += 1;
      if (calls === 2) throw new Error("offline again");
    });
    expect(flushed).toBe(1);
    expect(queue.peekAll().map((p) => p.body.operator_note)).toEqual(["b", "c"]);
  });

  it("tolerates corrupted storage", () => {
    const storage = new MemoryStorage();
    storage.setItem("scorpid-sighting-queue", "{nope");
    expect(new SightingQueue(storage).size()).toBe(0);
  });
});
