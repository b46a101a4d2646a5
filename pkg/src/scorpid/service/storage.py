"""Append-only sighting log.

Durability is a single JSONL file of events (creates and verdict updates);
state is rebuilt by replaying it. Writes are serialized through one lock and
timestamps are clamped monotone, so the log order is the session order.
"""

from __future__ import annotations

import json
import threading
import time
from pathlib import Path


class SightingLog:
    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path else None
        self._lock = threading.Lock()
        self._by_id: dict[str, dict] = {}
        self._order: list[str] = []
        self._counter = 0
        self._last_ts = 0
        if self.path and self.path.exists():
            self._replay()

    def _replay(self) -> None:
        with self.path.open(encoding="utf-8") as fh:
            for raw in fh:
                raw = raw.strip()
                if not raw:
                    continue
                event = json.loads(raw)
                if event["event"] == "create":
                    doc = event["sighting"]
                    self._by_id[doc["id"]] = doc
                    self._order.append(doc["id"])
                    self._counter = max(self._counter, int(doc["id"].lstrip("s")))
                    self._last_ts = max(self._last_ts, doc["timestamp"])
                elif event["event"] == "verdict":
                    if event["id"] in self._by_id:
                        self._by_id[event["id"]]["operator_verdict"] = event["verdict"]

    def _append(self, event: dict) -> None:
        if self.path is None:
            return
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, ensure_ascii=False) + "\n")
            fh.flush()

    def create(self, body: dict) -> dict:
        with self._lock:
            self._counter += 1
            ts = max(int(time.time() * 1000), self._last_ts)
            self._last_ts = ts
            doc = {"id": f"s{self._counter:06d}", "timestamp": ts, **body}
            self._by_id[doc["id"]] = doc
            self._order.append(doc["id"])
            self._append({"event": "create", "sighting": doc})
            return doc

    def update_verdict(self, sighting_id: str, verdict: str) -> dict | None:
        with self._lock:
            doc = self._by_id.get(sighting_id)
            if doc is None:
                return None
            doc["operator_verdict"] = verdict
            self._append({"event": "verdict", "id": sighting_id, "verdict": verdict})
            return doc

    def list(self, since: int | None = None, verdict: str | None = None) -> list[dict]:
        with self._lock:
            docs = [self._by_id[i] for i in self._order]
        if since is not None:
            docs = [d for d in docs if d["timestamp"] >= since]
        if verdict is not None:
            docs = [d for d in docs if d["operator_verdict"] == verdict]
        return docs
