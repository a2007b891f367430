"""Append-only event log with a SHA-256 hash chain.

Each accepted event is one state increment.  A record carries the submitted
payload plus the normalized `effects` list that folding applies, so replaying
a log never re-runs rule logic: rules execute once, at submit time, and their
outcome is part of the record.  The wall-clock timestamp is informational
only and never participates in replay semantics.

Persistence is a newline-delimited file of canonical JSON objects.  The first
line is a header naming the format version and checksum algorithm; every
subsequent line is one event whose `hash` covers (seq, ts, actor, kind,
payload, effects, prev_hash).
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass
from typing import Any, Iterable, Optional

from .errors import CorruptLog
from .model import canonical_json

FORMAT_NAME = "object-log"
FORMAT_VERSION = 1
CHECKSUM_ALGO = "sha256"

ROLLBACK_KIND = "rollback_marker"


def _digest(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def header_record() -> dict:
    return {"format": FORMAT_NAME, "version": FORMAT_VERSION, "checksum": CHECKSUM_ALGO}


def header_hash() -> str:
    return _digest(canonical_json(header_record()))


@dataclass(frozen=True)
class EventRecord:
    seq: int
    ts: str
    actor: str
    kind: str
    payload: dict
    effects: tuple
    prev_hash: str
    hash: str

    def to_dict(self) -> dict:
        return {
            "seq": self.seq,
            "ts": self.ts,
            "actor": self.actor,
            "kind": self.kind,
            "payload": self.payload,
            "effects": list(self.effects),
            "prev_hash": self.prev_hash,
            "hash": self.hash,
        }


def record_hash(seq: int, ts: str, actor: str, kind: str, payload: dict,
                effects: Iterable[dict], prev_hash: str) -> str:
    body = {
        "seq": seq,
        "ts": ts,
        "actor": actor,
        "kind": kind,
        "payload": payload,
        "effects": list(effects),
        "prev_hash": prev_hash,
    }
    return _digest(canonical_json(body))


def make_record(seq: int, ts: str, actor: str, kind: str, payload: dict,
                effects: Iterable[dict], prev_hash: str) -> EventRecord:
    effects = tuple(effects)
    h = record_hash(seq, ts, actor, kind, payload, effects, prev_hash)
    return EventRecord(seq, ts, actor, kind, payload, effects, prev_hash, h)


def record_from_dict(d: dict) -> EventRecord:
    return EventRecord(
        seq=d["seq"],
        ts=d["ts"],
        actor=d["actor"],
        kind=d["kind"],
        payload=d["payload"],
        effects=tuple(d["effects"]),
        prev_hash=d["prev_hash"],
        hash=d["hash"],
    )


class EventLog:
    """In-memory record list, optionally mirrored to an append-only file."""

    def __init__(self, path: Optional[str] = None):
        self.path = path
        self.records: list[EventRecord] = []
        self._fh = None
        if path is not None:
            if os.path.exists(path):
                self._load(path)
            else:
                os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
                with open(path, "w", encoding="utf-8") as fh:
                    fh.write(canonical_json(header_record()) + "\n")
            self._fh = open(path, "a", encoding="utf-8")

    # -- chain -------------------------------------------------------------

    @property
    def head(self) -> int:
        return len(self.records)

    def tip_hash(self) -> str:
        return self.records[-1].hash if self.records else header_hash()

    def append(self, record: EventRecord) -> None:
        if record.seq != self.head + 1:
            raise CorruptLog(f"seq {record.seq} does not extend head {self.head}")
        if record.prev_hash != self.tip_hash():
            raise CorruptLog(f"hash chain break at seq {record.seq}", seq=record.seq)
        self.records.append(record)
        if self._fh is not None:
            self._fh.write(canonical_json(record.to_dict()) + "\n")
            self._fh.flush()

    def verify_chain(self) -> None:
        prev = header_hash()
        for i, rec in enumerate(self.records, start=1):
            if rec.seq != i:
                raise CorruptLog(f"seq gap at {i}", seq=i)
            if rec.prev_hash != prev:
                raise CorruptLog(f"hash chain break at seq {i}", seq=i)
            expect = record_hash(rec.seq, rec.ts, rec.actor, rec.kind, rec.payload,
                                 rec.effects, rec.prev_hash)
            if rec.hash != expect:
                raise CorruptLog(f"record hash mismatch at seq {i}", seq=i)
            prev = rec.hash
        return None

    # -- persistence ---------------------------------------------------------

    def _load(self, path: str) -> None:
        import json

        with open(path, encoding="utf-8") as fh:
            lines = [ln for ln in fh.read().splitlines() if ln.strip()]
        if not lines:
            raise CorruptLog("empty log file")
        header = json.loads(lines[0])
        if header.get("format") != FORMAT_NAME:
            raise CorruptLog(f"unknown log format {header.get('format')!r}")
        if header.get("checksum") != CHECKSUM_ALGO:
            raise CorruptLog(f"unsupported checksum {header.get('checksum')!r}")
        for ln in lines[1:]:
            self.records.append(record_from_dict(json.loads(ln)))
        self.verify_chain()

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None
