"""Object memory: per-object record histories over a refcounted frame store.

Each object keeps every box it was ever written with. Full-frame payloads are
kept only while they belong to some object's latest contiguous run of
records; a gap in an object's timestamps releases the frames of the run that
just closed (frames still referenced by another object stay). Retrieval
patches live in a separate store and are owned by the relevance labeler.
"""

from __future__ import annotations

import gzip
import hashlib
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from types import MappingProxyType
from typing import Mapping, Optional, Protocol, Sequence

import numpy as np

from .geometry import BoundingBox, ResponseTrack

log = logging.getLogger(__name__)

DUMP_VERSION = 1

FULL_FRAME = "frame"
PATCH = "patch"


class MemoryContractError(Exception):
    """Base class for object-memory contract violations."""


class UnknownObjectError(MemoryContractError, KeyError):
    pass


class OrderingError(MemoryContractError, ValueError):
    pass


class ObjectIdError(MemoryContractError, ValueError):
    pass


@dataclass(frozen=True)
class StorageCosts:
    """Byte cost charged per stored item."""

    frame_bytes: int = 1_185_000
    patch_bytes: int = 30_000
    record_bytes: int = 64

    def __post_init__(self):
        if self.frame_bytes <= 0 or self.patch_bytes <= 0 or self.record_bytes < 0:
            raise ValueError("storage costs must be positive")


@dataclass(frozen=True)
class FramePayload:
    t: int
    kind: str
    byte_size: int
    content: bytes = b""
    digest: str = ""

    def __post_init__(self):
        if self.byte_size <= 0:
            raise ValueError("payload byte size must be positive")
        if self.kind not in (FULL_FRAME, PATCH):
            raise ValueError(f"unknown payload kind {self.kind!r}")
        if not self.digest:
            object.__setattr__(self, "digest", hashlib.sha256(self.content).hexdigest())

    def padded(self) -> bytes:
        """Content zero-padded to the charged size; only materialized on demand."""
        return self.content + bytes(max(0, self.byte_size - len(self.content)))


@dataclass(frozen=True)
class Patch:
    """Appearance crop of one box: a feature vector and how distinctive it looks."""

    feature: np.ndarray
    distinctiveness: float = 1.0

    def to_bytes(self) -> bytes:
        return np.asarray(self.feature, dtype="<f8").tobytes()


@dataclass(frozen=True)
class ObjectRecord:
    t: int
    box: BoundingBox
    frame_ref: Optional[int] = None
    patch_ref: Optional[tuple[int, int]] = None
    relevant: bool = False
    score: float = 1.0

    def __post_init__(self):
        if self.t < 0:
            raise ValueError("record timestamp must be non-negative")
        if self.relevant and self.patch_ref is None:
            raise ValueError("a relevant record must reference a stored patch")


@dataclass
class ObjectEntry:
    object_id: int
    records: list[ObjectRecord] = field(default_factory=list)
    max_score: float = 0.0
    relevance_state: dict = field(default_factory=dict)

    @property
    def discovery_t(self) -> int:
        return self.records[0].t

    @property
    def last_t(self) -> int:
        return self.records[-1].t

    def index_of(self, t: int) -> int:
        # records are sorted by t; the hot path asks for recent ones
        for k in range(len(self.records) - 1, -1, -1):
            if self.records[k].t == t:
                return k
            if self.records[k].t < t:
                break
        raise KeyError(t)


@dataclass(frozen=True)
class WriteOutcome:
    object_id: int
    created: bool
    break_detected: bool
    frames_deleted: int
    bytes_freed: int
    relevant: bool


@dataclass(frozen=True)
class TrackContext:
    """What a tracker is told about one memorized object."""

    object_id: int
    discovery_t: int
    discovery_box: BoundingBox
    last_t: int
    last_box: BoundingBox


class Labeler(Protocol):
    def label_on_write(self, entry: ObjectEntry, patch: Optional[Patch], t: int,
                       is_discovery: bool) -> tuple[bool, Sequence[int]]: ...

    def finalize_segment(self, entry: ObjectEntry) -> Sequence[int]: ...


def latest_run(records: Sequence[ObjectRecord]) -> Sequence[ObjectRecord]:
    """Maximal suffix of ``records`` with consecutive timestamps."""
    k = len(records) - 1
    while k > 0 and records[k - 1].t == records[k].t - 1:
        k -= 1
    return records[k:]


class _Readable:
    """Read operations shared by the live memory and its snapshots."""

    _entries: Mapping[int, ObjectEntry]
    _patches: Mapping[tuple[int, int], FramePayload]

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, object_id: int) -> bool:
        return object_id in self._entries

    def object_ids(self) -> list[int]:
        return sorted(self._entries)

    def _records(self, object_id: int) -> Sequence[ObjectRecord]:
        try:
            return self._entries[object_id].records
        except KeyError:
            raise UnknownObjectError(object_id) from None

    def read_object(self, object_id: int) -> tuple[ObjectRecord, ...]:
        return tuple(self._records(object_id))

    def latest_segment(self, object_id: int) -> ResponseTrack:
        return ResponseTrack((r.t, r.box) for r in latest_run(self._records(object_id)))

    def relevant_patches(self, object_id: int) -> list[FramePayload]:
        return [self._patches[r.patch_ref] for r in self._records(object_id) if r.relevant]

    def patch(self, handle: tuple[int, int]) -> FramePayload:
        return self._patches[handle]


class ObjectMemory(_Readable):
    """Mutable memory driven by a single population loop.

    ``labeler`` decides relevance flags on each write and which patches to
    drop when a run of records closes. Without one, callers pass
    ``relevant`` explicitly.
    """

    def __init__(self, costs: StorageCosts | None = None, labeler: Labeler | None = None):
        self.costs = costs or StorageCosts()
        self.labeler = labeler
        self._entries: dict[int, ObjectEntry] = {}
        self._frames: dict[int, list] = {}  # t -> [payload, refcount]
        self._patches: dict[tuple[int, int], FramePayload] = {}
        self._by_time: dict[int, dict[int, ObjectRecord]] = {}
        self.next_id = 0
        self.last_t = -1
        self.budget_warning = False
        self._frame_total = 0
        self._patch_total = 0
        self._n_records = 0

    # -- reads ------------------------------------------------------------

    def read_time(self, t: int) -> list[tuple[int, ObjectRecord]]:
        return sorted(self._by_time.get(t, {}).items())

    def tracking_context(self) -> list[TrackContext]:
        out = []
        for i in sorted(self._entries):
            recs = self._entries[i].records
            out.append(TrackContext(i, recs[0].t, recs[0].box, recs[-1].t, recs[-1].box))
        return out

    def frame_refcount(self, t: int) -> int:
        slot = self._frames.get(t)
        return 0 if slot is None else slot[1]

    def stored_frames(self) -> list[int]:
        return sorted(self._frames)

    def size_bytes(self) -> int:
        return self._frame_total + self._patch_total + self._n_records * self.costs.record_bytes

    @property
    def n_records(self) -> int:
        return self._n_records

    # -- writes -----------------------------------------------------------

    def write(self, t: int, box: BoundingBox, frame: bytes | None = None, *,
              object_id: int | None = None, fresh: bool | None = None,
              patch: Patch | None = None, relevant: bool = False,
              score: float = 1.0) -> WriteOutcome:
        """Append a record, creating the object when it is new.

        ``object_id=None`` allocates the next id. An explicit id creates a new
        object only with ``fresh=True``; the id must never have been used.
        """
        if fresh is None:
            fresh = object_id is None
        if fresh:
            if object_id is None:
                object_id = self.next_id
            elif object_id in self._entries or object_id < self.next_id:
                raise ObjectIdError(f"object id {object_id} is taken or was used before")
            entry = None
        else:
            entry = self._entries.get(object_id)
            if entry is None:
                raise UnknownObjectError(object_id)
            if t <= entry.last_t:
                raise OrderingError(f"object {object_id}: write at t={t} after t={entry.last_t}")

        created = entry is None
        if created:
            entry = ObjectEntry(object_id)
        broke = not created and t - entry.last_t > 1
        frames_deleted = 0
        freed = 0
        if broke:
            frames_deleted, freed = self._release_run_frames(entry)
            if self.labeler is not None:
                for dt in self.labeler.finalize_segment(entry):
                    freed += self._demote(entry, dt)

        if self.labeler is not None:
            relevant, demote = self.labeler.label_on_write(entry, patch, t, created)
            for dt in demote:
                freed += self._demote(entry, dt)
        if relevant and patch is None:
            raise ValueError("cannot mark a record relevant without a patch")
        if created:
            self._entries[object_id] = entry
            self.next_id = max(self.next_id, object_id + 1)

        frame_ref = None
        if frame is not None:
            slot = self._frames.get(t)
            if slot is None:
                payload = FramePayload(t, FULL_FRAME, self.costs.frame_bytes, bytes(frame))
                self._frames[t] = [payload, 1]
                self._frame_total += payload.byte_size
            else:
                slot[1] += 1
            frame_ref = t

        patch_ref = None
        if relevant:
            patch_ref = (object_id, t)
            self._patches[patch_ref] = FramePayload(t, PATCH, self.costs.patch_bytes, patch.to_bytes())
            self._patch_total += self.costs.patch_bytes

        rec = ObjectRecord(t, box, frame_ref, patch_ref, bool(relevant), float(score))
        entry.records.append(rec)
        entry.max_score = max(entry.max_score, rec.score)
        self._by_time.setdefault(t, {})[object_id] = rec
        self._n_records += 1
        self.last_t = max(self.last_t, t)
        return WriteOutcome(object_id, created, broke, frames_deleted, freed, rec.relevant)

    def _replace(self, entry: ObjectEntry, k: int, rec: ObjectRecord) -> None:
        entry.records[k] = rec
        self._by_time[rec.t][entry.object_id] = rec

    def _unref_frame(self, t: int) -> tuple[int, int]:
        slot = self._frames[t]
        slot[1] -= 1
        if slot[1] == 0:
            del self._frames[t]
            self._frame_total -= slot[0].byte_size
            return 1, slot[0].byte_size
        return 0, 0

    def _release_run_frames(self, entry: ObjectEntry) -> tuple[int, int]:
        recs = entry.records
        k = len(recs) - 1
        deleted = freed = 0
        while k >= 0:
            rec = recs[k]
            if rec.frame_ref is not None:
                d, b = self._unref_frame(rec.frame_ref)
                deleted += d
                freed += b
                self._replace(entry, k, replace(rec, frame_ref=None))
            if k == 0 or recs[k - 1].t != rec.t - 1:
                break
            k -= 1
        return deleted, freed

    def _demote(self, entry: ObjectEntry, t: int) -> int:
        k = entry.index_of(t)
        rec = entry.records[k]
        if not rec.relevant:
            return 0
        payload = self._patches.pop(rec.patch_ref)
        self._patch_total -= payload.byte_size
        self._replace(entry, k, replace(rec, relevant=False, patch_ref=None))
        return payload.byte_size

    def evict(self, object_id: int) -> int:
        """Drop a whole object; returns bytes freed."""
        entry = self._entries.pop(object_id, None)
        if entry is None:
            raise UnknownObjectError(object_id)
        freed = 0
        for rec in entry.records:
            if rec.frame_ref is not None:
                freed += self._unref_frame(rec.frame_ref)[1]
            if rec.patch_ref is not None:
                payload = self._patches.pop(rec.patch_ref)
                self._patch_total -= payload.byte_size
                freed += payload.byte_size
            slot = self._by_time[rec.t]
            del slot[object_id]
            if not slot:
                del self._by_time[rec.t]
        self._n_records -= len(entry.records)
        freed += len(entry.records) * self.costs.record_bytes
        return freed

    def prune_to_budget(self, cap: int) -> list[int]:
        """Evict lowest-confidence, then oldest, objects until the size fits ``cap``.

        A lone object bigger than ``cap`` is kept and ``budget_warning`` is set.
        """
        if cap <= 0:
            raise ValueError("budget cap must be positive")
        evicted: list[int] = []
        if self.size_bytes() <= cap:
            return evicted
        order = sorted(self._entries.values(), key=lambda e: (e.max_score, e.discovery_t, e.object_id))
        for entry in order:
            if self.size_bytes() <= cap or len(self._entries) <= 1:
                break
            self.evict(entry.object_id)
            evicted.append(entry.object_id)
        if self.size_bytes() > cap:
            if not self.budget_warning:
                log.warning("memory budget %d exceeded by a single object (%d bytes)", cap, self.size_bytes())
            self.budget_warning = True
        return evicted

    # -- views ------------------------------------------------------------

    def snapshot(self) -> "MemorySnapshot":
        entries = {
            i: ObjectEntry(i, tuple(e.records), e.max_score, dict(e.relevance_state))
            for i, e in self._entries.items()
        }
        return MemorySnapshot(entries, dict(self._patches), self.size_bytes(), self.last_t)

    def audit(self) -> list[str]:
        """Recompute refcounts and byte totals from the records; list every mismatch."""
        problems = []
        refs: dict[int, int] = {}
        n = 0
        patch_refs = set()
        for i, e in self._entries.items():
            prev = None
            for r in e.records:
                n += 1
                if prev is not None and r.t <= prev:
                    problems.append(f"object {i}: timestamps not increasing at t={r.t}")
                prev = r.t
                if r.frame_ref is not None:
                    refs[r.frame_ref] = refs.get(r.frame_ref, 0) + 1
                if r.patch_ref is not None:
                    patch_refs.add(r.patch_ref)
                    if r.patch_ref not in self._patches:
                        problems.append(f"object {i}: patch {r.patch_ref} missing")
                if self._by_time.get(r.t, {}).get(i) is not r:
                    problems.append(f"object {i}: time index stale at t={r.t}")
            if i >= self.next_id:
                problems.append(f"object id {i} not below next_id {self.next_id}")
        for t, (payload, count) in self._frames.items():
            if count != refs.get(t, 0):
                problems.append(f"frame {t}: refcount {count} but {refs.get(t, 0)} references")
            if count <= 0:
                problems.append(f"frame {t}: stored with refcount {count}")
        for t in refs.keys() - self._frames.keys():
            problems.append(f"frame {t}: referenced but not stored")
        for h in self._patches.keys() - patch_refs:
            problems.append(f"patch {h}: stored but unreferenced")
        if n != self._n_records:
            problems.append(f"record count {self._n_records} but {n} records present")
        frame_total = sum(p.byte_size for p, _ in self._frames.values())
        patch_total = sum(p.byte_size for p in self._patches.values())
        if frame_total != self._frame_total or patch_total != self._patch_total:
            problems.append("byte totals out of sync")
        return problems

    def frugality_violations(self) -> list[str]:
        """Frames an object still references outside its latest run of records."""
        problems = []
        for i, e in self._entries.items():
            keep = {r.t for r in latest_run(e.records)}
            for r in e.records:
                if r.frame_ref is not None and r.t not in keep:
                    problems.append(f"object {i} still holds frame {r.t} outside its latest run")
        return problems


class MemorySnapshot(_Readable):
    """Frozen view of a memory at one instant."""

    def __init__(self, entries: Mapping[int, ObjectEntry], patches: Mapping, size: int, last_t: int):
        self._entries = MappingProxyType(dict(entries))
        self._patches = MappingProxyType(dict(patches))
        self._size = size
        self.last_t = last_t

    def size_bytes(self) -> int:
        return self._size

    def read_time(self, t: int) -> list[tuple[int, ObjectRecord]]:
        out = []
        for i in sorted(self._entries):
            for r in self._entries[i].records:
                if r.t == t:
                    out.append((i, r))
                    break
        return out


# -- serialization ----------------------------------------------------------


def _record_to_json(r: ObjectRecord) -> dict:
    return {
        "t": r.t,
        "box": r.box.as_list(),
        "frame_ref": r.frame_ref,
        "patch_ref": list(r.patch_ref) if r.patch_ref is not None else None,
        "relevant": r.relevant,
        "score": r.score,
    }


def _record_from_json(d: dict) -> ObjectRecord:
    return ObjectRecord(
        t=d["t"],
        box=BoundingBox.from_list(d["box"]),
        frame_ref=d["frame_ref"],
        patch_ref=tuple(d["patch_ref"]) if d["patch_ref"] is not None else None,
        relevant=d["relevant"],
        score=d["score"],
    )


def memory_to_dict(memory: ObjectMemory) -> dict:
    """Versioned dump: records, frame digests and patch features (as floats)."""
    return {
        "version": DUMP_VERSION,
        "costs": {
            "frame_bytes": memory.costs.frame_bytes,
            "patch_bytes": memory.costs.patch_bytes,
            "record_bytes": memory.costs.record_bytes,
        },
        "next_id": memory.next_id,
        "last_t": memory.last_t,
        "budget_warning": memory.budget_warning,
        "size_bytes": memory.size_bytes(),
        "entries": [
            {
                "object_id": e.object_id,
                "max_score": e.max_score,
                "relevance_state": e.relevance_state,
                "records": [_record_to_json(r) for r in e.records],
            }
            for e in (memory._entries[i] for i in sorted(memory._entries))
        ],
        "frames": [
            {"t": t, "byte_size": p.byte_size, "digest": p.digest, "refcount": c}
            for t, (p, c) in sorted(memory._frames.items())
        ],
        "patches": [
            {
                "handle": list(h),
                "byte_size": p.byte_size,
                "digest": p.digest,
                "feature": np.frombuffer(p.content, dtype="<f8").tolist(),
            }
            for h, p in sorted(memory._patches.items())
        ],
    }


def memory_from_dict(data: dict, labeler: Labeler | None = None) -> ObjectMemory:
    if data.get("version") != DUMP_VERSION:
        raise ValueError(f"unsupported memory dump version {data.get('version')!r}")
    mem = ObjectMemory(StorageCosts(**data["costs"]), labeler)
    mem.next_id = data["next_id"]
    mem.last_t = data["last_t"]
    mem.budget_warning = data["budget_warning"]
    for f in data["frames"]:
        payload = FramePayload(f["t"], FULL_FRAME, f["byte_size"], b"", f["digest"])
        mem._frames[f["t"]] = [payload, f["refcount"]]
        mem._frame_total += payload.byte_size
    for p in data["patches"]:
        h = tuple(p["handle"])
        content = np.asarray(p["feature"], dtype="<f8").tobytes()
        mem._patches[h] = FramePayload(h[1], PATCH, p["byte_size"], content, p["digest"])
        mem._patch_total += p["byte_size"]
    for e in data["entries"]:
        entry = ObjectEntry(e["object_id"], [_record_from_json(r) for r in e["records"]],
                            e["max_score"], e["relevance_state"])
        mem._entries[entry.object_id] = entry
        for r in entry.records:
            mem._by_time.setdefault(r.t, {})[entry.object_id] = r
        mem._n_records += len(entry.records)
    if mem.size_bytes() != data["size_bytes"]:
        raise ValueError("memory dump size accounting does not match its contents")
    return mem


def save_memory(memory: ObjectMemory, path: str | Path) -> None:
    """Write a dump; a ``.gz`` suffix selects the compressed binary form."""
    path = Path(path)
    text = json.dumps(memory_to_dict(memory), sort_keys=True)
    if path.suffix == ".gz":
        # mtime=0 keeps the bytes reproducible
        path.write_bytes(gzip.compress(text.encode(), mtime=0))
    else:
        path.write_text(text)


def load_memory(path: str | Path, labeler: Labeler | None = None) -> ObjectMemory:
    path = Path(path)
    raw = path.read_bytes()
    if path.suffix == ".gz":
        raw = gzip.decompress(raw)
    return memory_from_dict(json.loads(raw), labeler)
