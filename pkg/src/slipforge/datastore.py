"""Persistent storage: dataset manifests, model archives and the match ledger.

Documents are JSON with an explicit ``format_version`` so old files fail
loudly instead of being misread.  Floats are serialized with Python's
shortest round-trip repr, which preserves the exact bit pattern across a
save/load cycle.  The match ledger is an append-only JSONL file guarded by
an exclusive lock; appending never rewrites earlier bytes.
"""

from __future__ import annotations

import fcntl
import json
import os
import warnings
from dataclasses import dataclass, field, asdict
from datetime import datetime, timezone
from typing import Iterable, Sequence

import numpy as np

from .matcher import EmbeddingModel

FORMAT_VERSION = 1

GROUPS = ("upper", "lower")
VERDICTS = ("confirmed", "rejected")


class DatastoreError(Exception):
    """Base class for all persistence failures."""


class ParseError(DatastoreError):
    """File is unreadable or not the kind of JSON document expected."""


class VersionError(DatastoreError):
    """Document declares a format version this code does not understand."""


class InvariantError(DatastoreError):
    """Document parsed but violates a schema invariant."""


class IntegrityError(DatastoreError):
    """Model archive is corrupt or truncated."""


class ShapeError(DatastoreError):
    """Model weights are inconsistent with the declared layer dimensions."""


class LedgerError(DatastoreError):
    """Match ledger could not be appended to."""


# --------------------------------------------------------------------------
# dataset manifest


@dataclass
class Fragment:
    """One fragment: a group label plus its fracture-edge height profile."""

    id: str
    group: str
    heights: list[float]
    provenance: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not isinstance(self.id, str) or not self.id:
            raise InvariantError("fragment id must be a non-empty string")
        if self.group not in GROUPS:
            raise InvariantError(f"fragment {self.id}: unknown group {self.group!r}")
        self.heights = [float(h) for h in self.heights]
        if len(self.heights) < 2:
            raise InvariantError(f"fragment {self.id}: needs at least 2 height samples")
        if not all(np.isfinite(h) for h in self.heights):
            raise InvariantError(f"fragment {self.id}: non-finite height sample")


@dataclass
class GroundTruthPair:
    upper_id: str
    lower_id: str


@dataclass
class DatasetManifest:
    """All fragments of a dataset plus the ground-truth pairing.

    Fragments outside ``ground_truth`` are interference: they belong to no
    pair and widen every candidate pool.
    """

    name: str
    fragments: list[Fragment]
    ground_truth: list[GroundTruthPair]
    params: dict = field(default_factory=dict)
    seed: int | None = None

    def __post_init__(self) -> None:
        if not self.name:
            raise InvariantError("dataset name must be non-empty")
        self._by_id = {}
        for frag in self.fragments:
            if frag.id in self._by_id:
                raise InvariantError(f"duplicate fragment id {frag.id!r}")
            self._by_id[frag.id] = frag
        self._truth_of = {}
        for pair in self.ground_truth:
            for fid, group in ((pair.upper_id, "upper"), (pair.lower_id, "lower")):
                frag = self._by_id.get(fid)
                if frag is None:
                    raise InvariantError(f"ground truth references unknown fragment {fid!r}")
                if frag.group != group:
                    raise InvariantError(
                        f"ground truth places {fid!r} on the {group} side "
                        f"but it is labeled {frag.group!r}"
                    )
                if fid in self._truth_of:
                    raise InvariantError(f"fragment {fid!r} appears in more than one pair")
            self._truth_of[pair.upper_id] = pair.lower_id
            self._truth_of[pair.lower_id] = pair.upper_id

    # -- lookups ----------------------------------------------------------

    @property
    def n_pairs(self) -> int:
        return len(self.ground_truth)

    def fragment(self, fragment_id: str) -> Fragment:
        try:
            return self._by_id[fragment_id]
        except KeyError:
            raise KeyError(f"unknown fragment id {fragment_id!r}") from None

    def has_fragment(self, fragment_id: str) -> bool:
        return fragment_id in self._by_id

    def true_match(self, fragment_id: str) -> str | None:
        """Ground-truth counterpart id, or None for interference fragments."""
        return self._truth_of.get(fragment_id)

    def is_paired(self, fragment_id: str) -> bool:
        return fragment_id in self._truth_of

    def paired_fragments(self, group: str) -> list[Fragment]:
        if group not in GROUPS:
            raise InvariantError(f"unknown group {group!r}")
        out = [f for f in self.fragments if f.group == group and f.id in self._truth_of]
        out.sort(key=lambda f: f.id)
        return out

    def interference_fragments(self) -> list[Fragment]:
        out = [f for f in self.fragments if f.id not in self._truth_of]
        out.sort(key=lambda f: f.id)
        return out

    def candidate_pool(self, target_group: str) -> list[Fragment]:
        """Candidates for a target of ``target_group``: every paired fragment
        of the opposite group plus every interference fragment.

        Interference fragments are unpaired, so each is hypothetically
        testable in either role; they are returned relabeled to the
        candidate side.  With 118 pairs and 1114 interference fragments the
        pool for either direction therefore holds 1232 candidates.
        """
        if target_group not in GROUPS:
            raise InvariantError(f"unknown group {target_group!r}")
        opposite = "lower" if target_group == "upper" else "upper"
        pool = self.paired_fragments(opposite)
        for frag in self.interference_fragments():
            if frag.group == opposite:
                pool.append(frag)
            else:
                pool.append(
                    Fragment(frag.id, opposite, list(frag.heights), dict(frag.provenance))
                )
        pool.sort(key=lambda f: f.id)
        return pool

    def with_interference_count(self, count: int) -> "DatasetManifest":
        """Sub-dataset keeping all pairs and the first ``count`` interference
        fragments in id order."""
        extras = self.interference_fragments()
        if count < 0 or count > len(extras):
            raise InvariantError(
                f"interference count {count} outside 0..{len(extras)}"
            )
        keep = {f.id for f in extras[:count]}
        fragments = [
            f for f in self.fragments if f.id in self._truth_of or f.id in keep
        ]
        return DatasetManifest(
            name=f"{self.name}+{count}x",
            fragments=fragments,
            ground_truth=list(self.ground_truth),
            params=dict(self.params),
            seed=self.seed,
        )

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "kind": "dataset-manifest",
            "name": self.name,
            "seed": self.seed,
            "params": self.params,
            "fragments": [asdict(f) for f in self.fragments],
            "ground_truth": [asdict(p) for p in self.ground_truth],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "DatasetManifest":
        if not isinstance(doc, dict):
            raise ParseError("manifest document must be a JSON object")
        _check_version(doc, "dataset-manifest")
        try:
            fragments = [Fragment(**f) for f in doc["fragments"]]
            pairs = [GroundTruthPair(**p) for p in doc["ground_truth"]]
            return cls(
                name=doc["name"],
                fragments=fragments,
                ground_truth=pairs,
                params=doc.get("params") or {},
                seed=doc.get("seed"),
            )
        except InvariantError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise InvariantError(f"manifest fields malformed: {exc}") from exc


def _check_version(doc: dict, kind: str) -> None:
    version = doc.get("format_version")
    if not isinstance(version, int):
        raise ParseError(f"document lacks an integer format_version")
    if version != FORMAT_VERSION:
        raise VersionError(f"unsupported format_version {version} (expected {FORMAT_VERSION})")
    if "kind" in doc and doc["kind"] != kind:
        raise ParseError(f"expected a {kind} document, found {doc['kind']!r}")


def _read_json(path: str) -> dict:
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not valid JSON: {exc}") from exc


def _write_json(path: str, doc: dict) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
    os.replace(tmp, path)


def save_manifest(manifest: DatasetManifest, path: str) -> None:
    _write_json(path, manifest.to_dict())


def load_manifest(path: str) -> DatasetManifest:
    return DatasetManifest.from_dict(_read_json(path))


# --------------------------------------------------------------------------
# physics parameter documents (stored as plain mappings; the physics module
# owns the dataclass so this layer stays import-light)


def save_params(params: dict, path: str) -> None:
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": "physics-params",
        "params": dict(params),
    }
    _write_json(path, doc)


def load_params(path: str) -> dict:
    doc = _read_json(path)
    if not isinstance(doc, dict):
        raise ParseError("params document must be a JSON object")
    _check_version(doc, "physics-params")
    params = doc.get("params")
    if not isinstance(params, dict):
        raise InvariantError("params document lacks a params mapping")
    return params


# --------------------------------------------------------------------------
# model archive


def save_model(model: EmbeddingModel, path: str) -> None:
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": "embedding-model",
        "layer_dims": list(model.layer_dims),
        "margin": model.margin,
        "input_scale": model.input_scale,
        "weights": [w.tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
        "training_meta": model.training_meta,
    }
    _write_json(path, doc)


def load_model(path: str) -> EmbeddingModel:
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise IntegrityError(f"{path}: model archive is corrupt: {exc}") from exc
    if not isinstance(doc, dict):
        raise IntegrityError(f"{path}: model archive must be a JSON object")
    version = doc.get("format_version")
    if not isinstance(version, int):
        raise IntegrityError(f"{path}: model archive lacks a format_version")
    if version != FORMAT_VERSION:
        raise VersionError(f"unsupported format_version {version} (expected {FORMAT_VERSION})")
    try:
        dims = tuple(int(d) for d in doc["layer_dims"])
        weights = [np.asarray(w, dtype=np.float64) for w in doc["weights"]]
        biases = [np.asarray(b, dtype=np.float64) for b in doc["biases"]]
        margin = float(doc["margin"])
        input_scale = float(doc["input_scale"])
        meta = doc.get("training_meta") or {}
    except (KeyError, TypeError, ValueError) as exc:
        raise IntegrityError(f"{path}: model archive fields malformed: {exc}") from exc
    if len(weights) != len(dims) - 1 or len(biases) != len(dims) - 1:
        raise ShapeError(
            f"{path}: {len(weights)} weight blocks for {len(dims)} layer dims"
        )
    for i, (w, b) in enumerate(zip(weights, biases)):
        want = (dims[i], dims[i + 1])
        if w.ndim != 2 or w.shape != want:
            raise ShapeError(f"{path}: weight {i} has shape {w.shape}, expected {want}")
        if b.shape != (dims[i + 1],):
            raise ShapeError(f"{path}: bias {i} has shape {b.shape}, expected ({dims[i + 1]},)")
    try:
        return EmbeddingModel(
            layer_dims=dims,
            weights=weights,
            biases=biases,
            margin=margin,
            input_scale=input_scale,
            training_meta=meta,
        )
    except ValueError as exc:
        raise ShapeError(f"{path}: {exc}") from exc


# --------------------------------------------------------------------------
# match ledger


@dataclass
class MatchRecord:
    """One reviewer decision about a target/candidate pairing."""

    target_id: str
    candidate_id: str
    verdict: str
    note: str = ""
    method: str = ""
    rank: int | None = None
    confidence: float | None = None
    timestamp: str = ""
    record_id: int | None = None

    def __post_init__(self) -> None:
        if not self.target_id or not self.candidate_id:
            raise InvariantError("match record needs target and candidate ids")
        if self.verdict not in VERDICTS:
            raise InvariantError(f"unknown verdict {self.verdict!r}")

    def to_dict(self) -> dict:
        return {
            "record_id": self.record_id,
            "timestamp": self.timestamp,
            "target_id": self.target_id,
            "candidate_id": self.candidate_id,
            "verdict": self.verdict,
            "method": self.method,
            "rank": self.rank,
            "confidence": self.confidence,
            "note": self.note,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "MatchRecord":
        if not isinstance(doc, dict):
            raise InvariantError("ledger line is not an object")
        try:
            return cls(
                target_id=doc["target_id"],
                candidate_id=doc["candidate_id"],
                verdict=doc["verdict"],
                note=doc.get("note", ""),
                method=doc.get("method", ""),
                rank=doc.get("rank"),
                confidence=doc.get("confidence"),
                timestamp=doc.get("timestamp", ""),
                record_id=doc["record_id"],
            )
        except KeyError as exc:
            raise InvariantError(f"ledger line lacks field {exc}") from exc


def _scan_ledger(fh) -> tuple[list[MatchRecord], int]:
    """Parse all well-formed lines; malformed ones are warned about and
    skipped so one bad write cannot take the whole ledger down."""
    records = []
    max_id = 0
    for lineno, line in enumerate(fh, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            rec = MatchRecord.from_dict(json.loads(line))
        except (json.JSONDecodeError, InvariantError, TypeError) as exc:
            warnings.warn(f"ledger line {lineno} skipped: {exc}")
            continue
        records.append(rec)
        if rec.record_id is not None:
            max_id = max(max_id, rec.record_id)
    return records, max_id


def append_match(path: str, record: MatchRecord) -> int:
    """Append under an exclusive lock; returns the assigned record id.

    The id is one past the largest id already present, re-scanned under the
    lock so concurrent writers in separate processes cannot collide.
    """
    line_doc = record.to_dict()
    try:
        with open(path, "a+", encoding="utf-8") as fh:
            fcntl.flock(fh.fileno(), fcntl.LOCK_EX)
            try:
                fh.seek(0)
                _, max_id = _scan_ledger(fh)
                record_id = max_id + 1
                line_doc["record_id"] = record_id
                if not line_doc["timestamp"]:
                    line_doc["timestamp"] = (
                        datetime.now(timezone.utc).isoformat(timespec="seconds")
                    )
                fh.seek(0, os.SEEK_END)
                fh.write(json.dumps(line_doc) + "\n")
                fh.flush()
                os.fsync(fh.fileno())
            finally:
                fcntl.flock(fh.fileno(), fcntl.LOCK_UN)
    except OSError as exc:
        raise LedgerError(f"{path}: append failed: {exc}") from exc
    return record_id


def list_matches(path: str, target_id: str | None = None) -> list[MatchRecord]:
    """Replay the ledger, optionally filtered to one target."""
    if not os.path.exists(path):
        return []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            records, _ = _scan_ledger(fh)
    except OSError as exc:
        raise LedgerError(f"{path}: read failed: {exc}") from exc
    if target_id is not None:
        records = [r for r in records if r.target_id == target_id]
    return records
