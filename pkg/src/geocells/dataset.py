"""Ingest geo-tagged text records, attach leaf labels, split train/test.

Input tables are flat (id, latitude, longitude, text) rows, either
tab-separated (no quoting; the text column may itself contain tabs) or
JSON lines.  Invalid rows are counted and reported, never silently
dropped.  The train/test split hashes record ids, so it is stable
across runs, machines, and input order.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import os
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from . import labelcodec
from .cellgeo import CellError, LatLon
from .partition import AdaptivePartition, PointRecord, leaf_for

FORMATS = ("tsv", "jsonl")


class DatasetError(ValueError):
    """Unreadable input, unknown format, or malformed labeled file."""


@dataclass(frozen=True)
class RawRecord:
    id: str
    latitude: float
    longitude: float
    text: str


@dataclass(frozen=True)
class LabeledRecord:
    id: str
    latitude: float
    longitude: float
    text: str
    label: str


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    seed: int = 42

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise DatasetError(f"train_fraction must be in (0, 1), got {self.train_fraction!r}")
        if not isinstance(self.seed, int):
            raise DatasetError(f"seed must be an integer, got {self.seed!r}")


@dataclass
class RejectionReport:
    """Counts of rejected rows by reason, filled while the stream is consumed."""

    total_rows: int = 0
    accepted: int = 0
    reasons: Counter = field(default_factory=Counter)
    first_lines: dict = field(default_factory=dict)

    @property
    def rejected(self) -> int:
        return self.total_rows - self.accepted

    def reject(self, reason: str, line_no: int) -> None:
        self.total_rows += 1
        self.reasons[reason] += 1
        self.first_lines.setdefault(reason, line_no)

    def accept(self) -> None:
        self.total_rows += 1
        self.accepted += 1

    def to_dict(self) -> dict:
        return {
            "total_rows": self.total_rows,
            "accepted": self.accepted,
            "rejected": self.rejected,
            "reasons": dict(sorted(self.reasons.items())),
        }


def _validate_fields(id_: str, lat: float, lon: float, text: str) -> str | None:
    """Reason string for a rejection, or None if the row is valid."""
    if not id_:
        return "empty id"
    if not -90.0 <= lat <= 90.0:
        return "latitude out of range"
    if not -180.0 <= lon <= 180.0:
        return "longitude out of range"
    if not text.strip():
        return "empty text"
    return None


def _float_field(value) -> float | None:
    if isinstance(value, bool):
        return None
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            return None
    return None


def parse_records(
    path: str | os.PathLike, fmt: str
) -> tuple[Iterator[RawRecord], RejectionReport]:
    """Stream valid records in file order; the report fills as you consume.

    The TSV dialect is tab-separated with no quoting; a header row is
    auto-detected (first row whose latitude column does not parse as a
    number is skipped without being counted as a rejection).
    """
    if fmt not in FORMATS:
        raise DatasetError(f"unknown format {fmt!r}; expected one of {FORMATS}")
    if not os.path.exists(path):
        raise DatasetError(f"input file not found: {path}")
    report = RejectionReport()
    parser = _parse_tsv if fmt == "tsv" else _parse_jsonl
    return parser(path, report), report


def _parse_tsv(path, report: RejectionReport) -> Iterator[RawRecord]:
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                report.reject("blank line", line_no)
                continue
            fields = line.split("\t", 3)
            if len(fields) < 4:
                report.reject("missing fields", line_no)
                continue
            id_, lat_s, lon_s, text = fields
            lat = _float_field(lat_s)
            lon = _float_field(lon_s)
            if lat is None or lon is None:
                if line_no == 1:
                    continue  # header row, not counted
                report.reject("non-numeric coordinate", line_no)
                continue
            reason = _validate_fields(id_, lat, lon, text)
            if reason is not None:
                report.reject(reason, line_no)
                continue
            report.accept()
            yield RawRecord(id=id_, latitude=lat, longitude=lon, text=text)


def _parse_jsonl(path, report: RejectionReport) -> Iterator[RawRecord]:
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError:
                report.reject("invalid json", line_no)
                continue
            if not isinstance(obj, dict):
                report.reject("invalid json", line_no)
                continue
            missing = [k for k in ("id", "latitude", "longitude", "text") if k not in obj]
            if missing:
                report.reject(f"missing field: {missing[0]}", line_no)
                continue
            id_ = obj["id"]
            text = obj["text"]
            if not isinstance(id_, str) or not isinstance(text, str):
                report.reject("wrong field type", line_no)
                continue
            lat = _float_field(obj["latitude"])
            lon = _float_field(obj["longitude"])
            if lat is None or lon is None:
                report.reject("non-numeric coordinate", line_no)
                continue
            reason = _validate_fields(id_, lat, lon, text)
            if reason is not None:
                report.reject(reason, line_no)
                continue
            report.accept()
            yield RawRecord(id=id_, latitude=lat, longitude=lon, text=text)


def to_point(record: RawRecord) -> PointRecord:
    return PointRecord(id=record.id, loc=LatLon(record.latitude, record.longitude), text=record.text)


def label_records(
    records: Iterable[RawRecord], partition: AdaptivePartition
) -> Iterator[LabeledRecord]:
    """Attach each record's containing-leaf label."""
    for rec in records:
        leaf = leaf_for(partition, LatLon(rec.latitude, rec.longitude))
        yield LabeledRecord(
            id=rec.id,
            latitude=rec.latitude,
            longitude=rec.longitude,
            text=rec.text,
            label=labelcodec.encode(leaf),
        )


def assign_split(record_id: str, spec: SplitSpec) -> bool:
    """True if the record goes to train.

    The rule is fixed and published: take the first 8 bytes (big-endian)
    of SHA-256 over "{seed}:{id}" as a uint64 and compare the resulting
    [0, 1) bucket against train_fraction.
    """
    digest = hashlib.sha256(f"{spec.seed}:{record_id}".encode("utf-8")).digest()
    bucket = int.from_bytes(digest[:8], "big")
    return bucket < spec.train_fraction * 2.0**64


def split(records: Iterable, spec: SplitSpec) -> tuple[Iterator, Iterator]:
    """(train stream, test stream) under the hash rule.

    The two streams share one underlying pass; consuming them in tandem
    keeps memory flat, while draining one before the other buffers the
    tail of the second (itertools.tee semantics).
    """
    first, second = itertools.tee(records, 2)
    train = (rec for rec in first if assign_split(rec.id, spec))
    test = (rec for rec in second if not assign_split(rec.id, spec))
    return train, test


def write_labeled_records(records: Iterable[LabeledRecord], path: str | os.PathLike) -> int:
    """Write JSON lines; returns the record count.  Output is atomic."""
    tmp = f"{path}.tmp.{os.getpid()}"
    count = 0
    with open(tmp, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(
                json.dumps(
                    {
                        "id": rec.id,
                        "latitude": rec.latitude,
                        "longitude": rec.longitude,
                        "text": rec.text,
                        "label": rec.label,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
            count += 1
    os.replace(tmp, path)
    return count


def read_labeled_records(path: str | os.PathLike) -> Iterator[LabeledRecord]:
    """Read a labeled JSONL file strictly; malformed rows raise DatasetError."""
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{line_no}: invalid JSON: {exc.msg}") from exc
            try:
                label = obj["label"]
                labelcodec.decode(label)
                rec = LabeledRecord(
                    id=obj["id"],
                    latitude=float(obj["latitude"]),
                    longitude=float(obj["longitude"]),
                    text=obj["text"],
                    label=label,
                )
                LatLon(rec.latitude, rec.longitude)
            except (KeyError, TypeError, ValueError, labelcodec.InvalidLabel, CellError) as exc:
                raise DatasetError(f"{path}:{line_no}: invalid labeled record: {exc}") from exc
            yield rec
