"""Density-adaptive partitioning of the sphere into leaf cells.

Starting at the six face cells, a cell is subdivided while it holds more
than `max_cell_samples` points and is above `max_level`, so dense areas
get fine cells and sparse areas stay coarse.  The resulting leaf set is
a disjoint cover of the sphere and defines the label space for the
decoder.
"""

from __future__ import annotations

import hashlib
import json
import os
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Iterator

from . import labelcodec
from .cellgeo import DEFAULT_MAX_LEVEL, MAX_LEVEL, CellId, LatLon, latlon_to_cell

PARTITION_FORMAT_VERSION = 1

DEFAULT_MAX_CELL_SAMPLES = 10000


class PartitionError(ValueError):
    """Invalid partition parameters, structure, or file."""


@dataclass(frozen=True)
class PointRecord:
    """One geo-tagged sample."""

    id: str
    loc: LatLon
    text: str = ""

    def __post_init__(self):
        if not self.id:
            raise PartitionError("record id must be non-empty")


@dataclass(frozen=True)
class PartitionParams:
    max_cell_samples: int = DEFAULT_MAX_CELL_SAMPLES
    max_level: int = DEFAULT_MAX_LEVEL

    def __post_init__(self):
        if not isinstance(self.max_cell_samples, int) or self.max_cell_samples < 1:
            raise PartitionError(f"max_cell_samples must be >= 1, got {self.max_cell_samples!r}")
        if not isinstance(self.max_level, int) or not 0 <= self.max_level <= MAX_LEVEL:
            raise PartitionError(f"max_level must be in [0, {MAX_LEVEL}], got {self.max_level!r}")


class AdaptivePartition:
    """Immutable leaf-cell cover of the sphere with per-leaf sample counts.

    Construct via `build_partition` or `load_partition`; the constructor
    validates the disjoint-cover invariant and the per-leaf capacity
    bound, so an instance is structurally sound by construction.
    """

    def __init__(self, params: PartitionParams, leaves: dict[CellId, int]):
        self.params = params
        self._leaves = dict(sorted(leaves.items()))
        self._labels = [labelcodec.encode(c) for c in self._leaves]
        self.total_points = sum(self._leaves.values())
        self._validate()
        self._hash = hash((self.params, tuple(self._leaves.items())))

    def _validate(self) -> None:
        if not self._leaves:
            raise PartitionError("partition has no leaves")
        for cell, count in self._leaves.items():
            if not isinstance(count, int) or count < 0:
                raise PartitionError(f"leaf {labelcodec.encode(cell)} has invalid count {count!r}")
            if cell.level > self.params.max_level:
                raise PartitionError(
                    f"leaf {labelcodec.encode(cell)} is deeper than max_level={self.params.max_level}"
                )
            if cell.level < self.params.max_level and count > self.params.max_cell_samples:
                raise PartitionError(
                    f"leaf {labelcodec.encode(cell)} holds {count} samples, over the "
                    f"max_cell_samples={self.params.max_cell_samples} cap"
                )
        # Antichain: in sorted label order a leaf that is an ancestor of
        # another leaf sits immediately before a label it prefixes.
        labels = self._labels
        for a, b in zip(labels, labels[1:]):
            if b.startswith(a):
                raise PartitionError(f"overlapping leaves: {a} is an ancestor of {b}")
        # Full cover: every internal trie node must have all 4 children,
        # and all 6 faces must be present.
        leaf_set = set(labels)
        internal = {label[:k] for label in labels for k in range(1, len(label))}
        if overlap := internal & leaf_set:
            raise PartitionError(f"overlapping leaves under {sorted(overlap)[0]}")
        for face in labelcodec.FACE_DIGITS:
            if face not in leaf_set and face not in internal:
                raise PartitionError(f"missing face cell {face}: leaves do not cover the sphere")
        for node in internal:
            for digit in labelcodec.CHILD_DIGITS:
                child = node + digit
                if child not in leaf_set and child not in internal:
                    raise PartitionError(f"missing cell {child}: leaves do not cover the sphere")

    def leaves(self) -> Iterator[tuple[CellId, int]]:
        """(cell, count) pairs in lexicographic label order."""
        return iter(self._leaves.items())

    def leaf_labels(self) -> list[str]:
        """Leaf labels in lexicographic order."""
        return list(self._labels)

    def leaf_count(self) -> int:
        return len(self._leaves)

    def is_leaf(self, cell: CellId) -> bool:
        return cell in self._leaves

    def count_of(self, cell: CellId) -> int:
        return self._leaves[cell]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, AdaptivePartition)
            and self.params == other.params
            and self._leaves == other._leaves
        )

    def __hash__(self) -> int:
        return self._hash


def build_partition(points: Iterable[PointRecord], params: PartitionParams) -> AdaptivePartition:
    """Build the adaptive leaf set for a stream of points.

    The result depends only on the multiset of locations and the params,
    not on input order: points are first counted at max_level resolution,
    then the tree is collapsed top-down wherever the subdivision
    predicate (count > max_cell_samples and level < max_level) fails.
    """
    deepest = Counter()
    for rec in points:
        deepest[latlon_to_cell(rec.loc, params.max_level)] += 1

    by_level: list[dict[CellId, int]] = [dict() for _ in range(params.max_level + 1)]
    by_level[params.max_level] = dict(deepest)
    for level in range(params.max_level, 0, -1):
        parents = by_level[level - 1]
        for cell, count in by_level[level].items():
            parent = CellId(cell.face, cell.path[:-1])
            parents[parent] = parents.get(parent, 0) + count

    leaves: dict[CellId, int] = {}

    def descend(cell: CellId) -> None:
        count = by_level[cell.level].get(cell, 0)
        if count > params.max_cell_samples and cell.level < params.max_level:
            for digit in range(4):
                descend(CellId(cell.face, cell.path + (digit,)))
        else:
            leaves[cell] = count

    for face in range(6):
        descend(CellId(face))
    return AdaptivePartition(params, leaves)


def leaf_for(partition: AdaptivePartition, p: LatLon) -> CellId:
    """The unique leaf whose region contains `p`."""
    deepest = latlon_to_cell(p, partition.params.max_level)
    for level in range(partition.params.max_level + 1):
        candidate = CellId(deepest.face, deepest.path[:level])
        if partition.is_leaf(candidate):
            return candidate
    raise AssertionError("partition cover invariant violated")  # pragma: no cover


def to_json_bytes(partition: AdaptivePartition) -> bytes:
    """Canonical single-document serialization; also the checksum input."""
    doc = {
        "version": PARTITION_FORMAT_VERSION,
        "params": {
            "max_cell_samples": partition.params.max_cell_samples,
            "max_level": partition.params.max_level,
        },
        "leaves": [
            {"label": labelcodec.encode(cell), "count": count}
            for cell, count in partition.leaves()
        ],
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8") + b"\n"


def partition_checksum(partition: AdaptivePartition) -> str:
    return hashlib.sha256(to_json_bytes(partition)).hexdigest()


def save_partition(partition: AdaptivePartition, path: str | os.PathLike) -> None:
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(to_json_bytes(partition))
    os.replace(tmp, path)


def load_partition(path: str | os.PathLike) -> AdaptivePartition:
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise PartitionError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}") from exc
    return _partition_from_doc(doc, source=str(path))


def _partition_from_doc(doc, source: str) -> AdaptivePartition:
    if not isinstance(doc, dict):
        raise PartitionError(f"{source}: expected a JSON object at top level")
    if doc.get("version") != PARTITION_FORMAT_VERSION:
        raise PartitionError(
            f"{source}: field 'version': expected {PARTITION_FORMAT_VERSION}, got {doc.get('version')!r}"
        )
    params_doc = doc.get("params")
    if not isinstance(params_doc, dict):
        raise PartitionError(f"{source}: field 'params': expected an object")
    try:
        params = PartitionParams(
            max_cell_samples=params_doc.get("max_cell_samples"),
            max_level=params_doc.get("max_level"),
        )
    except PartitionError as exc:
        raise PartitionError(f"{source}: field 'params': {exc}") from exc
    leaves_doc = doc.get("leaves")
    if not isinstance(leaves_doc, list):
        raise PartitionError(f"{source}: field 'leaves': expected an array")
    leaves: dict[CellId, int] = {}
    for idx, entry in enumerate(leaves_doc):
        where = f"{source}: leaves[{idx}]"
        if not isinstance(entry, dict):
            raise PartitionError(f"{where}: expected an object")
        try:
            cell = labelcodec.decode(entry.get("label"), max_level=params.max_level)
        except labelcodec.InvalidLabel as exc:
            raise PartitionError(f"{where}: field 'label': {exc}") from exc
        count = entry.get("count")
        if not isinstance(count, int) or isinstance(count, bool) or count < 0:
            raise PartitionError(f"{where}: field 'count': expected a non-negative integer")
        if cell in leaves:
            raise PartitionError(f"{where}: duplicate leaf {entry['label']}")
        leaves[cell] = count
    try:
        return AdaptivePartition(params, leaves)
    except PartitionError as exc:
        raise PartitionError(f"{source}: {exc}") from exc
