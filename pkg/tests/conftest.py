"""Shared fixtures: a deterministic clustered corpus and artifacts built
from it once per session."""

from __future__ import annotations

import math
import random

import pytest

from geocells import decode, labelcodec
from geocells.cellgeo import LatLon
from geocells.dataset import LabeledRecord
from geocells.partition import (
    AdaptivePartition,
    PartitionParams,
    PointRecord,
    build_partition,
    leaf_for,
)

CLUSTERS = [
    (48.85, 2.35, "tour eiffel seine paris"),
    (40.71, -74.0, "hudson brooklyn york"),
    (-33.86, 151.2, "harbour opera sydney"),
    (35.68, 139.69, "shibuya tokyo rail"),
]


def make_cluster_points(
    seed: int = 7, per_cluster: int = 60, spread: float = 0.5
) -> list[PointRecord]:
    rng = random.Random(seed)
    points = []
    for ci, (lat, lon, words) in enumerate(CLUSTERS):
        for i in range(per_cluster):
            la = max(-89.9, min(89.9, lat + rng.gauss(0.0, spread)))
            lo = ((lon + rng.gauss(0.0, spread) + 180.0) % 360.0) - 180.0
            points.append(PointRecord(id=f"{ci}-{i}", loc=LatLon(la, lo), text=words))
    return points


def label_points(points, partition) -> list[LabeledRecord]:
    return [
        LabeledRecord(
            id=p.id,
            latitude=p.loc.lat,
            longitude=p.loc.lon,
            text=p.text,
            label=labelcodec.encode(leaf_for(partition, p.loc)),
        )
        for p in points
    ]


@pytest.fixture(scope="session")
def cluster_points() -> list[PointRecord]:
    return make_cluster_points()


@pytest.fixture(scope="session")
def cluster_partition(cluster_points) -> AdaptivePartition:
    return build_partition(
        cluster_points, PartitionParams(max_cell_samples=30, max_level=6)
    )


@pytest.fixture(scope="session")
def cluster_labeled(cluster_points, cluster_partition) -> list[LabeledRecord]:
    return label_points(cluster_points, cluster_partition)


@pytest.fixture(scope="session")
def cluster_model(cluster_labeled, cluster_partition) -> decode.BaselineModel:
    return decode.train_baseline(cluster_labeled, cluster_partition)


@pytest.fixture(scope="session")
def empty_partition() -> AdaptivePartition:
    return build_partition([], PartitionParams())


_CORPUS_VOCAB = ["alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel"]


def make_random_corpus(seed: int):
    """Small random corpus with a shallow partition (leaf count <= 96).

    Returns (model, partition, queries) where queries mixes training
    texts, unseen token combinations, and the empty string.
    """
    rng = random.Random(seed)
    centers = [
        (rng.uniform(-60.0, 60.0), rng.uniform(-170.0, 170.0))
        for _ in range(rng.randrange(2, 5))
    ]
    records = []
    for i in range(rng.randrange(30, 80)):
        ci = rng.randrange(len(centers))
        lat = max(-89.9, min(89.9, centers[ci][0] + rng.gauss(0.0, 2.0)))
        lon = math.remainder(centers[ci][1] + rng.gauss(0.0, 2.0), 360.0)
        words = [
            _CORPUS_VOCAB[(2 * ci + rng.randrange(3)) % len(_CORPUS_VOCAB)]
            for _ in range(rng.randrange(1, 5))
        ]
        records.append((f"r{i}", lat, lon, " ".join(words)))
    params = PartitionParams(
        max_cell_samples=rng.randrange(2, 10), max_level=rng.randrange(1, 3)
    )
    partition = build_partition(
        [PointRecord(r[0], LatLon(r[1], r[2])) for r in records], params
    )
    labeled = [
        LabeledRecord(
            id=r[0],
            latitude=r[1],
            longitude=r[2],
            text=r[3],
            label=labelcodec.encode(leaf_for(partition, LatLon(r[1], r[2]))),
        )
        for r in records
    ]
    model = decode.train_baseline(
        labeled, partition, alpha=rng.choice([0.5, 1.0, 2.0])
    )
    queries = [records[0][3], records[-1][3], "alpha hotel", "unseen words only", ""]
    return model, partition, queries


def exhaustive_ranking(model: decode.BaselineModel, text: str):
    """Positive-posterior leaves ranked by (-probability, label)."""
    post = model.posterior(text)
    ranked = sorted(
        ((label, p) for label, p in post.items() if p > 0.0),
        key=lambda item: (-item[1], item[0]),
    )
    return ranked


def _assert_valid_ring(ring) -> None:
    assert isinstance(ring, list)
    assert len(ring) >= 4
    assert ring[0] == ring[-1]
    for pos in ring:
        assert isinstance(pos, list) and len(pos) == 2
        lon, lat = pos
        assert -180.0 <= lon <= 180.0
        assert -90.0 <= lat <= 90.0
    area = 0.0
    for (x1, y1), (x2, y2) in zip(ring, ring[1:]):
        area += x1 * y2 - x2 * y1
    assert area > 0.0  # exterior rings wind counterclockwise


def assert_valid_geojson_geometry(geom) -> None:
    """Structural GeoJSON polygon checks: closure, ranges, CCW winding."""
    assert geom["type"] in ("Polygon", "MultiPolygon")
    if geom["type"] == "Polygon":
        polygons = [geom["coordinates"]]
    else:
        polygons = geom["coordinates"]
        assert len(polygons) >= 2
    for rings in polygons:
        assert len(rings) >= 1
        for ring in rings:
            _assert_valid_ring(ring)


def assert_same_ranking(predictions, expected, tol: float = 1e-12) -> None:
    """Ranked lists agree up to probability ties within tol.

    Same labels, probabilities equal within tol, and everywhere the
    expected ranking has a gap wider than tol the same labels sit above
    the gap.  (Exact order inside a tie depends on float round-off in
    whichever path computed the probabilities, so it is not compared.)
    """
    got = [(p.label, p.probability) for p in predictions]
    assert len(got) == len(expected)
    got_map = dict(got)
    expected_map = dict(expected)
    assert got_map.keys() == expected_map.keys()
    for label, prob in expected_map.items():
        assert got_map[label] == pytest.approx(prob, abs=tol), label
    for i in range(len(expected) - 1):
        if expected[i][1] - expected[i + 1][1] > tol:
            above_expected = {label for label, _ in expected[: i + 1]}
            above_got = {label for label, _ in got[: i + 1]}
            assert above_got == above_expected
