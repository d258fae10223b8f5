"""Evaluation: flat accuracy, hierarchical P/R/F, mean distance error.

Hierarchical scores compare the ancestor closures of the predicted and
true labels.  Because labels are digit strings whose prefixes are
exactly their ancestors, the intersection size of two closures is the
length of the labels' longest common prefix.  Scores are
micro-averaged: numerators and denominators are summed over all pairs
before dividing.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from . import labelcodec
from .cellgeo import EARTH_RADIUS_KM, LatLon, cell_center


class MetricsError(ValueError):
    """Empty evaluation set or missing fields."""


@dataclass(frozen=True)
class EvalPair:
    """Most specific predicted label vs. gold label for one example."""

    predicted: str
    gold: str
    gold_loc: LatLon | None = None

    def __post_init__(self):
        labelcodec.decode(self.predicted)
        labelcodec.decode(self.gold)


@dataclass(frozen=True)
class EvalReport:
    flat_accuracy: float
    h_precision: float
    h_recall: float
    h_f: float
    mean_distance_km: float | None
    n: int

    def to_dict(self) -> dict:
        return {
            "flat_accuracy": self.flat_accuracy,
            "hP": self.h_precision,
            "hR": self.h_recall,
            "hF": self.h_f,
            "mean_distance_km": self.mean_distance_km,
            "n": self.n,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def to_text(self) -> str:
        """Human-readable table; "hierarchy accuracy" is an alias for hF."""
        rows = [
            ("Examples", str(self.n)),
            ("Flat accuracy", f"{self.flat_accuracy:.5f}"),
            ("Hierarchical precision (hP)", f"{self.h_precision:.5f}"),
            ("Hierarchical recall (hR)", f"{self.h_recall:.5f}"),
            ("Hierarchical F (hF, a.k.a. hierarchy accuracy)", f"{self.h_f:.5f}"),
        ]
        if self.mean_distance_km is not None:
            rows.append(("Mean distance error (km)", f"{self.mean_distance_km:.2f}"))
        width = max(len(name) for name, _ in rows)
        return "\n".join(f"{name:<{width}}  {value}" for name, value in rows)


def ancestor_set(label: str) -> set[str]:
    """All prefixes of a valid label, including the label itself."""
    labelcodec.decode(label)
    return {label[:k] for k in range(1, len(label) + 1)}


def _lcp_len(a: str, b: str) -> int:
    n = min(len(a), len(b))
    for i in range(n):
        if a[i] != b[i]:
            return i
    return n


def hierarchical_scores(pairs: Sequence[EvalPair]) -> tuple[float, float, float]:
    """(hP, hR, hF) micro-averaged over the pairs."""
    if not pairs:
        raise MetricsError("hierarchical_scores requires at least one pair")
    overlap = 0
    predicted_total = 0
    gold_total = 0
    for pair in pairs:
        overlap += _lcp_len(pair.predicted, pair.gold)
        predicted_total += len(pair.predicted)
        gold_total += len(pair.gold)
    h_precision = overlap / predicted_total
    h_recall = overlap / gold_total
    if h_precision + h_recall == 0.0:
        h_f = 0.0
    else:
        h_f = 2.0 * h_precision * h_recall / (h_precision + h_recall)
    return h_precision, h_recall, h_f


def flat_accuracy(pairs: Sequence[EvalPair]) -> float:
    """Fraction of pairs whose labels match exactly."""
    if not pairs:
        raise MetricsError("flat_accuracy requires at least one pair")
    return sum(1 for p in pairs if p.predicted == p.gold) / len(pairs)


def haversine_km(a: LatLon, b: LatLon) -> float:
    """Great-circle distance on the R = 6371 km sphere."""
    lat1, lon1 = math.radians(a.lat), math.radians(a.lon)
    lat2, lon2 = math.radians(b.lat), math.radians(b.lon)
    sin_dlat = math.sin(0.5 * (lat2 - lat1))
    sin_dlon = math.sin(0.5 * (lon2 - lon1))
    h = sin_dlat * sin_dlat + math.cos(lat1) * math.cos(lat2) * sin_dlon * sin_dlon
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def mean_distance_error(pairs: Sequence[EvalPair]) -> float:
    """Mean distance between each predicted cell's center and the true location."""
    if not pairs:
        raise MetricsError("mean_distance_error requires at least one pair")
    total = 0.0
    for pair in pairs:
        if pair.gold_loc is None:
            raise MetricsError(f"pair with gold {pair.gold!r} is missing gold_loc")
        center = cell_center(labelcodec.decode(pair.predicted))
        total += haversine_km(center, pair.gold_loc)
    return total / len(pairs)


def evaluate(pairs: Iterable[EvalPair]) -> EvalReport:
    """Full report; distance is included only when every pair has a location."""
    pairs = list(pairs)
    if not pairs:
        raise MetricsError("evaluate requires at least one pair")
    h_precision, h_recall, h_f = hierarchical_scores(pairs)
    distance = None
    if all(p.gold_loc is not None for p in pairs):
        distance = mean_distance_error(pairs)
    return EvalReport(
        flat_accuracy=flat_accuracy(pairs),
        h_precision=h_precision,
        h_recall=h_recall,
        h_f=h_f,
        mean_distance_km=distance,
        n=len(pairs),
    )
