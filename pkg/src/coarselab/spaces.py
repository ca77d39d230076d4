"""Finite coarse spaces: points with a metric oracle, strictly positive weights, levels.

A space is the measured ground set everything else builds on. Distances may be
+inf (encoded "inf" in JSON); points on different levels are always at +inf
from each other regardless of the metric kind. Every loaded metric is audited
for symmetry, zero diagonal and the triangle inequality (all triples at small
n, seeded samples at large n) and fails fast with the violating triple.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError

METRIC_KINDS = ("euclidean", "torus", "explicit")

# full-matrix caching and exhaustive-audit cutoffs
_DENSE_CACHE_CAP = 4096
_FULL_AUDIT_CAP = 80
_AUDIT_SAMPLES = 20000
_AUDIT_SEED = 12345
_AUDIT_TOL = 1e-9


@dataclass
class FiniteCoarseSpace:
    """A finite measured metric space with optional level labels.

    points   : hashable ids, order fixes the integer indexing used everywhere else
    weights  : strictly positive float mass per point (the measure mu)
    metric   : "euclidean" | "torus" | "explicit"
    coords   : (n, d) array for euclidean/torus kinds
    side     : torus circumference per axis (wraparound period)
    distances: (n, n) matrix for the explicit kind
    levels   : optional integer level per point; cross-level distance is +inf
    """

    points: list
    weights: np.ndarray
    metric: str
    coords: np.ndarray | None = None
    side: float = 1.0
    distances: np.ndarray | None = None
    levels: np.ndarray | None = None
    _index: dict = field(default_factory=dict, repr=False)
    _dist_cache: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        n = len(self.points)
        if self.weights.shape != (n,):
            raise InputError(f"weights length {self.weights.shape} does not match {n} points")
        bad = np.nonzero(~(self.weights > 0.0))[0]
        if bad.size:
            i = int(bad[0])
            raise InputError(
                f"weight of point {self.points[i]!r} must be strictly positive, got {self.weights[i]}",
                detail={"point": self.points[i], "weight": float(self.weights[i])},
            )
        if self.metric not in METRIC_KINDS:
            raise InputError(f"unknown metric kind {self.metric!r}, expected one of {METRIC_KINDS}")
        if self.metric in ("euclidean", "torus"):
            if self.coords is None:
                raise InputError(f"metric {self.metric!r} requires coords")
            self.coords = np.asarray(self.coords, dtype=float)
            if self.coords.ndim == 1:
                self.coords = self.coords[:, None]
            if self.coords.shape[0] != n:
                raise InputError(f"coords rows {self.coords.shape[0]} do not match {n} points")
            if self.metric == "torus" and not self.side > 0:
                raise InputError(f"torus side must be positive, got {self.side}")
        else:
            if self.distances is None:
                raise InputError("metric 'explicit' requires a distance matrix")
            self.distances = np.asarray(self.distances, dtype=float)
            if self.distances.shape != (n, n):
                raise InputError(f"distance matrix shape {self.distances.shape} does not match n={n}")
        if self.levels is not None:
            self.levels = np.asarray(self.levels, dtype=int)
            if self.levels.shape != (n,):
                raise InputError(f"levels length {self.levels.shape} does not match {n} points")
        self._index = {p: i for i, p in enumerate(self.points)}
        if len(self._index) != n:
            raise InputError("point ids must be distinct")
        self._audit_metric()

    # -- basic accessors ---------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def mu(self) -> np.ndarray:
        return self.weights

    def index_of(self, point) -> int:
        try:
            return self._index[point]
        except KeyError:
            raise InputError(f"unknown point id {point!r}") from None

    def mass(self, indices) -> float:
        """mu(U) for a subset given as integer indices (any iterable or bool mask)."""
        idx = np.asarray(list(indices) if not isinstance(indices, np.ndarray) else indices)
        if idx.dtype == bool:
            return float(self.weights[idx].sum())
        return float(self.weights[idx.astype(int)].sum()) if idx.size else 0.0

    def total_mass(self) -> float:
        return float(self.weights.sum())

    # -- distances ---------------------------------------------------------

    def dist_row(self, i: int) -> np.ndarray:
        """Distances from point index i to every point, +inf across levels."""
        if self._dist_cache is not None:
            return self._dist_cache[i]
        row = self._raw_row(i)
        if self.levels is not None:
            row = row.copy()
            row[self.levels != self.levels[i]] = math.inf
        return row

    def dist(self, i: int, j: int) -> float:
        return float(self.dist_row(i)[j])

    def dist_matrix(self) -> np.ndarray:
        """Full (n, n) matrix; cached below the dense cap."""
        if self._dist_cache is not None:
            return self._dist_cache
        d = np.vstack([self.dist_row(i) for i in range(self.n)])
        if self.n <= _DENSE_CACHE_CAP:
            self._dist_cache = d
        return d

    def _raw_row(self, i: int) -> np.ndarray:
        if self.metric == "explicit":
            return self.distances[i]
        delta = self.coords - self.coords[i]
        if self.metric == "torus":
            delta = np.abs(delta) % self.side
            delta = np.minimum(delta, self.side - delta)
        return np.sqrt((delta * delta).sum(axis=1))

    def _pair_dist(self, ii: np.ndarray, jj: np.ndarray) -> np.ndarray:
        """Elementwise distances for index arrays; same arithmetic as dist()."""
        if self.metric == "explicit":
            d = self.distances[ii, jj]
        else:
            delta = self.coords[ii] - self.coords[jj]
            if self.metric == "torus":
                delta = np.abs(delta) % self.side
                delta = np.minimum(delta, self.side - delta)
            d = np.sqrt((delta * delta).sum(axis=1))
        if self.levels is not None:
            d = np.where(self.levels[ii] == self.levels[jj], d, math.inf)
        return d

    # -- audits ------------------------------------------------------------

    def _audit_metric(self):
        n = self.n
        if n == 0:
            raise InputError("space must contain at least one point")
        if self.metric == "explicit":
            d = self.distances
            if not np.all(np.diag(d) == 0.0):
                i = int(np.nonzero(np.diag(d) != 0.0)[0][0])
                raise InputError(f"distance d({self.points[i]!r}, same) must be 0, got {d[i, i]}")
            asym = np.nonzero(d != d.T)
            if asym[0].size:
                i, j = int(asym[0][0]), int(asym[1][0])
                raise InputError(
                    f"distances must be symmetric: d({self.points[i]!r},{self.points[j]!r})="
                    f"{d[i, j]} vs {d[j, i]}"
                )
            if np.any(d < 0):
                i, j = [int(v[0]) for v in np.nonzero(d < 0)]
                raise InputError(f"negative distance at ({self.points[i]!r},{self.points[j]!r})")
        scale = 1.0
        if n <= _FULL_AUDIT_CAP:
            d = self.dist_matrix()
            finite = d[np.isfinite(d)]
            if finite.size:
                scale = max(1.0, float(finite.max()))
            for k in range(n):
                with np.errstate(invalid="ignore"):  # inf - inf is fine, nan never flags
                    slack = d - (d[:, k][:, None] + d[k][None, :])
                bad = np.nonzero(slack > _AUDIT_TOL * scale)
                if bad[0].size:
                    i, j = int(bad[0][0]), int(bad[1][0])
                    self._triangle_fail(i, j, k)
        else:
            rng = np.random.default_rng(_AUDIT_SEED)
            ii = rng.integers(0, n, _AUDIT_SAMPLES)
            jj = rng.integers(0, n, _AUDIT_SAMPLES)
            kk = rng.integers(0, n, _AUDIT_SAMPLES)
            dij = self._pair_dist(ii, jj)
            dik = self._pair_dist(ii, kk)
            dkj = self._pair_dist(kk, jj)
            bad = np.flatnonzero(dij > dik + dkj + _AUDIT_TOL * np.maximum(1.0, dij))
            if bad.size:
                b = int(bad[0])
                self._triangle_fail(int(ii[b]), int(jj[b]), int(kk[b]))

    def _triangle_fail(self, i, j, k):
        raise InputError(
            "triangle inequality violated: "
            f"d({self.points[i]!r},{self.points[j]!r}) > "
            f"d({self.points[i]!r},{self.points[k]!r}) + d({self.points[k]!r},{self.points[j]!r})",
            detail={"triple": [self.points[i], self.points[j], self.points[k]]},
        )


# -- JSON ------------------------------------------------------------------


def _decode_distance(v):
    if isinstance(v, str):
        if v == "inf":
            return math.inf
        raise InputError(f"distance entries must be numbers or \"inf\", got {v!r}")
    if isinstance(v, (int, float)):
        return float(v)
    raise InputError(f"distance entries must be numbers or \"inf\", got {v!r}")


def space_from_json(doc: dict) -> FiniteCoarseSpace:
    """Build a space from its JSON document.

    Required: "points", "metric". Kind-dependent: "coords" (euclidean/torus,
    with optional "side"), "explicit_distances" (row-major upper triangle,
    "inf" allowed). Optional: "weights" (default 1.0 each), "levels".
    """
    if not isinstance(doc, dict):
        raise InputError("space document must be a JSON object")
    for key in ("points", "metric"):
        if key not in doc:
            raise InputError(f"space document missing required field {key!r}", detail={"field": key})
    points = doc["points"]
    if not isinstance(points, list) or not points:
        raise InputError("'points' must be a non-empty list", detail={"field": "points"})
    n = len(points)
    metric = doc["metric"]
    weights = doc.get("weights", [1.0] * n)
    if not isinstance(weights, list) or len(weights) != n:
        raise InputError(f"'weights' must be a list of length {n}", detail={"field": "weights"})
    coords = doc.get("coords")
    distances = None
    if metric == "explicit":
        tri = doc.get("explicit_distances")
        if not isinstance(tri, list) or len(tri) != n * (n - 1) // 2:
            raise InputError(
                f"'explicit_distances' must list the n(n-1)/2 = {n * (n - 1) // 2} "
                "upper-triangle entries row-major",
                detail={"field": "explicit_distances"},
            )
        distances = np.zeros((n, n))
        pos = 0
        for i in range(n):
            for j in range(i + 1, n):
                distances[i, j] = distances[j, i] = _decode_distance(tri[pos])
                pos += 1
    elif metric in ("euclidean", "torus"):
        if not isinstance(coords, list) or len(coords) != n:
            raise InputError(f"metric {metric!r} requires 'coords' with {n} rows", detail={"field": "coords"})
    return FiniteCoarseSpace(
        points=list(points),
        weights=np.asarray(weights, dtype=float),
        metric=metric,
        coords=np.asarray(coords, dtype=float) if coords is not None else None,
        side=float(doc.get("side", 1.0)),
        distances=distances,
        levels=np.asarray(doc["levels"], dtype=int) if doc.get("levels") is not None else None,
    )


def space_from_file(path) -> FiniteCoarseSpace:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(
                f"invalid JSON in {path}: {exc.msg} at line {exc.lineno} column {exc.colno}",
                detail={"line": exc.lineno, "column": exc.colno},
            ) from None
    return space_from_json(doc)
