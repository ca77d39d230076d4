"""Shared builders for test spaces. Oracles live in the test modules themselves."""

from __future__ import annotations

import numpy as np
import pytest

from coarselab.spaces import FiniteCoarseSpace


def integer_line(n_points: int, weights=None) -> FiniteCoarseSpace:
    """Points 0..n_points-1 on the line at unit spacing."""
    coords = np.arange(n_points, dtype=float)
    w = np.ones(n_points) if weights is None else np.asarray(weights, dtype=float)
    return FiniteCoarseSpace(points=list(range(n_points)), weights=w,
                             metric="euclidean", coords=coords)


def cycle_space(n_points: int, weights=None) -> FiniteCoarseSpace:
    """n-cycle at unit spacing: torus metric with side n on coords 0..n-1."""
    coords = np.arange(n_points, dtype=float)
    w = np.ones(n_points) if weights is None else np.asarray(weights, dtype=float)
    return FiniteCoarseSpace(points=list(range(n_points)), weights=w,
                             metric="torus", coords=coords, side=float(n_points))


def random_cloud(rng: np.random.Generator, n_points: int, dim: int = 2,
                 weight_lo: float = 0.5, weight_hi: float = 2.0) -> FiniteCoarseSpace:
    coords = rng.uniform(0.0, 10.0, size=(n_points, dim))
    w = rng.uniform(weight_lo, weight_hi, size=n_points)
    return FiniteCoarseSpace(points=list(range(n_points)), weights=w,
                             metric="euclidean", coords=coords)


def percentile_radius(space: FiniteCoarseSpace, rng: np.random.Generator,
                      lo: float = 30.0, hi: float = 70.0) -> float:
    """A radius drawn between distance percentiles, away from degenerate extremes."""
    d = space.dist_matrix()
    vals = d[np.triu_indices(space.n, k=1)]
    vals = vals[np.isfinite(vals)]
    q = rng.uniform(lo, hi)
    return float(np.percentile(vals, q))


@pytest.fixture
def rng():
    return np.random.default_rng(20260822)
