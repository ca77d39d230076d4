"""Warped metrics from finitely generated group actions on flat nets.

A warped system discretizes a flat base (circle or torus) at several scale
levels t.  Every level shares one uniform grid of spacing h = 1/density in
base coordinates; level t carries the rescaled geodesic metric t*d and cell
weights (h*t)^dim.  A group presentation acts through quantized maps
net -> net, and the warped distance is the shortest-path metric on the graph
with cone edges of weight t*d (cutoff 3*h*t) plus generator edges of weight
one.  Cross-level distances are +inf via the per-point level labels.

Grid indices, quantized maps, and edge weights are all deterministic, so two
runs over the same inputs produce bitwise identical tables.
"""

from __future__ import annotations

import itertools
import json
import math
import os
import struct
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from heapq import heappop, heappush
from pathlib import Path

import numpy as np

from .amenability import (FamilyVerdict, SCOPE_NOTE, folner_search,
                          thread_count, verdict_from_gaps)
from .entourages import Entourage
from .errors import InputError
from .operators import SupportedOperator, build_laplacian
from .spaces import FiniteCoarseSpace
from .spectral import deflated_constants_gap

_MAGIC = b"WARP"
_BIN_VERSION = 1
_CONE_CUTOFF_STEPS = 3  # cone edges reach grid offsets with |o| <= 3 (t*d <= 3*h*t)
_WORD_BUDGET = 10 ** 6


# -- base manifolds ----------------------------------------------------------

def _normalize_base(base: dict) -> tuple[str, int, float]:
    """Return (kind, dim, side) for a base descriptor.

    Supported kinds: {"kind": "circle"} and {"kind": "torus", "dim": d,
    "side": s}.  The circle is the 1-torus of side 1.
    """
    if not isinstance(base, dict) or "kind" not in base:
        raise InputError(f"base descriptor must be a dict with a 'kind', got {base!r}")
    kind = base["kind"]
    if kind == "circle":
        return "circle", 1, 1.0
    if kind == "torus":
        dim = int(base.get("dim", 1))
        side = float(base.get("side", 1.0))
        if dim < 1:
            raise InputError(f"torus dimension must be >= 1, got {dim}")
        if not side > 0:
            raise InputError(f"torus side must be positive, got {side}")
        return "torus", dim, side
    raise InputError(f"unknown base kind {kind!r}, expected 'circle' or 'torus'")


# -- group presentations -----------------------------------------------------

@dataclass
class Generator:
    """A named Lipschitz self-map of the base manifold.

    kind "rotation" translates by a fixed offset (mod side), "automorphism"
    applies an integer matrix (mod side), "identity" does nothing.  The
    Lipschitz constant defaults to 1 for rotations/identity and to the
    spectral norm of the matrix for automorphisms.
    """

    name: str
    kind: str
    parameter: object = None
    lipschitz: float | None = None
    inverse: str | None = None

    def __post_init__(self):
        if self.kind not in ("rotation", "automorphism", "identity"):
            raise InputError(f"generator {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == "rotation":
            self.parameter = np.atleast_1d(np.asarray(self.parameter, dtype=float))
            if self.lipschitz is None:
                self.lipschitz = 1.0
        elif self.kind == "automorphism":
            mat = np.asarray(self.parameter)
            if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
                raise InputError(f"generator {self.name!r}: automorphism needs a square matrix")
            if not np.array_equal(mat, np.round(mat)):
                raise InputError(f"generator {self.name!r}: automorphism matrix must be integer")
            self.parameter = mat.astype(np.int64)
            if self.lipschitz is None:
                self.lipschitz = float(np.linalg.norm(self.parameter.astype(float), 2))
        else:
            self.parameter = None
            if self.lipschitz is None:
                self.lipschitz = 1.0
        self.lipschitz = float(self.lipschitz)
        if not self.lipschitz > 0:
            raise InputError(f"generator {self.name!r}: Lipschitz constant must be positive")
        if self.inverse is None:
            raise InputError(f"generator {self.name!r} does not name its inverse")

    def apply(self, coords: np.ndarray, side: float) -> np.ndarray:
        """Act on (k, dim) base coordinates, wrapped back into [0, side)."""
        if self.kind == "rotation":
            return np.mod(coords + self.parameter[None, :], side)
        if self.kind == "automorphism":
            return np.mod(coords @ self.parameter.T.astype(float), side)
        return coords

    def to_json(self) -> dict:
        param = self.parameter
        if isinstance(param, np.ndarray):
            param = param.tolist()
        return {"name": self.name, "kind": self.kind, "parameter": param,
                "lipschitz": float(self.lipschitz), "inverse": self.inverse}

    @classmethod
    def from_json(cls, doc: dict) -> "Generator":
        return cls(name=doc["name"], kind=doc["kind"], parameter=doc.get("parameter"),
                   lipschitz=doc.get("lipschitz"), inverse=doc.get("inverse"))


@dataclass
class GroupPresentation:
    """Finite generating set, closed under inverses; relations are only recorded."""

    generators: list
    relations: tuple = ()

    def __post_init__(self):
        names = [g.name for g in self.generators]
        if len(set(names)) != len(names):
            raise InputError("generator names must be distinct")
        by_name = {g.name: g for g in self.generators}
        for g in self.generators:
            if g.inverse not in by_name:
                raise InputError(
                    f"generator {g.name!r} names inverse {g.inverse!r}, "
                    "which is not in the generating set")
        self.relations = tuple(self.relations)

    def generator(self, name: str) -> Generator:
        for g in self.generators:
            if g.name == name:
                return g
        raise InputError(f"no generator named {name!r}")

    def max_lipschitz(self) -> float:
        if not self.generators:
            return 1.0
        return max(g.lipschitz for g in self.generators)

    def validate_on(self, base: dict):
        """Check the inverse pairing exactly on the continuum base."""
        _, dim, side = _normalize_base(base)
        by_name = {g.name: g for g in self.generators}
        for g in self.generators:
            inv = by_name[g.inverse]
            if g.kind != inv.kind and "identity" not in (g.kind, inv.kind):
                raise InputError(f"generator {g.name!r} and inverse {inv.name!r} differ in kind")
            if g.kind == "rotation":
                if g.parameter.shape != (dim,):
                    raise InputError(
                        f"generator {g.name!r}: offset has length {g.parameter.size}, base needs {dim}")
                resid = np.mod(g.parameter + inv.parameter, side)
                resid = np.minimum(resid, side - resid)
                if np.any(resid > 1e-12 * side):
                    raise InputError(f"generators {g.name!r} and {inv.name!r} are not inverse rotations")
            elif g.kind == "automorphism":
                if g.parameter.shape != (dim, dim):
                    raise InputError(f"generator {g.name!r}: matrix shape {g.parameter.shape}, base needs {dim}")
                if not np.array_equal(g.parameter @ inv.parameter, np.eye(dim, dtype=np.int64)):
                    raise InputError(f"generators {g.name!r} and {inv.name!r} are not inverse automorphisms")

    def to_json(self) -> dict:
        return {"generators": [g.to_json() for g in self.generators],
                "relations": list(self.relations)}

    @classmethod
    def from_json(cls, doc: dict) -> "GroupPresentation":
        gens = [Generator.from_json(d) for d in doc.get("generators", [])]
        return cls(generators=gens, relations=tuple(doc.get("relations", ())))


# -- discretized levels ------------------------------------------------------

@dataclass
class WarpedLevel:
    """One scale level: the shared grid carrying the metric t*d and volume (h*t)^dim."""

    t: float
    density: int
    base: dict
    space: FiniteCoarseSpace
    grid: np.ndarray         # (n, dim) integer grid indices
    base_coords: np.ndarray  # (n, dim) coordinates in [0, side)
    h: float                 # grid spacing in base coordinates
    m: int                   # points per axis

    @property
    def dim(self) -> int:
        return self.grid.shape[1]

    def quantization_slack(self) -> float:
        """Worst-case warped-metric cost of snapping a continuum point to the net."""
        return 2.0 * self.h * self.t


def discretize_level(base: dict, t: float, density: int) -> WarpedLevel:
    """Uniform grid net for level t at the given points-per-unit density.

    Needs density >= 2*t so each warped unit length holds at least two net
    points; coarser nets cannot see generator edges against the cone metric.
    """
    _, dim, side = _normalize_base(base)
    if not t > 0:
        raise InputError(f"level parameter t must be positive, got {t}")
    if density < 2 * t:
        raise InputError(
            f"density {density} below the floor for level t={t}: "
            f"need at least {math.ceil(2 * t)} points per unit")
    m_float = density * side
    m = int(round(m_float))
    if abs(m_float - m) > 1e-9 or m < 1:
        raise InputError(f"density {density} times side {side} must be a whole number of grid points")
    h = 1.0 / density
    grid = np.indices((m,) * dim).reshape(dim, -1).T.astype(np.int64)
    base_coords = grid * h
    n = m ** dim
    space = FiniteCoarseSpace(
        points=list(range(n)),
        weights=np.full(n, (h * t) ** dim),
        metric="torus",
        coords=base_coords * t,
        side=side * t,
        levels=np.full(n, int(round(t)), dtype=int),
    )
    return WarpedLevel(t=t, density=density, base=base, space=space, grid=grid,
                       base_coords=base_coords, h=h, m=m)


def quantize(level: WarpedLevel, coords: np.ndarray) -> np.ndarray:
    """Snap base coordinates to flat net indices.

    Per axis the nearest wrapped grid index wins; an exact half-step tie goes
    to the smaller coordinate, so among equidistant net points the
    lexicographically smallest is chosen (at the wrap seam that is index 0,
    not m-1).
    """
    coords = np.atleast_1d(np.asarray(coords, dtype=float))
    if coords.ndim == 1:
        coords = coords[:, None]
    if coords.shape[1] != level.dim:
        raise InputError(f"coordinates have dimension {coords.shape[1]}, net has {level.dim}")
    m = level.m
    i_float = np.mod(coords / level.h, m)
    idx = np.ceil(i_float - 0.5).astype(np.int64)
    tie = (i_float - np.floor(i_float)) == 0.5
    idx = np.where(tie & (idx + 1 == m), m, idx) % m
    return np.ravel_multi_index(tuple(idx.T), (m,) * level.dim)


def action_maps(level: WarpedLevel, presentation: GroupPresentation) -> dict:
    """Quantized generator maps net -> net, keyed by generator name."""
    presentation.validate_on(level.base)
    _, _, side = _normalize_base(level.base)
    return {g.name: quantize(level, g.apply(level.base_coords, side))
            for g in presentation.generators}


def action_report(level: WarpedLevel, presentation: GroupPresentation) -> dict:
    """Per-generator quantization diagnostics.

    For each generator: whether the quantized map is a bijection of the net,
    how many net points collide, and how far the composite with the quantized
    inverse map sits from the identity.  Also reports the symmetrization
    defect of the group Laplacian these maps induce (zero for bijections).
    """
    maps = action_maps(level, presentation)
    n = level.space.n
    ident = np.arange(n)
    report = {"generators": {}, "symmetrization_defect": 0.0}
    for g in presentation.generators:
        qmap = maps[g.name]
        hit = np.unique(qmap)
        closure = maps[g.inverse][qmap]
        report["generators"][g.name] = {
            "bijective": bool(hit.size == n),
            "collisions": int(n - hit.size),
            "closure_defect": int(np.count_nonzero(closure != ident)),
        }
    raw = _group_kernel(level, maps)
    sym = 0.5 * (raw - raw.T)
    scale = np.sqrt(level.space.mu)
    report["symmetrization_defect"] = float(
        np.linalg.norm(scale[:, None] * sym * scale[None, :], 2))
    return report


# -- the warped shortest-path metric -----------------------------------------

def warped_graph(level: WarpedLevel, presentation: GroupPresentation):
    """Directed edge arrays (u, v, w) of the augmented metric graph.

    Cone edges join grid points within three steps per the scaled base metric
    (weight t*d); generator edges of weight one join x to the quantized image
    under every generator.  Both orientations of every edge are listed, so the
    graph is undirected as a set and the induced metric is symmetric.
    """
    maps = action_maps(level, presentation)
    n, dim, m = level.space.n, level.dim, level.m
    t, h = level.t, level.h
    ident = np.arange(n, dtype=np.int64)
    us, vs, ws = [], [], []
    for off in itertools.product(range(-_CONE_CUTOFF_STEPS, _CONE_CUTOFF_STEPS + 1), repeat=dim):
        sq = sum(c * c for c in off)
        if sq == 0 or sq > _CONE_CUTOFF_STEPS ** 2:
            continue
        # per-axis wraparound separation; a tiny net can fold an offset onto 0
        eff = [min(abs(c) % m, m - abs(c) % m) for c in off]
        eff_sq = sum(c * c for c in eff)
        if eff_sq == 0:
            continue
        weight = t * (h * math.sqrt(eff_sq))
        nbr_grid = (level.grid + np.asarray(off, dtype=np.int64)) % m
        nbr = np.ravel_multi_index(tuple(nbr_grid.T), (m,) * dim)
        us.append(ident)
        vs.append(nbr)
        ws.append(np.full(n, weight))
    for g in presentation.generators:
        qmap = maps[g.name]
        moved = qmap != ident
        if not np.any(moved):
            continue
        a, b = ident[moved], qmap[moved]
        one = np.ones(a.size)
        us.extend([a, b])
        vs.extend([b, a])
        ws.extend([one, one])
    if not us:
        return (np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64), np.zeros(0))
    return (np.concatenate(us), np.concatenate(vs), np.concatenate(ws))


def _adjacency(n: int, u: np.ndarray, v: np.ndarray, w: np.ndarray):
    order = np.argsort(u, kind="stable")
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(u, minlength=n), out=indptr[1:])
    return indptr.tolist(), v[order].tolist(), w[order].tolist()


def _dijkstra_row(n: int, indptr, nbr, wt, source: int) -> np.ndarray:
    """Plain binary-heap Dijkstra; the relaxation d + w matches the exhaustive
    relaxation oracle operation for operation, so settled values agree bitwise."""
    dist = [math.inf] * n
    dist[source] = 0.0
    heap = [(0.0, source)]
    while heap:
        d, x = heappop(heap)
        if d > dist[x]:
            continue
        for k in range(indptr[x], indptr[x + 1]):
            y = nbr[k]
            nd = d + wt[k]
            if nd < dist[y]:
                dist[y] = nd
                heappush(heap, (nd, y))
    return np.asarray(dist)


def warped_distance(level: WarpedLevel, presentation: GroupPresentation,
                    sources=None) -> np.ndarray:
    """Largest metric below both the cone metric and unit generator hops.

    Realized as single-source shortest paths on the augmented graph, one row
    per source, parallelized over sources.  The full table is symmetrized by
    taking the min of the two orientations, which only irons out summation-
    order noise since every edge is present both ways.  Unreachable pairs get
    +inf with a warning.
    """
    n = level.space.n
    u, v, w = warped_graph(level, presentation)
    indptr, nbr, wt = _adjacency(n, u, v, w)
    src = list(range(n)) if sources is None else [int(s) for s in sources]
    for s in src:
        if not 0 <= s < n:
            raise InputError(f"source index {s} outside the net of {n} points")
    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        rows = list(pool.map(lambda s: _dijkstra_row(n, indptr, nbr, wt, s), src))
    table = np.vstack(rows)
    if sources is None:
        table = np.minimum(table, table.T)
    if np.isinf(table).any():
        warnings.warn("augmented graph is disconnected; unreachable pairs set to +inf",
                      stacklevel=2)
    return table


def warped_ball_entourage(level: WarpedLevel, presentation: GroupPresentation,
                          radius: float, table: np.ndarray | None = None) -> Entourage:
    """Entourage of pairs at warped distance <= radius (always symmetric,
    always containing the diagonal for radius >= 0)."""
    if radius < 0:
        raise InputError(f"ball radius must be nonnegative, got {radius}")
    if table is None:
        table = warped_distance(level, presentation)
    mat = np.isfinite(table) & (table <= radius)
    mat = mat | mat.T
    return Entourage.from_matrix(level.space, mat)


# -- the group Laplacian -----------------------------------------------------

def _group_kernel(level: WarpedLevel, maps: dict) -> np.ndarray:
    """Kernel of sum_s (I - s) through the quantized maps, before symmetrization."""
    n = level.space.n
    ident = np.arange(n)
    plain = np.zeros((n, n))
    for qmap in maps.values():
        np.add.at(plain, (ident, qmap), -1.0)
    plain[ident, ident] += float(len(maps))
    return plain / level.space.mu[None, :]


def group_laplacian(level: WarpedLevel, presentation: GroupPresentation) -> SupportedOperator:
    """Operator acting by xi(x) -> sum_s (xi(x) - xi(s^{-1} x)) on the net.

    The generating set is inverse-closed, so summing the quantized maps of
    the formal inverses visits the same multiset of maps.  When quantization
    breaks bijectivity the kernel is replaced by its self-adjoint part; the
    discarded defect norm is available from action_report.
    """
    maps = action_maps(level, presentation)
    kernel = _group_kernel(level, maps)
    kernel = 0.5 * (kernel + kernel.T)  # uniform cell weights: adjoint kernel = transpose
    n = level.space.n
    pattern = (kernel != 0.0) | np.eye(n, dtype=bool)
    support = Entourage.from_matrix(level.space, pattern)
    return SupportedOperator(space=level.space, matrix=kernel, support=support)


# -- warped systems and the expander profile ---------------------------------

@dataclass
class WarpedSystem:
    """A family of levels over one base, sharing a single grid density."""

    base: dict
    density: int
    nets: dict = field(default_factory=dict)  # t -> WarpedLevel

    @property
    def levels(self) -> list:
        return sorted(self.nets)

    def level(self, t) -> WarpedLevel:
        try:
            return self.nets[t]
        except KeyError:
            raise InputError(f"system has no level t={t}; levels are {self.levels}") from None


def build_warped_system(base: dict, levels=(1, 2, 4, 8, 16),
                        density: int | None = None) -> WarpedSystem:
    """Discretize every level at a shared density (default: 2 * max level)."""
    levels = sorted(set(levels))
    if not levels:
        raise InputError("need at least one level")
    if density is None:
        density = int(math.ceil(2 * max(levels)))
    nets = {t: discretize_level(base, t, density) for t in levels}
    return WarpedSystem(base=base, density=density, nets=nets)


@dataclass
class WarpedProfile(FamilyVerdict):
    """Family verdict over warped-ball Laplacian gaps, with action diagnostics.

    per_level_gap holds the mean-zero spectral gap of the Laplacian of the
    warped ball {delta <= ball_radius} at each level; group_gap is the
    (level-independent) mean-zero gap of the group Laplacian itself.
    """

    ball_radius: float = 1.0
    gap_threshold: float = 0.05
    group_gap: float = 0.0
    symmetrization_defect: float = 0.0

    def to_json(self) -> dict:
        doc = super().to_json()
        doc.update({
            "ball_radius": float(self.ball_radius),
            "gap_threshold": float(self.gap_threshold),
            "group_gap": float(self.group_gap),
            "symmetrization_defect": float(self.symmetrization_defect),
        })
        return doc


def expander_profile(system: WarpedSystem, presentation: GroupPresentation,
                     ball_radius: float = 1.0, gap_threshold: float = 0.05,
                     budget: int | None = None, tables: dict | None = None) -> WarpedProfile:
    """Per-level mean-zero gaps of the warped geometry, folded into a verdict.

    The level-t gap is the constants-deflated bottom of the Laplacian built
    on the warped ball {delta <= ball_radius}, so it reflects how the warped
    metric tightens or slackens across scales; the group Laplacian contributes
    a single scale-free gap reported alongside.  A slack certificate is
    searched per level at eps = gap_threshold.  Gaps of a finite family only
    ever give evidence about the infinite system, never a proof.
    """
    ts = sorted(system.nets)
    if len(ts) < 2:
        raise InputError(f"expander profile needs at least two levels, got {len(ts)}")
    if gap_threshold <= 0:
        raise InputError("gap threshold must be positive")
    tables = dict(tables) if tables else {}

    def run_level(t):
        lvl = system.nets[t]
        table = tables.get(t)
        if table is None:
            table = warped_distance(lvl, presentation)
        ball = warped_ball_entourage(lvl, presentation, ball_radius, table=table)
        gap = deflated_constants_gap(build_laplacian(lvl.space, ball))
        outcome = folner_search(lvl.space, ball, eps=gap_threshold, budget=budget)
        return gap, outcome

    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        results = list(pool.map(run_level, ts))

    gaps = {t: g for t, (g, _) in zip(ts, results)}
    ratios = {t: o.best_ratio for t, (_, o) in zip(ts, results)}
    cert_at_largest = results[-1][1].certificate is not None
    verdict = verdict_from_gaps(gaps, gap_threshold, cert_at_largest)

    top = system.nets[ts[-1]]
    group_gap = deflated_constants_gap(group_laplacian(top, presentation))
    defect = action_report(top, presentation)["symmetrization_defect"]
    return WarpedProfile(per_level_gap=gaps, per_level_folner=ratios, verdict=verdict,
                         gap_floor=min(gaps.values()), scope_note=SCOPE_NOTE,
                         ball_radius=ball_radius, gap_threshold=gap_threshold,
                         group_gap=group_gap, symmetrization_defect=defect)


# -- the entourage decomposition check ---------------------------------------

@dataclass
class DecompositionReport:
    """Outcome of covering a warped ball by translated cone balls."""

    radius: float
    word_length: int
    word_count: int
    r_prime: float
    pair_count: int
    coverage: float
    max_witness: float
    failures: list
    ok: bool

    def to_json(self) -> dict:
        return {
            "radius": float(self.radius),
            "word_length": int(self.word_length),
            "word_count": int(self.word_count),
            "r_prime": float(self.r_prime),
            "pair_count": int(self.pair_count),
            "coverage": float(self.coverage),
            "max_witness": float(self.max_witness) if np.isfinite(self.max_witness) else None,
            "failures": [[int(a), int(b)] for a, b in self.failures],
            "ok": bool(self.ok),
        }


def verify_entourage_decomposition(level: WarpedLevel, presentation: GroupPresentation,
                                   R: float, table: np.ndarray | None = None) -> DecompositionReport:
    """Check that every pair at warped distance <= R is matched by a word.

    For each pair with delta(x, y) <= R some word g of length <= floor(R) in
    the generators must bring x within cone distance R' of y, where
    R' = L^R * R plus the quantization slack 2*h*t and L is the largest
    generator Lipschitz constant.  Reports the covered fraction (1 when the
    decomposition holds) and the largest cone distance actually needed.
    """
    if R < 0:
        raise InputError(f"radius must be nonnegative, got {R}")
    word_length = int(math.floor(R))
    n_gens = len(presentation.generators)
    if n_gens and n_gens ** word_length > _WORD_BUDGET:
        raise InputError(
            f"word enumeration needs {n_gens}^{word_length} maps, over the {_WORD_BUDGET} "
            "budget; try a smaller radius")
    maps = action_maps(level, presentation)
    if table is None:
        table = warped_distance(level, presentation)

    n = level.space.n
    ident = np.arange(n)
    word_maps = [ident]
    seen = {ident.tobytes()}
    frontier = [ident]
    for _ in range(word_length):
        grown = []
        for wmap in frontier:
            for qmap in maps.values():
                comp = qmap[wmap]
                key = comp.tobytes()
                if key not in seen:
                    seen.add(key)
                    word_maps.append(comp)
                    grown.append(comp)
        frontier = grown

    lip = presentation.max_lipschitz()
    r_prime = lip ** R * R + level.quantization_slack()
    xs, ys = np.nonzero(np.isfinite(table) & (table <= R))
    cone = level.space.dist_matrix()
    best = np.full(xs.size, np.inf)
    for wmap in word_maps:
        np.minimum(best, cone[wmap[xs], ys], out=best)
    covered = best <= r_prime
    failures = [(int(a), int(b)) for a, b in zip(xs[~covered][:10], ys[~covered][:10])]
    coverage = float(covered.mean()) if xs.size else 1.0
    max_witness = float(best[covered].max()) if covered.any() else float("-inf")
    return DecompositionReport(radius=R, word_length=word_length, word_count=len(word_maps),
                               r_prime=r_prime, pair_count=int(xs.size), coverage=coverage,
                               max_witness=max_witness, failures=failures,
                               ok=bool(coverage == 1.0))


# -- serialization -----------------------------------------------------------

def _write_bytes(path: Path, payload: bytes):
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(payload)
    os.replace(tmp, path)


def save_system(path, system: WarpedSystem, presentation: GroupPresentation,
                tables: dict, spectra: dict | None = None):
    """Write a system directory: manifest.json, per-level distance tables as
    little-endian float64 row-major blobs behind a 16-byte header, and an
    optional spectra CSV."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    files = {}
    for t in sorted(system.nets):
        if t not in tables:
            raise InputError(f"no distance table supplied for level t={t}")
        lvl = system.nets[t]
        table = np.ascontiguousarray(tables[t], dtype="<f8")
        if table.shape != (lvl.space.n, lvl.space.n):
            raise InputError(f"level t={t}: table shape {table.shape} does not match net size {lvl.space.n}")
        name = f"distances_t{t}.bin"
        header = _MAGIC + struct.pack("<I", _BIN_VERSION) + struct.pack("<Q", lvl.space.n)
        _write_bytes(root / name, header + table.tobytes(order="C"))
        files[str(t)] = name
    manifest = {
        "schema_version": 1,
        "kind": "warped-system",
        "base": system.base,
        "density": int(system.density),
        "levels": [int(t) if float(t).is_integer() else float(t) for t in sorted(system.nets)],
        "generators": [g.to_json() for g in presentation.generators],
        "relations": list(presentation.relations),
        "distance_files": files,
    }
    _write_bytes(root / "manifest.json",
                 (json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode())
    if spectra is not None:
        lines = ["level,index,eigenvalue"]
        for t in sorted(spectra):
            for i, lam in enumerate(np.asarray(spectra[t]).ravel()):
                lines.append(f"{t},{i},{lam:.17g}")
        _write_bytes(root / "spectra.csv", ("\n".join(lines) + "\n").encode())


def load_system(path):
    """Read back a system directory; returns (system, presentation, tables)."""
    root = Path(path)
    manifest_path = root / "manifest.json"
    if not manifest_path.is_file():
        raise InputError(f"{manifest_path} not found")
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("kind") != "warped-system":
        raise InputError(f"{manifest_path} does not describe a warped system")
    presentation = GroupPresentation.from_json(manifest)
    system = build_warped_system(manifest["base"], levels=manifest["levels"],
                                 density=manifest["density"])
    tables = {}
    for t in system.levels:
        name = manifest["distance_files"][str(t)]
        blob = (root / name).read_bytes()
        if blob[:4] != _MAGIC:
            raise InputError(f"{name}: bad magic {blob[:4]!r}, expected {_MAGIC!r}")
        version = struct.unpack("<I", blob[4:8])[0]
        if version != _BIN_VERSION:
            raise InputError(f"{name}: unsupported version {version}")
        n = struct.unpack("<Q", blob[8:16])[0]
        if n != system.nets[t].space.n:
            raise InputError(f"{name}: table is {n} points, net has {system.nets[t].space.n}")
        body = np.frombuffer(blob, dtype="<f8", offset=16)
        if body.size != n * n:
            raise InputError(f"{name}: payload holds {body.size} values, expected {n * n}")
        tables[t] = body.reshape(n, n).copy()
    return system, presentation, tables
