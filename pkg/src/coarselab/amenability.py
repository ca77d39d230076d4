"""Folner-set search and expansion verdicts for families of finite spaces.

The ratio mu(E_U)/mu(U) measures how much the one-step neighbourhood beats a
subset's own mass; a subset pushing it to 1 + eps is a certificate of slack.
Search runs three stages, each deterministic: sweep cuts along the second
eigenvector, greedy single-point moves from the best sweep set, and a full
subset scan when the space is small enough.  Searches range over nonempty
proper subsets; the whole space always has ratio exactly 1 and is admitted
as a certificate, just never produced by the search.

All verdicts about families are finite-family shadows: one entourage per
level, one epsilon, no claim about any infinite limit object.

Set COARSE_LAB_THREADS to cap the worker threads used for per-level work.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .entourages import Entourage, connected_components
from .errors import InputError
from .operators import build_laplacian
from .spectral import spectral_gap

_EXHAUSTIVE_CAP = 20
_CHUNK = 4096

SCOPE_NOTE = ("finite-family shadow: fixed entourage per level and fixed epsilon; "
              "certifies nothing beyond the levels tested")


def thread_count() -> int:
    raw = os.environ.get("COARSE_LAB_THREADS", "")
    try:
        k = int(raw)
    except ValueError:
        k = 0
    return max(1, k) if k > 0 else min(8, os.cpu_count() or 1)


def _require_folner_entourage(E: Entourage):
    if not E.is_symmetric():
        raise InputError("ratio search expects a symmetric entourage")
    if not E.contains_diagonal():
        # sections must cover the subset itself, otherwise the ratio can dip below 1
        raise InputError("ratio search expects the diagonal inside the entourage")


def folner_ratio(space, E: Entourage, subset) -> float:
    """mu(E_U) / mu(U) for a nonempty subset U of point indices."""
    _require_folner_entourage(E)
    idx = np.asarray(subset, dtype=int)
    if idx.size == 0:
        raise InputError("ratio of the empty set is undefined")
    return space.mass(E.section_of(idx)) / space.mass(idx)


@dataclass
class FolnerCertificate:
    subset: list  # point ids
    entourage: dict  # descriptor
    ratio: float
    epsilon_target: float

    @property
    def valid(self) -> bool:
        return self.ratio <= 1.0 + self.epsilon_target

    def to_json(self) -> dict:
        return {"subset": list(self.subset), "entourage": self.entourage,
                "ratio": self.ratio, "epsilon_target": self.epsilon_target}

    @classmethod
    def from_json(cls, blob: dict) -> "FolnerCertificate":
        try:
            return cls(subset=list(blob["subset"]), entourage=blob["entourage"],
                       ratio=float(blob["ratio"]), epsilon_target=float(blob["epsilon_target"]))
        except KeyError as exc:
            raise InputError(f"certificate is missing field {exc}") from exc

    def replay(self, space) -> float:
        """Recompute the ratio from scratch; raises when it drifts from the record."""
        E = Entourage.from_descriptor(space, self.entourage)
        idx = np.array([space.index_of(p) for p in self.subset], dtype=int)
        fresh = folner_ratio(space, E, idx)
        if abs(fresh - self.ratio) > 1e-12 * max(1.0, abs(self.ratio)):
            raise InputError(f"certificate does not replay: recorded {self.ratio!r}, fresh {fresh!r}")
        return fresh


@dataclass
class FolnerOutcome:
    certificate: FolnerCertificate | None
    best_ratio: float
    best_subset: list
    stage: str  # stage that produced the best ratio
    half_mass_ratio: float | None = None  # best ratio among sets of at most half the mass


class _RatioTracker:
    """Shared bookkeeping: section membership rows and running minima."""

    def __init__(self, space, E: Entourage, eps: float):
        self.space = space
        self.eps = eps
        self.mu = space.mu
        self.total = float(space.mu.sum())
        # row x holds the section E_x, so coverage of U is an OR of rows
        self.rows = E.matrix().T.toarray().astype(bool)
        self.best = np.inf
        self.best_subset: np.ndarray | None = None
        self.best_stage = "sweep"
        self.half_best: float | None = None

    def offer(self, subset: np.ndarray, ratio: float, stage: str):
        if ratio < self.best - 1e-15:
            self.best = ratio
            self.best_subset = subset
            self.best_stage = stage
        mass = float(self.mu[subset].sum())
        if mass <= 0.5 * self.total + 1e-12:
            if self.half_best is None or ratio < self.half_best:
                self.half_best = ratio

    def ratio_of(self, subset: np.ndarray) -> float:
        cover = self.rows[subset].any(axis=0)
        return float(self.mu[cover].sum() / self.mu[subset].sum())


def _sweep_order(space, E: Entourage) -> np.ndarray:
    delta = build_laplacian(space, E)
    s = delta.symmetric_matrix()
    _, vecs = np.linalg.eigh(0.5 * (s + s.T))
    v = vecs[:, 1] / np.sqrt(space.mu) if space.n > 1 else np.zeros(1)
    return np.lexsort((np.arange(space.n), v))  # ascending value, index breaks ties


def _stage_sweep(tracker: _RatioTracker, order: np.ndarray):
    n = order.size
    cover = np.zeros(n, dtype=bool)
    mass_u = 0.0
    for k in range(n - 1):  # proper prefixes only
        x = order[k]
        cover |= tracker.rows[x]
        mass_u += tracker.mu[x]
        ratio = float(tracker.mu[cover].sum() / mass_u)
        tracker.offer(order[: k + 1].copy(), ratio, "sweep")


def _stage_greedy(tracker: _RatioTracker, start: np.ndarray, budget: int):
    n = tracker.space.n
    mu = tracker.mu
    rows = tracker.rows
    in_u = np.zeros(n, dtype=bool)
    in_u[start] = True
    counts = rows[start].sum(axis=0)  # how many members reach each point
    for _ in range(budget):
        mass_u = float(mu[in_u].sum())
        mass_eu = float(mu[counts > 0].sum())
        gain_new = rows @ (mu * (counts == 0))  # extra neighbourhood mass if added
        drop_last = rows @ (mu * (counts == 1))  # neighbourhood mass lost if removed

        with np.errstate(divide="ignore", invalid="ignore"):
            add_ratio = (mass_eu + gain_new) / (mass_u + mu)
            rem_ratio = (mass_eu - drop_last) / (mass_u - mu)
        add_ratio[in_u] = np.inf
        rem_ratio[~in_u] = np.inf
        # removals may not empty the set; additions may not complete it
        if in_u.sum() == 1:
            rem_ratio[:] = np.inf
        if (~in_u).sum() == 1:
            add_ratio[:] = np.inf

        current = mass_eu / mass_u
        best_add = int(np.argmin(add_ratio))
        best_rem = int(np.argmin(rem_ratio))
        candidates = [(add_ratio[best_add], 0, best_add), (rem_ratio[best_rem], 1, best_rem)]
        ratio, is_removal, x = min(candidates)
        if not ratio < current - 1e-15:
            break
        if is_removal:
            in_u[x] = False
            counts -= rows[x]
        else:
            in_u[x] = True
            counts += rows[x]
        tracker.offer(np.flatnonzero(in_u), float(ratio), "greedy")
        if ratio <= 1.0 + tracker.eps:
            break


def _stage_exhaustive(tracker: _RatioTracker):
    n = tracker.space.n
    mu = tracker.mu
    member = tracker.rows.astype(np.int64)
    total_masks = (1 << n) - 1  # exclude the full set (proper subsets only)
    best_ratio = np.inf
    best_mask = None
    for lo in range(1, total_masks, _CHUNK):
        hi = min(lo + _CHUNK, total_masks)
        masks = np.arange(lo, hi, dtype=np.int64)
        bits = ((masks[:, None] >> np.arange(n)) & 1).astype(np.int64)
        mass_u = bits @ mu
        covered = (bits @ member) > 0
        mass_eu = covered @ mu
        ratios = mass_eu / mass_u
        k = int(np.argmin(ratios))
        if ratios[k] < best_ratio - 1e-15:
            best_ratio = float(ratios[k])
            best_mask = int(masks[k])
    if best_mask is not None:
        subset = np.flatnonzero((best_mask >> np.arange(n)) & 1)
        tracker.offer(subset, best_ratio, "exhaustive")


def folner_search(space, E: Entourage, eps: float, budget: int | None = None) -> FolnerOutcome:
    """Hunt for a proper subset with mu(E_U) <= (1 + eps) mu(U).

    Stages run in order (sweep, greedy, exhaustive for small spaces) and stop
    at the first stage that produces a certificate.  The outcome always
    reports the best ratio seen, certified or not.
    """
    _require_folner_entourage(E)
    if eps <= 0:
        raise InputError("the slack target must be positive")
    n = space.n
    if budget is None:
        budget = 50 * n
    tracker = _RatioTracker(space, E, eps)

    if n == 1:
        # no nonempty proper subsets exist; report the whole-space ratio as context
        return FolnerOutcome(certificate=None, best_ratio=1.0,
                             best_subset=[space.points[0]], stage="sweep", half_mass_ratio=None)

    _stage_sweep(tracker, _sweep_order(space, E))
    if tracker.best > 1.0 + eps:
        _stage_greedy(tracker, tracker.best_subset, budget)
    if tracker.best > 1.0 + eps and n <= _EXHAUSTIVE_CAP:
        _stage_exhaustive(tracker)

    subset_ids = [space.points[int(i)] for i in np.sort(tracker.best_subset)]
    cert = None
    if tracker.best <= 1.0 + eps:
        cert = FolnerCertificate(subset=subset_ids, entourage=E.descriptor(),
                                 ratio=tracker.best, epsilon_target=eps)
    return FolnerOutcome(certificate=cert, best_ratio=tracker.best, best_subset=subset_ids,
                         stage=tracker.best_stage, half_mass_ratio=tracker.half_best)


# -- family verdicts --------------------------------------------------------

@dataclass
class FamilyVerdict:
    per_level_gap: dict
    per_level_folner: dict
    verdict: str  # gap-bounded-below | gap-vanishing | inconclusive
    gap_floor: float
    scope_note: str = SCOPE_NOTE
    errors: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "per_level_gap": {str(k): float(v) for k, v in self.per_level_gap.items()},
            "per_level_folner": {str(k): float(v) for k, v in self.per_level_folner.items()},
            "verdict": self.verdict,
            "gap_floor": float(self.gap_floor) if np.isfinite(self.gap_floor) else None,
            "scope_note": self.scope_note,
            "errors": {str(k): v for k, v in self.errors.items()},
        }

    def to_csv(self) -> str:
        lines = ["level,gap,best_ratio"]
        for k in self.per_level_gap:
            ratio = self.per_level_folner.get(k, float("nan"))
            lines.append(f"{k},{self.per_level_gap[k]:.17g},{ratio:.17g}")
        return "\n".join(lines) + "\n"


def verdict_from_gaps(gaps: dict, threshold: float, folner_at_largest: bool) -> str:
    """Shared trend rule for level-indexed gap maps.

    Bounded below: every gap clears the threshold.  Vanishing: the largest
    level dips under the threshold, a slack certificate exists there, and no
    earlier level sat lower (single levels classify by themselves).  Anything
    else is inconclusive.
    """
    if not gaps:
        return "inconclusive"
    keys = sorted(gaps)
    values = [gaps[k] for k in keys]
    if min(values) >= threshold:
        return "gap-bounded-below"
    last = values[-1]
    trend = len(values) == 1 or any(v >= last for v in values[:-1])
    if last < threshold and folner_at_largest and trend:
        return "gap-vanishing"
    return "inconclusive"


def family_verdict(levels, gap_threshold: float, level_keys=None,
                   budget: int | None = None) -> FamilyVerdict:
    """Gap and slack per level, folded into a single trend verdict.

    levels: sequence of (space, entourage); level_keys labels them (defaults
    to positions).  Disconnected levels are recorded as errors and skipped.
    """
    if gap_threshold <= 0:
        raise InputError("gap threshold must be positive")
    keys = list(level_keys) if level_keys is not None else list(range(len(levels)))
    if len(keys) != len(levels):
        raise InputError("level keys do not match the number of levels")

    def run_level(item):
        space, E = item
        if len(connected_components(space, E)) != 1:
            return None, None, "level is disconnected under its entourage"
        gap = spectral_gap(build_laplacian(space, E)).gap
        outcome = folner_search(space, E, eps=gap_threshold, budget=budget)
        return gap, outcome, None

    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        results = list(pool.map(run_level, levels))

    gaps, folner, errors = {}, {}, {}
    cert_by_key = {}
    for key, (gap, outcome, err) in zip(keys, results):
        if err is not None:
            errors[key] = err
            continue
        gaps[key] = gap
        folner[key] = outcome.best_ratio
        cert_by_key[key] = outcome.certificate is not None

    floor = min(gaps.values()) if gaps else float("inf")
    folner_at_largest = cert_by_key.get(max(gaps)) if gaps else False
    verdict = verdict_from_gaps(gaps, gap_threshold, bool(folner_at_largest))
    return FamilyVerdict(per_level_gap=gaps, per_level_folner=folner, verdict=verdict,
                         gap_floor=floor, errors=errors)
