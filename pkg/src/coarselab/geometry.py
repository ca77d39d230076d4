"""Bounded-geometry certificates: measure bounds, nets, covering numbers.

Certifies three quantities for a space with entourages E (probe) and F (mesh):

* upper_C: a bound on the measure of any E-bounded set (U x U inside E),
  exact by max-weight clique search on components up to 25 points, otherwise
  the sound section bound max_x mu((E o E^-1)_x); the certificate records
  which route produced the number.
* gordo_eps: min_x mu(E_x); sections all carry at least this much mass.
* covering_N: every section E_x is covered by at most N sets, each a section
  of F o F; computed as the max over x of a greedy center count inside E_x,
  centers chosen in index order with pairwise disjoint F-sections, so the
  sets (F o F)_y over centers y cover E_x by maximality.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .entourages import Entourage, connected_components
from .errors import InputError
from .spaces import FiniteCoarseSpace

_EXACT_CLIQUE_CAP = 25


@dataclass
class GeometryCertificate:
    upper_C: float | None = None
    upper_C_method: str | None = None  # "clique" | "section" | "mixed"
    gordo_eps: float | None = None
    covering_N: int | None = None
    covering_witness: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "upper_C": self.upper_C,
            "upper_C_method": self.upper_C_method,
            "gordo_eps": self.gordo_eps,
            "covering_N": self.covering_N,
            "covering_witness": {k: v for k, v in self.covering_witness.items()},
        }


# -- uniformly bounded measure ----------------------------------------------

def _max_weight_clique(adj: np.ndarray, weights: np.ndarray) -> float:
    """Exact max-weight clique by branch and bound; adj is boolean, no self edges."""
    order = np.argsort(-weights, kind="stable")
    adj = adj[np.ix_(order, order)]
    w = weights[order]
    n = len(w)
    best = 0.0

    def grow(cand: np.ndarray, acc: float):
        nonlocal best
        if acc + w[cand].sum() <= best:
            return
        if cand.size == 0:
            best = max(best, acc)
            return
        v = cand[0]
        rest = cand[1:]
        grow(rest[adj[v, rest]], acc + w[v])  # take v
        grow(rest, acc)  # skip v

    grow(np.arange(n), 0.0)
    return best


def certify_uniformly_bounded(space: FiniteCoarseSpace, E: Entourage) -> tuple[float, str]:
    """Least-effort sound bound C with every E-bounded set of measure <= C.

    Returns (C, method). E-bounded requires all pairs including the diagonal,
    so only points with (x, x) in E can participate.
    """
    m = E.matrix()
    diag = m.diagonal()
    both = m.multiply(m.T).toarray().astype(bool)  # (x,y) and (y,x) in E
    np.fill_diagonal(both, False)
    eligible = np.asarray(diag).ravel().astype(bool)

    comps = connected_components(space, E)
    best = 0.0
    methods = set()
    EEinv = None
    for comp in comps:
        el = comp[eligible[comp]]
        if el.size == 0:
            continue
        if comp.size <= _EXACT_CLIQUE_CAP:
            sub = both[np.ix_(el, el)]
            val = _max_weight_clique(sub, space.weights[el])
            methods.add("clique")
        else:
            # any E-bounded U with x in U sits inside (E o E^-1)_x
            if EEinv is None:
                EEinv = E.compose(E.inverse())
            val = max(EEinv.section_mass(int(x)) for x in el)
            methods.add("section")
        best = max(best, val)
    method = methods.pop() if len(methods) == 1 else ("mixed" if methods else "clique")
    return best, method


# -- gordo floor ------------------------------------------------------------

def certify_gordo(space: FiniteCoarseSpace, E: Entourage) -> float:
    """min_x mu(E_x); strictly positive means every section carries mass."""
    if not E.is_symmetric():
        raise InputError("gordo certification expects a symmetric entourage")
    return min(E.section_mass(x) for x in range(space.n))


# -- coarse nets ------------------------------------------------------------

def coarse_net(space: FiniteCoarseSpace, F: Entourage) -> tuple[list[int], list, bool]:
    """Greedy maximal F-separated subset in ascending index order.

    Returns (net, witness, density_ok): witness[x] is a net point y with
    (x, y) in F when one exists (net points witness themselves when F holds
    the diagonal there), else None; density_ok says every point found one.
    """
    if not F.is_symmetric():
        raise InputError("coarse net expects a symmetric probe entourage")
    n = space.n
    net: list[int] = []
    net_mask = np.zeros(n, dtype=bool)
    for x in range(n):
        sec = F.section(x)  # symmetric: (x,y) in F iff y in F_x
        if not net_mask[sec].any():
            net.append(x)
            net_mask[x] = True
    witness: list = [None] * n
    for x in range(n):
        hits = F.section(x)
        hits = hits[net_mask[hits]]
        if hits.size:
            witness[x] = int(hits[0])
    density_ok = all(w is not None for w in witness)
    return net, witness, density_ok


def covering_bound(space: FiniteCoarseSpace, F: Entourage, E: Entourage) -> tuple[int, dict]:
    """Max greedy center count inside any section E_x, centers with disjoint F-sections.

    Every point of E_x meets the F-section of some center, so the sets
    (F o F)_y over the centers cover E_x; N bounds the number of cover sets.
    """
    if not F.is_symmetric():
        raise InputError("covering bound expects a symmetric mesh entourage")
    best_n = 0
    witness: dict = {}
    for x in range(space.n):
        members = E.section(x)
        claimed = np.zeros(space.n, dtype=bool)
        centers = []
        for y in members:  # ascending index order
            sec = F.section(int(y))
            if not claimed[sec].any():
                centers.append(int(y))
                claimed[sec] = True
        if len(centers) > best_n:
            best_n = len(centers)
            witness = {"point": space.points[x], "centers": [space.points[c] for c in centers],
                       "cover": "sections of F o F intersected with the probed section"}
    return best_n, witness


def certify_geometry(space: FiniteCoarseSpace, E: Entourage, F: Entourage) -> GeometryCertificate:
    """Run all three certifications against probe E and mesh F."""
    C, method = certify_uniformly_bounded(space, E)
    N, witness = covering_bound(space, F, E)
    return GeometryCertificate(
        upper_C=C, upper_C_method=method,
        gordo_eps=certify_gordo(space, E),
        covering_N=N, covering_witness=witness,
    )
