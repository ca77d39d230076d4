"""Blockings: partition a space into bounded blocks and color them apart.

complete_blocking picks centers greedily in ascending index order, keeping a
center only when its section is disjoint from every section already claimed.
Each center's section seeds a block; every remaining point is handed to the
first center that reaches it in two steps.  The blocks partition the space,
each block sits inside the doubled section of its center, and the union
E^2 u E^3 u E^4 bounds every block.

decompose_entourage expands each block by one E-step, colors blocks whose
expansions touch with first-fit, and returns one part per color: the disjoint
union of expanded-block squares of that color.  The parts cover E.

decompose_operator splits a kernel supported in E along the blocks by row
projection, grouped by color; the pieces sum back to the kernel exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .entourages import Entourage
from .errors import ConsistencyError, InputError
from .spaces import FiniteCoarseSpace


def _require_symmetric_reflexive(E: Entourage, what: str):
    if not E.is_symmetric():
        raise InputError(f"{what} expects a symmetric entourage")
    if not E.contains_diagonal():
        raise InputError(f"{what} expects the diagonal inside the entourage")


@dataclass
class BlockingCollection:
    space: FiniteCoarseSpace
    blocks: list[np.ndarray]  # index arrays, pairwise disjoint, union = all points
    bound: Entourage  # every block is bound-bounded
    floor: float  # min mass over blocks
    centers: list[int] | None = None

    def block_of(self) -> np.ndarray:
        """Index of the owning block per point."""
        owner = np.full(self.space.n, -1, dtype=int)
        for i, blk in enumerate(self.blocks):
            owner[blk] = i
        return owner

    def to_json(self) -> dict:
        return {
            "blocks": [[self.space.points[int(x)] for x in blk] for blk in self.blocks],
            "bound": self.bound.descriptor(),
            "floor": self.floor,
        }

    @classmethod
    def from_json(cls, space: FiniteCoarseSpace, blob: dict) -> "BlockingCollection":
        try:
            blocks = [np.array([space.index_of(p) for p in blk], dtype=int)
                      for blk in blob["blocks"]]
            bound = Entourage.from_descriptor(space, blob["bound"])
            floor = float(blob["floor"])
        except KeyError as exc:
            raise InputError(f"blocking record is missing field {exc}") from exc
        coll = cls(space=space, blocks=blocks, bound=bound, floor=floor)
        coll.validate()
        return coll

    def validate(self):
        seen = np.zeros(self.space.n, dtype=bool)
        for i, blk in enumerate(self.blocks):
            if blk.size == 0:
                raise InputError(f"block {i} is empty")
            if seen[blk].any():
                raise InputError(f"block {i} overlaps an earlier block")
            seen[blk] = True
            if not self.bound.is_bounded_set(blk):
                raise InputError(f"block {i} is not bounded by the recorded entourage")
        if not seen.all():
            missing = self.space.points[int(np.flatnonzero(~seen)[0])]
            raise InputError(f"point {missing!r} belongs to no block")
        masses = [self.space.mass(blk) for blk in self.blocks]
        if abs(min(masses) - self.floor) > 1e-9 * max(1.0, abs(self.floor)):
            raise InputError("recorded floor does not match the lightest block")


def complete_blocking(space: FiniteCoarseSpace, E: Entourage) -> BlockingCollection:
    _require_symmetric_reflexive(E, "blocking")
    n = space.n

    centers: list[int] = []
    claimed = np.zeros(n, dtype=bool)
    for x in range(n):
        sec = E.section(x)
        if not claimed[sec].any():
            centers.append(x)
            claimed[sec] = True

    owner = np.full(n, -1, dtype=int)
    for i, c in enumerate(centers):
        owner[E.section(c)] = i  # sections are pairwise disjoint
    EE = E.compose(E)
    leftovers = np.flatnonzero(owner < 0)
    if leftovers.size:
        reach = EE.matrix()[leftovers][:, centers].toarray().astype(bool)
        for r, x in enumerate(leftovers):
            # first center whose doubled section holds x; maximality guarantees one
            hits = np.flatnonzero(reach[r])
            if hits.size == 0:
                raise ConsistencyError(f"point {space.points[int(x)]!r} escaped every doubled section")
            owner[x] = int(hits[0])

    blocks = [np.flatnonzero(owner == i) for i in range(len(centers))]
    bound = EE.union(E.power(3)).union(E.power(4))
    floor = min(space.mass(blk) for blk in blocks)
    return BlockingCollection(space=space, blocks=blocks, bound=bound,
                              floor=floor, centers=centers)


@dataclass
class EntourageDecomposition:
    space: FiniteCoarseSpace
    blocking: BlockingCollection
    expanded: list[np.ndarray]  # block plus one E-step
    colors: list[int]
    parts: list[Entourage] = field(default_factory=list)
    part_bound: Entourage | None = None

    @property
    def n_colors(self) -> int:
        return max(self.colors) + 1 if self.colors else 0


def decompose_entourage(space: FiniteCoarseSpace, E: Entourage,
                        blocking: BlockingCollection | None = None) -> EntourageDecomposition:
    _require_symmetric_reflexive(E, "entourage decomposition")
    if blocking is None:
        blocking = complete_blocking(space, E)
    n = space.n
    k = len(blocking.blocks)

    expanded = []
    for blk in blocking.blocks:
        mask = np.zeros(n, dtype=bool)
        mask[blk] = True
        mask[E.section_of(blk)] = True
        expanded.append(np.flatnonzero(mask))

    masks = np.zeros((k, n), dtype=bool)
    for i, ex in enumerate(expanded):
        masks[i, ex] = True
    touch = masks @ masks.T  # expansions sharing a point interfere

    colors: list[int] = []
    for i in range(k):
        used = {colors[j] for j in range(i) if touch[i, j]}
        c = 0
        while c in used:
            c += 1
        colors.append(c)

    parts = []
    for c in range(max(colors) + 1):
        m = np.zeros((n, n), dtype=bool)
        for i in range(k):
            if colors[i] == c:
                m[np.ix_(expanded[i], expanded[i])] = True
        parts.append(Entourage.from_matrix(space, m))

    G = blocking.bound.union(E.compose(blocking.bound))
    part_bound = G.compose(G.inverse())
    return EntourageDecomposition(space=space, blocking=blocking, expanded=expanded,
                                  colors=colors, parts=parts, part_bound=part_bound)


def decompose_operator(kernel: np.ndarray,
                       decomposition: EntourageDecomposition) -> list[np.ndarray]:
    """Row-project a kernel onto each color class; pieces sum to the kernel exactly.

    Entry (x, y) lands in exactly one piece (the color of the block owning row
    x), all other pieces hold zero there, so the float sum is bitwise equal.
    """
    blocking = decomposition.blocking
    n = blocking.space.n
    kernel = np.asarray(kernel)
    if kernel.shape != (n, n):
        raise InputError(f"kernel shape {kernel.shape} does not match the space ({n} points)")
    pieces = [np.zeros_like(kernel) for _ in range(decomposition.n_colors)]
    for i, blk in enumerate(blocking.blocks):
        pieces[decomposition.colors[i]][blk, :] = kernel[blk, :]
    return pieces
