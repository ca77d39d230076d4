"""Entourages (controlled relations) over a finite coarse space.

An entourage is a set of ordered point pairs. Two kinds exist: "radius"
(all pairs at distance <= R, lazy, always symmetric, never crosses levels
because cross-level distances are +inf) and "explicit" (a sparse 0/1 pair
matrix). Radius(inf) therefore reads "all pairs at finite distance", i.e.
the within-component relation.

Convention: pair (x, y) is in E iff matrix[x, y] is nonzero, and the section
E_x = {y : (y, x) in E} is the x-th column. Sections of unions satisfy
(E o F)_U = E_{F_U}, which the composition tests replay.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .errors import InputError
from .spaces import FiniteCoarseSpace


def _canon(mat) -> sp.csr_matrix:
    m = sp.csr_matrix(mat, dtype=bool)
    m.eliminate_zeros()
    m.sum_duplicates()
    m.sort_indices()
    return m


class Entourage:
    """A controlled relation; construct via the classmethods."""

    def __init__(self, space: FiniteCoarseSpace, kind: str, radius: Optional[float] = None,
                 matrix: Optional[sp.csr_matrix] = None):
        self.space = space
        self.kind = kind
        self.radius = radius
        self._csr = matrix
        self._csc = None

    # -- constructors ------------------------------------------------------

    @classmethod
    def from_radius(cls, space: FiniteCoarseSpace, R: float) -> "Entourage":
        if not (R >= 0):
            raise InputError(f"entourage radius must be >= 0, got {R}")
        return cls(space, "radius", radius=float(R))

    @classmethod
    def from_matrix(cls, space: FiniteCoarseSpace, matrix) -> "Entourage":
        m = _canon(matrix)
        if m.shape != (space.n, space.n):
            raise InputError(f"entourage matrix shape {m.shape} does not match n={space.n}")
        return cls(space, "explicit", matrix=m)

    @classmethod
    def from_pairs(cls, space: FiniteCoarseSpace, pairs) -> "Entourage":
        n = space.n
        rows, cols = [], []
        for x, y in pairs:
            rows.append(int(x))
            cols.append(int(y))
        data = np.ones(len(rows), dtype=bool)
        return cls.from_matrix(space, sp.coo_matrix((data, (rows, cols)), shape=(n, n)))

    @classmethod
    def diagonal(cls, space: FiniteCoarseSpace) -> "Entourage":
        return cls.from_matrix(space, sp.identity(space.n, dtype=bool, format="csr"))

    # -- materialization ---------------------------------------------------

    def matrix(self) -> sp.csr_matrix:
        """Pair matrix; materializes a radius entourage from the metric."""
        if self._csr is None:
            n = self.space.n
            rows = []
            for i in range(n):
                d = self.space.dist_row(i)
                rows.append(np.nonzero((d <= self.radius) & np.isfinite(d))[0])
            indptr = np.zeros(n + 1, dtype=np.int64)
            indptr[1:] = np.cumsum([r.size for r in rows])
            indices = np.concatenate(rows) if rows else np.empty(0, dtype=np.int64)
            data = np.ones(indices.size, dtype=bool)
            self._csr = sp.csr_matrix((data, indices, indptr), shape=(n, n))
        return self._csr

    def _col_matrix(self) -> sp.csc_matrix:
        if self._csc is None:
            self._csc = self.matrix().tocsc()
        return self._csc

    # -- queries -----------------------------------------------------------

    def section(self, x: int) -> np.ndarray:
        """E_x = {y : (y, x) in E}, sorted indices."""
        if self.kind == "radius" and self._csr is None:
            d = self.space.dist_row(x)
            return np.nonzero((d <= self.radius) & np.isfinite(d))[0]
        m = self._col_matrix()
        return np.sort(m.indices[m.indptr[x]:m.indptr[x + 1]])

    def section_of(self, U) -> np.ndarray:
        """E_U = union of sections over U, sorted indices."""
        U = np.asarray(list(U), dtype=int) if not isinstance(U, np.ndarray) else U.astype(int)
        mask = np.zeros(self.space.n, dtype=bool)
        for u in U:
            mask[self.section(int(u))] = True
        return np.nonzero(mask)[0]

    def section_mass(self, x: int) -> float:
        return float(self.space.weights[self.section(x)].sum())

    def max_section_mass(self) -> float:
        return max(self.section_mass(x) for x in range(self.space.n))

    def min_section_mass(self) -> float:
        return min(self.section_mass(x) for x in range(self.space.n))

    def contains_pair(self, x: int, y: int) -> bool:
        if self.kind == "radius" and self._csr is None:
            d = self.space.dist(x, y)
            return bool(d <= self.radius and math.isfinite(d))
        return bool(self.matrix()[x, y])

    def nnz(self) -> int:
        return int(self.matrix().nnz)

    def is_symmetric(self) -> bool:
        if self.kind == "radius":
            return True
        m = self.matrix()
        return (m != m.T).nnz == 0

    def contains_diagonal(self) -> bool:
        if self.kind == "radius":
            return True  # d(x,x) = 0 <= R for any admissible R
        return bool(self.matrix().diagonal().all())

    def issubset(self, other: "Entourage") -> bool:
        self._check_same_space(other)
        a, b = self.matrix(), other.matrix()
        return (a.astype(np.int8) - a.multiply(b).astype(np.int8)).nnz == 0

    def equals(self, other: "Entourage") -> bool:
        self._check_same_space(other)
        return (self.matrix() != other.matrix()).nnz == 0

    def is_bounded_set(self, U) -> bool:
        """U x U contained in E (diagonal pairs included)."""
        U = np.asarray(list(U), dtype=int)
        if U.size == 0:
            return True
        if self.kind == "radius" and self._csr is None:
            for u in U:
                d = self.space.dist_row(int(u))[U]
                if not np.all((d <= self.radius) & np.isfinite(d)):
                    return False
            return True
        sub = self.matrix()[U][:, U]
        return int(sub.nnz) == U.size * U.size

    # -- algebra -----------------------------------------------------------

    def inverse(self) -> "Entourage":
        return Entourage.from_matrix(self.space, self.matrix().T)

    def compose(self, other: "Entourage") -> "Entourage":
        """E o F = {(x, z) : exists y with (x, y) in E and (y, z) in F}."""
        self._check_same_space(other)
        prod = self.matrix().astype(np.int64) @ other.matrix().astype(np.int64)
        return Entourage.from_matrix(self.space, prod)

    def power(self, k: int) -> "Entourage":
        """k-fold composition E o ... o E, k >= 1 (the diagonal is never implicit)."""
        if k < 1:
            raise InputError(
                f"entourage power requires k >= 1, got {k}; "
                "use Entourage.diagonal for the identity relation"
            )
        out = self
        for _ in range(k - 1):
            out = out.compose(self)
        return out

    def union(self, other: "Entourage") -> "Entourage":
        self._check_same_space(other)
        return Entourage.from_matrix(
            self.space, self.matrix().astype(np.int8) + other.matrix().astype(np.int8))

    def difference(self, other: "Entourage") -> "Entourage":
        self._check_same_space(other)
        a = self.matrix().astype(np.int8)
        keep = a - a.multiply(other.matrix().astype(np.int8))
        return Entourage.from_matrix(self.space, keep)

    def without_diagonal(self) -> "Entourage":
        return self.difference(Entourage.diagonal(self.space))

    def with_diagonal(self) -> "Entourage":
        return self.union(Entourage.diagonal(self.space))

    def symmetrized(self) -> "Entourage":
        return self.union(self.inverse())

    def _check_same_space(self, other: "Entourage"):
        if other.space is not self.space:
            raise InputError("entourages live on different spaces")

    # -- serialization -----------------------------------------------------

    def descriptor(self) -> dict:
        if self.kind == "radius":
            r = "inf" if math.isinf(self.radius) else self.radius
            return {"kind": "radius", "radius": r}
        coo = self.matrix().tocoo()
        pairs = sorted(zip(coo.row.tolist(), coo.col.tolist()))
        return {"kind": "explicit", "pairs": [[self.space.points[i], self.space.points[j]] for i, j in pairs]}

    @classmethod
    def from_descriptor(cls, space: FiniteCoarseSpace, doc: dict) -> "Entourage":
        if not isinstance(doc, dict) or "kind" not in doc:
            raise InputError("entourage descriptor must be an object with a 'kind' field")
        if doc["kind"] == "radius":
            r = doc.get("radius")
            if r == "inf":
                r = math.inf
            if not isinstance(r, (int, float)):
                raise InputError("radius descriptor needs a numeric 'radius' (or \"inf\")",
                                 detail={"field": "radius"})
            return cls.from_radius(space, float(r))
        if doc["kind"] == "explicit":
            pairs = doc.get("pairs")
            if not isinstance(pairs, list):
                raise InputError("explicit descriptor needs a 'pairs' list", detail={"field": "pairs"})
            idx_pairs = [(space.index_of(p), space.index_of(q)) for p, q in pairs]
            return cls.from_pairs(space, idx_pairs)
        raise InputError(f"unknown entourage kind {doc['kind']!r}", detail={"field": "kind"})

    def __repr__(self):
        if self.kind == "radius":
            return f"Entourage.radius({self.radius})"
        return f"Entourage.explicit(nnz={self.nnz()})"


def connected_components(space: FiniteCoarseSpace, E: Entourage) -> list[np.ndarray]:
    """Connected components of the symmetrized E-graph, each a sorted index array.

    Ordered by smallest member, so the labeling is deterministic.
    """
    m = E.matrix()
    sym = (m + m.T).astype(bool)
    ncomp, labels = sp.csgraph.connected_components(sym, directed=False)
    comps = [np.nonzero(labels == c)[0] for c in range(ncomp)]
    comps.sort(key=lambda a: int(a[0]))
    return comps
