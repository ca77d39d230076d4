"""Operators with controlled support on the weighted space.

Kernel convention throughout: a kernel T acts against the weights,
(T xi)(x) = sum_y T(x,y) xi(y) mu(y), and the inner product is
<xi, eta> = sum_x conj(xi(x)) eta(x) mu(x).  Under the unitary
xi -> sqrt(mu) xi onto plain coordinates every kernel T becomes the
symmetric conjugate D^{1/2} T D^{1/2} (D = diag(mu)), which is what the
eigensolvers see; T is self-adjoint exactly when its kernel matrix is
Hermitian.  phi records the row action on the all-ones function,
phi(x) = sum_y T(x,y) mu(y).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .entourages import Entourage
from .errors import ConsistencyError, InputError, PropertyFailure
from .spaces import FiniteCoarseSpace

_POSITIVITY_TOL = 1e-9
_FORM_TOL = 1e-10
_SPARSE_THRESHOLD = 512  # build radius Laplacians sparsely above this size


def mu_inner(space: FiniteCoarseSpace, xi: np.ndarray, eta: np.ndarray):
    return complex(np.sum(np.conj(xi) * eta * space.mu)) if np.iscomplexobj(xi) or np.iscomplexobj(eta) \
        else float(np.sum(xi * eta * space.mu))


def mu_norm(space: FiniteCoarseSpace, xi: np.ndarray) -> float:
    return float(np.sqrt(np.sum(np.abs(xi) ** 2 * space.mu)))


@dataclass
class SupportedOperator:
    space: FiniteCoarseSpace
    matrix: np.ndarray | sp.spmatrix  # kernel entries T(x, y)
    support: Entourage
    phi: np.ndarray = field(default=None)  # row action on the unit function
    laplacian_of: Entourage | None = None  # generating entourage when built as a Laplacian

    def __post_init__(self):
        n = self.space.n
        if self.matrix.shape != (n, n):
            raise InputError(f"kernel shape {self.matrix.shape} does not match the space ({n} points)")
        if sp.issparse(self.matrix):
            self.matrix = sp.csr_matrix(self.matrix)
        else:
            self.matrix = np.asarray(self.matrix)
        self._check_support()
        self.phi = self._row_action()

    def _check_support(self):
        allowed = self.support.matrix()
        rows, cols = self.matrix.nonzero()
        if rows.size == 0:
            return
        inside = np.asarray(allowed[rows, cols]).ravel().astype(bool)
        if not inside.all():
            k = int(np.flatnonzero(~inside)[0])
            x, y = int(rows[k]), int(cols[k])
            raise InputError(
                f"kernel entry at ({self.space.points[x]!r}, {self.space.points[y]!r}) "
                "lies outside the declared support")

    def _row_action(self) -> np.ndarray:
        return np.asarray(self.matrix @ self.space.mu).ravel()

    @property
    def n(self) -> int:
        return self.space.n

    def dense(self) -> np.ndarray:
        return self.matrix.toarray() if sp.issparse(self.matrix) else self.matrix

    def apply(self, xi: np.ndarray) -> np.ndarray:
        return np.asarray(self.matrix @ (np.asarray(xi) * self.space.mu)).ravel()

    def symmetric_matrix(self) -> np.ndarray:
        """The kernel conjugated into plain coordinates, D^{1/2} T D^{1/2}."""
        r = np.sqrt(self.space.mu)
        if sp.issparse(self.matrix):
            return (sp.diags(r) @ self.matrix @ sp.diags(r)).toarray()
        return r[:, None] * self.matrix * r[None, :]

    def adjoint(self) -> "SupportedOperator":
        k = self.matrix.conj().T if sp.issparse(self.matrix) else np.conj(self.matrix.T)
        return SupportedOperator(space=self.space, matrix=k, support=self.support.inverse(),
                                 laplacian_of=None)

    def is_self_adjoint(self, tol: float = 1e-10) -> bool:
        d = self.dense()
        scale = max(1.0, float(np.abs(d).max()) if d.size else 0.0)
        return bool(np.abs(d - np.conj(d.T)).max() <= tol * scale)

    def norm(self) -> float:
        """Operator norm on the weighted space: top singular value in plain coordinates."""
        s = self.symmetric_matrix()
        if np.abs(s - np.conj(s.T)).max() <= 1e-12 * max(1.0, np.abs(s).max(initial=0.0)):
            return float(np.abs(np.linalg.eigvalsh(s)).max(initial=0.0))
        return float(np.linalg.svd(s, compute_uv=False).max(initial=0.0))

    def scaled(self, a: float) -> "SupportedOperator":
        # not tagged as a Laplacian: the scaled kernel no longer matches the
        # summed-differences form the tag promises
        return SupportedOperator(space=self.space, matrix=self.matrix * a, support=self.support)

    def __add__(self, other: "SupportedOperator") -> "SupportedOperator":
        if other.space is not self.space:
            raise InputError("operators live on different spaces")
        return SupportedOperator(space=self.space, matrix=self.matrix + other.matrix,
                                 support=self.support.union(other.support))


def multiplication_operator(space: FiniteCoarseSpace, f: np.ndarray) -> SupportedOperator:
    """Diagonal kernel f(x)/mu(x), so the action is pointwise multiplication by f."""
    f = np.asarray(f)
    if f.shape != (space.n,):
        raise InputError(f"multiplier shape {f.shape} does not match the space")
    return SupportedOperator(space=space, matrix=np.diag(f / space.mu),
                             support=Entourage.diagonal(space))


def build_laplacian(space: FiniteCoarseSpace, E: Entourage) -> SupportedOperator:
    """Kernel of xi -> sum_{y in E_x} (xi(x) - xi(y)) mu(y).

    Off the diagonal the kernel is -1 on E; the diagonal entry is the section
    mass without the point itself over the point's own weight, so a diagonal
    pair in E contributes nothing.
    """
    if not E.is_symmetric():
        raise InputError("Laplacian needs a symmetric entourage")
    n = space.n
    mu = space.mu
    m = E.matrix()
    if n > _SPARSE_THRESHOLD:
        off = m.astype(np.float64)
        off.setdiag(0)
        off.eliminate_zeros()
        deg = np.asarray(off @ mu).ravel() / mu
        kernel = sp.diags(deg) - off
        kernel = sp.csr_matrix(kernel)
    else:
        adj = m.toarray().astype(bool)
        off = adj.astype(np.float64)
        np.fill_diagonal(off, 0.0)
        deg = off @ mu / mu
        kernel = np.diag(deg) - off
    support = E.union(Entourage.diagonal(space))
    return SupportedOperator(space=space, matrix=kernel, support=support, laplacian_of=E)


def quadratic_form(delta: SupportedOperator, xi: np.ndarray) -> float:
    """<Delta xi, xi> by matrix action and by the half-squared-difference sum.

    Both routes are evaluated and compared; the summed-differences value is
    returned.  Disagreement is an internal inconsistency, not bad input.
    """
    if delta.laplacian_of is None:
        raise InputError("quadratic form is defined for Laplacian operators")
    xi = np.asarray(xi)
    mu = delta.space.mu
    via_matrix = mu_inner(delta.space, delta.apply(xi), xi)
    via_matrix = float(np.real(via_matrix))

    rows, cols = delta.laplacian_of.matrix().nonzero()
    diffs = np.abs(xi[rows] - xi[cols]) ** 2
    via_sum = 0.5 * float(np.sum(diffs * mu[rows] * mu[cols]))

    scale = max(1.0, abs(via_sum), abs(via_matrix))
    if abs(via_sum - via_matrix) > _FORM_TOL * scale:
        raise ConsistencyError(
            f"quadratic form mismatch: matrix route {via_matrix!r}, summed differences {via_sum!r}")
    return via_sum


@dataclass
class PositivityReport:
    lambda_min: float
    lambda_max: float
    section_bound: float  # max_x mu(E_x) of the generating entourage
    vector_min: np.ndarray
    vector_max: np.ndarray

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.lambda_min, self.lambda_max, self.section_bound)


def verify_positivity_bounds(delta: SupportedOperator,
                             tol: float = _POSITIVITY_TOL) -> PositivityReport:
    """Check 0 <= Delta <= 2 max_x mu(E_x) on the spectrum, with witnesses."""
    if delta.laplacian_of is None:
        raise InputError("positivity bounds are stated for Laplacian operators")
    E = delta.laplacian_of
    M = max(E.section_mass(x) for x in range(delta.n))
    s = delta.symmetric_matrix()
    vals, vecs = np.linalg.eigh(s)
    r = np.sqrt(delta.space.mu)
    vec_min = vecs[:, 0] / r
    vec_max = vecs[:, -1] / r
    report = PositivityReport(lambda_min=float(vals[0]), lambda_max=float(vals[-1]),
                              section_bound=float(M), vector_min=vec_min, vector_max=vec_max)
    if vals[0] < -tol:
        raise PropertyFailure("Laplacian has a negative eigenvalue",
                              witness={"eigenvalue": float(vals[0]), "eigenvector": vec_min.tolist()})
    if vals[-1] > 2.0 * M + tol:
        raise PropertyFailure("Laplacian exceeds twice the largest section mass",
                              witness={"eigenvalue": float(vals[-1]), "bound": 2.0 * M,
                                       "eigenvector": vec_max.tolist()})
    return report


def block_squares_entourage(base) -> Entourage:
    """The union of A x A over the blocks of a blocking collection."""
    n = base.space.n
    m = np.zeros((n, n), dtype=bool)
    for blk in base.blocks:
        m[np.ix_(blk, blk)] = True
    return Entourage.from_matrix(base.space, m)


def block_domination_certificate(T: SupportedOperator, base,
                                 tol: float = _POSITIVITY_TOL) -> tuple[float, float]:
    """Certify T <= (||T|| / floor) Delta^E for E the union of block squares.

    Preconditions checked and named on failure: T positive, phi(T) = 0,
    T supported inside the block squares.  Returns (c, min eigenvalue of
    c Delta - T); the residual is certified >= -tol.
    """
    E = block_squares_entourage(base)
    if not T.support.issubset(E):
        raise InputError("operator support is not contained in the block squares")
    s = T.symmetric_matrix()
    if np.abs(s - np.conj(s.T)).max(initial=0.0) > tol * max(1.0, np.abs(s).max(initial=0.0)):
        raise InputError("operator is not self-adjoint")
    vals = np.linalg.eigvalsh(s)
    if vals.size and vals[0] < -tol:
        raise InputError(f"operator is not positive (eigenvalue {vals[0]:.3e})")
    phi_scale = max(1.0, float(np.abs(T.dense()).max(initial=0.0)))
    if np.abs(T.phi).max(initial=0.0) > 1e-9 * phi_scale:
        raise InputError("operator does not annihilate the unit function")

    norm = float(np.abs(vals).max(initial=0.0))
    eps = base.floor
    c = norm / eps
    delta = build_laplacian(T.space, E)
    diff = c * delta.symmetric_matrix() - s
    lam = float(np.linalg.eigvalsh(diff)[0])
    if lam < -tol * max(1.0, c):
        raise PropertyFailure("block domination failed", witness={"c": c, "min_eig": lam})
    return c, lam
