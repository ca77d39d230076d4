"""Spectra of supported operators: gaps, kernels, and the heat transform.

All solves happen in plain coordinates (conjugate by sqrt of the weights);
reports translate back.  Dense solves below _DENSE_THRESHOLD points, shifted
deflated Krylov above it.  Every report is for the concrete action on the
weighted space and says so in its representation label; no claim is made
about any completion beyond it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .entourages import Entourage, connected_components
from .errors import ConsistencyError, ConvergenceError, InputError
from .operators import SupportedOperator, build_laplacian
from .spaces import FiniteCoarseSpace

_DENSE_THRESHOLD = 2000
_ITER_TOL = 1e-8
_KERNEL_REL = 1e-8  # |lambda| <= rel * max(1, lambda_max) counts as kernel
_ARPACK_SEED = 902166  # start vector for eigsh; keeps reruns bitwise stable


@dataclass
class SpectralReport:
    eigenvalues: np.ndarray  # ascending; full spectrum when dense, partial when iterative
    gap: float
    kernel_dim: int
    kernel_basis_is_locally_constant: bool
    method: str  # "dense" | "iterative"
    residual: float
    representation: str = "standard"

    def to_json(self) -> dict:
        return {
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "gap": float(self.gap),
            "kernel_dim": int(self.kernel_dim),
            "kernel_basis_is_locally_constant": bool(self.kernel_basis_is_locally_constant),
            "method": self.method,
            "residual": float(self.residual),
            "representation": self.representation,
        }

    def to_csv(self) -> str:
        lines = ["eigenvalue"]
        lines += [f"{float(v):.17g}" for v in self.eigenvalues]
        return "\n".join(lines) + "\n"


def _component_indicators(space: FiniteCoarseSpace, components: list[np.ndarray]) -> np.ndarray:
    """Columns D^{1/2} 1_C, normalized: the plain-coordinate kernel basis."""
    r = np.sqrt(space.mu)
    cols = np.zeros((space.n, len(components)))
    for j, comp in enumerate(components):
        cols[comp, j] = r[comp]
        cols[:, j] /= np.linalg.norm(cols[:, j])
    return cols


def _symmetric(op: SupportedOperator):
    r = np.sqrt(op.space.mu)
    if sp.issparse(op.matrix):
        return sp.csr_matrix(sp.diags(r) @ op.matrix @ sp.diags(r))
    return op.symmetric_matrix()


def spectral_gap(delta: SupportedOperator, components: list[np.ndarray] | None = None,
                 dense_threshold: int = _DENSE_THRESHOLD) -> SpectralReport:
    space = delta.space
    if components is None:
        components = connected_components(space, delta.support)
    n = space.n
    if n < dense_threshold:
        return _gap_dense(delta, components)
    return _gap_iterative(delta, components)


def _gap_dense(delta: SupportedOperator, components) -> SpectralReport:
    space = delta.space
    s = _symmetric(delta)
    if sp.issparse(s):
        s = s.toarray()
    scale = max(1.0, float(np.abs(s).max(initial=0.0)))
    if np.abs(s - s.T).max(initial=0.0) > 1e-10 * scale:
        raise InputError("operator is not self-adjoint")
    s = 0.5 * (s + s.T)
    vals, vecs = np.linalg.eigh(s)
    if vals[0] < -1e-8 * max(1.0, vals[-1]):
        raise InputError(f"operator is not positive (eigenvalue {vals[0]:.3e})")
    thr = _KERNEL_REL * max(1.0, float(vals[-1]))
    kernel_dim = int(np.sum(np.abs(vals) <= thr))
    gap = float(vals[kernel_dim]) if kernel_dim < len(vals) else 0.0

    resid = float(np.linalg.norm(s @ vecs - vecs * vals, axis=0).max(initial=0.0))

    locally_constant = kernel_dim == len(components)
    if locally_constant:
        kernel = vecs[:, :kernel_dim]
        ind = _component_indicators(space, components)
        # indicators must lie in the computed kernel span (dimensions already match)
        proj = kernel @ (kernel.T @ ind)
        locally_constant = bool(np.linalg.norm(proj - ind, axis=0).max(initial=0.0) <= 1e-6)
    return SpectralReport(eigenvalues=vals, gap=gap, kernel_dim=kernel_dim,
                          kernel_basis_is_locally_constant=locally_constant,
                          method="dense", residual=resid)


def _gap_iterative(delta: SupportedOperator, components) -> SpectralReport:
    space = delta.space
    n = space.n
    s = _symmetric(delta)
    s = sp.csr_matrix(s) if not sp.issparse(s) else s
    kernel = _component_indicators(space, components)

    # known kernel must actually be kernel
    kres = np.linalg.norm(s @ kernel, axis=0).max(initial=0.0)
    if kres > 1e-8:
        raise ConsistencyError(f"declared kernel basis fails to annihilate (residual {kres:.3e})")

    def project(v):
        return v - kernel @ (kernel.T @ v)

    # fixed start vector: ARPACK's own seed advances across calls in a
    # process, which would make repeated runs drift at the last few digits
    v0 = np.random.default_rng(_ARPACK_SEED).standard_normal(n)

    # upper shift: anything >= top of the spectrum
    try:
        top = float(spla.eigsh(s, k=1, which="LA", return_eigenvectors=False,
                               maxiter=10 * n, tol=_ITER_TOL, v0=v0)[0])
    except spla.ArpackNoConvergence as exc:
        raise ConvergenceError("largest eigenvalue estimate did not converge",
                               residual=float("nan")) from exc
    sigma = top + 1.0

    def shifted(v):
        w = project(v)
        return sigma * w - project(s @ w)

    op = spla.LinearOperator((n, n), matvec=shifted, dtype=float)
    try:
        theta, vec = spla.eigsh(op, k=1, which="LA", maxiter=10 * n, tol=_ITER_TOL,
                            v0=v0)
    except spla.ArpackNoConvergence as exc:
        best = float("nan")
        if exc.eigenvalues is not None and len(exc.eigenvalues):
            best = float(sigma - exc.eigenvalues[0])
        raise ConvergenceError("deflated gap iteration did not converge",
                               residual=best) from exc
    gap = float(sigma - theta[0])
    v = project(vec[:, 0])
    v /= np.linalg.norm(v)
    resid = float(np.linalg.norm(s @ v - gap * v))

    thr = _KERNEL_REL * max(1.0, top)
    if gap <= thr:
        raise ConsistencyError("smallest deflated eigenvalue sits at the kernel threshold")
    kernel_dim = kernel.shape[1]
    vals = np.concatenate([np.zeros(kernel_dim), [gap]])
    return SpectralReport(eigenvalues=vals, gap=gap, kernel_dim=kernel_dim,
                          kernel_basis_is_locally_constant=True,
                          method="iterative", residual=resid)


def deflated_constants_gap(delta: SupportedOperator) -> float:
    """Smallest eigenvalue orthogonal to the constant function, connected or not."""
    space = delta.space
    s = _symmetric(delta)
    if sp.issparse(s):
        s = s.toarray()
    s = 0.5 * (s + s.T)
    w = np.sqrt(space.mu)
    w = w / np.linalg.norm(w)
    # Householder reflector sending e_0 to w; columns 1.. span the complement
    u = w.copy()
    u[0] += np.sign(w[0]) if w[0] != 0 else 1.0
    u /= np.linalg.norm(u)
    H = np.eye(space.n) - 2.0 * np.outer(u, u)
    Q = H[:, 1:]
    return float(np.linalg.eigvalsh(Q.T @ s @ Q)[0])


# -- heat -------------------------------------------------------------------

def heat_operator(delta_m: SupportedOperator) -> SupportedOperator:
    """I - exp(-input), spectrally, supported within components of the input."""
    space = delta_m.space
    if not delta_m.is_self_adjoint():
        raise InputError("heat transform needs a self-adjoint operator")
    s = _symmetric(delta_m)
    if sp.issparse(s):
        s = s.toarray()
    s = 0.5 * (s + s.T)
    vals, vecs = np.linalg.eigh(s)
    if vals[0] < -1e-8 * max(1.0, abs(float(vals[-1]))):
        raise InputError(f"heat transform needs a positive operator (eigenvalue {vals[0]:.3e})")
    sh = (vecs * (1.0 - np.exp(-vals))) @ vecs.T
    sh = 0.5 * (sh + sh.T)

    comps = connected_components(space, delta_m.support)
    mask = np.zeros((space.n, space.n), dtype=bool)
    for comp in comps:
        mask[np.ix_(comp, comp)] = True
    sh[~mask] = 0.0  # eigenvector mixing across components leaves dust; the limit is exactly 0

    r = np.sqrt(space.mu)
    kernel = sh / r[:, None] / r[None, :]
    support = Entourage.from_matrix(space, mask)
    return SupportedOperator(space=space, matrix=kernel, support=support)


@dataclass
class HeatEstimate:
    c: float
    d: float
    ok: bool
    detail: dict = field(default_factory=dict)

    def __iter__(self):  # unpacks as (c, d, ok)
        return iter((self.c, self.d, self.ok))


def heat_estimate_check(delta_h: SupportedOperator, delta_r: SupportedOperator,
                        eps: float, tol: float = 1e-9) -> HeatEstimate:
    """Largest c with H >= c R - tol and smallest d with eps + d R >= H - tol."""
    if delta_h.space is not delta_r.space:
        raise InputError("operators live on different spaces")
    sh = _symmetric(delta_h)
    sr = _symmetric(delta_r)
    sh = sh.toarray() if sp.issparse(sh) else sh
    sr = sr.toarray() if sp.issparse(sr) else sr
    sh = 0.5 * (sh + sh.T)
    sr = 0.5 * (sr + sr.T)
    n = sh.shape[0]

    norm_h = float(np.abs(np.linalg.eigvalsh(sh)).max(initial=0.0))
    norm_r = float(np.abs(np.linalg.eigvalsh(sr)).max(initial=0.0))
    if norm_r <= tol:
        if norm_h <= tol:
            return HeatEstimate(0.0, 0.0, True, {"note": "both operators vanish"})
        return HeatEstimate(float("nan"), float("nan"), False,
                            {"note": "comparison operator vanishes but the heat operator does not"})

    def lower_ok(c):
        return np.linalg.eigvalsh(sh - c * sr)[0] >= -tol

    def upper_ok(d):
        return np.linalg.eigvalsh(eps * np.eye(n) + d * sr - sh)[0] >= -tol

    # largest feasible c: grow the bracket, then bisect down onto the boundary
    lo = 0.0
    if not lower_ok(lo):
        return HeatEstimate(float("nan"), float("nan"), False,
                            {"note": "no nonnegative c certifies the lower estimate"})
    hi = max(norm_h / norm_r, 1.0)
    while lower_ok(hi):
        hi *= 2.0
        if hi > 1e12:
            break
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if lower_ok(mid):
            lo = mid
        else:
            hi = mid
    c = lo

    d_hi = max(norm_h / norm_r, 1.0)
    grow = 0
    while not upper_ok(d_hi):
        d_hi *= 2.0
        grow += 1
        if grow > 60:
            return HeatEstimate(c, float("nan"), False,
                                {"note": "no finite d certifies the upper estimate"})
    d_lo = 0.0
    for _ in range(60):
        mid = 0.5 * (d_lo + d_hi)
        if upper_ok(mid):
            d_hi = mid
        else:
            d_lo = mid
    d = d_hi
    return HeatEstimate(float(c), float(d), True)


def manifold_laplacian_standin(space: FiniteCoarseSpace, h: float) -> SupportedOperator:
    """Radius-h graph Laplacian scaled by 1/h^2: the discrete curved-space stand-in.

    The 1/h^2 calibration targets unit weights on the net (counting measure);
    on flat tori sampled that way the gap approaches the continuum value.
    """
    if h <= 0:
        raise InputError("net spacing must be positive")
    delta = build_laplacian(space, Entourage.from_radius(space, h))
    return delta.scaled(1.0 / (h * h))
