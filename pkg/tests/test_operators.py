"""Operator kernels against closed forms and direct-summation oracles."""

import numpy as np
import pytest

from coarselab.blocking import complete_blocking
from coarselab.entourages import Entourage
from coarselab.errors import InputError, PropertyFailure
from coarselab.operators import (
    SupportedOperator,
    block_domination_certificate,
    block_squares_entourage,
    build_laplacian,
    mu_inner,
    multiplication_operator,
    quadratic_form,
    verify_positivity_bounds,
)

from conftest import cycle_space, integer_line, random_cloud, percentile_radius


def cycle_eigenvalues(n):
    """Closed form for the unit-weight cycle with nearest-neighbour pairs."""
    return np.sort(2.0 - 2.0 * np.cos(2.0 * np.pi * np.arange(n) / n))


def laplacian_eigs(delta):
    return np.sort(np.linalg.eigvalsh(delta.symmetric_matrix()))


# -- construction -----------------------------------------------------------

def test_two_point_laplacian_frozen():
    space = integer_line(2)
    E = Entourage.from_pairs(space, [(0, 0), (0, 1), (1, 0), (1, 1)])
    delta = build_laplacian(space, E)
    assert np.array_equal(delta.dense(), np.array([[1.0, -1.0], [-1.0, 1.0]]))
    assert laplacian_eigs(delta) == pytest.approx([0.0, 2.0], abs=1e-12)


def test_cycle_spectrum_closed_form():
    for n in (5, 8, 12):
        space = cycle_space(n)
        E = Entourage.from_radius(space, 1.0).without_diagonal()
        delta = build_laplacian(space, E)
        assert laplacian_eigs(delta) == pytest.approx(cycle_eigenvalues(n), abs=1e-10)


def test_diagonal_pairs_change_nothing():
    # a self-pair contributes xi(x) - xi(x) = 0: same operator either way
    space = cycle_space(9)
    with_diag = build_laplacian(space, Entourage.from_radius(space, 1.0))
    without = build_laplacian(space, Entourage.from_radius(space, 1.0).without_diagonal())
    assert np.array_equal(with_diag.dense(), without.dense())


def test_diagonal_only_laplacian_is_zero():
    space = integer_line(6)
    delta = build_laplacian(space, Entourage.diagonal(space))
    assert np.array_equal(delta.dense(), np.zeros((6, 6)))


def test_sparse_and_dense_builds_agree(rng):
    # straddle the sparse threshold with the same geometry
    space = cycle_space(600)
    E = Entourage.from_radius(space, 1.5)
    sparse_built = build_laplacian(space, E)
    import scipy.sparse as sp
    assert sp.issparse(sparse_built.matrix)
    small = cycle_space(500)
    dense_built = build_laplacian(small, Entourage.from_radius(small, 1.5))
    assert not sp.issparse(dense_built.matrix)
    # same kernel values on the overlapping structure, spot-checked by row sums
    assert np.allclose(np.asarray(sparse_built.matrix.sum(axis=1)).ravel()[:10],
                       dense_built.dense().sum(axis=1)[:10])


def test_phi_vanishes_on_laplacians(rng):
    for _ in range(5):
        space = random_cloud(rng, int(rng.integers(3, 40)))
        E = Entourage.from_radius(space, percentile_radius(space, rng))
        delta = build_laplacian(space, E)
        scale = max(1.0, float(np.abs(delta.dense()).max()))
        assert np.abs(delta.phi).max() <= 1e-12 * scale


def test_laplacian_rejects_asymmetric():
    space = integer_line(3)
    with pytest.raises(InputError):
        build_laplacian(space, Entourage.from_pairs(space, [(0, 1)]))


def test_support_validation_names_the_pair():
    space = integer_line(3)
    kernel = np.zeros((3, 3))
    kernel[0, 2] = 5.0
    with pytest.raises(InputError, match=r"\(0, 2\)"):
        SupportedOperator(space=space, matrix=kernel,
                          support=Entourage.from_radius(space, 1.0))


def test_multiplication_operator_acts_pointwise(rng):
    space = random_cloud(rng, 11)
    f = rng.normal(size=11)
    op = multiplication_operator(space, f)
    xi = rng.normal(size=11)
    assert op.apply(xi) == pytest.approx(f * xi, rel=1e-12)
    assert op.support.equals(Entourage.diagonal(space))


# -- adjoints and the inner product ----------------------------------------

def test_self_adjointness_random_pairs(rng):
    space = random_cloud(rng, 25)
    E = Entourage.from_radius(space, percentile_radius(space, rng))
    delta = build_laplacian(space, E)
    for _ in range(100):
        xi = rng.normal(size=25)
        eta = rng.normal(size=25)
        a = mu_inner(space, delta.apply(xi), eta)
        b = mu_inner(space, xi, delta.apply(eta))
        assert a == pytest.approx(b, rel=1e-10, abs=1e-10)
    assert delta.is_self_adjoint()


def test_adjoint_conjugates_and_transposes(rng):
    space = random_cloud(rng, 8)
    E = Entourage.from_radius(space, 4.0)
    kernel = np.where(E.matrix().toarray().astype(bool),
                      rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8)), 0.0)
    op = SupportedOperator(space=space, matrix=kernel, support=E)
    adj = op.adjoint()
    assert np.array_equal(adj.dense(), np.conj(kernel.T))
    xi = rng.normal(size=8) + 1j * rng.normal(size=8)
    eta = rng.normal(size=8) + 1j * rng.normal(size=8)
    lhs = mu_inner(space, op.apply(xi), eta)
    rhs = mu_inner(space, xi, adj.apply(eta))
    assert lhs == pytest.approx(rhs, rel=1e-10)


# -- quadratic form ---------------------------------------------------------

def test_form_vanishes_on_constants(rng):
    space = random_cloud(rng, 15)
    E = Entourage.from_radius(space, 20.0)  # everything connected
    delta = build_laplacian(space, E)
    assert quadratic_form(delta, np.full(15, 3.7)) == pytest.approx(0.0, abs=1e-12)


def test_form_on_point_indicator():
    space = integer_line(7)
    E = Entourage.from_radius(space, 1.0)
    delta = build_laplacian(space, E)
    xi = np.zeros(7)
    xi[3] = 1.0
    # boundary mass of one interior point: both unit-weight neighbours
    assert quadratic_form(delta, xi) == pytest.approx(2.0, abs=1e-12)


def test_form_nonnegative_and_matches_matrix(rng):
    for _ in range(5):
        space = random_cloud(rng, int(rng.integers(4, 30)))
        E = Entourage.from_radius(space, percentile_radius(space, rng))
        delta = build_laplacian(space, E)
        xi = rng.normal(size=space.n)
        val = quadratic_form(delta, xi)
        assert val >= 0.0
        action = delta.dense() @ (xi * space.mu)  # kernel applied by hand
        oracle = float(np.sum(action * xi * space.mu))
        assert val == pytest.approx(oracle, rel=1e-9, abs=1e-9)


def test_form_requires_laplacian_tag(rng):
    space = integer_line(4)
    op = multiplication_operator(space, np.ones(4))
    with pytest.raises(InputError):
        quadratic_form(op, np.ones(4))


# -- additivity and monotonicity -------------------------------------------

def test_additivity_exact_on_unit_weights():
    space = integer_line(9)
    f1 = Entourage.from_pairs(space, [(i, i + 1) for i in range(8)] + [(i + 1, i) for i in range(8)])
    f2 = Entourage.from_pairs(space, [(i, i + 2) for i in range(7)] + [(i + 2, i) for i in range(7)])
    both = f1.union(f2)
    d1 = build_laplacian(space, f1)
    d2 = build_laplacian(space, f2)
    db = build_laplacian(space, both)
    assert np.array_equal(db.dense(), d1.dense() + d2.dense())


def test_additivity_close_on_random_weights(rng):
    space = integer_line(9, weights=rng.uniform(0.5, 2.0, size=9))
    f1 = Entourage.from_pairs(space, [(i, i + 1) for i in range(8)] + [(i + 1, i) for i in range(8)])
    f2 = Entourage.from_pairs(space, [(i, i + 2) for i in range(7)] + [(i + 2, i) for i in range(7)])
    db = build_laplacian(space, f1.union(f2))
    total = build_laplacian(space, f1).dense() + build_laplacian(space, f2).dense()
    assert np.allclose(db.dense(), total, rtol=1e-13, atol=1e-13)


def test_monotone_in_the_entourage(rng):
    for _ in range(5):
        space = random_cloud(rng, int(rng.integers(4, 25)))
        r = percentile_radius(space, rng)
        dE = build_laplacian(space, Entourage.from_radius(space, r * 0.6))
        dF = build_laplacian(space, Entourage.from_radius(space, r))
        diff = dF.symmetric_matrix() - dE.symmetric_matrix()
        assert np.linalg.eigvalsh(diff)[0] >= -1e-9


# -- positivity bounds ------------------------------------------------------

def test_positivity_bounds_on_cycles():
    even = cycle_space(8)
    E = Entourage.from_radius(even, 1.0).without_diagonal()
    rep = verify_positivity_bounds(build_laplacian(even, E))
    assert rep.section_bound == pytest.approx(2.0)
    assert rep.lambda_max == pytest.approx(4.0, abs=1e-9)

    odd = cycle_space(9)
    E = Entourage.from_radius(odd, 1.0).without_diagonal()
    rep = verify_positivity_bounds(build_laplacian(odd, E))
    assert rep.lambda_max < 4.0 - 1e-3
    assert rep.lambda_min >= -1e-9


def test_positivity_bounds_zero_operator():
    space = integer_line(5)
    rep = verify_positivity_bounds(build_laplacian(space, Entourage.diagonal(space)))
    assert rep.as_tuple() == pytest.approx((0.0, 0.0, 1.0))


def test_positivity_bounds_random(rng):
    for _ in range(20):
        space = random_cloud(rng, int(rng.integers(3, 50)))
        E = Entourage.from_radius(space, percentile_radius(space, rng))
        rep = verify_positivity_bounds(build_laplacian(space, E))
        M = max(E.section_mass(x) for x in range(space.n))
        assert rep.lambda_min >= -1e-9
        assert rep.lambda_max <= 2.0 * M + 1e-9


def test_positivity_failure_carries_witness():
    space = integer_line(2)
    bad = SupportedOperator(space=space, matrix=np.diag([-1.0, 0.0]),
                            support=Entourage.diagonal(space))
    bad.laplacian_of = Entourage.diagonal(space)  # mislabel on purpose
    with pytest.raises(PropertyFailure) as exc:
        verify_positivity_bounds(bad)
    assert "eigenvalue" in exc.value.witness


# -- block domination -------------------------------------------------------

def block_constant_killer(space, blocks, rng):
    """Random PSD kernel per block, killing the weighted constants of its block."""
    n = space.n
    s = np.zeros((n, n))
    for blk in blocks:
        m = len(blk)
        g = rng.normal(size=(m, m))
        psd = g @ g.T
        w = np.sqrt(space.mu[blk])
        w = w / np.linalg.norm(w)
        p = np.eye(m) - np.outer(w, w)
        s[np.ix_(blk, blk)] = p @ psd @ p
    r = np.sqrt(space.mu)
    return s / r[:, None] / r[None, :]


def test_domination_of_block_psd(rng):
    space = random_cloud(rng, 15)
    E = Entourage.from_radius(space, percentile_radius(space, rng))
    base = complete_blocking(space, E)
    squares = block_squares_entourage(base)
    kernel = block_constant_killer(space, base.blocks, rng)
    T = SupportedOperator(space=space, matrix=kernel, support=squares)
    c, lam = block_domination_certificate(T, base)
    assert lam >= -1e-9
    assert c == pytest.approx(T.norm() / base.floor, rel=1e-9)


def test_domination_of_the_laplacian_itself(rng):
    space = random_cloud(rng, 12)
    E = Entourage.from_radius(space, percentile_radius(space, rng))
    base = complete_blocking(space, E)
    delta = build_laplacian(space, block_squares_entourage(base))
    c, lam = block_domination_certificate(delta, base)
    assert lam >= -1e-9
    assert c >= 1.0 or delta.norm() == 0.0


def test_domination_trivial_zero():
    space = integer_line(6)
    base = complete_blocking(space, Entourage.from_radius(space, 1.0))
    T = SupportedOperator(space=space, matrix=np.zeros((6, 6)),
                          support=block_squares_entourage(base))
    c, lam = block_domination_certificate(T, base)
    assert c == 0.0
    assert lam >= -1e-12


def test_domination_names_failed_precondition(rng):
    space = integer_line(6)
    base = complete_blocking(space, Entourage.from_radius(space, 1.0))
    squares = block_squares_entourage(base)

    not_psd = SupportedOperator(space=space, matrix=np.diag([-1.0] + [0.0] * 5),
                                support=squares)
    with pytest.raises(InputError, match="not positive"):
        block_domination_certificate(not_psd, base)

    nonzero_phi = SupportedOperator(space=space, matrix=np.diag([1.0] + [0.0] * 5),
                                    support=squares)
    with pytest.raises(InputError, match="unit function"):
        block_domination_certificate(nonzero_phi, base)

    wide = build_laplacian(space, Entourage.from_radius(space, 5.0))
    with pytest.raises(InputError, match="block squares"):
        block_domination_certificate(wide, base)
