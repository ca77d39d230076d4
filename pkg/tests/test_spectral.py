"""Gap reports, heat transform, and estimate checks against scalar oracles."""

import numpy as np
import pytest

from coarselab.entourages import Entourage
from coarselab.errors import ConsistencyError, InputError
from coarselab.operators import SupportedOperator, build_laplacian, multiplication_operator
from coarselab.spectral import (
    deflated_constants_gap,
    heat_estimate_check,
    heat_operator,
    manifold_laplacian_standin,
    spectral_gap,
)

from conftest import cycle_space, integer_line, random_cloud


def cycle_gap(n):
    return 2.0 - 2.0 * np.cos(2.0 * np.pi / n)


def nearest_neighbour_laplacian(n):
    space = cycle_space(n)
    return build_laplacian(space, Entourage.from_radius(space, 1.0).without_diagonal())


# -- spectral gap -----------------------------------------------------------

def test_gap_on_cycles_closed_form():
    for n in (12, 40):
        rep = spectral_gap(nearest_neighbour_laplacian(n))
        assert rep.kernel_dim == 1
        assert rep.gap == pytest.approx(cycle_gap(n), abs=1e-10)
        assert rep.method == "dense"
        assert rep.kernel_basis_is_locally_constant
        assert rep.residual <= 1e-8
        assert np.all(np.diff(rep.eigenvalues) >= -1e-12)


def test_kernel_counts_components():
    space = integer_line(10)
    # two intervals five apart, radius 1 keeps them separate
    E = Entourage.from_radius(space, 1.0)
    rep = spectral_gap(build_laplacian(space, E))
    assert rep.kernel_dim == 1
    gapped = Entourage.from_pairs(
        space,
        [(i, j) for i in range(5) for j in range(5) if abs(i - j) <= 1]
        + [(i, j) for i in range(5, 10) for j in range(5, 10) if abs(i - j) <= 1])
    rep2 = spectral_gap(build_laplacian(space, gapped))
    assert rep2.kernel_dim == 2
    assert rep2.kernel_basis_is_locally_constant


def test_complete_graph_gap_is_n():
    n = 7
    space = integer_line(n)
    E = Entourage.from_pairs(space, [(i, j) for i in range(n) for j in range(n) if i != j])
    rep = spectral_gap(build_laplacian(space, E))
    assert rep.gap == pytest.approx(float(n), abs=1e-9)


def test_iterative_route_matches_dense():
    n = 600
    delta = nearest_neighbour_laplacian(n)
    dense = spectral_gap(delta)
    iterative = spectral_gap(delta, dense_threshold=10)
    assert dense.method == "dense" and iterative.method == "iterative"
    assert iterative.gap == pytest.approx(dense.gap, rel=1e-4, abs=1e-9)
    assert iterative.kernel_dim == 1
    assert iterative.residual <= 1e-6


def test_large_cycle_uses_iterative_route():
    n = 2400
    rep = spectral_gap(nearest_neighbour_laplacian(n))
    assert rep.method == "iterative"
    assert rep.gap == pytest.approx(cycle_gap(n), abs=1e-6)


def test_non_constant_kernel_is_flagged():
    space = integer_line(2)
    E = Entourage.from_radius(space, 1.0)
    kernel = np.diag([0.0, 1.0])
    op = SupportedOperator(space=space, matrix=kernel, support=E)
    rep = spectral_gap(op)
    assert rep.kernel_dim == 1
    assert not rep.kernel_basis_is_locally_constant


def test_gap_rejects_non_positive():
    space = integer_line(3)
    op = SupportedOperator(space=space, matrix=np.diag([-1.0, 0.0, 0.0]),
                           support=Entourage.diagonal(space))
    with pytest.raises(InputError):
        spectral_gap(op)


def test_report_serializes():
    rep = spectral_gap(nearest_neighbour_laplacian(8))
    blob = rep.to_json()
    assert blob["representation"] == "standard"
    assert blob["kernel_dim"] == 1
    csv = rep.to_csv()
    lines = csv.strip().split("\n")
    assert lines[0] == "eigenvalue"
    assert len(lines) == 9
    assert float(lines[1]) == pytest.approx(0.0, abs=1e-12)


# -- constants-deflated gap -------------------------------------------------

def test_deflated_gap_matches_report_when_connected():
    delta = nearest_neighbour_laplacian(16)
    rep = spectral_gap(delta)
    assert deflated_constants_gap(delta) == pytest.approx(rep.gap, abs=1e-10)


def test_deflated_gap_vanishes_when_disconnected():
    space = integer_line(8)
    E = Entourage.from_pairs(
        space,
        [(i, j) for i in range(4) for j in range(4)]
        + [(i, j) for i in range(4, 8) for j in range(4, 8)])
    delta = build_laplacian(space, E)
    # global constants are deflated but each half has its own flat function
    assert deflated_constants_gap(delta) == pytest.approx(0.0, abs=1e-10)


# -- heat -------------------------------------------------------------------

def test_heat_of_zero_is_zero():
    space = integer_line(4)
    delta = build_laplacian(space, Entourage.diagonal(space))
    heat = heat_operator(delta)
    assert np.array_equal(heat.dense(), np.zeros((4, 4)))


def test_heat_eigenvalue_log_two():
    space = integer_line(2)
    E = Entourage.from_pairs(space, [(0, 1), (1, 0)])
    delta = build_laplacian(space, E).scaled(np.log(2.0) / 2.0)  # spectrum {0, ln 2}
    heat = heat_operator(delta)
    vals = np.linalg.eigvalsh(heat.symmetric_matrix())
    assert vals == pytest.approx([0.0, 0.5], abs=1e-12)


def test_heat_full_spectrum_map(rng):
    space = cycle_space(40)
    delta = nearest_neighbour_laplacian(40)
    heat = heat_operator(delta)
    got = np.sort(np.linalg.eigvalsh(heat.symmetric_matrix()))
    want = np.sort(1.0 - np.exp(-np.sort(np.linalg.eigvalsh(delta.symmetric_matrix()))))
    assert got == pytest.approx(want, abs=1e-10)
    # contraction between zero and one
    assert got[0] >= -1e-12 and got[-1] <= 1.0 + 1e-12


def test_heat_respects_components():
    space = integer_line(6)
    E = Entourage.from_pairs(
        space,
        [(i, j) for i in range(3) for j in range(3)]
        + [(i, j) for i in range(3, 6) for j in range(3, 6)])
    heat = heat_operator(build_laplacian(space, E))
    dense = heat.dense()
    assert np.array_equal(dense[:3, 3:], np.zeros((3, 3)))
    assert np.array_equal(dense[3:, :3], np.zeros((3, 3)))
    sup = heat.support.matrix().toarray().astype(bool)
    assert not sup[:3, 3:].any()


def test_heat_rejects_non_positive():
    space = integer_line(3)
    op = SupportedOperator(space=space, matrix=np.diag([-0.5, 0.0, 0.0]),
                           support=Entourage.diagonal(space))
    with pytest.raises(InputError):
        heat_operator(op)


# -- heat estimates ---------------------------------------------------------

def test_estimate_same_operator_is_unity():
    delta = nearest_neighbour_laplacian(12)
    est = heat_estimate_check(delta, delta, eps=0.0)
    assert est.ok
    assert est.c == pytest.approx(1.0, abs=1e-5)
    assert est.d == pytest.approx(1.0, abs=1e-5)


def test_estimate_recovers_scalar_map_bounds():
    delta = nearest_neighbour_laplacian(20)
    heat = heat_operator(delta)
    est = heat_estimate_check(heat, delta, eps=0.0)
    lam = np.linalg.eigvalsh(delta.symmetric_matrix())
    lam = lam[lam > 1e-10]
    ratios = (1.0 - np.exp(-lam)) / lam
    assert est.ok
    assert est.c == pytest.approx(float(ratios.min()), abs=1e-5)
    assert est.d == pytest.approx(float(ratios.max()), abs=1e-5)


def test_estimate_flags_vanishing_comparison():
    space = integer_line(4)
    zero = build_laplacian(space, Entourage.diagonal(space))
    lively = build_laplacian(space, Entourage.from_radius(space, 1.0))
    est = heat_estimate_check(heat_operator(lively), zero, eps=0.0)
    assert not est.ok
    both_zero = heat_estimate_check(zero, zero, eps=0.0)
    assert both_zero.ok and both_zero.c == 0.0


def test_estimate_with_slack_on_cycle():
    space = cycle_space(40)
    delta_r = build_laplacian(space, Entourage.from_radius(space, 1.0))
    heat = heat_operator(delta_r)
    est = heat_estimate_check(heat, delta_r, eps=0.1)
    assert est.ok
    assert np.isfinite(est.c) and np.isfinite(est.d)
    assert est.d <= 1.0 + 1e-6  # slack can only shrink the needed d


# -- curved-space stand-in --------------------------------------------------

def fine_circle(n):
    """Unit-circumference circle sampled at spacing 1/n, counting measure."""
    h = 1.0 / n
    space = cycle_space(n)
    return type(space)(points=list(range(n)), weights=np.ones(n),
                       metric="torus", coords=np.arange(n, dtype=float) * h, side=1.0)


def test_standin_scales_the_radius_h_kernel():
    n = 64
    h = 1.0 / n
    fine = fine_circle(n)
    standin = manifold_laplacian_standin(fine, h)
    base = build_laplacian(fine, Entourage.from_radius(fine, h))
    assert np.array_equal(standin.dense(), base.dense() * (1.0 / (h * h)))


def test_standin_gap_approaches_flat_circle_constant():
    n = 64
    standin = manifold_laplacian_standin(fine_circle(n), 1.0 / n)
    rep = spectral_gap(standin)
    assert rep.gap == pytest.approx((2.0 * np.pi) ** 2, rel=5e-3)


def test_standin_rejects_bad_spacing():
    space = integer_line(4)
    with pytest.raises(InputError):
        manifold_laplacian_standin(space, 0.0)
