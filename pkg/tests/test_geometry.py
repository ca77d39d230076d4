"""Geometry certificates against exhaustive and set-arithmetic oracles."""

import itertools

import numpy as np
import pytest

from coarselab.entourages import Entourage
from coarselab.errors import InputError
from coarselab.geometry import (
    certify_geometry,
    certify_gordo,
    certify_uniformly_bounded,
    coarse_net,
    covering_bound,
)

from conftest import integer_line, random_cloud


def bounded_mass_oracle(space, pairs):
    """Max mu(U) over all U with U x U inside the pair set, by full enumeration."""
    n = space.n
    best = 0.0
    for r in range(1, n + 1):
        for U in itertools.combinations(range(n), r):
            if all((a, b) in pairs for a in U for b in U):
                best = max(best, float(space.weights[list(U)].sum()))
    return best


def greedy_cover_oracle(sections, members):
    """Replay the disjoint-section greedy over members in ascending order."""
    claimed = set()
    centers = []
    for y in sorted(members):
        if claimed.isdisjoint(sections[y]):
            centers.append(y)
            claimed |= sections[y]
    return centers


def random_symmetric_pairs(rng, n, p, with_diagonal=True):
    pairs = set()
    for a in range(n):
        if with_diagonal:
            pairs.add((a, a))
        for b in range(a + 1, n):
            if rng.random() < p:
                pairs.add((a, b))
                pairs.add((b, a))
    return pairs


# -- bounded measure --------------------------------------------------------

def test_bounded_mass_matches_exhaustive_small(rng):
    for _ in range(10):
        n = int(rng.integers(3, 11))
        space = random_cloud(rng, n)
        pairs = random_symmetric_pairs(rng, n, 0.4)
        E = Entourage.from_pairs(space, [(space.points[a], space.points[b]) for a, b in pairs])
        C, method = certify_uniformly_bounded(space, E)
        assert method == "clique"
        assert C == pytest.approx(bounded_mass_oracle(space, pairs), abs=1e-12)


def test_bounded_mass_ignores_points_off_diagonal(rng):
    space = random_cloud(rng, 6)
    # complete relation minus every diagonal pair: no nonempty bounded set
    pairs = {(a, b) for a in range(6) for b in range(6) if a != b}
    E = Entourage.from_pairs(space, [(space.points[a], space.points[b]) for a, b in pairs])
    C, _ = certify_uniformly_bounded(space, E)
    assert C == 0.0


def test_bounded_mass_section_route_is_sound():
    space = integer_line(40)
    E = Entourage.from_radius(space, 1.0)
    C, method = certify_uniformly_bounded(space, E)
    assert method == "section"
    # true maximum is a two-point interval of unit weights
    assert C >= 2.0
    # and the route reports exactly the best section of E o E^-1
    EE = E.compose(E.inverse())
    assert C == pytest.approx(max(EE.section_mass(x) for x in range(space.n)))


def test_bounded_mass_scales_with_weights(rng):
    n = 8
    base = random_cloud(rng, n)
    pairs = random_symmetric_pairs(rng, n, 0.5)
    scaled = integer_line(n, weights=base.weights * 3.0)
    E1 = Entourage.from_pairs(base, [(base.points[a], base.points[b]) for a, b in pairs])
    E2 = Entourage.from_pairs(scaled, [(scaled.points[a], scaled.points[b]) for a, b in pairs])
    C1, _ = certify_uniformly_bounded(base, E1)
    C2, _ = certify_uniformly_bounded(scaled, E2)
    assert C2 == pytest.approx(3.0 * C1)


# -- gordo floor ------------------------------------------------------------

def test_gordo_is_min_section_mass(rng):
    space = random_cloud(rng, 12)
    E = Entourage.from_radius(space, 4.0)
    eps = certify_gordo(space, E)
    assert eps == pytest.approx(min(E.section_mass(x) for x in range(space.n)))
    assert eps > 0.0


def test_gordo_rejects_asymmetric():
    space = integer_line(3)
    E = Entourage.from_pairs(space, [(0, 1)])
    with pytest.raises(InputError):
        certify_gordo(space, E)


# -- coarse nets ------------------------------------------------------------

def test_net_on_line_takes_every_other_point():
    space = integer_line(11)
    F = Entourage.from_radius(space, 1.0)
    net, witness, density_ok = coarse_net(space, F)
    assert net == [0, 2, 4, 6, 8, 10]
    assert density_ok
    for x, w in enumerate(witness):
        assert space.dist(x, w) <= 1.0


def test_net_witness_missing_without_diagonal():
    space = integer_line(3)
    F = Entourage.from_pairs(space, [(0, 1), (1, 0)])
    net, witness, density_ok = coarse_net(space, F)
    assert net == [0, 2]
    # net point 0 has no witness: (0, 0) is not in F
    assert witness[0] is None
    assert not density_ok


def test_net_is_maximal_and_separated(rng):
    for _ in range(5):
        n = int(rng.integers(5, 30))
        space = random_cloud(rng, n)
        F = Entourage.from_radius(space, float(rng.uniform(1.0, 6.0)))
        net, witness, density_ok = coarse_net(space, F)
        in_net = set(net)
        for a in net:
            for b in net:
                if a != b:
                    assert not F.contains_pair(a, b)
        # maximal: anything outside meets the net through F
        for x in range(n):
            if x not in in_net:
                assert any(F.contains_pair(x, y) for y in net)
        assert density_ok  # radius entourages hold the diagonal


def test_net_rejects_asymmetric():
    space = integer_line(3)
    F = Entourage.from_pairs(space, [(0, 1)])
    with pytest.raises(InputError):
        coarse_net(space, F)


# -- covering bounds --------------------------------------------------------

def test_covering_same_entourage_needs_one_set(rng):
    for _ in range(5):
        n = int(rng.integers(4, 25))
        space = random_cloud(rng, n)
        E = Entourage.from_radius(space, float(rng.uniform(0.5, 5.0)))
        N, witness = covering_bound(space, E, E)
        assert N == 1
        assert len(witness["centers"]) == 1


def test_covering_line_radius_ten_by_radius_one():
    space = integer_line(101)
    F = Entourage.from_radius(space, 1.0)
    E = Entourage.from_radius(space, 10.0)
    N, _ = covering_bound(space, F, E)
    assert N == 7
    assert N <= 11


def test_covering_matches_greedy_replay(rng):
    for _ in range(8):
        n = int(rng.integers(4, 16))
        space = random_cloud(rng, n)
        fpairs = random_symmetric_pairs(rng, n, 0.3)
        epairs = random_symmetric_pairs(rng, n, 0.5)
        F = Entourage.from_pairs(space, [(space.points[a], space.points[b]) for a, b in fpairs])
        E = Entourage.from_pairs(space, [(space.points[a], space.points[b]) for a, b in epairs])
        N, _ = covering_bound(space, F, E)
        sections = {y: {w for (w, yy) in fpairs if yy == y} for y in range(n)}
        esections = {x: {w for (w, xx) in epairs if xx == x} for x in range(n)}
        best = 0
        for x in range(n):
            best = max(best, len(greedy_cover_oracle(sections, esections[x])))
        assert N == best
        # the cover property the count certifies, by raw set arithmetic
        ff = {(a, c) for (a, b) in fpairs for (bb, c) in fpairs if b == bb}
        for x in range(n):
            centers = greedy_cover_oracle(sections, esections[x])
            for z in esections[x]:
                assert any((z, y) in ff for y in centers)


def test_certificate_bundle(rng):
    space = random_cloud(rng, 10)
    E = Entourage.from_radius(space, 3.0)
    F = Entourage.from_radius(space, 1.0)
    cert = certify_geometry(space, E, F)
    assert cert.upper_C is not None and cert.upper_C > 0
    assert cert.gordo_eps is not None and cert.gordo_eps > 0
    assert cert.covering_N is not None and cert.covering_N >= 1
    blob = cert.to_json()
    assert set(blob) == {"upper_C", "upper_C_method", "gordo_eps", "covering_N", "covering_witness"}
