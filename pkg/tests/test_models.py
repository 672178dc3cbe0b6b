import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kahlerlab.errors import DomainExceeded, Unsupported
from kahlerlab.fields import metric_from_potential
from kahlerlab.models import (ConeSurface, ModelSpace, QuotientData,
                              cone_distance, dK_transform,
                              link_quotient_distance, model_distance,
                              orbifold_cone, quotient_potential)


def test_dk_transform_closed_forms():
    assert dK_transform(0.7, 0.0) == pytest.approx(0.49)
    d = 0.9
    assert dK_transform(d, 2.0) == pytest.approx(-2.0 * math.log(math.cos(d)))
    assert dK_transform(d, -2.0) == pytest.approx(2.0 * math.log(math.cosh(d)))


def test_dk_transform_taylor_matches_closed_form():
    # the series cut must be continuous against the exact branch
    for K in (1.0, -1.0):
        d = 1e-2
        exact = (-(4.0 / K) * math.log(math.cos(d * math.sqrt(K / 2.0)))
                 if K > 0 else
                 (4.0 / -K) * math.log(math.cosh(d * math.sqrt(-K / 2.0))))
        assert dK_transform(d, K) == pytest.approx(exact, abs=1e-10)


def test_dk_transform_cap():
    K = 2.0
    cap = math.pi / math.sqrt(2.0 * K)
    with pytest.raises(DomainExceeded):
        dK_transform(cap, K)
    assert dK_transform(cap - 1e-6, K) > 20.0


def test_dk_transform_rejects_negative_distance():
    with pytest.raises(ValueError):
        dK_transform(-0.1, 1.0)


@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
@settings(max_examples=40, deadline=None)
def test_dk_transform_monotone_in_distance(a, b):
    lo, hi = sorted((a, b))
    for K in (0.7, 0.0, -0.7):
        assert dK_transform(lo, K) <= dK_transform(hi, K) + 1e-12


@given(st.floats(0.1, 1.0))
@settings(max_examples=30, deadline=None)
def test_dk_transform_monotone_in_K(d):
    ks = [-1.0, -0.3, 0.0, 0.3, 1.0]
    vals = [dK_transform(d, K) for K in ks]
    assert all(x <= y + 1e-12 for x, y in zip(vals, vals[1:]))


def test_model_potential_expands_to_flat():
    for K in (1.0, -1.0):
        space = ModelSpace(K=K, n=2)
        z = np.array([[1e-4 + 0j, 1e-4j]])
        flat = 0.5 * np.sum(np.abs(z) ** 2)
        assert space.potential()(z)[0] == pytest.approx(flat, rel=1e-7)


@pytest.mark.parametrize("K", [1.0, -1.0])
def test_model_exact_gram_matches_fd(K):
    space = ModelSpace(K=K, n=2)
    zs = np.array([[0.2 + 0.1j, -0.1j], [0.05, 0.3 + 0.02j]])
    exact = space.metric().gram(zs)
    fd = metric_from_potential(space.potential(), zs)
    assert np.max(np.abs(exact - fd)) < 1e-7


def test_model_distance_symmetry_and_zero():
    space = ModelSpace(K=1.0, n=2)
    z1 = np.array([0.2 + 0.1j, 0.0])
    z2 = np.array([-0.1, 0.3j])
    assert space.distance(z1, z1) == pytest.approx(0.0, abs=1e-12)
    assert space.distance(z1, z2) == pytest.approx(space.distance(z2, z1))


def test_model_distance_small_chords_are_flat():
    for K in (1.0, -1.0):
        space = ModelSpace(K=K, n=1)
        d = space.distance(np.array([1e-5]), np.array([-1e-5]))
        assert d == pytest.approx(2e-5, rel=1e-6)


def test_positive_model_diameter():
    space = ModelSpace(K=0.5, n=1)
    far = space.distance(np.array([0.0]), np.array([1e8]))
    assert far == pytest.approx(space.diameter, rel=1e-6)
    assert space.diameter == pytest.approx(math.pi / math.sqrt(1.0))


def test_model_triangle_inequality():
    rng = np.random.default_rng(0)
    for K in (1.0, -1.0):
        space = ModelSpace(K=K, n=2)
        for _ in range(50):
            pts = 0.3 * (rng.standard_normal((3, 2))
                         + 1j * rng.standard_normal((3, 2)))
            a = space.distance(pts[0], pts[1])
            b = space.distance(pts[1], pts[2])
            c = space.distance(pts[0], pts[2])
            assert c <= a + b + 1e-12


def test_cone_total_angle_and_orbifold():
    assert ConeSurface(alpha=0.5).total_angle == pytest.approx(math.pi)
    assert orbifold_cone(3).alpha == pytest.approx(2.0 / 3.0)
    with pytest.raises(ValueError):
        orbifold_cone(1)
    with pytest.raises(ValueError):
        ConeSurface(alpha=1.0)


def test_cone_distance_flat_case():
    cone = ConeSurface(alpha=0.0)
    d = cone_distance(cone, (1.0, 0.0), (1.0, math.pi / 2))
    assert d == pytest.approx(math.sqrt(2.0))


def test_cone_distance_law_of_cosines():
    cone = ConeSurface(alpha=0.75)
    d = cone_distance(cone, (1.0, 0.0), (1.0, math.pi))
    rho = cone.geodesic_radius(1.0)
    psi = 0.25 * math.pi
    law = math.sqrt(2 * rho ** 2 * (1 - math.cos(psi)))
    assert d == pytest.approx(law)


def test_cone_distance_through_apex():
    # total angle above 2 pi: antipodal points connect through the apex
    wide = ConeSurface(alpha=-1.0)
    d = cone_distance(wide, (1.0, 0.0), (1.0, math.pi))
    assert d == pytest.approx(2.0 * wide.geodesic_radius(1.0))


def test_cone_deck_transformation_oracle():
    # the k-fold orbifold is the flat plane modulo rotation: map the flat
    # quotient distance through the chart change and compare
    k = 2
    cone = orbifold_cone(k)
    rng = np.random.default_rng(1)
    for _ in range(20):
        w1, w2 = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        flat_d = min(abs(w1 - w2 * np.exp(2j * math.pi * j / k))
                     for j in range(k))
        beta = 1.0 / k

        def to_cone(w):
            rho = abs(w)
            r = ((1 - cone.alpha) * rho) ** (1.0 / (1 - cone.alpha))
            return (r, np.angle(w) / (1 - cone.alpha) * 1.0)

        # geodesic radius of the cone image equals the flat radius
        p1, p2 = to_cone(w1), to_cone(w2)
        assert cone_distance(cone, p1, p2) == pytest.approx(flat_d, abs=1e-10)


def test_cone_exact_gram_matches_fd():
    cone = ConeSurface(alpha=0.5)
    m = cone.metric()
    zs = np.array([[0.6 + 0.2j], [0.3 - 0.4j]])
    assert np.max(np.abs(m.gram(zs) - m.gram_fd(zs))) < 1e-7


def test_cone_distance_field_matches_pointwise():
    cone = ConeSurface(alpha=0.5)
    f = cone.distance_field(0.5 + 0.1j)
    z = 0.2 - 0.3j
    direct = cone_distance(cone, (abs(0.5 + 0.1j), np.angle(0.5 + 0.1j)),
                           (abs(z), np.angle(z)))
    assert f(np.array([[z]]))[0] == pytest.approx(direct)


def test_quotient_round_distances():
    q = QuotientData()
    assert link_quotient_distance(q, 0.0, 0.0) == pytest.approx(0.0)
    # orthogonal projective points are at distance pi/2
    assert link_quotient_distance(q, 0.0, np.array([0.0, 1.0])) \
        == pytest.approx(math.pi / 2)
    # the round quotient is the constant-curvature model with c = 4
    rng = np.random.default_rng(2)
    for _ in range(20):
        z1, z2 = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        assert link_quotient_distance(q, z1, z2) == pytest.approx(
            model_distance(2.0, np.array([z1]), np.array([z2])), abs=1e-10)


def test_quotient_potential_round():
    q = QuotientData()
    assert quotient_potential(q, 0.3 + 0.4j) == pytest.approx(
        0.5 * math.log(1.25))


def test_quotient_non_round_unsupported():
    q = QuotientData(delta=0.7)
    with pytest.raises(Unsupported):
        link_quotient_distance(q, 0.1, 0.2)
