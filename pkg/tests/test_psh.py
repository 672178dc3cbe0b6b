import math

import numpy as np
import pytest

from kahlerlab.disks import DiskEmbedding
from kahlerlab.errors import Unsupported
from kahlerlab.fields import ComplexChart, ScalarField
from kahlerlab.models import ConeSurface, ModelSpace, QuotientData
from kahlerlab.psh import (ComplexLine, DiskSampler, check_bk_lower,
                           check_bk_lower_set, disk_laplacian,
                           distributional_pairing, k_threshold,
                           quotient_bk2_check, radial_potential_check)


def _chart(n=2):
    return ComplexChart(n=n, radii=1.5)


def test_disk_laplacian_pluriharmonic_is_zero():
    f = ScalarField(fn=lambda zs: zs[:, 0].real, n=2)
    d = DiskEmbedding.affine(np.array([0.1, 0.0]), np.array([0.3, 0.2j]),
                             _chart())
    ws = np.array([0.0, 0.4 + 0.1j, -0.2j])
    assert np.max(np.abs(disk_laplacian(f, d, ws))) < 1e-8


def test_disk_laplacian_holomorphic_cubes_are_harmonic():
    f = ScalarField(fn=lambda zs: (zs[:, 0] ** 3 + zs[:, 1] ** 2).real, n=2)
    d = DiskEmbedding.affine(np.array([0.2, 0.1]), np.array([0.2, 0.3]),
                             _chart())
    assert np.max(np.abs(disk_laplacian(f, d, np.array([0.1 + 0.2j])))) < 1e-7


def test_disk_laplacian_flat_potential():
    f = ScalarField(fn=lambda zs: 0.5 * np.sum(np.abs(zs) ** 2, axis=1), n=2)
    b = np.array([1.0, 0.0], dtype=complex) / math.sqrt(2)
    d = DiskEmbedding.affine(np.array([0.1, 0.0]), b * 0.5, _chart())
    # Laplacian of |i(w)|^2/2 is 2 |i'|^2 / 2 * 2 = 2 |b|^2
    val = disk_laplacian(f, d, 0.0)
    assert val == pytest.approx(2.0 * 0.125, abs=1e-9)


def test_disk_laplacian_log_modulus_harmonic():
    f = ScalarField(fn=lambda zs: np.log(np.abs(zs[:, 0])), n=1)
    d = DiskEmbedding.affine(np.array([1.0]), np.array([0.3]),
                             ComplexChart(n=1, radii=2.0))
    assert abs(disk_laplacian(f, d, 0.2 + 0.1j)) < 1e-7


def test_disk_laplacian_rejects_boundary_stencils():
    f = ScalarField(fn=lambda zs: np.abs(zs[:, 0]) ** 2, n=1)
    d = DiskEmbedding.affine(np.array([0.0]), np.array([0.3]),
                             ComplexChart(n=1, radii=1.0))
    with pytest.raises(ValueError):
        disk_laplacian(f, d, 0.999)


def test_flat_space_passes_at_zero():
    flat = ModelSpace(K=0.0, n=2)
    p = np.array([0.1, 0.05j])
    v = check_bk_lower(flat, flat.potential(), p, 0.0,
                       sampler=DiskSampler(count=25, interior_points=5))
    assert v.passed
    assert abs(v.min_laplacian) < 1e-6


def test_model_threshold_is_sharp():
    m = ModelSpace(K=1.0, n=1)
    p = np.array([0.1 + 0.05j])
    s = DiskSampler(count=40, interior_points=6, size_range=(0.05, 0.3))
    assert check_bk_lower(m, m.potential(), p, 1.0, sampler=s, tol=1e-7).passed
    bad = check_bk_lower(m, m.potential(), p, 1.1, sampler=s, tol=1e-7)
    assert not bad.passed
    assert bad.witness is not None


def test_monotone_in_K_on_fixed_samples():
    m = ModelSpace(K=1.0, n=1)
    p = np.array([0.1])
    s = DiskSampler(count=20, interior_points=5)
    mins = [check_bk_lower(m, m.potential(), p, K, sampler=s).min_laplacian
            for K in (0.5, 0.8, 1.0, 1.2)]
    assert all(a >= b - 1e-12 for a, b in zip(mins, mins[1:]))


def test_witness_reproducibility():
    m = ModelSpace(K=1.0, n=1)
    p = np.array([0.1])
    s = DiskSampler(count=30, interior_points=5, size_range=(0.05, 0.3))
    v = check_bk_lower(m, m.potential(), p, 1.2, sampler=s, tol=1e-7)
    assert not v.passed
    disk = DiskEmbedding(coeffs=np.array(v.witness["coeffs"], dtype=complex),
                         chart=m.chart)
    dist = m.distance_field(p)

    def u(zs):
        from kahlerlab.models import dK_transform
        return m.potential()(zs) - 0.5 * dK_transform(dist(zs), 1.2)

    val = disk_laplacian(u, disk, v.witness["w"], h=1e-3)
    assert val == pytest.approx(v.min_laplacian, rel=1e-2)


def test_k_threshold_bisection():
    m = ModelSpace(K=1.0, n=1)
    p = np.array([0.1 + 0.05j])
    s = DiskSampler(count=40, interior_points=6, size_range=(0.05, 0.3))
    thr = k_threshold(m, m.potential(), p, 0.5, 2.0, resolution=1e-3,
                      sampler=s, tol=1e-7)
    assert thr == pytest.approx(1.0, abs=1e-3)


def test_cones_pass_and_wide_cone_fails():
    for alpha in (1.0 / 3.0, 0.5, 2.0 / 3.0):
        cone = ConeSurface(alpha=alpha)
        v = check_bk_lower(cone, cone.potential(), 0.7 + 0.1j, 0.0,
                           sampler=DiskSampler(count=25, interior_points=5),
                           crossing_tests=8)
        assert v.passed, f"alpha={alpha}: {v.min_laplacian}"
    wide = ConeSurface(alpha=-0.5)
    v = check_bk_lower(wide, wide.potential(), 0.7 + 0.0j, 0.0,
                       sampler=DiskSampler(count=30, interior_points=5),
                       center=np.array([-0.5 + 0.2j]), crossing_tests=8)
    assert not v.passed
    assert v.min_laplacian < -1e-3


def test_apex_base_point_passes():
    cone = ConeSurface(alpha=0.5)
    v = check_bk_lower(cone, cone.potential(), 0.0, 0.0,
                       sampler=DiskSampler(count=15, interior_points=4),
                       crossing_tests=4)
    assert v.passed


def test_distributional_pairing_flat_quadratic():
    # u = |i(w)|^2 has pairing 4 <Lap u> / <bump> weighted; positivity check
    chart = ComplexChart(n=1, radii=1.0)
    d = DiskEmbedding.affine(np.array([0.0]), np.array([0.4]), chart)
    val = distributional_pairing(lambda zs: np.abs(zs[:, 0]) ** 2, d)
    assert val > 0


def test_singleton_set_matches_single_point():
    flat = ModelSpace(K=0.0, n=2)
    p = np.array([0.1 + 0j, 0.05j])
    s = DiskSampler(count=15, interior_points=4)
    a = check_bk_lower(flat, flat.potential(), p, 0.0, sampler=s)
    b = check_bk_lower_set(flat, flat.potential(), p[None], 0.0, sampler=s)
    assert abs(a.min_laplacian - b.min_laplacian) < 1e-12


def test_finite_set_passes_flat():
    flat = ModelSpace(K=0.0, n=2)
    S = np.array([[0.1, 0.0], [-0.1 + 0.05j, 0.2]], dtype=complex)
    v = check_bk_lower_set(flat, flat.potential(), S, 0.0,
                           sampler=DiskSampler(count=20, interior_points=4))
    assert v.passed


def test_complex_line_set_passes_flat():
    flat = ModelSpace(K=0.0, n=2)
    line = ComplexLine(a=np.zeros(2), v=np.array([1.0, 1.0]))
    v = check_bk_lower_set(flat, flat.potential(), line, 0.0,
                           sampler=DiskSampler(count=20, interior_points=4))
    assert v.passed


def test_line_distance_is_r_sin_angle():
    # distance to a complex line through 0 equals r sin of the projective
    # angle between the point direction and the line direction
    line = ComplexLine(a=np.zeros(2), v=np.array([1.0, 0.0]))
    rng = np.random.default_rng(3)
    zs = rng.standard_normal((20, 2)) + 1j * rng.standard_normal((20, 2))
    d = line.euclid_distance(zs)
    r = np.linalg.norm(zs, axis=1)
    cosang = np.abs(zs[:, 0]) / r
    assert np.allclose(d, r * np.sqrt(1.0 - cosang ** 2), atol=1e-12)


def test_complex_line_requires_flat_model():
    m = ModelSpace(K=1.0, n=2)
    line = ComplexLine(a=np.zeros(2), v=np.array([1.0, 0.0]))
    with pytest.raises(Unsupported):
        check_bk_lower_set(m, m.potential(), line, 1.0)


@pytest.mark.parametrize("alpha", [0.0, 0.5, 2.0 / 3.0])
def test_radial_potential_check(alpha):
    r = radial_potential_check(ConeSurface(alpha=alpha), tol=1e-4)
    assert r.verdict == "PASS"
    assert r.max_mismatch < 1e-4


def test_quotient_round_passes_with_saturation():
    q = QuotientData()
    for zp in (0.3 + 0.2j, np.array([0.0, 1.0])):
        v = quotient_bk2_check(q, zp)
        assert v.passed
        assert v.min_laplacian >= -1e-5
        assert v.saturated


def test_quotient_perturbed_h_fails_consistency():
    q = QuotientData()
    v = quotient_bk2_check(q, 0.3 + 0.2j,
                           h_extra=lambda z: 1.0 + 0.5 * np.abs(z) ** 4)
    assert not v.passed
    assert v.witness["kind"] == "consistency"
    # the perturbation alone stays plurisubharmonic; only the declared
    # measure consistency breaks
    assert v.min_laplacian > -1e-5


def test_quotient_non_round_unsupported():
    with pytest.raises(Unsupported):
        quotient_bk2_check(QuotientData(delta=0.5), 0.0)
