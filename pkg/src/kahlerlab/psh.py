"""Subharmonicity tests on holomorphic disks.

The lower-bound certificate for a space with potential phi, base point p,
and level K is that phi - d_K^2(p, .)/2 restricts subharmonically to
every holomorphic disk.  Pointwise tests use a finite-difference
Laplacian in the flat disk coordinate (the conformal factor is positive,
so only the sign matters).  Disks that cross a singular point are handled
distributionally, by pairing against a nonnegative C^2 bump whose
gradient vanishes on the boundary of the disk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import fd
from .disks import DiskEmbedding, area_density
from .errors import Unsupported
from .fields import ComplexChart, ScalarField
from .models import ConeSurface, ModelSpace, QuotientData, dK_transform, model_distance

DEFAULT_TOL = 1e-6


@dataclass
class PshVerdict:
    min_laplacian: float
    verdict: str
    tol: float
    samples: int
    seed: int
    witness: Optional[dict] = None
    notes: tuple = ()
    saturated: Optional[bool] = None

    @property
    def passed(self) -> bool:
        return self.verdict == "PASS"


@dataclass(frozen=True)
class DiskSampler:
    """Seeded configuration for random disk families."""

    seed: int = 0
    count: int = 200
    size_range: tuple = (1e-3, 0.3)
    center_radius: float = 0.45
    degree2_fraction: float = 0.3
    interior_points: int = 12


@dataclass(frozen=True)
class ComplexLine:
    """The affine complex line {a + t v : t in C} in C^n."""

    a: np.ndarray
    v: np.ndarray

    def euclid_distance(self, zs: np.ndarray) -> np.ndarray:
        a = np.asarray(self.a, dtype=complex)
        v = np.asarray(self.v, dtype=complex)
        v = v / np.linalg.norm(v)
        d = zs - a[None]
        proj = np.einsum("pi,i->p", d, np.conj(v))
        return np.linalg.norm(d - proj[:, None] * v[None], axis=1)


def disk_laplacian(f, disk, w, h: float = 1e-3):
    """Laplacian of f composed with the disk map, at interior points w.

    ``f`` is a ScalarField or a batched callable on chart points; returns
    a scalar for scalar w, else an array.
    """
    w = np.atleast_1d(np.asarray(w, dtype=complex))
    if np.any(np.abs(w) + 2 * h >= 1.0):
        raise ValueError("stencil leaves the unit disk; reduce h or |w|")
    x = np.stack([w.real, w.imag], axis=1)

    def g(xs):
        return np.asarray(f(disk(xs[:, 0] + 1j * xs[:, 1])), dtype=float)

    out = fd.laplacian_2d(g, x, h)
    return float(out[0]) if out.size == 1 else out


def _sample_disks(chart: ComplexChart, center, sampler: DiskSampler, rng,
                  min_singular: float = 0.0, singular_at=None):
    """Random affine and degree-2 disks near a center point.

    With ``min_singular`` > 0, rejects disks whose image comes closer
    than that to ``singular_at``; with 0 no rejection happens.
    """
    n = chart.n
    center = np.asarray(center, dtype=complex).reshape(n)
    lo, hi = sampler.size_range
    disks = []
    attempts = 0
    while len(disks) < sampler.count and attempts < 50 * sampler.count:
        attempts += 1
        size = math.exp(rng.uniform(math.log(lo), math.log(hi)))
        a = center + (rng.standard_normal(n) + 1j * rng.standard_normal(n)) \
            * sampler.center_radius / math.sqrt(2 * n)
        b = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        b = b / np.linalg.norm(b) * size
        coeffs = [a, b]
        if rng.uniform() < sampler.degree2_fraction:
            c2 = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            coeffs.append(c2 / np.linalg.norm(c2) * size * rng.uniform(0.1, 0.4))
        try:
            d = DiskEmbedding(coeffs=np.stack(coeffs), chart=chart)
        except ValueError:
            continue
        if min_singular > 0.0 and singular_at is not None:
            th = np.linspace(0, 2 * math.pi, 64, endpoint=False)
            grid = np.concatenate([np.exp(1j * th) * r for r in (1.0, 0.6, 0.25)]
                                  + [np.zeros(1)])
            pts = d(grid)
            if np.min(np.linalg.norm(pts - np.asarray(singular_at)[None], axis=1)) < min_singular:
                continue
        disks.append(d)
    return disks


def _interior_points(sampler: DiskSampler, rng) -> np.ndarray:
    r = np.sqrt(rng.uniform(0.0, 0.49, sampler.interior_points))
    th = rng.uniform(0.0, 2 * math.pi, sampler.interior_points)
    return r * np.exp(1j * th)


def _space_chart(space) -> ComplexChart:
    return space.chart


def _space_distance_field(space, p) -> ScalarField:
    return space.distance_field(p)


def _bump_laplacian(w: np.ndarray) -> np.ndarray:
    """Laplacian of (1 - |w|^2)^3, which is C^2 with flat boundary contact."""
    r2 = np.abs(w) ** 2
    return 12.0 * (1.0 - r2) * (3.0 * r2 - 1.0)


def _bump(w: np.ndarray) -> np.ndarray:
    return (1.0 - np.abs(w) ** 2) ** 3


def distributional_pairing(u, disk, n_r: int = 48, n_theta: int = 64) -> float:
    """int u(i(w)) Lap bump dA normalized by int bump dA.

    Nonnegative whenever u restricts subharmonically to the disk in the
    distributional sense; u only needs to be continuous.
    """
    x, wgl = np.polynomial.legendre.leggauss(n_r)
    r = 0.5 * (x + 1.0)
    wr = 0.5 * wgl * r
    th = np.linspace(0.0, 2 * math.pi, n_theta, endpoint=False)
    nodes = (r[:, None] * np.exp(1j * th)[None, :]).ravel()
    weights = np.broadcast_to((wr * 2 * math.pi / n_theta)[:, None],
                              (n_r, n_theta)).ravel()
    vals = np.asarray(u(disk(nodes)), dtype=float)
    num = float(np.sum(weights * vals * _bump_laplacian(nodes)))
    den = float(np.sum(weights * _bump(nodes)))
    return num / den


def check_bk_lower(space, potential: ScalarField, p, K: float,
                   sampler: Optional[DiskSampler] = None, tol: float = DEFAULT_TOL,
                   crossing_tests: int = 0, fd_step: float = 1e-3,
                   center=None) -> PshVerdict:
    """Sampled subharmonicity verdict for potential - d_K^2(p, .)/2.

    Pointwise finite differences run on disks that keep clear of singular
    loci; ``crossing_tests`` additional disks straddling the singular
    point are paired distributionally.  ``center`` moves the sampling
    region away from the base point (default: around p itself).
    """
    sampler = sampler or DiskSampler()
    rng = np.random.default_rng(sampler.seed)
    chart = _space_chart(space)
    dist = _space_distance_field(space, p)

    def u(zs):
        return potential(zs) - 0.5 * dK_transform(dist(zs), K)

    singular = potential.singular_points[0] if potential.singular_points else None
    margin = max(potential.smoothness_radius * 4.0, 0.02) if singular is not None else 0.0
    disks = _sample_disks(chart, p if center is None else center, sampler, rng,
                          min_singular=margin, singular_at=singular)
    best = math.inf
    witness = None
    count = 0
    for d in disks:
        ws = _interior_points(sampler, rng)
        vals = disk_laplacian(u, d, ws, h=fd_step)
        vals = np.atleast_1d(vals)
        count += vals.size
        i = int(np.argmin(vals))
        if vals[i] < best:
            best = float(vals[i])
            witness = {"coeffs": d.coeffs.tolist(), "w": complex(ws[i]),
                       "kind": "pointwise", "value": best}
    notes = []
    if crossing_tests > 0 and singular is not None:
        cross_sampler = DiskSampler(seed=sampler.seed + 1, count=crossing_tests,
                                    size_range=(0.05, 0.3), center_radius=0.05)
        cross = _sample_disks(chart, singular, cross_sampler, rng)
        made = 0
        for d in cross:
            val = distributional_pairing(u, d)
            made += 1
            count += 1
            if val < best:
                best = float(val)
                witness = {"coeffs": d.coeffs.tolist(), "kind": "distributional",
                           "value": best}
        notes.append(f"distributional pairings: {made}")
    verdict = "PASS" if best >= -tol else "FAIL"
    return PshVerdict(min_laplacian=best, verdict=verdict, tol=tol, samples=count,
                      seed=sampler.seed, witness=witness if verdict == "FAIL" else witness,
                      notes=tuple(notes))


def check_bk_lower_set(space, potential: ScalarField, S, K: float,
                       sampler: Optional[DiskSampler] = None,
                       tol: float = DEFAULT_TOL, fd_step: float = 1e-3) -> PshVerdict:
    """Same test with the set distance d_S = inf over p in S of d_p.

    S is a finite point array (m, n) or a ComplexLine (flat spaces only
    for the closed-form line distance).
    """
    sampler = sampler or DiskSampler()
    rng = np.random.default_rng(sampler.seed)
    chart = _space_chart(space)
    if isinstance(S, ComplexLine):
        if not (isinstance(space, ModelSpace) and space.K == 0):
            raise Unsupported("closed-form line distance requires the flat model")
        d_S = S.euclid_distance
        center = S.a
    else:
        S = np.atleast_2d(np.asarray(S, dtype=complex))
        fields = [_space_distance_field(space, pt) for pt in S]

        def d_S(zs):
            return np.min(np.stack([f(zs) for f in fields]), axis=0)

        center = S[0]

    def u(zs):
        return potential(zs) - 0.5 * dK_transform(d_S(zs), K)

    disks = _sample_disks(chart, center, sampler, rng)
    best = math.inf
    witness = None
    count = 0
    for d in disks:
        ws = _interior_points(sampler, rng)
        vals = np.atleast_1d(disk_laplacian(u, d, ws, h=fd_step))
        count += vals.size
        i = int(np.argmin(vals))
        if vals[i] < best:
            best = float(vals[i])
            witness = {"coeffs": d.coeffs.tolist(), "w": complex(ws[i]),
                       "kind": "pointwise", "value": best}
    verdict = "PASS" if best >= -tol else "FAIL"
    return PshVerdict(min_laplacian=best, verdict=verdict, tol=tol,
                      samples=count, seed=sampler.seed, witness=witness)


@dataclass
class RadialPotentialReport:
    max_mismatch: float
    verdict: str
    tol: float
    samples: int


def radial_potential_check(cone: ConeSurface, sampler: Optional[DiskSampler] = None,
                           tol: float = 1e-4) -> RadialPotentialReport:
    """Verify that the squared geodesic radius over two is a potential.

    On apex-avoiding disks, the disk Laplacian of rho^2/2 must equal
    twice the Hausdorff area density of the cone metric.
    """
    sampler = sampler or DiskSampler(count=40, size_range=(0.01, 0.2),
                                     center_radius=0.3)
    rng = np.random.default_rng(sampler.seed)
    metric = cone.metric()
    phi = cone.potential()
    disks = _sample_disks(metric.chart, np.array([0.7 + 0.1j]), sampler, rng,
                          min_singular=0.05, singular_at=np.zeros(1, dtype=complex))
    worst = 0.0
    count = 0
    for d in disks:
        ws = _interior_points(sampler, rng)
        # a large step keeps round-off below truncation; the composed
        # potential is smooth at disk scale so truncation stays h^4 small
        lap = np.atleast_1d(disk_laplacian(phi, d, ws, h=1e-2))
        dens = area_density(metric, d, ws)
        worst = max(worst, float(np.max(np.abs(lap - 2.0 * dens) / np.maximum(2.0 * dens, 1e-12))))
        count += ws.size
    return RadialPotentialReport(max_mismatch=worst,
                                 verdict="PASS" if worst <= tol else "FAIL",
                                 tol=tol, samples=count)


def _fs_cos_distance(zeta: np.ndarray, zprime) -> np.ndarray:
    """cos of the projective distance to zprime; zprime may be a scalar
    chart point or a homogeneous 2-vector (chart infinity)."""
    zp = np.asarray(zprime, dtype=complex)
    if zp.ndim == 0 or zp.size == 1:
        v = np.array([1.0, complex(zp.reshape(()))])
    else:
        v = zp.reshape(2)
    v = v / np.linalg.norm(v)
    s = np.stack([np.ones_like(zeta), zeta], axis=1)
    s = s / np.linalg.norm(s, axis=1)[:, None]
    return np.clip(np.abs(np.einsum("pi,i->p", s, np.conj(v))), 0.0, 1.0)


def _round_density_from_distance(zs: np.ndarray, h: float = 1e-3) -> np.ndarray:
    """Metric matrix of the round link quotient reconstructed from d^2.

    Half the Hessian of z -> d^2(z0, z)/2 at z = z0, by central FD of the
    closed-form distance; independent of the potential under test.
    """
    out = np.empty(zs.shape[0])
    for k, z0 in enumerate(zs):
        def dsq(dx, dy):
            return model_distance(2.0, np.atleast_1d(z0),
                                  np.atleast_1d(z0 + dx + 1j * dy)) ** 2
        gxx = (dsq(h, 0) + dsq(-h, 0)) / (2 * h * h)
        gyy = (dsq(0, h) + dsq(0, -h)) / (2 * h * h)
        out[k] = 0.25 * (gxx + gyy)
    return out


def quotient_bk2_check(q: QuotientData, zprime, h_extra: Optional[Callable] = None,
                       sampler: Optional[DiskSampler] = None,
                       tol: float = 1e-5) -> PshVerdict:
    """Level-2 bound and measure consistency for the link quotient datum.

    Two obligations: (a) (1/2) log h + log cos d(., zprime) restricts
    subharmonically to sampled disks in the projective chart; (b) the
    Laplacian of the potential reproduces twice the Hausdorff density of
    the round distance (the declared metric datum).  ``h_extra`` is an
    optional positive multiplier on h, used to probe broken data.
    """
    if not q.is_round:
        raise Unsupported("only the round quotient datum is supported")
    if q.n != 2:
        raise Unsupported("projective chart checks are implemented for n = 2")
    sampler = sampler or DiskSampler(count=60, size_range=(0.01, 0.25),
                                     center_radius=0.4)
    rng = np.random.default_rng(sampler.seed)
    chart = ComplexChart(n=1, radii=1.2)

    def pot(zs):
        z = zs[:, 0]
        base = 0.5 * np.log1p(np.abs(z) ** 2)
        if h_extra is not None:
            base = base + 0.5 * np.log(np.asarray(h_extra(z), dtype=float))
        return base

    def u(zs):
        C = _fs_cos_distance(zs[:, 0], zprime)
        return pot(zs) + np.log(np.maximum(C, 1e-300))

    disks = _sample_disks(chart, np.zeros(1), sampler, rng)
    best = math.inf
    witness = None
    consistency = 0.0
    count = 0
    saturated = False
    for d in disks:
        ws = _interior_points(sampler, rng)
        pts = d(ws)
        # keep clear of the zero of cos d (the cut point of zprime)
        if np.min(_fs_cos_distance(pts[:, 0], zprime)) < 0.2:
            continue
        vals = np.atleast_1d(disk_laplacian(u, d, ws, h=5e-4))
        count += vals.size
        if np.min(np.abs(vals)) <= 1e-3:
            saturated = True
        i = int(np.argmin(vals))
        if vals[i] < best:
            best = float(vals[i])
            witness = {"coeffs": d.coeffs.tolist(), "w": complex(ws[i]),
                       "kind": "pointwise", "value": best}
        lap_pot = np.atleast_1d(disk_laplacian(pot, d, ws, h=5e-4))
        dens = _round_density_from_distance(pts[:, 0])
        dv = np.abs(d.deriv(ws)[:, 0]) ** 2
        mism = float(np.max(np.abs(lap_pot - 4.0 * dens * dv)
                            / np.maximum(4.0 * dens * dv, 1e-12)))
        if mism > consistency:
            consistency = mism
            if mism > 1e-3:
                witness = {"coeffs": d.coeffs.tolist(), "kind": "consistency",
                           "value": mism}
    rel_consistency = consistency
    psh_ok = best >= -tol
    cons_ok = rel_consistency <= 1e-3
    verdict = "PASS" if (psh_ok and cons_ok) else "FAIL"
    notes = (f"measure mismatch {rel_consistency:.3e}",)
    return PshVerdict(min_laplacian=best, verdict=verdict, tol=tol, samples=count,
                      seed=sampler.seed, witness=witness, notes=notes,
                      saturated=saturated)


def k_threshold(space, potential: ScalarField, p, lo: float, hi: float,
                resolution: float = 1e-3, sampler: Optional[DiskSampler] = None,
                tol: float = 1e-7, trace: Optional[list] = None) -> float:
    """Largest K (to the given resolution) at which the sampled
    subharmonicity test still passes, by bisection on a fixed disk set.

    ``trace``, if given, collects (K, min_laplacian, verdict) triples.
    """
    sampler = sampler or DiskSampler(count=60, size_range=(0.05, 0.3))

    def passes(K):
        v = check_bk_lower(space, potential, p, K, sampler=sampler, tol=tol)
        if trace is not None:
            trace.append((K, v.min_laplacian, v.verdict))
        return v.passed

    if not passes(lo):
        raise ValueError("test already fails at the lower endpoint")
    if passes(hi):
        return hi
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if passes(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
