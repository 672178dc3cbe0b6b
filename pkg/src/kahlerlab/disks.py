"""Holomorphic disks, the comparison defect, and its failure modes.

The comparison inequality tested here: for a base point p, curvature
level K, and an embedded holomorphic disk i with image Sigma,

    d_K^2(p, i(0)) >= (2/pi) iint_Sigma log|z| dA
                      + (1/2pi) int d_K^2(p, i(e^{i theta})) dtheta

with dA the two dimensional Hausdorff measure of Sigma.  The defect is
LHS minus RHS; it is nonnegative for every disk exactly when the
bisectional lower bound at level K holds, and the violation constructions
below produce disks with negative defect when it fails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .curvature import CurvatureData, TangentPair, bk_defect
from .errors import NonPositiveDefinite, Unsupported
from .fields import ComplexChart, HermitianMetricField, ScalarField
from .geodesy import geodesic_distance_many
from .models import dK_transform

MAX_DEGREE = 8
NEAR_DISK_CUTOFF = 0.05


@dataclass(frozen=True)
class DiskEmbedding:
    """Polynomial holomorphic map of the closed unit disk into a chart.

    i(w) = sum_m coeffs[m] w^m with coeffs of shape (M+1, n), M <= 8.
    Validity (image inside the chart, nonvanishing derivative, boundary
    injectivity) is spot-checked on dense grids at construction.
    """

    coeffs: np.ndarray
    chart: ComplexChart

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.coeffs, dtype=complex))
        object.__setattr__(self, "coeffs", c)
        if c.shape[0] - 1 > MAX_DEGREE:
            raise ValueError(f"disk degree {c.shape[0] - 1} exceeds {MAX_DEGREE}")
        if c.shape[1] != self.chart.n:
            raise ValueError("coefficient dimension does not match the chart")
        if np.max(np.abs(c[1:])) == 0:
            raise ValueError("disk map is constant")
        th = np.linspace(0, 2 * math.pi, 128, endpoint=False)
        grid = np.concatenate([np.exp(1j * th) * r for r in (1.0, 0.7, 0.4, 0.1)])
        pts = self(grid)
        if not np.all(self.chart.contains(pts)):
            raise ValueError("disk image leaves the chart")
        dv = np.linalg.norm(self.deriv(grid), axis=1)
        if np.min(dv) <= 1e-12 * np.max(dv):
            raise ValueError("disk derivative vanishes on the sample grid")
        bnd = self(np.exp(1j * th))
        diff = np.linalg.norm(bnd[:, None, :] - bnd[None, :, :], axis=2)
        np.fill_diagonal(diff, np.inf)
        wdiff = np.abs(np.exp(1j * th)[:, None] - np.exp(1j * th)[None, :])
        np.fill_diagonal(wdiff, 1.0)
        if np.min(diff / wdiff) <= 1e-9 * np.max(np.abs(c[1:])):
            raise ValueError("boundary self-intersection detected")

    @property
    def degree(self) -> int:
        return self.coeffs.shape[0] - 1

    def __call__(self, w) -> np.ndarray:
        w = np.atleast_1d(np.asarray(w, dtype=complex))
        powers = w[:, None] ** np.arange(self.coeffs.shape[0])[None, :]
        return powers @ self.coeffs

    def deriv(self, w) -> np.ndarray:
        w = np.atleast_1d(np.asarray(w, dtype=complex))
        M = self.coeffs.shape[0]
        if M == 1:
            return np.zeros((w.size, self.coeffs.shape[1]), dtype=complex)
        powers = w[:, None] ** np.arange(M - 1)[None, :]
        return powers @ (np.arange(1, M)[:, None] * self.coeffs[1:])

    def rotated(self, theta: float) -> "DiskEmbedding":
        """Precompose with w -> e^{i theta} w."""
        phases = np.exp(1j * theta * np.arange(self.coeffs.shape[0]))
        return DiskEmbedding(coeffs=self.coeffs * phases[:, None], chart=self.chart)

    @classmethod
    def affine(cls, a, b, chart: ComplexChart) -> "DiskEmbedding":
        return cls(coeffs=np.stack([np.asarray(a, dtype=complex),
                                    np.asarray(b, dtype=complex)]), chart=chart)


@dataclass(frozen=True)
class QuadratureGrid:
    """Polar interior grid (Gauss-Legendre radius x uniform angle) plus a
    uniform boundary grid; the radial Jacobian tames the log singularity."""

    n_r: int = 16
    n_theta: int = 32
    n_boundary: int = 64

    def __post_init__(self):
        if self.n_r < 16 or self.n_theta < 32 or self.n_boundary < 64:
            raise ValueError("grid below minimum resolution")

    def interior(self):
        """(nodes, weights): complex nodes in D^2, weights for flat dA.

        The radial rule is Gauss-Legendre on dyadic panels [2^-j-1, 2^-j],
        so the log factor of the moment integrals is analytic on every
        panel; the truncated core below 2^-24 is beyond double precision.
        """
        x, wgl = np.polynomial.legendre.leggauss(self.n_r)
        rs, ws = [], []
        hi = 1.0
        for _ in range(24):
            lo = hi / 2.0
            rs.append(lo + (hi - lo) * 0.5 * (x + 1.0))
            ws.append(0.5 * (hi - lo) * wgl)
            hi = lo
        r = np.concatenate(rs)
        wr = np.concatenate(ws) * r
        th = np.linspace(0.0, 2.0 * math.pi, self.n_theta, endpoint=False)
        wt = 2.0 * math.pi / self.n_theta
        nodes = (r[:, None] * np.exp(1j * th)[None, :]).ravel()
        weights = np.broadcast_to((wr * wt)[:, None],
                                  (r.size, self.n_theta)).ravel()
        return nodes, weights

    def boundary(self):
        th = np.linspace(0.0, 2.0 * math.pi, self.n_boundary, endpoint=False)
        return np.exp(1j * th), th

    def doubled(self) -> "QuadratureGrid":
        return QuadratureGrid(2 * self.n_r, 2 * self.n_theta, 2 * self.n_boundary)


@dataclass
class ComparisonReport:
    lhs: float
    log_moment: float
    boundary_avg: float
    defect: float
    error_estimate: float
    tol: float
    strategy: str
    verdict: str = field(init=False)

    def __post_init__(self):
        self.verdict = "PASS" if self.defect >= -self.tol else "FAIL"


DistanceStrategy = Union[str, ScalarField, Callable]


def area_density(metric: HermitianMetricField, disk: DiskEmbedding, w) -> np.ndarray:
    """Hausdorff area density of the disk image wrt flat dA on D^2.

    2 g(i(w))(i'(w), conj i'(w)); for direct-form Hermitian metrics the
    same contraction applies.
    """
    w = np.atleast_1d(np.asarray(w, dtype=complex))
    pts = disk(w)
    dv = disk.deriv(w)
    G = metric.gram(pts, check=False)
    return 2.0 * np.einsum("pij,pi,pj->p", G, dv, np.conj(dv)).real


def log_moment(metric: HermitianMetricField, disk: DiskEmbedding,
               grid: Optional[QuadratureGrid] = None) -> float:
    """(2/pi) iint log|w| dA over the disk image; always <= 0."""
    grid = grid or QuadratureGrid()
    nodes, weights = grid.interior()
    dens = area_density(metric, disk, nodes)
    logs = np.log(np.abs(nodes))
    return float((2.0 / math.pi) * np.sum(weights * logs * dens))


def _distance_values(metric, p, targets, strategy, solver_opts):
    """Distances from p to an array of chart points under a strategy."""
    p = np.asarray(p, dtype=complex).reshape(-1)
    if strategy == "numeric" or strategy is None:
        opts = dict(N=24, gtol=1e-6, max_iters=60)
        opts.update(solver_opts or {})
        d, derr = geodesic_distance_many(metric, p, targets, **opts)
        return d, derr
    if isinstance(strategy, ScalarField):
        return strategy(targets), np.zeros(len(targets))
    # plain callable: zs -> distances
    return np.asarray(strategy(targets), dtype=float), np.zeros(len(targets))


def comparison_defect(metric: HermitianMetricField, disk: DiskEmbedding, p, K: float,
                      distance: DistanceStrategy = "numeric",
                      grid: Optional[QuadratureGrid] = None,
                      tol: Optional[float] = None,
                      solver_opts: Optional[dict] = None) -> ComparisonReport:
    """Both sides of the disk comparison inequality and their difference.

    ``distance`` is "numeric" (geodesy solver) or a closed-form distance
    field d(p, .).  The error estimate is the change of the defect under
    one grid doubling.
    """
    numeric = distance == "numeric" or distance is None
    if tol is None:
        tol = 5e-3 if numeric else 1e-6
    grid = grid or QuadratureGrid()
    p = np.asarray(p, dtype=complex).reshape(-1)

    def assemble(g: QuadratureGrid) -> tuple:
        bw, _ = g.boundary()
        bpts = disk(bw)
        gap = np.min(np.linalg.norm(bpts - p[None], axis=1))
        if gap < NEAR_DISK_CUTOFF and g.n_boundary < 4 * 64:
            g = QuadratureGrid(g.n_r, g.n_theta, 2 * g.n_boundary)
            bw, _ = g.boundary()
            bpts = disk(bw)
        center = disk(np.zeros(1))
        targets = np.vstack([center, bpts])
        dvals, derr = _distance_values(metric, p, targets, distance, solver_opts)
        dk = dK_transform(dvals, K)
        lhs = float(dk[0])
        boundary_avg = float(np.mean(dk[1:]))
        lm = log_moment(metric, disk, g)
        return lhs, lm, boundary_avg, float(np.max(derr, initial=0.0))

    lhs1, lm1, ba1, de1 = assemble(grid)
    lhs2, lm2, ba2, de2 = assemble(grid.doubled())
    defect1 = lhs1 - lm1 - ba1
    defect2 = lhs2 - lm2 - ba2
    err = abs(defect2 - defect1) + 4.0 * max(de1, de2)
    return ComparisonReport(lhs=lhs2, log_moment=lm2, boundary_avg=ba2,
                            defect=defect2, error_estimate=err, tol=tol,
                            strategy="numeric" if numeric else "closed-form")


def _f_eps(r: np.ndarray, eps: float) -> np.ndarray:
    """The mollifier cutoff of log r: flat inner cap, log ramp, outer zero."""
    out = np.where(r <= eps, math.log(eps) + eps,
                   np.where(r <= math.exp(-eps), np.log(np.maximum(r, 1e-300)) + eps, 0.0))
    return out


def annulus_defect(metric: HermitianMetricField, disk: DiskEmbedding, p, K: float,
                   eps: float, distance: DistanceStrategy = "numeric",
                   grid: Optional[QuadratureGrid] = None,
                   solver_opts: Optional[dict] = None) -> float:
    """Mollified two-circle estimator of the comparison inequality.

    (1/4) int (d_K^2(eps, th) - d_K^2(e^{-eps}, th)) dth
      - iint f_eps dA over the disk image,

    which is >= 0 whenever the bisectional lower bound holds, and tends
    to pi/2 times the comparison defect as eps -> 0.
    """
    if not 0.0 < eps < 0.1:
        raise ValueError("eps must lie in (0, 1/10)")
    grid = grid or QuadratureGrid()
    p = np.asarray(p, dtype=complex).reshape(-1)
    bw, th = grid.boundary()
    inner = disk(eps * bw)
    outer = disk(math.exp(-eps) * bw)
    targets = np.vstack([inner, outer])
    dvals, _ = _distance_values(metric, p, targets, distance, solver_opts)
    dk = dK_transform(dvals, K)
    nb = len(bw)
    ring = 0.25 * (2.0 * math.pi / nb) * float(np.sum(dk[:nb] - dk[nb:]))
    nodes, weights = grid.interior()
    dens = area_density(metric, disk, nodes)
    bulk = float(np.sum(weights * _f_eps(np.abs(nodes), eps) * dens))
    return ring - bulk


def annulus_tail(metric: HermitianMetricField, disk: DiskEmbedding, eps: float,
                 grid: Optional[QuadratureGrid] = None) -> float:
    """iint (f_eps - log|w|) dA; the gap between the estimator's bulk term
    and the log moment, vanishing as eps -> 0."""
    grid = grid or QuadratureGrid()
    nodes, weights = grid.interior()
    dens = area_density(metric, disk, nodes)
    r = np.abs(nodes)
    return float(np.sum(weights * (_f_eps(r, eps) - np.log(r)) * dens))


def violation_disk(metric: HermitianMetricField, p, K: float, pair: TangentPair,
                   eps1: float, eps2: float) -> DiskEmbedding:
    """The affine disk i(w) = p + eps2 Y + eps1 w X used to exhibit a
    negative defect when the bound fails at p."""
    if not (0 < eps1 < eps2 < 1):
        raise ValueError("need 0 < eps1 < eps2 < 1")
    p = np.asarray(p, dtype=complex).reshape(-1)
    return DiskEmbedding.affine(p + eps2 * pair.Y, eps1 * pair.X, metric.chart)


def rprime_value(data: CurvatureData, K: float, pair: TangentPair) -> float:
    """Contracted defect tensor entering the small-disk asymptotics.

    Equals -4 times bk_defect for a unit pair in this normalization;
    positive exactly when the pair certifies failure of the bound.
    """
    return -4.0 * bk_defect(data, K, pair)


def asymptotic_defect(rprime: float, eps1: float, eps2: float) -> float:
    """-(1/6) eps1^2 eps2^2 rprime; the leading defect of the violation disk.

    Derived by pairing the constant leading term of the defect current
    against the disk Green kernel: the moment (2/pi) iint log|w| 2 dA
    equals -1, so the defect is negative exactly when rprime > 0.  The
    flat case is exactly computable and pins the constant.
    """
    if not 0 < eps2 < 1:
        raise ValueError("eps2 must lie in (0, 1)")
    return -(eps1 ** 2) * (eps2 ** 2) * rprime / 6.0


def torsion_metric(T: np.ndarray, chart: ComplexChart) -> HermitianMetricField:
    """Direct-form Hermitian metric with prescribed torsion linear term.

    T[i, j, k] must be antisymmetric in (j, k); the gram matrix is
    (1/2)(delta_ab + sum_j T[b, j, a] z^j + conj(T[a, j, b]) zbar^j),
    the minimal non-Kahler deformation of the flat metric.
    """
    T = np.asarray(T, dtype=complex)
    n = chart.n
    if T.shape != (n, n, n):
        raise ValueError("torsion tensor must be (n, n, n)")
    if np.max(np.abs(T + T.transpose(0, 2, 1))) > 1e-12:
        raise ValueError("torsion must be antisymmetric in its last two slots")

    def gram(zs):
        P = zs.shape[0]
        base = np.broadcast_to(np.eye(n), (P, n, n)).astype(complex)
        lin = np.einsum("bja,pj->pab", T, zs)
        return 0.5 * (base + lin + np.conj(np.swapaxes(lin, 1, 2)))

    return HermitianMetricField(chart, gram_fn=gram, name="torsion metric")


def torsion_contraction(T: np.ndarray, a: np.ndarray, b: np.ndarray) -> complex:
    """sum conj(a^i) b^j T[i, j, k] a^k."""
    return complex(np.einsum("i,j,ijk,k->", np.conj(a), b, np.asarray(T, dtype=complex), a))


def torsion_expected_defect(T: np.ndarray, a, b, eps1: float, eps2: float) -> float:
    """2 eps1^2 eps2 S, the leading defect of the torsion disk
    i(w) = eps1 w a + eps2 b, with S the torsion contraction (real).

    The constant comes from pairing the linear torsion term of the defect
    current with the disk Green kernel; negative exactly when S < 0.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    S = torsion_contraction(T, a, b)
    return 2.0 * eps1 ** 2 * eps2 * S.real
