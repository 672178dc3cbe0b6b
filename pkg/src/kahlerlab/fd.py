"""Finite differencing kernels: central stencils with one Richardson step.

All evaluators are batched: ``f`` maps an ``(P, m)`` array of real
coordinate points to an array whose leading axis is ``P`` (trailing shape
arbitrary, e.g. scalar potentials or matrix-valued metric fields).  The
Richardson combination ``(4 D(h/2) - D(h)) / 3`` upgrades the second-order
central stencils to fourth order.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "gradient",
    "hessian",
    "laplacian_2d",
    "wirtinger_dd",
    "wirtinger_d",
]


def _eval_at_offsets(f, x, offsets):
    """Evaluate f at x + offset for every offset; returns (Q, P, ...)."""
    P, m = x.shape
    Q = len(offsets)
    pts = (x[None, :, :] + np.asarray(offsets)[:, None, :]).reshape(Q * P, m)
    vals = np.asarray(f(pts))
    return vals.reshape((Q, P) + vals.shape[1:])


def gradient(f, x, h):
    """Fourth-order first derivatives along every axis; (P, m, ...)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    P, m = x.shape
    offsets = []
    for a in range(m):
        for s in (h, -h, h / 2, -h / 2):
            e = np.zeros(m)
            e[a] = s
            offsets.append(e)
    vals = _eval_at_offsets(f, x, offsets)
    out = []
    for a in range(m):
        vp, vm, vp2, vm2 = vals[4 * a], vals[4 * a + 1], vals[4 * a + 2], vals[4 * a + 3]
        d_h = (vp - vm) / (2 * h)
        d_h2 = (vp2 - vm2) / h
        out.append((4 * d_h2 - d_h) / 3)
    return np.stack(out, axis=1)


def hessian(f, x, h):
    """Fourth-order full Hessian; (P, m, m, ...)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    P, m = x.shape
    offsets = [np.zeros(m)]
    index = {}
    for a in range(m):
        for s in (h, -h, h / 2, -h / 2):
            e = np.zeros(m)
            e[a] = s
            index[(a, s)] = len(offsets)
            offsets.append(e)
    for a in range(m):
        for b in range(a + 1, m):
            for sa in (1, -1):
                for sb in (1, -1):
                    for scale in (h, h / 2):
                        e = np.zeros(m)
                        e[a] = sa * scale
                        e[b] = sb * scale
                        index[(a, b, sa, sb, scale)] = len(offsets)
                        offsets.append(e)
    vals = _eval_at_offsets(f, x, offsets)
    c = vals[0]
    trailing = c.shape[1:]
    H = np.zeros((m, m, P) + trailing, dtype=vals.dtype)
    for a in range(m):
        vp, vm = vals[index[(a, h)]], vals[index[(a, -h)]]
        vp2, vm2 = vals[index[(a, h / 2)]], vals[index[(a, -h / 2)]]
        d_h = (vp - 2 * c + vm) / h**2
        d_h2 = (vp2 - 2 * c + vm2) / (h / 2) ** 2
        H[a, a] = (4 * d_h2 - d_h) / 3
    for a in range(m):
        for b in range(a + 1, m):
            def mixed(scale):
                pp = vals[index[(a, b, 1, 1, scale)]]
                pm = vals[index[(a, b, 1, -1, scale)]]
                mp = vals[index[(a, b, -1, 1, scale)]]
                mm = vals[index[(a, b, -1, -1, scale)]]
                return (pp - pm - mp + mm) / (4 * scale**2)

            val = (4 * mixed(h / 2) - mixed(h)) / 3
            H[a, b] = val
            H[b, a] = val
    # leading axis back to P
    return np.moveaxis(H, 2, 0)


def laplacian_2d(f, x, h):
    """Fourth-order Laplacian of a function on R^2; (P, ...)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    offsets = [np.zeros(2)]
    for a in range(2):
        for s in (h, -h, h / 2, -h / 2):
            e = np.zeros(2)
            e[a] = s
            offsets.append(e)
    vals = _eval_at_offsets(f, x, offsets)
    c = vals[0]

    def lap(vpx, vmx, vpy, vmy, step):
        return (vpx + vmx + vpy + vmy - 4 * c) / step**2

    l_h = lap(vals[1], vals[2], vals[5], vals[6], h)
    l_h2 = lap(vals[3], vals[4], vals[7], vals[8], h / 2)
    return (4 * l_h2 - l_h) / 3


def _split_wirtinger(H, n):
    """Contract a (P, 2n, 2n, ...) real-coordinate Hessian into d_i dbar_j.

    Coordinate layout is (x_1..x_n, y_1..y_n).  Returns (P, n, n, ...) with
    entry [i, j] = quarter * (H_xx + H_yy + i (H_xy - H_yx)).
    """
    Hxx = H[:, :n, :n]
    Hyy = H[:, n:, n:]
    Hxy = H[:, :n, n:]
    Hyx = H[:, n:, :n]
    return 0.25 * (Hxx + Hyy + 1j * (Hxy - Hyx))


def wirtinger_dd(f, x, h, n):
    """Mixed complex second derivatives d_i dbar_j of a real-coordinate field."""
    return _split_wirtinger(hessian(f, x, h), n)


def wirtinger_d(f, x, h, n):
    """Holomorphic first derivatives d_k; (P, n, ...)."""
    G = gradient(f, x, h)
    return 0.5 * (G[:, :n] - 1j * G[:, n:])
