"""Compiled per-node loops for the explicit level-set update."""

import numpy as np
from numba import njit


@njit(cache=True)
def _fill_boundary(out):
    ny, nx = out.shape
    for i in range(1, nx - 1):
        out[0, i] = out[1, i]
        out[ny - 1, i] = out[ny - 2, i]
    for j in range(ny):
        out[j, 0] = out[min(max(j, 1), ny - 2), 1]
        out[j, nx - 1] = out[min(max(j, 1), ny - 2), nx - 2]


@njit(cache=True)
def _curv_at(u, j, i, hx, hy, eps2):
    ux = (u[j, i + 1] - u[j, i - 1]) / (2.0 * hx)
    uy = (u[j + 1, i] - u[j - 1, i]) / (2.0 * hy)
    uxx = (u[j, i + 1] - 2.0 * u[j, i] + u[j, i - 1]) / (hx * hx)
    uyy = (u[j + 1, i] - 2.0 * u[j, i] + u[j - 1, i]) / (hy * hy)
    uxy = (u[j + 1, i + 1] - u[j + 1, i - 1] - u[j - 1, i + 1] + u[j - 1, i - 1]) / (4.0 * hx * hy)
    num = uxx * uy * uy - 2.0 * ux * uy * uxy + uyy * ux * ux
    return num / (ux * ux + uy * uy + eps2)


@njit(cache=True)
def _force_at(u, j, i, hx, hy, k):
    # upwind |grad u|: the growing branch for k > 0, the shrinking one for k < 0
    if k == 0.0:
        return 0.0
    dxm = (u[j, i] - u[j, i - 1]) / hx
    dxp = (u[j, i + 1] - u[j, i]) / hx
    dym = (u[j, i] - u[j - 1, i]) / hy
    dyp = (u[j + 1, i] - u[j, i]) / hy
    if k > 0.0:
        g = max(dxm, 0.0) ** 2 + min(dxp, 0.0) ** 2 + max(dym, 0.0) ** 2 + min(dyp, 0.0) ** 2
    else:
        g = min(dxm, 0.0) ** 2 + max(dxp, 0.0) ** 2 + min(dym, 0.0) ** 2 + max(dyp, 0.0) ** 2
    return -k * np.sqrt(g)


@njit(cache=True)
def curvature(u, hx, hy, eps):
    ny, nx = u.shape
    out = np.empty_like(u)
    eps2 = eps * eps
    for j in range(1, ny - 1):
        for i in range(1, nx - 1):
            out[j, i] = _curv_at(u, j, i, hx, hy, eps2)
    _fill_boundary(out)
    return out


@njit(cache=True)
def forcing(u, k, hx, hy):
    ny, nx = u.shape
    out = np.empty_like(u)
    for j in range(1, ny - 1):
        for i in range(1, nx - 1):
            out[j, i] = _force_at(u, j, i, hx, hy, k[j, i])
    _fill_boundary(out)
    return out


@njit(cache=True)
def advance(u, out, rate, k, lower, upper, hx, hy, eps, dt, use_k):
    """One clamped explicit step written into ``out``; ``rate`` is scratch."""
    ny, nx = u.shape
    eps2 = eps * eps
    for j in range(1, ny - 1):
        for i in range(1, nx - 1):
            r = _curv_at(u, j, i, hx, hy, eps2)
            if use_k:
                r += _force_at(u, j, i, hx, hy, k[j, i])
            rate[j, i] = r
    _fill_boundary(rate)
    for j in range(ny):
        for i in range(nx):
            v = u[j, i] + dt * rate[j, i]
            if v < lower[j, i]:
                v = lower[j, i]
            if v > upper[j, i]:
                v = upper[j, i]
            out[j, i] = v
