"""Hot numeric kernels for the angular convolution core.

The semigroup convolution on H^d reduces, for each pair of radii (r, r'),
to a one-dimensional integral of the tabulated heat kernel over geodesic
distance.  Assembling the N x N core matrix is the dominant cost for d != 3,
so the inner loop is numba-jitted when numba is available.  A pure-numpy
fallback implements the same arithmetic; it is selected automatically when
numba is missing, or forced with the environment variable
``HYPBOUSS_DISABLE_NUMBA=1``.
"""

from __future__ import annotations

import math
import os

import numpy as np

__all__ = [
    "USING_NUMBA",
    "pchip_derivatives",
    "hermite_eval",
    "core_matrix_psi",
]

_flag = os.environ.get("HYPBOUSS_DISABLE_NUMBA", "").strip().lower()
NUMBA_DISABLED = _flag in {"1", "true", "yes", "on"}

numba = None
if not NUMBA_DISABLED:
    try:
        import numba  # type: ignore
    except ImportError:
        numba = None

USING_NUMBA = numba is not None


def pchip_derivatives(y: np.ndarray, h: float) -> np.ndarray:
    """Fritsch-Carlson monotone derivatives for a uniformly sampled table."""
    y = np.asarray(y, dtype=float)
    m = np.diff(y) / h
    d = np.zeros_like(y)
    prod = m[:-1] * m[1:]
    hm = np.zeros(prod.shape)
    ok = prod > 0
    hm[ok] = 2.0 * prod[ok] / (m[:-1] + m[1:])[ok]
    d[1:-1] = hm
    # Shape-preserving one-sided ends.
    d0 = (3.0 * m[0] - m[1]) / 2.0 if y.size > 2 else m[0]
    if d0 * m[0] <= 0:
        d0 = 0.0
    elif abs(d0) > 3.0 * abs(m[0]):
        d0 = 3.0 * m[0]
    dn = (3.0 * m[-1] - m[-2]) / 2.0 if y.size > 2 else m[-1]
    if dn * m[-1] <= 0:
        dn = 0.0
    elif abs(dn) > 3.0 * abs(m[-1]):
        dn = 3.0 * m[-1]
    d[0], d[-1] = d0, dn
    return d


def hermite_eval(xq: np.ndarray, h: float, y: np.ndarray, dy: np.ndarray) -> np.ndarray:
    """Cubic Hermite evaluation on the uniform table (x0 = 0); clamps beyond it."""
    xq = np.asarray(xq, dtype=float)
    n = y.size
    t = xq / h
    i = np.clip(np.floor(t).astype(np.int64), 0, n - 2)
    s = t - i
    s = np.clip(s, 0.0, 1.0)
    s2 = s * s
    s3 = s2 * s
    h00 = 2 * s3 - 3 * s2 + 1
    h10 = s3 - 2 * s2 + s
    h01 = -2 * s3 + 3 * s2
    h11 = s3 - s2
    return h00 * y[i] + h10 * h * dy[i] + h01 * y[i + 1] + h11 * h * dy[i + 1]


def _core_psi_numpy(r: np.ndarray, d: int, h_tab: float, y: np.ndarray,
                    dy: np.ndarray, n_psi: int, row_block: int = 48) -> np.ndarray:
    """Angular core by the Chebyshev midpoint rule in the substituted variable.

    For d >= 3 the angular integral over the sphere becomes, per (r_i, r_j),
    an integral over geodesic distance l in [|ri-rj|, ri+rj] whose endpoint
    weight is flattened exactly by l = m + hh*cos(psi); midpoint nodes in psi
    never touch the endpoints.  For d = 2 the same substitution absorbs the
    inverse-square-root endpoint singularity.
    """
    n = r.size
    psi = (np.arange(n_psi) + 0.5) * math.pi / n_psi
    cpsi = np.cos(psi)
    spsi = np.sin(psi)
    w = math.pi / n_psi

    core = np.empty((n, n))
    sinh_r = np.sinh(r)
    for a in range(0, n, row_block):
        b = min(a + row_block, n)
        ri = r[a:b, None]
        rj = r[None, :]
        mm = np.maximum(ri, rj)[..., None]
        hh = np.minimum(ri, rj)[..., None]
        ell = mm + hh * cpsi
        lp = ri + rj
        lm = np.abs(ri - rj)
        ch = np.cosh(ell)
        s_hi = np.maximum(np.cosh(lp)[..., None] - ch, 0.0)
        s_lo = np.maximum(ch - np.cosh(lm)[..., None], 0.0)
        p = hermite_eval(ell, h_tab, y, dy)
        base = p * np.sinh(ell) * (hh * spsi)
        if d == 2:
            vals = base / np.sqrt(np.maximum(s_hi * s_lo, 1e-300))
        else:
            bb = (sinh_r[a:b, None] * sinh_r[None, :])[..., None]
            vals = base * (s_hi * s_lo) ** ((d - 3) / 2.0) / bb ** (d - 2)
        core[a:b, :] = w * vals.sum(axis=-1)
    return core


if USING_NUMBA:

    @numba.njit(cache=True, fastmath=False)
    def _hermite_scalar(xq, h, y, dy):  # pragma: no cover - exercised via wrapper
        n = y.size
        t = xq / h
        i = int(t)
        if i < 0:
            i = 0
        if i > n - 2:
            i = n - 2
        s = t - i
        if s < 0.0:
            s = 0.0
        if s > 1.0:
            s = 1.0
        s2 = s * s
        s3 = s2 * s
        return ((2 * s3 - 3 * s2 + 1) * y[i] + (s3 - 2 * s2 + s) * h * dy[i]
                + (-2 * s3 + 3 * s2) * y[i + 1] + (s3 - s2) * h * dy[i + 1])

    @numba.njit(cache=True, fastmath=False)
    def _core_psi_numba(r, d, h_tab, y, dy, cpsi, spsi, w):  # pragma: no cover
        n = r.size
        n_psi = cpsi.size
        core = np.empty((n, n))
        sinh_r = np.sinh(r)
        for i in range(n):
            for j in range(i, n):
                lp = r[i] + r[j]
                lm = abs(r[i] - r[j])
                mm = max(r[i], r[j])
                hh = min(r[i], r[j])
                cosh_lp = math.cosh(lp)
                cosh_lm = math.cosh(lm)
                acc = 0.0
                for k in range(n_psi):
                    ell = mm + hh * cpsi[k]
                    ch = math.cosh(ell)
                    s_hi = cosh_lp - ch
                    s_lo = ch - cosh_lm
                    if s_hi < 0.0:
                        s_hi = 0.0
                    if s_lo < 0.0:
                        s_lo = 0.0
                    p = _hermite_scalar(ell, h_tab, y, dy)
                    base = p * math.sinh(ell) * hh * spsi[k]
                    if d == 2:
                        ss = s_hi * s_lo
                        if ss < 1e-300:
                            ss = 1e-300
                        acc += base / math.sqrt(ss)
                    else:
                        bb = sinh_r[i] * sinh_r[j]
                        acc += base * (s_hi * s_lo) ** ((d - 3) / 2.0) / bb ** (d - 2)
                core[i, j] = w * acc
                core[j, i] = core[i, j]
        return core


def core_matrix_psi(r: np.ndarray, d: int, h_tab: float, y: np.ndarray,
                    dy: np.ndarray, n_psi: int = 128) -> np.ndarray:
    """Angular core matrix for dimensions other than 3 (those use a closed form)."""
    r = np.ascontiguousarray(r, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    dy = np.ascontiguousarray(dy, dtype=float)
    if USING_NUMBA:
        psi = (np.arange(n_psi) + 0.5) * math.pi / n_psi
        return _core_psi_numba(r, d, h_tab, y, dy, np.cos(psi), np.sin(psi),
                               math.pi / n_psi)
    return _core_psi_numpy(r, d, h_tab, y, dy, n_psi)
