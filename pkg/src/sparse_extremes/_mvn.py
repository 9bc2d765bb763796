"""Gaussian distribution functions used by the Husler-Reiss machinery.

``bvn_cdf`` follows Genz's Gauss-Legendre scheme for the bivariate normal
(absolute accuracy around 1e-15).  ``mvn_cdf`` is a randomized quasi-Monte
Carlo version of Genz's separation-of-variables integrator and returns a
standard error alongside the estimate.
"""
from __future__ import annotations

import numpy as np
from scipy.special import ndtr, ndtri
from scipy.stats import qmc

_GL_W = (
    np.array([0.1713244923791705, 0.3607615730481384, 0.4679139345726904]),
    np.array([
        0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
        0.2031674267230659, 0.2334925365383547, 0.2491470458134029,
    ]),
    np.array([
        0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
        0.08327674157670475, 0.1019301198172404, 0.1181945319615184,
        0.1316886384491766, 0.1420961093183821, 0.1491729864726037,
        0.1527533871307259,
    ]),
)
_GL_X = (
    np.array([0.9324695142031522, 0.6612093864662647, 0.2386191860831970]),
    np.array([
        0.9815606342467191, 0.9041172563704750, 0.7699026741943050,
        0.5873179542866171, 0.3678314989981802, 0.1252334085114692,
    ]),
    np.array([
        0.9931285991850949, 0.9639719272779138, 0.9122344282513259,
        0.8391169718222188, 0.7463319064601508, 0.6360536807265150,
        0.5108670019508271, 0.3737060887154196, 0.2277858511416451,
        0.07652652113349733,
    ]),
)


def _bvn_upper(h: np.ndarray, k: np.ndarray, r: float) -> np.ndarray:
    """P(X > h, Y > k) for standard bivariate normal with correlation r."""
    h = np.asarray(h, dtype=float)
    k = np.asarray(k, dtype=float)
    h, k = np.broadcast_arrays(h, k)
    h = h.copy()
    k = k.copy()
    out = np.empty(h.shape)
    fin = np.isfinite(h) & np.isfinite(k)
    # infinite limits are handled in closed form
    nf = ~fin
    if nf.any():
        hh, kk = h[nf], k[nf]
        val = np.where(
            (hh == np.inf) | (kk == np.inf), 0.0,
            np.where(hh == -np.inf, np.where(kk == -np.inf, 1.0, ndtr(-kk)), ndtr(-hh)),
        )
        out[nf] = val
    if not fin.any():
        return out
    h = h[fin]
    k = k[fin]
    if r == 0.0:
        out[fin] = ndtr(-h) * ndtr(-k)
        return out
    if abs(r) < 0.3:
        idx = 0
    elif abs(r) < 0.75:
        idx = 1
    else:
        idx = 2
    w = np.concatenate([_GL_W[idx], _GL_W[idx]])
    x = np.concatenate([1.0 - _GL_X[idx], 1.0 + _GL_X[idx]])
    tp = 2.0 * np.pi
    hk = h * k
    if abs(r) < 0.925:
        hs = (h * h + k * k) / 2.0
        asr = np.arcsin(r) / 2.0
        sn = np.sin(asr * x)
        bvn = np.exp((np.outer(hk, sn) - hs[:, None]) / (1.0 - sn**2)) @ w
        bvn = bvn * asr / tp + ndtr(-h) * ndtr(-k)
    else:
        if r < 0:
            k = -k
            hk = -hk
        bvn = np.zeros_like(h)
        if abs(r) < 1:
            a_s = 1.0 - r * r
            a = np.sqrt(a_s)
            bs = (h - k) ** 2
            asr = -(bs / a_s + hk) / 2.0
            c = (4.0 - hk) / 8.0
            d = (12.0 - hk) / 80.0
            term = a * np.exp(asr) * (1 - c * (bs - a_s) * (1 - d * bs) / 3 + c * d * a_s**2)
            bvn = np.where(asr > -100, term, 0.0)
            b = np.sqrt(bs)
            sp = np.sqrt(tp) * ndtr(-b / a)
            corr = np.exp(-hk / 2) * sp * b * (1 - c * bs * (1 - d * bs) / 3)
            bvn = bvn - np.where(hk > -100, corr, 0.0)
            a = a / 2.0
            xs = (a * x) ** 2  # shape (m,)
            asr2 = -(bs[:, None] / xs[None, :] + hk[:, None]) / 2.0
            spx = 1 + c[:, None] * xs[None, :] * (1 + 5 * d[:, None] * xs[None, :])
            rs = np.sqrt(1 - xs)
            ep = np.exp(-(hk[:, None] / 2) * xs[None, :] / (1 + rs[None, :]) ** 2) / rs[None, :]
            contrib = a * w[None, :] * np.exp(asr2) * (ep - spx)
            contrib = np.where(asr2 > -100, contrib, 0.0)
            bvn = bvn + contrib.sum(axis=1)
            bvn = -bvn / tp
        if r > 0:
            bvn = bvn + ndtr(-np.maximum(h, k))
        else:
            lo = np.where(h < 0, ndtr(k) - ndtr(h), ndtr(-h) - ndtr(-k))
            bvn = np.where(h >= k, -bvn, lo - bvn)
    out[fin] = np.clip(bvn, 0.0, 1.0)
    return out


def bvn_cdf(a, b, rho: float) -> np.ndarray:
    """P(X <= a, Y <= b) for a standard bivariate normal with correlation ``rho``.

    ``a`` and ``b`` broadcast against each other; ``rho`` must be scalar.
    """
    rho = float(rho)
    if not -1.0 <= rho <= 1.0:
        raise ValueError(f"correlation {rho} outside [-1, 1]")
    return _bvn_upper(-np.asarray(a, float), -np.asarray(b, float), rho)


def normal_cdf_small(upper: np.ndarray, cov: np.ndarray) -> np.ndarray:
    """Exact centered normal CDF for dimension 1 or 2, vectorized over rows of ``upper``."""
    upper = np.atleast_2d(np.asarray(upper, float))
    cov = np.atleast_2d(np.asarray(cov, float))
    p = cov.shape[0]
    if p == 1:
        return ndtr(upper[:, 0] / np.sqrt(cov[0, 0]))
    if p == 2:
        s = np.sqrt(np.diag(cov))
        rho = cov[0, 1] / (s[0] * s[1])
        return bvn_cdf(upper[:, 0] / s[0], upper[:, 1] / s[1], float(np.clip(rho, -1, 1)))
    raise ValueError("normal_cdf_small handles dimension 1 or 2 only")


def mvn_cdf(upper, cov, *, n_points: int = 4096, n_rep: int = 8, seed: int = 0):
    """Centered multivariate normal CDF P(N <= upper) by randomized QMC.

    ``upper`` may be a single vector or an (r, p) array of limit vectors that
    share ``cov``.  Returns ``(values, std_errors)`` with the same leading
    shape as ``upper``.  Dimensions 1 and 2 are evaluated exactly (zero error).
    """
    upper = np.asarray(upper, float)
    single = upper.ndim == 1
    up = np.atleast_2d(upper)
    cov = np.atleast_2d(np.asarray(cov, float))
    p = cov.shape[0]
    if up.shape[1] != p:
        raise ValueError("dimension mismatch between limits and covariance")
    if p <= 2:
        val = normal_cdf_small(up, cov)
        err = np.zeros_like(val)
        return (val[0], err[0]) if single else (val, err)
    chol = np.linalg.cholesky(cov)
    diag = np.diag(chol)
    m = 1 << int(np.ceil(np.log2(max(n_points, 2))))
    reps = np.empty((n_rep, up.shape[0]))
    rng = np.random.default_rng(seed)
    for rep in range(n_rep):
        w = qmc.Sobol(d=p - 1, scramble=True, seed=rng).random(m)  # (m, p-1)
        # separation of variables, vectorized over limit rows and QMC points
        e = ndtr(up[:, 0] / diag[0])[:, None] * np.ones((1, m))
        prod = e.copy()
        y = np.zeros((up.shape[0], m, p - 1))
        for i in range(1, p):
            u = np.clip(w[None, :, i - 1] * e, 1e-300, 1 - 1e-16)
            y[:, :, i - 1] = ndtri(u)
            shift = y[:, :, :i] @ chol[i, :i]
            e = ndtr((up[:, i][:, None] - shift) / diag[i])
            prod = prod * e
        reps[rep] = prod.mean(axis=1)
    val = reps.mean(axis=0)
    err = reps.std(axis=0, ddof=1) / np.sqrt(n_rep)
    return (val[0], err[0]) if single else (val, err)
