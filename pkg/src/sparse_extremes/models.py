"""Parametric extreme value models: max-linear, recursive max-linear, logistic, Husler-Reiss."""
from __future__ import annotations

import functools
import graphlib
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy import integrate
from scipy.special import ndtr

from ._mvn import mvn_cdf, normal_cdf_small
from .ingest import ObservationMatrix, labels_or_default


def frechet(rng: np.random.Generator, size) -> np.ndarray:
    """Standard Frechet variables -1/log(U), U uniform on the open unit interval."""
    u = rng.random(size)
    u = np.where(u == 0.0, np.finfo(float).tiny, u)
    return -1.0 / np.log(u)


# ---------------------------------------------------------------- max-linear


@dataclass(frozen=True)
class MaxLinearModel:
    A: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, float))
        if np.any(A < 0):
            raise ValueError("coefficients must be nonnegative")
        if np.any(np.abs(A.sum(axis=1) - 1.0) > 1e-12):
            raise ValueError("rows of A must sum to 1")
        if np.any(A.sum(axis=0) == 0):
            raise ValueError("A has an all-zero column")
        A.setflags(write=False)
        object.__setattr__(self, "A", A)

    @classmethod
    def from_unnormalized(cls, A) -> "MaxLinearModel":
        A = np.atleast_2d(np.asarray(A, float))
        return cls(A / A.sum(axis=1, keepdims=True))

    @property
    def d(self) -> int:
        return self.A.shape[0]

    @property
    def p(self) -> int:
        return self.A.shape[1]

    @property
    def row_sums(self) -> np.ndarray:
        return self.A.sum(axis=1)

    def angular_atoms(self, norm: str = "l1") -> tuple[np.ndarray, np.ndarray]:
        """Atoms a_j/||a_j|| of the angular measure and their probabilities."""
        from .ingest import norm_of

        nrm = norm_of(self.A.T, norm)
        return self.A.T / nrm[:, None], nrm / nrm.sum()

    def chi(self, i: int, j: int) -> float:
        """Exact bivariate tail dependence coefficient sum_l min(a_il, a_jl)."""
        return float(np.minimum(self.A[i], self.A[j]).sum())


def simulate_max_linear(model: MaxLinearModel, n: int, seed=None, labels=None) -> ObservationMatrix:
    rng = np.random.default_rng(seed)
    eps = frechet(rng, (n, model.p))
    z = np.max(eps[:, None, :] * model.A[None, :, :], axis=2)
    return ObservationMatrix(z, labels_or_default(labels, model.d))


def simulate_max_linear_limit(model: MaxLinearModel, n: int, seed=None, labels=None) -> ObservationMatrix:
    """Noiseless draws from the limiting Pareto law of a max-linear model.

    Each row is R * a_J / ||a_J||_1 with R standard Pareto and J drawn with
    probability proportional to ||a_J||_1, so every observation sits exactly on
    the face supp(a_J).
    """
    rng = np.random.default_rng(seed)
    atoms, probs = model.angular_atoms("l1")
    j = rng.choice(model.p, size=n, p=probs)
    r = 1.0 / (1.0 - rng.random(n))
    return ObservationMatrix(r[:, None] * atoms[j], labels_or_default(labels, model.d))


# ------------------------------------------------------ recursive max-linear


@dataclass(frozen=True)
class RecursiveMLModel:
    """Max-linear structural equations on a DAG.

    ``edges`` maps (parent, child) to beta_{child,parent}; ``diag`` holds beta_ii.
    """

    d: int
    edges: Mapping[tuple[int, int], float]
    diag: np.ndarray = field(default=None)

    def __post_init__(self):
        diag = np.ones(self.d) if self.diag is None else np.asarray(self.diag, float)
        if diag.shape != (self.d,) or np.any(diag <= 0):
            raise ValueError("diagonal coefficients must be positive, one per node")
        edges = {(int(a), int(b)): float(v) for (a, b), v in dict(self.edges).items()}
        for (a, b), v in edges.items():
            if not (0 <= a < self.d and 0 <= b < self.d) or a == b:
                raise ValueError(f"invalid edge {(a, b)}")
            if v <= 0:
                raise ValueError("edge coefficients must be positive")
        object.__setattr__(self, "diag", diag)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "_order", self._topological_order())

    def parents(self, i: int) -> list[int]:
        return sorted(a for (a, b) in self.edges if b == i)

    def _topological_order(self) -> tuple[int, ...]:
        ts = graphlib.TopologicalSorter({i: self.parents(i) for i in range(self.d)})
        try:
            return tuple(ts.static_order())
        except graphlib.CycleError as exc:
            raise ValueError(f"graph has a directed cycle: {exc.args[1]}") from None

    @property
    def order(self) -> tuple[int, ...]:
        return self._order


def simulate_recursive_ml(model: RecursiveMLModel, n: int, seed=None, labels=None) -> ObservationMatrix:
    rng = np.random.default_rng(seed)
    eps = frechet(rng, (n, model.d))
    z = np.zeros((n, model.d))
    for i in model.order:
        zi = model.diag[i] * eps[:, i]
        for j in model.parents(i):
            zi = np.maximum(zi, model.edges[(j, i)] * z[:, j])
        z[:, i] = zi
    return ObservationMatrix(z, labels_or_default(labels, model.d))


def recursive_coefficients(model: RecursiveMLModel) -> np.ndarray:
    """Unnormalized max-linear coefficients: max over paths of the path products."""
    d = model.d
    a = np.zeros((d, d))
    for i in model.order:
        a[i, i] = model.diag[i]
        for j in model.parents(i):
            a[i] = np.maximum(a[i], model.edges[(j, i)] * a[j])
    return a


def recursive_to_max_linear(model: RecursiveMLModel) -> MaxLinearModel:
    """Equivalent d-factor max-linear model, rows rescaled to sum to one."""
    return MaxLinearModel.from_unnormalized(recursive_coefficients(model))


# ------------------------------------------------------------------ logistic


@dataclass(frozen=True)
class LogisticModel:
    d: int
    theta: float

    def __post_init__(self):
        if not 0.0 < self.theta < 1.0:
            raise ValueError("theta must lie in (0, 1)")
        if self.d < 2:
            raise ValueError("dimension must be at least 2")

    def chi(self) -> float:
        """Bivariate tail dependence 2 - 2^theta."""
        return 2.0 - 2.0**self.theta


def logistic_exponent_density(model: LogisticModel, y) -> float | np.ndarray:
    """Exponent measure density of the symmetric logistic model."""
    y = np.asarray(y, float)
    single = y.ndim == 1
    y = np.atleast_2d(y)
    if y.shape[1] != model.d:
        raise ValueError(f"expected {model.d} coordinates")
    if np.any(y <= 0):
        raise ValueError("density defined for positive arguments")
    th = model.theta
    d = model.d
    logc = sum(math.log(i / th - 1.0) for i in range(1, d))
    s = np.log(np.sum(y ** (-1.0 / th), axis=1))
    out = np.exp((th - d) * s + logc + (-1.0 / th - 1.0) * np.log(y).sum(axis=1))
    return float(out[0]) if single else out


def _positive_stable(rng: np.random.Generator, alpha: float, size: int) -> np.ndarray:
    """Kanter's representation; Laplace transform exp(-s^alpha)."""
    u = rng.uniform(0.0, np.pi, size)
    e = rng.exponential(1.0, size)
    a = np.sin(alpha * u) / np.sin(u) ** (1.0 / alpha)
    b = (np.sin((1.0 - alpha) * u) / e) ** ((1.0 - alpha) / alpha)
    return a * b


def simulate_logistic(model: LogisticModel, n: int, seed=None, labels=None) -> ObservationMatrix:
    """Max-stable logistic vectors with standard Frechet margins."""
    rng = np.random.default_rng(seed)
    s = _positive_stable(rng, model.theta, n)
    e = rng.exponential(1.0, (n, model.d))
    z = (s[:, None] / e) ** model.theta
    return ObservationMatrix(z, labels_or_default(labels, model.d))


# -------------------------------------------------------------- Husler-Reiss


def sigma_from_gamma(gamma: np.ndarray, m: int) -> np.ndarray:
    """(Gamma_im + Gamma_jm - Gamma_ij)/2 over i, j != m."""
    keep = [i for i in range(gamma.shape[0]) if i != m]
    g = gamma[np.ix_(keep, keep)]
    col = gamma[keep, m]
    return 0.5 * (col[:, None] + col[None, :] - g)


@dataclass(frozen=True)
class HuslerReissModel:
    gamma: np.ndarray
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        g = np.atleast_2d(np.asarray(self.gamma, float)).copy()
        if g.shape[0] != g.shape[1] or g.shape[0] < 2:
            raise ValueError("gamma must be a square matrix of size >= 2")
        if np.any(np.abs(np.diag(g)) > 1e-12):
            raise ValueError("gamma must have a zero diagonal")
        if not np.allclose(g, g.T, atol=1e-12):
            raise ValueError("gamma must be symmetric")
        if np.any(g < 0):
            raise ValueError("gamma must be nonnegative")
        np.fill_diagonal(g, 0.0)
        g = (g + g.T) / 2
        g.setflags(write=False)
        object.__setattr__(self, "gamma", g)
        ev = np.linalg.eigvalsh(self.sigma(0))
        if ev.min() <= 1e-10:
            raise ValueError(
                f"gamma is not conditionally negative definite (min eigenvalue of Sigma^(1) {ev.min():.3g})"
            )

    @property
    def d(self) -> int:
        return self.gamma.shape[0]

    def sigma(self, m: int) -> np.ndarray:
        return sigma_from_gamma(self.gamma, m)

    def _chol(self, m: int):
        key = ("chol", m)
        if key not in self._cache:
            s = self.sigma(m)
            cond = np.linalg.cond(s)
            if not np.isfinite(cond) or cond > 1e12:
                raise ValueError(f"Sigma^({m + 1}) is numerically singular (condition number {cond:.3g})")
            self._cache[key] = (np.linalg.cholesky(s), s)
        return self._cache[key]

    def exponent_measure_unit(self, **qmc) -> tuple[float, float]:
        """Lambda(E minus [0,1]^d) and its numerical error."""
        key = ("lambda1", tuple(sorted(qmc.items())))
        if key not in self._cache:
            total = 0.0
            err2 = 0.0
            for m in range(self.d):
                keep = [i for i in range(self.d) if i != m]
                upper = self.gamma[keep, m] / 2.0
                if self.d <= 3:
                    v, e = float(normal_cdf_small(upper[None, :], self.sigma(m))[0]), 0.0
                else:
                    v, e = mvn_cdf(upper, self.sigma(m), **qmc)
                total += float(v)
                err2 += float(e) ** 2
            self._cache[key] = (total, math.sqrt(err2))
        return self._cache[key]

    def exponent_function(self, z, **qmc) -> float:
        """Lambda(E minus [0, z]) for a positive vector z."""
        z = np.asarray(z, float)
        total = 0.0
        for m in range(self.d):
            keep = [i for i in range(self.d) if i != m]
            upper = np.log(z[keep] / z[m]) + self.gamma[keep, m] / 2.0
            if self.d <= 3:
                v = float(normal_cdf_small(upper[None, :], self.sigma(m))[0])
            else:
                v = float(mvn_cdf(upper, self.sigma(m), **qmc)[0])
            total += v / z[m]
        return total


def hr_log_exponent_density(model: HuslerReissModel, y, m: int = 0) -> np.ndarray:
    """Log exponent-measure density anchored at coordinate m (vectorized over rows)."""
    y = np.atleast_2d(np.asarray(y, float))
    d = model.d
    if y.shape[1] != d:
        raise ValueError(f"expected {d} coordinates")
    if np.any(y <= 0):
        raise ValueError("density defined for positive arguments")
    if not 0 <= m < d:
        raise IndexError("anchor out of range")
    chol, _ = model._chol(m)
    keep = [i for i in range(d) if i != m]
    ly = np.log(y)
    x = ly[:, keep] - ly[:, [m]] + model.gamma[keep, m] / 2.0
    sol = np.linalg.solve(chol, x.T)  # L^{-1} x
    quad = (sol * sol).sum(axis=0)
    logdet = 2 * np.log(np.diag(chol)).sum()
    logphi = -0.5 * quad - 0.5 * logdet - 0.5 * (d - 1) * math.log(2 * math.pi)
    return -2 * ly[:, m] - ly[:, keep].sum(axis=1) + logphi


def hr_exponent_density(model: HuslerReissModel, y, m: int = 0):
    y = np.asarray(y, float)
    out = np.exp(hr_log_exponent_density(model, y, m))
    return float(out[0]) if y.ndim == 1 else out


def _check_in_L(y: np.ndarray) -> None:
    if np.any(y <= 0) or np.any(y.max(axis=1) < 1.0):
        raise ValueError("point outside the support {y > 0, max(y) >= 1}")


def hr_pareto_density(model: HuslerReissModel, y, **qmc):
    """Density of the Husler-Reiss multivariate Pareto distribution on {max(y) >= 1}."""
    y = np.asarray(y, float)
    yy = np.atleast_2d(y)
    _check_in_L(yy)
    lam1, _ = model.exponent_measure_unit(**qmc)
    out = np.exp(hr_log_exponent_density(model, yy) - math.log(lam1))
    return float(out[0]) if y.ndim == 1 else out


@dataclass(frozen=True)
class ParetoSample:
    samples: np.ndarray
    acceptance_rate: float
    anchors: np.ndarray


MIN_ACCEPTANCE = 1e-3


def simulate_hr_pareto(model: HuslerReissModel, n: int, seed=None, return_info: bool = False):
    """Exact sampler for the Husler-Reiss Pareto distribution.

    An anchor m is drawn uniformly and W = exp(N - Gamma_{.m}/2) with N ~ N(0, Sigma^(m)),
    N_m = 0.  The draw is kept when W <= 1, i.e. when m is the largest coordinate;
    the output is P * W with P standard Pareto.
    """
    rng = np.random.default_rng(seed)
    d = model.d
    chols = [model._chol(m)[0] for m in range(d)]
    out = np.empty((0, d))
    anchors = np.empty(0, int)
    drawn = 0
    accepted = 0
    lam1 = model.exponent_measure_unit()[0]
    batch = max(64, int(1.3 * n * d / max(lam1, 1e-3)) + 16)
    while out.shape[0] < n:
        m = rng.integers(0, d, batch)
        w = np.ones((batch, d))
        for a in range(d):
            sel = np.flatnonzero(m == a)
            if not sel.size:
                continue
            keep = [i for i in range(d) if i != a]
            z = rng.standard_normal((sel.size, d - 1)) @ chols[a].T
            w[np.ix_(sel, keep)] = np.exp(z - model.gamma[keep, a] / 2.0)
        ok = np.all(w <= 1.0, axis=1)
        drawn += batch
        accepted += int(ok.sum())
        if drawn >= 10_000 and accepted / drawn < MIN_ACCEPTANCE:
            raise RuntimeError(f"acceptance rate {accepted / drawn:.2e} below {MIN_ACCEPTANCE}")
        p = 1.0 / (1.0 - rng.random(int(ok.sum())))
        out = np.vstack([out, w[ok] * p[:, None]])
        anchors = np.concatenate([anchors, m[ok]])
    samples = out[:n]
    if return_info:
        return ParetoSample(samples, accepted / drawn, anchors[:n])
    return samples


@functools.lru_cache(maxsize=4096)
def _chi_hr_integral(gamma: float) -> float:
    sg = math.sqrt(gamma)

    def inner(u):
        lo = max((gamma / 2.0 - u) / sg, -40.0)
        if lo >= 40.0:
            return 0.0
        return integrate.quad(lambda s: math.exp(-0.5 * s * s) / math.sqrt(2 * math.pi), lo, 40.0,
                              epsabs=1e-14, epsrel=1e-12, limit=200)[0]

    # the inner integral steps from 0 to 1 over a window of width ~sqrt(gamma) around gamma/2
    f = lambda u: math.exp(-u) * inner(u)
    cuts = sorted({0.0, max(0.0, gamma / 2 - 8 * sg), gamma / 2, gamma / 2 + 8 * sg})
    val = sum(integrate.quad(f, a, b, epsabs=1e-14, epsrel=1e-12, limit=200)[0] for a, b in zip(cuts, cuts[1:]))
    val += integrate.quad(f, cuts[-1], np.inf, epsabs=1e-14, epsrel=1e-12, limit=200)[0]
    return min(1.0, max(0.0, val))


def chi_oracle_hr(gamma_ij: float) -> float:
    """Bivariate Husler-Reiss chi by numerical integration of the exponent density
    over the joint exceedance region {y_1 > 1, y_2 > 1}."""
    g = float(gamma_ij)
    if g < 0:
        raise ValueError("gamma must be nonnegative")
    if g < 1e-12:
        return 1.0
    if not np.isfinite(g):
        return 0.0
    return _chi_hr_integral(round(g, 14))


def chi_hr_closed_form(gamma_ij) -> np.ndarray:
    """2 - 2 Phi(sqrt(Gamma)/2); cross-check for :func:`chi_oracle_hr`."""
    return 2.0 - 2.0 * ndtr(np.sqrt(np.asarray(gamma_ij, float)) / 2.0)


def gamma_from_chi(chi) -> np.ndarray:
    """Inverse of the closed form, used for initial values."""
    from scipy.special import ndtri

    chi = np.clip(np.asarray(chi, float), 1e-6, 1 - 1e-9)
    return (2.0 * ndtri(1.0 - chi / 2.0)) ** 2


def logistic_interior_mass(model: LogisticModel, margin: float) -> float:
    """Angular mass of [margin, 1 - margin] on the l1 simplex (d = 2)."""
    if model.d != 2:
        raise ValueError("defined for d = 2")
    f = lambda w: logistic_exponent_density(model, np.array([w, 1.0 - w]))
    return integrate.quad(f, margin, 1.0 - margin, epsabs=1e-12, limit=200)[0]

