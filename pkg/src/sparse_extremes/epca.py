"""Principal component analysis of extremal angles."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .angular import AngularCloud
from .ingest import norm_of


@dataclass(frozen=True)
class ExtremalPCA:
    sigma: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns are eigenvectors
    norm: str

    @property
    def d(self) -> int:
        return self.sigma.shape[0]

    def basis(self, p: int) -> np.ndarray:
        return self.eigenvectors[:, :p]

    def explained(self) -> np.ndarray:
        """Cumulative share of trace(sigma) captured by the leading components."""
        return np.cumsum(self.eigenvalues) / np.trace(self.sigma)


def _sign_convention(vecs: np.ndarray) -> np.ndarray:
    vecs = vecs.copy()
    for j in range(vecs.shape[1]):
        nz = np.flatnonzero(np.abs(vecs[:, j]) > 1e-12)
        if nz.size and vecs[nz[0], j] < 0:
            vecs[:, j] = -vecs[:, j]
    return vecs


def estimate_sigma(cloud: AngularCloud) -> ExtremalPCA:
    """Weighted second-moment matrix of the angles and its eigendecomposition."""
    a = cloud.angles
    sigma = (a * cloud.weights[:, None]).T @ a
    sigma = (sigma + sigma.T) / 2
    vals, vecs = np.linalg.eigh(sigma)
    order = np.argsort(vals)[::-1]
    vals = np.clip(vals[order], 0.0, None)
    vecs = _sign_convention(vecs[:, order])
    return ExtremalPCA(sigma, vals, vecs, cloud.norm)


def pca_loss(pca: ExtremalPCA, p: int) -> float:
    """Mean squared distance between the angles and their projection on the first p components.

    Equals trace(sigma) minus the p leading eigenvalues, i.e. 1 - sum of them for l2 angles.
    """
    if not 1 <= p <= pca.d:
        raise ValueError(f"p must lie in 1..{pca.d}")
    return float(max(0.0, np.trace(pca.sigma) - pca.eigenvalues[:p].sum()))


def _check_orthonormal(basis: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    basis = np.atleast_2d(np.asarray(basis, float))
    if basis.shape[0] < basis.shape[1]:
        basis = basis.T
    gram = basis.T @ basis
    if not np.allclose(gram, np.eye(basis.shape[1]), atol=tol):
        raise ValueError("basis vectors are not orthonormal")
    return basis


def subspace_distance(
    basis_a,
    basis_b,
    *,
    n_starts: int = 50,
    seed: int = 0,
    max_iter: int = 500,
    return_bound: bool = False,
):
    """sup over nonnegative unit vectors theta of ||P_a theta - P_b theta||_2.

    Bases are given as d x p matrices with orthonormal columns.  The supremum is
    searched by projected gradient ascent from one-hot and random starts; with
    ``return_bound`` the unrestricted operator norm is returned as well.
    """
    a = _check_orthonormal(basis_a)
    b = _check_orthonormal(basis_b)
    if a.shape[0] != b.shape[0]:
        raise ValueError("bases live in different dimensions")
    d = a.shape[0]
    diff = a @ a.T - b @ b.T
    quad = diff @ diff  # ||diff theta||^2 = theta' quad theta
    bound = float(np.sqrt(max(0.0, np.linalg.eigvalsh(quad).max())))
    rng = np.random.default_rng(seed)
    starts = [np.eye(d)[i] for i in range(d)]
    starts += [np.abs(rng.standard_normal(d)) for _ in range(n_starts)]
    top = np.linalg.eigh(quad)[1][:, -1]
    starts += [np.clip(top, 0, None), np.clip(-top, 0, None)]
    best = 0.0
    step = 0.5 / max(bound**2, 1e-12)
    for th in starts:
        nrm = np.linalg.norm(th)
        if nrm == 0:
            continue
        th = th / nrm
        val = th @ quad @ th
        for _ in range(max_iter):
            nxt = np.clip(th + step * 2 * quad @ th, 0, None)
            nn = np.linalg.norm(nxt)
            if nn == 0:
                break
            nxt /= nn
            nval = nxt @ quad @ nxt
            if nval <= val + 1e-15:
                if nval > val:
                    th, val = nxt, nval
                break
            th, val = nxt, nval
        best = max(best, float(val))
    value = float(min(np.sqrt(best), bound))
    return (value, bound) if return_bound else value


def bijection(x, floor: float) -> np.ndarray:
    """Smooth positive map: identity above ``floor``, floor * exp(x/floor - 1) below."""
    x = np.asarray(x, float)
    return np.where(x >= floor, x, floor * np.exp(np.minimum(x, floor) / floor - 1.0))


def bijection_inverse(y, floor: float) -> np.ndarray:
    y = np.asarray(y, float)
    if np.any(y <= 0):
        raise ValueError("inverse bijection needs positive input")
    return np.where(y >= floor, y, floor * (1.0 + np.log(np.minimum(y, floor) / floor)))


def reconstruct(pca: ExtremalPCA, rows, p: int, bijection_floor: float = 1.0, renormalize: bool = False) -> np.ndarray:
    """Project t^{-1}(rows) onto the leading p components and map back with t.

    With ``renormalize`` the output rows are rescaled to unit norm in the
    PCA's norm.  Output is strictly positive.
    """
    if not 1 <= p <= pca.d:
        raise ValueError(f"p must lie in 1..{pca.d}")
    if bijection_floor <= 0:
        raise ValueError("bijection_floor must be positive")
    rows = np.atleast_2d(np.asarray(rows, float))
    v = pca.basis(p)
    w = bijection_inverse(rows, bijection_floor)
    out = bijection((w @ v) @ v.T, bijection_floor)
    if renormalize:
        out = out / norm_of(out, pca.norm)[:, None]
    return out
