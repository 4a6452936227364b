"""Reference estimators (2D-MUSIC, grid Lasso) and the deterministic CRB."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .array_model import SourceSet, UcaGeometry, uca_steering_derivatives, uca_steering_matrix
from .errors import DegenerateGeometryError, DomainError, NumericalError
from .recovery import DoaEstimate
from .virtual_manifold import AngularGrid, angles_to_freqs, build_constraint_grid


def one_degree_grid() -> AngularGrid:
    """360 x 90 grid: integer-degree azimuths in [-180, 180), elevations 1..90 deg."""
    return build_constraint_grid(360, 90)


@dataclass
class SpectrumMap:
    grid: AngularGrid
    values: np.ndarray  # N_phi x N_theta

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise DomainError(f"values shape {self.values.shape} does not match grid {self.grid.shape}")
        if np.any(self.values < 0):
            raise DomainError("spectrum values must be nonnegative")

    def to_csv(self, path) -> None:
        """Rows are elevations, columns azimuths (both in radians)."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["phi\\theta"] + [repr(float(t)) for t in self.grid.thetas])
            for phi, row in zip(self.grid.phis, self.values):
                w.writerow([repr(float(phi))] + [repr(float(v)) for v in row])


@dataclass
class CrbResult:
    per_source: list  # K arrays of shape (2, 2), order (theta, phi)
    rmsae_bound: float
    matrix: np.ndarray  # full 2K x 2K bound, interleaved (theta_1, phi_1, theta_2, ...)


# -- peak picking ----------------------------------------------------------

def local_maxima(values: np.ndarray, k: int):
    """Indices (i_phi, i_theta) of the k largest 8-neighborhood local maxima.

    Azimuth wraps around; elevation does not. Plateaus are not peaks.
    """
    if k <= 0:
        return []
    v = values
    padded = np.pad(v, ((1, 1), (0, 0)), constant_values=-np.inf)
    padded = np.concatenate([padded[:, -1:], padded, padded[:, :1]], axis=1)
    core = padded[1:-1, 1:-1]
    is_max = np.ones_like(v, dtype=bool)
    strict = np.zeros_like(v, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            nb = padded[1 + di:padded.shape[0] - 1 + di, 1 + dj:padded.shape[1] - 1 + dj]
            is_max &= core >= nb
            strict |= (core > nb) & np.isfinite(nb)
    is_max &= strict
    cand = np.argwhere(is_max)
    if cand.size == 0:
        return []
    order = np.lexsort((cand[:, 1], cand[:, 0], -v[cand[:, 0], cand[:, 1]]))
    return [tuple(int(x) for x in cand[i]) for i in order[:k]]


def _parabolic_offset(lm, l0, lp):
    denom = lm - 2 * l0 + lp
    if not np.isfinite(denom) or denom >= 0:
        return 0.0
    return float(np.clip(0.5 * (lm - lp) / denom, -0.5, 0.5))


def _refine(values, grid: AngularGrid, i, j):
    """One parabolic step per axis on the log-spectrum around peak (i, j)."""
    logv = np.log(np.maximum(values, np.finfo(float).tiny))
    nt, npf = grid.thetas.size, grid.phis.size
    dth = grid.thetas[1] - grid.thetas[0] if nt > 1 else 0.0
    dph = grid.phis[1] - grid.phis[0] if npf > 1 else 0.0
    off_t = _parabolic_offset(logv[i, (j - 1) % nt], logv[i, j], logv[i, (j + 1) % nt])
    off_p = 0.0
    if 0 < i < npf - 1:
        off_p = _parabolic_offset(logv[i - 1, j], logv[i, j], logv[i + 1, j])
    theta = (grid.thetas[j] + off_t * dth + np.pi) % (2 * np.pi) - np.pi
    phi = float(np.clip(grid.phis[i] + off_p * dph, 0.0, np.pi / 2))
    return float(theta), phi


def _estimate(pairs, flags=None) -> DoaEstimate:
    est = DoaEstimate()
    for t, p in pairs:
        est.pairs.append((float(t), float(p)))
        u, v = angles_to_freqs(t, p)
        est.freqs.append((float(u), float(v)))
        est.condition_flags.append([] if flags is None else list(flags))
    return est


# -- MUSIC -----------------------------------------------------------------

def music_2d(snapshots, geom: UcaGeometry, k: int, grid: AngularGrid | None = None, refine: bool = True):
    """Grid-search MUSIC over (theta, phi); returns (estimate, spectrum)."""
    Y = np.asarray(snapshots, dtype=complex)
    if Y.ndim == 1:
        Y = Y[:, None]
    n, L = Y.shape
    if n != geom.n_sensors or L < 1:
        raise DomainError(f"snapshots must be {geom.n_sensors} x L with L >= 1")
    if k < 0 or k >= n:
        raise DomainError(f"k must satisfy 0 <= k < N={n}")
    grid = one_degree_grid() if grid is None else grid
    R = Y @ Y.conj().T / L
    _, U = np.linalg.eigh(0.5 * (R + R.conj().T))
    En = U[:, : n - k]
    A = steering_dictionary(geom, grid)
    denom = np.sum(np.abs(En.conj().T @ A) ** 2, axis=0)
    P = (1.0 / np.maximum(denom, np.finfo(float).tiny)).reshape(grid.shape)
    spectrum = SpectrumMap(grid, P)
    peaks = local_maxima(P, k)
    pairs = [_refine(P, grid, i, j) if refine else (grid.thetas[j], grid.phis[i]) for i, j in peaks]
    return _estimate(pairs), spectrum


# -- Lasso -----------------------------------------------------------------

@lru_cache(maxsize=8)
def _dictionary(geom: UcaGeometry, grid: AngularGrid):
    pts = grid.points
    A = uca_steering_matrix(geom, pts[:, 0], pts[:, 1])
    A.setflags(write=False)
    return A


def steering_dictionary(geom: UcaGeometry, grid: AngularGrid) -> np.ndarray:
    """N x G UCA steering matrix over the grid, cached per (geometry, grid)."""
    return _dictionary(geom, grid)


def default_lasso_lambda(noise_var: float, grid_size: int, y=None) -> float:
    """sigma * sqrt(2 ln G) for unit-norm columns, floored for noiseless data."""
    lam = math.sqrt(max(noise_var, 0.0)) * math.sqrt(2.0 * math.log(grid_size))
    if y is not None:
        lam = max(lam, 1e-3 * float(np.linalg.norm(y)))
    return max(lam, 1e-12)


def soft_threshold(z, tau):
    mag = np.abs(z)
    return z * np.maximum(1.0 - tau / np.where(mag > 0, mag, 1.0), 0.0)


def lasso_objective(x, Phi, y, lam) -> float:
    r = y - Phi @ x
    return float(0.5 * np.vdot(r, r).real + lam * np.sum(np.abs(x)))


def fista(Phi, y, lam, max_iters=500, tol=1e-8):
    """Accelerated proximal gradient for 0.5|y - Phi x|^2 + lam |x|_1.

    Momentum is reset whenever the objective would increase, so the returned
    objective history is non-increasing. Returns (x, history).
    """
    if not lam > 0:
        raise DomainError("lasso_lambda must be positive")
    x = np.zeros(Phi.shape[1], dtype=complex)
    f = lasso_objective(x, Phi, y, lam)
    history = [f]
    if lam >= np.max(np.abs(Phi.conj().T @ y)):
        return x, history  # zero satisfies the optimality conditions
    L = float(np.linalg.norm(Phi, 2) ** 2)
    step = 1.0 / L
    z, t = x, 1.0
    for _ in range(max_iters):
        x_new = soft_threshold(z - step * (Phi.conj().T @ (Phi @ z - y)), step * lam)
        f_new = lasso_objective(x_new, Phi, y, lam)
        if f_new > f:
            # restart from a plain proximal-gradient step at x
            x_new = soft_threshold(x - step * (Phi.conj().T @ (Phi @ x - y)), step * lam)
            f_new = lasso_objective(x_new, Phi, y, lam)
            t = 1.0
            z = x_new
        else:
            t_new = 0.5 * (1 + math.sqrt(1 + 4 * t * t))
            z = x_new + ((t - 1) / t_new) * (x_new - x)
            t = t_new
        done = abs(f - f_new) <= tol * max(abs(f), 1e-30)
        x, f = x_new, f_new
        history.append(f)
        if done:
            break
    return x, history


def lasso_2d(y, geom: UcaGeometry, grid: AngularGrid | None = None, lasso_lambda: float | None = None,
             max_iters: int = 500, tol: float = 1e-8, k: int = 1, noise_var: float = 0.0):
    """Grid-based sparse recovery; returns (estimate, |x| map).

    Estimates are the grid nodes of the k largest local maxima of |x|.
    """
    y = np.asarray(y, dtype=complex)
    grid = one_degree_grid() if grid is None else grid
    Phi = steering_dictionary(geom, grid) / math.sqrt(geom.n_sensors)
    lam = default_lasso_lambda(noise_var, grid.size, y) if lasso_lambda is None else lasso_lambda
    x, history = fista(Phi, y, lam, max_iters, tol)
    h = np.asarray(history)
    if np.any(np.diff(h) > 1e-12 * np.maximum(np.abs(h[:-1]), 1.0)):
        raise NumericalError("Lasso objective increased despite momentum restart")
    mag = np.abs(x).reshape(grid.shape)
    peaks = local_maxima(mag, k)
    pairs = [(grid.thetas[j], grid.phis[i]) for i, j in peaks]
    return _estimate(pairs), SpectrumMap(grid, mag)


# -- Cramer-Rao bound --------------------------------------------------------

def crb_2d(geom: UcaGeometry, sources: SourceSet, noise_var: float) -> CrbResult:
    """Deterministic single-snapshot CRB for (theta_k, phi_k) with unknown amplitudes."""
    if not noise_var > 0:
        raise DomainError("noise_var must be positive")
    K = sources.k
    A = np.empty((geom.n_sensors, K), dtype=complex)
    D = np.empty((geom.n_sensors, 2 * K), dtype=complex)
    for k, (th, ph, s) in enumerate(zip(sources.thetas, sources.phis, sources.amplitudes)):
        a, da_t, da_p = uca_steering_derivatives(geom, th, ph)
        A[:, k] = a
        D[:, 2 * k] = da_t * s
        D[:, 2 * k + 1] = da_p * s
    gram = A.conj().T @ A
    if np.linalg.cond(gram) > 1e12:
        raise DegenerateGeometryError("steering vectors are (nearly) linearly dependent")
    proj = np.eye(geom.n_sensors) - A @ np.linalg.solve(gram, A.conj().T)
    fim = np.real(D.conj().T @ proj @ D)
    fim = 0.5 * (fim + fim.T)
    if np.linalg.cond(fim) > 1e12:
        raise DegenerateGeometryError("Fisher information is singular for this geometry")
    C = 0.5 * noise_var * np.linalg.inv(fim)
    C = 0.5 * (C + C.T)
    blocks = [C[2 * k:2 * k + 2, 2 * k:2 * k + 2].copy() for k in range(K)]
    total = sum(b[0, 0] * math.cos(p) ** 2 + b[1, 1] for b, p in zip(blocks, sources.phis))
    return CrbResult(blocks, math.sqrt(total / K), C)
