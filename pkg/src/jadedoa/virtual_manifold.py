"""Virtual uniform rectangular array (URA) manifold and the UCA -> URA map.

The virtual array lives in the same plane as the UCA, so its response depends
on the direction cosines ``u = sin(phi) cos(theta)`` and
``v = sin(phi) sin(theta)``. Steering vectors are ordered with the x index
running fastest: ``index = m_y * M_x + m_x`` (0-based), i.e.
``b = kron(b_y, b_x)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .array_model import UcaGeometry, check_angles, uca_steering_matrix
from .errors import DomainError, InfeasibleFrequencyError

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class UraConfig:
    m_x: int = 3
    m_y: int = 3
    d_x_wl: float = 0.5
    d_y_wl: float = 0.5

    def __post_init__(self):
        if self.m_x < 1 or self.m_y < 1:
            raise DomainError("URA dimensions must be positive")
        for d in (self.d_x_wl, self.d_y_wl):
            if not 0 < d <= 0.5:
                raise DomainError(f"URA spacing must lie in (0, 0.5] wavelengths, got {d}")

    @property
    def m(self) -> int:
        return self.m_x * self.m_y


@dataclass(frozen=True)
class AngularGrid:
    """Cartesian product grid, flattened phi-major (theta varies fastest)."""

    thetas: np.ndarray
    phis: np.ndarray

    def __post_init__(self):
        thetas = np.asarray(self.thetas, dtype=float)
        phis = np.asarray(self.phis, dtype=float)
        if np.any(np.diff(thetas) <= 0) or np.any(np.diff(phis) <= 0):
            raise DomainError("grid axes must be strictly increasing")
        if thetas.size and (thetas[0] < -np.pi or thetas[-1] >= np.pi):
            raise DomainError("grid azimuths must lie in [-pi, pi)")
        check_angles(0.0, phis)
        object.__setattr__(self, "thetas", thetas)
        object.__setattr__(self, "phis", phis)

    @property
    def shape(self):
        return (self.phis.size, self.thetas.size)

    @property
    def size(self) -> int:
        return self.phis.size * self.thetas.size

    @property
    def points(self) -> np.ndarray:
        """(G, 2) array of (theta, phi) rows."""
        tt, pp = np.meshgrid(self.thetas, self.phis)
        return np.column_stack([tt.ravel(), pp.ravel()])

    # grids are hashable so steering dictionaries can be cached per grid
    def __hash__(self):
        return hash((self.thetas.tobytes(), self.phis.tobytes()))

    def __eq__(self, other):
        return (isinstance(other, AngularGrid) and np.array_equal(self.thetas, other.thetas)
                and np.array_equal(self.phis, other.phis))


def build_constraint_grid(n_theta: int, n_phi: int) -> AngularGrid:
    """Uniform azimuth grid on [-pi, pi) and elevation grid on (0, pi/2]."""
    if n_theta < 2 or n_phi < 2:
        raise DomainError("grid needs at least 2 points per axis")
    thetas = -np.pi + TWO_PI * np.arange(n_theta) / n_theta
    phis = (np.pi / 2) * (np.arange(n_phi) + 1) / n_phi
    return AngularGrid(thetas, phis)


def angles_to_freqs(theta, phi):
    s = np.sin(phi)
    return s * np.cos(theta), s * np.sin(theta)


def freqs_to_angles(u, v):
    """Inverse of :func:`angles_to_freqs`.

    Raises :class:`InfeasibleFrequencyError` when ``u**2 + v**2 > 1``. At
    ``u = v = 0`` the azimuth is undefined and atan2 returns 0.
    """
    rho2 = np.asarray(u, dtype=float) ** 2 + np.asarray(v, dtype=float) ** 2
    if np.any(rho2 > 1.0 + 1e-12):
        raise InfeasibleFrequencyError(f"u^2 + v^2 = {np.max(rho2):.6g} exceeds 1")
    phi = np.arcsin(np.sqrt(np.minimum(rho2, 1.0)))
    theta = np.arctan2(v, u)
    theta = np.where(theta >= np.pi, theta - TWO_PI, theta)
    if np.ndim(theta) == 0:
        return float(theta), float(phi)
    return theta, phi


def ula_vector(n: int, spacing_wl: float, freq) -> np.ndarray:
    return np.exp(1j * TWO_PI * spacing_wl * np.arange(n) * freq)


def ura_steering_uv(cfg: UraConfig, u: float, v: float) -> np.ndarray:
    return np.kron(ula_vector(cfg.m_y, cfg.d_y_wl, v), ula_vector(cfg.m_x, cfg.d_x_wl, u))


def ura_steering(cfg: UraConfig, theta: float, phi: float) -> np.ndarray:
    check_angles(theta, phi)
    return ura_steering_uv(cfg, *angles_to_freqs(theta, phi))


def ura_steering_matrix(cfg: UraConfig, thetas, phis) -> np.ndarray:
    """M x G matrix of virtual steering vectors (vectorized :func:`ura_steering`)."""
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    phis = np.atleast_1d(np.asarray(phis, dtype=float))
    check_angles(thetas, phis)
    u, v = angles_to_freqs(thetas, phis)
    mx = np.tile(np.arange(cfg.m_x), cfg.m_y)[:, None]
    my = np.repeat(np.arange(cfg.m_y), cfg.m_x)[:, None]
    return np.exp(1j * TWO_PI * (cfg.d_x_wl * mx * u[None, :] + cfg.d_y_wl * my * v[None, :]))


def grid_manifolds(geom: UcaGeometry, cfg: UraConfig, grid: AngularGrid):
    """Stacked steering matrices (A: N x G, B: M x G) over the grid points."""
    pts = grid.points
    return uca_steering_matrix(geom, pts[:, 0], pts[:, 1]), ura_steering_matrix(cfg, pts[:, 0], pts[:, 1])


def init_transform(geom: UcaGeometry, cfg: UraConfig, grid: AngularGrid, ridge: float = 1e-3) -> np.ndarray:
    """Ridge least-squares fit T0 = B A^H (A A^H + ridge I)^-1 over the grid."""
    if not ridge > 0:
        raise DomainError("ridge must be positive")
    A, B = grid_manifolds(geom, cfg, grid)
    gram = A @ A.conj().T + ridge * np.eye(geom.n_sensors)
    rhs = B @ A.conj().T
    # T gram = rhs  <=>  gram T^H = rhs^H  (gram is Hermitian)
    return np.linalg.solve(gram, rhs.conj().T).conj().T
