"""Two-level (block Toeplitz with Toeplitz blocks) Hermitian matrices.

A matrix of size M = M_x * M_y is indexed by pairs (q_y, q_x) flattened as
``q_y * M_x + q_x``, the same ordering as the virtual URA steering vectors.
It is two-level Toeplitz when entry ((q_y, q_x), (r_y, r_x)) depends only on
the lag (q_y - r_y, q_x - r_x). Coefficients are stored in a
(2 M_y - 1) x (2 M_x - 1) array with lag (k_y, k_x) at
``[k_y + M_y - 1, k_x + M_x - 1]``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError


@dataclass
class MltParams:
    coeffs: np.ndarray
    dims: tuple  # (M_x, M_y)

    def __post_init__(self):
        mx, my = self.dims
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.coeffs.shape != (2 * my - 1, 2 * mx - 1):
            raise DomainError(f"coeffs shape {self.coeffs.shape} does not match dims {self.dims}")

    def coeff(self, k_y: int, k_x: int) -> complex:
        mx, my = self.dims
        return self.coeffs[k_y + my - 1, k_x + mx - 1]

    def is_hermitian(self, tol=1e-12) -> bool:
        c = self.coeffs
        return bool(np.allclose(c[::-1, ::-1], c.conj(), atol=tol))


@lru_cache(maxsize=None)
def _lag_index(mx: int, my: int):
    """Flat coefficient index of every matrix entry, and per-lag entry counts."""
    qx = np.tile(np.arange(mx), my)
    qy = np.repeat(np.arange(my), mx)
    ky = qy[:, None] - qy[None, :] + my - 1
    kx = qx[:, None] - qx[None, :] + mx - 1
    idx = (ky * (2 * mx - 1) + kx).ravel()
    counts = np.bincount(idx, minlength=(2 * my - 1) * (2 * mx - 1)).astype(float)
    idx.setflags(write=False)
    counts.setflags(write=False)
    return idx, counts


def _check_square(Z, dims):
    mx, my = dims
    m = mx * my
    if Z.shape != (m, m):
        raise DomainError(f"expected a {m}x{m} matrix for dims {dims}, got {Z.shape}")


def mlt_build(params: MltParams) -> np.ndarray:
    mx, my = params.dims
    idx, _ = _lag_index(mx, my)
    m = mx * my
    return params.coeffs.ravel()[idx].reshape(m, m)


def mlt_adjoint(Z: np.ndarray, dims) -> MltParams:
    """Adjoint of :func:`mlt_build`: per-lag sums of the entries of Z.

    Satisfies <mlt_build(U), Z> = <U, mlt_adjoint(Z)> for the complex Frobenius
    inner product <X, Y> = sum(conj(X) * Y).
    """
    Z = np.asarray(Z, dtype=complex)
    _check_square(Z, dims)
    mx, my = dims
    idx, counts = _lag_index(mx, my)
    flat = Z.ravel()
    sums = np.bincount(idx, weights=flat.real, minlength=counts.size) \
        + 1j * np.bincount(idx, weights=flat.imag, minlength=counts.size)
    return MltParams(sums.reshape(2 * my - 1, 2 * mx - 1), (mx, my))


def mlt_project(Z: np.ndarray, dims) -> MltParams:
    """Orthogonal projection of the Hermitian part of Z onto two-level Toeplitz matrices."""
    Z = np.asarray(Z, dtype=complex)
    _check_square(Z, dims)
    mx, my = dims
    _, counts = _lag_index(mx, my)
    zh = 0.5 * (Z + Z.conj().T)
    sums = mlt_adjoint(zh, dims).coeffs
    return MltParams(sums / counts.reshape(sums.shape), (mx, my))


def mlt_residual(Z: np.ndarray, dims) -> np.ndarray:
    """Z minus its projection; zero exactly when Z is Hermitian two-level Toeplitz.

    Equals (Z_h - P(Z_h)) + (Z - Z^H)/2, which simplifies to Z - P(Z_h).
    """
    Z = np.asarray(Z, dtype=complex)
    return Z - mlt_build(mlt_project(Z, dims))


def random_mlt(dims, rng: np.random.Generator) -> MltParams:
    """Random Hermitian-symmetric coefficients (for tests and diagnostics)."""
    mx, my = dims
    c = rng.standard_normal((2 * my - 1, 2 * mx - 1)) + 1j * rng.standard_normal((2 * my - 1, 2 * mx - 1))
    c = 0.5 * (c + c[::-1, ::-1].conj())
    return MltParams(c, dims)
