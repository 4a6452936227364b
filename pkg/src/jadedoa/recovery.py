"""Direction recovery from the solver factor via 2D shift invariance (ESPRIT)."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .array_model import UcaGeometry
from .errors import DomainError
from .mlt import MltParams, mlt_build, mlt_project
from .solver import SolverConfig, SolverReport, ialm_solve
from .virtual_manifold import UraConfig, freqs_to_angles

PAIRING_RHO = 0.37 + 0.21j
EIG_SEPARATION_MIN = 1e-10
ZENITH_TOL = 1e-6


@dataclass
class DoaEstimate:
    pairs: list = field(default_factory=list)  # [(theta, phi)] in radians
    freqs: list = field(default_factory=list)  # [(u, v)]
    condition_flags: list = field(default_factory=list)  # one list of tags per source

    @property
    def k(self) -> int:
        return len(self.pairs)

    @property
    def angles(self) -> np.ndarray:
        return np.asarray(self.pairs, dtype=float).reshape(-1, 2)

    def to_dict(self) -> dict:
        return {
            "theta": [p[0] for p in self.pairs],
            "phi": [p[1] for p in self.pairs],
            "theta_deg": [math.degrees(p[0]) for p in self.pairs],
            "phi_deg": [math.degrees(p[1]) for p in self.pairs],
            "u": [f[0] for f in self.freqs],
            "v": [f[1] for f in self.freqs],
            "flags": [list(f) for f in self.condition_flags],
        }


def estimate_from_freqs(u, v, extra_flags=None) -> DoaEstimate:
    """Clip (u, v) into the unit disc where needed and map to angles."""
    est = DoaEstimate()
    for i, (ui, vi) in enumerate(zip(np.atleast_1d(u), np.atleast_1d(v))):
        flags = list(extra_flags[i]) if extra_flags else []
        ui, vi = float(ui), float(vi)
        rho = math.hypot(ui, vi)
        if rho > 1.0:
            ui, vi = ui / rho, vi / rho
            flags.append("infeasible_frequency_clipped")
        if abs(ui) < ZENITH_TOL and abs(vi) < ZENITH_TOL:
            flags.append("zenith_degenerate")
        theta, phi = freqs_to_angles(ui, vi)
        est.pairs.append((theta, phi))
        est.freqs.append((ui, vi))
        est.condition_flags.append(flags)
    return est


def reconstruct_mlt(W_B: np.ndarray, ura: UraConfig) -> MltParams:
    """Project the Gram block W_B^T conj(W_B) onto two-level Toeplitz structure."""
    W_B = np.asarray(W_B, dtype=complex)
    if W_B.ndim != 2 or W_B.shape[1] != ura.m:
        raise DomainError(f"W_B must have {ura.m} columns, got shape {W_B.shape}")
    return mlt_project(W_B.T @ W_B.conj(), (ura.m_x, ura.m_y))


def _selection(ura: UraConfig, axis: str):
    mx_idx = np.tile(np.arange(ura.m_x), ura.m_y)
    my_idx = np.repeat(np.arange(ura.m_y), ura.m_x)
    if axis == "x":
        return np.flatnonzero(mx_idx < ura.m_x - 1), np.flatnonzero(mx_idx > 0)
    return np.flatnonzero(my_idx < ura.m_y - 1), np.flatnonzero(my_idx > 0)


def _shift_operator(Es, sel):
    lo, hi = sel
    X1, X2 = Es[lo], Es[hi]
    rank = np.linalg.matrix_rank(X1)
    psi = np.linalg.lstsq(X1, X2, rcond=None)[0]
    return psi, rank < Es.shape[1]


def esprit_2d(params: MltParams, k: int, ura: UraConfig) -> DoaEstimate:
    """Paired (theta, phi) estimates from a two-level Toeplitz covariance.

    Shift operators along x and y are estimated from the k principal
    eigenvectors and diagonalized together through the fixed combination
    ``Psi_x + rho Psi_y``.
    """
    if k < 0:
        raise DomainError("k must be nonnegative")
    if k == 0:
        return DoaEstimate()
    kmax = min((ura.m_x - 1) * ura.m_y, ura.m_x * (ura.m_y - 1))
    if k > kmax:
        raise DomainError(f"k={k} exceeds the shift-invariance limit {kmax} for a {ura.m_x}x{ura.m_y} array")
    if params.dims != (ura.m_x, ura.m_y):
        raise DomainError("params dims do not match the URA")
    Z = mlt_build(params)
    w, U = np.linalg.eigh(0.5 * (Z + Z.conj().T))
    Es = U[:, np.argsort(w)[::-1][:k]]
    psi_x, def_x = _shift_operator(Es, _selection(ura, "x"))
    psi_y, def_y = _shift_operator(Es, _selection(ura, "y"))

    rho = PAIRING_RHO
    lam, Q = np.linalg.eig(psi_x + rho * psi_y)
    if k > 1 and _min_separation(lam) < EIG_SEPARATION_MIN:
        lam, Q = np.linalg.eig(psi_x + np.conj(rho) * psi_y)
    try:
        Qinv = np.linalg.inv(Q)
    except np.linalg.LinAlgError:
        Qinv = np.linalg.pinv(Q)
    lx = np.diag(Qinv @ psi_x @ Q)
    ly = np.diag(Qinv @ psi_y @ Q)
    u = np.angle(lx) / (2 * np.pi * ura.d_x_wl)
    v = np.angle(ly) / (2 * np.pi * ura.d_y_wl)
    flags = [["rank_deficient"] if (def_x or def_y) else [] for _ in range(k)]
    return estimate_from_freqs(u, v, flags)


def _min_separation(lam):
    d = np.abs(lam[:, None] - lam[None, :])
    d[np.diag_indices_from(d)] = np.inf
    return float(d.min())


def estimate_jade(y, geom: UcaGeometry, ura: UraConfig, cfg: SolverConfig, k: int):
    """Full pipeline: iALM solve, Gram reconstruction, ESPRIT. Returns (estimate, report)."""
    if k < 0:
        raise DomainError("k must be nonnegative")
    state, report = ialm_solve(y, geom, ura, cfg, n_sources=max(k, 1))
    if k == 0:
        return DoaEstimate(), report
    est = esprit_2d(reconstruct_mlt(state.W_B, ura), k, ura)
    if np.linalg.norm(state.w_s) < 1e-12:
        for f in est.condition_flags:
            f.append("zero_signal")
    return est, report
