"""Joint transformation / atomic-norm estimation solved by an inexact ALM.

Variables
---------
T      : M x N transformation from UCA to virtual URA data.
W_B    : p x M factor; the virtual signal is ``x_v = W_B.T @ w_s`` and the
         lifted Gram block is ``W_B.T @ W_B.conj()`` (M x M).
w_s    : p-vector completing the factor ``W = [W_B.T; w_s^H]`` so that
         ``W W^H = [[Gram, x_v], [x_v^H, |w_s|^2]]``.
E      : G x M complex slacks for the manifold constraints, kept in the
         disc ``|e| <= eps``.

Equality constraints (stacked into A(z), realified):

* manifold:  ``[T a_g]_m - b_{g,m} - e_{g,m} = 0`` for every grid point g,
* structure: ``mlt_residual(W_B.T @ W_B.conj()) = 0``.

Gradients follow the realified convention: for a real function f of a complex
array Z, ``grad[i] = df/dRe(Z[i]) + 1j * df/dIm(Z[i])``.
"""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .array_model import UcaGeometry
from .errors import DomainError, NumericalError
from .mlt import mlt_build, mlt_project, mlt_residual
from .virtual_manifold import AngularGrid, UraConfig, build_constraint_grid, grid_manifolds, init_transform

ARMIJO_C = 1e-4
MAX_HALVINGS = 50


def _default_grid():
    return build_constraint_grid(24, 7)


@dataclass(frozen=True)
class SolverConfig:
    lambda_t: float = 0.1
    lambda_x: float = 0.5
    eps: float = 0.1
    rank_p: int | None = None  # None -> K + 1
    beta0: float = 1.0
    beta_growth: float = 2.0
    beta_trigger: float = 0.9
    tol_feas: float = 1e-4
    tol_obj: float = 1e-6
    max_outer: int = 200
    bcd_sweeps: int = 3
    w_grad_steps: int = 10
    grid: AngularGrid = field(default_factory=_default_grid)
    ridge_init: float = 1e-3
    beta_max: float = 1e8

    def __post_init__(self):
        if not (self.lambda_t > 0 and self.lambda_x > 0):
            raise DomainError("lambda_t and lambda_x must be positive")
        if not self.eps >= 0:
            raise DomainError("eps must be nonnegative")
        if self.rank_p is not None and self.rank_p < 1:
            raise DomainError("rank_p must be at least 1")
        if not (self.beta0 > 0 and self.beta_growth > 1 and 0 < self.beta_trigger < 1):
            raise DomainError("need beta0 > 0, beta_growth > 1, 0 < beta_trigger < 1")
        if self.beta_max < self.beta0:
            raise DomainError("beta_max must be at least beta0")
        if self.max_outer < 0 or self.bcd_sweeps < 1 or self.w_grad_steps < 1:
            raise DomainError("iteration counts must be positive (max_outer may be 0)")
        if not self.ridge_init > 0:
            raise DomainError("ridge_init must be positive")

    def rank_for(self, n_sources: int) -> int:
        return self.rank_p if self.rank_p is not None else n_sources + 1


@dataclass
class SolverState:
    T: np.ndarray
    W_B: np.ndarray
    w_s: np.ndarray
    E: np.ndarray
    mu_manifold: np.ndarray
    mu_struct: np.ndarray
    beta: float

    @property
    def x_v(self) -> np.ndarray:
        return self.W_B.T @ self.w_s

    @property
    def gram(self) -> np.ndarray:
        return self.W_B.T @ self.W_B.conj()

    def copy(self) -> "SolverState":
        return SolverState(self.T.copy(), self.W_B.copy(), self.w_s.copy(), self.E.copy(),
                           self.mu_manifold.copy(), self.mu_struct.copy(), float(self.beta))

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in
                   (self.T, self.W_B, self.w_s, self.E, self.mu_manifold, self.mu_struct)) \
            and math.isfinite(self.beta)


@dataclass
class SolverReport:
    obj_history: list = field(default_factory=list)
    feas_history: list = field(default_factory=list)
    status: str = "max_iterations"
    outer_iters: int = 0
    wall_time_s: float = 0.0
    beta_history: list = field(default_factory=list)
    line_search_failures: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class JadeProblem:
    """Data and grid matrices shared by all block updates of one solve."""

    y: np.ndarray
    geometry: UcaGeometry
    ura: UraConfig
    config: SolverConfig
    A: np.ndarray  # N x G UCA steering over the constraint grid
    B: np.ndarray  # M x G URA steering over the constraint grid
    AAh: np.ndarray

    @classmethod
    def build(cls, y, geom: UcaGeometry, ura: UraConfig, cfg: SolverConfig) -> "JadeProblem":
        y = np.asarray(y, dtype=complex)
        if y.shape != (geom.n_sensors,):
            raise DomainError(f"y has shape {y.shape}, expected ({geom.n_sensors},)")
        if not np.all(np.isfinite(y)):
            raise DomainError("snapshot contains non-finite entries")
        if cfg.grid.size == 0:
            raise DomainError("constraint grid is empty")
        A, B = grid_manifolds(geom, ura, cfg.grid)
        return cls(y, geom, ura, cfg, A, B, A @ A.conj().T)

    @property
    def dims(self):
        return (self.ura.m_x, self.ura.m_y)


# -- objective and constraints --------------------------------------------

def objective(state: SolverState, y, lambda_t: float = 0.1, lambda_x: float = 0.5) -> float:
    """Smooth objective: fidelity + lambda_t |T|_F^2 + (lambda_x/2)(|W_B|_F^2 + |w_s|^2)."""
    r = state.T @ y - state.x_v
    return float(0.5 * np.vdot(r, r).real
                 + lambda_t * np.sum(np.abs(state.T) ** 2)
                 + 0.5 * lambda_x * (np.sum(np.abs(state.W_B) ** 2) + np.sum(np.abs(state.w_s) ** 2)))


def _objective(state, problem):
    cfg = problem.config
    return objective(state, problem.y, cfg.lambda_t, cfg.lambda_x)


def manifold_residual(state: SolverState, problem: JadeProblem) -> np.ndarray:
    """G x M residual [T a_g]_m - b_{g,m} - e_{g,m}."""
    return (state.T @ problem.A - problem.B).T - state.E


def structure_residual(state: SolverState, problem: JadeProblem) -> np.ndarray:
    return mlt_residual(state.gram, problem.dims)


def _realify(*blocks):
    z = np.concatenate([b.ravel() for b in blocks])
    return np.concatenate([z.real, z.imag])


def constraints(state: SolverState, problem: JadeProblem) -> np.ndarray:
    """Stacked real constraint vector A(z): [Re; Im] of (manifold, structure) residuals."""
    return _realify(manifold_residual(state, problem), structure_residual(state, problem))


def feasibility_gap(state: SolverState, problem: JadeProblem) -> float:
    rm = manifold_residual(state, problem)
    rs = structure_residual(state, problem)
    return float(np.sqrt(np.sum(np.abs(rm) ** 2) + np.sum(np.abs(rs) ** 2)))


def _shift(mu, beta):
    """mu / beta, taken as zero when beta = 0 (the penalty then vanishes with mu = 0)."""
    return mu / beta if beta > 0 else np.zeros_like(mu)


def augmented_lagrangian(state: SolverState, problem: JadeProblem) -> float:
    """f(z) + (beta/2) |A(z) + mu/beta|^2 for the current duals and penalty."""
    b = state.beta
    pm = manifold_residual(state, problem) + _shift(state.mu_manifold, b)
    ps = structure_residual(state, problem) + _shift(state.mu_struct, b)
    return _objective(state, problem) + 0.5 * b * float(np.sum(np.abs(pm) ** 2) + np.sum(np.abs(ps) ** 2))


# -- block updates ---------------------------------------------------------

def bcd_update_T(state: SolverState, problem: JadeProblem) -> np.ndarray:
    """Exact minimizer of the augmented Lagrangian over T."""
    cfg, y, b = problem.config, problem.y, state.beta
    n = y.size
    target = b * (problem.B + state.E.T) - state.mu_manifold.T  # beta * (b_g + e_g - mu_g / beta)
    lhs = np.outer(y, y.conj()) + 2.0 * cfg.lambda_t * np.eye(n) + b * problem.AAh
    rhs = np.outer(state.x_v, y.conj()) + target @ problem.A.conj().T
    return np.linalg.solve(lhs, rhs.conj().T).conj().T


def bcd_update_ws(state: SolverState, problem: JadeProblem) -> np.ndarray:
    """Ridge solve for w_s with T and W_B fixed."""
    d = state.T @ problem.y
    wb = state.W_B
    p = wb.shape[0]
    lhs = wb.conj() @ wb.T + problem.config.lambda_x * np.eye(p)
    return np.linalg.solve(lhs, wb.conj() @ d)


def wb_objective(W_B: np.ndarray, state: SolverState, problem: JadeProblem, d=None) -> float:
    """Part of the augmented Lagrangian that depends on W_B."""
    d = state.T @ problem.y if d is None else d
    r = d - W_B.T @ state.w_s
    q = mlt_residual(W_B.T @ W_B.conj(), problem.dims) + _shift(state.mu_struct, state.beta)
    return float(0.5 * np.vdot(r, r).real
                 + 0.5 * problem.config.lambda_x * np.sum(np.abs(W_B) ** 2)
                 + 0.5 * state.beta * np.sum(np.abs(q) ** 2))


def wb_gradient(W_B: np.ndarray, state: SolverState, problem: JadeProblem, d=None) -> np.ndarray:
    """Realified gradient of :func:`wb_objective`."""
    d = state.T @ problem.y if d is None else d
    V = W_B.T
    r = d - V @ state.w_s
    q = mlt_residual(V @ V.conj().T, problem.dims) + _shift(state.mu_struct, state.beta)
    s = mlt_residual(q, problem.dims)  # residual map is a self-adjoint projector
    grad_v = -np.outer(r, state.w_s.conj()) + state.beta * (s + s.conj().T) @ V
    return grad_v.T + problem.config.lambda_x * W_B


def bcd_update_WB(state: SolverState, problem: JadeProblem):
    """Backtracking gradient steps on W_B.

    Returns ``(W_B, n_failures)``; a failed line search leaves W_B unchanged
    for that step.
    """
    d = state.T @ problem.y
    W = state.W_B
    f = wb_objective(W, state, problem, d)
    failures = 0
    for _ in range(problem.config.w_grad_steps):
        g = wb_gradient(W, state, problem, d)
        g2 = float(np.sum(np.abs(g) ** 2))
        if g2 == 0.0:
            break
        # curvature bound of the quadratic + quartic terms sets the first trial step
        q = mlt_residual(W.T @ W.conj(), problem.dims) + _shift(state.mu_struct, state.beta)
        lip = (np.sum(np.abs(state.w_s) ** 2) + problem.config.lambda_x
               + state.beta * (6.0 * np.sum(np.abs(W) ** 2) + 2.0 * np.linalg.norm(q)))
        t = 2.0 / lip
        for _ in range(MAX_HALVINGS):
            W_new = W - t * g
            f_new = wb_objective(W_new, state, problem, d)
            if f_new <= f - ARMIJO_C * t * g2:
                W, f = W_new, f_new
                break
            t *= 0.5
        else:
            failures += 1
    return W, failures


def bcd_update_slack(state: SolverState, problem: JadeProblem) -> np.ndarray:
    """Radial projection of the unconstrained slack minimizer onto the eps-disc."""
    eps = problem.config.eps
    t = (state.T @ problem.A - problem.B).T + _shift(state.mu_manifold, state.beta)
    if math.isinf(eps):
        return t
    mag = np.abs(t)
    scale = np.where(mag > eps, eps / np.where(mag > 0, mag, 1.0), 1.0)
    return t * scale


# -- outer loop ------------------------------------------------------------

def initial_state(problem: JadeProblem, rank_p: int) -> SolverState:
    """T from the ridge fit; W from the top eigenpairs of a lifted rank-one guess."""
    cfg = problem.config
    T0 = init_transform(problem.geometry, problem.ura, cfg.grid, cfg.ridge_init)
    x = T0 @ problem.y
    m = x.size
    Z = np.empty((m + 1, m + 1), dtype=complex)
    Z[:m, :m] = mlt_build(mlt_project(np.outer(x, x.conj()), problem.dims))
    Z[:m, m] = x
    Z[m, :m] = x.conj()
    Z[m, m] = np.linalg.norm(x)
    w, U = np.linalg.eigh(0.5 * (Z + Z.conj().T))
    order = np.argsort(w)[::-1][:rank_p]
    lam = np.clip(w[order], 0.0, None)
    W0 = U[:, order] * np.sqrt(lam)[None, :]
    if rank_p > m + 1:
        W0 = np.hstack([W0, np.zeros((m + 1, rank_p - (m + 1)), dtype=complex)])
    G = cfg.grid.size
    return SolverState(
        T=T0,
        W_B=W0[:m].T.copy(),
        w_s=W0[m].conj().copy(),
        E=np.zeros((G, m), dtype=complex),
        mu_manifold=np.zeros((G, m), dtype=complex),
        mu_struct=np.zeros((m, m), dtype=complex),
        beta=float(cfg.beta0),
    )


def bcd_sweep(state: SolverState, problem: JadeProblem, monitor=None) -> int:
    """One cyclic pass T -> W_B -> w_s -> E, updating ``state`` in place.

    ``monitor(block, al_before, al_after)`` is called after each block when
    given. Returns the number of failed W_B line searches.
    """
    failures = 0

    def run(block, fn):
        nonlocal failures
        before = augmented_lagrangian(state, problem) if monitor else None
        if block == "W_B":
            state.W_B, nf = fn(state, problem)
            failures += nf
        else:
            setattr(state, block, fn(state, problem))
        if monitor:
            monitor(block, before, augmented_lagrangian(state, problem))

    run("T", bcd_update_T)
    run("W_B", bcd_update_WB)
    run("w_s", bcd_update_ws)
    run("E", bcd_update_slack)
    return failures


def dual_update(state: SolverState, problem: JadeProblem) -> float:
    """mu <- mu + beta * A(z); returns the feasibility gap |A(z)| at the new primal point."""
    rm = manifold_residual(state, problem)
    rs = structure_residual(state, problem)
    state.mu_manifold = state.mu_manifold + state.beta * rm
    state.mu_struct = state.mu_struct + state.beta * rs
    return float(np.sqrt(np.sum(np.abs(rm) ** 2) + np.sum(np.abs(rs) ** 2)))


def ialm_solve(y, geom: UcaGeometry, ura: UraConfig, cfg: SolverConfig, n_sources: int = 1, monitor=None):
    """Run the inexact augmented Lagrangian method; returns ``(state, report)``."""
    t_start = time.perf_counter()
    problem = JadeProblem.build(y, geom, ura, cfg)
    state = initial_state(problem, cfg.rank_for(n_sources))
    report = SolverReport()
    prev_gap = feasibility_gap(state, problem)
    prev_obj = _objective(state, problem)
    for it in range(cfg.max_outer):
        for _ in range(cfg.bcd_sweeps):
            report.line_search_failures += bcd_sweep(state, problem, monitor)
        beta_used = state.beta
        gap = dual_update(state, problem)
        obj = _objective(state, problem)
        if not (math.isfinite(gap) and math.isfinite(obj) and state.is_finite()):
            raise NumericalError("non-finite value in iALM iterate", iteration=it)
        report.obj_history.append(obj)
        report.feas_history.append(gap)
        report.beta_history.append(beta_used)
        report.outer_iters = it + 1
        if gap > cfg.beta_trigger * prev_gap:
            state.beta = min(state.beta * cfg.beta_growth, cfg.beta_max)
        rel_change = abs(obj - prev_obj) / max(1.0, abs(prev_obj))
        prev_gap, prev_obj = gap, obj
        if gap <= cfg.tol_feas and rel_change <= cfg.tol_obj:
            report.status = "converged"
            break
    report.wall_time_s = time.perf_counter() - t_start
    return state, report


def with_rank(cfg: SolverConfig, n_sources: int) -> SolverConfig:
    return replace(cfg, rank_p=cfg.rank_for(n_sources))
