import cmath
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from jadedoa.array_model import UcaGeometry, uca_steering_matrix
from jadedoa.errors import DomainError, InfeasibleFrequencyError
from jadedoa.virtual_manifold import (
    AngularGrid,
    UraConfig,
    angles_to_freqs,
    build_constraint_grid,
    freqs_to_angles,
    grid_manifolds,
    init_transform,
    ura_steering,
    ura_steering_matrix,
)

DEFAULT_MAX_FIT_ERROR = 1.4399723593072757


def test_scalar_manifold():
    assert np.array_equal(ura_steering(UraConfig(1, 1), 0.4, 0.5), [1.0])


def test_half_wavelength_endfire():
    b = ura_steering(UraConfig(2, 1), 0.0, math.pi / 2)
    assert np.allclose(b, [1, -1], atol=1e-12)


def test_kronecker_against_explicit_loops():
    theta, phi = 0.3, 0.9
    u, v = math.sin(phi) * math.cos(theta), math.sin(phi) * math.sin(theta)
    bx = [cmath.exp(1j * math.pi * m * u) for m in range(3)]
    by = [cmath.exp(1j * math.pi * m * v) for m in range(3)]
    ref = [by[my] * bx[mx] for my in range(3) for mx in range(3)]
    assert np.max(np.abs(ura_steering(UraConfig(), theta, phi) - np.array(ref))) < 1e-12


@given(st.floats(-math.pi, math.pi - 1e-9), st.floats(0, math.pi / 2),
       st.integers(1, 4), st.integers(1, 4))
def test_kronecker_separability(theta, phi, mx, my):
    cfg = UraConfig(mx, my, 0.5, 0.4)
    u, v = angles_to_freqs(theta, phi)
    bx = np.exp(2j * np.pi * 0.5 * np.arange(mx) * u)
    by = np.exp(2j * np.pi * 0.4 * np.arange(my) * v)
    assert np.max(np.abs(ura_steering(cfg, theta, phi) - np.kron(by, bx))) < 1e-12


def test_steering_matrix_columns():
    cfg = UraConfig()
    th, ph = np.array([0.1, -2.0]), np.array([0.5, 1.2])
    B = ura_steering_matrix(cfg, th, ph)
    for i in range(2):
        assert np.allclose(B[:, i], ura_steering(cfg, th[i], ph[i]))


@pytest.mark.parametrize("kwargs", [{"m_x": 0}, {"d_x_wl": 0.6}, {"d_y_wl": 0.0}])
def test_ura_config_invariants(kwargs):
    with pytest.raises(DomainError):
        UraConfig(**kwargs)


def test_freqs_endfire_and_zenith():
    assert np.allclose(angles_to_freqs(0.0, math.pi / 2), (1.0, 0.0), atol=1e-15)
    assert freqs_to_angles(0.0, 0.0) == (0.0, 0.0)


def test_freq_round_trip_example():
    th, ph = freqs_to_angles(*angles_to_freqs(0.3, 0.9))
    assert abs(th - 0.3) < 1e-12 and abs(ph - 0.9) < 1e-12


@given(st.floats(-math.pi, math.pi - 1e-9), st.floats(0.01, math.pi / 2 - 1e-6))
def test_freq_round_trip_property(theta, phi):
    th, ph = freqs_to_angles(*angles_to_freqs(theta, phi))
    assert abs(ph - phi) < 1e-12 * max(1.0, 1 / math.cos(phi))
    assert abs((th - theta + math.pi) % (2 * math.pi) - math.pi) < 1e-12 / math.sin(phi)


def test_freq_round_trip_at_horizon():
    th, ph = freqs_to_angles(*angles_to_freqs(1.0, math.pi / 2))
    assert abs(th - 1.0) < 1e-12 and abs(ph - math.pi / 2) < 1e-6


def test_infeasible_frequency():
    with pytest.raises(InfeasibleFrequencyError):
        freqs_to_angles(0.9, 0.9)


def test_azimuth_range_half_open():
    th, _ = freqs_to_angles(-0.5, 0.0)
    assert th == -math.pi


def test_small_grid():
    g = build_constraint_grid(4, 2)
    assert np.allclose(g.thetas, [-math.pi, -math.pi / 2, 0, math.pi / 2])
    assert np.allclose(g.phis, [math.pi / 4, math.pi / 2])
    assert g.size == 8 and g.points.shape == (8, 2)


def test_default_grid_size():
    assert build_constraint_grid(24, 7).size == 168


@given(st.integers(2, 12), st.integers(2, 12))
def test_grid_phi_major(nt, npf):
    g = build_constraint_grid(nt, npf)
    pts = g.points
    for j in range(npf):
        block = pts[j * nt:(j + 1) * nt]
        assert np.all(block[:, 1] == g.phis[j])
        assert np.array_equal(block[:, 0], g.thetas)
    assert np.all(np.diff(g.thetas) > 0) and np.all(np.diff(g.phis) > 0)


def test_grid_too_small():
    with pytest.raises(DomainError):
        build_constraint_grid(1, 5)


def test_init_single_point_interpolates():
    geom, cfg = UcaGeometry(), UraConfig()
    grid = AngularGrid(np.array([0.3]), np.array([0.9]))
    A, B = grid_manifolds(geom, cfg, grid)
    residuals = []
    for ridge in (1e-2, 1e-5, 1e-8):
        T = init_transform(geom, cfg, grid, ridge)
        residuals.append(np.linalg.norm(T @ A[:, 0] - B[:, 0]))
        # rank-one ridge fit shrinks b by ridge / (|a|^2 + ridge)
        assert residuals[-1] == pytest.approx(ridge * 3.0 / (16.0 + ridge), rel=1e-6)
    assert residuals[0] > residuals[1] > residuals[2]


def test_init_identity_fit():
    # URA with M = N = 4 on a 2x2 layout; using its own manifold as source gives T -> I
    cfg = UraConfig(2, 2)
    grid = build_constraint_grid(6, 5)
    pts = grid.points
    B = ura_steering_matrix(cfg, pts[:, 0], pts[:, 1])
    T = B @ B.conj().T @ np.linalg.inv(B @ B.conj().T + 1e-9 * np.eye(4))
    assert np.allclose(T, np.eye(4), atol=1e-8)


def test_init_normal_equations():
    geom, cfg, grid = UcaGeometry(), UraConfig(), build_constraint_grid(24, 7)
    ridge = 1e-3
    T0 = init_transform(geom, cfg, grid, ridge)
    A, B = grid_manifolds(geom, cfg, grid)
    lhs = T0 @ (A @ A.conj().T + ridge * np.eye(16))
    rhs = B @ A.conj().T
    assert np.linalg.norm(lhs - rhs) <= 1e-8 * np.linalg.norm(rhs)


def test_init_default_matches_lstsq_oracle():
    geom, cfg, grid = UcaGeometry(), UraConfig(), build_constraint_grid(24, 7)
    ridge = 1e-3
    T0 = init_transform(geom, cfg, grid, ridge)
    pts = grid.points
    A = uca_steering_matrix(geom, pts[:, 0], pts[:, 1])
    B = ura_steering_matrix(cfg, pts[:, 0], pts[:, 1])
    # min |A^H X - B^H|^2 + ridge |X|^2 as an augmented least-squares problem, X = T^H
    stacked = np.vstack([A.conj().T, math.sqrt(ridge) * np.eye(16)])
    target = np.vstack([B.conj().T, np.zeros((16, 9))])
    X = np.linalg.lstsq(stacked, target, rcond=None)[0]
    assert np.allclose(T0, X.conj().T, atol=1e-9)
    max_err = np.max(np.abs(T0 @ A - B))
    assert max_err == pytest.approx(DEFAULT_MAX_FIT_ERROR, rel=1e-9)


def test_init_rejects_nonpositive_ridge():
    with pytest.raises(DomainError):
        init_transform(UcaGeometry(), UraConfig(), build_constraint_grid(4, 2), 0.0)
