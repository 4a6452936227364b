"""Uniform circular array geometry and single-snapshot measurement model.

The array sits in the x-y plane; azimuth ``theta`` is measured in that plane and
elevation ``phi`` from the z-axis, so a source at ``phi = 0`` is at zenith.

Randomness uses numpy's PCG64 bit generator seeded explicitly per call, which
is reproducible across platforms for a fixed numpy major version.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError, FormatError

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class UcaGeometry:
    n_sensors: int = 16
    radius_wl: float = 1.0

    def __post_init__(self):
        if int(self.n_sensors) != self.n_sensors or self.n_sensors < 1:
            raise DomainError(f"n_sensors must be a positive integer, got {self.n_sensors}")
        if not self.radius_wl > 0:
            raise DomainError(f"radius_wl must be positive, got {self.radius_wl}")

    @property
    def sensor_angles(self) -> np.ndarray:
        return TWO_PI * np.arange(self.n_sensors) / self.n_sensors


@dataclass(frozen=True)
class SourceSet:
    """K far-field sources: (theta, phi) pairs in radians plus complex amplitudes."""

    thetas: tuple
    phis: tuple
    amplitudes: tuple = None

    def __post_init__(self):
        thetas = tuple(float(t) for t in np.atleast_1d(self.thetas))
        phis = tuple(float(p) for p in np.atleast_1d(self.phis))
        if len(thetas) != len(phis) or len(thetas) < 1:
            raise DomainError("need at least one source and matching theta/phi lengths")
        amps = self.amplitudes
        amps = (1.0 + 0j,) * len(thetas) if amps is None else tuple(complex(a) for a in np.atleast_1d(amps))
        if len(amps) != len(thetas):
            raise DomainError("amplitude count does not match source count")
        if any(a == 0 for a in amps):
            raise DomainError("source amplitudes must be nonzero")
        for t, p in zip(thetas, phis):
            check_angles(t, p)
        if len(set(zip(thetas, phis))) != len(thetas):
            raise DomainError("source directions must be distinct")
        object.__setattr__(self, "thetas", thetas)
        object.__setattr__(self, "phis", phis)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def k(self) -> int:
        return len(self.thetas)

    @property
    def angles(self) -> np.ndarray:
        """(K, 2) array of (theta, phi) rows."""
        return np.column_stack([self.thetas, self.phis])

    def with_amplitudes(self, amplitudes) -> "SourceSet":
        return SourceSet(self.thetas, self.phis, tuple(amplitudes))


@dataclass
class Snapshot:
    y: np.ndarray
    noise_var: float
    geometry: UcaGeometry
    truth: SourceSet | None = None
    seed: int = 0
    _hash: str | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=complex)
        if self.y.shape != (self.geometry.n_sensors,):
            raise DomainError(f"y has shape {self.y.shape}, expected ({self.geometry.n_sensors},)")
        if self.noise_var < 0:
            raise DomainError("noise_var must be nonnegative")

    def digest(self) -> str:
        """SHA-256 of the measurement bytes, used to check paired seeding."""
        if self._hash is None:
            self._hash = hashlib.sha256(np.ascontiguousarray(self.y).tobytes()).hexdigest()
        return self._hash


def check_angles(theta, phi):
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if not (np.all(np.isfinite(theta)) and np.all(np.isfinite(phi))):
        raise DomainError("angles must be finite")
    if np.any(phi < 0) or np.any(phi > np.pi / 2):
        raise DomainError(f"elevation must lie in [0, pi/2], got {phi}")


def wrap_azimuth(theta):
    """Map azimuths into [-pi, pi)."""
    return (np.asarray(theta, dtype=float) + np.pi) % TWO_PI - np.pi


def uca_steering(geom: UcaGeometry, theta: float, phi: float) -> np.ndarray:
    """Steering vector a(theta, phi) of length N.

    Azimuth is accepted modulo 2*pi; elevation outside [0, pi/2] raises
    :class:`DomainError`.
    """
    check_angles(theta, phi)
    phase = TWO_PI * geom.radius_wl * np.sin(phi) * np.cos(theta - geom.sensor_angles)
    return np.exp(1j * phase)


def uca_steering_matrix(geom: UcaGeometry, thetas, phis) -> np.ndarray:
    """Columns are steering vectors for the paired entries of ``thetas``/``phis``."""
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    phis = np.atleast_1d(np.asarray(phis, dtype=float))
    check_angles(thetas, phis)
    gam = geom.sensor_angles[:, None]
    phase = TWO_PI * geom.radius_wl * np.sin(phis)[None, :] * np.cos(thetas[None, :] - gam)
    return np.exp(1j * phase)


def uca_steering_derivatives(geom: UcaGeometry, theta: float, phi: float):
    """Return (a, da/dtheta, da/dphi) evaluated at one direction."""
    a = uca_steering(geom, theta, phi)
    delta = theta - geom.sensor_angles
    k = TWO_PI * geom.radius_wl
    da_dtheta = a * (-1j * k * np.sin(phi) * np.sin(delta))
    da_dphi = a * (1j * k * np.cos(phi) * np.cos(delta))
    return a, da_dtheta, da_dphi


def snr_to_noise_var(snr_db: float) -> float:
    """Noise variance for unit-power sources at the given SNR in dB."""
    return float(10.0 ** (-snr_db / 10.0))


def complex_gaussian(rng: np.random.Generator, shape, noise_var: float) -> np.ndarray:
    """CN(0, noise_var) samples: each real/imag part has variance noise_var / 2."""
    scale = np.sqrt(noise_var / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def synthesize_snapshot(geom: UcaGeometry, sources: SourceSet, noise_var: float, seed: int) -> Snapshot:
    if noise_var < 0:
        raise DomainError("noise_var must be nonnegative")
    A = uca_steering_matrix(geom, sources.thetas, sources.phis)
    y = A @ np.asarray(sources.amplitudes, dtype=complex)
    if noise_var > 0:
        rng = np.random.Generator(np.random.PCG64(seed))
        y = y + complex_gaussian(rng, geom.n_sensors, noise_var)
    return Snapshot(y=y, noise_var=float(noise_var), geometry=geom, truth=sources, seed=int(seed))


def synthesize_snapshots(geom: UcaGeometry, sources: SourceSet, n_snapshots: int, noise_var: float, seed: int) -> np.ndarray:
    """N x L matrix of snapshots with unit-modulus, independently random-phase amplitudes.

    Only used by multi-snapshot baseline checks; the estimators of interest
    work on one column.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    A = uca_steering_matrix(geom, sources.thetas, sources.phis)
    S = np.exp(1j * rng.uniform(0, TWO_PI, size=(sources.k, n_snapshots)))
    S = S * np.abs(np.asarray(sources.amplitudes))[:, None]
    Y = A @ S
    if noise_var > 0:
        Y = Y + complex_gaussian(rng, Y.shape, noise_var)
    return Y


def random_phase_sources(thetas, phis, seed: int) -> SourceSet:
    """Unit-magnitude amplitudes with uniform random phase drawn from ``seed``.

    Uses a stream independent of the noise stream of :func:`synthesize_snapshot`.
    """
    rng = np.random.Generator(np.random.PCG64([seed, 1]))
    k = len(np.atleast_1d(thetas))
    return SourceSet(thetas, phis, tuple(np.exp(1j * rng.uniform(0, TWO_PI, size=k))))


# -- JSON snapshot files ---------------------------------------------------

def _pairs(z):
    return [[float(c.real), float(c.imag)] for c in np.atleast_1d(z)]


def _unpairs(rows, name):
    try:
        arr = np.asarray(rows, dtype=float)
    except (TypeError, ValueError) as exc:
        raise FormatError(f"field '{name}' must be a list of [re, im] pairs") from exc
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise FormatError(f"field '{name}' must be a list of [re, im] pairs")
    return arr[:, 0] + 1j * arr[:, 1]


def snapshot_to_dict(snap: Snapshot) -> dict:
    out = {
        "n_sensors": snap.geometry.n_sensors,
        "radius_wl": snap.geometry.radius_wl,
        "noise_var": snap.noise_var,
        "seed": snap.seed,
        "y": _pairs(snap.y),
    }
    if snap.truth is not None:
        out["truth"] = {
            "theta": list(snap.truth.thetas),
            "phi": list(snap.truth.phis),
            "amp": _pairs(snap.truth.amplitudes),
        }
    return out


def snapshot_from_dict(d: dict) -> Snapshot:
    missing = [k for k in ("n_sensors", "radius_wl", "noise_var", "seed", "y") if k not in d]
    if missing:
        raise FormatError(f"snapshot is missing field(s): {', '.join(missing)}")
    geom = UcaGeometry(int(d["n_sensors"]), float(d["radius_wl"]))
    truth = None
    if d.get("truth") is not None:
        t = d["truth"]
        try:
            truth = SourceSet(tuple(t["theta"]), tuple(t["phi"]), tuple(_unpairs(t["amp"], "truth.amp")))
        except KeyError as exc:
            raise FormatError(f"truth is missing field {exc}") from exc
    return Snapshot(y=_unpairs(d["y"], "y"), noise_var=float(d["noise_var"]), geometry=geom,
                    truth=truth, seed=int(d["seed"]))


def save_snapshot(snap: Snapshot, path) -> None:
    Path(path).write_text(json.dumps(snapshot_to_dict(snap), indent=2))


def load_snapshot(path) -> Snapshot:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON ({exc})") from exc
    return snapshot_from_dict(d)
