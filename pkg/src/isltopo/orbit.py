"""Walker-Delta constellation geometry on circular orbits.

Planes are spread evenly in right ascension over the full circle, satellites
evenly in anomaly within each plane, and every plane receives an independent
random phase offset drawn from ``Uniform[0, max_phase_offset_rad]``. The frame
is Earth-centred inertial; only relative geometry matters downstream.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

EARTH_RADIUS_KM = 6371.0
EARTH_MU_KM3_S2 = 398600.4418


@dataclass(frozen=True)
class ConstellationConfig:
    n_planes: int
    sats_per_plane: int
    altitude_km: float
    inclination_rad: float
    max_phase_offset_rad: float
    earth_radius_km: float = EARTH_RADIUS_KM
    gravitational_parameter_km3_s2: float = EARTH_MU_KM3_S2

    def validate(self) -> None:
        if int(self.n_planes) != self.n_planes or self.n_planes < 1:
            raise ConfigurationError("n_planes", f"must be an integer >= 1, got {self.n_planes!r}")
        if int(self.sats_per_plane) != self.sats_per_plane or self.sats_per_plane < 1:
            raise ConfigurationError(
                "sats_per_plane", f"must be an integer >= 1, got {self.sats_per_plane!r}"
            )
        if not self.altitude_km > 0:
            raise ConfigurationError("altitude_km", f"must be > 0, got {self.altitude_km!r}")
        if not 0.0 <= self.inclination_rad <= math.pi:
            raise ConfigurationError(
                "inclination_rad", f"must lie in [0, pi], got {self.inclination_rad!r}"
            )
        if not 0.0 <= self.max_phase_offset_rad <= 2.0 * math.pi:
            raise ConfigurationError(
                "max_phase_offset_rad", f"must lie in [0, 2*pi], got {self.max_phase_offset_rad!r}"
            )
        if not self.earth_radius_km > 0:
            raise ConfigurationError("earth_radius_km", "must be > 0")
        if not self.gravitational_parameter_km3_s2 > 0:
            raise ConfigurationError("gravitational_parameter_km3_s2", "must be > 0")

    @property
    def orbital_radius_km(self) -> float:
        return self.earth_radius_km + self.altitude_km

    @property
    def n_sats(self) -> int:
        return self.n_planes * self.sats_per_plane


@dataclass(frozen=True)
class SatId:
    plane: int
    index: int

    def __str__(self):
        return f"{self.plane},{self.index}"


@dataclass(frozen=True)
class PositionSample:
    sat_id: SatId
    time_s: float
    position_km: tuple[float, float, float]


@dataclass(frozen=True)
class Constellation:
    config: ConstellationConfig
    phase_offsets: tuple[float, ...]

    @property
    def orbital_radius_km(self) -> float:
        return self.config.orbital_radius_km

    @property
    def n_sats(self) -> int:
        return self.config.n_sats

    @property
    def period_s(self) -> float:
        return orbital_period(self.config)

    def sat_index(self, sat_id: SatId) -> int:
        """Global index of a satellite: ``plane * sats_per_plane + index``."""
        cfg = self.config
        if not (0 <= sat_id.plane < cfg.n_planes and 0 <= sat_id.index < cfg.sats_per_plane):
            raise IndexError(f"satellite {sat_id} outside a {cfg.n_planes}x{cfg.sats_per_plane} constellation")
        return sat_id.plane * cfg.sats_per_plane + sat_id.index

    def sat_id(self, index: int) -> SatId:
        if not 0 <= index < self.n_sats:
            raise IndexError(f"satellite index {index} out of range")
        return SatId(*divmod(int(index), self.config.sats_per_plane))

    def plane_of(self) -> np.ndarray:
        """Plane index of every satellite, in global order."""
        return np.repeat(np.arange(self.config.n_planes), self.config.sats_per_plane)


def orbital_period(config: ConstellationConfig) -> float:
    """Circular-orbit period in seconds, from Kepler's third law."""
    r = config.orbital_radius_km
    if r <= 0:
        raise ConfigurationError("altitude_km", "orbital radius must be positive")
    return 2.0 * math.pi * math.sqrt(r**3 / config.gravitational_parameter_km3_s2)


def build_constellation(config: ConstellationConfig, seed: int) -> Constellation:
    """Draw per-plane phase offsets from a PCG64 stream seeded with ``seed``."""
    config.validate()
    rng = np.random.default_rng(seed)
    offsets = rng.uniform(0.0, config.max_phase_offset_rad, size=config.n_planes)
    return Constellation(config=config, phase_offsets=tuple(float(p) for p in offsets))


def positions_at(constellation: Constellation, t_s: float) -> np.ndarray:
    """Positions of all satellites at time ``t_s`` as an ``(N, 3)`` array in km."""
    return positions_over(constellation, np.asarray([t_s], dtype=float))[0]


def positions_over(constellation: Constellation, times_s) -> np.ndarray:
    """Positions for every time in ``times_s``; shape ``(len(times_s), N, 3)``."""
    cfg = constellation.config
    times = np.atleast_1d(np.asarray(times_s, dtype=float))
    r = cfg.orbital_radius_km
    n_p, n_s = cfg.n_planes, cfg.sats_per_plane

    raan = 2.0 * math.pi * np.arange(n_p) / n_p
    phase = np.asarray(constellation.phase_offsets, dtype=float)
    base = 2.0 * math.pi * np.arange(n_s) / n_s
    # anomaly[t, p, s]
    mean_motion = 2.0 * math.pi / orbital_period(cfg)
    anomaly = base[None, None, :] + phase[None, :, None] + mean_motion * times[:, None, None]

    x_orb = r * np.cos(anomaly)
    y_orb = r * np.sin(anomaly)
    ci, si = math.cos(cfg.inclination_rad), math.sin(cfg.inclination_rad)
    # R_x(inclination) applied to (x, y, 0)
    y_inc = y_orb * ci
    z = y_orb * si
    co = np.cos(raan)[None, :, None]
    so = np.sin(raan)[None, :, None]
    x = co * x_orb - so * y_inc
    y = so * x_orb + co * y_inc
    z = np.broadcast_to(z, x.shape)
    out = np.stack([x, y, z], axis=-1)
    return out.reshape(len(times), n_p * n_s, 3)


def position_at(constellation: Constellation, sat_id: SatId | int, t_s: float) -> np.ndarray:
    """Position of one satellite at ``t_s``: ``R_z(raan) R_x(incl) (r cos a, r sin a, 0)``."""
    if isinstance(sat_id, SatId):
        idx = constellation.sat_index(sat_id)
    else:
        idx = int(sat_id)
        if not 0 <= idx < constellation.n_sats:
            raise IndexError(f"satellite index {idx} out of range")
    cfg = constellation.config
    p, s = divmod(idx, cfg.sats_per_plane)
    r = cfg.orbital_radius_km
    raan = 2.0 * math.pi * p / cfg.n_planes
    alpha = (
        2.0 * math.pi * s / cfg.sats_per_plane
        + constellation.phase_offsets[p]
        + 2.0 * math.pi * t_s / orbital_period(cfg)
    )
    xo, yo = r * math.cos(alpha), r * math.sin(alpha)
    yi = yo * math.cos(cfg.inclination_rad)
    z = yo * math.sin(cfg.inclination_rad)
    return np.array(
        [math.cos(raan) * xo - math.sin(raan) * yi, math.sin(raan) * xo + math.cos(raan) * yi, z]
    )


def sample_times(t0_s: float, duration_s: float, n_samples: int) -> np.ndarray:
    if n_samples < 2:
        raise ValueError(f"n_samples must be >= 2, got {n_samples}")
    return t0_s + duration_s * np.arange(n_samples) / (n_samples - 1)


def sample_epoch(
    constellation: Constellation, t0_s: float, duration_s: float, n_samples: int
) -> list[PositionSample]:
    """Positions of every satellite on an evenly spaced grid that includes both endpoints."""
    times = sample_times(t0_s, duration_s, n_samples)
    pos = positions_over(constellation, times)
    samples = []
    for ti, t in enumerate(times):
        for i in range(constellation.n_sats):
            samples.append(
                PositionSample(
                    sat_id=constellation.sat_id(i),
                    time_s=float(t),
                    position_km=tuple(float(c) for c in pos[ti, i]),
                )
            )
    return samples
