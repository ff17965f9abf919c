"""Walker Delta geometry, +Grid inter-satellite links and ground contacts.

Satellites fly circular Keplerian orbits around a spherical Earth. Positions
are expressed in an Earth-centred inertial frame; ground stations rotate with
the Earth at the sidereal rate, so their inertial position depends on time.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

EARTH_RADIUS_KM = 6371.0
MU_KM3_S2 = 398600.4418
EARTH_ROTATION_RAD_S = 7.2921159e-5

# Above this many (slot, satellite) samples the contact computation is chunked.
_CHUNK_SAMPLES = 2_000_000


class ConfigurationError(ValueError):
    """Raised for invalid shell, station or bandwidth parameters."""


@dataclass(frozen=True)
class ShellConfig:
    orbit_count: int
    sats_per_orbit: int
    altitude_km: float
    inclination_deg: float
    phasing_factor: int = 0
    max_gsl_range_km: float = 1260.0
    max_isl_range_km: float = 5442.958

    def validate(self) -> None:
        if self.orbit_count < 1 or self.sats_per_orbit < 1:
            raise ConfigurationError("orbit_count and sats_per_orbit must be >= 1")
        if not 0.0 <= self.inclination_deg <= 180.0:
            raise ConfigurationError("inclination_deg must lie in [0, 180]")
        if not 0 <= self.phasing_factor < self.orbit_count:
            raise ConfigurationError("phasing_factor must lie in [0, orbit_count)")
        if self.altitude_km <= 0:
            raise ConfigurationError("altitude_km must be positive")
        if self.max_gsl_range_km <= 0 or self.max_isl_range_km <= 0:
            raise ConfigurationError("link ranges must be positive")

    @property
    def size(self) -> int:
        return self.orbit_count * self.sats_per_orbit


SHELL_PRESETS: dict[str, ShellConfig] = {
    # Starlink shell 1.
    "shell1": ShellConfig(72, 22, 550.0, 53.0, 1, 1260.0, 5442.958),
    # Reduced shell that keeps the +Grid torus; every ISL stays in range.
    "desk": ShellConfig(8, 8, 550.0, 53.0, 1, 1260.0, 8000.0),
    "desk5": ShellConfig(5, 5, 550.0, 53.0, 1, 1260.0, 9000.0),
}


@dataclass(frozen=True)
class SatelliteId:
    orbit_index: int
    slot_index: int
    flat_index: int

    @classmethod
    def from_flat(cls, flat: int, sats_per_orbit: int) -> "SatelliteId":
        return cls(flat // sats_per_orbit, flat % sats_per_orbit, flat)

    @classmethod
    def from_grid(cls, orbit: int, slot: int, sats_per_orbit: int) -> "SatelliteId":
        return cls(orbit, slot, orbit * sats_per_orbit + slot)


@dataclass(frozen=True)
class GroundStation:
    id: int
    latitude_deg: float
    longitude_deg: float
    name: str = ""

    def __post_init__(self) -> None:
        if abs(self.latitude_deg) > 90.0:
            raise ConfigurationError(f"station {self.id}: |latitude| must be <= 90")
        lon = (self.longitude_deg + 180.0) % 360.0 - 180.0
        object.__setattr__(self, "longitude_deg", lon)


STATION_PRESETS: dict[str, tuple[GroundStation, ...]] = {
    # Sits under the first satellite's ground track about two minutes into
    # the run on the desk shell, so the first pass starts at slot 0.
    "single": (GroundStation(0, 6.014674, 4.052529, "desk-pass"),),
    "equator": (GroundStation(0, 0.0, 0.0, "null-island"),),
    "cities4": (
        GroundStation(0, 31.23, 121.47, "shanghai"),
        GroundStation(1, 40.71, -74.01, "new-york"),
        GroundStation(2, 51.51, -0.13, "london"),
        GroundStation(3, -33.87, 151.21, "sydney"),
    ),
}


@dataclass(frozen=True)
class ConstellationTopology:
    config: ShellConfig
    epoch_s: float
    raan_rad: np.ndarray = field(repr=False)
    anomaly_rad: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.config.size

    @property
    def radius_km(self) -> float:
        return EARTH_RADIUS_KM + self.config.altitude_km

    @property
    def mean_motion_rad_s(self) -> float:
        return math.sqrt(MU_KM3_S2 / self.radius_km**3)

    @property
    def period_s(self) -> float:
        return 2.0 * math.pi / self.mean_motion_rad_s

    def sat(self, flat: int) -> SatelliteId:
        return SatelliteId.from_flat(flat, self.config.sats_per_orbit)


def generate_walker_delta(config: ShellConfig, epoch: float = 0.0) -> ConstellationTopology:
    """Lay out a Walker Delta shell.

    Planes are spaced evenly in RAAN, satellites evenly in argument of
    latitude, and plane ``p`` is shifted by ``p * F * 360 / total`` degrees.
    """
    config.validate()
    planes = np.repeat(np.arange(config.orbit_count), config.sats_per_orbit)
    slots = np.tile(np.arange(config.sats_per_orbit), config.orbit_count)
    raan = np.deg2rad(planes * 360.0 / config.orbit_count)
    anomaly = np.deg2rad(
        slots * 360.0 / config.sats_per_orbit
        + planes * config.phasing_factor * 360.0 / config.size
    )
    raan.setflags(write=False)
    anomaly.setflags(write=False)
    return ConstellationTopology(config, float(epoch), raan, anomaly)


def _positions_at(topology: ConstellationTopology, seconds: np.ndarray) -> np.ndarray:
    """Inertial positions, shape (len(seconds), n, 3)."""
    r = topology.radius_km
    inc = math.radians(topology.config.inclination_deg)
    u = topology.anomaly_rad[None, :] + topology.mean_motion_rad_s * seconds[:, None]
    cos_u, sin_u = np.cos(u), np.sin(u)
    cos_o, sin_o = np.cos(topology.raan_rad), np.sin(topology.raan_rad)
    out = np.empty(u.shape + (3,))
    out[..., 0] = r * (cos_o * cos_u - sin_o * sin_u * math.cos(inc))
    out[..., 1] = r * (sin_o * cos_u + cos_o * sin_u * math.cos(inc))
    out[..., 2] = r * sin_u * math.sin(inc)
    return out


def propagate(topology: ConstellationTopology, t: float, slot_seconds: float = 1.0) -> np.ndarray:
    """Positions (km, inertial) of every satellite at slot ``t``; shape (n, 3)."""
    if t < 0:
        raise ValueError("slot index must be non-negative")
    seconds = np.array([topology.epoch_s + t * slot_seconds])
    return _positions_at(topology, seconds)[0]


def station_position(station: GroundStation, time_s: float = 0.0) -> np.ndarray:
    return _station_positions([station], np.array([time_s]))[0, 0]


def _station_positions(stations: Sequence[GroundStation], seconds: np.ndarray) -> np.ndarray:
    """Inertial station positions, shape (len(seconds), m, 3)."""
    lat = np.deg2rad([s.latitude_deg for s in stations])
    lon = np.deg2rad([s.longitude_deg for s in stations])
    theta = lon[None, :] + EARTH_ROTATION_RAD_S * seconds[:, None]
    out = np.empty(theta.shape + (3,))
    out[..., 0] = EARTH_RADIUS_KM * np.cos(lat) * np.cos(theta)
    out[..., 1] = EARTH_RADIUS_KM * np.cos(lat) * np.sin(theta)
    out[..., 2] = EARTH_RADIUS_KM * np.sin(lat)[None, :]
    return out


def station_under(topology: ConstellationTopology, flat: int, time_s: float, sid: int = 0) -> GroundStation:
    """A station at the sub-satellite point of ``flat`` at ``time_s``."""
    p = _positions_at(topology, np.array([time_s]))[0, flat]
    lat = math.degrees(math.asin(p[2] / np.linalg.norm(p)))
    lon = math.degrees(math.atan2(p[1], p[0]) - EARTH_ROTATION_RAD_S * time_s)
    return GroundStation(sid, round(lat, 6), round(lon, 6))


def isl_neighbors(topology: ConstellationTopology, sat: SatelliteId) -> list[SatelliteId]:
    """+Grid neighbours: two in-plane, two in adjacent planes (distinct, no self)."""
    p, s = topology.config.orbit_count, topology.config.sats_per_orbit
    candidates = [
        (sat.orbit_index, (sat.slot_index - 1) % s),
        (sat.orbit_index, (sat.slot_index + 1) % s),
        ((sat.orbit_index - 1) % p, sat.slot_index),
        ((sat.orbit_index + 1) % p, sat.slot_index),
    ]
    out: list[SatelliteId] = []
    for o, k in candidates:
        nb = SatelliteId.from_grid(o, k, s)
        if nb.flat_index != sat.flat_index and nb not in out:
            out.append(nb)
    return out


def grid_pairs(topology: ConstellationTopology) -> np.ndarray:
    """Directed +Grid ISL pairs, sorted, shape (E, 2)."""
    pairs = set()
    for i in range(topology.n):
        for nb in isl_neighbors(topology, topology.sat(i)):
            pairs.add((i, nb.flat_index))
    return np.array(sorted(pairs), dtype=np.int64).reshape(-1, 2)


def visible_satellites(
    positions: np.ndarray,
    station: GroundStation,
    max_gsl_range_km: float,
    time_s: float = 0.0,
) -> set[int]:
    """Flat indices of satellites within ``max_gsl_range_km`` of the station."""
    d = np.linalg.norm(positions - station_position(station, time_s), axis=1)
    return {int(i) for i in np.flatnonzero(d <= max_gsl_range_km)}


@dataclass(frozen=True)
class BandwidthProfile:
    """Link capacities in data units (Mb) per slot."""

    gsl: int
    isl: int
    uplink: int

    @classmethod
    def from_gbps(cls, gsl: float, isl: float, uplink: float, slot_seconds: float = 1.0) -> "BandwidthProfile":
        def units(gbps: float) -> int:
            if gbps <= 0:
                raise ConfigurationError("bandwidths must be positive")
            return int(math.floor(gbps * slot_seconds * 1000 + 1e-9))

        return cls(units(gsl), units(isl), units(uplink))


@dataclass
class ContactTable:
    """Per-slot link availability for slots ``start .. start + horizon - 1``.

    ``gsl[t, j]`` is the satellite assigned to station ``j`` during slot
    ``start + t`` (or -1). ``isl_up[t, e]`` says whether directed pair
    ``isl_pairs[e]`` is usable during that slot.
    """

    n_sats: int
    n_stations: int
    gsl: np.ndarray
    isl_pairs: np.ndarray
    isl_up: np.ndarray
    bandwidth: BandwidthProfile
    start: int = 0

    def __post_init__(self) -> None:
        self.gsl = np.asarray(self.gsl, dtype=np.int64).reshape(-1, self.n_stations)
        self.isl_pairs = np.asarray(self.isl_pairs, dtype=np.int64).reshape(-1, 2)
        self.isl_up = np.asarray(self.isl_up, dtype=bool).reshape(len(self.gsl), len(self.isl_pairs))
        self._sat_station: np.ndarray | None = None
        self._runs: np.ndarray | None = None

    @property
    def horizon(self) -> int:
        return len(self.gsl)

    @property
    def end(self) -> int:
        return self.start + self.horizon

    def _row(self, slot: int) -> int:
        t = slot - self.start
        if not 0 <= t < self.horizon:
            raise IndexError(f"slot {slot} outside contact table [{self.start}, {self.end})")
        return t

    def gsl_assignment(self, slot: int) -> dict[int, int]:
        """station -> satellite for the slot."""
        row = self.gsl[self._row(slot)]
        return {j: int(s) for j, s in enumerate(row) if s >= 0}

    def _station_of_sat(self) -> np.ndarray:
        if self._sat_station is None:
            table = np.full((self.horizon, self.n_sats), -1, dtype=np.int64)
            t_idx, j_idx = np.nonzero(self.gsl >= 0)
            table[t_idx, self.gsl[t_idx, j_idx]] = j_idx
            self._sat_station = table
        return self._sat_station

    def sat_station(self, slot: int) -> np.ndarray:
        """satellite -> station (or -1) for the slot."""
        return self._station_of_sat()[self._row(slot)]

    def isl_links(self, slot: int) -> list[tuple[int, int]]:
        up = self.isl_pairs[self.isl_up[self._row(slot)]]
        return [(int(a), int(b)) for a, b in up]

    def gsl_capacity(self, slot: int, sat: int, station: int) -> int:
        return self.bandwidth.gsl if self.gsl[self._row(slot), station] == sat else 0

    def isl_capacity(self, slot: int, a: int, b: int) -> int:
        return self.bandwidth.isl if (a, b) in set(self.isl_links(slot)) else 0

    def uplink_capacity(self, slot: int, station: int) -> int:
        self._row(slot)
        return self.bandwidth.uplink

    def remaining_contact(self, slot: int, sat: int) -> int:
        """Slots left in the satellite's current uninterrupted contact with the
        same station, counting this one (0 if not in contact)."""
        if self._runs is None:
            st = np.full((self.horizon + 1, self.n_sats), -1, dtype=np.int64)
            st[: self.horizon] = self._station_of_sat()
            runs = np.zeros((self.horizon + 1, self.n_sats), dtype=np.int64)
            for t in range(self.horizon - 1, -1, -1):
                cont = np.where(st[t] == st[t + 1], runs[t + 1], 0)
                runs[t] = np.where(st[t] >= 0, 1 + cont, 0)
            self._runs = runs
        return int(self._runs[self._row(slot), sat])

    def change_points(self) -> np.ndarray:
        """Absolute slots whose link state differs from the previous slot."""
        if self.horizon <= 1:
            return np.zeros(0, dtype=np.int64)
        diff = np.any(self.gsl[1:] != self.gsl[:-1], axis=1)
        diff |= np.any(self.isl_up[1:] != self.isl_up[:-1], axis=1)
        return np.flatnonzero(diff) + 1 + self.start

    def with_bandwidth(self, bandwidth: BandwidthProfile) -> "ContactTable":
        """Same geometry under different link rates."""
        return ContactTable(self.n_sats, self.n_stations, self.gsl, self.isl_pairs, self.isl_up, bandwidth, self.start)

    def window(self, start: int, horizon: int) -> "ContactTable":
        """Sub-table covering ``start .. start + horizon - 1`` (absolute slots)."""
        a = self._row(start)
        if horizon < 0 or a + horizon > self.horizon:
            raise IndexError("window exceeds contact table")
        return ContactTable(
            self.n_sats, self.n_stations, self.gsl[a : a + horizon],
            self.isl_pairs, self.isl_up[a : a + horizon], self.bandwidth, start,
        )


def build_contact_table(
    topology: ConstellationTopology,
    stations: Sequence[GroundStation],
    horizon: int,
    slot_seconds: float,
    bandwidth: BandwidthProfile,
    start: int = 0,
) -> ContactTable:
    """Visibility, greedy nearest-first station assignment and ISL ranges per slot.

    Stations are served in ascending id; each takes its nearest visible
    satellite that no lower-id station took this slot (ties by flat index).
    Assignment is recomputed from scratch every slot.
    """
    if horizon < 1:
        raise ConfigurationError("horizon must be >= 1")
    stations = sorted(stations, key=lambda s: s.id)
    if [s.id for s in stations] != list(range(len(stations))):
        raise ConfigurationError("station ids must be 0..m-1")
    n, m = topology.n, len(stations)
    pairs = grid_pairs(topology)
    gsl = np.full((horizon, m), -1, dtype=np.int64)
    isl_up = np.zeros((horizon, len(pairs)), dtype=bool)
    cfg = topology.config
    chunk = max(1, _CHUNK_SAMPLES // max(n, 1))
    for a in range(0, horizon, chunk):
        b = min(horizon, a + chunk)
        secs = topology.epoch_s + (start + np.arange(a, b)) * slot_seconds
        sat_pos = _positions_at(topology, secs)
        if len(pairs):
            d_isl = np.linalg.norm(sat_pos[:, pairs[:, 0]] - sat_pos[:, pairs[:, 1]], axis=2)
            isl_up[a:b] = d_isl <= cfg.max_isl_range_km
        if m == 0:
            continue
        st_pos = _station_positions(stations, secs)
        taken = np.zeros((b - a, n), dtype=bool)
        rows = np.arange(b - a)
        for j in range(m):
            d = np.linalg.norm(sat_pos - st_pos[:, j : j + 1, :], axis=2)
            d = np.where((d <= cfg.max_gsl_range_km) & ~taken, d, np.inf)
            best = np.argmin(d, axis=1)
            ok = np.isfinite(d[rows, best])
            gsl[a:b, j] = np.where(ok, best, -1)
            taken[rows[ok], best[ok]] = True
    return ContactTable(n, m, gsl, pairs, isl_up, bandwidth, start)


def manual_contact_table(
    n_sats: int,
    n_stations: int,
    horizon: int,
    bandwidth: BandwidthProfile,
    gsl: dict[int, dict[int, int]] | None = None,
    isl: Iterable[tuple[int, int]] = (),
    start: int = 0,
) -> ContactTable:
    """Hand-built table: ``gsl[slot] = {station: sat}``; ``isl`` undirected and always up."""
    table = np.full((horizon, n_stations), -1, dtype=np.int64)
    for slot, assign in (gsl or {}).items():
        for station, sat in assign.items():
            table[slot - start, station] = sat
    directed = sorted({(a, b) for a, b in isl} | {(b, a) for a, b in isl})
    pairs = np.array(directed, dtype=np.int64).reshape(-1, 2)
    up = np.ones((horizon, len(pairs)), dtype=bool)
    ct = ContactTable(n_sats, n_stations, table, pairs, up, bandwidth, start)
    for t in range(horizon):
        row = ct.gsl[t][ct.gsl[t] >= 0]
        if len(set(row.tolist())) != len(row):
            raise ConfigurationError(f"slot {t + start}: satellite assigned to two stations")
    return ct
