import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from leodl.constellation import (
    EARTH_RADIUS_KM,
    SHELL_PRESETS,
    STATION_PRESETS,
    BandwidthProfile,
    ConfigurationError,
    GroundStation,
    SatelliteId,
    ShellConfig,
    build_contact_table,
    generate_walker_delta,
    grid_pairs,
    isl_neighbors,
    manual_contact_table,
    propagate,
    station_position,
    visible_satellites,
)


def test_shell1_preset_size():
    cfg = SHELL_PRESETS["shell1"]
    assert (cfg.orbit_count, cfg.sats_per_orbit, cfg.size) == (72, 22, 1584)
    assert generate_walker_delta(cfg).n == 1584


def test_axis_alignment_at_epoch():
    topo = generate_walker_delta(ShellConfig(1, 1, 550.0, 0.0))
    np.testing.assert_allclose(propagate(topo, 0), [[6921.0, 0.0, 0.0]], atol=1e-9)


def test_walker_layout_angles():
    cfg = ShellConfig(4, 3, 550.0, 53.0, phasing_factor=1)
    topo = generate_walker_delta(cfg)
    i = SatelliteId.from_grid(2, 1, 3).flat_index
    assert math.degrees(topo.raan_rad[i]) == pytest.approx(180.0)
    assert math.degrees(topo.anomaly_rad[i]) == pytest.approx(120.0 + 2 * 360.0 / 12)


@settings(max_examples=30, deadline=None)
@given(t=st.floats(0, 20000), orbits=st.integers(1, 6), per=st.integers(1, 6))
def test_radius_and_inclination_bound(t, orbits, per):
    topo = generate_walker_delta(ShellConfig(orbits, per, 550.0, 53.0))
    pos = propagate(topo, t)
    np.testing.assert_allclose(np.linalg.norm(pos, axis=1), 6921.0)
    assert np.all(np.abs(pos[:, 2]) <= 6921.0 * math.sin(math.radians(53.0)) + 1e-6)


def test_period_matches_kepler(desk_topology):
    r = EARTH_RADIUS_KM + 550.0
    assert desk_topology.period_s == pytest.approx(2 * math.pi * math.sqrt(r**3 / 398600.4418))
    np.testing.assert_allclose(propagate(desk_topology, desk_topology.period_s), propagate(desk_topology, 0), atol=1e-6)


@pytest.mark.parametrize(
    "bad",
    [
        dict(orbit_count=0, sats_per_orbit=3),
        dict(orbit_count=3, sats_per_orbit=3, inclination_deg=181.0),
        dict(orbit_count=3, sats_per_orbit=3, phasing_factor=3),
        dict(orbit_count=3, sats_per_orbit=3, max_gsl_range_km=0.0),
    ],
)
def test_invalid_shell_rejected(bad):
    args = dict(altitude_km=550.0, inclination_deg=53.0) | bad
    with pytest.raises(ConfigurationError):
        generate_walker_delta(ShellConfig(**args))


def test_station_validation_and_longitude_wrap():
    with pytest.raises(ConfigurationError):
        GroundStation(0, 91.0, 0.0)
    assert GroundStation(0, 0.0, 190.0).longitude_deg == pytest.approx(-170.0)


def test_station_rotates_with_earth():
    s = GroundStation(0, 0.0, 0.0)
    np.testing.assert_allclose(station_position(s, 0.0), [EARTH_RADIUS_KM, 0, 0], atol=1e-9)
    quarter = (math.pi / 2) / 7.2921159e-5
    np.testing.assert_allclose(station_position(s, quarter), [0, EARTH_RADIUS_KM, 0], atol=1e-6)


@settings(max_examples=40, deadline=None)
@given(orbits=st.integers(1, 6), per=st.integers(1, 6), data=st.data())
def test_grid_neighbours_form_torus(orbits, per, data):
    topo = generate_walker_delta(ShellConfig(orbits, per, 550.0, 53.0))
    flat = data.draw(st.integers(0, topo.n - 1))
    sat = topo.sat(flat)
    nbs = isl_neighbors(topo, sat)
    assert sat not in nbs and len(set(nbs)) == len(nbs) <= 4
    for nb in nbs:
        d_orbit = (nb.orbit_index - sat.orbit_index) % orbits
        d_slot = (nb.slot_index - sat.slot_index) % per
        assert (d_orbit == 0 and d_slot in (1, per - 1)) or (d_slot == 0 and d_orbit in (1, orbits - 1))
        assert sat in isl_neighbors(topo, nb)
    pairs = {tuple(p) for p in grid_pairs(topo).tolist()}
    assert all((b, a) in pairs for a, b in pairs)


def test_visibility_matches_distance(desk_topology):
    pos = propagate(desk_topology, 0)
    station = STATION_PRESETS["single"][0]
    d = np.linalg.norm(pos - station_position(station, 0.0), axis=1)
    assert visible_satellites(pos, station, 1260.0) == set(np.flatnonzero(d <= 1260.0).tolist())
    assert 0 in visible_satellites(propagate(desk_topology, 120), station, 1260.0, 120.0)


def test_contact_assignment_is_nearest_and_injective(desk_topology):
    stations = list(STATION_PRESETS["cities4"]) + [GroundStation(4, 31.3, 121.5, "near-shanghai")]
    bw = BandwidthProfile(1000, 1000, 1000)
    ct = build_contact_table(desk_topology, stations, 3000, 1.0, bw)
    for t in range(0, 3000, 7):
        row = ct.gsl[t][ct.gsl[t] >= 0]
        assert len(set(row.tolist())) == len(row)
    # station 0 gets its nearest visible satellite
    for t in range(0, 3000, 37):
        pos = propagate(desk_topology, t)
        vis = visible_satellites(pos, stations[0], 1260.0, float(t))
        if vis:
            d = np.linalg.norm(pos - station_position(stations[0], float(t)), axis=1)
            assert ct.gsl[t, 0] == min(vis, key=lambda i: (d[i], i))
        else:
            assert ct.gsl[t, 0] == -1


def test_contact_table_rejects_bad_station_ids(desk_topology):
    with pytest.raises(ConfigurationError):
        build_contact_table(desk_topology, [GroundStation(3, 0.0, 0.0)], 5, 1.0, BandwidthProfile(1, 1, 1))


def test_bandwidth_units():
    bw = BandwidthProfile.from_gbps(1, 5, 10, slot_seconds=1.0)
    assert (bw.gsl, bw.isl, bw.uplink) == (1000, 5000, 10000)
    assert BandwidthProfile.from_gbps(0.4, 1, 1, slot_seconds=0.5).gsl == 200


def test_remaining_contact_and_change_points():
    bw = BandwidthProfile(1, 1, 1)
    ct = manual_contact_table(2, 1, 8, bw, gsl={0: {0: 0}, 1: {0: 0}, 2: {0: 1}, 5: {0: 1}, 6: {0: 1}})
    assert [ct.remaining_contact(t, 0) for t in range(8)] == [2, 1, 0, 0, 0, 0, 0, 0]
    assert [ct.remaining_contact(t, 1) for t in range(8)] == [0, 0, 1, 0, 0, 2, 1, 0]
    assert ct.change_points().tolist() == [2, 3, 5, 7]
    assert ct.gsl_assignment(5) == {0: 1}
    assert ct.sat_station(2).tolist() == [-1, 0]


def test_manual_table_rejects_double_assignment():
    with pytest.raises(ConfigurationError):
        manual_contact_table(2, 2, 1, BandwidthProfile(1, 1, 1), gsl={0: {0: 1, 1: 1}})


def test_window_and_bandwidth_views(desk_topology):
    ct = build_contact_table(desk_topology, STATION_PRESETS["single"], 50, 1.0, BandwidthProfile(1, 1, 1))
    sub = ct.window(10, 20)
    assert (sub.start, sub.horizon) == (10, 20)
    assert sub.gsl_assignment(15) == ct.gsl_assignment(15)
    assert ct.with_bandwidth(BandwidthProfile(7, 8, 9)).gsl_capacity(0, int(ct.gsl[0, 0]), 0) == 7
    with pytest.raises(IndexError):
        ct.window(40, 20)
