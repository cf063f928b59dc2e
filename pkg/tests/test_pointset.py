import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.spatial import cKDTree

from fkquasi import pointset as ps
from fkquasi.errors import ConfigurationError, DeloneError, EmptySetError

import oracles


def test_periodic_1d():
    s = ps.build_periodic(1, 2 * math.pi, (0.0, 20 * math.pi))
    assert len(s) == 11
    np.testing.assert_allclose(s.points[:, 0], 2 * math.pi * np.arange(11), atol=1e-12)
    assert s.packing_radius == pytest.approx(math.pi)
    assert s.covering_radius == pytest.approx(math.pi)
    assert ps.radii(s) == pytest.approx((math.pi, math.pi))


def test_periodic_2d():
    s = ps.build_periodic(2, 1.0, ([0, 0], [3, 3]))
    assert len(s) == 16
    assert s.packing_radius == 0.5
    assert s.covering_radius == pytest.approx(math.sqrt(2) / 2)


@pytest.mark.parametrize("spacing", [-1.0, 0.0])
def test_periodic_bad_spacing(spacing):
    with pytest.raises(ConfigurationError):
        ps.build_periodic(1, spacing, (0, 10))


def test_empty_extent():
    with pytest.raises(ConfigurationError):
        ps.build_periodic(1, 1.0, (3, 3))
    with pytest.raises(EmptySetError):
        ps.build_cut_and_project("fibonacci", (0.1, 0.2))


def test_fibonacci_gaps_two_values():
    s = ps.build_cut_and_project("fibonacci", (0, 100))
    g = np.diff(s.points[:, 0])
    vals = np.unique(np.round(g, 9))
    assert len(vals) == 2
    assert vals[0] == pytest.approx(1.0, abs=1e-12)
    assert vals[1] / vals[0] == pytest.approx(ps.PHI, abs=1e-9)


def test_fibonacci_gap_frequencies():
    s = ps.build_cut_and_project("fibonacci", (0, 1000))
    g = np.diff(s.points[:, 0])
    n_long = np.sum(g > 1.3)
    n_short = np.sum(g < 1.3)
    # long gaps are the frequent ones
    assert n_long / n_short == pytest.approx(ps.PHI, rel=0.02)


def test_fibonacci_matches_strip_construction():
    ours = ps.build_cut_and_project("fibonacci", (-60, 60)).points[:, 0]
    ref = oracles.fibonacci_strip(-60, 60)
    g_ours = np.diff(ours)
    g_ref = np.diff(ref[(ref > -300) & (ref < 300)])
    # same gap lengths and the same language of gap words
    word = lambda g: "".join("L" if x > 1.3 else "S" for x in g)
    assert set(np.round(g_ours, 9)) == set(np.round(g_ref, 9))
    for k in range(1, 9):
        assert oracles.factors(word(g_ours), k) <= oracles.factors(word(g_ref), k)


def test_fibonacci_language_equals_substitution_word():
    g = np.diff(ps.build_cut_and_project("fibonacci", (-400, 400)).points[:, 0])
    ours = "".join("L" if x > 1.3 else "S" for x in g)
    ref = oracles.fibonacci_word(5000)
    for k in range(1, 13):
        assert oracles.factors(ours, k) == oracles.factors(ref, k)


def test_fibonacci_radii():
    s = ps.build_cut_and_project("fibonacci", (0, 300))
    r, R = ps.radii(s)
    assert r == pytest.approx(0.5, abs=1e-12)
    assert R == pytest.approx(ps.PHI / 2, abs=1e-9)


def test_radii_two_points():
    s = ps.DeloneSet(np.array([[0.0], [1.0]]), 0.5, 0.5, ps.Box([0], [1]))
    with pytest.raises(DeloneError):
        ps.radii(s)


def test_fibonacci_self_affinity_attached():
    s = ps.build_cut_and_project("fibonacci", (0, 50))
    np.testing.assert_allclose(s.self_affinity, [[ps.PHI]])
    assert s.smallest_expansion > 1


def test_ammann_beenker_basic():
    s = ps.build_cut_and_project("ammann-beenker", {"radius": 15.0})
    np.testing.assert_allclose(s.self_affinity, ps.SILVER * np.eye(2))
    d = cKDTree(s.points).query(s.points, k=2)[0][:, 1]
    # AB vertices: minimal distance is the short diagonal 2 sin(pi/8) of the rhomb
    assert d.min() == pytest.approx(2 * math.sin(math.pi / 8), abs=1e-9)


def test_ammann_beenker_census_stable():
    small = ps.build_cut_and_project("ammann-beenker", {"radius": 30.0})
    large = ps.build_cut_and_project("ammann-beenker", {"radius": 60.0})
    c_small = ps.pair_census(small, 2.0)
    c_large = ps.pair_census(large, 2.0)
    assert c_small == c_large
    assert len(c_small) == 56
    assert c_small == oracles.pair_census_bruteforce(small.points, 2.0)


@pytest.mark.parametrize("name,extent", [("fibonacci", (0, 200)), ("ammann-beenker", {"radius": 20.0})])
def test_delone_invariants(name, extent):
    s = ps.build_cut_and_project(name, extent)
    tree = cKDTree(s.points)
    d = tree.query(s.points, k=2)[0][:, 1]
    assert d.min() >= 2 * s.packing_radius - 1e-12
    inner = s.extent.shrink(s.covering_radius)
    X = ps.sample_grid(inner, s.packing_radius / 3)
    assert tree.query(X)[0].max() <= s.covering_radius + 1e-9


def test_self_affinity_witness():
    s = ps.build_cut_and_project("fibonacci", (-300, 300))
    x = s.points[:, 0]
    y = ps.inflate(s)[:, 0]
    y = y[(y > -250) & (y < 250)]

    def pattern(pts, c, r=10.0):
        near = pts[np.abs(pts - c) <= r]
        return np.round(near - c, 8)

    mid = x[(x > -150) & (x < 150)]
    for c in y[np.abs(y) < 100]:
        pat = pattern(y, c)
        assert any(np.array_equal(pat, pattern(x, p)) for p in mid)


def test_address_map_fibonacci():
    s = ps.build_cut_and_project("fibonacci", (-20, 20))
    t = ps.address_map(s)
    assert t.rank == 2
    np.testing.assert_allclose(t.projection, [[1.0, ps.PHI]])
    np.testing.assert_allclose(t.reconstruct(), s.points, atol=1e-9)
    np.testing.assert_array_equal(t.addresses[np.argmin(np.abs(s.points[:, 0]))], [0, 0])
    assert np.isfinite(t.lipschitz_estimate) and t.lipschitz_estimate > 0
    x = t.lookup([1, 1])[0]
    assert x == pytest.approx(1 + ps.PHI)


def test_address_lipschitz_bound():
    s = ps.build_cut_and_project("fibonacci", (0, 200))
    t = ps.address_map(s)
    tree = cKDTree(s.points)
    for i, j in tree.query_pairs(3 * s.covering_radius):
        da = np.linalg.norm(t.addresses[i] - t.addresses[j])
        dx = np.linalg.norm(s.points[i] - s.points[j])
        assert da <= t.lipschitz_estimate * dx + 1e-12


def test_address_map_periodic():
    s = ps.build_periodic(1, 0.7, (0, 7))
    t = ps.address_map(s)
    k = 4
    row = np.flatnonzero(t.addresses[:, 0] == k)[0]
    assert s.points[row, 0] == pytest.approx(k * 0.7)
    np.testing.assert_allclose(t.projection, [[0.7]])


def test_address_map_unsupported():
    s = ps.build_cut_and_project("ammann-beenker", {"radius": 5.0})
    with pytest.raises(NotImplementedError):
        ps.address_map(s)


def test_csv_round_trip(tmp_path):
    s = ps.build_cut_and_project("ammann-beenker", {"radius": 8.0})
    path = tmp_path / "pts.csv"
    ps.save_csv(s, path)
    back = ps.load_csv(path)
    assert np.array_equal(back, s.points)


def test_points_sorted_and_deterministic():
    a = ps.build_cut_and_project("ammann-beenker", {"radius": 10.0}).points
    b = ps.build_cut_and_project("ammann-beenker", {"radius": 10.0}).points
    assert np.array_equal(a, b)
    order = np.lexsort(a.T[::-1])
    assert np.array_equal(order, np.arange(len(a)))


@given(st.floats(0.1, 5.0), st.integers(1, 3))
def test_periodic_property(spacing, d):
    extent = (np.zeros(d), np.full(d, 4 * spacing))
    s = ps.build_periodic(d, spacing, extent)
    assert len(s) == 5**d
    assert s.packing_radius == pytest.approx(spacing / 2)
    assert s.covering_radius == pytest.approx(spacing * math.sqrt(d) / 2)


@given(st.floats(-500, 500), st.floats(30, 120))
def test_fibonacci_property(lo, length):
    s = ps.build_cut_and_project("fibonacci", (lo, lo + length))
    g = np.diff(s.points[:, 0])
    assert np.all(np.isclose(g, 1.0) | np.isclose(g, ps.PHI))
    t = ps.address_map(s)
    assert np.max(np.abs(t.reconstruct() - s.points)) < 1e-9
