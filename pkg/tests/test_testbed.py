import math

import numpy as np
import pytest

from cellaug.core import heard_count_histogram
from cellaug.testbed import TestbedSpec as SurveySpec
from cellaug.testbed import (
    Tower,
    dbm_to_asu,
    default_desk_spec,
    generate,
    received_dbm,
    spec_from_file,
)
from cellaug.util import ConfigError


def poisson_binomial(probabilities):
    """Distribution of the number of successes of independent Bernoullis.

    Independent oracle for the generator's heard-count histogram (valid
    while the per-scan cap never binds).
    """
    dist = np.array([1.0])
    for p in probabilities:
        dist = np.convolve(dist, [1.0 - p, p])
    return dist


def spec_with(towers, sigma=0.0, scans=10, seed=1, points=((0.0, 0.0), (5.0, 0.0)), **kw):
    defaults = dict(
        name="t",
        area=(10.0, 10.0),
        towers=tuple(towers),
        path_loss_exponent=2.0,
        shadow_sigma_db=sigma,
        sensitivity_dbm=-111.0,
        scans_per_location=scans,
        seed=seed,
        points=tuple(points) if points else None,
    )
    defaults.update(kw)
    return SurveySpec(**defaults)


class TestPathLossArithmetic:
    def test_asu_step_at_doubled_distance(self):
        # P=-50 dBm, n=2: moving from 4 m to 8 m loses 6.02 dB = 3 ASU steps
        near = Tower("A", (4.0, 0.0), -50.0)
        far_silent = Tower("B", (1000.0, 1000.0), -50.0)  # all locations: below floor
        spec = spec_with([near, far_silent], points=((0.0, 0.0), (-4.0, 0.0)))
        db = generate(spec)
        asu_at = {
            loc.location_id: loc.scans[0].asu_of("A") for loc in db.locations
        }
        assert asu_at[0] == dbm_to_asu(-50.0 - 20.0 * math.log10(4.0))
        assert asu_at[1] == dbm_to_asu(-50.0 - 20.0 * math.log10(8.0))
        assert asu_at[0] - asu_at[1] == 3

    def test_tower_beyond_sensitivity_never_heard(self):
        near = Tower("A", (1.0, 0.0), -50.0)
        weak = Tower("B", (0.0, 8.0), -95.0)  # -95 - 20*log10(8) = -113.1 < -111
        db = generate(spec_with([near, weak], points=((0.0, 0.0),) * 1 + ((0.1, 0.0),)))
        for loc in db.locations:
            for scan in loc.scans:
                assert scan.asu_of("B") is None

    def test_coincident_tower_clamped_to_reference_distance(self):
        t = Tower("A", (0.0, 0.0), -60.0)
        assert received_dbm(t, (0.0, 0.0), 3.0) == -60.0

    def test_dbm_to_asu_clipping(self):
        assert dbm_to_asu(-150.0) == 0
        assert dbm_to_asu(10.0) == 31
        assert dbm_to_asu(-113.0) == 0
        assert dbm_to_asu(-51.0) == 31


class TestGenerate:
    def test_deterministic(self):
        spec = default_desk_spec()
        assert generate(spec) == generate(spec)

    def test_scan_cap_and_asu_range(self):
        towers = [Tower(f"T{i:02d}", (float(i), 0.0), -50.0) for i in range(12)]
        db = generate(spec_with(towers, sigma=2.0, points=((0.0, 1.0), (3.0, 1.0))))
        for loc in db.locations:
            for scan in loc.scans:
                assert len(scan.readings) == 7  # 12 strong towers, cap binds
                for _, asu in scan.readings:
                    assert 0 <= asu <= 31

    def test_strongest_towers_kept_under_cap(self):
        # 8 towers at increasing distance, no shadowing: the nearest 7 survive
        towers = [Tower(f"T{i}", (float(i + 1), 0.0), -50.0) for i in range(8)]
        db = generate(spec_with(towers, points=((0.0, 0.0), (0.0, 0.1))))
        heard = set(db.locations[0].scans[0].towers)
        assert heard == {f"T{i}" for i in range(7)}  # T7 is the farthest

    def test_all_locations_hear_nothing_raises(self):
        towers = [Tower("A", (500.0, 0.0), -80.0), Tower("B", (0.0, 500.0), -80.0)]
        with pytest.raises(ValueError, match="hears no towers"):
            generate(spec_with(towers))

    def test_heard_histogram_matches_poisson_binomial(self):
        # towers straddling the sensitivity floor; cap never binds (5 towers)
        towers = [
            Tower("A", (3.0, 0.0), -50.0),
            Tower("B", (0.0, 40.0), -72.0),
            Tower("C", (50.0, 0.0), -74.0),
            Tower("D", (0.0, -60.0), -73.0),
            Tower("E", (80.0, 80.0), -70.0),
        ]
        sigma = 3.0
        spec = spec_with(towers, sigma=sigma, scans=1000, points=((0.0, 0.0), (1.0, 0.0)))
        db = generate(spec)
        loc = db.locations[0]
        hear_probs = []
        for tower in towers:
            det = received_dbm(tower, loc.coordinates, spec.path_loss_exponent)
            z = (det - spec.sensitivity_dbm) / sigma
            hear_probs.append(0.5 * (1.0 + math.erf(z / math.sqrt(2.0))))
        oracle = poisson_binomial(hear_probs)
        hist = heard_count_histogram(loc)
        for k, expected in enumerate(oracle):
            assert abs(hist.get(k, 0.0) - expected) < 0.05

    def test_histogram_non_degenerate_near_floor(self):
        db = generate(default_desk_spec())
        hist = heard_count_histogram(db.locations[0])
        assert len(hist) >= 2


class TestDefaultDeskSpec:
    def test_thirty_six_grid_points(self):
        spec = default_desk_spec()
        assert len(spec.reference_points()) == 36
        db = generate(spec)
        assert len(db.locations) == 36
        assert db.grid_cell_m == 2.0

    def test_universe_within_ten_towers(self):
        db = generate(default_desk_spec())
        assert db.n_towers <= 10

    def test_database_satisfies_invariants(self):
        # construction through from_locations validates everything
        db = generate(default_desk_spec())
        assert db.tower_universe == tuple(sorted(db.tower_universe))
        for loc in db.locations:
            assert 1 <= len(loc.scans[0].readings) <= 7


class TestSpecValidation:
    def test_too_few_towers(self):
        with pytest.raises(ConfigError, match="at least 2 towers"):
            spec_with([Tower("A", (0.0, 0.0), -50.0)])

    def test_needs_layout(self):
        towers = [Tower("A", (0.0, 0.0), -50.0), Tower("B", (1.0, 0.0), -50.0)]
        with pytest.raises(ConfigError, match="grid_spacing_m or explicit points"):
            spec_with(towers, points=None)

    def test_heard_cap_fixed_at_seven(self):
        towers = [Tower("A", (0.0, 0.0), -50.0), Tower("B", (1.0, 0.0), -50.0)]
        with pytest.raises(ConfigError, match="fixed at 7"):
            spec_with(towers, heard_cap=5)

    def test_needs_two_locations(self):
        towers = [Tower("A", (0.0, 0.0), -50.0), Tower("B", (1.0, 0.0), -50.0)]
        with pytest.raises(ConfigError, match="at least 2 reference locations"):
            spec_with(towers, points=((0.0, 0.0),))


class TestSpecFromFile:
    def test_parses_complete_file(self, tmp_path):
        path = tmp_path / "tb.cfg"
        path.write_text(
            "name = mini\n"
            "area.width = 10\n"
            "area.height = 8\n"
            "grid.spacing = 4\n"
            "path_loss_exponent = 2.5\n"
            "shadow_sigma_db = 3\n"
            "sensitivity_dbm = -111\n"
            "scans_per_location = 12\n"
            "seed = 5\n"
            "tower.A = 1, 2, -50\n"
            "tower.B = 9, 7, -60\n"
        )
        spec = spec_from_file(path)
        assert spec.name == "mini"
        assert spec.area == (10.0, 8.0)
        assert len(spec.towers) == 2
        assert spec.towers[0].tower_id == "A"
        db = generate(spec)
        assert len(db.locations) == len(spec.reference_points())

    def test_missing_keys_rejected(self, tmp_path):
        path = tmp_path / "tb.cfg"
        path.write_text("area.width = 10\ntower.A = 1, 2, -50\n")
        with pytest.raises(ConfigError, match="missing testbed config keys"):
            spec_from_file(path)

    def test_bad_tower_line_rejected(self, tmp_path):
        path = tmp_path / "tb.cfg"
        path.write_text(
            "area.width = 10\narea.height = 10\ngrid.spacing = 5\n"
            "path_loss_exponent = 2\nshadow_sigma_db = 0\nsensitivity_dbm = -111\n"
            "scans_per_location = 1\nseed = 0\n"
            "tower.A = 1, 2\n"
        )
        with pytest.raises(ConfigError, match="tower.A"):
            spec_from_file(path)

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "tb.cfg"
        path.write_text(
            "area.width = 10\narea.height = 10\ngrid.spacing = 5\n"
            "path_loss_exponent = 2\nshadow_sigma_db = 0\nsensitivity_dbm = -111\n"
            "scans_per_location = 1\nseed = 0\nbogus = 1\n"
            "tower.A = 1, 2, -50\ntower.B = 3, 4, -50\n"
        )
        with pytest.raises(ConfigError, match="unknown testbed config key"):
            spec_from_file(path)
