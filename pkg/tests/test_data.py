import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from probkaf.data import (
    LorenzConfig,
    TimeSeries,
    embed,
    load_csv,
    lorenz_generate,
    standardize,
    synthetic_wind,
    windows,
)


class TestLorenz:
    def test_origin_is_fixed_point(self):
        series = lorenz_generate(LorenzConfig(n_steps=50, initial_state=(0.0, 0.0, 0.0)))
        assert np.array_equal(series.values, np.zeros(50))

    def test_chaotic_regime_stays_bounded(self):
        series = lorenz_generate(LorenzConfig(n_steps=10_000))
        assert np.all(np.abs(series.values) < 25.0)

    def test_rk4_convergence_under_step_halving(self):
        coarse = lorenz_generate(LorenzConfig(dt=0.01, n_steps=100))
        fine = lorenz_generate(LorenzConfig(dt=0.005, n_steps=199))
        assert np.max(np.abs(fine.values[::2] - coarse.values)) < 1e-3

    def test_deterministic(self):
        a = lorenz_generate(LorenzConfig(n_steps=500))
        b = lorenz_generate(LorenzConfig(n_steps=500))
        assert np.array_equal(a.values, b.values)

    def test_length_one(self):
        series = lorenz_generate(LorenzConfig(n_steps=1))
        assert len(series) == 1 and series.values[0] == 1.0


class TestEmbed:
    def test_single_pair(self):
        ds = embed(TimeSeries(np.array([1.0, 2, 3, 4, 5, 6])), d=5)
        assert len(ds) == 1
        assert np.array_equal(ds.inputs[0], [1, 2, 3, 4, 5])
        assert ds.targets[0] == 6.0

    def test_pair_count_thousand_samples(self):
        ds = embed(TimeSeries(np.arange(1000.0)), d=5)
        assert len(ds) == 995

    def test_constant_series(self):
        ds = embed(TimeSeries(np.full(10, 3.25)), d=4)
        assert np.all(ds.inputs == 3.25) and np.all(ds.targets == 3.25)

    def test_too_short(self):
        with pytest.raises(ValueError):
            embed(TimeSeries(np.arange(4.0)), d=4)

    @settings(max_examples=50)
    @given(
        st.lists(st.floats(-1e6, 1e6), min_size=3, max_size=40),
        st.integers(min_value=1, max_value=5),
    )
    def test_reconstruction(self, values, d):
        if len(values) <= d:
            return
        series = TimeSeries(np.array(values))
        ds = embed(series, d)
        rebuilt = np.concatenate([series.values[:d], ds.targets])
        assert np.array_equal(rebuilt, series.values)


class TestStandardize:
    def test_two_point_series(self):
        out, mean, std = standardize(TimeSeries(np.array([0.0, 2.0])))
        assert np.array_equal(out.values, [-1.0, 1.0])
        assert mean == 1.0 and std == 1.0

    def test_idempotent(self):
        rng = np.random.default_rng(0)
        first, _, _ = standardize(TimeSeries(rng.normal(size=200)))
        second, mean, std = standardize(first)
        assert np.max(np.abs(second.values - first.values)) < 1e-10
        assert abs(mean) < 1e-10 and abs(std - 1.0) < 1e-10

    def test_constant_series_rejected(self):
        with pytest.raises(ValueError):
            standardize(TimeSeries(np.array([5.0, 5.0, 5.0])))

    def test_moments(self):
        out, _, _ = standardize(TimeSeries(np.random.default_rng(1).normal(2, 3, size=500)))
        assert abs(np.mean(out.values)) < 1e-10
        assert abs(np.std(out.values) - 1.0) < 1e-10

    @settings(max_examples=50)
    @given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=50))
    def test_invertible(self, values):
        v = np.array(values)
        if np.std(v) < 1e-9:
            return
        out, mean, std = standardize(TimeSeries(v))
        assert np.max(np.abs(out.values * std + mean - v)) < 1e-12 * max(1.0, np.max(np.abs(v)))


class TestWindows:
    def test_two_windows_of_25(self):
        got = windows(TimeSeries(np.arange(50.0)), width=25, stride=25)
        assert len(got) == 2
        assert np.array_equal(got[0].values, np.arange(25.0))
        assert np.array_equal(got[1].values, np.arange(25.0, 50.0))

    def test_exact_fit_single_window(self):
        got = windows(TimeSeries(np.arange(25.0)), width=25, stride=1)
        assert len(got) == 1

    def test_width_too_large(self):
        with pytest.raises(ValueError):
            windows(TimeSeries(np.arange(10.0)), width=25, stride=1)

    def test_partial_window_dropped(self):
        got = windows(TimeSeries(np.arange(53.0)), width=25, stride=25)
        assert len(got) == 2


class TestLoadCsv(object):
    def test_single_column(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("value\n1.0\n2.0\n")
        series = load_csv(str(p))
        assert np.array_equal(series.values, [1.0, 2.0])

    def test_two_column(self, tmp_path):
        p = tmp_path / "b.csv"
        p.write_text("t,value\n0,1.5\n1,2.5\n2,-3.0\n")
        assert np.array_equal(load_csv(str(p)).values, [1.5, 2.5, -3.0])

    def test_crlf(self, tmp_path):
        p = tmp_path / "c.csv"
        p.write_bytes(b"value\r\n1.0\r\n2.0\r\n")
        assert np.array_equal(load_csv(str(p)).values, [1.0, 2.0])

    def test_empty_data_section(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("value\n")
        with pytest.raises(ValueError, match="no data rows"):
            load_csv(str(p))

    def test_bad_row_reports_number(self, tmp_path):
        p = tmp_path / "e.csv"
        p.write_text("value\n1.0\nabc\n")
        with pytest.raises(ValueError, match="row 3"):
            load_csv(str(p))

    def test_non_finite_rejected(self, tmp_path):
        p = tmp_path / "f.csv"
        p.write_text("value\n1.0\nnan\n")
        with pytest.raises(ValueError, match="row 3"):
            load_csv(str(p))

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_csv(str(tmp_path / "nope.csv"))


class TestSyntheticWind:
    def test_seeded_and_reproducible(self):
        a = synthetic_wind(400, seed=9)
        b = synthetic_wind(400, seed=9)
        c = synthetic_wind(400, seed=10)
        assert np.array_equal(a.values, b.values)
        assert not np.array_equal(a.values, c.values)

    def test_finite_and_sized(self):
        series = synthetic_wind(2500, seed=1)
        assert len(series) == 2500
        assert np.all(np.isfinite(series.values))
