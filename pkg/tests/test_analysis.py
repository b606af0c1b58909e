import math

import numpy as np
import pytest

from miisac import (
    NoCrossover,
    coil_constant,
    effective_noise_variance,
    find_resolution_crossover,
    isac_gain,
    resolution_sweep,
    run_crb_validation,
    tof_resolution,
)

C_LIGHT = 299792458.0


class TestTofResolution:
    def test_narrowband_constant(self):
        assert tof_resolution(1e3) == pytest.approx(149_896.229, rel=1e-12)

    def test_uwb_constant(self):
        assert tof_resolution(500e6) == pytest.approx(0.299792458, rel=1e-12)

    def test_inverse_proportionality(self):
        assert tof_resolution(2e3) == pytest.approx(0.5 * tof_resolution(1e3), rel=1e-14)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            tof_resolution(0.0)


class TestResolutionSweep:
    def test_slope_and_ordering(self, coil, carrier, frame_spec, ideal_noise):
        grid = [1.0, 2.0, 5.0, 10.0, 20.0, 30.0]
        records = resolution_sweep(grid, coil, carrier, frame_spec, ideal_noise)
        res = np.array([rec.mi_resolution_m for rec in records])
        slope = np.polyfit(np.log(grid), np.log(res), 1)[0]
        assert slope == pytest.approx(4.0, abs=1e-3)
        assert np.all(np.diff(res) > 0)
        # beats 500 MHz UWB everywhere in the operating range, and
        # narrowband ToF by a mile
        assert np.all(res < 0.3)
        assert np.all(res < 149_896.0)

    def test_three_orders_finer_at_10m(self, coil, carrier, frame_spec, ideal_noise):
        records = resolution_sweep([10.0], coil, carrier, frame_spec, ideal_noise)
        assert records[0].mi_resolution_m / 0.3 < 1e-3

    def test_crossover_matches_closed_form(self, coil, carrier, frame_spec, ideal_noise):
        # independent algebraic inversion of sqrt(CRB(r*)) = c/(2B)
        target = tof_resolution(500e6)
        sigma_w = math.sqrt(effective_noise_variance(ideal_noise))
        c = coil_constant(coil, carrier)
        expected = (target * math.sqrt(18.0 * 100 * 1.0) * c / sigma_w) ** 0.25
        found = find_resolution_crossover(target, coil, carrier, frame_spec, ideal_noise)
        assert found == pytest.approx(expected, abs=2e-6)
        assert found == pytest.approx(94.52142, abs=1e-4)

    def test_narrowband_crossover_beyond_bracket(self, coil, carrier, frame_spec, ideal_noise):
        with pytest.raises(NoCrossover):
            find_resolution_crossover(
                tof_resolution(1e3), coil, carrier, frame_spec, ideal_noise
            )

    def test_crossover_below_bracket(self, coil, carrier, frame_spec, ideal_noise):
        with pytest.raises(NoCrossover):
            find_resolution_crossover(1e-15, coil, carrier, frame_spec, ideal_noise)


class TestIsacGain:
    def test_half_frame_single_axis_limit(self):
        rec = isac_gain(0.5, math.inf, axes="single")
        assert rec.time_mux_gain_db == pytest.approx(10.0 * math.log10(2.0), abs=1e-12)
        assert rec.structural_gain_db == 0.0
        assert rec.total_gain_db == pytest.approx(3.0102999566398121, abs=1e-12)

    def test_triaxial_structural_band(self):
        for snr_db in (20.0, 30.0, 60.0, math.inf):
            rec = isac_gain(0.5, snr_db, axes="triaxial")
            assert 6.0 <= rec.structural_gain_db <= 9.0
            assert 9.0 <= rec.total_gain_db <= 12.0
        assert isac_gain(0.5, math.inf, "triaxial").structural_gain_db == pytest.approx(
            10.0 * math.log10(6.0), abs=1e-12
        )

    def test_alpha_point_one_limit(self):
        rec = isac_gain(0.1, math.inf, axes="single")
        assert rec.total_gain_db == pytest.approx(10.0, abs=1e-12)

    def test_decomposition_sums_exactly(self):
        for alpha in (0.1, 0.2, 0.3, 0.4, 0.5):
            for snr in (5.0, 20.0, math.inf):
                for axes in ("single", "triaxial"):
                    rec = isac_gain(alpha, snr, axes=axes)
                    assert rec.total_gain_db == rec.time_mux_gain_db + rec.structural_gain_db

    def test_monotonicity(self):
        # non-increasing in alpha
        totals = [isac_gain(a, 20.0, "triaxial").total_gain_db for a in (0.1, 0.2, 0.3, 0.5)]
        assert all(a >= b for a, b in zip(totals, totals[1:]))
        # non-decreasing in SNR
        totals = [isac_gain(0.5, s, "triaxial").total_gain_db for s in (0.0, 5.0, 10.0, 20.0)]
        assert all(a <= b for a, b in zip(totals, totals[1:]))
        # non-decreasing in axis count
        assert (
            isac_gain(0.5, 20.0, "single").total_gain_db
            <= isac_gain(0.5, 20.0, "triaxial").total_gain_db
        )

    def test_structural_clamped_at_zero(self):
        assert isac_gain(0.5, -20.0, axes="single").structural_gain_db == 0.0

    def test_rejects_bad_alpha(self):
        with pytest.raises(ValueError):
            isac_gain(1.0, 20.0)


class TestCrbValidationSweep:
    def test_efficiency_and_offset(self, coil, carrier, frame_spec):
        trials = 500
        sweep = run_crb_validation(
            coil, carrier, frame_spec, [5.0, 10.0, 20.0], trials=trials, base_seed=123
        )
        floor = 1.0 - 3.0 / math.sqrt(trials)
        for cell in sweep.cells:
            assert cell.n_nonconverged == 0
            assert floor <= cell.efficiency <= 1.15
        # practical front end sits 9 dB above ideal (in variance dB) at every r
        for r in sweep.r_grid:
            ci, cp = sweep.cell(r, "ideal"), sweep.cell(r, "practical")
            crb_offset = 10.0 * math.log10(cp.sqrt_crb_m**2 / ci.sqrt_crb_m**2)
            assert crb_offset == pytest.approx(9.0, abs=1e-9)
            rmse_offset = 10.0 * math.log10(cp.rmse_m**2 / ci.rmse_m**2)
            assert rmse_offset == pytest.approx(9.0, abs=0.5)
        # ... and the penalty leaves the r^4 slope of the RMSE curve alone
        log_r = np.log(sweep.r_grid)
        for profile in ("ideal", "practical"):
            rmse = [sweep.cell(r, profile).rmse_m for r in sweep.r_grid]
            slope = np.polyfit(log_r, np.log(rmse), 1)[0]
            assert slope == pytest.approx(4.0, abs=0.1)
            # both noise profiles stay sub-millimeter at 10 m
            assert sweep.cell(10.0, profile).rmse_m < 1e-3

    def test_deterministic(self, coil, carrier, frame_spec):
        a = run_crb_validation(coil, carrier, frame_spec, [10.0], trials=500, base_seed=7)
        b = run_crb_validation(coil, carrier, frame_spec, [10.0], trials=500, base_seed=7)
        assert a == b

    def test_thread_count_does_not_change_results(self, coil, carrier, frame_spec):
        serial = run_crb_validation(
            coil, carrier, frame_spec, [5.0, 10.0], trials=500, base_seed=3, threads=1
        )
        parallel = run_crb_validation(
            coil, carrier, frame_spec, [5.0, 10.0], trials=500, base_seed=3, threads=4
        )
        assert serial.cells == parallel.cells

    def test_minimum_trials_enforced(self, coil, carrier, frame_spec):
        with pytest.raises(ValueError):
            run_crb_validation(coil, carrier, frame_spec, [10.0], trials=100, base_seed=1)

    def test_thread_env_cap(self, coil, carrier, frame_spec, monkeypatch):
        monkeypatch.setenv("MI_ISAC_THREADS", "2")
        capped = run_crb_validation(coil, carrier, frame_spec, [10.0], trials=500, base_seed=3)
        monkeypatch.setenv("MI_ISAC_THREADS", "0")  # auto
        auto = run_crb_validation(coil, carrier, frame_spec, [10.0], trials=500, base_seed=3)
        assert capped.cells == auto.cells
        monkeypatch.setenv("MI_ISAC_THREADS", "lots")
        with pytest.raises(ValueError):
            run_crb_validation(coil, carrier, frame_spec, [10.0], trials=500, base_seed=3)

    def test_cell_lookup(self, coil, carrier, frame_spec):
        sweep = run_crb_validation(coil, carrier, frame_spec, [10.0], trials=500, base_seed=5)
        assert sweep.cell(10.0, "ideal").profile == "ideal"
        with pytest.raises(KeyError):
            sweep.cell(99.0, "ideal")
