import math

import numpy as np
import pytest

from miisac import (
    ChannelMatrix,
    LinkGeometry,
    NoiseModel,
    NotIdentifiable,
    ZeroChannel,
    AmbiguousDirection,
    channel_matrix,
    coil_constant,
    crb_range_analytic,
    effective_noise_variance,
    estimate_direction_eigen,
    estimate_range_closed_form,
    fim_numeric,
    mle_refine,
    random_rotation_matrix,
)
from miisac.estimation import FrameSpec

# frozen from kB * 290 * 1000 with kB = 1.380649e-23
SIGMA2_IDEAL = 4.0038821e-18
# frozen from the closed form at r = 10 m with the reference parameters
SQRT_CRB_10M = 3.755776553770336e-05


def _random_geometry(rng, r_lo=2.0, r_hi=30.0):
    return LinkGeometry(
        float(rng.uniform(r_lo, r_hi)),
        float(rng.uniform(0.2, math.pi - 0.2)),
        float(rng.uniform(0.0, 2.0 * math.pi)),
        random_rotation_matrix(rng),
        random_rotation_matrix(rng),
    )


class TestNoiseVariance:
    def test_ideal_thermal_floor(self, ideal_noise):
        assert effective_noise_variance(ideal_noise) == pytest.approx(SIGMA2_IDEAL, rel=1e-9)

    def test_nine_db_penalty(self, ideal_noise, practical_noise):
        ratio = effective_noise_variance(practical_noise) / effective_noise_variance(ideal_noise)
        assert ratio == pytest.approx(10.0**0.9, rel=1e-12)

    def test_linear_in_bandwidth(self):
        v1 = effective_noise_variance(NoiseModel(bandwidth_hz=1e3))
        v2 = effective_noise_variance(NoiseModel(bandwidth_hz=2e3))
        assert v2 == pytest.approx(2.0 * v1, rel=1e-14)

    def test_monotone_in_penalties(self):
        base = effective_noise_variance(NoiseModel(bandwidth_hz=1e3))
        for nf, il in ((1.0, 0.0), (0.0, 1.0), (3.0, 2.0)):
            v = effective_noise_variance(
                NoiseModel(bandwidth_hz=1e3, noise_figure_db=nf, insertion_loss_db=il)
            )
            assert v > base


class TestAnalyticCrb:
    def test_reference_value(self, coil, carrier, frame_spec, ideal_noise):
        geom = LinkGeometry(10.0, 0.4, 0.4)
        crb = crb_range_analytic(geom, coil, carrier, frame_spec, ideal_noise)
        assert math.sqrt(crb) == pytest.approx(SQRT_CRB_10M, rel=1e-12)

    def test_r8_scaling(self, coil, carrier, frame_spec, ideal_noise):
        c1 = crb_range_analytic(LinkGeometry(10.0, 0.4, 0.4), coil, carrier, frame_spec, ideal_noise)
        c2 = crb_range_analytic(LinkGeometry(20.0, 0.4, 0.4), coil, carrier, frame_spec, ideal_noise)
        assert c2 / c1 == pytest.approx(256.0, rel=1e-12)

    def test_r8_loglog_slope(self, coil, carrier, frame_spec, ideal_noise):
        grid = np.array([1.0, 2.0, 5.0, 10.0, 20.0, 30.0])
        crbs = [
            crb_range_analytic(LinkGeometry(r, 0.4, 0.4), coil, carrier, frame_spec, ideal_noise)
            for r in grid
        ]
        slope = np.polyfit(np.log(grid), np.log(crbs), 1)[0]
        assert slope == pytest.approx(8.0, abs=1e-3)

    def test_symbol_count_scaling(self, coil, carrier, ideal_noise):
        geom = LinkGeometry(10.0, 0.4, 0.4)
        c100 = crb_range_analytic(geom, coil, carrier, FrameSpec(100, 1.0), ideal_noise)
        c400 = crb_range_analytic(geom, coil, carrier, FrameSpec(400, 1.0), ideal_noise)
        assert c100 / c400 == pytest.approx(4.0, rel=1e-14)

    def test_angle_and_orientation_independent(self, coil, carrier, frame_spec, ideal_noise, rng):
        ref = crb_range_analytic(LinkGeometry(10.0, 0.1, 0.1), coil, carrier, frame_spec, ideal_noise)
        for _ in range(10):
            geom = LinkGeometry(
                10.0,
                float(rng.uniform(0, math.pi)),
                float(rng.uniform(0, 2 * math.pi)),
                random_rotation_matrix(rng),
                random_rotation_matrix(rng),
            )
            assert crb_range_analytic(geom, coil, carrier, frame_spec, ideal_noise) == ref

    def test_single_axis_rejected(self, single_coil, carrier, frame_spec, ideal_noise):
        geom = LinkGeometry(10.0, 0.4, 0.4)
        with pytest.raises(NotIdentifiable):
            crb_range_analytic(geom, single_coil, carrier, frame_spec, ideal_noise)


class TestNumericFim:
    def test_triaxial_full_rank(self, coil, carrier, frame_spec, ideal_noise):
        geom = LinkGeometry(10.0, math.pi / 4, math.pi / 3)
        assert fim_numeric(geom, coil, carrier, frame_spec, ideal_noise).numeric_rank == 3

    def test_single_axis_rank_one(self, single_coil, carrier, frame_spec, ideal_noise):
        geom = LinkGeometry(10.0, math.pi / 4, math.pi / 3)
        info = fim_numeric(geom, single_coil, carrier, frame_spec, ideal_noise)
        assert info.numeric_rank == 1

    def test_rank_dichotomy_random(self, coil, single_coil, carrier, frame_spec, ideal_noise, rng):
        for _ in range(100):
            geom = _random_geometry(rng)
            assert fim_numeric(geom, coil, carrier, frame_spec, ideal_noise).numeric_rank == 3
            assert fim_numeric(geom, single_coil, carrier, frame_spec, ideal_noise).numeric_rank == 1

    def test_pole_rank_two_reported(self, coil, carrier, frame_spec, ideal_noise):
        info = fim_numeric(LinkGeometry(10.0, 0.0, 0.0), coil, carrier, frame_spec, ideal_noise)
        assert info.numeric_rank == 2

    def test_matches_analytic_crb(self, coil, carrier, frame_spec, ideal_noise, rng):
        for _ in range(100):
            geom = _random_geometry(rng)
            info = fim_numeric(geom, coil, carrier, frame_spec, ideal_noise)
            crb_numeric = np.linalg.inv(info.matrix)[0, 0]
            crb_closed = crb_range_analytic(geom, coil, carrier, frame_spec, ideal_noise)
            assert crb_numeric == pytest.approx(crb_closed, rel=1e-6)

    def test_rr_entry_orientation_invariant(self, coil, carrier, frame_spec, ideal_noise, rng):
        base = fim_numeric(
            LinkGeometry(10.0, 0.9, 2.2), coil, carrier, frame_spec, ideal_noise
        ).matrix[0, 0]
        for _ in range(10):
            geom = LinkGeometry(
                10.0, 0.9, 2.2, random_rotation_matrix(rng), random_rotation_matrix(rng)
            )
            entry = fim_numeric(geom, coil, carrier, frame_spec, ideal_noise).matrix[0, 0]
            assert entry == pytest.approx(base, rel=1e-6)

    def test_symmetric_psd(self, coil, carrier, frame_spec, ideal_noise, rng):
        geom = _random_geometry(rng)
        m = fim_numeric(geom, coil, carrier, frame_spec, ideal_noise).matrix
        assert np.max(np.abs(m - m.T)) < 1e-10 * np.linalg.norm(m)
        assert np.min(np.linalg.eigvalsh(m)) > -1e-12 * np.linalg.norm(m)


class TestClosedFormInversion:
    def test_noiseless_exact(self, coil, carrier, rng):
        for _ in range(20):
            geom = _random_geometry(rng)
            h = channel_matrix(geom, coil, carrier)
            r_hat = estimate_range_closed_form(h, coil, carrier)
            assert abs(r_hat - geom.range_m) < 1e-9

    def test_scale_inversion(self, coil, carrier):
        h = channel_matrix(LinkGeometry(10.0, 0.4, 1.0), coil, carrier)
        scaled = ChannelMatrix(entries=h.entries / 8.0, coil_constant=h.coil_constant)
        assert estimate_range_closed_form(scaled, coil, carrier) == pytest.approx(20.0, rel=1e-12)

    def test_zero_channel(self, coil, carrier):
        h = ChannelMatrix(entries=np.zeros((3, 3), dtype=complex), coil_constant=1.0)
        with pytest.raises(ZeroChannel):
            estimate_range_closed_form(h, coil, carrier)

    def test_noisy_efficiency_vs_mc_oracle(self, coil, carrier, rng):
        # per-entry SNR 30 dB; RMSE within 15 % of the first-order bound
        # sigma^2 r^8 / (54 C^2) for the Frobenius-norm estimator
        geom = LinkGeometry(10.0, 0.7, 1.9)
        h = channel_matrix(geom, coil, carrier)
        mean_sq = np.mean(np.abs(h.entries) ** 2)
        sigma = math.sqrt(mean_sq / (2.0 * 1000.0))  # per real dimension
        trials = 10_000
        noise = sigma * (rng.standard_normal((trials, 3, 3)) + 1j * rng.standard_normal((trials, 3, 3)))
        norms = np.linalg.norm(h.entries[None, :, :] + noise, axis=(1, 2))
        c = coil_constant(coil, carrier)
        r_hats = (c * math.sqrt(6.0) / norms) ** (1.0 / 3.0)
        rmse = math.sqrt(np.mean((r_hats - geom.range_m) ** 2))
        bound = math.sqrt(sigma**2 * geom.range_m**8 / (54.0 * c**2))
        assert rmse == pytest.approx(bound, rel=0.15)


class TestDirectionEigen:
    def test_noiseless_exact(self, coil, carrier, rng):
        for _ in range(20):
            geom = _random_geometry(rng)
            h = channel_matrix(geom, coil, carrier)
            th, ph = estimate_direction_eigen(
                h,
                (geom.tx_orientation, geom.rx_orientation),
                coil,
                carrier,
                geom.range_m,
                hemisphere_prior=geom.direction,
            )
            assert abs(th - geom.theta_rad) < 1e-9
            assert min(abs(ph - geom.phi_rad), 2 * math.pi - abs(ph - geom.phi_rad)) < 1e-9

    def test_prior_flip_gives_antipode(self, coil, carrier):
        geom = LinkGeometry(10.0, math.pi / 4, math.pi / 3)
        h = channel_matrix(geom, coil, carrier)
        frames = (geom.tx_orientation, geom.rx_orientation)
        th, ph = estimate_direction_eigen(h, frames, coil, carrier, 10.0, hemisphere_prior=geom.direction)
        th2, ph2 = estimate_direction_eigen(h, frames, coil, carrier, 10.0, hemisphere_prior=-geom.direction)
        assert th2 == pytest.approx(math.pi - th, abs=1e-12)
        assert ph2 == pytest.approx((ph + math.pi) % (2 * math.pi), abs=1e-12)

    def test_merged_modes_raise(self, coil, carrier):
        # an isotropic "estimate" has no eigengap at all
        h = ChannelMatrix(entries=np.eye(3) * 1e-5, coil_constant=1.0)
        with pytest.raises(AmbiguousDirection):
            estimate_direction_eigen(h, (np.eye(3), np.eye(3)), coil, carrier, 10.0)

    def test_noisy_efficiency_vs_fim_oracle(self, coil, carrier, rng):
        # at 30 dB per-entry SNR the polar-angle RMSE sits within 15 % of
        # the numeric-FIM bound evaluated at an equivalent noise scaling
        geom = LinkGeometry(10.0, 0.7, 1.9)
        h = channel_matrix(geom, coil, carrier)
        mean_sq = np.mean(np.abs(h.entries) ** 2)
        sigma2 = mean_sq / (2.0 * 1000.0)
        # fim scale (N * P_axis / sigma_w^2) == 1/sigma2 with N=1, P=3 axes
        noise_model = NoiseModel(bandwidth_hz=sigma2 / (1.380649e-23 * 290.0))
        info = fim_numeric(geom, coil, carrier, FrameSpec(1, 3.0), noise_model)
        crb_theta = np.linalg.inv(info.matrix)[1, 1]
        trials = 10_000
        errs = np.empty(trials)
        frames = (geom.tx_orientation, geom.rx_orientation)
        sw = math.sqrt(sigma2)
        for t in range(trials):
            noisy = h.entries + sw * (rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)))
            noisy_cm = ChannelMatrix(entries=noisy, coil_constant=h.coil_constant)
            th, _ = estimate_direction_eigen(
                noisy_cm, frames, coil, carrier, geom.range_m, hemisphere_prior=geom.direction
            )
            errs[t] = th - geom.theta_rad
        rmse = math.sqrt(np.mean(errs**2))
        assert rmse == pytest.approx(math.sqrt(crb_theta), rel=0.15)


class TestMleRefine:
    def test_fixed_point_at_truth(self, coil, carrier):
        geom = LinkGeometry(10.0, math.pi / 4, math.pi / 3)
        h = channel_matrix(geom, coil, carrier)
        res = mle_refine(h, (10.0, math.pi / 4, math.pi / 3), coil, carrier, (np.eye(3), np.eye(3)))
        assert res.converged
        assert res.iterations <= 2
        assert res.residual_norm < 1e-15

    def test_recovers_from_perturbed_init(self, coil, carrier, rng):
        for _ in range(30):
            geom = _random_geometry(rng)
            h = channel_matrix(geom, coil, carrier)
            init = (geom.range_m * 1.05, geom.theta_rad + 0.03, geom.phi_rad - 0.02)
            res = mle_refine(h, init, coil, carrier, (geom.tx_orientation, geom.rx_orientation))
            assert res.converged
            assert res.iterations >= 1
            assert abs(res.range_m - geom.range_m) < 1e-9
            assert abs(res.theta_rad - geom.theta_rad) < 1e-9

    def test_full_pipeline_noiseless_consistency(self, coil, carrier, rng):
        for _ in range(30):
            geom = _random_geometry(rng)
            h = channel_matrix(geom, coil, carrier)
            frames = (geom.tx_orientation, geom.rx_orientation)
            r0 = estimate_range_closed_form(h, coil, carrier)
            th0, ph0 = estimate_direction_eigen(
                h, frames, coil, carrier, r0, hemisphere_prior=geom.direction
            )
            res = mle_refine(h, (r0, th0, ph0), coil, carrier, frames)
            assert res.converged
            assert abs(res.range_m - geom.range_m) < 1e-9
            assert abs(res.theta_rad - geom.theta_rad) < 1e-9

    def test_iteration_cap_reports_nonconverged(self, coil, carrier):
        geom = LinkGeometry(10.0, 0.8, 1.2)
        h = channel_matrix(geom, coil, carrier)
        res = mle_refine(
            h, (25.0, 2.0, 4.0), coil, carrier,
            (geom.tx_orientation, geom.rx_orientation), max_iter=1,
        )
        assert not res.converged
        assert res.iterations == 1

    def test_generic_path_matches_fast_path(self, coil, carrier, seawater, rng):
        # conductive medium forces the generic complex-residual loop
        geom = _random_geometry(rng, r_lo=3.0, r_hi=8.0)
        h = channel_matrix(geom, coil, carrier, seawater)
        init = (geom.range_m * 1.02, geom.theta_rad + 0.01, geom.phi_rad + 0.01)
        res = mle_refine(
            h, init, coil, carrier,
            (geom.tx_orientation, geom.rx_orientation), medium=seawater,
        )
        assert res.converged
        assert abs(res.range_m - geom.range_m) < 1e-8
