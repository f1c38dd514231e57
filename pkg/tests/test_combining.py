"""Local combiners, effective-gain statistics, second-stage weights, SINR, fusion."""

import numpy as np
import pytest

from cfmimo.channel import ChannelStatistics, covariance_factor, linear_to_db, one_ring_covariance
from cfmimo.combining import (
    EffectiveGainStats,
    effective_gain_stats,
    fuse_estimates,
    lp_mmse_combiner,
    lsfd_weights,
    simulate_gain_moments,
    stats_for_ue,
    uplink_sinr,
)
from cfmimo.errors import NumericalError
from cfmimo.pilots import PilotConfig
from cfmimo.signaling import FrameConfig, SignalingLedger


def make_stats(covs: np.ndarray) -> ChannelStatistics:
    """ChannelStatistics from a raw (L, K, N, N) covariance stack."""
    beta_lin = np.trace(covs, axis1=-2, axis2=-1).real / covs.shape[-1]
    return ChannelStatistics(
        beta_db=linear_to_db(beta_lin),
        beta_lin=beta_lin,
        aoa_rad=np.zeros(covs.shape[:2]),
        covariance=covs,
        factor=covariance_factor(covs),
    )


def ring_stack(rng, l_num, k_num, n_ant, beta_scale=1.0):
    covs = np.empty((l_num, k_num, n_ant, n_ant), dtype=complex)
    for l in range(l_num):
        for k in range(k_num):
            covs[l, k] = one_ring_covariance(
                beta_scale * rng.uniform(0.2, 2.0), rng.uniform(-np.pi, np.pi),
                np.deg2rad(10.0), n_ant, 0.5,
            ).matrix
    return covs


class TestLpMmse:
    def test_single_ue_closed_form(self):
        beta, p, sigma2 = 0.8, 0.5, 0.3
        h_hat = np.array([np.sqrt(beta), 0.0, 0.0], dtype=complex)
        v = lp_mmse_combiner({2: (h_hat, np.zeros((3, 3)))}, {2: p}, sigma2, 2)
        expected = p * np.sqrt(beta) / (p * beta + sigma2)
        assert np.allclose(v, [expected, 0.0, 0.0], rtol=1e-12)

    def test_unserved_ue_gets_zero(self):
        h_hat = np.ones(2, dtype=complex)
        v = lp_mmse_combiner({0: (h_hat, np.eye(2) * 0.1)}, {0: 1.0, 5: 1.0}, 0.2, 5)
        assert np.all(v == 0)

    def test_two_ue_scalar_brute_force(self):
        p = {0: 0.7, 1: 1.3}
        h = {0: np.array([0.9 + 0.1j]), 1: np.array([-0.4 + 0.6j])}
        c = {0: np.array([[0.05]]), 1: np.array([[0.2]])}
        sigma2 = 0.15
        denominator = (
            p[0] * (abs(h[0][0]) ** 2 + c[0][0, 0])
            + p[1] * (abs(h[1][0]) ** 2 + c[1][0, 0])
            + sigma2
        )
        v = lp_mmse_combiner({0: (h[0], c[0]), 1: (h[1], c[1])}, p, sigma2, 1)
        assert abs(v[0] - p[1] * h[1][0] / denominator) < 1e-12


class TestEffectiveGainStats:
    def test_near_perfect_csi_scalar_gain(self):
        # Huge pilot energy makes h_hat ~ h; the mean effective gain must match
        # a direct scalar Monte-Carlo of E[|h|^2 / (|h|^2 + sigma2)] (|h|^2 ~ Exp(1)).
        sigma2 = 0.5
        covs = np.ones((1, 1, 1, 1), dtype=complex)
        cfg = PilotConfig(1_000_000, np.array([0]), np.array([1.0]))
        stats = effective_gain_stats(
            np.ones((1, 1), dtype=bool), make_stats(covs), cfg, sigma2, 20_000,
            np.random.default_rng(0), 0, warn_rel_se=False,
        )
        x = np.random.default_rng(1).exponential(size=1_000_000)
        oracle = (x / (x + sigma2)).mean()
        assert abs(stats.mean_gain[0].imag) < 5e-3
        assert stats.mean_gain[0].real > 0
        assert stats.mean_gain[0].real == pytest.approx(oracle, rel=0.02)

    def test_disjoint_serving_excludes_interferer(self):
        rng = np.random.default_rng(2)
        covs = ring_stack(rng, 2, 2, 2)
        serving = np.array([[True, False], [False, True]])
        cfg = PilotConfig.uniform(2, 4, 1.0)
        stats = effective_gain_stats(serving, make_stats(covs), cfg, 0.3, 50, rng, 0, warn_rel_se=False)
        assert 1 not in stats.second_moments
        assert np.array_equal(stats.interferers, [0])
        assert np.array_equal(stats.support, [0])

    def test_support_rows_zero(self):
        rng = np.random.default_rng(3)
        covs = ring_stack(rng, 3, 2, 2)
        serving = np.array([[True, True], [False, True], [True, False]])
        moments = simulate_gain_moments(serving, make_stats(covs), PilotConfig.uniform(2, 4, 1.0), 0.2, 40, rng)
        stats = stats_for_ue(moments, 0)
        assert np.array_equal(stats.support, [0, 2])
        assert stats.mean_gain[1] == 0
        assert stats.noise_diag[1] == 0
        for moment in stats.second_moments.values():
            assert np.all(moment[1, :] == 0) and np.all(moment[:, 1] == 0)

    def test_doubling_n_mc_halves_variance(self):
        rng = np.random.default_rng(4)
        covs = ring_stack(rng, 2, 2, 2)
        serving = np.ones((2, 2), dtype=bool)
        cfg = PilotConfig.uniform(2, 4, 1.0)
        stats_state = make_stats(covs)

        def spread(n_mc, reps, seed):
            seeds = np.random.SeedSequence(seed).spawn(reps)
            values = [
                effective_gain_stats(serving, stats_state, cfg, 0.3, n_mc,
                                     np.random.default_rng(s), 0, warn_rel_se=False).mean_gain[0].real
                for s in seeds
            ]
            return np.var(values)

        ratio = spread(40, 150, 10) / spread(80, 150, 11)
        assert 1.3 < ratio < 3.1

    def test_small_n_mc_warns(self):
        rng = np.random.default_rng(5)
        covs = ring_stack(rng, 2, 2, 2)
        serving = np.ones((2, 2), dtype=bool)
        with pytest.warns(UserWarning, match="n_mc"):
            effective_gain_stats(serving, make_stats(covs), PilotConfig.uniform(2, 4, 1.0),
                                 0.3, 3, rng, 0, warn_rel_se=True)

    def test_unknown_combiner_rejected(self):
        rng = np.random.default_rng(6)
        covs = ring_stack(rng, 1, 1, 2)
        with pytest.raises(NumericalError):
            effective_gain_stats(np.ones((1, 1), dtype=bool), make_stats(covs),
                                 PilotConfig.uniform(1, 2, 1.0), 0.3, 5, rng, 0, combiner="mrc")


def random_instance(rng, n_oru=3, n_ue=3, n_draws=60, support=None):
    """Moment-consistent statistics instance built from raw complex gain draws."""
    g = rng.standard_normal((n_draws, n_oru, n_ue)) + 1j * rng.standard_normal((n_draws, n_oru, n_ue))
    if support is None:
        support = np.arange(n_oru)
    mask = np.zeros(n_oru, dtype=bool)
    mask[support] = True
    g[:, ~mask, :] = 0.0
    mean = g[:, :, 0].mean(axis=0)
    second = {i: np.einsum("dl,dm->lm", g[:, :, i], g[:, :, i].conj()) / n_draws for i in range(n_ue)}
    noise = np.where(mask, rng.uniform(0.05, 0.3, size=n_oru), 0.0)
    return EffectiveGainStats(
        ue=0, support=np.asarray(support), mean_gain=mean, second_moments=second,
        noise_diag=noise, interferers=np.arange(n_ue),
    )


class TestLsfdWeights:
    def test_scalar_support_scaling_invariance(self):
        rng = np.random.default_rng(7)
        stats = random_instance(rng, n_oru=1, n_ue=2)
        powers = np.array([0.8, 1.1])
        a = lsfd_weights(stats, powers)
        gamma, _ = uplink_sinr(a, stats, powers)
        for c in (0.1, 3.0, -2.0 + 1.0j):
            gamma_scaled, _ = uplink_sinr(a * c, stats, powers)
            assert abs(gamma_scaled - gamma) / gamma < 1e-10

    def test_symmetric_two_oru_equal_weights(self):
        mean = np.array([1.0 + 0.0j, 1.0 + 0.0j])
        second = {0: np.array([[2.0, 0.5], [0.5, 2.0]], dtype=complex)}
        stats = EffectiveGainStats(
            ue=0, support=np.array([0, 1]), mean_gain=mean, second_moments=second,
            noise_diag=np.array([0.3, 0.3]), interferers=np.array([0]),
        )
        a = lsfd_weights(stats, np.array([1.0]))
        assert a[0] == pytest.approx(a[1])

    def test_dense_solve_oracle(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            stats = random_instance(rng)
            powers = rng.uniform(0.5, 2.0, size=3)
            a = lsfd_weights(stats, powers)
            denom = np.diag(stats.noise_diag).astype(complex)
            for i, moment in stats.second_moments.items():
                denom = denom + powers[i] * moment
            oracle = powers[0] * np.linalg.pinv(denom) @ stats.mean_gain
            assert np.allclose(a, oracle, rtol=1e-8, atol=1e-10)

    def test_partial_support_embedding(self):
        rng = np.random.default_rng(9)
        stats = random_instance(rng, n_oru=4, support=[1, 3])
        a = lsfd_weights(stats, np.ones(3))
        assert a[0] == 0 and a[2] == 0
        assert a[1] != 0 and a[3] != 0

    def test_singular_support_raises(self):
        stats = EffectiveGainStats(
            ue=0, support=np.array([0, 1]), mean_gain=np.ones(2, dtype=complex),
            second_moments={0: np.zeros((2, 2), dtype=complex)},
            noise_diag=np.zeros(2), interferers=np.array([0]),
        )
        with pytest.raises(NumericalError, match="support"):
            lsfd_weights(stats, np.ones(1))


class TestUplinkSinr:
    def _scalar_stats(self, second_moment):
        return EffectiveGainStats(
            ue=0, support=np.array([0]), mean_gain=np.array([1.0 + 0.0j]),
            second_moments={0: np.array([[second_moment]], dtype=complex)},
            noise_diag=np.array([0.0]), interferers=np.array([0]),
        )

    def test_se_is_log2_of_one_plus_gamma(self):
        gamma, se = uplink_sinr(np.array([1.0 + 0j]), self._scalar_stats(2.0), np.ones(1))
        assert gamma == pytest.approx(1.0) and se == pytest.approx(1.0)
        gamma, se = uplink_sinr(np.array([1.0 + 0j]), self._scalar_stats(4.0 / 3.0), np.ones(1))
        assert gamma == pytest.approx(3.0) and se == pytest.approx(2.0)

    def test_zero_denominator_flags_invalid(self):
        gamma, se = uplink_sinr(np.array([1.0 + 0j]), self._scalar_stats(1.0), np.ones(1))
        assert np.isnan(gamma) and np.isnan(se)

    def test_weights_beat_random_perturbations(self):
        rng = np.random.default_rng(10)
        for _ in range(10):
            stats = random_instance(rng, n_oru=4, support=[0, 1, 3])
            powers = rng.uniform(0.5, 2.0, size=3)
            best = lsfd_weights(stats, powers)
            gamma_best, _ = uplink_sinr(best, stats, powers)
            for _ in range(100):
                noise = np.zeros(4, dtype=complex)
                noise[stats.support] = rng.standard_normal(3) + 1j * rng.standard_normal(3)
                gamma, _ = uplink_sinr(best + 0.2 * noise * np.linalg.norm(best), stats, powers)
                assert gamma <= gamma_best * (1 + 1e-12)

    def test_enlarging_cluster_does_not_decrease_mean_se(self):
        # Statistical monotonicity across 25 independent setups.
        deltas = []
        for setup in range(25):
            rng = np.random.default_rng(100 + setup)
            covs = ring_stack(rng, 3, 2, 2)
            cfg = PilotConfig.uniform(2, 4, 1.0)
            stats_state = make_stats(covs)
            serving_small = np.array([[True, True], [True, True], [False, True]])
            serving_big = np.ones((3, 2), dtype=bool)
            ses = []
            for serving in (serving_big, serving_small):
                moments = simulate_gain_moments(
                    serving, stats_state, cfg, 0.3, 400, np.random.default_rng(setup)
                )
                ue = stats_for_ue(moments, 0)
                _, se = uplink_sinr(lsfd_weights(ue, cfg.power_mw), ue, cfg.power_mw)
                ses.append(se)
            deltas.append(ses[0] - ses[1])
        assert np.mean(deltas) > -1e-3


class TestFusion:
    def test_single_odu_no_transfer(self):
        signals = np.array([1 + 1j, 2 - 1j, 0.5j])
        weights = np.array([0.5, 0.25 + 0.1j, 0.0])
        odu_of_oru = np.array([0, 0, 1])
        fused, partials = fuse_estimates(signals, weights, odu_of_oru, 0)
        assert set(partials) == {0}
        assert fused == partials[0]

    def test_staged_equals_flat_fixed_order(self):
        rng = np.random.default_rng(11)
        signals = rng.standard_normal(9) + 1j * rng.standard_normal(9)
        weights = rng.standard_normal(9) + 1j * rng.standard_normal(9)
        weights[4] = 0.0
        odu_of_oru = np.array([0, 0, 0, 1, 1, 1, 2, 2, 2])
        fused, partials = fuse_estimates(signals, weights, odu_of_oru, 1)
        # Flat reference following the canonical order: ascending O-RU within
        # ascending O-DU, partials materialized exactly as the module defines.
        flat = 0.0 + 0.0j
        for c in sorted(partials):
            partial = 0.0 + 0.0j
            for l in range(9):
                if odu_of_oru[l] == c and weights[l] != 0:
                    partial += np.conj(weights[l]) * signals[l]
            flat += partial
        assert fused == flat
        unordered = np.sum(np.conj(weights) * signals)
        assert abs(fused - unordered) < 1e-12 * max(1.0, abs(unordered))

    def test_zero_weights_zero_estimate(self):
        fused, partials = fuse_estimates(np.ones(4, dtype=complex), np.zeros(4, dtype=complex), np.array([0, 0, 1, 1]), 0)
        assert fused == 0
        assert partials == {}

    def test_ledger_notified_of_transfers(self):
        signals = np.ones(4, dtype=complex)
        weights = np.array([1.0, 1.0, 1.0, 0.0], dtype=complex)
        odu_of_oru = np.array([0, 1, 2, 2])
        ledger = SignalingLedger(4, 3)
        fuse_estimates(signals, weights, odu_of_oru, 0, ledger=ledger, frame=FrameConfig(tau_u=70), step=3)
        assert ledger.total_inter_odu == 2 * 70
        assert ledger.cumulative.inter_odu[1, 0] == 70
        assert ledger.cumulative.inter_odu[2, 0] == 70
