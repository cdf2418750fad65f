"""OL codec tests: closed-form moment identities, the exact tracker vs
Monte-Carlo sample moments, and trial execution."""

import math

import numpy as np
import pytest
from scipy.stats import norm

from gbcf_lab import analytical as an
from gbcf_lab import channel as ch
from gbcf_lab import moments as mo
from gbcf_lab import rng

PARAMS = mo.OlParams()


def cfg_at(snr_db, n, k=1, snr_fb_db=None):
    return ch.ChannelConfig.symmetric(snr_db, n, k, snr_fb_db=snr_fb_db)


CFG_HALF = ch.ChannelConfig(p=1.0, sigma2_f=(0.5, 0.5), n=4, k=(1, 1))


class TestInitEstimate:
    def test_zero_output(self):
        theta, _ = an.ol_init_estimate(0.0, CFG_HALF, 0)
        assert theta == 0.0

    def test_closed_form(self):
        # Theta = sqrt(P)/(P+sigma^2) * y; alpha = sigma^2/(P+sigma^2)
        theta, alpha = an.ol_init_estimate(1.2, CFG_HALF, 0)
        np.testing.assert_allclose(theta, 0.8, rtol=1e-12)
        np.testing.assert_allclose(alpha, 1 / 3, rtol=1e-12)

    def test_empirical_mse_oracle(self):
        """Monte-Carlo: E[(theta_hat - theta)^2] = 1/3 at P=1, sigma^2=0.5."""
        n = 1_000_000
        trials = np.arange(n)
        theta = ch.pam_constellation(1).points[
            rng.message_indices(31, rng.MESSAGE_U1, trials, 1)
        ]
        z = rng.normals(31, rng.NOISE_FWD_U1, trials, 1, math.sqrt(0.5))[:, 0]
        y = theta + z
        est = mo.lmmse_init_coeff(CFG_HALF, 0) * y
        assert abs(((est - theta) ** 2).mean() - 1 / 3) < 0.002


class TestEncode:
    def state(self, alpha, rho):
        return mo.OlState(
            theta_hat=np.zeros(2), alpha=np.array(alpha), rho=rho, round=3
        )

    def test_zero_errors(self):
        assert an.ol_encode(self.state([0.25, 0.25], 0.0), [0.0, 0.0], PARAMS, 1.0) == 0

    def test_worked_example(self):
        x = an.ol_encode(self.state([0.25, 0.25], 0.0), [0.1, 0.0], PARAMS, 1.0)
        np.testing.assert_allclose(x, 0.141421, atol=1e-6)

    def test_antisymmetric_cancellation(self):
        x = an.ol_encode(self.state([0.25, 0.25], 0.0), [0.1, -0.1], PARAMS, 1.0)
        assert x == pytest.approx(0.0, abs=1e-15)

    def test_requires_positive_alpha(self):
        with pytest.raises(AssertionError):
            an.ol_encode(self.state([0.0, 0.25], 0.0), [0.1, 0.1], PARAMS, 1.0)


class TestMoments:
    def test_worked_example(self):
        st = mo.OlState(np.zeros(2), np.array([1 / 3, 1 / 3]), 0.0, 3)
        m = an.ol_moments(st, PARAMS, CFG_HALF)
        np.testing.assert_allclose(m.e_eps_own_y[0], math.sqrt(0.5 / 3), rtol=1e-12)
        np.testing.assert_allclose(m.e_eps_own_y[0], 0.408248, atol=1e-6)
        assert m.e_y2 == (1.5, 1.5)  # P + sigma^2 exactly

    def test_cross_output_moment_is_power(self):
        # E[(X+Z1)(X+Z2)] = E[X^2] = P with independent noises
        st = mo.OlState(np.zeros(2), np.array([1 / 3, 1 / 3]), 0.0, 3)
        m = an.ol_moments(st, PARAMS, CFG_HALF)
        assert m.e_y1y2 == 1.0

    def test_user_symmetry_at_g1(self):
        for rho in (-0.7, 0.0, 0.3):
            st = mo.OlState(np.zeros(2), np.array([0.2, 0.2]), rho, 4)
            m = an.ol_moments(st, PARAMS, CFG_HALF)
            assert abs(m.e_eps_own_y[0]) == pytest.approx(
                abs(m.e_eps_own_y[1]), rel=1e-12
            )

    def test_sgn_convention_at_zero(self):
        assert mo.sgn(0.0) == 1.0
        assert mo.sgn(-1e-300) == -1.0


class TestDecodeUpdate:
    def test_zero_output_keeps_estimate(self):
        st = mo.OlState(np.array([0.4, -0.2]), np.array([1 / 3, 1 / 3]), 0.0, 3)
        m = an.ol_moments(st, PARAMS, CFG_HALF)
        new = an.ol_decode_update(st, [0.0, 0.0], m)
        np.testing.assert_array_equal(new.theta_hat, st.theta_hat)

    def test_hand_derived_checkpoint(self):
        """alpha' = 1/3 - 0.408248^2/1.5 = 2/9; rho' = -2/3 (bilinear expansion)."""
        st = mo.OlState(np.zeros(2), np.array([1 / 3, 1 / 3]), 0.0, 3)
        m = an.ol_moments(st, PARAMS, CFG_HALF)
        new = an.ol_decode_update(st, [0.1, 0.1], m)
        np.testing.assert_allclose(new.alpha, 2 / 9, rtol=1e-12)
        np.testing.assert_allclose(new.rho, -2 / 3, rtol=1e-12)


class TestDesignTracker:
    def test_matches_closed_form_moments(self):
        plans = mo.design_plan(cfg_at(3.0, 9), PARAMS, "ol")
        for pl in plans:
            np.testing.assert_allclose(pl.joint.b[0, 1], pl.moments.e_eps_own_y[0],
                                       rtol=1e-9)
            np.testing.assert_allclose(pl.joint.b[1, 1], pl.moments.e_eps_own_y[1],
                                       rtol=1e-9)

    @pytest.mark.parametrize("snr", [0.0, 3.0, 6.0])
    def test_transmit_power_identity(self, snr):
        for pl in mo.design_plan(cfg_at(snr, 9), PARAMS, "ol"):
            assert abs(pl.e_x2 - 1.0) < 1e-9

    @pytest.mark.parametrize("snr", [0.0, 3.0, 6.0])
    def test_alpha_strictly_decreasing(self, snr):
        plans = mo.design_plan(cfg_at(snr, 9), PARAMS, "ol")
        alpha = [mo.init_alpha(cfg_at(snr, 9))[0]]
        for pl in plans:
            assert pl.alpha_out[0] < alpha[-1]
            assert pl.alpha_out[1] < pl.alpha[1]
            alpha.append(pl.alpha_out[0])

    def test_rho_bounded(self):
        for snr in (-2.0, 0.0, 3.0, 6.0):
            for pl in mo.design_plan(cfg_at(snr, 12), PARAMS, "ol"):
                assert abs(pl.rho_out) <= 1.0 + 1e-9


class TestTrackerVsMonteCarlo:
    """The tracked (alpha1, alpha2, rho) must match sample moments within
    3 standard errors at every round."""

    @pytest.mark.parametrize("snr,n", [(0.0, 9), (3.0, 9)])
    def test_moment_match(self, snr, n):
        cfg = cfg_at(snr, n)
        trials = 1_000_000
        res = an.run_batch("ol", cfg, PARAMS, seed=101, t0=0, t1=trials,
                           collect="moments")
        plans = mo.design_plan(cfg, PARAMS, "ol")
        for j, pl in enumerate(plans):
            m2 = res.extras["eps2_sum"][j] / trials
            m4 = res.extras["eps4_sum"][j] / trials
            se = np.sqrt((m4 - m2**2) / trials)
            for u in range(2):
                assert abs(m2[u] - pl.alpha_out[u]) < 3 * se[u], (pl.i, u)
            rho_emp = (res.extras["e12_sum"][j] / trials) / math.sqrt(m2[0] * m2[1])
            se_rho = (1 - pl.rho_out**2) / math.sqrt(trials)
            assert abs(rho_emp - pl.rho_out) < 3 * max(se_rho, 1e-6), pl.i

    def test_checkpoint_round3_monte_carlo(self):
        """Cross-check alpha'=0.2222, rho'=-0.6667 empirically within 1%."""
        cfg = ch.ChannelConfig(p=1.0, sigma2_f=(0.5, 0.5), n=3, k=(1, 1))
        trials = 1_000_000
        res = an.run_batch("ol", cfg, PARAMS, seed=77, t0=0, t1=trials,
                           collect="moments")
        m2 = res.extras["eps2_sum"][0] / trials
        rho_emp = (res.extras["e12_sum"][0] / trials) / math.sqrt(m2[0] * m2[1])
        np.testing.assert_allclose(m2, 0.222222, rtol=0.01)
        np.testing.assert_allclose(rho_emp, -0.666667, rtol=0.01)

    def test_empirical_power_within_one_percent(self):
        cfg = cfg_at(3.0, 9)
        trials = 1_000_000
        res = an.run_batch("ol", cfg, PARAMS, seed=5, t0=0, t1=trials,
                           collect="power")
        mean_power = res.power_sum / trials
        assert (mean_power.mean()) <= 1.01
        np.testing.assert_allclose(mean_power[2:], 1.0, rtol=0.01)


class TestTrialExecution:
    def test_uncoded_bler_oracle(self):
        """N=2 reduces to one LMMSE-decoded PAM use: BLER = Q(sqrt(SNR))."""
        cfg = cfg_at(3.0, 2)
        res = an.run_batch("ol", cfg, PARAMS, seed=7, t0=0, t1=300_000)
        oracle = norm.sf(math.sqrt(10**0.3))
        for u in range(2):
            assert abs(res.errors[u] / res.trials - oracle) < 0.002

    def test_high_snr_error_free(self):
        cfg = cfg_at(20.0, 2)
        res = an.run_batch("ol", cfg, PARAMS, seed=7, t0=0, t1=100_000)
        assert res.errors.sum() == 0

    def test_deterministic_decoding(self):
        cfg = cfg_at(3.0, 5)
        a = an.run_batch("ol", cfg, PARAMS, seed=3, t0=0, t1=10_000)
        b = an.run_batch("ol", cfg, PARAMS, seed=3, t0=0, t1=10_000)
        np.testing.assert_array_equal(a.errors, b.errors)

    def test_transcript_reproducible_bit_for_bit(self):
        cfg = cfg_at(3.0, 5, snr_fb_db=9.0)
        bits = [[1], [0]]
        runs = []
        for _ in range(2):
            _, t = an.run_analytical_trial(
                "ol", bits, cfg, PARAMS, rng.TrialRng(21, 4)
            )
            runs.append(t)
        np.testing.assert_array_equal(runs[0].x, runs[1].x)
        np.testing.assert_array_equal(runs[0].y, runs[1].y)
        np.testing.assert_array_equal(runs[0].y_tilde, runs[1].y_tilde)

    def test_scalar_trial_matches_batch(self):
        cfg = cfg_at(3.0, 6, k=2)
        batch = an.run_batch("ol", cfg, PARAMS, seed=5, t0=0, t1=60)
        errors = np.zeros(2, dtype=int)
        for t in range(60):
            msg = ch.draw_messages(cfg, 5, [t])[0]
            bits = [ch.index_to_bits(msg[u], cfg.k[u]) for u in range(2)]
            dec, transcript = an.run_analytical_trial(
                "ol", bits, cfg, PARAMS, rng.TrialRng(5, t)
            )
            errors += [dec[u] != bits[u] for u in range(2)]
            assert transcript.x.shape == (6,)
            np.testing.assert_array_equal(transcript.y, transcript.y_tilde)
        np.testing.assert_array_equal(errors, batch.errors)

    def test_user_swap_symmetry(self):
        """Two-proportion z statistic below 3 in the symmetric configuration
        (0 dB, N=3 keeps the error rate measurable at 1e6 trials)."""
        cfg = cfg_at(0.0, 3)
        res = an.run_batch("ol", cfg, PARAMS, seed=1, t0=0, t1=1_000_000)
        p1, p2 = res.errors / res.trials
        pool = res.errors.sum() / (2 * res.trials)
        z = abs(p1 - p2) / math.sqrt(2 * pool * (1 - pool) / res.trials)
        assert z < 3.0
