"""EOL codec tests: the two-output MMSE estimator must dominate the
single-output one, and its tracked moments must match simulation."""

import math

import numpy as np
import pytest

from gbcf_lab import analytical as an
from gbcf_lab import channel as ch
from gbcf_lab import moments as mo

PARAMS = mo.OlParams()


def cfg_at(snr_db, n, k=1):
    return ch.ChannelConfig.symmetric(snr_db, n, k)


class TestFallbackAndDegeneracy:
    def test_first_refinement_round_matches_ol(self):
        """Round 3 has no refinement-phase memory, so both schemes agree."""
        cfg = cfg_at(3.0, 3)
        a = an.run_batch("ol", cfg, PARAMS, seed=2, t0=0, t1=50_000)
        b = an.run_batch("eol", cfg, PARAMS, seed=2, t0=0, t1=50_000)
        np.testing.assert_array_equal(a.errors, b.errors)

    def test_degenerate_memory_matches_ol_update(self):
        """With zero memory moments the two-output update collapses to the
        single-output one."""
        st = mo.OlState(np.array([0.3, -0.1]), np.array([0.2, 0.2]), -0.4, 4)
        m = an.ol_moments(st, PARAMS, cfg_at(3.0, 6))
        b = np.array([[0.0, m.e_eps_own_y[0]], [0.0, m.e_eps_own_y[1]]])
        gram = np.array(
            [
                [[m.e_y2[0], 0.0], [0.0, m.e_y2[0]]],
                [[m.e_y2[1], 0.0], [0.0, m.e_y2[1]]],
            ]
        )
        joint = mo.EolJointMoments(
            b=b,
            gram=gram,
            cross_b=np.array([[0.0, m.e_eps_cross_y[0]], [0.0, m.e_eps_cross_y[1]]]),
            cross_gram=np.array([[0.0, 0.0], [0.0, m.e_y1y2]]),
            e_eps12=st.rho * math.sqrt(st.alpha[0] * st.alpha[1]),
        )
        y_prev = [0.77, -0.3]
        y_curr = [0.5, 0.25]
        got = an.eol_decode_update(st, y_prev, y_curr, joint)
        want = an.ol_decode_update(st, y_curr, m)
        np.testing.assert_allclose(got.theta_hat, want.theta_hat, rtol=1e-9)
        np.testing.assert_allclose(got.alpha, want.alpha, rtol=1e-9)
        np.testing.assert_allclose(got.rho, want.rho, rtol=1e-9)


class TestDominance:
    @pytest.mark.parametrize("snr", [0.0, 3.0, 6.0])
    @pytest.mark.parametrize("n", range(3, 10))
    def test_tracked_alpha_dominance(self, snr, n):
        """More observations cannot hurt the linear MMSE estimate."""
        ol = mo.design_plan(cfg_at(snr, n), PARAMS, "ol")
        eol = mo.design_plan(cfg_at(snr, n), PARAMS, "eol")
        for po, pe in zip(ol, eol):
            for u in range(2):
                assert pe.alpha_out[u] <= po.alpha_out[u] + 1e-12, (snr, n, po.i)

    def test_strict_gain_after_round_three(self):
        ol = mo.design_plan(cfg_at(3.0, 6), PARAMS, "ol")
        eol = mo.design_plan(cfg_at(3.0, 6), PARAMS, "eol")
        assert eol[-1].alpha_out[0] < ol[-1].alpha_out[0]

    def test_transmit_power_identity(self):
        for pl in mo.design_plan(cfg_at(3.0, 9), PARAMS, "eol"):
            assert abs(pl.e_x2 - 1.0) < 1e-9


class TestTrackerVsMonteCarlo:
    def test_empirical_mse_matches_tracked(self):
        """1e6 trials at P=1, sigma^2=0.5, N=6: sample MSE within 3 se."""
        cfg = ch.ChannelConfig(p=1.0, sigma2_f=(0.5, 0.5), n=6, k=(1, 1))
        trials = 1_000_000
        res = an.run_batch("eol", cfg, PARAMS, seed=19, t0=0, t1=trials,
                           collect="moments")
        plans = mo.design_plan(cfg, PARAMS, "eol")
        for j, pl in enumerate(plans):
            m2 = res.extras["eps2_sum"][j] / trials
            m4 = res.extras["eps4_sum"][j] / trials
            se = np.sqrt((m4 - m2**2) / trials)
            for u in range(2):
                assert abs(m2[u] - pl.alpha_out[u]) < 3 * se[u], (pl.i, u)
            rho_emp = (res.extras["e12_sum"][j] / trials) / math.sqrt(m2[0] * m2[1])
            se_rho = (1 - pl.rho_out**2) / math.sqrt(trials)
            assert abs(rho_emp - pl.rho_out) < 3 * max(se_rho, 1e-6), pl.i

    def test_bler_dominance_observed(self):
        """EOL block errors at or below OL's within Monte-Carlo resolution."""
        cfg = cfg_at(0.0, 4)
        trials = 1_000_000
        ol = an.run_batch("ol", cfg, PARAMS, seed=23, t0=0, t1=trials)
        eol = an.run_batch("eol", cfg, PARAMS, seed=23, t0=0, t1=trials)
        for u in range(2):
            p_ol = ol.errors[u] / trials
            p_eol = eol.errors[u] / trials
            se = math.sqrt(
                p_ol * (1 - p_ol) / trials + p_eol * (1 - p_eol) / trials
            )
            assert p_eol <= p_ol + 3 * se
