"""Channel substrate tests: config validation, PAM constellations, bit maps,
and the transmit/feedback primitives."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gbcf_lab import channel as ch
from gbcf_lab import rng


class TestSnrConversion:
    def test_zero_db(self):
        assert ch.snr_db_to_variance(0.0, 1.0) == 1.0

    def test_three_db(self):
        # direct evaluation of the dB formula
        np.testing.assert_allclose(ch.snr_db_to_variance(3.0, 1.0), 0.501187, atol=1e-6)

    def test_minus_two_db(self):
        np.testing.assert_allclose(ch.snr_db_to_variance(-2.0, 1.0), 1.584893, atol=1e-6)

    def test_round_trip(self):
        var = ch.snr_db_to_variance(7.3, 2.5)
        np.testing.assert_allclose(ch.variance_to_snr_db(var, 2.5), 7.3, rtol=1e-12)

    def test_requires_positive_power(self):
        with pytest.raises(ValueError):
            ch.snr_db_to_variance(3.0, 0.0)


class TestChannelConfig:
    def test_symmetric_helper(self):
        cfg = ch.ChannelConfig.symmetric(3.0, 6, 2, snr_fb_db=10.0)
        assert cfg.sigma2_f[0] == cfg.sigma2_f[1]
        assert cfg.sigma2_fb[0] == cfg.sigma2_fb[1]
        assert cfg.k == (2, 2)
        assert cfg.noisy_feedback

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(p=0.0, sigma2_f=(1, 1), n=3, k=(1, 1)),
            dict(p=1.0, sigma2_f=(0, 1), n=3, k=(1, 1)),
            dict(p=1.0, sigma2_f=(1, 1), n=1, k=(1, 1)),
            dict(p=1.0, sigma2_f=(1, 1), n=3, k=(0, 1)),
            dict(p=1.0, sigma2_f=(1, 1), n=3, k=(25, 1)),
            dict(p=1.0, sigma2_f=(1, 1), n=3, k=(1, 1), sigma2_fb=(0, 1)),
        ],
    )
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(ValueError):
            ch.ChannelConfig(**kwargs)


class TestPamConstellation:
    def test_one_bit(self):
        c = ch.pam_constellation(1)
        assert c.eta == 1.0
        np.testing.assert_array_equal(c.points, [-1.0, 1.0])

    def test_two_bits(self):
        c = ch.pam_constellation(2)
        np.testing.assert_allclose(c.eta, 0.447214, atol=1e-6)
        np.testing.assert_allclose(
            c.points, [-1.341641, -0.447214, 0.447214, 1.341641], atol=1e-6
        )
        np.testing.assert_allclose((c.points**2).mean(), 1.0, atol=1e-12)

    def test_three_bits(self):
        c = ch.pam_constellation(3)
        np.testing.assert_allclose(c.eta, 0.218218, atol=1e-6)
        assert len(c.points) == 8

    @pytest.mark.parametrize("k", range(1, 25))
    def test_unit_power_all_k(self, k):
        c = ch.pam_constellation(k)
        np.testing.assert_allclose((c.points**2).mean(), 1.0, atol=1e-12)
        spacing = np.diff(c.points)
        assert (spacing > 0).all()
        np.testing.assert_allclose(spacing, 2 * c.eta, rtol=1e-9)

    @pytest.mark.parametrize("k", [0, 25, -1])
    def test_rejects_out_of_range(self, k):
        with pytest.raises(ValueError):
            ch.pam_constellation(k)

    def test_nearest_index_brute_force(self):
        c = ch.pam_constellation(3)
        vals = np.linspace(-2.5, 2.5, 101)
        got = c.nearest_index(vals)
        want = np.abs(vals[:, None] - c.points[None, :]).argmin(axis=1)
        np.testing.assert_array_equal(got, want)

    def test_nearest_index_tie_goes_low(self):
        c = ch.pam_constellation(1)
        assert c.nearest_index(0.0) == 0


class TestBitIndexMaps:
    def test_k1_identity(self):
        assert ch.bits_to_index([0]) == 0
        assert ch.bits_to_index([1]) == 1

    def test_msb_first(self):
        assert ch.index_to_bits(2, 2) == [1, 0]

    def test_round_trip_example(self):
        assert ch.bits_to_index(ch.index_to_bits(5, 3)) == 5

    @pytest.mark.parametrize("k", range(1, 11))
    def test_round_trip_exhaustive(self, k):
        for idx in range(2**k):
            assert ch.bits_to_index(ch.index_to_bits(idx, k)) == idx

    @given(st.integers(min_value=1, max_value=16), st.data())
    def test_round_trip_property(self, k, data):
        idx = data.draw(st.integers(min_value=0, max_value=2**k - 1))
        bits = ch.index_to_bits(idx, k)
        assert len(bits) == k
        assert ch.bits_to_index(bits) == idx

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            ch.index_to_bits(4, 2)
        with pytest.raises(ValueError):
            ch.index_to_bits(-1, 2)
        with pytest.raises(ValueError):
            ch.bits_to_index([0, 2])


class TestTransmit:
    def test_deterministic_given_seed(self):
        cfg = ch.ChannelConfig.symmetric(3.0, 3, 1)
        a = ch.transmit(0.7, cfg, rng.TrialRng(5, 0))
        b = ch.transmit(0.7, cfg, rng.TrialRng(5, 0))
        assert a == b

    def test_rejects_non_finite(self):
        cfg = ch.ChannelConfig.symmetric(3.0, 3, 1)
        with pytest.raises(ValueError):
            ch.transmit(float("nan"), cfg, rng.TrialRng(5, 0))

    def test_noise_variance_oracle(self):
        cfg = ch.ChannelConfig(p=1.0, sigma2_f=(0.5, 0.5), n=3, k=(1, 1))
        z, _ = ch.draw_noise(cfg, 42, np.arange(1_000_000))
        assert abs(z[0][:, 0].var() - 0.5) < 0.003

    def test_user_noise_independence_oracle(self):
        cfg = ch.ChannelConfig(p=1.0, sigma2_f=(0.5, 0.5), n=3, k=(1, 1))
        z, _ = ch.draw_noise(cfg, 42, np.arange(1_000_000))
        corr = np.corrcoef(z[0][:, 0], z[1][:, 0])[0, 1]
        assert abs(corr) < 0.003

    def test_noiseless_feedback_is_identity(self):
        cfg = ch.ChannelConfig.symmetric(3.0, 3, 1)
        assert ch.feed_back(1.23, 0, cfg, rng.TrialRng(0, 0)) == 1.23

    def test_noisy_feedback_adds_noise(self):
        cfg = ch.ChannelConfig.symmetric(3.0, 3, 1, snr_fb_db=5.0)
        y = ch.feed_back(1.23, 0, cfg, rng.TrialRng(0, 0))
        assert y != 1.23
