import numpy as np
import pytest
from scipy.stats import chisquare

from turboae_ti.channels import (
    Channel,
    ChannelError,
    ChannelParams,
    add_burst,
    add_chirp,
    awgn,
    chirp_window,
    ebno_db,
    ebno_to_snr_db,
    rician,
    rician_gains,
    snr_to_sigma,
)


class TestAwgn:
    def test_zero_sigma_is_identity(self, rng):
        x = rng.normal(size=100)
        np.testing.assert_array_equal(awgn(x, 0.0, rng), x)

    def test_noise_variance(self):
        rng = np.random.default_rng(7)
        x = np.zeros(10**6)
        y = awgn(x, 1.0, rng)
        assert np.var(y - x) == pytest.approx(1.0, rel=0.01)

    def test_seeded_determinism(self):
        x = np.ones(50)
        y1 = awgn(x, 0.5, np.random.default_rng(3))
        y2 = awgn(x, 0.5, np.random.default_rng(3))
        np.testing.assert_array_equal(y1, y2)


class TestRician:
    def test_large_K_zero_sigma_is_sqrt2_scaling(self):
        rng = np.random.default_rng(0)
        x = np.linspace(-1, 1, 64)
        y = rician(x, 1e12, 0.0, rng)
        np.testing.assert_allclose(y, np.sqrt(2) * x, rtol=1e-5)

    def test_rayleigh_unit_mean_square(self):
        rng = np.random.default_rng(1)
        h = rician_gains(0.0, 10**6, rng)
        assert np.mean(h**2) == pytest.approx(1.0, rel=0.01)

    def test_k10_mean_square(self):
        rng = np.random.default_rng(2)
        h = rician_gains(10.0, 10**6, rng)
        assert np.mean(h**2) == pytest.approx(21 / 11, rel=0.01)

    def test_negative_K_rejected(self, rng):
        with pytest.raises(ChannelError):
            rician_gains(-1.0, 10, rng)


class TestBurst:
    def test_zero_amplitude_unchanged(self, rng):
        y = rng.normal(size=120)
        out = add_burst(y, 0.0, 30, rng)
        np.testing.assert_array_equal(out, y)

    def test_burst_touches_only_window(self):
        y = np.zeros(120)
        out = add_burst(y, 2.0, 30, np.random.default_rng(0))
        changed = np.flatnonzero(out != 0)
        assert changed.size == 30
        assert changed[-1] - changed[0] == 29

    def test_near_full_window_start_range(self):
        n = 24
        starts = set()
        rng = np.random.default_rng(5)
        for _ in range(200):
            y = np.zeros(n)
            out = add_burst(y, 1.0, n - 1, rng)
            starts.add(int(np.flatnonzero(out != 0)[0]))
        assert starts == {0, 1}

    def test_oversized_burst_rejected(self, rng):
        with pytest.raises(ChannelError):
            add_burst(np.zeros(10), 1.0, 10, rng)

    def test_start_index_uniform(self):
        n, S = 120, 30
        rng = np.random.default_rng(11)
        counts = np.zeros(n - S + 1, dtype=int)
        for _ in range(20000):
            y = np.zeros(n)
            out = add_burst(y, 1.0, S, rng)
            counts[int(np.flatnonzero(out != 0)[0])] += 1
        assert chisquare(counts).pvalue > 0.01


class TestChirp:
    def test_zero_amplitude_unchanged(self, rng):
        y = rng.normal(size=120)
        out = add_chirp(y, 0.0, 0.0, 1.0, 1.0, 0.0, 30, rng)
        np.testing.assert_array_equal(out, y)

    def test_first_sample_is_zero_at_zero_phase(self):
        w = chirp_window(2.0, 0.5, 0.5, 1.0, 0.0, 8)
        assert w[0] == 0.0

    def test_pure_tone_quarter_period(self):
        # f0 = f1 = 1, sampled at t = 0.25 -> sigma_b^2 * sin(pi/2)
        w = chirp_window(3.0, 1.0, 1.0, 1.0, 0.0, 4)
        assert w[1] == pytest.approx(9.0)

    def test_literal_form_grows_without_bound(self):
        w = chirp_window(1.0, 0.0, 10.0, 1.0, 0.0, 100, literal=True)
        assert np.all(np.diff(w) > 0)

    def test_gaussian_mode_uses_rng(self):
        y = np.zeros(120)
        out1 = add_chirp(y, 1.0, 0.0, 1.0, 1.0, 0.0, 30,
                         np.random.default_rng(0), gaussian=True)
        out2 = add_chirp(y, 1.0, 0.0, 1.0, 1.0, 0.0, 30,
                         np.random.default_rng(0), gaussian=True)
        np.testing.assert_array_equal(out1, out2)
        assert np.any(out1 != 0)


class TestSnrAccounting:
    def test_zero_db_gives_unit_sigma(self):
        assert snr_to_sigma(0.0) == 1.0

    def test_rate_third_offset(self):
        assert ebno_db(0.0, 1 / 3) == pytest.approx(10 * np.log10(3), abs=1e-9)

    def test_rate_one_identity(self):
        for snr in (-3.0, 0.0, 2.5):
            assert ebno_db(snr, 1.0) == snr
            assert ebno_to_snr_db(snr, 1.0) == snr

    def test_invalid_rate(self):
        with pytest.raises(ChannelError):
            ebno_db(0.0, 0.0)


class TestChannel:
    @pytest.mark.parametrize("kind", ["awgn", "rician", "bursty_rician", "chirp_rician"])
    def test_shape_preserved(self, kind, rng):
        params = ChannelParams(kind=kind, K=10.0, sigma=0.5, sigma_b=1.0)
        x = rng.normal(size=(5, 120))
        y = Channel(params)(x, np.random.default_rng(0))
        assert y.shape == x.shape
        assert np.all(np.isfinite(y))

    def test_noiseless_awgn_is_identity(self, rng):
        x = rng.normal(size=(2, 60))
        y = Channel(ChannelParams(kind="awgn", sigma=0.0))(x, np.random.default_rng(0))
        np.testing.assert_array_equal(y, x)

    def test_noiseless_large_K_is_scaling(self, rng):
        x = rng.normal(size=(2, 60))
        params = ChannelParams(kind="rician", K=1e12, sigma=0.0)
        y = Channel(params)(x, np.random.default_rng(0))
        np.testing.assert_allclose(y, np.sqrt(2) * x, rtol=1e-5)

    def test_seeded_reproducibility(self, rng):
        params = ChannelParams(kind="bursty_rician", K=2.0, sigma=0.7, sigma_b=3.0)
        x = rng.normal(size=(4, 120))
        y1 = Channel(params)(x, np.random.default_rng(9))
        y2 = Channel(params)(x, np.random.default_rng(9))
        np.testing.assert_array_equal(y1, y2)

    def test_default_burst_len_is_quarter_block(self):
        chan = Channel(ChannelParams(kind="bursty_rician"))
        assert chan.default_burst_len(120) == 10  # L/4 = 10 symbols for L=40

    def test_invalid_kind_rejected(self):
        with pytest.raises(ChannelError):
            ChannelParams(kind="laplace")
