import numpy as np
import pytest
import torch

from turboae_ti.codec import CodecConfig, CodecError, TurboCodec, power_normalize
from turboae_ti.interleaver import HardInterleaver, SoftInterleaver
from turboae_ti.training import loss


def random_bits(n, L, seed=0):
    gen = torch.Generator().manual_seed(seed)
    return (torch.rand(n, L, generator=gen) < 0.5).double()


class TestPowerNormalize:
    def test_already_normalized(self):
        x = np.array([1.0, -1.0, 1.0, -1.0])
        np.testing.assert_allclose(power_normalize(x), x)

    def test_shift_and_scale(self):
        np.testing.assert_allclose(power_normalize(np.array([2.0, 0.0, 2.0, 0.0])),
                                   [1.0, -1.0, 1.0, -1.0])

    def test_constant_maps_to_zero(self):
        np.testing.assert_allclose(power_normalize(np.full(8, 3.7)), np.zeros(8))

    def test_torch_matches_numpy(self):
        x = np.random.default_rng(0).normal(size=32)
        np.testing.assert_allclose(power_normalize(torch.from_numpy(x)).numpy(),
                                   power_normalize(x))


class TestEncoder:
    def test_output_shape(self, tiny_model):
        x = tiny_model.encode(random_bits(5, 8))
        assert x.shape == (5, 3, 8)

    def test_deterministic(self, tiny_model):
        bits = random_bits(4, 8)
        x1 = tiny_model.encode(bits)
        x2 = tiny_model.encode(bits)
        torch.testing.assert_close(x1, x2)

    def test_power_constraint(self, tiny_model):
        tiny_model.train()
        x = tiny_model.encode(random_bits(64, 8)).detach()
        assert abs(float(x.mean())) < 1e-6
        assert abs(float(x.var(unbiased=False)) - 1.0) < 1e-6

    def test_length_mismatch_rejected(self, tiny_model):
        with pytest.raises(CodecError):
            tiny_model.encode(random_bits(2, 9))

    def test_hard_interleaver_accepted(self, tiny_arch):
        torch.manual_seed(0)
        pi = HardInterleaver.random(8, np.random.default_rng(2))
        model = TurboCodec(tiny_arch, pi, trainable_interleaver=False)
        x = model.encode(random_bits(3, 8))
        assert x.shape == (3, 3, 8)


class TestDecoder:
    def test_shapes_and_range(self, tiny_model):
        y = torch.randn(6, 3, 8, dtype=torch.float64)
        bhat, soft = tiny_model.decode(y)
        assert bhat.shape == (6, 8)
        assert soft.shape == (6, 8)
        assert float(soft.min()) > 0.0 and float(soft.max()) < 1.0

    def test_deterministic(self, tiny_model):
        y = torch.randn(3, 3, 8, dtype=torch.float64)
        _, s1 = tiny_model.decode(y)
        _, s2 = tiny_model.decode(y)
        torch.testing.assert_close(s1, s2)

    def test_untrained_decoder_is_a_coin_flip(self, tiny_model):
        gen = torch.Generator().manual_seed(3)
        n = 2500  # 20k bits
        bits = random_bits(n, 8, seed=4)
        y = torch.randn(n, 3, 8, generator=gen, dtype=torch.float64)
        bhat, _ = tiny_model.decode(y)
        ber = float((bhat != bits.long()).double().mean())
        assert ber == pytest.approx(0.5, abs=0.05)

    def test_length_mismatch_rejected(self, tiny_model):
        with pytest.raises(CodecError):
            tiny_model.decode(torch.randn(2, 3, 9, dtype=torch.float64))

    @pytest.mark.parametrize("iters,features", [(1, 3), (3, 5), (2, 1)])
    def test_output_length_invariant_to_depth(self, iters, features):
        torch.manual_seed(1)
        arch = CodecConfig(block_len=12, enc_filters=4, enc_kernel=3,
                           dec_filters=4, dec_kernel=3, dec_iters=iters,
                           dec_features=features)
        model = TurboCodec(arch)
        _, soft = model.decode(torch.randn(2, 3, 12, dtype=torch.float64))
        assert soft.shape == (2, 12)


class TestEndToEndGradients:
    def test_all_groups_match_finite_differences(self, tiny_model):
        tiny_model.train()
        bits = random_bits(3, 8, seed=9)

        def objective():
            soft = tiny_model.decode_soft(tiny_model.encode(bits))
            return loss(bits, soft, tiny_model.T, 1.0)

        val = objective()
        tiny_model.zero_grad()
        val.backward()

        gen = torch.Generator().manual_seed(17)
        groups = {
            "encoder": tiny_model.encoder_parameters(),
            "decoder": tiny_model.decoder_parameters(),
            "interleaver": [tiny_model.T],
        }
        for name, params in groups.items():
            assert all(torch.isfinite(p.grad).all() for p in params)
            vs = [torch.randn(p.shape, generator=gen, dtype=torch.float64)
                  for p in params]
            norm = sum(float((v * v).sum()) for v in vs) ** 0.5
            vs = [v / norm for v in vs]
            analytic = sum(float((p.grad * v).sum()) for p, v in zip(params, vs))
            h = 1e-6
            with torch.no_grad():
                for p, v in zip(params, vs):
                    p.add_(h * v)
                fp = float(objective().detach())
                for p, v in zip(params, vs):
                    p.sub_(2 * h * v)
                fm = float(objective().detach())
                for p, v in zip(params, vs):
                    p.add_(h * v)
            fd = (fp - fm) / (2 * h)
            assert abs(analytic - fd) / (abs(analytic) + abs(fd)) < 1e-3, name


class TestHardening:
    def test_hardened_copy_uses_permutation(self, tiny_model):
        hard = tiny_model.hardened()
        t = hard.T.numpy()
        assert np.array_equal(np.sort(t.argmax(axis=1)), np.arange(8))
        assert set(np.unique(t)) <= {0.0, 1.0}

    def test_hardened_preserves_weights(self, tiny_model):
        hard = tiny_model.hardened()
        w0 = tiny_model.branches[0].convs[0].weight
        torch.testing.assert_close(hard.branches[0].convs[0].weight, w0)

    def test_permutation_interleaver_round_trips_exactly(self, tiny_arch):
        torch.manual_seed(2)
        pi = HardInterleaver.random(8, np.random.default_rng(0))
        model = TurboCodec(tiny_arch, SoftInterleaver.from_hard(pi))
        assert np.array_equal(model.hard_interleaver().perm, pi.perm)
