import numpy as np
import pytest
import torch

from turboae_ti.codec import CodecConfig, TurboCodec
from turboae_ti.interleaver import SoftInterleaver


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_arch():
    return CodecConfig(block_len=8, enc_filters=4, enc_kernel=3,
                       dec_filters=4, dec_kernel=3, dec_iters=2)


@pytest.fixture
def tiny_model(tiny_arch):
    torch.manual_seed(0)
    t0 = SoftInterleaver.random(tiny_arch.block_len, np.random.default_rng(0))
    return TurboCodec(tiny_arch, t0)


def random_permutation_matrix(size, rng):
    m = np.zeros((size, size))
    m[np.arange(size), rng.permutation(size)] = 1.0
    return m


def random_doubly_stochastic(size, rng, n_perms=4):
    """Convex combination of >= 2 distinct permutation matrices."""
    while True:
        perms = [rng.permutation(size) for _ in range(n_perms)]
        if any(not np.array_equal(perms[0], p) for p in perms[1:]):
            break
    w = rng.dirichlet(np.ones(n_perms))
    m = np.zeros((size, size))
    for wi, p in zip(w, perms):
        m[np.arange(size), p] += wi
    return m
