"""Neural rate-1/3 codec: three-branch convolutional encoder with power
normalization and an iterative convolutional decoder, both wired through a
shared (soft or hard) interleaver.

All modules run in float64 on CPU so gradient checks against finite
differences are meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .interleaver import (
    HardInterleaver,
    SoftInterleaver,
    harden,
    interleave_tensor,
    deinterleave_tensor,
)


class CodecError(ValueError):
    """Contract violation on codec inputs."""


@dataclass
class CodecConfig:
    """Architecture descriptor; serialized into checkpoints so they are
    self-describing."""

    block_len: int = 40
    enc_filters: int = 100
    enc_layers: int = 2
    enc_kernel: int = 5
    dec_filters: int = 100
    dec_layers: int = 5
    dec_kernel: int = 5
    dec_iters: int = 6      # P; 2P decoder blocks in total
    dec_features: int = 5   # F, width of intermediate posteriors
    activation: str = "elu"
    # stride is fixed at 1: every block must be length-preserving for the
    # interleaver wiring to type-check at shape (L, .)
    stride: int = 1

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def tiny(cls, block_len: int = 8) -> "CodecConfig":
        return cls(block_len=block_len, enc_filters=4, enc_kernel=3,
                   dec_filters=4, dec_kernel=3, dec_iters=2)


def power_normalize(x, eps: float = 1e-8):
    """Shift/scale samples to zero mean, unit variance; constant input maps
    to zeros via the eps guard."""
    if isinstance(x, torch.Tensor):
        std = torch.clamp(torch.sqrt(x.var(unbiased=False)), min=eps)
        return (x - x.mean()) / std
    x = np.asarray(x, dtype=np.float64)
    return (x - x.mean()) / max(float(x.std()), eps)


def _act(name: str):
    try:
        return getattr(F, name)
    except AttributeError as exc:
        raise CodecError(f"unknown activation {name!r}") from exc


class ConvBlock(nn.Module):
    """n_layers same-padded 1-D convolutions followed by a per-position linear
    layer (a kernel-1 convolution)."""

    def __init__(self, in_ch: int, filters: int, out_ch: int, n_layers: int,
                 kernel: int, activation: str):
        super().__init__()
        self.activation = activation
        convs = []
        for i in range(n_layers):
            convs.append(nn.Conv1d(in_ch if i == 0 else filters, filters,
                                   kernel, stride=1, padding="same"))
        self.convs = nn.ModuleList(convs)
        self.linear = nn.Conv1d(filters, out_ch, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        act = _act(self.activation)
        for conv in self.convs:
            x = act(conv(x))
        return self.linear(x)


class PowerNormalizer(nn.Module):
    """Normalize codeword samples to zero mean / unit variance.

    Training uses the statistics of the current batch (and updates running
    estimates); eval uses the running estimates so single-block inference is
    well-defined.
    """

    def __init__(self, momentum: float = 0.1, eps: float = 1e-8):
        super().__init__()
        self.momentum = momentum
        self.eps = eps
        self.register_buffer("running_mean", torch.zeros(()))
        self.register_buffer("running_var", torch.ones(()))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if self.training:
            mean = x.mean()
            var = x.var(unbiased=False)
            with torch.no_grad():
                self.running_mean.mul_(1 - self.momentum).add_(self.momentum * mean)
                self.running_var.mul_(1 - self.momentum).add_(self.momentum * var)
        else:
            mean = self.running_mean
            var = self.running_var
        return (x - mean) / torch.clamp(torch.sqrt(var), min=self.eps)


class TurboCodec(nn.Module):
    """Encoder + iterative decoder sharing one interleaver matrix.

    The interleaver is stored as an L x L matrix `T`: a trainable parameter
    when `trainable_interleaver` is set, otherwise a fixed buffer (e.g. a hard
    permutation matrix for the uniform-interleaver baseline).
    """

    def __init__(self, config: CodecConfig, interleaver=None,
                 trainable_interleaver: bool = True):
        super().__init__()
        self.config = config
        L, Fdim, P = config.block_len, config.dec_features, config.dec_iters

        if interleaver is None:
            interleaver = SoftInterleaver.uniform(L)
        if isinstance(interleaver, HardInterleaver):
            t0 = interleaver.as_matrix()
        elif isinstance(interleaver, SoftInterleaver):
            t0 = interleaver.entries
        else:
            t0 = np.asarray(interleaver, dtype=np.float64)
        if t0.shape != (L, L):
            raise CodecError("interleaver size does not match block_len")
        t0 = torch.as_tensor(t0, dtype=torch.float64)
        self.trainable_interleaver = trainable_interleaver
        if trainable_interleaver:
            self.T = nn.Parameter(t0)
        else:
            self.register_buffer("T", t0)

        self.branches = nn.ModuleList([
            ConvBlock(1, config.enc_filters, 1, config.enc_layers,
                      config.enc_kernel, config.activation)
            for _ in range(3)
        ])
        self.power_norm = PowerNormalizer()

        dec1, dec2 = [], []
        for i in range(P):
            dec1.append(ConvBlock(2 + Fdim, config.dec_filters, Fdim,
                                  config.dec_layers, config.dec_kernel,
                                  config.activation))
            out_ch = 1 if i == P - 1 else Fdim
            dec2.append(ConvBlock(2 + Fdim, config.dec_filters, out_ch,
                                  config.dec_layers, config.dec_kernel,
                                  config.activation))
        self.dec1 = nn.ModuleList(dec1)
        self.dec2 = nn.ModuleList(dec2)
        self.to(torch.float64)

    # -- encoder ----------------------------------------------------------

    def encode(self, bits: torch.Tensor) -> torch.Tensor:
        """Map a (B, L) bit batch to power-normalized samples (B, 3, L)."""
        if bits.dim() != 2 or bits.shape[1] != self.config.block_len:
            raise CodecError("bits must have shape (B, block_len)")
        u = 2.0 * bits.to(torch.float64) - 1.0  # {0,1} -> {-1,+1}
        x1 = self.branches[0](u.unsqueeze(1)).squeeze(1)
        x2 = self.branches[1](u.unsqueeze(1)).squeeze(1)
        x3 = self.branches[2](interleave_tensor(self.T, u).unsqueeze(1)).squeeze(1)
        x = torch.stack([x1, x2, x3], dim=1)
        return self.power_norm(x)

    # -- decoder ----------------------------------------------------------

    def decode_soft(self, y: torch.Tensor) -> torch.Tensor:
        """Iterative decoding of (B, 3, L) received samples to per-bit
        probabilities in (0, 1)."""
        L, Fdim, P = (self.config.block_len, self.config.dec_features,
                      self.config.dec_iters)
        if y.dim() != 3 or y.shape[1] != 3 or y.shape[2] != L:
            raise CodecError("received samples must have shape (B, 3, block_len)")
        y = y.to(torch.float64)
        y1, y2, y3 = y[:, 0], y[:, 1], y[:, 2]
        y1_pi = interleave_tensor(self.T, y1)
        prior = y.new_zeros(y.shape[0], L, Fdim)
        q2 = None
        for i in range(P):
            inp1 = torch.cat([y1.unsqueeze(1), y2.unsqueeze(1),
                              prior.transpose(1, 2)], dim=1)
            q1 = self.dec1[i](inp1).transpose(1, 2)              # (B, L, F)
            inp2 = torch.cat([y1_pi.unsqueeze(1), y3.unsqueeze(1),
                              interleave_tensor(self.T, q1).transpose(1, 2)],
                             dim=1)
            q2 = self.dec2[i](inp2).transpose(1, 2)              # (B, L, F or 1)
            if i < P - 1:
                prior = deinterleave_tensor(self.T, q2)
        logits = deinterleave_tensor(self.T, q2).squeeze(-1)     # pi^{-1}(q2_P)
        return torch.sigmoid(logits)

    def decode(self, y: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Hard decisions plus soft outputs; inference-only (no autograd)."""
        with torch.no_grad():
            soft = self.decode_soft(y)
        return (soft > 0.5).to(torch.int64), soft

    # -- interleaver helpers ----------------------------------------------

    def soft_interleaver(self) -> SoftInterleaver:
        return SoftInterleaver(self.T.detach().cpu().numpy().copy())

    def hard_interleaver(self) -> HardInterleaver:
        return harden(self.T.detach().cpu().numpy())

    def hardened(self) -> "TurboCodec":
        """Copy of this codec with T frozen to the hardened permutation."""
        clone = TurboCodec(self.config, self.hard_interleaver(),
                           trainable_interleaver=False)
        state = {k: v for k, v in self.state_dict().items() if k != "T"}
        clone.load_state_dict(state, strict=False)
        clone.eval()
        return clone

    def encoder_parameters(self):
        return list(self.branches.parameters())

    def decoder_parameters(self):
        return list(self.dec1.parameters()) + list(self.dec2.parameters())
