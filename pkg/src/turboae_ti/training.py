"""Alternating encoder/decoder training with the interleaver penalty and a
projection step after every update.

Each epoch runs an encoder phase (encoder weights + T updated, decoder
frozen) followed by a decoder phase (decoder weights + T updated, encoder
frozen).  T is clipped non-negative and re-normalized column- then row-wise
after every gradient step, so it stays on the relaxed permutation polytope
throughout.
"""

from __future__ import annotations

import copy
import csv
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from .channels import Channel, ChannelParams, snr_to_sigma
from .codec import CodecConfig, TurboCodec
from .interleaver import SoftInterleaver, penalty_tensor, project_tensor_


class TrainingError(RuntimeError):
    pass


class TrainingDivergedError(TrainingError):
    """Non-finite loss or gradient; carries the last consistent state."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class CheckpointMismatchError(TrainingError):
    """Checkpoint architecture does not match the requested configuration."""


@dataclass
class TrainingConfig:
    epochs: int = 10
    steps_enc: int = 100
    steps_dec: int = 500
    batch_size: int = 500
    enc_snr_db: float = 2.0
    dec_snr_db: tuple[float, float] = (-1.5, 2.0)   # per-batch uniform draw
    lr: float = 1e-4
    lr_interleaver: float | None = None
    penalty_weight: float = 1.0
    penalty_warmup_frac: float = 0.1
    optimizer: str = "adam"                          # "sgd" is the literal alternating-descent mode
    channel: ChannelParams = field(default_factory=ChannelParams)
    seed: int = 0
    trainable_interleaver: bool = True
    interleaver_init: str = "random"                 # or "identity_noise"
    val_blocks: int = 500
    val_snr_db: float = 1.0
    # optional curriculum: regress the encoder onto feedforward parity-code
    # codewords before any end-to-end epochs, then let the decoder catch up
    # alone for the first `dec_only_epochs` epochs.  Both default off.
    warm_start_steps: int = 0
    dec_only_epochs: int = 0

    def __post_init__(self):
        if isinstance(self.channel, dict):
            self.channel = ChannelParams(**self.channel)
        if isinstance(self.dec_snr_db, list):
            self.dec_snr_db = tuple(self.dec_snr_db)
        if min(self.epochs, self.steps_enc, self.steps_dec, self.batch_size) < 0:
            raise TrainingError("epochs, steps and batch size must be non-negative")
        if min(self.warm_start_steps, self.dec_only_epochs) < 0:
            raise TrainingError("curriculum settings must be non-negative")
        if self.lr <= 0:
            raise TrainingError("learning rate must be positive")
        if self.penalty_weight < 0:
            raise TrainingError("penalty weight must be non-negative")
        if self.optimizer not in ("adam", "sgd"):
            raise TrainingError(f"unknown optimizer {self.optimizer!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["channel"] = self.channel.to_dict()
        d["dec_snr_db"] = [float(v) for v in np.atleast_1d(self.dec_snr_db)]
        return d


@dataclass
class TrainState:
    model: TurboCodec
    arch: CodecConfig
    config: TrainingConfig
    opt_enc: torch.optim.Optimizer
    opt_dec: torch.optim.Optimizer
    epoch: int = 0
    history: list = field(default_factory=list)
    config_hash: str | None = None

    def soft_interleaver(self) -> SoftInterleaver:
        return self.model.soft_interleaver()


def loss(bits: torch.Tensor, soft_out: torch.Tensor, t: torch.Tensor,
         penalty_weight: float) -> torch.Tensor:
    """Joint objective: bitwise binary cross-entropy plus the weighted
    interleaver penalty."""
    soft_out = soft_out.clamp(1e-7, 1.0 - 1e-7)
    bce = F.binary_cross_entropy(soft_out, bits.to(soft_out.dtype))
    return bce + penalty_weight * penalty_tensor(t)


def _make_optimizer(kind: str, params, t_param, lr: float, lr_t: float):
    groups = [{"params": params, "lr": lr}]
    if t_param is not None:
        groups.append({"params": [t_param], "lr": lr_t})
    if kind == "adam":
        return torch.optim.Adam(groups)
    return torch.optim.SGD(groups)


def init_state(config: TrainingConfig, arch: CodecConfig) -> TrainState:
    torch.manual_seed(config.seed)
    rng = np.random.default_rng(config.seed)
    if config.interleaver_init == "identity_noise":
        t0 = SoftInterleaver.identity_plus_noise(arch.block_len, rng)
    else:
        t0 = SoftInterleaver.random(arch.block_len, rng)
    model = TurboCodec(arch, t0,
                       trainable_interleaver=config.trainable_interleaver)
    lr_t = config.lr_interleaver if config.lr_interleaver is not None else config.lr
    t_param = model.T if config.trainable_interleaver else None
    opt_enc = _make_optimizer(config.optimizer, model.encoder_parameters(),
                              t_param, config.lr, lr_t)
    opt_dec = _make_optimizer(config.optimizer, model.decoder_parameters(),
                              t_param, config.lr, lr_t)
    return TrainState(model, arch, config, opt_enc, opt_dec)


def _effective_penalty_weight(config: TrainingConfig, epoch: int) -> float:
    warmup = math.ceil(config.penalty_warmup_frac * config.epochs)
    if warmup <= 0:
        return config.penalty_weight
    return config.penalty_weight * min(1.0, (epoch + 1) / warmup)


def _phase_snr(config: TrainingConfig, phase: str, rng: np.random.Generator) -> float:
    snr = config.enc_snr_db if phase == "enc" else config.dec_snr_db
    lohi = np.atleast_1d(np.asarray(snr, dtype=np.float64))
    if lohi.size == 1:
        return float(lohi[0])
    return float(rng.uniform(lohi[0], lohi[1]))


def run_phase(state: TrainState, config: TrainingConfig, phase: str,
              epoch: int, torch_gen: torch.Generator,
              np_rng: np.random.Generator) -> dict:
    """One encoder ("enc") or decoder ("dec") phase; returns summary stats."""
    model = state.model
    opt = state.opt_enc if phase == "enc" else state.opt_dec
    steps = config.steps_enc if phase == "enc" else config.steps_dec
    lam = _effective_penalty_weight(config, epoch)
    L = state.arch.block_len
    model.train()
    losses = []
    for _ in range(steps):
        bits = (torch.rand(config.batch_size, L, generator=torch_gen,
                           dtype=torch.float64) < 0.5).to(torch.float64)
        sigma = snr_to_sigma(_phase_snr(config, phase, np_rng))
        chan = Channel(config.channel.with_sigma(sigma))
        x = model.encode(bits)
        gain, additive = chan.distortion((config.batch_size, 3 * L), np_rng)
        shape = (config.batch_size, 3, L)
        y = (torch.from_numpy(gain.reshape(shape)) * x
             + torch.from_numpy(additive.reshape(shape)))
        soft = model.decode_soft(y)
        f = loss(bits, soft, model.T, lam)
        if not torch.isfinite(f):
            raise TrainingDivergedError(
                f"non-finite loss in {phase} phase at epoch {epoch}", state)
        model.zero_grad(set_to_none=True)
        f.backward()
        opt.step()
        if config.trainable_interleaver:
            project_tensor_(model.T)
        losses.append(float(f.detach()))
    return {
        "epoch": epoch,
        "phase": phase,
        "loss": float(np.mean(losses)) if losses else float("nan"),
        "penalty": float(penalty_tensor(model.T.detach())),
    }


def parity_code_codewords(bits: np.ndarray, perm: np.ndarray,
                          taps: tuple[int, ...] = (0, 1, 3)) -> np.ndarray:
    """Codewords of a rate-1/3 feedforward convolutional code: systematic
    branch, a parity branch (XOR of the bits delayed by each tap, with the
    shift register starting from zeros), and the same parity computed on the
    permuted bits.  Returns +/-1 samples of shape (B, 3, L)."""
    b = np.asarray(bits, dtype=np.int64)
    if b.ndim != 2:
        raise TrainingError("bits must have shape (B, L)")
    if max(taps) >= b.shape[1]:
        raise TrainingError("parity taps must be shorter than the block")

    def par(x):
        p = np.zeros_like(x)
        for t in taps:
            shifted = np.roll(x, t, axis=1)
            shifted[:, :t] = 0
            p ^= shifted
        return p

    words = np.stack([b, par(b), par(b[:, perm])], axis=1)
    return 2.0 * words.astype(np.float64) - 1.0


def warm_start_encoder(state: TrainState, steps: int | None = None,
                       batch_size: int = 256, lr: float = 2e-3,
                       taps: tuple[int, ...] = (0, 1, 3)) -> TrainState:
    """Curriculum stage zero: set T to a seeded hard permutation and regress
    the encoder branches onto the matching feedforward parity-code codewords.

    Small blocks trained end to end from a random start tend to collapse to a
    repetition-equivalent code; starting from a convolutional code with real
    memory gives the alternating phases a better basin.  Decoder weights and
    optimizer state are untouched.
    """
    config = state.config
    if steps is None:
        steps = config.warm_start_steps
    model = state.model
    L = state.arch.block_len
    perm = np.random.default_rng(config.seed).permutation(L)
    pmat = np.zeros((L, L), dtype=np.float64)
    pmat[np.arange(L), perm] = 1.0
    with torch.no_grad():
        model.T.copy_(torch.from_numpy(pmat))
    opt = torch.optim.Adam(model.encoder_parameters(), lr=lr)
    gen = torch.Generator().manual_seed(
        (config.seed * 1_000_003 + 0x57A7) % 2**63)
    model.train()
    mse = float("nan")
    for _ in range(steps):
        bits = (torch.rand(batch_size, L, generator=gen,
                           dtype=torch.float64) < 0.5).to(torch.float64)
        target = torch.from_numpy(
            parity_code_codewords(bits.numpy(), perm, taps))
        f = ((model.encode(bits) - target) ** 2).mean()
        if not torch.isfinite(f):
            raise TrainingDivergedError("non-finite loss in warm start", state)
        opt.zero_grad()
        f.backward()
        opt.step()
        mse = float(f.detach())
    state.history.append({"epoch": state.epoch, "phase": "warm", "loss": mse,
                          "penalty": float(penalty_tensor(model.T.detach()))})
    return state


def encoder_phase(state: TrainState, config: TrainingConfig | None = None,
                  epoch: int | None = None) -> TrainState:
    config = config or state.config
    epoch = state.epoch if epoch is None else epoch
    gen = torch.Generator().manual_seed((config.seed * 1_000_003 + epoch * 2) % 2**63)
    rng = np.random.default_rng((config.seed, epoch, 0))
    state.history.append(run_phase(state, config, "enc", epoch, gen, rng))
    return state


def decoder_phase(state: TrainState, config: TrainingConfig | None = None,
                  epoch: int | None = None) -> TrainState:
    config = config or state.config
    epoch = state.epoch if epoch is None else epoch
    gen = torch.Generator().manual_seed((config.seed * 1_000_003 + epoch * 2 + 1) % 2**63)
    rng = np.random.default_rng((config.seed, epoch, 1))
    state.history.append(run_phase(state, config, "dec", epoch, gen, rng))
    return state


def validation_ber(model: TurboCodec, channel: ChannelParams, snr_db: float,
                   n_blocks: int, seed: int) -> float:
    """Monte-Carlo BER of the current (soft-interleaver) model."""
    was_training = model.training
    model.eval()
    L = model.config.block_len
    rng = np.random.default_rng((seed, 0xBE7))
    bits = rng.integers(0, 2, size=(n_blocks, L))
    chan = Channel(channel.with_sigma(snr_to_sigma(snr_db)))
    with torch.no_grad():
        x = model.encode(torch.from_numpy(bits.astype(np.float64)))
        gain, additive = chan.distortion((n_blocks, 3 * L), rng)
        shape = (n_blocks, 3, L)
        y = (torch.from_numpy(gain.reshape(shape)) * x
             + torch.from_numpy(additive.reshape(shape)))
        bhat, _ = model.decode(y)
    if was_training:
        model.train()
    return float((bhat.numpy() != bits).mean())


def _train_epochs(state: TrainState, config: TrainingConfig, epochs: int,
                  out_dir: str | Path | None = None) -> TrainState:
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    for _ in range(epochs):
        e = state.epoch
        if e >= config.dec_only_epochs:
            encoder_phase(state, config, e)
        decoder_phase(state, config, e)
        ber = validation_ber(state.model, config.channel, config.val_snr_db,
                             config.val_blocks, config.seed + e)
        state.history[-1]["val_ber"] = ber
        state.epoch = e + 1
        if out is not None:
            save_checkpoint(state, out / f"epoch_{state.epoch:04d}.pt")
            write_history(state.history, out / "history.csv")
    return state


def train(config: TrainingConfig, arch: CodecConfig,
          out_dir: str | Path | None = None) -> TrainState:
    """Full alternating training from scratch; reproducible from config.seed.

    When `config.warm_start_steps` is set, the encoder is first regressed onto
    feedforward parity-code codewords (see `warm_start_encoder`); when
    `config.dec_only_epochs` is set, encoder phases are skipped for that many
    initial epochs so the decoder can catch up.
    """
    state = init_state(config, arch)
    if config.warm_start_steps > 0:
        warm_start_encoder(state)
    return _train_epochs(state, config, config.epochs, out_dir)


def finetune(state: TrainState, new_channel: ChannelParams, epochs: int = 100,
             out_dir: str | Path | None = None) -> TrainState:
    """Continue training on a new channel from existing weights and T."""
    config = copy.deepcopy(state.config)
    config.channel = new_channel
    state.config = config
    return _train_epochs(state, config, epochs, out_dir)


def rician_train_for_awgn(config: TrainingConfig, arch: CodecConfig,
                          out_dir: str | Path | None = None,
                          K: float = 10.0) -> TrainState:
    """Rician-training protocol: optimize on a Rician K=10 channel even though
    the evaluation target is AWGN."""
    config = copy.deepcopy(config)
    config.channel = ChannelParams(kind="rician", K=K, sigma=config.channel.sigma)
    return train(config, arch, out_dir)


# -- persistence -----------------------------------------------------------


def save_checkpoint(state: TrainState, path: str | Path,
                    config_hash: str | None = None) -> None:
    payload = {
        "arch": state.arch.to_dict(),
        "train_config": state.config.to_dict(),
        "model_state": state.model.state_dict(),
        "opt_enc": state.opt_enc.state_dict(),
        "opt_dec": state.opt_dec.state_dict(),
        "epoch": state.epoch,
        "history": state.history,
        "seed": state.config.seed,
        "config_hash": config_hash if config_hash is not None else state.config_hash,
    }
    torch.save(payload, path)


def load_checkpoint(path: str | Path,
                    expect_arch: CodecConfig | None = None) -> TrainState:
    payload = torch.load(path, weights_only=False)
    arch = CodecConfig(**payload["arch"])
    if expect_arch is not None and arch.to_dict() != expect_arch.to_dict():
        raise CheckpointMismatchError(
            f"checkpoint architecture {arch} does not match configured {expect_arch}")
    config = TrainingConfig(**payload["train_config"])
    state = init_state(config, arch)
    state.model.load_state_dict(payload["model_state"])
    state.opt_enc.load_state_dict(payload["opt_enc"])
    state.opt_dec.load_state_dict(payload["opt_dec"])
    state.epoch = payload["epoch"]
    state.history = payload["history"]
    state.config_hash = payload.get("config_hash")
    return state


def checkpoint_hash(path: str | Path) -> str | None:
    return torch.load(path, weights_only=False).get("config_hash")


def write_history(history: list[dict], path: str | Path) -> None:
    fields = ["epoch", "phase", "loss", "penalty", "val_ber"]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in history:
            writer.writerow({k: row.get(k, "") for k in fields})
