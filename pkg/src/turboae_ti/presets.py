"""Shipped experiment presets, one per standard channel setup, at two scales:

* ``desk``: reduced filters/epochs so a full train/eval cycle runs on a
  laptop CPU in minutes.
* ``full``: the complete training budget (100 filters, 6 decoder iterations,
  batch 500).  Not exercised in CI.

The per-phase training SNR intervals are tunable defaults; override them via
a config file when an experiment calls for a different noise schedule.
"""

from __future__ import annotations

from .channels import ChannelParams
from .codec import CodecConfig
from .config import ConfigError, ExperimentConfig
from .training import TrainingConfig

_CHANNELS = {
    "awgn": ChannelParams(kind="awgn"),
    "rician_k10": ChannelParams(kind="rician", K=10.0),
    "rayleigh": ChannelParams(kind="rician", K=0.0),
    "bursty_rician": ChannelParams(kind="bursty_rician", K=10.0, sigma_b=2.0),
    "chirp_rician": ChannelParams(kind="chirp_rician", K=10.0, sigma_b=2.0,
                                  f0=0.05, f1=0.45, t_sweep=1.0),
}

# (train channel, eval channel) per preset; rician_train_awgn is the
# train-on-Rician / test-on-AWGN protocol
_PRESETS = {
    "awgn_l40": (40, "awgn", "awgn"),
    "rician_k10_l40": (40, "rician_k10", "rician_k10"),
    "rayleigh_l40": (40, "rayleigh", "rayleigh"),
    "bursty_rician_l40": (40, "bursty_rician", "bursty_rician"),
    "chirp_rician_l40": (40, "chirp_rician", "chirp_rician"),
    "rician_train_awgn_l40": (40, "rician_k10", "awgn"),
    "awgn_l100": (100, "awgn", "awgn"),
    "rician_k10_l100": (100, "rician_k10", "rician_k10"),
}


def preset_names() -> list[str]:
    return sorted(_PRESETS)


def preset(name: str, scale: str = "desk", seed: int = 0) -> ExperimentConfig:
    if name not in _PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {preset_names()}")
    if scale not in ("desk", "full"):
        raise ConfigError("scale must be 'desk' or 'full'")
    L, train_chan, eval_chan = _PRESETS[name]

    if scale == "full":
        arch = CodecConfig(block_len=L)
        training = TrainingConfig(
            epochs=100, steps_enc=100, steps_dec=500, batch_size=500,
            enc_snr_db=2.0, dec_snr_db=(-1.5, 2.0), lr=1e-4,
            channel=_CHANNELS[train_chan], seed=seed)
        eval_max_blocks = 1_000_000
    else:
        arch = CodecConfig(block_len=L, enc_filters=16, dec_filters=16,
                           dec_iters=2)
        training = TrainingConfig(
            epochs=5, steps_enc=20, steps_dec=60, batch_size=128,
            enc_snr_db=1.0, dec_snr_db=(-1.5, 2.0), lr=1e-3,
            channel=_CHANNELS[train_chan], seed=seed)
        eval_max_blocks = 20_000

    return ExperimentConfig(
        name=f"{name}_{scale}",
        block_len=L,
        arch=arch,
        training=training,
        eval_channel=_CHANNELS[eval_chan],
        eval_snr_db=[-2.0, -1.0, 0.0, 1.0, 2.0],
        eval_max_blocks=eval_max_blocks,
        seed=seed,
    )
