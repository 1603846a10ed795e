"""Turbo autoencoder with a trainable interleaver.

Neural rate-1/3 channel code whose interleaver is a relaxed permutation
matrix learned jointly with the encoder/decoder, plus channel simulators, a
classical turbo baseline and BER evaluation tooling.
"""

from .channels import Channel, ChannelParams, awgn, rician, add_burst, add_chirp, snr_to_sigma, ebno_db
from .codec import CodecConfig, TurboCodec
from .interleaver import (HardInterleaver, SoftInterleaver, apply, harden,
                          inverse_apply, penalty, project)
from .training import (
    TrainingConfig,
    TrainState,
    finetune,
    rician_train_for_awgn,
    train,
    warm_start_encoder,
)
from .turbo import TurboBaseline
from .evaluation import (BerCurve, NeuralCodecAdapter, measure_ber,
                         partial_min_distance, export_interleaver_heatmap)
from .config import ExperimentConfig, load_config, save_config
from .presets import preset, preset_names

__version__ = "0.1.0"
