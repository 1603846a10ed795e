"""Stochastic channel simulators: AWGN, Rician/Rayleigh fading, bursty and
chirp-jammed variants, plus SNR/EbN0 accounting.

All sampling goes through an explicit numpy Generator so runs are reproducible
and shardable.  Codewords are handled as flat length-n sample vectors (n = 3L
for the neural code), batched along the leading axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

CHANNEL_KINDS = ("awgn", "rician", "bursty_rician", "chirp_rician")


class ChannelError(ValueError):
    """Contract violation on channel parameters."""


def snr_to_sigma(snr_db: float) -> float:
    """SNR(dB) = -10 log10(sigma^2), so sigma = 10^(-snr_db/20)."""
    return 10.0 ** (-snr_db / 20.0)


def sigma_to_snr(sigma: float) -> float:
    return -20.0 * math.log10(sigma)


def ebno_db(snr_db: float, rate: float) -> float:
    """Energy-per-bit accounting: Eb/N0(dB) = SNR(dB) - 10 log10(rate)."""
    if not 0.0 < rate <= 1.0:
        raise ChannelError("rate must be in (0, 1]")
    return snr_db - 10.0 * math.log10(rate)


def ebno_to_snr_db(ebno: float, rate: float) -> float:
    if not 0.0 < rate <= 1.0:
        raise ChannelError("rate must be in (0, 1]")
    return ebno + 10.0 * math.log10(rate)


@dataclass
class ChannelParams:
    """Full parameterization of one channel; round-trips through config files."""

    kind: str = "awgn"
    K: float = 0.0                 # Rician factor; 0 = Rayleigh
    sigma: float = 1.0             # AWGN noise std
    sigma_b: float = 0.0           # burst / chirp amplitude scale
    burst_len: int | None = None   # S, in samples of the flat codeword; default n//12 (= L/4)
    f0: float = 0.0                # chirp start frequency
    f1: float = 1.0                # chirp end frequency
    t_sweep: float = 1.0           # time to sweep f0 -> f1
    phi0: float = 0.0              # chirp initial phase
    chirp_literal: bool = False    # unbounded literal jamming form instead of the sinusoid
    chirp_gaussian: bool = False   # draw the jamming window as white Gaussian noise

    def __post_init__(self):
        if self.kind not in CHANNEL_KINDS:
            raise ChannelError(f"unknown channel kind {self.kind!r}")
        if self.sigma < 0 or self.sigma_b < 0 or self.K < 0:
            raise ChannelError("sigma, sigma_b and K must be non-negative")
        if self.t_sweep <= 0:
            raise ChannelError("t_sweep must be positive")
        if self.burst_len is not None and self.burst_len <= 0:
            raise ChannelError("burst_len must be positive")

    def with_sigma(self, sigma: float) -> "ChannelParams":
        return ChannelParams(**{**asdict(self), "sigma": sigma})

    def to_dict(self) -> dict:
        return asdict(self)


def awgn(x: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    if sigma < 0:
        raise ChannelError("sigma must be non-negative")
    x = np.asarray(x, dtype=np.float64)
    return x + sigma * rng.standard_normal(x.shape)


def rician_gains(K: float, shape, rng: np.random.Generator) -> np.ndarray:
    """Per-symbol fading amplitude |sqrt(K/(K+1))(1+1i) + sqrt(1/(K+1)) h_nlos|.

    h_nlos is complex Gaussian with unit total variance, i.i.d. per symbol, so
    E[h^2] = (2K+1)/(K+1); K=0 is Rayleigh, large K approaches the fixed gain
    sqrt(2).
    """
    if K < 0:
        raise ChannelError("K must be non-negative")
    nlos = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)
    los = math.sqrt(K / (K + 1.0)) * (1.0 + 1.0j)
    return np.abs(los + math.sqrt(1.0 / (K + 1.0)) * nlos)


def rician(x: np.ndarray, K: float, sigma: float,
           rng: np.random.Generator) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    h = rician_gains(K, x.shape, rng)
    return h * x + sigma * rng.standard_normal(x.shape)


def _burst_starts(n: int, S: int, batch: int, rng: np.random.Generator) -> np.ndarray:
    if not 0 < S < n:
        raise ChannelError("burst length S must satisfy 0 < S < n")
    return rng.integers(0, n - S + 1, size=batch)  # j uniform over every fitting offset


def add_burst(y: np.ndarray, sigma_b: float, S: int,
              rng: np.random.Generator) -> np.ndarray:
    """Add one white Gaussian burst of length S at a uniformly random offset."""
    y = np.array(y, dtype=np.float64)
    flat = y.reshape(-1, y.shape[-1]) if y.ndim > 1 else y[None, :]
    starts = _burst_starts(flat.shape[1], S, flat.shape[0], rng)
    out = flat.copy()
    for b, j in enumerate(starts):
        out[b, j:j + S] += sigma_b * rng.standard_normal(S)
    return out.reshape(y.shape)


def chirp_window(sigma_b: float, f0: float, f1: float, t_sweep: float,
                 phi0: float, S: int, literal: bool = False) -> np.ndarray:
    """Deterministic linear-chirp samples over one jamming window.

    Sampled at t_s = s * t_sweep / S so the window sweeps f0 -> f1 exactly
    once.  Default is the sinusoid sigma_b^2 * sin(phi0 + 2 pi ((c/2) t^2 +
    f0 t)) with sweep rate c = (f1 - f0) / t_sweep; `literal` selects the
    unbounded variant sigma_b^2 * (sin(phi0) + 2 pi ((c/2) t^2 + f0 t)).
    """
    if t_sweep <= 0:
        raise ChannelError("t_sweep must be positive")
    t = np.arange(S) * (t_sweep / S)
    c = (f1 - f0) / t_sweep
    arg = 2.0 * math.pi * (0.5 * c * t * t + f0 * t)
    if literal:
        return sigma_b**2 * (math.sin(phi0) + arg)
    return sigma_b**2 * np.sin(phi0 + arg)


def add_chirp(y: np.ndarray, sigma_b: float, f0: float, f1: float,
              t_sweep: float, phi0: float, S: int, rng: np.random.Generator,
              literal: bool = False, gaussian: bool = False) -> np.ndarray:
    """Add a chirp jamming window of length S at a uniformly random offset."""
    y = np.array(y, dtype=np.float64)
    flat = y.reshape(-1, y.shape[-1]) if y.ndim > 1 else y[None, :]
    starts = _burst_starts(flat.shape[1], S, flat.shape[0], rng)
    out = flat.copy()
    window = chirp_window(sigma_b, f0, f1, t_sweep, phi0, S, literal=literal)
    for b, j in enumerate(starts):
        if gaussian:
            out[b, j:j + S] += sigma_b * rng.standard_normal(S)
        else:
            out[b, j:j + S] += window
    return out.reshape(y.shape)


class Channel:
    """A parameterized stochastic map from transmitted to received samples.

    `distortion` exposes the per-sample gain and additive term so a torch
    training loop can replay the same randomness while keeping the gradient
    path through the transmitted samples.
    """

    def __init__(self, params: ChannelParams):
        self.params = params

    def default_burst_len(self, n: int) -> int:
        S = self.params.burst_len
        if S is None:
            S = max(1, n // 12)  # L/4 symbols of the 3L codeword
        if S >= n:
            raise ChannelError("burst length S must be smaller than the codeword")
        return S

    def distortion(self, shape: tuple[int, int],
                   rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Sample (gain, additive) with y = gain * x + additive, shape (B, n)."""
        p = self.params
        batch, n = shape
        if p.kind == "awgn":
            gain = np.ones(shape)
        else:
            gain = rician_gains(p.K, shape, rng)
        additive = p.sigma * rng.standard_normal(shape)
        if p.kind == "bursty_rician":
            S = self.default_burst_len(n)
            additive = add_burst(additive, p.sigma_b, S, rng)
        elif p.kind == "chirp_rician":
            S = self.default_burst_len(n)
            additive = add_chirp(additive, p.sigma_b, p.f0, p.f1, p.t_sweep,
                                 p.phi0, S, rng, literal=p.chirp_literal,
                                 gaussian=p.chirp_gaussian)
        return gain, additive

    def __call__(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        squeeze = x.ndim == 1
        if squeeze:
            x = x[None, :]
        gain, additive = self.distortion(x.shape, rng)
        y = gain * x + additive
        return y[0] if squeeze else y
