"""BER measurement harness, partial minimum-distance analysis and interleaver
interpretation exports.

Codecs plug in through a small protocol: `block_len`, `n_samples`, `rate`,
`encode(bits) -> samples`, `decode(y, gain, sigma) -> bits`.  Both the neural
codec and the classical turbo baseline implement it.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channels import Channel, ChannelParams, ebno_db, snr_to_sigma
from .interleaver import HardInterleaver, SoftInterleaver, harden


@dataclass
class BerPoint:
    model_id: str
    channel_kind: str
    K: float
    sigma_b: float
    S: int
    snr_db: float
    ebno_db: float
    blocks: int
    bit_errors: int
    ber: float
    ci95: float


@dataclass
class BerCurve:
    points: list[BerPoint] = field(default_factory=list)
    config_hash: str | None = None

    def to_csv(self, path: str | Path) -> None:
        fields = ["model_id", "channel_kind", "K", "sigma_b", "S", "snr_db",
                  "ebno_db", "blocks", "bit_errors", "ber", "ci95"]
        with open(path, "w", newline="") as fh:
            if self.config_hash:
                fh.write(f"# config_hash={self.config_hash}\n")
            writer = csv.writer(fh)
            writer.writerow(fields)
            for p in self.points:
                writer.writerow([getattr(p, f) for f in fields])

    @classmethod
    def from_csv(cls, path: str | Path) -> "BerCurve":
        curve = cls()
        with open(path) as fh:
            first = fh.readline()
            if first.startswith("# config_hash="):
                curve.config_hash = first.split("=", 1)[1].strip()
                header = fh.readline()
            else:
                header = first
            names = header.strip().split(",")
            for row in csv.reader(fh):
                if not row:
                    continue
                d = dict(zip(names, row))
                curve.points.append(BerPoint(
                    model_id=d["model_id"], channel_kind=d["channel_kind"],
                    K=float(d["K"]), sigma_b=float(d["sigma_b"]),
                    S=int(d["S"]), snr_db=float(d["snr_db"]),
                    ebno_db=float(d["ebno_db"]), blocks=int(d["blocks"]),
                    bit_errors=int(d["bit_errors"]), ber=float(d["ber"]),
                    ci95=float(d["ci95"])))
        return curve


def merge_curves(curves: list[BerCurve], block_len: int) -> BerCurve:
    """Sum per-point counts across shard curves; points matched by position."""
    if not curves:
        return BerCurve()
    n = len(curves[0].points)
    merged = BerCurve(config_hash=curves[0].config_hash)
    for i in range(n):
        base = curves[0].points[i]
        blocks = sum(c.points[i].blocks for c in curves)
        errors = sum(c.points[i].bit_errors for c in curves)
        nbits = blocks * block_len
        ber = errors / nbits if nbits else 0.0
        merged.points.append(BerPoint(
            base.model_id, base.channel_kind, base.K, base.sigma_b, base.S,
            base.snr_db, base.ebno_db, blocks, errors, ber,
            _ci95(ber, nbits)))
    return merged


def _ci95(p: float, n: int) -> float:
    if n <= 0:
        return 0.0
    return 1.96 * math.sqrt(max(p * (1.0 - p), 0.0) / n)


class NeuralCodecAdapter:
    """Wraps a TurboCodec behind the flat-sample codec protocol.

    By default the interleaver is hardened to a discrete permutation for
    inference; pass harden_interleaver=False to evaluate the soft matrix.
    """

    def __init__(self, model, model_id: str = "turboae-ti",
                 harden_interleaver: bool = True):
        import torch  # local: keep evaluation importable without building models

        self._torch = torch
        self.model = model.hardened() if harden_interleaver else model
        self.model.eval()
        self.model_id = model_id
        self.block_len = model.config.block_len
        self.n_samples = 3 * self.block_len
        self.rate = 1.0 / 3.0

    def encode(self, bits: np.ndarray) -> np.ndarray:
        torch = self._torch
        with torch.no_grad():
            x = self.model.encode(torch.from_numpy(
                np.asarray(bits, dtype=np.float64)))
        return x.numpy().reshape(bits.shape[0], self.n_samples)

    def decode(self, y: np.ndarray, gain=None, sigma=None) -> np.ndarray:
        torch = self._torch
        y = np.asarray(y, dtype=np.float64).reshape(-1, 3, self.block_len)
        with torch.no_grad():
            bhat, _ = self.model.decode(torch.from_numpy(y))
        return bhat.numpy()


def _shard_rng(seed: int, point_index: int, shard: int) -> np.random.Generator:
    return np.random.default_rng((seed, point_index, shard))


def measure_ber(codec, channel: ChannelParams, snr_grid_db,
                min_errors: int = 100, max_blocks: int = 1_000_000,
                batch_blocks: int = 500, seed: int = 0, shards: int = 1,
                shard_index: int | None = None,
                config_hash: str | None = None) -> BerCurve:
    """Monte-Carlo BER sweep with error-target stopping.

    Each SNR point is split over `shards` independent seeded streams; a shard
    stops once it has seen ceil(min_errors/shards) bit errors or its share of
    max_blocks.  Passing shard_index runs a single shard (for external
    parallelism); merging those shard curves reproduces the full run.
    """
    if not len(snr_grid_db):
        raise ValueError("snr grid must be non-empty")
    L = codec.block_len
    curve = BerCurve(config_hash=config_hash)
    shard_list = range(shards) if shard_index is None else [shard_index]
    err_target = math.ceil(min_errors / shards)
    block_cap = math.ceil(max_blocks / shards)
    for idx, snr_db in enumerate(snr_grid_db):
        sigma = snr_to_sigma(snr_db)
        chan = Channel(channel.with_sigma(sigma))
        blocks = 0
        errors = 0
        for shard in shard_list:
            rng = _shard_rng(seed, idx, shard)
            s_blocks = 0
            s_errors = 0
            while s_errors < err_target and s_blocks < block_cap:
                nb = min(batch_blocks, block_cap - s_blocks)
                bits = rng.integers(0, 2, size=(nb, L))
                x = codec.encode(bits)
                gain, additive = chan.distortion(x.shape, rng)
                y = gain * x + additive
                bhat = codec.decode(y, gain=gain, sigma=sigma)
                s_errors += int((bhat != bits).sum())
                s_blocks += nb
            blocks += s_blocks
            errors += s_errors
        nbits = blocks * L
        ber = errors / nbits if nbits else 0.0
        S = chan.default_burst_len(codec.n_samples) if channel.kind in (
            "bursty_rician", "chirp_rician") else 0
        curve.points.append(BerPoint(
            model_id=getattr(codec, "model_id", "codec"),
            channel_kind=channel.kind, K=channel.K, sigma_b=channel.sigma_b,
            S=S, snr_db=float(snr_db),
            ebno_db=ebno_db(float(snr_db), codec.rate),
            blocks=blocks, bit_errors=errors, ber=ber,
            ci95=_ci95(ber, nbits)))
    return curve


@dataclass
class DistanceReport:
    M: int
    instances: int
    distances: list[float]
    mean: float


def enumerate_messages(M: int) -> np.ndarray:
    """All 2^M binary messages of length M, lexicographic order."""
    return ((np.arange(2 ** M)[:, None] >> np.arange(M)[None, :]) & 1).astype(np.int64)


def partial_min_distance(encode_fn, L: int, M: int, instances: int,
                         rng: np.random.Generator, metric: str = "l2",
                         max_m: int = 20) -> DistanceReport:
    """Minimum pairwise codeword distance over all 2^M messages varying only
    in a length-M middle window, random flanks fixed per instance.

    encode_fn maps a (B, L) bit array to (B, n) real samples and must be
    deterministic.
    """
    if M > max_m:
        raise ValueError(f"M={M} exceeds the enumeration budget (max {max_m})")
    if M > L or (L - M) % 2 != 0:
        raise ValueError("need M <= L with L - M even")
    middles = enumerate_messages(M)
    flank = (L - M) // 2
    if metric not in ("l2", "l1"):
        raise ValueError(f"unknown metric {metric!r}")
    mins = []
    for _ in range(instances):
        a = rng.integers(0, 2, size=flank)
        b = rng.integers(0, 2, size=flank)
        msgs = np.concatenate([
            np.broadcast_to(a, (middles.shape[0], flank)),
            middles,
            np.broadcast_to(b, (middles.shape[0], flank)),
        ], axis=1)
        words = np.asarray(encode_fn(msgs), dtype=np.float64)
        # row-chunked all-pairs minimum; the arithmetic is kept identical to
        # the obvious per-pair formula so results are reproducible bit-for-bit
        best = np.inf
        for i in range(words.shape[0] - 1):
            diff = words[i + 1:] - words[i]
            if metric == "l2":
                d = np.sqrt((diff * diff).sum(axis=1))
            else:
                d = np.abs(diff).sum(axis=1)
            best = min(best, float(d.min()))
        mins.append(best)
    return DistanceReport(M=M, instances=instances, distances=mins,
                          mean=float(np.mean(mins)))


def export_interleaver_heatmap(t, out_image: str | Path, out_json: str | Path,
                               config_hash: str | None = None) -> HardInterleaver:
    """Write a binary heatmap of the (hardened) interleaver plus a JSON
    permutation sidecar; returns the hard permutation."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    if isinstance(t, HardInterleaver):
        hard = t
    else:
        hard = harden(t.entries if isinstance(t, SoftInterleaver) else t)
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.imshow(hard.as_matrix(), cmap="viridis", interpolation="nearest")
    ax.set_xlabel("input position")
    ax.set_ylabel("output position")
    ax.set_title(f"learned interleaver (L={hard.size})")
    fig.tight_layout()
    fig.savefig(out_image, dpi=150)
    plt.close(fig)
    payload = {"size": hard.size, "perm": hard.perm.tolist()}
    if config_hash:
        payload["config_hash"] = config_hash
    with open(out_json, "w") as fh:
        json.dump(payload, fh)
    return hard


def load_interleaver_json(path: str | Path) -> HardInterleaver:
    with open(path) as fh:
        payload = json.load(fh)
    return HardInterleaver(np.asarray(payload["perm"], dtype=np.int64))


def ber_vs_epoch(checkpoint_paths, channel: ChannelParams, snr_db: float,
                 blocks: int = 2000, seed: int = 0,
                 harden_interleaver: bool = True) -> list[dict]:
    """Evaluate each epoch checkpoint at one test SNR; rows of (epoch, ber)."""
    from .training import load_checkpoint

    rows = []
    for path in checkpoint_paths:
        state = load_checkpoint(path)
        codec = NeuralCodecAdapter(state.model,
                                   harden_interleaver=harden_interleaver)
        curve = measure_ber(codec, channel, [snr_db], min_errors=10**9,
                            max_blocks=blocks, batch_blocks=min(blocks, 500),
                            seed=seed)
        rows.append({"epoch": state.epoch, "snr_db": snr_db,
                     "ber": curve.points[0].ber,
                     "checkpoint": str(path)})
    return rows


def write_epoch_rows(rows: list[dict], path: str | Path,
                     config_hash: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if config_hash:
            fh.write(f"# config_hash={config_hash}\n")
        writer = csv.DictWriter(fh, fieldnames=["epoch", "snr_db", "ber",
                                                "checkpoint"])
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
