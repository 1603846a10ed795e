"""Command-line surface: train, finetune, eval, analyze, plot, verify.

Exit codes: 0 success, 2 usage/config error, 3 runtime divergence.  The
output root defaults to ./runs and can be overridden with TURBOAE_TI_OUT.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import evaluation, training
from .channels import ChannelError
from .config import ConfigError, ExperimentConfig, load_config, save_config
from .presets import preset, preset_names
from .turbo import TurboBaseline

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DIVERGED = 3


def _resolve_config(args) -> ExperimentConfig:
    if getattr(args, "preset", None):
        cfg = preset(args.preset, scale=getattr(args, "scale", "desk"),
                     seed=args.seed if args.seed is not None else 0)
    elif getattr(args, "config", None):
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
            cfg.training.seed = args.seed
    else:
        raise ConfigError("either --config or --preset is required")
    return cfg


def _out_dir(cfg: ExperimentConfig, args) -> Path:
    root = Path(os.environ.get("TURBOAE_TI_OUT", "."))
    out = Path(args.out) if getattr(args, "out", None) else root / cfg.out_dir / cfg.name
    out.mkdir(parents=True, exist_ok=True)
    return out


def _latest_checkpoint(out: Path) -> Path | None:
    ckpts = sorted(out.glob("epoch_*.pt"))
    return ckpts[-1] if ckpts else None


def cmd_train(args) -> int:
    cfg = _resolve_config(args)
    out = _out_dir(cfg, args)
    save_config(cfg, out / "config.yaml")
    if args.resume:
        latest = _latest_checkpoint(out)
        if latest is not None:
            state = training.load_checkpoint(latest, expect_arch=cfg.arch)
            remaining = cfg.training.epochs - state.epoch
            if remaining <= 0:
                print(f"already trained for {state.epoch} epochs; nothing to do")
                return EXIT_OK
            training._train_epochs(state, state.config, remaining, out)
            print(f"resumed from {latest.name}, trained to epoch {state.epoch}")
            return EXIT_OK
    state = training.init_state(cfg.training, cfg.arch)
    state.config_hash = cfg.hash()
    training._train_epochs(state, cfg.training, cfg.training.epochs, out)
    print(f"trained {state.epoch} epochs -> {out}")
    return EXIT_OK


def cmd_finetune(args) -> int:
    cfg = _resolve_config(args)
    state = training.load_checkpoint(args.checkpoint, expect_arch=cfg.arch)
    out = _out_dir(cfg, args)
    state.config_hash = cfg.hash()
    training.finetune(state, cfg.training.channel, epochs=args.epochs,
                      out_dir=out)
    print(f"finetuned {args.epochs} epochs on {cfg.training.channel.kind} -> {out}")
    return EXIT_OK


def _build_codec(args, cfg: ExperimentConfig):
    if args.model == "lte-turbo":
        return TurboBaseline(cfg.block_len)
    if not args.checkpoint:
        raise ConfigError("--checkpoint is required unless --model lte-turbo")
    state = training.load_checkpoint(args.checkpoint, expect_arch=cfg.arch)
    return evaluation.NeuralCodecAdapter(
        state.model, harden_interleaver=not args.soft)


def cmd_eval(args) -> int:
    cfg = _resolve_config(args)
    codec = _build_codec(args, cfg)
    curve = evaluation.measure_ber(
        codec, cfg.eval_channel, cfg.eval_snr_db,
        min_errors=cfg.eval_min_errors, max_blocks=cfg.eval_max_blocks,
        seed=cfg.seed if args.seed is None else args.seed,
        shards=args.shards, shard_index=args.shard_index,
        config_hash=cfg.hash())
    out = Path(args.out) if args.out else _out_dir(cfg, args) / f"ber_{codec.model_id}.csv"
    curve.to_csv(out)
    for p in curve.points:
        print(f"{p.model_id} {p.channel_kind} snr={p.snr_db:+.2f}dB "
              f"ebno={p.ebno_db:+.2f}dB ber={p.ber:.3e} ({p.bit_errors} errors)")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    out = Path(args.out) if args.out else Path(".")
    out.mkdir(parents=True, exist_ok=True)
    if args.mode == "heatmap":
        state = training.load_checkpoint(args.checkpoint)
        hard = evaluation.export_interleaver_heatmap(
            state.soft_interleaver(), out / "interleaver.png",
            out / "interleaver.json", config_hash=state.config_hash)
        print(f"hardened permutation: {hard.perm.tolist()}")
    elif args.mode == "distance":
        state = training.load_checkpoint(args.checkpoint)
        codec = evaluation.NeuralCodecAdapter(state.model)
        rng = np.random.default_rng(args.seed or 0)
        report = evaluation.partial_min_distance(
            codec.encode, codec.block_len, args.m, args.instances, rng)
        print(f"partial minimum distance: M={report.M} "
              f"instances={report.instances} mean={report.mean:.4f}")
        (out / "distance.json").write_text(json.dumps({
            "M": report.M, "instances": report.instances,
            "mean": report.mean, "distances": report.distances}))
    elif args.mode == "ber-vs-epoch":
        ckpt_dir = Path(args.checkpoint)
        ckpts = sorted(ckpt_dir.glob("epoch_*.pt")) if ckpt_dir.is_dir() else [ckpt_dir]
        if not ckpts:
            raise ConfigError(f"no checkpoints under {ckpt_dir}")
        cfg = _resolve_config(args) if (args.config or args.preset) else None
        channel = cfg.eval_channel if cfg else training.load_checkpoint(
            ckpts[0]).config.channel
        rows = evaluation.ber_vs_epoch(ckpts, channel, args.snr_db,
                                       blocks=args.blocks,
                                       seed=args.seed or 0)
        evaluation.write_epoch_rows(rows, out / "ber_vs_epoch.csv")
        for row in rows:
            print(f"epoch {row['epoch']}: ber={row['ber']:.4f}")
    else:
        raise ConfigError(f"unknown analyze mode {args.mode!r}")
    return EXIT_OK


def cmd_plot(args) -> int:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    curves = []
    for path in args.csvs:
        curve = evaluation.BerCurve.from_csv(path)
        if not curve.points:
            raise ConfigError(f"empty BER csv: {path}")
        curves.append((Path(path).stem, curve))

    positive = [p.ber for _, c in curves for p in c.points if p.ber > 0]
    floor = min(positive) / 10 if positive else 1e-7
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for name, curve in curves:
        x = [p.ebno_db for p in curve.points]
        y = [p.ber if p.ber > 0 else floor for p in curve.points]
        label = curve.points[0].model_id or name
        line, = ax.semilogy(x, y, marker="o", label=label)
        zeros = [(p.ebno_db, floor) for p in curve.points if p.ber == 0]
        if zeros:
            zx, zy = zip(*zeros)
            ax.semilogy(zx, zy, linestyle="none", marker="v",
                        color=line.get_color())
    ax.set_xlabel("Eb/N0 (dB)")
    ax.set_ylabel("BER")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = load_config(args.config)
    expected = cfg.hash()
    path = Path(args.artifact)
    if path.suffix == ".pt":
        actual = training.checkpoint_hash(path)
    elif path.suffix == ".csv":
        actual = evaluation.BerCurve.from_csv(path).config_hash
    elif path.suffix == ".json":
        actual = json.loads(path.read_text()).get("config_hash")
    else:
        raise ConfigError(f"cannot verify artifact type: {path.suffix}")
    if actual != expected:
        print(f"MISMATCH: artifact hash {actual} != config hash {expected}")
        return EXIT_USAGE
    print(f"ok: {path} matches config hash {expected}")
    return EXIT_OK


def _add_config_args(p, seed_default=None):
    p.add_argument("--config", help="experiment config file (yaml or json)")
    p.add_argument("--preset", choices=preset_names())
    p.add_argument("--scale", choices=["desk", "full"], default="desk")
    p.add_argument("--seed", type=int, default=seed_default)
    p.add_argument("--out", help="output directory / file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="turboae-ti",
        description="Train and evaluate the trainable-interleaver turbo autoencoder")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run alternating training")
    _add_config_args(p)
    p.add_argument("--resume", action="store_true",
                   help="continue from the latest checkpoint in the output dir")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("finetune", help="continue training on a new channel")
    p.add_argument("checkpoint")
    _add_config_args(p)
    p.add_argument("--epochs", type=int, default=100)
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("eval", help="BER sweep over the configured grid")
    _add_config_args(p)
    p.add_argument("--checkpoint")
    p.add_argument("--model", default="neural",
                   choices=["neural", "lte-turbo"])
    p.add_argument("--soft", action="store_true",
                   help="evaluate the soft interleaver instead of hardening")
    p.add_argument("--shards", type=int, default=1)
    p.add_argument("--shard-index", type=int, default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("analyze", help="interpretation tools")
    p.add_argument("checkpoint",
                   help="checkpoint file (or directory for ber-vs-epoch)")
    p.add_argument("--mode", required=True,
                   choices=["heatmap", "distance", "ber-vs-epoch"])
    _add_config_args(p)
    p.add_argument("--m", type=int, default=10,
                   help="enumerated middle-window length for distance mode")
    p.add_argument("--instances", type=int, default=100)
    p.add_argument("--snr-db", type=float, default=1.0)
    p.add_argument("--blocks", type=int, default=2000)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("plot", help="BER vs Eb/N0 comparison plot")
    p.add_argument("csvs", nargs="+")
    p.add_argument("--out", default="ber.png")
    p.add_argument("--style", default="default")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("verify", help="check an artifact's embedded config hash")
    p.add_argument("artifact")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ChannelError, training.CheckpointMismatchError,
            FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except training.TrainingDivergedError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
