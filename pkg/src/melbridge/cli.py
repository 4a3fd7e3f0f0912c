"""``melbridge`` command line.

Exit codes: 0 success, 1 internal error, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields
from pathlib import Path

from .baselines import griffin_only_baseline, interpolation_baseline
from .config import ConfigError, MelConfig, load_config
from .corpus import read_corpus
from .dsp import extract_mel, peak_normalize
from .formats import FormatError, read_mel, read_wav, write_mel, write_wav
from .metrics import evaluate_pair
from .stage1 import approximate_convert, mel_to_waveform
from .stage2 import (PreparedSet, TrainingConfig, load_weights, prepare_training_set,
                     save_weights, train, write_training_log)

logger = logging.getLogger("melbridge")


class UsageError(Exception):
    pass


def _config(spec: str) -> MelConfig:
    return load_config(spec)


def _check_source(m, cfg_src: MelConfig, path) -> None:
    if m.config != cfg_src:
        raise UsageError(f"{path}: embedded config differs from the given source config")


# ---------------------------------------------------------------------------

def cmd_extract(args) -> None:
    cfg = _config(args.config)
    x, sr = read_wav(args.wav)
    write_mel(args.out, extract_mel(x, cfg, sr))


def _convert_one(in_path, cfg_src, cfg_tgt, weights, stage, out_path) -> None:
    m = read_mel(in_path)
    _check_source(m, cfg_src, in_path)
    if stage == 1:
        write_mel(out_path, approximate_convert(m, cfg_tgt))
        return
    from .estimator import UniversalAdaptor
    est = UniversalAdaptor(target_config=cfg_tgt, stage=2)
    est.network_ = load_weights(weights)
    write_mel(out_path, est.convert(m))


def _pairs(inp: Path, out: Path, suffix: str):
    if inp.is_dir():
        out.mkdir(parents=True, exist_ok=True)
        return [(p, out / p.name) for p in sorted(inp.glob(f"*{suffix}"))]
    return [(inp, out)]


def _run_jobs(fn, jobs: int, arglists) -> list:
    if jobs <= 1 or len(arglists) <= 1:
        return [fn(*a) for a in arglists]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(fn, *a) for a in arglists]
        return [f.result() for f in futures]


def cmd_convert(args) -> None:
    if args.stage == 2 and not args.weights:
        raise UsageError("--weights is required for --stage 2")
    cfg_src, cfg_tgt = _config(args.src_config), _config(args.tgt_config)
    pairs = _pairs(Path(args.mel), Path(args.out), ".mel")
    _run_jobs(_convert_one, args.jobs,
              [(i, cfg_src, cfg_tgt, args.weights, args.stage, o) for i, o in pairs])


def cmd_invert(args) -> None:
    cfg = _config(args.config)
    m = read_mel(args.mel)
    _check_source(m, cfg, args.mel)
    y = peak_normalize(mel_to_waveform(m, args.iters), cfg.wave_peak_norm)
    write_wav(args.out, y, cfg.sample_rate)


def cmd_baseline(args) -> None:
    cfg_src, cfg_tgt = _config(args.src_config), _config(args.tgt_config)
    m = read_mel(args.mel)
    _check_source(m, cfg_src, args.mel)
    if args.method == "interp":
        out = interpolation_baseline(m, cfg_tgt)
    else:
        out = griffin_only_baseline(m, cfg_tgt)
    write_mel(args.out, out)


def cmd_prepare(args) -> None:
    names, clips, sr = read_corpus(args.corpus)
    prepared = prepare_training_set(clips, sr, args.subsets, rng=args.seed, names=names)
    prepared.save(args.out)
    logger.info("prepared %d utterances in %d subsets", len(prepared.utterances),
                len(prepared.subset_configs))


_TRAIN_FIELDS = {f.name for f in fields(TrainingConfig)}


def training_config_from_args(args) -> TrainingConfig:
    values = {}
    if args.training_config:
        values.update(json.loads(Path(args.training_config).read_text()))
        unknown = set(values) - _TRAIN_FIELDS
        if unknown:
            raise UsageError(f"unknown training-config keys: {sorted(unknown)}")
    for name in ("epochs", "batch_size", "segment_frames", "learning_rate", "n_levels",
                 "base_channels", "halving_epochs"):
        v = getattr(args, name)
        if v is not None:
            values[name] = v
    values["seed"] = args.seed
    if "betas" in values:
        values["betas"] = tuple(values["betas"])
    return TrainingConfig(**values)


def cmd_train(args) -> None:
    tcfg = training_config_from_args(args)
    src = Path(args.data)
    if (src / "manifest.json").exists():
        prepared = PreparedSet.load(src)
    else:
        names, clips, sr = read_corpus(src)
        prepared = prepare_training_set(clips, sr, args.subsets, rng=args.seed, names=names)
    result = train(prepared, tcfg)
    save_weights(result.model, args.out)
    log_path = args.log or str(args.out) + ".log"
    write_training_log(log_path, result.log)


def _eval_one(a_path, b_path) -> dict:
    a, sr_a = read_wav(a_path)
    b, sr_b = read_wav(b_path)
    if sr_a != sr_b:
        raise UsageError(f"sample rates differ: {sr_a} vs {sr_b}")
    return evaluate_pair(a, b, sr_a)


def cmd_eval(args) -> None:
    a, b = Path(args.wav_a), Path(args.wav_b)
    if a.is_dir():
        pairs = [(p, b / p.name) for p in sorted(a.glob("*.wav")) if (b / p.name).exists()]
    else:
        pairs = [(a, b)]
    for rec in _run_jobs(_eval_one, args.jobs, pairs):
        print(json.dumps(rec, sort_keys=True))


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    def global_flags(suppress: bool) -> argparse.ArgumentParser:
        # subcommands repeat the flags without defaults so they do not clobber
        # values given before the subcommand name
        g = argparse.ArgumentParser(add_help=False)
        default = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
        g.add_argument("--seed", type=int, default=default(0), help="seed for all randomness (default 0)")
        g.add_argument("--jobs", type=int, default=default(1), help="parallel workers for batch inputs")
        g.add_argument("--quiet", action="store_true", default=default(False), help="only print errors")
        return g

    common = global_flags(suppress=True)
    parser = argparse.ArgumentParser(prog="melbridge", parents=[global_flags(suppress=False)],
                                     description="Convert mel-spectrograms between extraction configs.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", parents=[common], help="WAV -> mel file")
    p.add_argument("wav")
    p.add_argument("config", help="config file or builtin name (cfg1..cfg7)")
    p.add_argument("out")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("convert", parents=[common], help="mel file(s) -> target config")
    p.add_argument("mel", help="mel file, or a directory of *.mel")
    p.add_argument("src_config")
    p.add_argument("tgt_config")
    p.add_argument("out")
    p.add_argument("--weights")
    p.add_argument("--stage", type=int, choices=(1, 2), default=2)
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("invert", parents=[common], help="mel file -> WAV via Griffin-Lim")
    p.add_argument("mel")
    p.add_argument("config")
    p.add_argument("out")
    p.add_argument("--iters", type=int, default=32)
    p.set_defaults(func=cmd_invert)

    p = sub.add_parser("baseline", parents=[common], help="run a reference conversion")
    p.add_argument("mel")
    p.add_argument("src_config")
    p.add_argument("tgt_config")
    p.add_argument("out")
    p.add_argument("--method", choices=("interp", "griffin"), required=True)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("prepare", parents=[common], help="precompute Stage-1 intermediates")
    p.add_argument("corpus", help="directory of mono 16-bit WAVs")
    p.add_argument("out")
    p.add_argument("--subsets", type=int, default=100)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", parents=[common], help="train the Stage-2 network")
    p.add_argument("data", help="prepared directory, or a WAV corpus directory")
    p.add_argument("out", help="weights file to write")
    p.add_argument("--training-config", help="JSON object of TrainingConfig fields")
    p.add_argument("--log", help="training log path (default: OUT.log)")
    p.add_argument("--subsets", type=int, default=100)
    for name, typ in (("epochs", int), ("batch-size", int), ("segment-frames", int),
                      ("learning-rate", float), ("n-levels", int), ("base-channels", int),
                      ("halving-epochs", int)):
        p.add_argument(f"--{name}", type=typ)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="objective metrics for a WAV pair")
    p.add_argument("wav_a")
    p.add_argument("wav_b")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (UsageError, ConfigError, FormatError, FileNotFoundError, IsADirectoryError,
            ValueError) as exc:
        print(f"melbridge {args.command}: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        logger.exception("internal error")
        print(f"melbridge {args.command}: internal error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
