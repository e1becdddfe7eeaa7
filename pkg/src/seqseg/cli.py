"""Command-line interface: ``seqseg {train,decode,ensemble-decode,eval,inspect}``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields, replace
from pathlib import Path

from . import training
from .corpus import format_sentence, iter_lines, read_corpus
from .decoding import env_threads, segment
from .estimator import check_compatible
from .exceptions import DuplicateSeeds, SegmentationError, UsageError
from .metrics import affix_prf, diff_report, segment_prf
from .training import TrainConfig
from .validation import check_inputs


def _coerce(name: str, value: str):
    types = {f.name: f.default for f in fields(TrainConfig)}
    if name not in types:
        raise UsageError(f"unknown config key {name!r}")
    default = types[name]
    if isinstance(default, bool):
        if value.lower() in ("1", "true", "yes", "on"):
            return True
        if value.lower() in ("0", "false", "no", "off"):
            return False
        raise UsageError(f"{name}: expected a boolean, got {value!r}")
    try:
        return type(default)(value)
    except ValueError:
        raise UsageError(f"{name}: cannot parse {value!r}") from None


def read_config(path) -> dict:
    """Flat ``key=value`` file; ``#`` starts a comment."""
    out = {}
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key=value")
        key, value = (p.strip() for p in line.split("=", 1))
        out[key] = _coerce(key, value)
    return out


def _require(*paths):
    for p in paths:
        if p is not None and not Path(p).is_file():
            raise UsageError(f"no such file: {p}")


def _build_config(args) -> TrainConfig:
    values = read_config(args.config) if args.config else {}
    for item in args.set or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        values[key.strip()] = _coerce(key.strip(), value.strip())
    if args.seed is not None:
        values["seed"] = args.seed
    if args.scheme:
        values["scheme"] = args.scheme
    if args.unit_mode:
        values["unit_mode"] = True
    try:
        return TrainConfig(**values)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _parse_seeds(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"--seeds expects comma-separated integers, got {text!r}") from None


def _seed_path(out: Path, seed: int) -> Path:
    return out.with_name(f"{out.stem}.seed{seed}{out.suffix}")


def cmd_train(args) -> int:
    _require(args.train, args.dev, args.config)
    config = _build_config(args)
    fmt = "morph" if config.scheme == "BIESX" else "word"
    train = read_corpus(args.train, fmt, config.unit_mode)
    dev = read_corpus(args.dev, fmt, config.unit_mode)
    out = Path(args.out)
    runs = [(config, out)]
    if args.seeds:
        seeds = _parse_seeds(args.seeds)
        if len(set(seeds)) != len(seeds):
            raise DuplicateSeeds(f"seeds must be pairwise distinct, got {seeds}")
        runs = [(replace(config, seed=s), _seed_path(out, s)) for s in seeds]
    for cfg, path in runs:
        log_path = path.with_name(path.name + ".log")
        with open(log_path, "w", encoding="utf-8") as log:
            def on_epoch(record, log=log):
                log.write(training.log_line(record) + "\n")
                log.flush()
                if not args.quiet:
                    print(training.log_line(record), file=sys.stderr)

            ckpt = training.train(cfg, train, dev, on_epoch)
        training.save(ckpt, path)
        print(f"{path}\tbest_epoch {ckpt.best_epoch}\tdevF1 {ckpt.best_dev_f1:.4f}")
    return 0


def _read_raw(path, scheme, unit_mode):
    lines = []
    for n, line in iter_lines(path):
        try:
            lines.extend(check_inputs([line], scheme, unit_mode))
        except SegmentationError as exc:
            raise type(exc)(f"{path}:{n}: {exc}") from exc
    return lines


def _decode(ckpts, input_path, out_path) -> int:
    check_compatible(ckpts)
    config = ckpts[0].config
    inputs = _read_raw(input_path, config.scheme, config.unit_mode)
    pred = segment([c.model for c in ckpts], inputs, config.tag_scheme,
                   config.length_limit, threads=env_threads())
    text = "".join(format_sentence(s, config.unit_mode) + "\n" for s in pred)
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_decode(args) -> int:
    _require(args.checkpoint, args.input)
    return _decode([training.load(args.checkpoint)], args.input, args.out)


def cmd_ensemble_decode(args) -> int:
    if len(args.checkpoints) < 2:
        raise UsageError("ensemble-decode needs at least two checkpoints")
    _require(args.input, *args.checkpoints)
    if len(args.checkpoints) != 4:
        print(f"seqseg: note: ensembling {len(args.checkpoints)} models (4 is the usual setup)",
              file=sys.stderr)
    return _decode([training.load(p) for p in args.checkpoints], args.input, args.out)


def cmd_eval(args) -> int:
    _require(args.gold, args.pred)
    fmt = args.format or ("morph" if args.level == "morph" or args.affix else "word")
    gold = read_corpus(args.gold, fmt, args.unit_mode)
    pred = read_corpus(args.pred, fmt, args.unit_mode)
    result = affix_prf(gold, pred) if args.affix else segment_prf(gold, pred, args.level)
    print(result.line())
    if args.report:
        render = lambda s: format_sentence(s, args.unit_mode, morphs=fmt == "morph")  # noqa: E731
        rows = diff_report(gold, pred, args.level, render)
        Path(args.report).write_text("".join(r + "\n" for r in rows), encoding="utf-8")
    return 0


def cmd_inspect(args) -> int:
    _require(args.checkpoint)
    meta = training.load(args.checkpoint).metadata()
    print(json.dumps(meta, indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="seqseg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model (or one per seed with --seeds)")
    p.add_argument("--train", required=True, help="segmented training corpus")
    p.add_argument("--dev", required=True, help="segmented dev corpus for epoch selection")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--config", help="key=value file with TrainConfig fields")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config field")
    p.add_argument("--seed", type=int)
    p.add_argument("--seeds", help="comma-separated seeds; writes <out>.seed<N> per seed")
    p.add_argument("--scheme", choices=["bies", "biesx"])
    p.add_argument("--unit-mode", action="store_true", help="'_'-joined units instead of characters")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("decode", help="segment raw text with one checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("input")
    p.add_argument("--out")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("ensemble-decode", help="segment raw text with averaged checkpoints")
    p.add_argument("checkpoints", nargs="+")
    p.add_argument("--input", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_ensemble_decode)

    p = sub.add_parser("eval", help="score a prediction file against gold")
    p.add_argument("gold")
    p.add_argument("pred")
    p.add_argument("--level", choices=["word", "morph"], default="word")
    p.add_argument("--affix", action="store_true", help="affix P/R/F instead of segment P/R/F")
    p.add_argument("--format", choices=["word", "morph"], help="file format (default follows --level)")
    p.add_argument("--unit-mode", action="store_true")
    p.add_argument("--report", help="write a per-sentence TSV diff here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("inspect", help="print checkpoint metadata as JSON")
    p.add_argument("checkpoint")
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"seqseg: usage error: {exc}", file=sys.stderr)
        return 2
    except SegmentationError as exc:
        print(f"seqseg: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"seqseg: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
