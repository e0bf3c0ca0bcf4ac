"""Command-line front end: synth, window, train, eval, gradcheck, bench.

Exit status is 0 on success, 1 on a runtime failure and 2 on a usage error
(unknown flag, variant or config key).
"""

from __future__ import annotations

import argparse
import ast
import logging
import sys
from pathlib import Path

from . import data as D
from .blocks import VARIANTS, ModelConfig, build_model, load_checkpoint
from .errors import ConfigError, GaitformerError
from .evaluation import cmc_curve, plot_cmc, write_cmc_csv
from .harness import (
    BENCH_MECHANISMS,
    DEFAULT_LENGTHS,
    bench_scaling,
    failures,
    mechanism_gradcheck,
    variant_gradcheck,
    worst,
    write_bench_csv,
)
from .training import predict, train_loop, write_metrics_csv

log = logging.getLogger("gaitformer")


class UsageError(Exception):
    pass


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment.

    Values are Python literals (``5``, ``0.1``, ``[1, 3, 5]``, ``"proposed"``,
    ``None``); anything else is kept as a bare string.
    """
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key.isidentifier():
            raise UsageError(f"{source}:{lineno}: bad key {key!r}")
        try:
            out[key] = ast.literal_eval(value)
        except (ValueError, SyntaxError):
            out[key] = value
    return out


def load_config(path) -> dict:
    return parse_config_text(Path(path).read_text(encoding="utf-8"), str(path))


def _overrides(pairs) -> dict:
    return parse_config_text("\n".join(pairs or []), "--set")


# ---------------------------------------------------------------------------
# commands


def cmd_synth(args) -> int:
    streams = D.synthetic_gait(
        args.subjects, args.walks, args.length, args.seed, noise=args.noise, jitter=args.jitter, spread=args.spread
    )
    D.write_imu_csv(args.out, streams)
    print(f"wrote {args.subjects} subjects x {args.walks} walks x {args.length} samples to {args.out}")
    return 0


def _protocol(args) -> D.Protocol:
    if args.protocol == "custom":
        if args.length is None or args.stride is None or args.dev_fraction is None:
            raise UsageError("--protocol custom needs --length, --stride and --dev-fraction")
        from fractions import Fraction

        return D.Protocol("custom", args.length, args.stride, Fraction(args.dev_fraction).limit_denominator(10_000))
    proto = D.PROTOCOLS[args.protocol]
    if args.length is not None or args.stride is not None:
        raise UsageError(f"--length/--stride are fixed by --protocol {args.protocol}; use --protocol custom")
    return proto


def cmd_window(args) -> int:
    proto = _protocol(args)
    streams = D.load_imu_csv(args.input)
    windows = D.window_streams(streams, proto.length, proto.stride)
    for subject in sorted(streams):
        for i, s in enumerate(streams[subject]):
            n = D.window_count(s.shape[1], proto.length, proto.stride)
            print(f"subject {subject} stream {i}: {s.shape[1]} samples -> {n} windows")
    split = D.split_protocol(windows, proto)
    if not args.keep_overlap:
        split = D.thin_evaluation(split, proto.length)
    meta = {"length": proto.length, "stride": proto.stride, "channels": len(D.CHANNELS)}
    D.save_windows(args.out, split, meta)
    print(f"{len(split.development)} development / {len(split.evaluation)} evaluation windows -> {args.out}")
    return 0


def cmd_train(args) -> int:
    split, _ = D.load_windows(args.data)
    if not split.development:
        raise GaitformerError(f"{args.data} has no development windows")
    fields = load_config(args.config) if args.config else {}
    fields.update(_overrides(args.set))
    if args.variant is not None:
        fields["variant"] = args.variant
    if args.seed is not None:
        fields["seed"] = args.seed
    if "variant" not in fields:
        raise UsageError("no variant given (--variant or 'variant' in the config file)")
    sample = split.development[0].values
    fields.setdefault("channels", sample.shape[0])
    fields.setdefault("seq_len", sample.shape[1])
    fields.setdefault("num_subjects", max(split.subjects) + 1)
    try:
        cfg = ModelConfig.from_dict(fields)
    except ConfigError as exc:
        raise UsageError(str(exc)) from None
    model = build_model(cfg)
    log.info("%s: %d parameters", cfg.variant, model.num_parameters())
    result = train_loop(
        model,
        split,
        args.epochs,
        args.batch_size,
        seed=cfg.seed,
        lr=args.lr,
        max_batches=args.max_batches,
        checkpoint=args.out,
    )
    metrics_path = args.metrics or str(Path(args.out).with_suffix(".metrics.csv"))
    write_metrics_csv(metrics_path, result.metrics)
    print(f"best epoch {result.best_epoch}: Rank-1 {result.best_eval_acc:.4f}; checkpoint {args.out}, metrics {metrics_path}")
    return 0


def cmd_eval(args) -> int:
    model, _ = load_checkpoint(args.model)
    split, _ = D.load_windows(args.data)
    windows = split.development + split.evaluation if args.all_windows else split.evaluation
    x, y = D.stack_windows(windows)
    if len(x) == 0:
        raise GaitformerError(f"{args.data} has no windows to score")
    curve = cmc_curve(predict(model, x), y)
    print(f"Rank-1 {curve.rank(1):.4f} over {curve.n_samples} windows")
    for k in (3, 5):
        if k <= len(curve.accuracies):
            print(f"Rank-{k} {curve.rank(k):.4f}")
    if args.cmc:
        write_cmc_csv(args.cmc, curve)
        plot = args.plot or str(Path(args.cmc).with_suffix(".svg"))
        plot_cmc(plot, {model.config.variant: curve})
        print(f"CMC -> {args.cmc}, {plot}")
    return 0


def cmd_gradcheck(args) -> int:
    variants = VARIANTS if args.variant == "all" else (args.variant,)
    bad = 0
    for v in variants:
        reports = variant_gradcheck(v, args.tolerance, args.seed)
        fails = failures(reports)
        bad += len(fails)
        print(f"{v}: {len(reports)} tensors, worst relative error {worst(reports):.2e}, {len(fails)} failed")
        for r in fails:
            print(f"  FAIL {r.name}: {r.max_rel_error:.2e}")
    if args.mechanisms or args.variant == "all":
        reports = mechanism_gradcheck(args.tolerance, args.seed)
        fails = failures(reports)
        bad += len(fails)
        print(f"mechanisms: {len(reports)} tensors, worst relative error {worst(reports):.2e}, {len(fails)} failed")
        for r in fails:
            print(f"  FAIL {r.name}: {r.max_rel_error:.2e}")
    return 1 if bad else 0


def cmd_bench(args) -> int:
    mechanisms = BENCH_MECHANISMS if args.mechanism == "all" else (args.mechanism,)
    reports = []
    for m in mechanisms:
        r = bench_scaling(m, args.lengths, args.repeats, window=args.window)
        slope = "n/a" if r.slope is None else f"{r.slope:.3f}"
        print(f"{m}: slope {slope} ({r.status}); medians " + " ".join(f"{t * 1e3:.3f}ms" for t in r.median_seconds))
        reports.append(r)
    if args.out:
        write_bench_csv(args.out, reports)
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gaitformer", description="Transformer gait recognition on inertial sensors")
    p.add_argument("-v", "--verbose", action="store_true", help="log per-epoch progress")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="write a synthetic IMU CSV")
    s.add_argument("--subjects", type=int, default=8)
    s.add_argument("--walks", type=int, default=40, help="recordings per subject")
    s.add_argument("--length", type=int, default=1000, help="samples per recording")
    s.add_argument("--seed", type=int, default=7)
    s.add_argument("--noise", type=float, default=0.05)
    s.add_argument("--jitter", type=float, default=2.0)
    s.add_argument("--spread", type=float, default=0.5)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    w = sub.add_parser("window", help="window a CSV into a development/evaluation archive")
    w.add_argument("--in", dest="input", required=True)
    w.add_argument("--protocol", choices=sorted(D.PROTOCOLS) + ["custom"], default="whugait")
    w.add_argument("--length", type=int)
    w.add_argument("--stride", type=int)
    w.add_argument("--dev-fraction", type=float)
    w.add_argument("--keep-overlap", action="store_true",
                   help="keep every evaluation window even where it overlaps development windows")
    w.add_argument("--out", required=True)
    w.set_defaults(func=cmd_window)

    t = sub.add_parser("train", help="train a model on a window archive")
    t.add_argument("--data", required=True)
    t.add_argument("--variant", choices=VARIANTS)
    t.add_argument("--config", help="flat key = value file of ModelConfig fields")
    t.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config field")
    t.add_argument("--seed", type=int)
    t.add_argument("--epochs", type=int, default=30)
    t.add_argument("--batch-size", type=int, default=32)
    t.add_argument("--max-batches", type=int, help="cap on mini-batches per epoch")
    t.add_argument("--lr", type=float, default=1e-3)
    t.add_argument("--out", required=True)
    t.add_argument("--metrics", help="per-epoch CSV (default: next to the checkpoint)")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="score a checkpoint: Rank-1 and CMC")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--cmc", help="CMC CSV path; an SVG plot is written alongside")
    e.add_argument("--plot", help="SVG path for the CMC plot")
    e.add_argument("--all-windows", action="store_true", help="score development windows too")
    e.set_defaults(func=cmd_eval)

    g = sub.add_parser("gradcheck", help="finite-difference gradient suite on tiny configs")
    g.add_argument("--variant", choices=VARIANTS + ("all",), default="all")
    g.add_argument("--mechanisms", action="store_true", help="also check every mechanism and sub-layer")
    g.add_argument("--tolerance", type=float, default=1e-4)
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=cmd_gradcheck)

    b = sub.add_parser("bench", help="time the mixing mechanisms over sequence lengths")
    b.add_argument("--mechanism", choices=BENCH_MECHANISMS + ("all",), default="all")
    b.add_argument("--lengths", type=int, nargs="+", default=list(DEFAULT_LENGTHS))
    b.add_argument("--repeats", type=int, default=5)
    b.add_argument("--window", type=int, default=32)
    b.add_argument("--out")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits 2 on unknown flags or choices
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"gaitformer {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (GaitformerError, OSError, KeyError) as exc:
        print(f"gaitformer {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
