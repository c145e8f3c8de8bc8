"""Command-line front end: ``texloss <subcommand> [flags]``.

Exit status is 0 on success, 1 when the computation rejects its input and 2
for usage errors.  ``--config FILE`` reads a TOML file whose ``[subcommand]``
table supplies flag values; flags given on the command line win.  Batch
subcommands run files on a thread pool capped by ``TEXLOSS_THREADS``.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import analysis, bench
from .aggregation import AggregationRule, AttentionParams, init_attention
from .core import Image, Interval, atomic_write, load_image, save_image
from .descriptors import DescriptorKind
from .glcm import BinGrid, Offset, glcm
from .grad import TextureLoss, finite_diff_check
from .metrics import SsimParams, paired_metrics
from .mste import OffsetGrid, extract
from .optimize import COMPETITORS, OptimConfig, checkerboard_benchmark, denoise_pixels
from .synthetic import rng_for

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_help(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _choice(parse):
    def convert(text):
        try:
            return parse(text)
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    convert.__name__ = parse.__qualname__.split(".")[0]
    return convert


def worker_count() -> int:
    raw = os.environ.get("TEXLOSS_THREADS")
    if raw is None or raw == "":
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"TEXLOSS_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise UsageError(f"TEXLOSS_THREADS must be a positive integer, got {raw!r}")
    return n


def _pool_map(fn, items):
    items = list(items)
    workers = min(worker_count(), max(len(items), 1))
    if workers == 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _emit(text: str, out) -> None:
    if out:
        atomic_write(out, text)
    else:
        sys.stdout.write(text)


def _finite(obj):
    # strict JSON has no Infinity/NaN; identical images give psnr = inf
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def _json(obj) -> str:
    return json.dumps(_finite(obj), sort_keys=True, allow_nan=False) + "\n"


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _common():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", metavar="TOML", help="TOML file with a [subcommand] table of flag values")
    p.add_argument("--seed", type=int, default=0, help="seed for every random draw (default 0)")
    p.add_argument("--out", metavar="PATH", help="write the main output here instead of stdout")
    return p


def _texture():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--bins", type=int, default=8, help="number of gray-level bins (default 8)")
    p.add_argument("--sigma", type=float, default=0.5,
                   help="soft-assignment width in bin widths (default 0.5)")
    p.add_argument("--distances", type=float, nargs="+", default=[1, 3, 5, 7])
    p.add_argument("--angles", type=float, nargs="+", default=[0, 45, 90, 135],
                   help="angles in degrees")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="texloss", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND", parser_class=_Parser)
    sub.required = True
    common, texture = _common(), _texture()
    kind = _choice(DescriptorKind.parse)
    rule = _choice(AggregationRule.parse)

    p = sub.add_parser("glcm", parents=[common, texture], help="co-occurrence matrix of one image")
    p.add_argument("--image", required=True)
    p.add_argument("--d", type=float, default=1.0)
    p.add_argument("--theta", type=float, default=0.0)
    p.add_argument("--mode", choices=("soft", "hard"), default="soft")
    p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("features", parents=[common, texture],
                       help="multi-scale descriptor grid of one or more images")
    p.add_argument("--image", nargs="+", required=True)
    p.add_argument("--kind", type=kind, default=DescriptorKind.CONTRAST)
    p.add_argument("--mode", choices=("soft", "hard"), default="soft")
    p.add_argument("--out-dir", help="directory for per-image CSVs (required for several images)")

    p = sub.add_parser("loss", parents=[common, texture], help="texture loss between two images")
    p.add_argument("--a", required=True, help="reference image")
    p.add_argument("--b", required=True, help="image under evaluation")
    p.add_argument("--rule", type=rule, default=AggregationRule.AVERAGE)
    p.add_argument("--kinds", type=kind, nargs="+", default=[DescriptorKind.CONTRAST])
    p.add_argument("--attention", metavar="JSON", help="attention parameters file")
    p.add_argument("--cq", type=int, default=1, help="query/key channels for a fresh attention layer")

    p = sub.add_parser("gradcheck", parents=[common, texture],
                       help="analytic vs finite-difference gradient on random images")
    p.add_argument("--size", type=int, default=8)
    p.add_argument("--rule", type=rule, default=AggregationRule.AVERAGE)
    p.add_argument("--kinds", type=kind, nargs="+", default=[DescriptorKind.CONTRAST])
    p.add_argument("--step", type=float, default=1e-4)
    p.add_argument("--threshold", type=float, default=1e-5)
    p.add_argument("--cq", type=int, default=1)
    p.add_argument("--gamma", type=float, default=0.7, help="attention gamma (default 0.7)")

    p = sub.add_parser("denoise", parents=[common, texture],
                       help="optimize pixels toward a clean reference's texture")
    p.add_argument("--noisy", help="noisy input (default: synthetic checkerboard)")
    p.add_argument("--clean", help="clean reference (required with --noisy)")
    p.add_argument("--size", type=int, default=64, help="checkerboard side")
    p.add_argument("--square", type=int, default=8, help="checkerboard square side")
    p.add_argument("--noise", type=float, default=0.2, help="noise std as a fraction of the range")
    p.add_argument("--rule", type=rule, default=AggregationRule.AVERAGE)
    p.add_argument("--kinds", type=kind, nargs="+", default=[DescriptorKind.CONTRAST])
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--optimizer", choices=("adam", "gd"), default="adam")
    p.add_argument("--lambda-txt", type=float, help="texture weight (default: per rule)")
    p.add_argument("--lambda-pix", type=float, default=0.0)
    p.add_argument("--competitor", choices=COMPETITORS)
    p.add_argument("--lambda-comp", type=float)
    p.add_argument("--train-attention", action="store_true")
    p.add_argument("--cq", type=int, default=1)
    p.add_argument("--trace", metavar="CSV", help="write the per-step trace here")
    p.add_argument("--image-out", metavar="PATH", help="write the denoised image here")
    p.add_argument("--image-format", choices=("raw_f32", "pgm8", "pgm16"))

    p = sub.add_parser("metrics", parents=[common], help="MSE, PSNR and SSIM of an image pair")
    p.add_argument("--a", required=True, help="denoised image")
    p.add_argument("--b", required=True, help="reference image")
    p.add_argument("--window", choices=("gaussian", "global"), default="gaussian")

    p = sub.add_parser("match", parents=[common],
                       help="template-matching scores of noisy templates in denoised images")
    p.add_argument("--source", nargs="+", required=True, help="images templates are cut from")
    p.add_argument("--target", nargs="+", required=True, help="images searched, paired with --source")
    p.add_argument("--r", type=int, default=9, help="templates per image (a perfect square)")
    p.add_argument("--t", type=int, default=32, help="template side")
    p.add_argument("--scores", metavar="CSV", help="write the individual scores here")
    p.add_argument("--kde", metavar="CSV", help="write the score density here")

    p = sub.add_parser("rank", parents=[common], help="rank methods by perception-distortion distance")
    p.add_argument("--input", required=True, help="CSV with label,perception,distortion")

    p = sub.add_parser("bench", parents=[common], help="GLCM timing sweeps")
    p.add_argument("--repeats", type=int, default=7, help="timed rounds per configuration (default 7)")
    p.add_argument("--sizes", type=int, nargs="+", help="pixel counts (perfect squares)")
    p.add_argument("--bin-counts", type=int, nargs="+", help="bin counts")
    p.add_argument("--csv", metavar="PATH", help="write the timing rows here")
    return parser


# ---------------------------------------------------------------------------
# config files
# ---------------------------------------------------------------------------

def _find_config(argv):
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def _config_tokens(parser, command, path) -> list:
    try:
        with open(path, "rb") as fh:
            table = tomllib.load(fh).get(command, {})
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"config {path} is not valid TOML: {exc}") from None
    sub = parser._subparsers._group_actions[0].choices[command]
    actions = {a.dest: a for a in sub._actions if a.option_strings}
    tokens = []
    for key, value in table.items():
        action = actions.get(key.replace("-", "_"))
        if action is None or action.dest in ("config", "help"):
            raise UsageError(f"config key {key!r} is not a flag of {command}")
        flag = action.option_strings[-1]
        if isinstance(action, argparse._StoreTrueAction):
            if value:
                tokens.append(flag)
            continue
        values = value if isinstance(value, list) else [value]
        tokens += [flag] + [str(v) for v in values]
    return tokens


def parse_args(argv):
    parser = build_parser()
    path = _find_config(argv)
    if path is not None and argv and not argv[0].startswith("-"):
        argv = [argv[0]] + _config_tokens(parser, argv[0], path) + list(argv[1:])
    return parser.parse_args(argv)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _bins(img: Image, args) -> BinGrid:
    vr = img.value_range
    return BinGrid.uniform(vr.lo, vr.hi, args.bins, args.sigma)


def _grid(args) -> OffsetGrid:
    return OffsetGrid(tuple(args.distances), tuple(args.angles))


def cmd_glcm(args):
    img = load_image(args.image)
    g = glcm(img, Offset(args.d, args.theta), _bins(img, args), args.mode)
    _emit(g.to_csv() if args.format == "csv" else g.to_json() + "\n", args.out)


def cmd_features(args):
    grid = _grid(args)

    def one(path):
        img = load_image(path)
        return extract(img, grid, _bins(img, args), args.kind, args.mode).to_csv()

    if len(args.image) == 1 and not args.out_dir:
        _emit(one(args.image[0]), args.out)
        return
    if not args.out_dir:
        raise UsageError("several images need --out-dir")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    targets = [out_dir / f"{Path(p).stem}.{args.kind.value}.csv" for p in args.image]

    def job(pair):
        src, dst = pair
        atomic_write(dst, one(src))
        return str(dst)

    written = _pool_map(job, zip(args.image, targets))
    _emit(_json({"written": written}), args.out)


def _attention_params(args):
    if args.rule is not AggregationRule.ATTENTION:
        return None
    if getattr(args, "attention", None):
        return AttentionParams.from_json(Path(args.attention).read_text())
    return init_attention(args.cq, args.seed)


def cmd_loss(args):
    a, b = load_image(args.a), load_image(args.b)
    if a.value_range != b.value_range:
        raise ValueError(f"value ranges differ: {a.value_range} vs {b.value_range}")
    loss = TextureLoss(_grid(args), _bins(a, args), args.kinds, args.rule, _attention_params(args))
    res = loss.evaluate(b, loss.targets(a))
    _emit(_json({"l_txt": res.value, "rule": args.rule.value,
                 "per_kind": {k.value: v for k, v in res.per_kind.items()}}), args.out)


def cmd_gradcheck(args):
    rng = rng_for(args.seed)
    x = rng.uniform(-1.0, 1.0, (args.size, args.size))
    ref = rng.uniform(-1.0, 1.0, (args.size, args.size))
    params = _attention_params(args)
    if params is not None:
        params = AttentionParams(params.wq, params.wk, params.wv, args.gamma)
    bins = BinGrid.uniform(-1.0, 1.0, args.bins, args.sigma)
    loss = TextureLoss(_grid(args), bins, args.kinds, args.rule, params)
    targets = loss.targets(ref)

    def objective(arr):
        res = loss.evaluate(arr, targets)
        return res.value, res.grad

    report = finite_diff_check(x, objective, args.step)
    ok = report.max_rel_err < args.threshold
    out = json.loads(report.to_json())
    out.update(rule=args.rule.value, kinds=[k.value for k in args.kinds],
               threshold=args.threshold, passed=ok)
    _emit(_json(out), args.out)
    return 0 if ok else 1


def cmd_denoise(args):
    if (args.noisy is None) != (args.clean is None):
        raise UsageError("--noisy and --clean go together")
    if args.noisy is None:
        clean, noisy = checkerboard_benchmark(args.size, args.square, args.noise, args.seed)
    else:
        noisy, clean = load_image(args.noisy), load_image(args.clean)
    cfg = OptimConfig(steps=args.steps, lr=args.lr, optimizer=args.optimizer, rule=args.rule,
                      lambda_txt=args.lambda_txt, lambda_pix=args.lambda_pix,
                      competitor=args.competitor, lambda_comp=args.lambda_comp,
                      train_attention=args.train_attention, attention_cq=args.cq,
                      seed=args.seed, grid=_grid(args), n_bins=args.bins,
                      sigma_bins=args.sigma, kinds=tuple(args.kinds))
    out, trace = denoise_pixels(noisy, clean, cfg)
    if args.trace:
        atomic_write(args.trace, trace.to_csv())
    if args.image_out:
        _save_result(out, args.image_out, args.image_format)
    summary = {"steps": cfg.steps, "rule": cfg.rule.value,
               "l_txt_initial": float(trace.l_txt[0]), "l_txt_final": float(trace.l_txt[-1]),
               "psnr_noisy": float(trace.psnr[0]), "psnr_final": float(trace.psnr[-1])}
    if trace.attention is not None:
        summary["attention"] = json.loads(trace.attention.to_json())
    _emit(_json(summary), args.out)


def _save_result(img: Image, path, fmt):
    if fmt is None:
        fmt = "raw_f32" if Path(path).suffix == ".f32" else (
            "pgm8" if img.value_range == Interval(0.0, 255.0) else "pgm16")
    if fmt == "raw_f32":
        vr = img.value_range
        img = img.with_data(np.clip(img.data.astype(np.float32), vr.lo, vr.hi).astype(np.float64))
    save_image(img, path, fmt)


def cmd_metrics(args):
    a, b = load_image(args.a), load_image(args.b)
    _emit(_json(paired_metrics(a, b, SsimParams(window=args.window))), args.out)


def cmd_match(args):
    if len(args.source) != len(args.target):
        raise UsageError("--source and --target need the same number of images")

    def one(pair):
        return analysis.matching_scores(load_image(pair[0]), load_image(pair[1]), args.r, args.t)

    scores = np.concatenate(_pool_map(one, zip(args.source, args.target)))
    if args.scores:
        atomic_write(args.scores, "score\n" + "".join(f"{v!r}\n" for v in scores.tolist()))
    dist = analysis.kde(scores)
    if args.kde:
        atomic_write(args.kde, dist.to_csv())
    _emit(_json({"count": int(scores.size), "mean": dist.mean, "bandwidth": dist.bandwidth,
                 "max": float(scores.max()), "min": float(scores.min())}), args.out)


def cmd_rank(args):
    points = analysis.read_pd_csv(Path(args.input).read_text(encoding="utf-8"))
    _emit(analysis.ranked_csv(analysis.pd_rank(points)), args.out)


def cmd_bench(args):
    if (args.sizes is None) != (args.bin_counts is None):
        raise UsageError("--sizes and --bin-counts go together")
    t0 = time.perf_counter()
    if args.sizes is not None:
        result = bench.run_scaling(args.sizes, args.bin_counts, args.repeats, seed=args.seed)
        _emit(result.to_csv(), args.out)
        return
    summary = bench.complexity_suite(args.repeats, args.seed)
    if args.csv:
        atomic_write(args.csv, summary.result.to_csv())
    _emit(_json({"hard_slope_vs_N": summary.hard_slope, "soft_slope_vs_n": summary.soft_slope,
                 "soft_hard_ratios": summary.ratios,
                 "ratio_inversions": summary.ratio_inversions,
                 "seconds": time.perf_counter() - t0,
                 "environment": summary.result.environment}), args.out)


COMMANDS = {"glcm": cmd_glcm, "features": cmd_features, "loss": cmd_loss,
            "gradcheck": cmd_gradcheck, "denoise": cmd_denoise, "metrics": cmd_metrics,
            "match": cmd_match, "rank": cmd_rank, "bench": cmd_bench}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
        worker_count()
        status = COMMANDS[args.command](args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"texloss: usage error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, ArithmeticError, OSError) as exc:
        print(f"texloss: error: {exc}", file=sys.stderr)
        return 1
    return 0 if status is None else int(status)
