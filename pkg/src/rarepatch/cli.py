"""
Command-line interface.

Subcommands ``score``, ``oracle``, ``network``, ``histogram`` and ``synth``.
Every command writes a JSON run report next to its other outputs; everything
in the report except the ``runtime`` block is deterministic given ``--seed``.

Exit codes: 0 success, 2 input error, 3 geometry error, 4 cost guard.
"""

import argparse
import json
import math
import sys
import time
import warnings

import numpy as np

from . import __version__
from .core import Shape, origin_grid
from .imageio import ImageFormatError, read_image, write_heatmap, write_pgm, write_raw
from .network import NetworkParams, run_network
from .oracle import argmax_origin, distance_outliers, nn_distance_map
from .projection import (
    FieldStats,
    ScoringParams,
    default_a,
    projection_histogram,
    score_image,
    top_candidates,
)
from .synth import SynthError, generate

SCHEMA_VERSION = 1
ORACLE_GUARD = 10 ** 5

EXIT_OK, EXIT_INPUT, EXIT_GEOMETRY, EXIT_GUARD = 0, 2, 3, 4


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


class _Timer:
    def __init__(self):
        self.timings = {}

    def __call__(self, name):
        timer = self

        class _Span:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                timer.timings[name] = round(time.perf_counter() - self.t0, 6)

        return _Span()


def _load(args):
    try:
        image = read_image(args.input)
    except ImageFormatError as exc:
        raise CliError(str(exc), EXIT_INPUT) from None
    if args.mask:
        try:
            shape = Shape.from_mask(read_image(args.mask))
        except ImageFormatError as exc:
            raise CliError(f"mask: {exc}", EXIT_INPUT) from None
        except ValueError as exc:
            raise CliError(f"mask: {exc}", EXIT_GEOMETRY) from None
    else:
        try:
            shape = Shape.square(args.shape)
        except ValueError as exc:
            raise CliError(str(exc), EXIT_GEOMETRY) from None
    ny, nx = origin_grid(image, shape)
    if ny == 0 or nx == 0:
        raise CliError(
            f"shape {shape.width}x{shape.height} is larger than image "
            f"{image.shape[1]}x{image.shape[0]}", EXIT_GEOMETRY)
    return image, shape


def _report(command, args, image, shape, parameters):
    return {
        "schema_version": SCHEMA_VERSION,
        "tool": {"name": "rarepatch", "version": __version__},
        "command": command,
        "input": {"path": args.input, "width": int(image.shape[1]), "height": int(image.shape[0])},
        "shape": {"width": shape.width, "height": shape.height,
                  "support_size": shape.support_size,
                  "source": args.mask if args.mask else f"square:{args.shape}"},
        "parameters": parameters,
        "candidates": [],
        "histogram": None,
        "convergence": None,
        "outputs": {},
    }


def _finish(report, timer, threads):
    report["runtime"] = {"threads": threads, "timings": timer.timings}
    return report


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=False, allow_nan=False)
        fh.write("\n")


def _candidates(picked):
    return [{"rank": i + 1, "x": int(r[0]), "y": int(r[1]), "score": float(v)}
            for i, (r, v) in enumerate(picked)]


def _write_candidates(path, cands):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("rank,x,y,score\n")
        for c in cands:
            fh.write(f"{c['rank']},{c['x']},{c['y']},{c['score']!r}\n")


def _emit_map(prefix, name, values, fmt, outputs):
    ext = "png" if fmt == "png" else "pgm"
    heat = f"{prefix}.{name}.{ext}"
    raw = f"{prefix}.{name}.f64"
    write_heatmap(heat, values, fmt)
    write_raw(raw, values)
    outputs[f"{name}_heatmap"] = heat
    outputs[f"{name}_raw"] = raw


def _scoring_params(args, shape):
    a = args.a if args.a is not None else default_a(shape)
    try:
        return ScoringParams(M=args.M, a=a, seed=args.seed, mode=getattr(args, "mode", "count"),
                             normalize_by_block_dev=getattr(args, "normalize_block_dev", False),
                             method=args.method, threads=args.threads)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_INPUT) from None


def cmd_score(args):
    timer = _Timer()
    with timer("load"):
        image, shape = _load(args)
    params = _scoring_params(args, shape)
    stats = FieldStats()
    with timer("score"):
        smap = score_image(image, shape, params, fields_out=stats)
    with timer("select"):
        picked = top_candidates(smap, args.top_k, shape)
    report = _report("score", args, image, shape, {
        "M": params.M, "a": params.a, "seed": params.seed, "mode": params.mode,
        "normalize_by_block_dev": params.normalize_by_block_dev,
        "method": params.method, "top_k": args.top_k})
    report["candidates"] = _candidates(picked)
    report["histogram"] = stats.summary()
    outputs = report["outputs"]
    _emit_map(args.out, "score", smap.values, args.heatmap_format, outputs)
    cand_path = f"{args.out}.candidates.csv"
    _write_candidates(cand_path, report["candidates"])
    outputs["candidates"] = cand_path
    outputs["report"] = f"{args.out}.report.json"
    _write_json(outputs["report"], _finish(report, timer, args.threads))
    return EXIT_OK


def cmd_oracle(args):
    timer = _Timer()
    with timer("load"):
        image, shape = _load(args)
    ny, nx = origin_grid(image, shape)
    n = ny * nx
    if n > ORACLE_GUARD and not args.force:
        cost = float(n) * n * shape.support_size
        raise CliError(
            f"{n} origins exceed the guard of {ORACLE_GUARD}; exhaustive search needs "
            f"about {cost:.3g} pixel comparisons. Use --force to run anyway.", EXIT_GUARD)
    try:
        with timer("distance_map"):
            dmap = nn_distance_map(image, shape, args.norm, args.rule, threads=args.threads)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_GEOMETRY) from None
    origin, dist = argmax_origin(dmap)
    report = _report("oracle", args, image, shape,
                     {"norm": args.norm, "rule": args.rule, "z": args.z})
    report["rarest"] = {"x": int(origin[0]), "y": int(origin[1]), "distance": dist}
    report["outliers"] = [{"x": int(r[0]), "y": int(r[1]), "distance": float(d), "z": float(zs)}
                          for r, d, zs in distance_outliers(dmap, args.z)]
    report["candidates"] = [{"rank": 1, "x": int(origin[0]), "y": int(origin[1]), "score": dist}]
    outputs = report["outputs"]
    _emit_map(args.out, "distance", dmap.values, args.heatmap_format, outputs)
    outputs["candidates"] = f"{args.out}.candidates.csv"
    _write_candidates(outputs["candidates"], report["candidates"])
    outputs["report"] = f"{args.out}.report.json"
    _write_json(outputs["report"], _finish(report, timer, args.threads))
    return EXIT_OK


def cmd_network(args):
    timer = _Timer()
    with timer("load"):
        image, shape = _load(args)
    sparams = _scoring_params(args, shape)
    fields = []
    with timer("score"):
        smap = score_image(image, shape, sparams, fields_out=fields)
    try:
        nparams = NetworkParams(
            h0=args.h0, delta=args.delta, a=sparams.a, beta=args.beta, target_fraction=args.f,
            max_iters=args.max_iters, tol=args.tol,
            max_pairs_per_origin=args.pair_cap if args.pair_cap > 0 else None)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_INPUT) from None
    with timer("network"), warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        result = run_network(image, shape, fields, nparams)
    stats = FieldStats()
    for fld in fields:
        stats.append(fld)
    report = _report("network", args, image, shape, {
        "M": sparams.M, "a": sparams.a, "seed": sparams.seed, "method": sparams.method,
        "f": nparams.target_fraction, "beta": nparams.beta,
        "delta": None if math.isinf(nparams.delta) else nparams.delta,
        "h0": args.h0, "max_iters": nparams.max_iters, "tol": nparams.tol,
        "pair_cap": nparams.max_pairs_per_origin, "top_k": args.top_k})
    report["candidates"] = _candidates(top_candidates(result.activity, args.top_k, shape))
    report["score_candidates"] = _candidates(top_candidates(smap, args.top_k, shape))
    report["histogram"] = stats.summary()
    cal = result.calibration
    report["convergence"] = {
        "status": result.status, "iterations": result.iterations,
        "threshold": result.T, "h0": result.h0, "weights": len(result.weights),
        "active_fraction": result.active_fraction,
        "calibration_warning": cal.get("warning"), "calibration_steps": cal.get("steps")}
    outputs = report["outputs"]
    _emit_map(args.out, "score", smap.values, args.heatmap_format, outputs)
    _emit_map(args.out, "activity", result.activity, args.heatmap_format, outputs)
    outputs["candidates"] = f"{args.out}.candidates.csv"
    _write_candidates(outputs["candidates"], report["candidates"])
    outputs["report"] = f"{args.out}.report.json"
    _write_json(outputs["report"], _finish(report, timer, args.threads))
    return EXIT_OK


def cmd_histogram(args):
    timer = _Timer()
    with timer("load"):
        image, shape = _load(args)
    if args.bins < 2 or args.M < 1:
        raise CliError("need --bins >= 2 and --M >= 1", EXIT_INPUT)
    with timer("histogram"):
        hist = projection_histogram(image, shape, args.M, args.bins, args.seed,
                                    args.method, args.threads)
    csv_path = f"{args.out}.hist.csv"
    with np.errstate(divide="ignore"):
        log10p = np.log10(hist.counts / hist.total)
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("bin_center,count,log10_probability\n")
        for c, k, lp in zip(hist.centers, hist.counts, log10p):
            fh.write(f"{float(c)!r},{int(k)},{'-inf' if np.isinf(lp) else repr(float(lp))}\n")
    report = _report("histogram", args, image, shape,
                     {"M": args.M, "bins": args.bins, "seed": args.seed, "method": args.method})
    report["histogram"] = dict(hist.moments, range=[float(hist.edges[0]), float(hist.edges[-1])])
    report["outputs"] = {"csv": csv_path, "report": f"{args.out}.report.json"}
    _write_json(report["outputs"]["report"], _finish(report, timer, args.threads))
    return EXIT_OK


def cmd_synth(args):
    try:
        with open(args.spec, encoding="utf-8") as fh:
            spec = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read spec {args.spec}: {exc}", EXIT_INPUT) from None
    try:
        image, truth = generate(spec)
    except (SynthError, KeyError, TypeError, ValueError) as exc:
        raise CliError(f"invalid spec: {exc}", EXIT_INPUT) from None
    write_pgm(args.output, np.round(image * 65535).astype(np.int64), maxval=65535)
    truth_path = f"{args.output}.truth.json"
    _write_json(truth_path, {
        "schema_version": SCHEMA_VERSION,
        "image": args.output, "width": int(image.shape[1]), "height": int(image.shape[0]),
        "truth": None if truth is None else {"x": truth[0], "y": truth[1]},
        "spec": spec})
    return EXIT_OK


def _common(p, need_image=True):
    p.add_argument("input", help="grayscale PGM (P5) or PNG image")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--shape", type=int, default=24, help="side of a square shape (default 24)")
    g.add_argument("--mask", help="PGM/PNG mask, nonzero pixels form the shape")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1, help="worker threads; output does not depend on it")
    p.add_argument("--out", default="rarepatch", help="output path prefix")
    p.add_argument("--heatmap-format", choices=("pgm", "png"), default="pgm")


def _scoring(p):
    p.add_argument("--M", type=int, default=30, help="number of random projections")
    p.add_argument("--a", type=float, default=None,
                   help="threshold in standard deviations (default depends on shape size)")
    p.add_argument("--method", choices=("auto", "direct", "fft"), default="auto")
    p.add_argument("--top-k", type=int, default=5)


def build_parser():
    parser = argparse.ArgumentParser(prog="rarepatch", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="random-projection rarity score")
    _common(p)
    _scoring(p)
    p.add_argument("--mode", choices=("count", "smoothed"), default="count")
    p.add_argument("--normalize-block-dev", action="store_true")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("oracle", help="exact nearest-disjoint-block search (slow)")
    _common(p)
    p.add_argument("--norm", choices=("l2", "l1"), default="l2")
    p.add_argument("--rule", choices=("chebyshev", "euclidean"), default="chebyshev")
    p.add_argument("--z", type=float, default=3.0, help="outlier threshold in standard deviations")
    p.add_argument("--force", action="store_true", help="skip the cost guard")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("network", help="score followed by network refinement")
    _common(p)
    _scoring(p)
    p.add_argument("--f", type=float, default=0.02, help="target fraction of active neurons")
    p.add_argument("--beta", type=float, default=NetworkParams.beta)
    p.add_argument("--delta", type=float, default=math.inf, help="projection similarity window")
    p.add_argument("--h0", type=float, default=None, help="field scale (default: flux balance)")
    p.add_argument("--max-iters", type=int, default=50)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--pair-cap", type=int, default=64, help="max couplings per origin, 0 = no cap")
    p.set_defaults(func=cmd_network)

    p = sub.add_parser("histogram", help="pooled projection value histogram as CSV")
    _common(p)
    p.add_argument("--M", type=int, default=30)
    p.add_argument("--bins", type=int, default=101)
    p.add_argument("--method", choices=("auto", "direct", "fft"), default="auto")
    p.set_defaults(func=cmd_histogram)

    p = sub.add_parser("synth", help="render a synthetic image from a JSON spec")
    p.add_argument("spec", help="JSON spec file")
    p.add_argument("output", help="output PGM path; ground truth goes to OUTPUT.truth.json")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        print("rarepatch: --threads must be >= 1", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except CliError as exc:
        print(f"rarepatch {args.command}: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
