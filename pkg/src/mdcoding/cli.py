"""Command-line interface: ``mdcoding <subcommand> ...``.

Sequence files use the ``MDSQ`` format of :mod:`mdcoding.sources`; messages are
the raw bytes of :class:`mdcoding.pipeline.MDMessage`.  Summaries go to stdout
as JSON.  Exit status is 0 on success, 1 on a decoding or input error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .annealer import AnnealSchedule, anneal
from .energy import DistortionMeasure, LagrangianWeights
from .exceptions import MDCodingError
from .experiments import ExperimentConfig, frontier_csv, run_experiment, summarize, sweep
from .pipeline import MDMessage, md_decode_central, md_decode_side, md_encode, theorem0_check
from .sources import MarkovSourceSpec, generate_markov, read_sequence, write_sequence

__all__ = ["build_parser", "main"]


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def _add_model_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=int, default=5, help="context order of each description")
    p.add_argument("--k1", type=int, default=1, help="half-width of the side-information window")
    for name in LagrangianWeights.names():
        p.add_argument(f"--{name}", type=float, default=1.0)
    p.add_argument("--schedule", choices=("power_law", "logarithmic", "constant", "delta_bound"),
                   default="power_law")
    p.add_argument("--c", type=float, default=None, help="power-law scale (default 2n)")
    p.add_argument("--exponent", type=float, default=0.1, help="power-law exponent")
    p.add_argument("--T0", type=float, default=None, help="logarithmic temperature constant")
    p.add_argument("--beta", type=float, default=None, help="constant inverse temperature")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--r", type=int, default=None, help="number of iterations")
    group.add_argument("--iterations-per-symbol", type=float, default=None,
                       help="iterations as a multiple of n (default 50)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--backend", choices=("auto", "numba", "python"), default="auto")


def _model(args, n: int, A: int):
    weights = LagrangianWeights(**{name: getattr(args, name) for name in LagrangianWeights.names()})
    d = DistortionMeasure.hamming(A)
    if args.schedule == "power_law":
        schedule = AnnealSchedule.power_law(args.c, args.exponent)
    elif args.schedule == "logarithmic":
        if args.T0 is None:
            raise MDCodingError("--schedule logarithmic needs --T0")
        schedule = AnnealSchedule.logarithmic(args.T0)
    elif args.schedule == "constant":
        if args.beta is None:
            raise MDCodingError("--schedule constant needs --beta")
        schedule = AnnealSchedule.constant(args.beta)
    else:
        schedule = AnnealSchedule.from_delta_bound(weights, d, args.k, args.k1, n)
    if args.r is not None:
        r = args.r
    else:
        per = 50.0 if args.iterations_per_symbol is None else args.iterations_per_symbol
        r = int(round(per * n))
    return weights, d, schedule, r


def cmd_generate(args) -> None:
    spec = MarkovSourceSpec.symmetric(args.p, args.n, args.seed, args.alphabet_size)
    x = generate_markov(spec)
    write_sequence(args.output, x, spec.alphabet_size)
    _emit({"n": spec.n, "alphabet_size": spec.alphabet_size, "entropy_rate": spec.entropy_rate(),
           "output": str(args.output)})


def cmd_anneal(args) -> None:
    x, A = read_sequence(args.input)
    weights, d, schedule, r = _model(args, len(x), A)
    report = anneal(x, weights, d, args.k, args.k1, schedule, r, args.seed, backend=args.backend)
    prefix = Path(args.output)
    paths = {}
    for name, seq in zip("yzw", report.triple):
        paths[name] = str(prefix.with_name(f"{prefix.name}.{name}.seq"))
        write_sequence(paths[name], seq, A)
    trace_path = prefix.with_name(f"{prefix.name}.trace.csv")
    lines = ["iteration,total"]
    last = len(report.trace) - 1
    for m, e in enumerate(report.trace):
        lines.append(f"{report.iterations if m == last else m * len(x)},{float(e)!r}")
    trace_path.write_text("\n".join(lines) + "\n")
    _emit({"energy": report.breakdown.to_dict(), "iterations": report.iterations,
           "backend": report.backend, "outputs": {**paths, "trace": str(trace_path)}})


def cmd_encode(args) -> None:
    x, A = read_sequence(args.input)
    weights, d, schedule, r = _model(args, len(x), A)
    messages, report, rates = md_encode(x, weights, d, args.k, args.k1, schedule, r, args.theta,
                                        args.seed, backend=args.backend)
    prefix = Path(args.output)
    out = {}
    for i, m in enumerate(messages, start=1):
        path = prefix.with_name(f"{prefix.name}.m{i}")
        path.write_bytes(m.to_bytes())
        out[f"m{i}"] = str(path)
    verdict = theorem0_check(rates)
    _emit({"energy": report.breakdown.to_dict(), "rates": rates.to_dict(),
           "rate_check": {"passed": verdict.passed, "margins": verdict.margins}, "outputs": out})


def _decode_side(args, which: int) -> None:
    m = MDMessage.from_bytes(Path(args.message).read_bytes())
    y = md_decode_side(m, which)
    write_sequence(args.output, y, m.side.alphabet_size)
    _emit({"n": len(y), "output": str(args.output)})


def cmd_decode1(args) -> None:
    _decode_side(args, 1)


def cmd_decode2(args) -> None:
    _decode_side(args, 2)


def cmd_decode0(args) -> None:
    m1 = MDMessage.from_bytes(Path(args.m1).read_bytes())
    m2 = MDMessage.from_bytes(Path(args.m2).read_bytes())
    w = md_decode_central(m1, m2)
    write_sequence(args.output, w, m1.side.alphabet_size)
    _emit({"n": len(w), "output": str(args.output)})


def cmd_experiment(args) -> None:
    cfg = ExperimentConfig.from_json(args.config)
    records = run_experiment(cfg, workers=args.workers)
    _emit({"median": summarize(records), "records": cfg.records_path, "trace": cfg.trace_path})


def cmd_sweep(args) -> None:
    raw = json.loads(Path(args.config).read_text())
    grid = json.loads(args.grid) if args.grid else raw.get("grid")
    if not grid:
        raise MDCodingError("sweep needs a grid (config key 'grid' or --grid)")
    cfg = ExperimentConfig.from_dict(raw)
    rows, diagnostics = sweep(cfg, grid, args.noise_band, workers=args.workers)
    text = frontier_csv(rows)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    print(json.dumps({"diagnostics": diagnostics}, sort_keys=True), file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mdcoding", description="Universal multiple-description coding")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a symmetric Markov source to a sequence file")
    p.add_argument("--p", type=float, default=0.2, help="probability of leaving the current symbol")
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--alphabet-size", type=int, default=2)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("anneal", help="anneal a source file into a reconstruction triple")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", required=True, help="prefix for .y/.z/.w.seq and .trace.csv")
    _add_model_args(p)
    p.set_defaults(func=cmd_anneal)

    p = sub.add_parser("encode", help="anneal and write the two descriptions")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", required=True, help="prefix for .m1 and .m2")
    p.add_argument("--theta", type=float, default=0.5, help="refinement share carried by M1")
    _add_model_args(p)
    p.set_defaults(func=cmd_encode)

    for name, which in (("decode1", 1), ("decode2", 2)):
        p = sub.add_parser(name, help=f"side decoder for description {which}")
        p.add_argument("message")
        p.add_argument("-o", "--output", required=True)
        p.set_defaults(func=cmd_decode1 if which == 1 else cmd_decode2)

    p = sub.add_parser("decode0", help="central decoder from both descriptions")
    p.add_argument("m1")
    p.add_argument("m2")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_decode0)

    p = sub.add_parser("experiment", help="run a JSON experiment config")
    p.add_argument("config")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("sweep", help="run a config over a grid of weights")
    p.add_argument("config")
    p.add_argument("--grid", default=None, help='JSON object, e.g. \'{"alpha1": [1, 2, 4]}\'')
    p.add_argument("--noise-band", type=float, default=0.01)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("-o", "--output", default=None, help="frontier CSV (default stdout)")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (MDCodingError, OSError, json.JSONDecodeError) as exc:
        print(f"mdcoding {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
