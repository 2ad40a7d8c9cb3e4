"""Command line front end.

Exit codes: 0 success, 2 bad input or invalid measure, 3 no walk sampled,
4 theoretical-max normalization requested for a relaxed measure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import experiments
from .aggregation import choquet
from .clustering import render_grayscale, write_matrix_csv, write_pgm
from .decomposition import (
    DEFAULT_EPSILON,
    EmptyResultError,
    NormalizationError,
    decompose,
    evaluate_with_operators,
    load_operators,
    save_operators,
)
from .learning import (
    DatasetSpec,
    FitOptions,
    fit_measure,
    generate_dataset,
    load_dataset,
    load_observability,
    save_dataset,
    save_report,
)
from .measure import (
    InvalidMeasureError,
    MeasureError,
    load_measure,
    measure_from_los,
    save_measure,
)

EXIT_INPUT = 2
EXIT_EMPTY = 3
EXIT_NORMALIZATION = 4


class UsageError(Exception):
    pass


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {text!r}") from exc


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers: {text!r}") from exc


def _fmt(w) -> str:
    return "(" + ", ".join(f"{v:.4g}" for v in w) + ")"


# -- commands -----------------------------------------------------------------


def cmd_gen(args) -> int:
    kind = args.kind
    if kind == "random" and args.seed is None:
        raise UsageError("--seed is required for random measures")
    if kind == "los":
        if not args.weights:
            raise UsageError("--weights is required for --kind los")
        g = measure_from_los(args.weights)
    else:
        g = experiments.resolve_measure(kind, args.n, args.seed)
    if args.out:
        save_measure(g, args.out)
    else:
        json.dump(g.to_dict(), sys.stdout)
        print()
    if args.data_out:
        if args.seed is None:
            raise UsageError("--seed is required when generating a dataset")
        spec = DatasetSpec(
            g, m=args.rows, sigma=args.sigma, seed=args.seed, coverage=args.coverage,
            quota=args.quota, walks=args.walks,
        )
        save_dataset(generate_dataset(spec), args.data_out)
    return 0


def cmd_validate(args) -> int:
    try:
        g = load_measure(args.measure)
    except InvalidMeasureError as exc:
        print(f"{args.measure}: {len(exc.violations)} violation(s)")
        for v in exc.violations:
            print(f"  {v}")
        return EXIT_INPUT
    print(f"{args.measure}: valid (n={g.n}, constrained={g.constrained})")
    return 0


def cmd_eval(args) -> int:
    h = np.asarray(args.input, dtype=float)
    if args.operators:
        ops = load_operators(args.operators)
        res = evaluate_with_operators(ops, h, policy=args.policy)
        if res.value is None:
            print("unmapped sort: output suppressed")
            return 0
        tag = " (imputed)" if res.imputed else ""
        print(f"{res.value!r} operator={res.operator_id}{tag}")
        return 0
    g = load_measure(args.measure)
    print(repr(choquet(g, h)))
    return 0


def _observability(args, g):
    if getattr(args, "observability", None):
        obs = load_observability(args.observability)
        if obs.n != g.n:
            raise UsageError("observability record and measure sizes differ")
        return obs
    return None


def _summary(ops) -> str:
    n_mapped = len(ops.sort_map)
    lines = [
        f"{ops.k} operators, coverage {ops.coverage:.6g} "
        f"({n_mapped} sorts mapped), {ops.stored_weights} stored weights "
        f"vs {2 ** ops.n} measure values"
    ]
    for i, (w, c, (name, d)) in enumerate(zip(ops.operators, ops.counts, ops.nearest_named())):
        lines.append(f"  operator {i}: walks={c} weights={_fmt(w)} nearest={name} (d={d:.4g})")
    return "\n".join(lines)


def cmd_decompose(args) -> int:
    g = load_measure(args.measure)
    obs = _observability(args, g)
    dec = decompose(
        g, obs, epsilon=args.epsilon, metric=args.metric, p=args.p,
        normalization=args.normalization, k_max=args.k_max,
    )
    summary = _summary(dec.operators)
    if args.out:
        save_operators(dec.operators, args.out)
    if args.summary:
        Path(args.summary).write_text(summary + "\n")
    print(summary)
    return 0


def _fit_from_args(args):
    data = load_dataset(args.data)
    opts = FitOptions(
        constrained=not args.relaxed,
        bias=args.bias,
        reg_p=args.reg_p,
        reg_lambda=args.reg_lambda,
        max_iterations=args.max_iterations,
        step_size=args.step_size,
    )
    return fit_measure(data, opts)


def cmd_ivat(args) -> int:
    if bool(args.measure) == bool(args.data):
        raise UsageError("give either a measure file or --data")
    if args.data:
        fit = _fit_from_args(args)
        g, obs = fit.measure, fit.observability
    else:
        g = load_measure(args.measure)
        obs = _observability(args, g)
    if args.observed_only and obs is None:
        raise UsageError("--observed-only needs --data or --observability")
    dec = decompose(
        g, obs if args.observed_only else None, epsilon=args.epsilon,
        metric=args.metric, p=args.p, normalization=args.normalization, k_max=args.k_max,
    )
    matrix = dec.ivat if args.unique else dec.expanded_ivat()
    write_pgm(args.image, render_grayscale(matrix, dark_similar=args.dark_similar))
    if args.csv:
        write_matrix_csv(args.csv, matrix)
    print(
        f"{args.image}: {matrix.shape[0]}x{matrix.shape[1]} iVAT image, "
        f"{len(dec.samples)} walks, {dec.partition.k} blocks"
    )
    return 0


def cmd_learn(args) -> int:
    fit = _fit_from_args(args)
    save_measure(fit.measure, args.out)
    if args.report:
        save_report(fit, args.report)
    obs = fit.observability
    print(
        f"fitted n={fit.measure.n}: sse={fit.sse:.6g} iterations={fit.iterations} "
        f"converged={fit.converged} bias={fit.bias:.6g} "
        f"seen={obs.n_seen}/{2 ** obs.n} variables"
    )
    return 0


def cmd_experiment(args) -> int:
    cfg = experiments.ExperimentConfig.load(args.config)
    rows = experiments.run_experiment(cfg)
    out = args.out
    if out is None:
        out_dir = Path(cfg.output_dir or ".")
        out = out_dir / f"{cfg.kind}.csv"
    experiments.write_report(rows, out, cfg.kind)
    key = "sigma" if cfg.kind == "noise-sweep" else "walk_fraction"
    for value in dict.fromkeys(r[key] for r in rows):
        print(f"{key}={value}: median k={experiments.median_k(rows, key, value):g}")
    print(f"report written to {out}")
    return 0


# -- parser -------------------------------------------------------------------


def _decomp_flags(p):
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON,
                   help="keep walks whose unobserved fraction is below this")
    p.add_argument("--metric", choices=["sqeuclidean", "pnorm"], default="sqeuclidean")
    p.add_argument("--p", type=float, default=2.0, help="norm order for --metric pnorm")
    p.add_argument("--normalization", choices=["theoretical-max", "observed-range"], default=None)
    p.add_argument("--k-max", type=int, default=None)
    p.add_argument("--observability", help="observability record or fit report (JSON)")


def _fit_flags(p):
    p.add_argument("--relaxed", action="store_true", help="drop monotonicity and boundary constraints")
    p.add_argument("--bias", action="store_true", help="fit a bias term (relaxed mode only)")
    p.add_argument("--reg-p", type=float, choices=[1.0, 2.0], default=None)
    p.add_argument("--reg-lambda", type=float, default=0.0)
    p.add_argument("--max-iterations", type=int, default=20_000)
    p.add_argument("--step-size", type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fuzzylos", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a measure (and optionally a labelled dataset)")
    p.add_argument("--kind", required=True,
                   choices=["reference", "fig4", "demining", "max", "min", "mean", "median", "los", "random"])
    p.add_argument("--n", type=int, default=5)
    p.add_argument("--weights", type=_floats, help="order-statistic weights for --kind los")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--data-out", help="also write a dataset labelled by the measure")
    p.add_argument("--coverage", choices=["uniform", "quota", "subset"], default="quota")
    p.add_argument("--rows", type=int, default=0)
    p.add_argument("--quota", type=int, default=1)
    p.add_argument("--walks", type=_ints, help="walk ranks for --coverage subset")
    p.add_argument("--sigma", type=float, default=0.0)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("validate", help="check the measure axioms")
    p.add_argument("measure")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("eval", help="Choquet integral of one input")
    p.add_argument("measure", nargs="?")
    p.add_argument("--input", type=_floats, required=True)
    p.add_argument("--operators", help="evaluate with a saved operator set instead")
    p.add_argument("--policy", choices=["suppress", "nearest"], default="suppress")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("decompose", help="discover the underlying order statistics")
    p.add_argument("measure")
    _decomp_flags(p)
    p.add_argument("--out", help="operator set output (JSON)")
    p.add_argument("--summary", help="also write the summary text here")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("ivat", help="render the iVAT image of the walk weights")
    p.add_argument("measure", nargs="?")
    p.add_argument("--data", help="fit a measure from this CSV first")
    _fit_flags(p)
    _decomp_flags(p)
    p.add_argument("--image", required=True)
    p.add_argument("--csv")
    p.add_argument("--observed-only", action="store_true")
    p.add_argument("--unique", action="store_true", help="one row per distinct weight vector")
    p.add_argument("--dark-similar", action="store_true", help="render similar pairs dark")
    p.set_defaults(func=cmd_ivat)

    p = sub.add_parser("learn", help="fit a measure to a CSV dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    _fit_flags(p)
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("experiment", help="run a noise or sampling sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "eval" and not (args.measure or args.operators):
        parser.error("eval needs a measure file or --operators")
    try:
        return args.func(args)
    except InvalidMeasureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except EmptyResultError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    except NormalizationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NORMALIZATION
    except (UsageError, MeasureError, experiments.ConfigError, ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
