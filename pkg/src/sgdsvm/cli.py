"""Command line interface: ``sgdsvm train|predict|bench|synth``.

Exit codes: 0 on success (for SGD-s/SGD-m: the relative-accuracy criterion
was met), 2 when the epoch budget ran out first, 1 on any error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import sys
import time

import numpy as np

from . import bench
from .data import augment_reflect, load_libsvm, make_synthetic, scale_features, serialize_libsvm
from .engine import Hyperparams, InvariantError, train
from .modelfile import Model
from .objective import ContractError, ConvergenceError


EXIT_OK, EXIT_ERROR, EXIT_BUDGET = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors, which is our budget-exhausted code
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _load(path, scale):
    examples = load_libsvm(path)
    if scale is not None:
        examples = scale_features(examples, scale)
    return examples


def cmd_train(args) -> int:
    if args.variant == "r" and args.tmax is None:
        raise SystemExit(_usage_error(args, "--variant r requires --tmax"))
    examples = _load(args.data, args.scale)
    dataset = augment_reflect(examples, args.rho)
    common = dict(
        m=dataset.m, rho=args.rho, epsilon=args.epsilon, f=args.f, ell=args.ell, t_max=args.tmax,
        T_max=args.Tmax, variant=args.variant, seed=args.seed, permute_each_epoch=args.permute_each_epoch,
        exact_every=args.exact_every,
    )
    if args.lam is not None:
        params = Hyperparams.from_lambda(args.lam, **common)
    else:
        params = Hyperparams(C=args.C, **common)

    tick = time.perf_counter()
    state, report = train(dataset, params)
    wall = time.perf_counter() - tick

    if args.model:
        Model.from_training(state, params, dataset.n_features).save(args.model)
    if args.report:
        with open(args.report, "w", newline="") as fh:
            report.write_csv(fh)
    if args.summary:
        with open(args.summary, "w") as fh:
            report.write_json(fh)

    s = report.summary()
    fmt = lambda x: "n/a" if x is None else f"{x:.10g}"  # noqa: E731
    print(f"variant   SGD-{params.variant}")
    print(f"status    {report.status}")
    print(f"J         {fmt(s['J'])}")
    print(f"L_T       {fmt(s['L_T'])}")
    print(f"gap       {fmt(s['gap'])}")
    print(f"epochs    {s['epochs']} (T_eff={s['T_eff']}, t={s['t']}, M={s['M']})")
    print(f"seconds   {wall:.4f}")
    return EXIT_BUDGET if report.status == "budget" else EXIT_OK


def cmd_predict(args) -> int:
    model = Model.load(args.model)
    examples = _load(args.data, args.scale)
    pred = model.predict(examples)
    truth = np.array([ex.label for ex in examples])
    acc = float(np.mean(pred == truth)) if len(examples) else float("nan")
    text = "".join(f"{int(p):+d}\n" for p in pred)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    print(f"accuracy {acc:.6f} ({int(np.sum(pred == truth))}/{len(examples)})", file=sys.stderr if not args.out else sys.stdout)
    return EXIT_OK


def cmd_bench(args) -> int:
    examples = _load(args.data, args.scale)
    dataset = augment_reflect(examples, args.rho)
    Cs = _floats(args.C)
    variants = [v.strip() for v in args.variants.split(",") if v.strip()]
    bad = [v for v in variants if v not in ("r", "s", "m")]
    if bad:
        raise SystemExit(_usage_error(args, f"unknown variants {bad}"))
    jopts = _floats(args.jopt) if args.jopt else None
    cells = bench.run_bench(dataset, Cs, variants, target=args.target, seeds=args.seeds, jopts=jopts,
                            tune=args.tune_epsilon, T_max=args.Tmax, f=args.f, ell=args.ell, rho=args.rho)
    print(bench.format_table(cells))
    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=[f.name for f in dataclasses.fields(bench.BenchCell)],
                                    lineterminator="\n")
            writer.writeheader()
            for c in cells:
                writer.writerow(dataclasses.asdict(c))
    return EXIT_OK


def cmd_synth(args) -> int:
    examples = make_synthetic(args.m, args.d, seed=args.seed, density=args.density, noise=args.noise,
                              separable=args.separable)
    text = serialize_libsvm(examples)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _usage_error(args, message) -> int:
    args._parser.print_usage(sys.stderr)
    print(f"{args._parser.prog}: error: {message}", file=sys.stderr)
    return EXIT_ERROR


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sgdsvm", description="SGD with a duality-gap stopping rule for linear L1-SVMs")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--data", required=True)
    p.add_argument("--variant", choices=("r", "s", "m"), default="s")
    reg = p.add_mutually_exclusive_group()
    reg.add_argument("--C", type=float, default=1.0)
    reg.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--f", type=float, default=1.2)
    p.add_argument("--ell", type=int, default=5)
    p.add_argument("--tmax", type=int)
    p.add_argument("--Tmax", type=int, default=10_000)
    p.add_argument("--rho", type=float, default=0.0)
    p.add_argument("--scale", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--permute-each-epoch", action="store_true")
    p.add_argument("--exact-every", type=int, default=50)
    p.add_argument("--model")
    p.add_argument("--report", help="per-epoch CSV")
    p.add_argument("--summary", help="JSON summary")
    p.set_defaults(func=cmd_train, _parser=p)

    p = sub.add_parser("predict", help="predict with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--scale", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_predict, _parser=p)

    p = sub.add_parser("bench", help="time each variant to a relative accuracy against J_opt")
    p.add_argument("--data", required=True)
    p.add_argument("--C", default="1", help="comma-separated list")
    p.add_argument("--variants", default="r,s,m")
    p.add_argument("--target", type=float, default=0.01)
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--jopt", help="comma-separated J_opt per C; skips the reference solver")
    p.add_argument("--tune-epsilon", action="store_true",
                   help="per (variant, C), use the loosest epsilon that still meets --target on seed 0")
    p.add_argument("--Tmax", type=int, default=10_000)
    p.add_argument("--f", type=float, default=1.2)
    p.add_argument("--ell", type=int, default=5)
    p.add_argument("--rho", type=float, default=0.0)
    p.add_argument("--scale", type=float)
    p.add_argument("--out", help="per-run CSV")
    p.set_defaults(func=cmd_bench, _parser=p)

    p = sub.add_parser("synth", help="write a random sparse binary dataset")
    p.add_argument("--m", type=int, default=200)
    p.add_argument("--d", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--density", type=float, default=0.3)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--separable", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_synth, _parser=p)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (OSError, ValueError, ContractError, ConvergenceError, InvariantError) as exc:
        print(f"sgdsvm: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
