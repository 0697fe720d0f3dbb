"""Command-line interface: ``catmml <subcommand> ...``.

Failures exit non-zero after writing one JSON error record to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .criteria import Criterion, fit_candidates, score, select_from_fits
from .evaluation import (
    METHODS, association_profile, hard_assign, paired_timing, segment_profile,
    selection_rate_experiment, selection_rates,
)
from .exceptions import CatmmlError
from .io import load_dataset, load_model, save_dataset, save_model, write_csv
from .model import e_step
from .mml import MmlConfig, fit_em_mml
from .synth import GenSpec, generate

logger = logging.getLogger("catmml")

EXIT_ERROR = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_data_args(p):
    p.add_argument("data", help="dataset CSV")
    p.add_argument("--dictionary", help="JSON file fixing category dictionaries")
    p.add_argument("--weights-mode", choices=("fractional", "replicate"),
                   default="fractional")
    p.add_argument("--label-column", default="label")
    p.add_argument("--weight-column", default="weight")


def _add_gen_args(p, default_trials=1):
    p.add_argument("--k-true", type=int, default=2)
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--n-vars", type=int, default=7)
    p.add_argument("--categories", type=int, default=2)
    p.add_argument("--trials", type=int, default=default_trials)
    p.add_argument("--alpha", type=float, nargs="+")
    p.add_argument("--pair-balance", type=float, default=0.5)


def build_parser():
    parser = _Parser(prog="catmml", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit-mml", help="fit EM-MML and select the number of segments")
    _add_data_args(p)
    p.add_argument("--k-min", type=int, default=1)
    p.add_argument("--k-max", type=int, default=25)
    p.add_argument("--delta", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--smoothing", type=float, default=0.0)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("fit-criterion", help="sequential EM with an information criterion")
    _add_data_args(p)
    p.add_argument("--criterion", default="BIC", type=str.upper,
                   choices=[c.value for c in Criterion])
    p.add_argument("--k-min", type=int, default=1)
    p.add_argument("--k-max", type=int, default=10)
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--delta", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--smoothing", type=float, default=0.0)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("generate", help="sample a dataset from a planted mixture")
    _add_gen_args(p)
    p.add_argument("--separation", type=float, nargs=2, metavar=("LO", "HI"),
                   default=(0.04, 0.06))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True, help="dataset CSV to write")
    p.add_argument("--model-out", help="also write the planted model as JSON")

    p = sub.add_parser("bench-select", help="selection-rate experiment across separations")
    _add_gen_args(p)
    p.add_argument("--sep-range", action="append", metavar="LO:HI",
                   help="separation interval of one scenario (repeatable); default sweeps "
                        "0.01..0.17 in steps of 0.02")
    p.add_argument("--runs", type=int, default=30)
    p.add_argument("--methods", default=",".join(METHODS))
    p.add_argument("--k-min", type=int, default=1)
    p.add_argument("--k-max", type=int, default=10)
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--delta", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("bench-time", help="paired EM-MML vs sequential BIC timing")
    _add_gen_args(p)
    p.add_argument("--separation", type=float, nargs=2, metavar=("LO", "HI"),
                   default=(0.05, 0.17))
    p.add_argument("--runs", type=int, default=30)
    p.add_argument("--k-min", type=int, default=1)
    p.add_argument("--k-max", type=int, default=10)
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--delta", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("profile", help="Cramér's V of each variable against a model's segments")
    _add_data_args(p)
    p.add_argument("--model", required=True, help="model JSON written by fit-mml/fit-criterion")
    p.add_argument("--output", help="CSV to write (default: stdout)")
    return parser


def _check_range(args):
    if args.k_min < 1:
        raise UsageError("--k-min must be >= 1")
    if args.k_min > args.k_max:
        raise UsageError(f"--k-min ({args.k_min}) must not exceed --k-max ({args.k_max})")
    if getattr(args, "delta", 1.0) <= 0:
        raise UsageError("--delta must be > 0")


def _load(args, dictionary=None):
    if not Path(args.data).is_file():
        raise FileNotFoundError(f"dataset not found: {args.data}")
    if dictionary is None and args.dictionary:
        from .io import load_dictionary
        dictionary = load_dictionary(args.dictionary)
    return load_dataset(args.data, dictionary=dictionary, label_column=args.label_column,
                        weight_column=args.weight_column, weights_mode=args.weights_mode)


def _out_dir(path):
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_fit_outputs(out, data, model, resp, metadata):
    save_model(out / "model.json", model, data.variables, data.categories, metadata)
    K = model.K
    rows = [("segment size", "", (100.0 * model.alpha).tolist())]
    rows += segment_profile(model, data.variables, data.categories)
    write_csv(out / "profile.csv",
              ["variable", "category"] + [f"segment_{k + 1}" for k in range(K)],
              [(v, c, *vals) for v, c, vals in rows])
    labels = hard_assign(resp)
    write_csv(out / "assignments.csv", ["observation", "segment", "posterior"],
              [(i + 1, int(k) + 1, float(resp[i, k])) for i, k in enumerate(labels)])
    with open(out / "dictionary.json", "w", encoding="utf-8") as fh:
        json.dump(dict(zip(data.variables, map(list, data.categories))), fh, indent=1)
        fh.write("\n")


def cmd_fit_mml(args):
    _check_range(args)
    data = _load(args)
    config = MmlConfig(k_min=args.k_min, k_max=args.k_max, delta=args.delta,
                       max_inner_iter=args.max_iter, seed=args.seed, smoothing=args.smoothing)
    res = fit_em_mml(data, config)
    out = _out_dir(args.out_dir)
    model = res.best_model
    resp = e_step(data, model)
    _write_fit_outputs(out, data, model, resp, {
        "algorithm": "EM-MML", "seed": args.seed, "k_min": args.k_min, "k_max": args.k_max,
        "delta": args.delta, "smoothing": args.smoothing, "weights_mode": args.weights_mode,
        "message_length": res.best_message_length,
        "iterations": sum(e.event == "inner-iteration" for e in res.trace)})
    write_csv(out / "trace.csv",
              ["step", "event", "sweep", "k_nz", "log_likelihood", "message_length",
               "candidate", "converged", "component"],
              [(i, e.event, e.sweep, e.k_nz, e.log_likelihood, e.message_length,
                int(e.candidate), int(e.converged),
                "" if e.component is None else e.component + 1)
               for i, e in enumerate(res.trace)])
    print(f"selected {model.K} segments; message length {res.best_message_length:.6g} nats")


def cmd_fit_criterion(args):
    _check_range(args)
    data = _load(args)
    fits = fit_candidates(data, range(args.k_min, args.k_max + 1), args.restarts,
                          args.delta, args.seed, args.max_iter, args.smoothing)
    sel = select_from_fits(args.criterion, data, fits, args.restarts)
    crits = list(Criterion)
    rows = []
    for K, fit in fits.items():
        vals = [score(c, data, fit.model, fit.responsibilities).value for c in crits]
        rows.append((K, fit.log_likelihood, fit.model.n_params, *vals,
                     int(K == sel.best_K)))
    out = _out_dir(args.out_dir)
    write_csv(out / "scores.csv",
              ["K", "log_likelihood", "n_params"] + [c.value for c in crits] + ["selected"],
              rows)
    best = fits[sel.best_K]
    _write_fit_outputs(out, data, best.model, best.responsibilities, {
        "algorithm": f"EM+{sel.criterion.value}", "seed": args.seed,
        "k_min": args.k_min, "k_max": args.k_max, "restarts": args.restarts,
        "delta": args.delta, "smoothing": args.smoothing,
        "weights_mode": args.weights_mode, "log_likelihood": best.log_likelihood,
        "iterations": best.iterations})
    print(f"{sel.criterion.value} selected K={sel.best_K}")


def _gen_spec(args, sep, seed=None):
    return GenSpec(k_true=args.k_true, n_vars=args.n_vars, n_categories=args.categories,
                   trials=args.trials, n=args.n, target_separation=tuple(sep),
                   alpha_true=tuple(args.alpha) if args.alpha else None, seed=seed,
                   pair_balance=args.pair_balance)


def cmd_generate(args):
    spec = _gen_spec(args, args.separation, args.seed)
    data, planted = generate(spec)
    save_dataset(data, args.output)
    if args.model_out:
        save_model(args.model_out, planted.model, data.variables, data.categories,
                   {"planted": True, "separation": planted.separation, "seed": args.seed})
    print(f"wrote {data.n} observations, separation {planted.separation:.6g}")


def _parse_range(text):
    try:
        lo, hi = (float(x) for x in text.split(":"))
    except ValueError:
        raise UsageError(f"bad --sep-range {text!r}; expected LO:HI") from None
    return lo, hi


def cmd_bench_select(args):
    _check_range(args)
    ranges = ([_parse_range(r) for r in args.sep_range] if args.sep_range else
              [(round(lo, 2), round(lo + 0.02, 2)) for lo in np.arange(0.01, 0.16, 0.02)])
    scenarios = [_gen_spec(args, r) for r in ranges]
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    results = selection_rate_experiment(
        scenarios, methods, args.runs, args.seed, args.k_min, args.k_max, args.restarts,
        args.delta, args.max_iter, args.jobs)
    out = _out_dir(args.out_dir)
    write_csv(out / "results.csv",
              ["scenario", "run", "seed", "method", "true_K", "selected_K", "separation",
               "correct", "error"],
              [(r.scenario, r.run, r.seed, r.method, r.true_K, r.selected_K, r.separation,
                int(r.correct), r.error) for r in results])
    rates = selection_rates(results, scenarios)
    write_csv(out / "rates.csv",
              ["scenario", "sep_lo", "sep_hi", "method", "true_K", "runs", "errors",
               "correct", "rate", "mean_separation"],
              [(r["scenario"], r["sep_lo"], r["sep_hi"], r["method"], r["true_K"],
                r["runs"], r["errors"], r["correct"], r["rate"], r["mean_separation"])
               for r in rates])
    write_csv(out / "timings.csv", ["scenario", "run", "method", "wall_time_ms"],
              [(r.scenario, r.run, r.method, r.wall_time_ms) for r in results])
    for r in rates:
        print(f"[{r['sep_lo']:.3g}, {r['sep_hi']:.3g}] {r['method']:>6}: "
              f"{r['correct']}/{r['runs']} correct")


def cmd_bench_time(args):
    _check_range(args)
    spec = _gen_spec(args, args.separation)
    summary = paired_timing(spec, args.runs, args.k_min, args.k_max, args.restarts,
                            args.seed, args.delta, args.max_iter)
    out = _out_dir(args.out_dir)
    write_csv(out / "timing_design.csv", ["run", "seed", "separation", "mml_K", "bic_K"],
              [(p.run, p.seed, p.separation, p.mml_K, p.bic_K) for p in summary.pairs])
    write_csv(out / "timing_pairs.csv",
              ["run", "seed", "mml_seconds", "bic_seconds", "ratio"],
              [(p.run, p.seed, p.mml_seconds, p.bic_seconds, p.ratio)
               for p in summary.pairs])
    with open(out / "timing_summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary.as_dict(), fh, indent=1)
        fh.write("\n")
    print(f"mean EM-MML {summary.mean_mml:.4g}s, mean BIC {summary.mean_bic:.4g}s, "
          f"mean ratio {summary.mean_ratio:.4g}")


def cmd_profile(args):
    mf = load_model(args.model)
    data = _load(args, dictionary=dict(zip(mf.variables, mf.categories)))
    if list(data.variables) != list(mf.variables):
        raise CatmmlError(
            f"dataset variables {list(data.variables)} do not match the model's "
            f"{list(mf.variables)}")
    labels = hard_assign(e_step(data, mf.model))
    prof = association_profile(data, labels)
    rows = [(v, x) for v, x in prof.rows()] + [("Sum", prof.sum_V)]
    header = ["variable", "cramers_v"]
    if args.output:
        write_csv(args.output, header, rows)
    else:
        import csv
        from .io import fmt
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(header)
        w.writerows([[fmt(c) for c in r] for r in rows])


COMMANDS = {
    "fit-mml": cmd_fit_mml,
    "fit-criterion": cmd_fit_criterion,
    "generate": cmd_generate,
    "bench-select": cmd_bench_select,
    "bench-time": cmd_bench_time,
    "profile": cmd_profile,
}


def _error(kind, exc, code):
    record = {"status": "error", "error": kind, "message": str(exc)}
    for attr in ("row", "variable", "index"):
        if getattr(exc, attr, None) is not None:
            record[attr] = getattr(exc, attr)
    print(json.dumps(record), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        return _error("UsageError", exc, EXIT_USAGE)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        return _error("UsageError", exc, EXIT_USAGE)
    except (CatmmlError, FileNotFoundError, ValueError, OSError) as exc:
        return _error(type(exc).__name__, exc, EXIT_ERROR)
    return 0


if __name__ == "__main__":
    sys.exit(main())
