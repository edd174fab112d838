"""Command line surface.

Four subcommands: ``solve`` fits one problem from CSV inputs,
``lambdas`` writes a penalty sequence, ``simulate`` runs a scenario
file, and ``estimate-sigma`` is ``solve`` with the noise scale
estimated instead of given.  Results go to files; progress and
diagnostics go to standard error; nothing is written on a nonzero
exit.  File formats are documented in docs/formats.md.

Exit codes: 0 success, 1 unreadable or inconsistent input, 2 usage
errors and fits that hit the iteration cap, 3 degrees of freedom
exhausted during scale estimation.
"""

import argparse
import csv
import json
import os
import sys
from dataclasses import replace

import numpy as np

from .groups import build_partition, standardize
from .lambdas import (GroupSpec, lambda_corrected_equal,
                      lambda_corrected_general, lambda_max, lambda_mean)
from .sigma import SupportTooLargeError
from .simulate import load_scenario, run_scenario
from .solver import GSlopeProblem, SolverConfig, solve
from .sorted_l1 import validate_lambda_seq

_LAMBDA_DISPATCH = {"max": lambda_max, "mean": lambda_mean,
                    "corrected-equal": lambda_corrected_equal,
                    "corrected-general": lambda_corrected_general}


class CommandError(Exception):
    """Failure carrying a process exit code."""

    def __init__(self, message, code=1):
        super().__init__(message)
        self.code = code


def _note(text):
    print(text, file=sys.stderr, flush=True)


# ---------------------------------------------------------------------
# input parsing


def _data_rows(path):
    # yields (line number, stripped fields); blank and '#' lines skipped
    try:
        fh = open(path, newline="")
    except OSError as err:
        raise CommandError("cannot read %s: %s" % (path, err.strerror))
    with fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            fields = [f.strip() for f in row]
            if not fields or not any(fields):
                continue
            if fields[0].startswith("#"):
                continue
            yield lineno, fields


def _read_matrix(path):
    rows = []
    width = None
    may_be_header = True
    for lineno, fields in _data_rows(path):
        try:
            values = [float(f) for f in fields]
        except ValueError:
            if may_be_header:
                may_be_header = False
                continue
            raise CommandError("%s line %d: could not parse %r as numbers"
                               % (path, lineno, ",".join(fields)))
        may_be_header = False
        if width is None:
            width = len(values)
        elif len(values) != width:
            raise CommandError("%s line %d: expected %d fields, got %d"
                               % (path, lineno, width, len(values)))
        rows.append(values)
    if not rows:
        raise CommandError("%s: no data rows" % path)
    return np.asarray(rows, dtype=float)


def _read_vector(path):
    mat = _read_matrix(path)
    if mat.shape[1] != 1:
        raise CommandError("%s: expected a single column, found %d"
                           % (path, mat.shape[1]))
    return mat[:, 0]


def _read_groups(path, p):
    """Two columns (column_index, group_id); indices are 1-based and must
    cover 1..p exactly once.  Returns labels in column order."""
    assigned = {}
    may_be_header = True
    for lineno, fields in _data_rows(path):
        if len(fields) != 2:
            raise CommandError("%s line %d: expected two fields "
                               "(column_index, group_id)" % (path, lineno))
        try:
            col = int(fields[0])
        except ValueError:
            if may_be_header:
                may_be_header = False
                continue
            raise CommandError("%s line %d: column index %r is not an "
                               "integer" % (path, lineno, fields[0]))
        may_be_header = False
        if not 1 <= col <= p:
            raise CommandError("%s line %d: column index %d outside 1..%d"
                               % (path, lineno, col, p))
        if col in assigned:
            raise CommandError("%s line %d: column %d assigned twice"
                               % (path, lineno, col))
        label = fields[1]
        try:
            label = int(label)
        except ValueError:
            pass
        assigned[col] = label
    missing = [str(c) for c in range(1, p + 1) if c not in assigned]
    if missing:
        shown = ", ".join(missing[:5]) + ("..." if len(missing) > 5 else "")
        raise CommandError("%s: no group for column(s) %s" % (path, shown))
    return [assigned[c] for c in range(1, p + 1)]


def _write_text(directory, name, text):
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, name)
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return path


# ---------------------------------------------------------------------
# solve


def cmd_solve(args):
    X = _read_matrix(args.design)
    y = _read_vector(args.response)
    n, p = X.shape
    if y.shape[0] != n:
        raise CommandError("dimension mismatch: %s has %d rows, %s has %d"
                           % (args.design, n, args.response, y.shape[0]))
    labels = _read_groups(args.groups, p)
    partition = build_partition(labels)
    if args.weights:
        w = _read_vector(args.weights)
        if w.shape[0] != partition.m:
            raise CommandError("%s: expected %d weights, found %d"
                               % (args.weights, partition.m, w.shape[0]))
        partition = partition.with_weights(w)
    design = standardize(X, partition)

    if args.lambda_file:
        lam = _read_vector(args.lambda_file)
        if lam.shape[0] != partition.m:
            raise CommandError("%s: expected %d penalty values, found %d"
                               % (args.lambda_file, partition.m,
                                  lam.shape[0]))
        validate_lambda_seq(lam)
    else:
        if args.q is None:
            raise CommandError("--q is required with --lambda-method")
        spec = GroupSpec(q=args.q, ranks=design.ranks,
                         weights=design.weights, n=n)
        lam = _LAMBDA_DISPATCH[args.lambda_method](spec)

    config = SolverConfig(gap_tol=args.gap_tol, infeas_tol=args.infeas_tol,
                          max_iter=args.max_iter)
    sigma = "estimate" if args.estimate_sigma else args.sigma
    fit = solve(GSlopeProblem(y=y, design=design, lam=lam, sigma=sigma),
                config)
    if not fit.converged:
        raise CommandError("no convergence within %d iterations "
                           "(gap %.3e, infeasibility %.3e); nothing written"
                           % (config.max_iter, fit.duality_gap,
                              fit.infeasibility), code=2)

    doc = {"beta": [float(b) for b in fit.beta],
           "effects": [float(e) for e in fit.effects],
           "selected": [partition.labels[i] for i in fit.selected],
           "diagnostics": {"duality_gap": float(fit.duality_gap),
                           "infeasibility": float(fit.infeasibility),
                           "iterations": int(fit.iterations),
                           "objective": float(fit.objective),
                           "sigma_used": float(fit.sigma_used)}}
    effects_lines = ["group,effect"]
    effects_lines += ["%s,%r" % (label, float(e))
                     for label, e in zip(partition.labels, fit.effects)]
    _write_text(args.out, "fit.json",
                json.dumps(doc, indent=2, sort_keys=True) + "\n")
    path = _write_text(args.out, "effects.csv",
                       "\n".join(effects_lines) + "\n")
    _note("converged in %d iterations; wrote fit.json and effects.csv "
          "to %s" % (fit.iterations, os.path.dirname(path) or "."))
    return 0


# ---------------------------------------------------------------------
# lambdas


def cmd_lambdas(args):
    if args.method.startswith("corrected") and args.n is None:
        args.parser.error("--n is required for method %r" % args.method)
    try:
        uniform = int(args.ranks)
        ranks = np.full(args.m, uniform, dtype=int)
        ranks_note = "uniform:%d" % uniform
    except ValueError:
        ranks = _read_vector(args.ranks).astype(int)
        if ranks.shape[0] != args.m:
            raise CommandError("%s: expected %d ranks, found %d"
                               % (args.ranks, args.m, ranks.shape[0]))
        ranks_note = "file:%s" % args.ranks
    if args.weights == "sqrt-rank":
        weights = None
    elif args.weights == "unit":
        weights = np.ones(args.m)
    else:
        weights = ranks.astype(float)
    spec = GroupSpec(q=args.q, ranks=ranks, weights=weights, n=args.n)
    lam = _LAMBDA_DISPATCH[args.method](spec)

    lines = ["# sorted-l1 penalty sequence",
             "# method=%s q=%r m=%d n=%s weights=%s ranks=%s"
             % (args.method, args.q, args.m,
                args.n if args.n is not None else "-", args.weights,
                ranks_note)]
    lines += [repr(float(v)) for v in lam]
    directory = os.path.dirname(args.out) or "."
    _write_text(directory, os.path.basename(args.out),
                "\n".join(lines) + "\n")
    _note("wrote %d penalty values to %s" % (lam.shape[0], args.out))
    return 0


# ---------------------------------------------------------------------
# simulate


def cmd_simulate(args):
    try:
        scenario = load_scenario(args.scenario, full_size=args.full_size)
    except ValueError as err:
        raise CommandError(str(err))
    if args.seed is not None:
        scenario = replace(scenario, seed=args.seed)
    report = run_scenario(scenario, workers=args.workers, progress=_note)
    for line in report.warnings:
        _note("warning: " + line)
    paths = [_write_text(args.out, "report.csv", report.to_csv())]
    if report.strg:
        paths.append(_write_text(args.out, "strg.csv",
                                 report.strg_to_csv()))
    _note("wrote " + ", ".join(paths))
    return 0


# ---------------------------------------------------------------------
# parser


def _add_solve_options(sub, name, help_text, with_sigma_flags):
    cmd = sub.add_parser(name, help=help_text)
    cmd.add_argument("design", help="CSV matrix of predictors")
    cmd.add_argument("response", help="CSV column of responses")
    cmd.add_argument("groups",
                     help="CSV mapping (column_index, group_id), 1-based")
    cmd.add_argument("--weights", metavar="FILE",
                     help="CSV column of per-group weights")
    source = cmd.add_mutually_exclusive_group(required=True)
    source.add_argument("--lambda-file", metavar="FILE",
                        help="CSV column holding the penalty sequence")
    source.add_argument("--lambda-method",
                        choices=sorted(_LAMBDA_DISPATCH),
                        help="generate the penalty sequence instead")
    cmd.add_argument("--q", type=float,
                     help="target level for --lambda-method")
    if with_sigma_flags:
        noise = cmd.add_mutually_exclusive_group()
        noise.add_argument("--sigma", type=float, default=1.0,
                           help="noise scale (default 1)")
        noise.add_argument("--estimate-sigma", action="store_true",
                           help="estimate the noise scale iteratively")
    cmd.add_argument("--gap-tol", type=float, default=1e-6)
    cmd.add_argument("--infeas-tol", type=float, default=1e-6)
    cmd.add_argument("--max-iter", type=int, default=20000)
    cmd.add_argument("--out", default=".", metavar="DIR",
                     help="directory for fit.json and effects.csv")
    cmd.set_defaults(func=cmd_solve, parser=cmd)
    return cmd


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="gslope",
        description="Adaptive group selection with a sorted-l1 penalty "
                    "on group effects.")
    sub = parser.add_subparsers(dest="command", required=True)

    _add_solve_options(sub, "solve", "fit one problem from CSV files",
                       with_sigma_flags=True)
    est = _add_solve_options(sub, "estimate-sigma",
                             "solve with the noise scale estimated",
                             with_sigma_flags=False)
    est.set_defaults(estimate_sigma=True, sigma=1.0)

    lam = sub.add_parser("lambdas", help="write a penalty sequence")
    lam.add_argument("--method", required=True,
                     choices=sorted(_LAMBDA_DISPATCH))
    lam.add_argument("--q", type=float, required=True)
    lam.add_argument("--m", type=int, required=True,
                     help="number of groups")
    lam.add_argument("--n", type=int,
                     help="observations; required for corrected methods")
    lam.add_argument("--ranks", default="1", metavar="FILE_OR_INT",
                     help="per-group ranks: a CSV column or one integer "
                          "for all groups (default 1)")
    lam.add_argument("--weights", default="sqrt-rank",
                     choices=("sqrt-rank", "unit", "rank"))
    lam.add_argument("--out", default="lambda.csv", metavar="FILE")
    lam.set_defaults(func=cmd_lambdas, parser=lam)

    sim = sub.add_parser("simulate", help="run a scenario file")
    sim.add_argument("scenario",
                     help="scenario JSON path or bundled scenario name")
    sim.add_argument("--out", default=".", metavar="DIR")
    sim.add_argument("--seed", type=int,
                     help="override the scenario's master seed")
    sim.add_argument("--full-size", action="store_true",
                     help="apply the scenario's full_size overrides")
    sim.add_argument("--workers", type=int,
                     help="process count (default: GSLOPE_THREADS or "
                          "CPU count)")
    sim.set_defaults(func=cmd_simulate, parser=sim)
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SupportTooLargeError as err:
        _note("gslope: %s" % err)
        return 3
    except CommandError as err:
        _note("gslope: %s" % err)
        return err.code
    except (ValueError, OSError) as err:
        _note("gslope: %s" % err)
        return 1


if __name__ == "__main__":
    sys.exit(main())
