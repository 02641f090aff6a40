"""Command-line entry point: ``multisaddle <subcommand> [flags]``.

Every experiment writes one CSV (header row, floats with 17 significant
digits) to ``--out`` or standard output; a short summary goes to standard
error. Exit codes: 0 success, 1 a check failed, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager, nullcontext

import numpy as np

from . import pde
from .random_experiments import (
    PD_BOUNDS,
    eig_experiment,
    in_pd_bounds,
    iteration_experiment,
)
from .verify import run_all

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2

DEFAULT_K_EIG = [1, 2, 3]
DEFAULT_K_PERTURBED = [1, 2, 3, 5, 10]
DEFAULT_K_ITERS = [1, 2, 3, 4, 5, 10, 15, 20]
DEFAULT_H_DOUBLE = [2.0**-4, 2.0**-5, 2.0**-6]
DEFAULT_ALPHA_DOUBLE = [1.0, 1e-1, 1e-2, 1e-3, 1e-4]
DEFAULT_H_QUAD = [2.0**-3, 2.0**-4, 2.0**-5]
DEFAULT_ALPHA_QUAD = [1e-6, 1e-8, 1e-10]
DEFAULT_LAMBDA_QUAD = [1e-8, 1e-10]
DEFAULT_CHEB_M = [1, 2, 3, 4, 5, 7, 10, 20]


class UsageError(Exception):
    pass


def mesh_width(text):
    """Parse ``0.0625``, ``1/16`` or ``2^-4``; must be ``2^-n`` with n >= 1."""
    s = text.strip()
    try:
        if s.startswith("2^"):
            h = 2.0 ** int(s[2:])
        elif "/" in s:
            num, den = s.split("/")
            h = float(num) / float(den)
        else:
            h = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid mesh width {text!r}") from None
    n = -math.log2(h) if h > 0 else math.nan
    if not (n >= 1 and n == round(n)):
        raise argparse.ArgumentTypeError(f"mesh width must be 2^-n with n >= 1, got {text!r}")
    return h


def positive_float(text):
    try:
        x = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not x > 0 or not math.isfinite(x):
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return x


def positive_int(text):
    try:
        x = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if x < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1: {text!r}")
    return x


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % x
    return str(x)


@contextmanager
def _output(path):
    if path is None or path == "-":
        yield sys.stdout
        return
    try:
        fh = open(path, "w", newline="")
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc}") from None
    with fh:
        yield fh


def write_csv(path, header, rows):
    with _output(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(x) for x in r])


def _workers():
    raw = os.environ.get("MSP_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise UsageError(f"MSP_THREADS must be an integer, got {raw!r}") from None


def _pool():
    n = _workers()
    return ProcessPoolExecutor(max_workers=n) if n > 1 else nullcontext(None)


def _say(msg):
    print(msg, file=sys.stderr)


# ---------------------------------------------------------------------------
# Subcommands


def cmd_eig_bounds(args):
    rows = []
    failed = False
    for k in args.k or DEFAULT_K_EIG:
        krows = eig_experiment(k, args.trials, perturbed=False, seed=args.seed)
        rows.extend(krows)
        mu = np.array([r[3] for r in krows])
        if k in PD_BOUNDS:
            outside = int(np.count_nonzero(~in_pd_bounds(mu, k, 1e-8)))
            failed |= outside > 0
            a, b, c, d = PD_BOUNDS[k]
            _say(f"k={k}: {mu.size} eigenvalues, {outside} outside "
                 f"[{a:.3f},{b:.3f}] U [{c:.3f},{d:.3f}]")
        else:
            _say(f"k={k}: {mu.size} eigenvalues in [{mu.min():.4f}, {mu.max():.4f}] (no bound tabulated)")
    write_csv(args.out, ["k", "trial", "preconditioner", "eigenvalue"], rows)
    return EXIT_FAILED if failed else EXIT_OK


def cmd_eig_perturbed(args):
    rows = []
    for k in args.k or DEFAULT_K_PERTURBED:
        krows = eig_experiment(k, args.trials, perturbed=True, seed=args.seed)
        rows.extend(krows)
        closer = 0
        for t in range(args.trials):
            small = {name: min(abs(r[3]) for r in krows if r[1] == t and r[2] == name)
                     for name in ("PDhat", "Pkhat")}
            closer += small["Pkhat"] >= small["PDhat"]
        _say(f"k={k}: smallest |eigenvalue| larger with Pkhat in {closer}/{args.trials} trials")
    write_csv(args.out, ["k", "trial", "preconditioner", "eigenvalue"], rows)
    return EXIT_OK


def cmd_iters_random(args):
    ks = args.k or DEFAULT_K_ITERS
    with _pool() as pool:
        rows, means = iteration_experiment(ks, args.trials, seed=args.seed, tol=args.tol,
                                           maxit=args.maxit, stopping=args.stopping, pool=pool)
    for k in ks:
        pd, pk, dof = means[k]
        _say(f"k={k}: mean iterations PDhat {pd:.2f}, Pkhat {pk:.2f}, mean DoF {dof:.1f}")
    write_csv(args.out, ["k", "preconditioner", "trial", "iterations", "dof"], rows)
    return EXIT_OK


def _pde_status(rows, conv_col):
    bad = [r for r in rows if not r[conv_col]]
    for r in rows:
        _say("  ".join(_fmt(x) if not isinstance(x, float) else f"{x:.3g}" for x in r))
    if bad:
        _say(f"{len(bad)} solves did not converge")
    return EXIT_FAILED if bad else EXIT_OK


def cmd_pde_double(args):
    rows = pde.run_double(args.h or DEFAULT_H_DOUBLE, args.alpha or DEFAULT_ALPHA_DOUBLE,
                          cheb_m=_single_m(args), tol=args.tol, maxit=args.maxit,
                          stopping=args.stopping)
    code = _pde_status(rows, 5)
    write_csv(args.out, ["h", "alpha", "dof", "preconditioner", "iterations", "converged", "seconds"], rows)
    return code


def cmd_pde_quadruple(args):
    rows = pde.run_quadruple(args.h or DEFAULT_H_QUAD, args.alpha or DEFAULT_ALPHA_QUAD,
                             args.lam or DEFAULT_LAMBDA_QUAD, rho=args.rho, cheb_m=_single_m(args),
                             tol=args.tol, maxit=args.maxit, stopping=args.stopping)
    code = _pde_status(rows, 6)
    write_csv(args.out, ["h", "lambda", "alpha", "dof", "preconditioner", "iterations", "converged",
                         "seconds"], rows)
    return code


def cmd_cheb_sweep(args):
    alpha = args.alpha[0] if args.alpha else 1e-2
    if args.alpha and len(args.alpha) > 1:
        raise UsageError("cheb-sweep takes a single --alpha")
    rows = pde.run_cheb_sweep(args.h or DEFAULT_H_DOUBLE, args.cheb_m or DEFAULT_CHEB_M, alpha=alpha,
                              tol=args.tol, maxit=args.maxit,
                              stopping=args.stopping)
    code = _pde_status(rows, 4)
    write_csv(args.out, ["h", "m", "preconditioner", "iterations", "converged"], rows)
    return code


def cmd_verify(args):
    results = run_all()
    for name, passed, detail in results:
        print(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
    return EXIT_OK if all(p for _, p, _ in results) else EXIT_FAILED


def _single_m(args):
    if not args.cheb_m:
        return 5
    if len(args.cheb_m) > 1:
        raise UsageError("this subcommand takes a single --cheb-m")
    return args.cheb_m[0]


# ---------------------------------------------------------------------------
# Parser


def build_parser():
    parser = argparse.ArgumentParser(prog="multisaddle", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="subcommand")

    def add(name, func, help_, flags, stopping="relative"):
        p = sub.add_parser(name, help=help_, description=help_)
        p.set_defaults(func=func)
        if "k" in flags:
            p.add_argument("--k", type=positive_int, nargs="+", help="number(s) of saddle blocks k")
        if "h" in flags:
            p.add_argument("--h", type=mesh_width, nargs="+", help="mesh width(s), e.g. 2^-4 or 0.0625")
        if "alpha" in flags:
            p.add_argument("--alpha", type=positive_float, nargs="+", help="regularization parameter(s)")
        if "lambda" in flags:
            p.add_argument("--lambda", dest="lam", type=positive_float, nargs="+",
                           help="penalty parameter(s)")
            p.add_argument("--rho", type=positive_float, default=pde.RHO_DEFAULT, help="lifting parameter")
        if "trials" in flags:
            p.add_argument("--trials", type=positive_int, default=100, help="random trials per k")
            p.add_argument("--seed", type=int, default=0, help="base seed")
        if "cheb" in flags:
            p.add_argument("--cheb-m", type=positive_int, nargs="+",
                           help="Chebyshev semi-iteration steps for mass solves")
        if "solve" in flags:
            p.add_argument("--tol", type=positive_float, default=1e-10, help="MINRES tolerance")
            p.add_argument("--maxit", type=positive_int, default=None, help="MINRES iteration cap")
            p.add_argument("--stopping", choices=("relative", "backward"), default=stopping,
                           help=f"MINRES stopping rule (default {stopping})")
        if name != "verify":
            p.add_argument("--out", default=None, help="CSV output path (default: standard output)")
        return p

    add("eig-bounds", cmd_eig_bounds, "spectra with the exact block diagonal preconditioner, bound check",
        {"k", "trials"})
    add("eig-perturbed", cmd_eig_perturbed, "spectra with perturbed block diagonal and factorized preconditioners",
        {"k", "trials"})
    add("iters-random", cmd_iters_random, "average MINRES iterations on random systems",
        {"k", "trials", "solve"})
    add("pde-double", cmd_pde_double, "double saddle-point control problem over an h x alpha grid",
        {"h", "alpha", "cheb", "solve"}, stopping=pde.DOUBLE_STOPPING)
    add("pde-quadruple", cmd_pde_quadruple,
        "quadruple saddle-point state-constrained problem over an h x lambda x alpha grid",
        {"h", "alpha", "lambda", "cheb", "solve"})
    add("cheb-sweep", cmd_cheb_sweep, "double problem with varying Chebyshev steps at fixed alpha",
        {"h", "alpha", "cheb", "solve"}, stopping=pde.DOUBLE_STOPPING)
    add("verify", cmd_verify, "run the quick invariant suite", set())
    return parser


def run(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"multisaddle: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
