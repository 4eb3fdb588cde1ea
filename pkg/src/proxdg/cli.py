"""Command-line interface.

Examples::

    proxdg solve --problem flat --n 8
    proxdg convergence --method hho --cell-degree 0 --facet-degree 1 --levels 8,16,32,64
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys

import numpy as np

from .convergence import run_convergence, run_level
from .forms import Method
from .problems import benchmark_problem, flat_problem, manufactured_problem, problem_from_json
from .solver import ProximalConfig

__all__ = ["main", "build_parser"]

EXIT_OK, EXIT_NOT_CONVERGED, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _levels(text):
    try:
        out = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"levels must be comma-separated integers, got {text!r}")
    if not out or min(out) < 1:
        raise argparse.ArgumentTypeError("levels must be positive integers")
    return out


def _problem(text):
    if text == "benchmark":
        return benchmark_problem()
    if text == "flat":
        return flat_problem()
    if text == "manufactured":
        return manufactured_problem()
    if text.startswith("file:"):
        try:
            return problem_from_json(text[5:])
        except (OSError, ValueError, KeyError) as exc:
            raise argparse.ArgumentTypeError(f"cannot read problem file: {exc}")
    raise argparse.ArgumentTypeError(f"unknown problem {text!r}; use benchmark, flat, manufactured or file:<json>")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--method", choices=("ipdg", "eg", "hip", "hho"), default="ipdg")
    common.add_argument("--cell-degree", type=int, default=None, help="HHO cell degree l (0 or 1)")
    common.add_argument("--facet-degree", type=int, default=None, help="HHO facet degree r (0 or 1)")
    common.add_argument("--sigma", type=float, default=None, help="penalty for ipdg/eg/hip (default 10)")
    common.add_argument("--entropy", choices=("shannon", "softplus"), default="shannon")
    common.add_argument("--alpha0", type=float, default=1.0)
    common.add_argument("--alpha-growth", type=float, default=2.0)
    common.add_argument("--alpha-cap", type=float, default=1e6)
    common.add_argument("--outer-tol", type=float, default=1e-8)
    common.add_argument("--newton-tol", type=float, default=1e-10)
    common.add_argument("--max-outer", type=int, default=100)
    common.add_argument("--problem", type=_problem, default="benchmark",
                        help="benchmark, flat, manufactured or file:<json>")
    common.add_argument("--out", default=None, help="output path (default stdout)")
    common.add_argument("--format", choices=("csv", "json"), default=None)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="proxdg", description="Proximal DG solvers for the obstacle problem")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    s = sub.add_parser("solve", parents=[common], help="solve on one mesh and dump fields and history")
    s.add_argument("--n", type=int, default=None, help="subdivisions per axis (default 16)")
    s.add_argument("--levels", type=_levels, default=None, help="single level, same as --n")
    c = sub.add_parser("convergence", parents=[common], help="multi-level error table")
    c.add_argument("--levels", type=_levels, default=[8, 16, 32])
    return parser


def _method(args, parser):
    if args.method == "hho":
        if args.sigma is not None:
            parser.error("--sigma does not apply to hho")
        l = 1 if args.cell_degree is None else args.cell_degree
        r = 1 if args.facet_degree is None else args.facet_degree
        if (l, r) not in ((0, 0), (0, 1), (1, 1)):
            parser.error(f"unsupported hho degrees (l, r) = ({l}, {r})")
        return Method("hho", None, l, r)
    for flag, val in (("--cell-degree", args.cell_degree), ("--facet-degree", args.facet_degree)):
        if val not in (None, 1):
            parser.error(f"{flag} must be 1 for {args.method}")
    if args.sigma is not None and not args.sigma > 0:
        parser.error("--sigma must be positive")
    return Method(args.method, args.sigma)


def _config(args, parser):
    try:
        return ProximalConfig(entropy=args.entropy, alpha0=args.alpha0, alpha_growth=args.alpha_growth,
                              alpha_cap=args.alpha_cap, outer_tol=args.outer_tol,
                              newton_tol=args.newton_tol, max_outer=args.max_outer)
    except ValueError as exc:
        parser.error(str(exc))


def _clean(obj):
    """JSON-safe copy: arrays to lists, NaN to None."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return None if math.isnan(v) else v
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _emit(text, path):
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _history_csv(history):
    lines = ["k,alpha,energy,lambda_norm,newton_iters"]
    for h in history:
        lines.append(f"{h['k']},{h['alpha']:.6e},{h['energy']:.12e},{h['lambda_norm']:.6e},{h['newton_iters']}")
    return "\n".join(lines) + "\n"


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    method = _method(args, parser)
    config = _config(args, parser)
    problem = args.problem
    config_record = {"command": args.command, "problem": problem.name, "method": method.to_dict(),
                     **config.to_dict()}

    if args.command == "solve":
        if args.n is not None and args.levels is not None:
            parser.error("give either --n or --levels, not both")
        if args.levels is not None and len(args.levels) != 1:
            parser.error("solve takes a single level")
        n = args.n if args.n is not None else (args.levels[0] if args.levels else 16)
        if n < 1:
            parser.error("--n must be positive")
        result, errors = run_level(problem, method, n, config)
        mesh = result.system.mesh
        lam_l2 = float(np.sqrt(np.sum(mesh.cell_areas * result.state.lam ** 2)))
        fmt = args.format or "json"
        if fmt == "csv":
            text = _history_csv(result.history_json())
        else:
            record = {
                "config": {**config_record, "n": n},
                "converged": result.converged, "message": result.message,
                "h": mesh.h, "n_dofs": result.system.n_dofs,
                "lambda_l2": lam_l2, "errors": errors,
                "history": result.history_json(),
                "fields": {"u": result.state.u, "fixed": result.system.fixed,
                           "lambda": result.state.lam, "psi": result.state.psi, "o": result.state.o},
            }
            text = json.dumps(_clean(record), indent=1) + "\n"
        _emit(text, args.out)
        print(f"{method.label} n={n}: {result.message}; lambda L2 norm {lam_l2:.3e}", file=sys.stderr)
        return EXIT_OK if result.converged else EXIT_NOT_CONVERGED

    if args.levels != sorted(set(args.levels)):
        parser.error("--levels must be strictly ascending")
    if not problem.has_exact or problem.exact_grad is None:
        parser.error("convergence needs a problem with an exact solution and gradient")
    report, records = run_convergence(problem, method, args.levels, config)
    fmt = args.format or "csv"
    if fmt == "csv":
        text = report.to_csv()
    else:
        text = json.dumps(_clean({"config": config_record, "per_level": records,
                                  "report": report.to_dict()}), indent=1) + "\n"
    _emit(text, args.out)
    return EXIT_NOT_CONVERGED if report.failed else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
