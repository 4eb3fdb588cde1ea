"""Obstacle problem definitions.

All callables take coordinate arrays ``(x, y)`` and return arrays of the
broadcast shape.
"""
from __future__ import annotations

import ast
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy import optimize

__all__ = ["ProblemSpec", "BenchmarkConstants", "benchmark_constants", "benchmark_problem",
           "flat_problem", "manufactured_problem", "problem_from_json", "check_benchmark",
           "PUBLISHED_CONTACT_RADIUS"]

PUBLISHED_CONTACT_RADIUS = 0.34898
FLAT_OBSTACLE = -1e6


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    obstacle: Callable
    rhs: Callable
    dirichlet: Callable
    exact_u: Optional[Callable] = None
    exact_grad: Optional[Callable] = None
    exact_lambda: Optional[Callable] = None
    bounds: tuple = (-1.0, 1.0, -1.0, 1.0)

    @property
    def has_exact(self):
        return self.exact_u is not None


@dataclass(frozen=True)
class BenchmarkConstants:
    a: float          # contact radius
    Q: float          # strength of the logarithmic part
    r0: float         # radius where the obstacle switches to its linear extension
    phi_r0: float
    slope: float

    @property
    def intercept(self):
        return self.phi_r0 - self.slope * self.r0


def benchmark_constants() -> BenchmarkConstants:
    """Compute the contact radius by bisection on ``a^2 (1 - ln a) = 1/4``.

    That equation follows from matching ``Q ln r`` to the spherical cap
    ``sqrt(1/4 - r^2)`` in value and slope at ``r = a``.
    """
    a = optimize.bisect(lambda s: s * s * (1.0 - np.log(s)) - 0.25, 0.2, 0.5, xtol=1e-16, rtol=1e-15,
                        maxiter=200)
    Q = np.sqrt(0.25 - a * a) / np.log(a)
    r0 = 9.0 / 20.0
    phi_r0 = np.sqrt(0.25 - r0 * r0)
    slope = -r0 / phi_r0
    return BenchmarkConstants(float(a), float(Q), r0, float(phi_r0), float(slope))


def benchmark_problem() -> ProblemSpec:
    """Radially symmetric obstacle on ``(-1, 1)^2`` with a known solution.

    The obstacle is a spherical cap of radius 1/2 continued linearly beyond
    ``r = 9/20``; the solution equals the cap inside the contact radius ``a``
    and ``Q ln r`` outside.  The Dirichlet data is the trace of that solution.
    """
    c = benchmark_constants()

    def obstacle(x, y):
        r = np.hypot(x, y)
        inner = np.sqrt(np.maximum(0.25 - np.minimum(r, c.r0) ** 2, 0.0))
        return np.where(r <= c.r0, inner, c.phi_r0 + c.slope * (r - c.r0))

    def exact_u(x, y):
        r = np.hypot(x, y)
        outer = c.Q * np.log(np.maximum(r, c.a))
        return np.where(r > c.a, outer, obstacle(x, y))

    def exact_grad(x, y):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        r2 = x * x + y * y
        outside = r2 > c.a * c.a
        s = np.where(outside, c.Q / np.where(outside, r2, 1.0),
                     -1.0 / np.sqrt(np.maximum(0.25 - r2, 1e-300)))
        return np.stack([s * x, s * y], axis=-1)

    def exact_lambda(x, y):
        r2 = np.asarray(x, dtype=float) ** 2 + np.asarray(y, dtype=float) ** 2
        inside = r2 < c.a * c.a
        s = np.where(inside, 0.25 - r2, 1.0)
        return np.where(inside, (0.5 - r2) / s ** 1.5, 0.0)

    def rhs(x, y):
        return np.zeros(np.broadcast(x, y).shape)

    return ProblemSpec("benchmark", obstacle, rhs, exact_u, exact_u, exact_grad, exact_lambda)


def _laplacian(f, x, y, step=1e-3):
    """Fourth-order central-difference Laplacian."""
    c = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / (12.0 * step * step)
    offs = np.arange(-2, 3) * step
    return sum(ci * (f(x + o, y) + f(x, y + o)) for ci, o in zip(c, offs))


def check_benchmark(problem=None, n_samples=400, seed=0):
    """Sanity checks of the benchmark data; raises ``RuntimeError`` on failure.

    Checks the contact radius against the published value, the root residual,
    C1 matching of the obstacle, harmonicity of the outer solution, the
    boundary trace and complementarity of the exact pair at random points.
    Returns a dict of the measured quantities.
    """
    problem = problem or benchmark_problem()
    c = benchmark_constants()
    rng = np.random.default_rng(seed)
    out = {
        "a_vs_published": abs(c.a - PUBLISHED_CONTACT_RADIUS),
        "root_residual": abs(c.a ** 2 * (1.0 - np.log(c.a)) - 0.25),
        "c1_value": abs(c.Q * np.log(c.a) - np.sqrt(0.25 - c.a ** 2)),
        "c1_slope": abs(c.Q / c.a + c.a / np.sqrt(0.25 - c.a ** 2)),
        "extension_slope": abs(c.slope + c.r0 / np.sqrt(0.25 - c.r0 ** 2)),
    }
    # harmonicity away from the contact disk
    r = rng.uniform(c.a + 0.05, 0.95, n_samples)
    t = rng.uniform(0.0, 2.0 * np.pi, n_samples)
    x, y = r * np.cos(t), r * np.sin(t)
    out["harmonic"] = float(np.max(np.abs(_laplacian(problem.exact_u, x, y))))
    s = rng.uniform(-1.0, 1.0, n_samples)
    bx = np.concatenate([s, s, -np.ones_like(s), np.ones_like(s)])
    by = np.concatenate([-np.ones_like(s), np.ones_like(s), s, s])
    out["trace"] = float(np.max(np.abs(problem.dirichlet(bx, by) - c.Q * np.log(np.hypot(bx, by)))))
    px, py = rng.uniform(-1.0, 1.0, (2, n_samples))
    lam = problem.exact_lambda(px, py)
    gap = problem.exact_u(px, py) - problem.obstacle(px, py)
    out["min_lambda"] = float(lam.min())
    out["min_gap"] = float(gap.min())
    out["complementarity"] = float(np.max(np.abs(lam * gap)))
    limits = {"a_vs_published": 5e-5, "root_residual": 1e-12, "c1_value": 1e-12, "c1_slope": 1e-12,
              "extension_slope": 1e-12, "harmonic": 1e-9, "trace": 1e-12, "complementarity": 1e-12}
    bad = [f"{k}={out[k]:.2e} > {v:.0e}" for k, v in limits.items() if not out[k] <= v]
    if out["min_lambda"] < 0 or out["min_gap"] < -1e-14:
        bad.append("exact pair violates the sign conditions")
    if bad:
        raise RuntimeError("benchmark self-check failed: " + "; ".join(bad))
    return {k: float(v) for k, v in out.items()}


def flat_problem() -> ProblemSpec:
    """Obstacle far below a zero solution: ``f = 0``, ``g = 0``, so ``u = 0`` and ``lambda = 0``."""
    def zero(x, y):
        return np.zeros(np.broadcast(x, y).shape)

    def obstacle(x, y):
        return np.full(np.broadcast(x, y).shape, FLAT_OBSTACLE)

    def zero_grad(x, y):
        return np.zeros(np.broadcast(x, y).shape + (2,))

    return ProblemSpec("flat", obstacle, zero, zero, zero, zero_grad, zero)


def manufactured_problem() -> ProblemSpec:
    """``u = sin(pi x) sin(pi y)`` with an inactive obstacle at ``-1e6``."""
    pi = np.pi

    def exact_u(x, y):
        return np.sin(pi * x) * np.sin(pi * y)

    def exact_grad(x, y):
        return np.stack([pi * np.cos(pi * x) * np.sin(pi * y),
                         pi * np.sin(pi * x) * np.cos(pi * y)], axis=-1)

    def rhs(x, y):
        return 2.0 * pi * pi * exact_u(x, y)

    def zero(x, y):
        return np.zeros(np.broadcast(x, y).shape)

    def obstacle(x, y):
        return np.full(np.broadcast(x, y).shape, FLAT_OBSTACLE)

    return ProblemSpec("manufactured", obstacle, rhs, zero, exact_u, exact_grad, zero)


# ----------------------------------------------------------------------
# problems from JSON expressions

_ALLOWED_FUNCS = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp, "log": np.log,
    "sqrt": np.sqrt, "abs": np.abs, "hypot": np.hypot, "minimum": np.minimum,
    "maximum": np.maximum, "where": np.where, "tanh": np.tanh, "arctan2": np.arctan2,
}
_ALLOWED_CONSTS = {"pi": np.pi, "e": np.e}
_ALLOWED_NODES = (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name, ast.Load,
                  ast.Constant, ast.Compare, ast.operator, ast.unaryop, ast.cmpop)


def _compile_expression(text):
    tree = ast.parse(str(text), mode="eval")
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED_NODES):
            raise ValueError(f"unsupported syntax {type(node).__name__} in {text!r}")
        if isinstance(node, ast.Name) and node.id not in ("x", "y", *_ALLOWED_FUNCS, *_ALLOWED_CONSTS):
            raise ValueError(f"unknown name {node.id!r} in {text!r}")
        if isinstance(node, ast.Call) and not isinstance(node.func, ast.Name):
            raise ValueError(f"only plain function calls are allowed in {text!r}")
    code = compile(tree, "<expression>", "eval")
    env = {"__builtins__": {}, **_ALLOWED_FUNCS, **_ALLOWED_CONSTS}

    def fn(x, y):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        return np.broadcast_to(np.asarray(eval(code, env, {"x": x, "y": y}), dtype=float), x.shape)

    return fn


def problem_from_json(source) -> ProblemSpec:
    """Problem from a JSON object of expressions in ``x`` and ``y``.

    Keys: ``obstacle`` (required), ``rhs`` and ``dirichlet`` (default 0),
    optional ``exact_u`` and ``exact_lambda``, optional ``bounds``.
    """
    if isinstance(source, (str, Path)) and not str(source).lstrip().startswith("{"):
        source = Path(source).read_text()
    data = json.loads(source) if isinstance(source, str) else dict(source)
    if "obstacle" not in data:
        raise ValueError("problem file needs an 'obstacle' expression")
    fns = {k: _compile_expression(data.get(k, "0")) for k in ("obstacle", "rhs", "dirichlet")}
    exact = _compile_expression(data["exact_u"]) if "exact_u" in data else None
    lam = _compile_expression(data["exact_lambda"]) if "exact_lambda" in data else None
    bounds = tuple(float(v) for v in data.get("bounds", (-1.0, 1.0, -1.0, 1.0)))
    if len(bounds) != 4:
        raise ValueError("bounds must be [x0, x1, y0, y1]")
    return ProblemSpec(str(data.get("name", "file")), fns["obstacle"], fns["rhs"], fns["dirichlet"],
                       exact, None, lam, bounds)
