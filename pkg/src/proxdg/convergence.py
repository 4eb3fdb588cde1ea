"""Multi-level convergence studies."""
from __future__ import annotations

import logging

from .analysis import ErrorReport, error_norms, hho_reconstruct_solution
from .mesh import generate_structured
from .problems import check_benchmark
from .solver import ProximalConfig, run

__all__ = ["run_level", "run_convergence"]

log = logging.getLogger(__name__)


def run_level(problem, method, n, config=None):
    """Solve on the ``n x n`` structured mesh and measure errors; returns ``(result, errors)``."""
    config = config or ProximalConfig()
    mesh = generate_structured(n, problem.bounds)
    result = run(problem, mesh, method, config)
    errors = {}
    if problem.has_exact and problem.exact_grad is not None:
        recon = None
        if method.kind == "hho":
            recon = hho_reconstruct_solution(result.system, result.state.u)
        errors = error_norms(problem, result.field, result.state.lam, result.state.gap,
                             config.quad_degree, recon)
    return result, errors


def run_convergence(problem, method, levels, config=None):
    """Run every level and collect an :class:`ErrorReport`.

    Returns ``(report, records)`` where ``records`` holds one JSON-ready dict
    per level, including the outer-iteration history.  Any unconverged level
    marks the report as failed.
    """
    levels = [int(n) for n in levels]
    if levels != sorted(set(levels)):
        raise ValueError("levels must be strictly ascending")
    config = config or ProximalConfig()
    if problem.name == "benchmark":
        check_benchmark(problem)
    report = ErrorReport(method.label)
    records = []
    for n in levels:
        result, errors = run_level(problem, method, n, config)
        mesh = result.system.mesh
        report.add(n, mesh.h, errors)
        if not result.converged:
            report.failed = True
        records.append({
            "n": n, "h": mesh.h, "n_dofs": result.system.n_dofs,
            "converged": result.converged, "message": result.message,
            "outer_iterations": len(result.history), "errors": errors,
            "history": result.history_json(),
        })
        log.info("%s n=%d: %s", method.label, n, result.message)
    return report, records
