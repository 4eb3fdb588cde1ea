"""Convergence tables for every method on the benchmark.

Levels 8, 16, 32 keep this under a minute; add 64 for the full study.

    python demos/02_method_comparison.py [levels]
"""
import sys

from proxdg import Method, benchmark_problem, run_convergence

levels = [int(v) for v in sys.argv[1].split(",")] if len(sys.argv) > 1 else [8, 16, 32]
problem = benchmark_problem()

methods = [Method("ipdg"), Method("eg"), Method("hip"),
           Method("hho", None, 1, 1), Method("hho", None, 0, 1), Method("hho", None, 0, 0)]

for method in methods:
    report, records = run_convergence(problem, method, levels)
    iters = [r["outer_iterations"] for r in records]
    print(f"== {method.label}  (outer iterations per level: {iters})")
    cols = ["eH1_u", "eL2_u", "eL2_lambda"] if method.cell_degree == 1 else []
    if method.kind == "hho":
        cols.append("eH1_recon")
    last = report.orders()[-1]
    print("   final EOC  " + "  ".join(f"{c}={last[c]:.3f}" for c in cols))

# the cell part of HHO(0, r) is piecewise constant, so only the reconstruction
# carries gradient information; its H1 rate is the interesting number there
