"""Walk through one proximal solve of the radial benchmark.

    python demos/01_benchmark_walkthrough.py
"""
import numpy as np

from proxdg import Method, ProximalConfig, benchmark_problem, generate_structured, run
from proxdg.analysis import error_norms, feasibility_report
from proxdg.problems import benchmark_constants

c = benchmark_constants()
print(f"contact radius a = {c.a:.12f}, log strength Q = {c.Q:.7f}")

problem = benchmark_problem()
mesh = generate_structured(16)
print(mesh)

# default schedule: alpha_k = 2^(k-1), capped at 1e6
result = run(problem, mesh, Method("ipdg"), ProximalConfig())
print(result.message)
print(" k     alpha        energy   |lambda|  newton")
for h in result.history:
    print(f"{h['k']:2d} {h['alpha']:9.0f} {h['energy']:13.9f} {h['lambda_norm']:9.4f} {h['newton_iters']:6d}")

# iterates stay strictly above the obstacle; the limit is feasible in the cell-mean sense
print("smallest o_h - phibar over iterates:", min(h["min_gap"] for h in result.history))
margins, worst = feasibility_report(result.system, result.state.u, result.obstacle_means)
print("smallest cell margin at convergence:", worst)

# discrete contact set: cells where the latent variable has run off to -inf
contact = result.state.gap < 1e-8
r = np.hypot(*mesh.cell_centroids.T)
print(f"{contact.sum()} contact cells, centroid radii up to {r[contact].max():.3f} (a = {c.a:.3f})")

err = error_norms(problem, result.field, result.state.lam, result.state.gap)
for k, v in err.items():
    if v is not None:
        print(f"{k:12s} {v:.3e}")
