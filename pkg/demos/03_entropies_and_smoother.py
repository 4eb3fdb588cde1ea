"""Shannon vs softplus entropy, and the Clement-type feasibility check.

    python demos/03_entropies_and_smoother.py
"""
import numpy as np

from proxdg import Method, ProximalConfig, benchmark_problem, generate_structured, run
from proxdg.analysis import clement_feasibility, compute_weights
from proxdg.entropy import get_entropy

# both observables sit strictly above the obstacle for any finite latent value
for kind in ("shannon", "softplus"):
    ent = get_entropy(kind)
    psi = np.array([-20.0, 0.0, 20.0])
    print(f"{kind:9s} F(psi) = {ent.gap(psi)}  F'(psi) = {ent.hess_conj(0.0, psi)}")

problem = benchmark_problem()
mesh = generate_structured(16)
weights = compute_weights(mesh)
print(f"{len(weights.vertices)} interior vertices, max weight residual {weights.residuals.max():.1e}")

for kind in ("shannon", "softplus"):
    res = run(problem, mesh, Method("hho", None, 0, 1), ProximalConfig(entropy=kind))
    node = clement_feasibility(res.system, res.state.u, res.obstacle_means, problem.obstacle, weights)
    E = res.energies
    print(f"{kind:9s} {res.message}; energy {E[0]:.4f} -> {E[-1]:.6f}; "
          f"min node value of C_h p(u) - C_h phi = {node:.2e}")
