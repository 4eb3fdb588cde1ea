"""Bregman proximal point iteration for the discrete obstacle problem.

Step ``k`` solves for ``(u, lam)``::

    A u - M^T lam = b
    (M u)_T = |T| (phibar_T + F(psi_T^{k-1} - alpha_k lam_T))   for every cell T

and then sets ``psi^k = psi^{k-1} - alpha_k lam``.  ``F`` is the entropy gap
function (``exp`` or ``softplus``), so the observable ``o = phibar + F(psi)``
always lies strictly above the cell-mean obstacle.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .entropy import get_entropy
from .forms import AssembledSystem, Method, assemble
from .linalg import SPDFactor, condense, solve_saddle, solve_spd
from .mesh import Mesh
from .spaces import project_cell

__all__ = ["ProximalConfig", "ProximalState", "RunResult", "NewtonSystem", "NewtonError",
           "newton_linearize", "newton_solve", "proximal_step", "run", "initial_state"]

log = logging.getLogger(__name__)

ELIMINATION_LIMIT = 1e8


class NewtonError(RuntimeError):
    """Newton iteration failed to reach its tolerance."""


@dataclass
class ProximalConfig:
    """Parameters of the outer loop and of the inner Newton solve."""

    entropy: str = "shannon"
    alpha0: float = 1.0
    alpha_growth: float = 2.0
    alpha_cap: float = 1e6
    psi0: float = 0.0
    outer_tol: float = 1e-8
    max_outer: int = 100
    newton_tol: float = 1e-10
    newton_max_iter: int = 50
    max_halvings: int = 30
    psi_clamp: tuple = (-700.0, 700.0)
    linear_solver: str = "auto"
    quad_degree: int = 6

    def __post_init__(self):
        if not self.alpha0 > 0:
            raise ValueError("alpha0 must be positive")
        if not self.alpha_growth >= 1:
            raise ValueError("alpha growth factor must be >= 1 so the step sizes are unsummable")
        if not self.alpha_cap >= self.alpha0:
            raise ValueError("alpha cap must be >= alpha0")
        if self.linear_solver not in ("auto", "condensed", "eliminated", "full"):
            raise ValueError(f"unknown linear solver {self.linear_solver!r}")
        get_entropy(self.entropy)

    def alpha(self, k):
        """Step size of outer iteration ``k >= 1``."""
        if k < 1:
            raise ValueError("outer iterations are numbered from 1")
        try:
            v = self.alpha0 * self.alpha_growth ** (k - 1)
        except OverflowError:
            v = math.inf
        return min(v, self.alpha_cap)

    def to_dict(self):
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


@dataclass
class ProximalState:
    k: int
    u: np.ndarray
    psi: np.ndarray
    lam: np.ndarray
    gap: np.ndarray          # F(psi) = o - phibar, strictly positive
    o: np.ndarray            # cell values of the bound-preserving observable
    alpha: float
    energy: float
    newton_iters: int = 0
    newton_residuals: list = field(default_factory=list)
    n_clamped: int = 0


@dataclass
class RunResult:
    converged: bool
    state: ProximalState
    history: list
    system: AssembledSystem
    obstacle_means: np.ndarray
    config: ProximalConfig
    message: str = ""

    @property
    def field(self):
        return self.system.field(self.state.u)

    @property
    def energies(self):
        return np.array([h["energy"] for h in self.history])

    def history_json(self):
        keys = ("k", "alpha", "energy", "lambda_norm", "newton_iters")
        return [{k: h[k] for k in keys} for h in self.history]


# ----------------------------------------------------------------------
# Newton

@dataclass
class NewtonSystem:
    """Linearization ``[[A, -M^T], [M, alpha H]] [du; dlam] = rhs`` at the current iterate.

    ``H`` is the cell area times the entropy curvature at ``psi_prev - alpha lam``.
    """

    system: AssembledSystem
    alpha: float
    H: np.ndarray
    rhs: np.ndarray

    @property
    def n(self):
        return self.system.n_dofs

    @property
    def D(self):
        return self.alpha * self.H

    def jacobian(self):
        A, M = self.system.A, self.system.M
        return sp.bmat([[A, -M.T], [M, sp.diags(self.D)]], format="csr")

    def eliminated(self):
        """``(A~, rhs~)`` after eliminating the multiplier; ``None`` if some ``H`` vanishes."""
        if np.any(~(self.D > 0)):
            return None
        A, M = self.system.A, self.system.M
        Dinv = 1.0 / self.D
        At = (A + M.T @ sp.diags(Dinv) @ M).tocsr()
        r1, r2 = self.rhs[:self.n], self.rhs[self.n:]
        return At, r1 + M.T @ (Dinv * r2)

    def elimination_ratio(self):
        m2 = np.asarray(self.system.M.multiply(self.system.M).sum(axis=1)).ravel()
        with np.errstate(divide="ignore", over="ignore"):
            worst = np.max(np.where(self.D > 0, m2 / np.where(self.D > 0, self.D, 1.0), np.inf))
        return worst / self.system.A.diagonal().min()

    def choose_route(self, preference="auto"):
        if preference != "auto":
            return preference
        if self.system.space.is_hybrid:
            return "condensed"
        return "eliminated" if self.elimination_ratio() <= ELIMINATION_LIMIT else "full"

    def interior_blocks(self):
        """Unknowns condensed together per cell: cell coefficients and the cell multiplier."""
        sp_ = self.system.space
        lam_idx = self.n + np.arange(sp_.mesh.n_cells)
        if sp_.is_hybrid:
            return np.column_stack([sp_.cell_dofs, lam_idx])
        return lam_idx[:, None]

    def solve(self, route="auto"):
        route = self.choose_route(route)
        n = self.n
        if route == "full":
            x = solve_saddle(self.jacobian(), self.rhs)
        elif route in ("condensed", "eliminated"):
            if route == "condensed" and not self.system.space.is_hybrid:
                route = "eliminated"
            blocks = self.interior_blocks() if route == "condensed" else (n + np.arange(self.system.mesh.n_cells))[:, None]
            S, s, recover = condense(self.jacobian(), self.rhs, blocks, name=f"{self.system.method.label} Newton system")
            S = (0.5 * (S + S.T)).tocsr()
            y = solve_spd(S, s, name=f"condensed {self.system.method.label} Newton matrix")
            x = recover(y)
        else:
            raise ValueError(f"unknown route {route!r}")
        return x[:n], x[n:]


class _StepProblem:
    def __init__(self, system, entropy, phibar, psi_prev, alpha):
        self.system = system
        self.entropy = entropy
        self.phibar = phibar
        self.psi_prev = psi_prev
        self.alpha = alpha
        self.area = system.mesh.cell_areas
        self.scale = np.maximum(1.0, np.abs(phibar))

    def residual(self, u, lam):
        s = self.system
        with np.errstate(over="ignore", invalid="ignore"):
            arg = self.psi_prev - self.alpha * lam
            r1 = s.A @ u - s.M.T @ lam - s.b
            r2 = s.cell_integrals(u) - self.area * (self.phibar + self.entropy.gap(arg))
        return r1, r2

    def metric(self, r1, r2):
        m1 = np.max(np.abs(r1)) if len(r1) else 0.0
        m2 = np.max(np.abs(r2 / self.area) / self.scale)
        return float(max(m1, m2))

    def merit(self, r1, r2):
        with np.errstate(over="ignore", invalid="ignore"):
            v = float(np.sqrt(r1 @ r1 + np.sum((r2 / self.area) ** 2)))
        return v if math.isfinite(v) else math.inf


def newton_linearize(system, psi_prev, alpha, lam, u=None, entropy="shannon", phibar=None):
    """Newton system of one proximal step at ``(u, lam)``.

    When ``u`` and ``phibar`` are omitted the right-hand side is left at zero;
    only the matrix blocks are then meaningful.
    """
    ent = get_entropy(entropy)
    area = system.mesh.cell_areas
    with np.errstate(over="ignore"):
        H = area * ent.hess_conj(0.0, np.asarray(psi_prev) - alpha * np.asarray(lam))
    rhs = np.zeros(system.n_dofs + system.mesh.n_cells)
    if u is not None and phibar is not None:
        r1, r2 = _StepProblem(system, ent, phibar, psi_prev, alpha).residual(u, lam)
        rhs = -np.concatenate([r1, r2])
    return NewtonSystem(system, float(alpha), H, rhs)


def newton_solve(system, phibar, psi_prev, alpha, u0, lam0, config: ProximalConfig):
    """Damped Newton for one proximal step; returns ``(u, lam, residual history)``."""
    ent = get_entropy(config.entropy)
    prob = _StepProblem(system, ent, phibar, psi_prev, alpha)
    u, lam = np.array(u0, dtype=float), np.array(lam0, dtype=float)
    r1, r2 = prob.residual(u, lam)
    metric = prob.metric(r1, r2)
    history = [metric]
    for _ in range(config.newton_max_iter):
        if metric <= config.newton_tol:
            return u, lam, history
        ns = NewtonSystem(system, float(alpha),
                          system.mesh.cell_areas * _safe_hess(ent, psi_prev - alpha * lam),
                          -np.concatenate([r1, r2]))
        du, dl = ns.solve(config.linear_solver)
        merit0 = prob.merit(r1, r2)
        t = 1.0
        for _h in range(config.max_halvings + 1):
            ut, lt = u + t * du, lam + t * dl
            q1, q2 = prob.residual(ut, lt)
            if np.all(np.isfinite(q1)) and np.all(np.isfinite(q2)):
                mt = prob.metric(q1, q2)
                if prob.merit(q1, q2) < merit0 or mt <= config.newton_tol:
                    break
            t *= 0.5
        else:
            raise NewtonError(f"line search failed after {config.max_halvings} halvings "
                              f"(residual {metric:.3e}, alpha {alpha:g})")
        u, lam, r1, r2 = ut, lt, q1, q2
        metric = prob.metric(r1, r2)
        history.append(metric)
    if metric <= config.newton_tol:
        return u, lam, history
    raise NewtonError(f"Newton did not converge in {config.newton_max_iter} iterations "
                      f"(residual {metric:.3e}, alpha {alpha:g})")


def _safe_hess(ent, arg):
    with np.errstate(over="ignore"):
        return ent.hess_conj(0.0, arg)


# ----------------------------------------------------------------------
# outer loop

def initial_state(system, phibar, config: ProximalConfig):
    ent = get_entropy(config.entropy)
    nc = system.mesh.n_cells
    psi = np.full(nc, float(config.psi0))
    gap = ent.gap(psi)
    return ProximalState(0, np.zeros(system.n_dofs), psi, np.zeros(nc), gap, phibar + gap,
                         0.0, float("nan"))


def proximal_step(system, state, alpha, config: ProximalConfig, phibar):
    """One outer iteration from ``state``; the previous ``(u, lam)`` warm-start Newton."""
    ent = get_entropy(config.entropy)
    u, lam, res = newton_solve(system, phibar, state.psi, alpha, state.u, state.lam, config)
    psi = state.psi - alpha * lam
    lo, hi = config.psi_clamp
    n_clamped = int(np.count_nonzero((psi < lo) | (psi > hi)))
    psi = np.clip(psi, lo, hi)
    gap = ent.gap(psi)
    return ProximalState(state.k + 1, u, psi, lam, gap, phibar + gap, float(alpha),
                         system.energy(u), len(res) - 1, res, n_clamped)


def _l2_p0(mesh, v):
    return float(np.sqrt(np.sum(mesh.cell_areas * v * v)))


def run(problem, mesh: Mesh, method: Method, config: Optional[ProximalConfig] = None,
        system: Optional[AssembledSystem] = None, check_spd=True):
    """Run the proximal iteration to convergence.

    Returns a :class:`RunResult`; ``converged`` is ``False`` when the outer
    iteration limit is hit or Newton fails, never silently ``True``.
    """
    config = config or ProximalConfig()
    if system is None:
        system = assemble(mesh, method, g=problem.dirichlet, f=problem.rhs, quad_degree=config.quad_degree)
    if check_spd:
        # a nonpositive pivot names the assembly and aborts before iterating
        SPDFactor(system.A, name=f"{method.label} stiffness matrix (sigma={method.sigma})")
    phibar = project_cell(problem.obstacle, 0, mesh, config.quad_degree)[:, 0]
    state = initial_state(system, phibar, config)
    history = []
    warned = False
    converged, message = False, "outer iteration limit reached"
    for k in range(1, config.max_outer + 1):
        alpha = config.alpha(k)
        try:
            new = proximal_step(system, state, alpha, config, phibar)
        except (NewtonError, np.linalg.LinAlgError) as exc:
            message = f"step {k}: {exc}"
            log.error(message)
            break
        if new.n_clamped and not warned:
            log.warning("latent variable clamped to %s in %d cells at step %d",
                        config.psi_clamp, new.n_clamped, k)
            warned = True
        dlam = _l2_p0(mesh, new.lam - state.lam)
        rec = {
            "k": k, "alpha": alpha, "energy": new.energy,
            "lambda_norm": _l2_p0(mesh, new.lam), "lambda_change": dlam,
            "newton_iters": new.newton_iters, "newton_residuals": list(new.newton_residuals),
            "min_gap": float(new.gap.min()),
            "min_margin": float(np.min(system.cell_integrals(new.u) - mesh.cell_areas * phibar)),
            "clamped": new.n_clamped,
        }
        history.append(rec)
        prev_energy = state.energy
        state = new
        if k >= 2:
            dE = abs(new.energy - prev_energy)
            if dlam <= config.outer_tol and dE <= config.outer_tol * max(1.0, abs(new.energy)):
                converged, message = True, f"converged after {k} outer iterations"
                break
    log.info("%s on %s: %s", method.label, mesh, message)
    return RunResult(converged, state, history, system, phibar, config, message)
