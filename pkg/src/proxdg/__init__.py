"""Proximal discontinuous Galerkin methods for the Poisson obstacle problem."""
from .entropy import LegendreEntropy, get_entropy
from .forms import AssembledSystem, Method, assemble
from .mesh import Mesh, generate_structured
from .problems import ProblemSpec, benchmark_problem, flat_problem, manufactured_problem
from .solver import ProximalConfig, RunResult, run
from .convergence import run_convergence

__all__ = ["LegendreEntropy", "get_entropy", "AssembledSystem", "Method", "assemble", "Mesh",
           "generate_structured", "ProblemSpec", "benchmark_problem", "flat_problem",
           "manufactured_problem", "ProximalConfig", "RunResult", "run", "run_convergence"]

__version__ = "0.1.0"
