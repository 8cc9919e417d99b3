"""Blow-up bounds and upwind finite-element simulation of the parabolic-elliptic Keller-Segel model."""
from .kernels import KernelParams, KernelConstants, bessel_potential, g_alpha, grad_kernel, kernel_constants
from .virial import ProblemData, RungeKutta, blowup_bounds, recurse_moment, check_discrete_virial
from .mesh import StructuredTriMesh, build_uniform, dual_geometry
from .integrators import FEMProblem, SchemeConfig, run
from .diagnostics import blowup_indicator, convergence_study

__version__ = "0.1.0"
