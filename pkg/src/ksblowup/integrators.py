"""Time stepping of the upwind finite-element Keller-Segel scheme.

Each step solves a linear system in which the drift argument ``u`` is
frozen.  Schemes whose drift depends on the new level (BDF-2, BDF-3,
midpoint, trapezoid) iterate ``u <- N(u)`` starting from the previous level
until two iterates agree to ``eps`` in the max norm or ``m_max`` solves have
been made; a non-converged iteration is reported, not raised.
"""
from dataclasses import dataclass, field
import logging

import numpy as np
import scipy.sparse as sp
from scipy.sparse import linalg as spla

from .assembly import (
    GreenOperator,
    SolverError,
    assemble_drift_matrix,
    coefficients_from_potential,
    lumped_mass,
    stiffness,
)
from .diagnostics import centroid, diag_record
from .mesh import dual_geometry

__all__ = [
    "SchemeConfig",
    "TimeState",
    "StepReport",
    "FEMProblem",
    "Trajectory",
    "linear_solve",
    "step_euler",
    "step_bdf2",
    "step_bdf3",
    "step_midpoint",
    "step_trapezoid",
    "step",
    "run",
    "final_state",
]

logger = logging.getLogger(__name__)

_ORDER = {"euler": 1, "midpoint": 1, "trapezoid": 1, "bdf2": 2, "bdf3": 3}


@dataclass(frozen=True)
class SchemeConfig:
    kind: str = "bdf2"
    tau: float = 5e-5
    eps: float = 1e-4
    m_max: int = 10
    solver_tol: float = 1e-10
    alpha: float = 1.0
    solver: str = "direct"

    def __post_init__(self):
        if self.kind not in _ORDER:
            raise ValueError(f"unknown scheme {self.kind!r}; expected one of {sorted(_ORDER)}")
        if not (self.tau > 0 and self.eps > 0 and self.solver_tol > 0):
            raise ValueError("tau, eps and solver_tol must be positive")
        if self.m_max < 1:
            raise ValueError("m_max must be at least 1")
        if self.solver not in ("direct", "bicgstab"):
            raise ValueError(f"unknown linear solver {self.solver!r}")


@dataclass(frozen=True)
class TimeState:
    """Solution history, newest level first."""

    history: tuple
    k: int = 0
    tau: float = 0.0

    @property
    def t(self):
        return self.k * self.tau

    @property
    def current(self):
        return self.history[0]

    def advance(self, n, keep=3):
        return TimeState(history=(n,) + self.history[:keep - 1], k=self.k + 1, tau=self.tau)


@dataclass(frozen=True)
class StepReport:
    picard_iters: int
    converged: bool
    solver_iters: int
    mass_after: float
    min_value: float
    linf: float


def linear_solve(A, rhs, tol=1e-10, method="direct", maxiter=2000):
    """Solve ``A x = rhs`` for a square sparse, possibly nonsymmetric, ``A``.

    ``method="direct"`` uses a sparse LU factorization; ``"bicgstab"`` uses
    ILU-preconditioned BiCGSTAB.  Either way the relative residual is checked
    against ``tol``.

    Returns
    -------
    x : ndarray
    iterations : int
        Krylov iterations, or 1 for the direct solve.
    """
    A = sp.csc_matrix(A)
    rhs = np.asarray(rhs, dtype=float)
    if A.shape[0] != A.shape[1] or A.shape[0] != rhs.size:
        raise ValueError(f"incompatible system: A {A.shape}, rhs {rhs.shape}")
    scale = np.linalg.norm(rhs)
    if scale == 0:
        return np.zeros_like(rhs), 0
    if method == "direct":
        x = spla.splu(A).solve(rhs)
        iters = 1
    elif method == "bicgstab":
        ilu = spla.spilu(A, drop_tol=1e-5, fill_factor=10)
        prec = spla.LinearOperator(A.shape, ilu.solve)
        count = [0]

        def _count(_):
            count[0] += 1

        x, info = spla.bicgstab(A, rhs, rtol=tol, atol=0.0, M=prec, maxiter=maxiter,
                                callback=_count)
        iters = count[0]
        if info > 0:
            res = np.linalg.norm(A @ x - rhs) / scale
            raise SolverError(f"BiCGSTAB stopped after {iters} iterations, residual {res:.3e}",
                              residual=res, iterations=iters)
    else:
        raise ValueError(f"unknown method {method!r}")
    res = np.linalg.norm(A @ x - rhs) / scale
    if not res <= tol:
        raise SolverError(f"relative residual {res:.3e} exceeds {tol:.1e}", residual=res,
                          iterations=iters)
    return x, iters


class FEMProblem:
    """Mesh-dependent operators shared by all steps of a trajectory."""

    def __init__(self, mesh, alpha=1.0, green_mass="consistent"):
        self.mesh = mesh
        self.alpha = float(alpha)
        self.dual = dual_geometry(mesh)
        self.lumped = lumped_mass(self.dual)
        self.L = sp.diags(self.lumped).tocsr()
        self.A = stiffness(mesh)
        self.green = GreenOperator(mesh, alpha=alpha, mass=green_mass, lumped=self.lumped, stiff=self.A)

    def chemical(self, u):
        return self.green(u)

    def drift(self, u):
        """Upwind drift matrix ``B(u)``."""
        return assemble_drift_matrix(coefficients_from_potential(self.mesh, self.dual, self.green(u)))

    def __getstate__(self):
        # the LU factorization is not picklable; rebuild it on the other side
        return {"mesh": self.mesh, "alpha": self.alpha, "green_mass": self.green.mass}

    def __setstate__(self, state):
        self.__init__(state["mesh"], state["alpha"], state["green_mass"])


def _check_history(state, need, name):
    if len(state.history) < need:
        raise ValueError(f"{name} needs {need} history levels, got {len(state.history)}")


def _report(problem, n, picard, converged, solver_iters):
    return StepReport(
        picard_iters=picard, converged=converged, solver_iters=solver_iters,
        mass_after=float(problem.lumped @ n), min_value=float(n.min()), linf=float(np.abs(n).max()),
    )


def _picard(problem, config, start, solve_frozen):
    u = start
    iters = 0
    for m in range(1, config.m_max + 1):
        new, it = solve_frozen(u)
        iters += it
        diff = float(np.abs(new - u).max())
        u = new
        if diff < config.eps:
            return u, m, True, iters
    logger.debug("Picard iteration stopped at m_max=%d, last update %.3e", config.m_max, diff)
    return u, config.m_max, False, iters


def step_euler(problem, state, config):
    """Semi-implicit Euler: drift frozen at the previous level, one linear solve."""
    _check_history(state, 1, "Euler")
    prev = state.history[0]
    lhs = problem.L / config.tau + problem.A + problem.drift(prev)
    n, it = linear_solve(lhs, problem.lumped * prev / config.tau, config.solver_tol, config.solver)
    return n, _report(problem, n, 1, True, it)


def step_bdf2(problem, state, config):
    _check_history(state, 2, "BDF-2")
    n1, n2 = state.history[0], state.history[1]
    base = problem.L * (1.5 / config.tau) + problem.A
    rhs = problem.lumped * (2 * n1 - 0.5 * n2) / config.tau

    def solve(u):
        return linear_solve(base + problem.drift(u), rhs, config.solver_tol, config.solver)

    n, m, ok, it = _picard(problem, config, n1, solve)
    return n, _report(problem, n, m, ok, it)


def step_bdf3(problem, state, config):
    _check_history(state, 3, "BDF-3")
    n1, n2, n3 = state.history[:3]
    base = problem.L * (11 / (6 * config.tau)) + problem.A
    rhs = problem.lumped * (18 * n1 - 9 * n2 + 2 * n3) / (6 * config.tau)

    def solve(u):
        return linear_solve(base + problem.drift(u), rhs, config.solver_tol, config.solver)

    n, m, ok, it = _picard(problem, config, n1, solve)
    return n, _report(problem, n, m, ok, it)


def step_midpoint(problem, state, config):
    """Midpoint rule; the drift is built from ``G_h(u + n_{k-1})`` and weighted by 1/4."""
    _check_history(state, 1, "midpoint")
    prev = state.history[0]
    L_tau = problem.L / config.tau

    def solve(u):
        B = 0.25 * problem.drift(u + prev)
        explicit = 0.5 * problem.A + B
        rhs = L_tau @ prev - explicit @ prev
        return linear_solve(L_tau + explicit, rhs, config.solver_tol, config.solver)

    n, m, ok, it = _picard(problem, config, prev, solve)
    return n, _report(problem, n, m, ok, it)


def step_trapezoid(problem, state, config):
    """Trapezoidal rule: averaged diffusion, drift averaged over the two levels."""
    _check_history(state, 1, "trapezoid")
    prev = state.history[0]
    L_tau = problem.L / config.tau
    rhs = L_tau @ prev - 0.5 * (problem.A @ prev) - 0.5 * (problem.drift(prev) @ prev)
    base = L_tau + 0.5 * problem.A

    def solve(u):
        return linear_solve(base + 0.5 * problem.drift(u), rhs, config.solver_tol, config.solver)

    n, m, ok, it = _picard(problem, config, prev, solve)
    return n, _report(problem, n, m, ok, it)


_STEPPERS = {
    "euler": step_euler,
    "bdf2": step_bdf2,
    "bdf3": step_bdf3,
    "midpoint": step_midpoint,
    "trapezoid": step_trapezoid,
}


def step(problem, state, config):
    """One step of ``config.kind``, falling back to lower BDF orders during startup."""
    kind = config.kind
    if kind == "bdf3" and len(state.history) < 3:
        kind = "bdf2"
    if kind == "bdf2" and len(state.history) < 2:
        kind = "euler"
    return _STEPPERS[kind](problem, state, config)


@dataclass
class Trajectory:
    records: list
    reports: list
    final: np.ndarray
    snapshots: dict = field(default_factory=dict)
    status: str = "ok"
    error: str | None = None

    @property
    def steps(self):
        return len(self.reports)


def run(problem, config, n0, t_end=None, max_steps=None, sink=None, center=None,
        snapshot_every=None, energy=True):
    """Integrate from ``n0`` for ``max_steps`` steps or up to ``t_end``.

    A :class:`~ksblowup.diagnostics.DiagRecord` is produced for the initial
    state and after every step and passed to ``sink`` if given.  The second
    moment is taken about ``center`` (default: centroid of ``n0``).  Snapshot
    fields are kept every ``snapshot_every`` steps and at the final step.  A
    linear-solver failure stops the loop with ``status="solver_failure"``.
    """
    n0 = np.asarray(n0, dtype=float)
    if max_steps is None:
        if t_end is None:
            raise ValueError("give t_end or max_steps")
        max_steps = int(round(t_end / config.tau))
    if center is None:
        center = centroid(n0, problem.lumped, problem.mesh.vertices)
    vertices = problem.mesh.vertices

    def record(k, n):
        c = problem.chemical(n) if energy else None
        rec = diag_record(k, k * config.tau, n, problem.lumped, vertices, center, c)
        if sink is not None:
            sink(rec)
        return rec

    state = TimeState(history=(n0,), k=0, tau=config.tau)
    traj = Trajectory(records=[record(0, n0)], reports=[], final=n0)
    if snapshot_every:
        traj.snapshots[0] = n0
    for _ in range(max_steps):
        try:
            n, rep = step(problem, state, config)
        except SolverError as exc:
            traj.status, traj.error = "solver_failure", str(exc)
            logger.warning("step %d: %s", state.k + 1, exc)
            break
        state = state.advance(n)
        traj.reports.append(rep)
        traj.records.append(record(state.k, n))
        if snapshot_every and state.k % snapshot_every == 0:
            traj.snapshots[state.k] = n
    traj.final = state.current
    if snapshot_every:
        traj.snapshots[state.k] = state.current
    return traj


def final_state(problem, config, n0, nsteps):
    """Field after ``nsteps`` steps, without diagnostics."""
    state = TimeState(history=(np.asarray(n0, dtype=float),), k=0, tau=config.tau)
    for _ in range(nsteps):
        n, _ = step(problem, state, config)
        state = state.advance(n)
    return state.current
