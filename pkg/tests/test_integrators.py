import pickle

import numpy as np
import pytest
import scipy.linalg
import scipy.sparse as sp

from ksblowup.assembly import SolverError
from ksblowup.integrators import (
    FEMProblem,
    SchemeConfig,
    TimeState,
    final_state,
    linear_solve,
    run,
    step,
    step_bdf2,
    step_bdf3,
    step_euler,
)
from ksblowup.io import gaussian_init, mesh_for_h, presets
from ksblowup.mesh import build_uniform

SCHEMES = ["euler", "bdf2", "bdf3", "midpoint", "trapezoid"]


@pytest.fixture(scope="module")
def small():
    cfg = presets()["example1"]
    mesh = build_uniform(cfg.domain, 12)
    return FEMProblem(mesh), gaussian_init(mesh, cfg.bumps)


def test_scheme_config_validation():
    with pytest.raises(ValueError):
        SchemeConfig(kind="rk4")
    with pytest.raises(ValueError):
        SchemeConfig(tau=0.0)
    with pytest.raises(ValueError):
        SchemeConfig(m_max=0)
    with pytest.raises(ValueError):
        SchemeConfig(solver="gmres")


def test_time_state_history():
    s = TimeState(history=(np.zeros(2),), tau=0.1)
    for k in range(1, 5):
        s = s.advance(np.full(2, float(k)))
    assert len(s.history) == 3 and s.k == 4 and s.t == pytest.approx(0.4)
    np.testing.assert_array_equal(s.current, [4.0, 4.0])


@pytest.mark.parametrize("kind", ["euler", "bdf2"])
@pytest.mark.parametrize("method", ["direct", "bicgstab"])
def test_linear_solve_matches_dense_oracle(small, kind, method):
    problem, n0 = small
    tau = 5e-5
    if kind == "euler":
        A = problem.L / tau + problem.A + problem.drift(n0)
        rhs = problem.lumped * n0 / tau
    else:
        A = problem.L * (1.5 / tau) + problem.A + problem.drift(n0)
        rhs = problem.lumped * (2 * n0 - 0.5 * n0) / tau
    x, _ = linear_solve(A, rhs, tol=1e-12, method=method)
    oracle = scipy.linalg.solve(A.toarray(), rhs)
    assert np.linalg.norm(x - oracle) <= 1e-9 * np.linalg.norm(oracle)


def test_linear_solve_errors():
    A = sp.identity(3, format="csr")
    with pytest.raises(ValueError):
        linear_solve(A, np.ones(4))
    with pytest.raises(ValueError):
        linear_solve(A, np.ones(3), method="cholesky")
    x, it = linear_solve(A, np.zeros(3))
    assert it == 0 and not x.any()
    with pytest.raises(SolverError) as err:
        linear_solve(sp.random(40, 40, density=0.2, random_state=1) + sp.identity(40), np.ones(40),
                     tol=1e-300)
    assert err.value.residual is not None


@pytest.mark.parametrize("kind", SCHEMES)
def test_mass_and_positivity(small, kind):
    problem, n0 = small
    traj = run(problem, SchemeConfig(kind=kind, tau=5e-5), n0, max_steps=20, energy=False)
    m0 = traj.records[0].mass
    masses = np.array([r.mass for r in traj.records])
    assert np.abs(masses - m0).max() <= 1e-10 * m0
    assert all(rep.converged for rep in traj.reports)
    if kind == "euler":
        assert min(r.min for r in traj.records) >= -1e-12 * max(r.linf for r in traj.records)


def test_startup_ladder(small):
    problem, n0 = small
    cfg = SchemeConfig(kind="bdf3", tau=5e-5)
    s0 = TimeState(history=(n0,), tau=cfg.tau)
    n1, _ = step(problem, s0, cfg)
    np.testing.assert_array_equal(n1, step_euler(problem, s0, cfg)[0])
    s1 = s0.advance(n1)
    n2, _ = step(problem, s1, cfg)
    np.testing.assert_array_equal(n2, step_bdf2(problem, s1, cfg)[0])
    with pytest.raises(ValueError):
        step_bdf3(problem, s1, cfg)


def test_picard_limit_is_reported(small):
    problem, n0 = small
    state = TimeState(history=(n0, n0), tau=1e-4)
    _, rep = step_bdf2(problem, state, SchemeConfig(kind="bdf2", tau=1e-4, eps=1e-300, m_max=2))
    assert rep.picard_iters == 2 and not rep.converged


def test_run_bookkeeping(small):
    problem, n0 = small
    seen = []
    traj = run(problem, SchemeConfig(kind="euler", tau=1e-4), n0, t_end=1e-3, sink=seen.append,
               snapshot_every=4)
    assert traj.steps == 10 and len(traj.records) == 11 and len(seen) == 11
    assert [r.k for r in traj.records] == list(range(11))
    assert sorted(traj.snapshots) == [0, 4, 8, 10]
    np.testing.assert_array_equal(traj.final, traj.snapshots[10])
    with pytest.raises(ValueError):
        run(problem, SchemeConfig(), n0)


def test_run_reports_solver_failure(small):
    problem, n0 = small
    traj = run(problem, SchemeConfig(kind="euler", tau=1e-4, solver_tol=1e-300), n0, max_steps=3)
    assert traj.status == "solver_failure" and traj.steps == 0 and traj.error


def test_euler_energy_decreases(small):
    problem, n0 = small
    traj = run(problem, SchemeConfig(kind="euler", tau=5e-5), n0, max_steps=40)
    E = np.array([r.energy for r in traj.records])
    assert np.all(np.diff(E) <= 1e-8 * abs(E[0]))


def test_bicgstab_agrees_with_direct(small):
    problem, n0 = small
    a = final_state(problem, SchemeConfig(kind="bdf2", tau=5e-5), n0, 5)
    b = final_state(problem, SchemeConfig(kind="bdf2", tau=5e-5, solver="bicgstab"), n0, 5)
    np.testing.assert_allclose(a, b, rtol=1e-7, atol=1e-7 * np.abs(a).max())


def test_problem_pickles(small):
    problem, n0 = small
    clone = pickle.loads(pickle.dumps(problem))
    np.testing.assert_allclose(clone.chemical(n0), problem.chemical(n0))


# Heat equation without drift: L n' + A n = 0 has the exact solution expm(-t L^-1 A) n0.
class HeatOnly(FEMProblem):
    def drift(self, u):
        return sp.csr_matrix((self.mesh.n_vertices,) * 2)


@pytest.fixture(scope="module")
def heat():
    mesh = build_uniform(((0, 1), (0, 1)), 6)
    problem = HeatOnly(mesh)
    x, y = mesh.vertices.T
    n0 = 1 + np.cos(np.pi * x) * np.cos(2 * np.pi * y) + x * y
    G = -np.diag(1 / problem.lumped) @ problem.A.toarray()
    return problem, n0, lambda t: scipy.linalg.expm(t * G) @ n0


def heat_error(problem, exact, kind, tau, T, exact_start):
    cfg = SchemeConfig(kind=kind, tau=tau, eps=1e-13, m_max=50)
    nsteps = round(T / tau)
    if exact_start:
        hist = tuple(exact(k * tau) for k in (2, 1, 0))
        state = TimeState(history=hist, k=2, tau=tau)
        nsteps -= 2
    else:
        state = TimeState(history=(exact(0.0),), tau=tau)
    for _ in range(nsteps):
        n, _ = step(problem, state, cfg)
        state = state.advance(n)
    return np.abs(state.current - exact(T)).max()


@pytest.mark.parametrize("kind, order, exact_start", [
    ("euler", 1, False), ("bdf2", 2, False), ("midpoint", 2, False),
    ("trapezoid", 2, False), ("bdf3", 3, True),
])
def test_heat_only_orders(heat, kind, order, exact_start):
    problem, _, exact = heat
    T = 0.02
    e1 = heat_error(problem, exact, kind, 1e-3, T, exact_start)
    e2 = heat_error(problem, exact, kind, 5e-4, T, exact_start)
    assert e1 / e2 == pytest.approx(2**order, rel=0.15)


@pytest.mark.parametrize("kind", SCHEMES)
def test_constant_state_is_fixed_point(kind):
    mesh = build_uniform(((0, 1), (0, 1)), 6)
    n0 = np.full(mesh.n_vertices, 4.0)
    traj = run(FEMProblem(mesh), SchemeConfig(kind=kind, tau=1e-3), n0, max_steps=4, energy=False)
    np.testing.assert_allclose(traj.final, 4.0, rtol=1e-12)


def test_picard_converges_on_first_example():
    cfg = presets()["example1"]
    mesh = build_uniform(cfg.domain, 32)
    traj = run(FEMProblem(mesh), cfg.scheme_config(), gaussian_init(mesh, cfg.bumps), max_steps=100,
               energy=False)
    assert all(rep.converged for rep in traj.reports)
    assert max(rep.picard_iters for rep in traj.reports) <= cfg.m_max


@pytest.fixture(scope="module")
def blowup_trace():
    # the h = 0.04 mesh of the blow-up acceptance run; coarser meshes smear the bump outwards
    cfg = presets()["blowup"]
    mesh = build_uniform(cfg.domain, mesh_for_h(2.0, 0.04))
    traj = run(FEMProblem(mesh, alpha=cfg.alpha), cfg.scheme_config(), gaussian_init(mesh, cfg.bumps),
               max_steps=40, energy=False)
    return cfg, traj.records[0].mass, np.array([r.I for r in traj.records])


def test_blowup_second_moment_decreases(blowup_trace):
    _, _, I = blowup_trace
    assert np.all(np.diff(I) <= 0)


def test_fem_trace_satisfies_virial_inequality(blowup_trace):
    # the whole-plane moment inequality applied to the bounded-domain upwind trace
    from ksblowup.virial import ProblemData, check_discrete_virial

    cfg, mass, I = blowup_trace
    data = ProblemData(M=mass, I0=I[0], alpha=cfg.alpha)
    rep = check_discrete_virial(I, cfg.scheme, data, cfg.tau, tol=1e-10 * I[0])
    assert rep.passed, f"{len(rep.flagged)} of {len(rep.steps)} steps violate the bound; " \
                       f"largest excess {rep.residuals.max():.3e} against I_0 = {I[0]:.4f}"
