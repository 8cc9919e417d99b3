"""
Temporal convergence orders
===========================

Errors at a fixed time against a fine-step reference.  BDF2 and the implicit
midpoint rule converge at second order, the Euler scheme at first order.
"""
from ksblowup import FEMProblem, SchemeConfig, build_uniform, convergence_study
from ksblowup.io import gaussian_init, presets

cfg = presets()["convergence"]
mesh = build_uniform(cfg.domain, 8)
problem = FEMProblem(mesh, alpha=cfg.alpha)
n0 = gaussian_init(mesh, cfg.bumps)

for kind in ("euler", "bdf2", "midpoint"):
    report = convergence_study(problem, SchemeConfig(kind=kind, eps=1e-12, m_max=50), n0,
                               taus=cfg.taus, tau_ref=1e-5, T=cfg.t_end)
    orders = ", ".join(f"p={p}: {o:.2f}" for p, o in report.orders.items())
    print(f"{kind:9s} {orders}")
