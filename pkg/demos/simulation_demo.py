"""
Running the first example
=========================

Four Gaussian bumps of mass 6 pi on the unit square, integrated with the
semi-implicit BDF2 scheme.  Mass is conserved and the density stays positive.
"""
from ksblowup import FEMProblem, build_uniform, run
from ksblowup.io import presets, write_svg_plot

cfg = presets()["example1"]
mesh = build_uniform(cfg.domain, 32)
problem = FEMProblem(mesh, alpha=cfg.alpha)
traj = run(problem, cfg.scheme_config(), cfg.initial(mesh), max_steps=100)

first, last = traj.records[0], traj.records[-1]
print(f"steps: {traj.steps}, status: {traj.status}")
print(f"mass {first.mass:.10f} -> {last.mass:.10f}")
print(f"L-inf {first.linf:.2f} -> {last.linf:.2f}, min {last.min:.3e}")
print(f"energy {first.energy:.4f} -> {last.energy:.4f}")
write_svg_plot(traj.records, "example1.svg", title="first example, a = 32")
print("wrote example1.svg")
