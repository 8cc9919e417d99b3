"""
Numerical blow-up
=================

A single concentrated bump of mass 30 pi on (0, 2)^2.  The L-inf norm grows
quickly while the centroid second moment shrinks.  On a finite mesh both
eventually level off, and the plateau step is compared with the analytic k_max.
"""
import math

from ksblowup import FEMProblem, ProblemData, blowup_bounds, blowup_indicator, build_uniform, run
from ksblowup.io import gaussian_init, mesh_for_h, presets

cfg = presets()["blowup"]
mesh = build_uniform(cfg.domain, mesh_for_h(2.0, 0.04))
traj = run(FEMProblem(mesh, alpha=cfg.alpha), cfg.scheme_config(), gaussian_init(mesh, cfg.bumps),
           max_steps=400, energy=False)

bump = cfg.bumps[0]
bounds = blowup_bounds(ProblemData(M=bump.mass, I0=2 * bump.mass * bump.theta, alpha=cfg.alpha), cfg.tau)
report = blowup_indicator(traj.records, bounds)
recs = traj.records
print(f"k_max = {bounds.k_max:.2f}")
print(f"L-inf grew {recs[-1].linf / recs[0].linf:.2f}x, second moment {recs[0].I:.4f} -> {recs[-1].I:.4f}")
print(f"plateau step: {report.k_plateau}" + ("" if report.ratio is None else f" ({report.ratio:.2f} k_max)"))
print("mass drift:", abs(recs[-1].mass - recs[0].mass) / recs[0].mass, "(M/pi =", recs[0].mass / math.pi, ")")
