"""
Blow-up time bounds from the discrete second moment
===================================================

For supercritical mass M > 8 pi the second moment of a semi-discrete scheme
must turn negative after finitely many steps, which is impossible for a
nonnegative density.  The step where this happens bounds the blow-up step.
"""
import math

from ksblowup import ProblemData, blowup_bounds, recurse_moment

tau = 5e-5

# Newton kernel: the moment sequence is affine in k
data = ProblemData(M=10 * math.pi, I0=0.5, alpha=0.0)
b = blowup_bounds(data, tau)
print(f"alpha=0: T*={b.T_star:.6f}, k_max={b.k_max:.2f}")
for scheme in ("euler", "bdf2", "midpoint", "trapezoid"):
    tr = recurse_moment(scheme, data, tau, 1000)
    print(f"  {scheme:9s} first negative step {tr.first_negative}")

# Bessel kernel: the estimate needs a small initial moment and a small step
data = ProblemData(M=30 * math.pi, I0=2 * 30 * math.pi / 500, alpha=1.0)
b = blowup_bounds(data, 1e-5)
print(f"alpha=1: I*={b.I_star:.4f}, tau*={b.tau_star:.3e}, hypotheses ok: {b.hypotheses_ok}")
print(f"  T*={b.T_star:.3e}, k_max={b.k_max:.2f}")
for scheme in ("euler", "bdf2", "midpoint"):
    tr = recurse_moment(scheme, data, 1e-5, 1000)
    print(f"  {scheme:9s} envelope turns negative at step {tr.first_negative}")
