"""
Bessel kernel and the Lipschitz constant K
==========================================

The chemical concentration is the convolution of the density with the Bessel
potential B_alpha.  This script evaluates the kernel, its gradient scale
g_alpha and the constants used by the blow-up estimates.
"""
import numpy as np
from scipy.special import k0, k1

from ksblowup import KernelParams, bessel_potential, g_alpha, kernel_constants

params = KernelParams(alpha=1.0)

# the integral representation agrees with the modified Bessel functions
for r in (0.1, 1.0, 5.0):
    print(f"r={r:4}: B={bessel_potential(params, r):.10f}  K0/(2 pi)={k0(r) / (2 * np.pi):.10f}"
          f"  g={g_alpha(params, r):.10f}  r K1={r * k1(r):.10f}")

# g_alpha is 1 at the origin and decays, so the gradient is never stronger than the Newton kernel
r = np.linspace(1e-3, 8, 9)
print("g_alpha on a grid:", np.round([g_alpha(params, s) for s in r], 4))

c = kernel_constants(params)
print(f"||B||_1 = {c.l1_B:.6f} (1/alpha = 1)")
print(f"||grad B||_1 = {c.l1_gradB:.6f} (pi/2 = {np.pi / 2:.6f})")
print(f"K = 2 pi sup r B_1(r) = {c.K:.5f}")
