"""Newton and Bessel potentials of the 2D Keller-Segel system.

The Bessel kernel is evaluated directly from its heat-kernel integral

    B_a(x) = 1/(4 pi) * int_0^inf t^-1 exp(-a t - |x|^2 / (4 t)) dt,

after the substitution t = exp(u), so no special-function library is needed.
"""
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

__all__ = [
    "KernelParams",
    "KernelConstants",
    "bessel_potential",
    "g_alpha",
    "grad_kernel",
    "kernel_constants",
    "convolve_grad",
]

_QUAD_OPTS = dict(epsabs=0.0, epsrel=1e-12, limit=200)


@dataclass(frozen=True)
class KernelParams:
    """Degradation rate of the chemical; ``alpha == 0`` selects the Newton kernel."""

    alpha: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.alpha) or self.alpha < 0:
            raise ValueError(f"alpha must be a nonnegative real, got {self.alpha!r}")


@dataclass(frozen=True)
class KernelConstants:
    l1_B: float
    l1_gradB: float
    K: float
    sup_rB1: float


def _check_radius(r):
    r = float(r)
    if not r > 0:
        raise ValueError(f"radius must be positive, got {r!r}")
    return r


def _log_integral(phase, split):
    """Integrate exp(phase(u)) over the real line, split at ``split``."""
    with np.errstate(over="ignore"):
        lo, _ = integrate.quad(lambda u: np.exp(phase(u)), -np.inf, split, **_QUAD_OPTS)
        hi, _ = integrate.quad(lambda u: np.exp(phase(u)), split, np.inf, **_QUAD_OPTS)
    return lo + hi


def bessel_potential(params, r):
    """Value of B_alpha at a point of modulus ``r`` in the plane.

    For ``alpha == 0`` this is the Newton kernel ``-log(r) / (2 pi)``.
    For ``alpha > 0`` the integral is split at the peak ``t = r / (2 sqrt(alpha))``
    and each half is integrated in ``u = log t``; the result agrees with
    ``K0(sqrt(alpha) r) / (2 pi)`` to about twelve digits.
    """
    r = _check_radius(r)
    alpha = params.alpha
    if alpha == 0:
        return -np.log(r) / (2 * np.pi)
    q = r * r / 4.0

    def phase(u):
        return -alpha * np.exp(u) - q * np.exp(-u)

    return _log_integral(phase, np.log(r / (2 * np.sqrt(alpha)))) / (4 * np.pi)


def g_alpha(params, r):
    """Radial damping factor of the drift kernel, ``int_0^inf exp(-s - alpha r^2/(4s)) ds``.

    Equal to one for the Newton kernel; decreasing from 1 towards 0 in ``r``
    otherwise.
    """
    r = _check_radius(r)
    alpha = params.alpha
    if alpha == 0:
        return 1.0
    q = alpha * r * r / 4.0

    def phase(u):
        return u - np.exp(u) - q * np.exp(-u)

    # integrand in u = log s peaks where s**2 - s - q = 0
    split = np.log((1 + np.sqrt(1 + 4 * q)) / 2)
    return min(1.0, _log_integral(phase, split))


def grad_kernel(params, z):
    """Gradient of B_alpha at the nonzero point ``z``."""
    z = np.asarray(z, dtype=float)
    r = float(np.hypot(z[0], z[1]))
    if r == 0:
        raise ValueError("grad_kernel is singular at z = 0")
    return -z / (2 * np.pi * r * r) * g_alpha(params, r)


def kernel_constants(params):
    """L1 norms of B_alpha and its gradient, plus the Lipschitz constant of 1 - g_alpha.

    ``K = 2 pi sup_{0<r<1} r B_1(r)`` does not depend on alpha; the supremum is
    located by golden-section search on (1e-4, 1).
    """
    alpha = params.alpha
    if not alpha > 0:
        raise ValueError("kernel constants are finite only for alpha > 0")
    scale = 1.0 / np.sqrt(alpha)
    # integrate in s = sqrt(alpha) r so the integrands have unit length scale
    l1_B, _ = integrate.quad(
        lambda s: 2 * np.pi * s * bessel_potential(params, s * scale) * scale**2,
        0, np.inf, epsabs=1e-12, epsrel=1e-10, limit=200,
    )
    l1_gradB, _ = integrate.quad(
        lambda s: g_alpha(params, s * scale) * scale,
        0, np.inf, epsabs=1e-12, epsrel=1e-10, limit=200,
    )
    unit = KernelParams(1.0)
    res = optimize.minimize_scalar(
        lambda r: -r * bessel_potential(unit, r),
        bracket=(1e-4, 0.5, 1.0), method="golden", tol=1e-8,
    )
    sup_rB1 = float(-res.fun)
    return KernelConstants(l1_B=float(l1_B), l1_gradB=float(l1_gradB), K=2 * np.pi * sup_rB1,
                           sup_rB1=sup_rB1)


def convolve_grad(density, targets, params):
    """Quadrature approximation of ``(grad B_alpha * n)(x)`` at each target.

    Parameters
    ----------
    density : iterable of (point, weight, value)
        Quadrature nodes with nonnegative weights and density values.
    targets : (m, 2) array_like
    params : KernelParams

    Returns
    -------
    (m, 2) ndarray
        Pairs closer than 1e-12 are skipped rather than regularized.
    """
    density = list(density)
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    if not density:
        return np.zeros((0, 2))
    pts = np.array([p for p, _, _ in density], dtype=float).reshape(-1, 2)
    weights = np.array([w for _, w, _ in density], dtype=float)
    if np.any(weights < 0):
        raise ValueError("quadrature weights must be nonnegative")
    mass = weights * np.array([v for _, _, v in density], dtype=float)
    out = np.zeros_like(targets)
    for t, x in enumerate(targets):
        d = x - pts
        r = np.hypot(d[:, 0], d[:, 1])
        keep = r >= 1e-12
        d, r, m = d[keep], r[keep], mass[keep]
        if params.alpha == 0:
            g = np.ones_like(r)
        else:
            g = np.array([g_alpha(params, ri) for ri in r])
        out[t] = -(m * g / (2 * np.pi * r * r)) @ d
    return out
