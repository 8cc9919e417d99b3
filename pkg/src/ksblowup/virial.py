"""Blow-up bounds and second-moment recursions of the time-discrete model.

Every scheme satisfies, in the whole plane, a scalar recursion for the second
moment ``I_k = int n_k |x|^2 dx``.  Without degradation (``alpha == 0``) the
recursion is an identity with constant increment ``-tau * gamma``; with
degradation only an inequality is available, and :func:`recurse_moment`
follows its worst case (the inequality taken as an equality).
"""
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ProblemData",
    "RungeKutta",
    "SCHEMES",
    "BlowupBounds",
    "MomentTrace",
    "VirialReport",
    "NotApplicableError",
    "blowup_bounds",
    "existence_tau_bound",
    "recurse_moment",
    "check_discrete_virial",
]

SCHEMES = ("euler", "bdf2", "bdf3", "midpoint", "trapezoid")


class NotApplicableError(ValueError):
    """The requested estimate is not available for this scheme."""


@dataclass(frozen=True)
class ProblemData:
    M: float
    I0: float
    alpha: float = 0.0
    normX: float = 0.0

    def __post_init__(self):
        if not self.M > 0:
            raise ValueError(f"mass M must be positive, got {self.M!r}")
        if self.I0 < 0:
            raise ValueError(f"second moment I0 must be nonnegative, got {self.I0!r}")
        if self.alpha < 0:
            raise ValueError(f"alpha must be nonnegative, got {self.alpha!r}")

    @property
    def gamma(self):
        return self.M * (self.M - 8 * math.pi) / (2 * math.pi)

    @property
    def beta(self):
        return math.sqrt(self.alpha) * self.M**1.5 / math.pi


@dataclass(frozen=True)
class RungeKutta:
    """Generic s-stage Runge-Kutta tableau with nonnegative weights summing to one."""

    b: tuple
    a: tuple = ()

    def __post_init__(self):
        b = np.asarray(self.b, dtype=float)
        if b.ndim != 1 or b.size == 0 or np.any(b < 0) or abs(b.sum() - 1) > 1e-12:
            raise ValueError("Runge-Kutta weights must be nonnegative and sum to 1")
        if self.a and np.shape(self.a) != (b.size, b.size):
            raise ValueError("Runge-Kutta matrix must be s x s")


def _scheme_name(scheme):
    if isinstance(scheme, RungeKutta):
        return "rk"
    name = str(scheme).lower()
    if name not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES} or RungeKutta")
    return name


@dataclass
class BlowupBounds:
    """Analytic blow-up data for given problem data and time step.

    ``T_star``, ``k_max`` and the integer reports are ``None`` when the mass
    is not supercritical (no blow-up guarantee) or, for ``alpha > 0``, when
    the denominator of the bound is not positive.
    """

    gamma: float
    beta: float
    I_star: float | None
    tau_star: float | None
    T_star: float | None
    k_max: float | None
    k_max_floor: int | None
    k_max_nearest: int | None
    supercritical: bool
    hypotheses_ok: bool

    @property
    def finite(self):
        return self.k_max is not None


def blowup_bounds(data, tau):
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau!r}")
    M, I0, alpha = data.M, data.I0, data.alpha
    gamma, beta = data.gamma, data.beta
    supercritical = M > 8 * math.pi
    if alpha > 0 and supercritical:
        I_star = (M - 8 * math.pi) ** 2 / (4 * alpha * M)
        tau_star = math.pi * (M - 8 * math.pi) / (2 * alpha * M**2)
        hypotheses_ok = I0 <= I_star and tau < tau_star
    else:
        I_star = tau_star = None
        hypotheses_ok = supercritical

    T_star = None
    if supercritical:
        denom = M * (M - 8 * math.pi - 2 * math.sqrt(alpha * M * I0))
        if denom > 0:
            T_star = 2 * math.pi * I0 / denom
    if T_star is None:
        k_max = k_floor = k_near = None
    else:
        k_max = T_star / tau
        k_floor, k_near = math.floor(k_max), round(k_max)
    return BlowupBounds(
        gamma=gamma, beta=beta, I_star=I_star, tau_star=tau_star, T_star=T_star,
        k_max=k_max, k_max_floor=k_floor, k_max_nearest=k_near,
        supercritical=supercritical, hypotheses_ok=hypotheses_ok,
    )


def existence_tau_bound(scheme, normX):
    """Largest time step for which the existence results of the scheme apply.

    For BDF-2 pass ``normX = ||2 n_{k-1} - n_{k-2}/2||_X``.
    """
    if normX < 0:
        raise ValueError("normX must be nonnegative")
    base = 1.0 / ((math.pi + 0.5) ** 2 * (normX + 1) ** 4)
    name = _scheme_name(scheme)
    if name == "euler":
        return base
    if name == "bdf2":
        return 1.5 * base
    raise NotApplicableError(f"no existence time-step bound for scheme {scheme!r}")


@dataclass
class MomentTrace:
    k: np.ndarray
    I: np.ndarray
    first_negative: int | None = None

    def __len__(self):
        return len(self.I)

    @classmethod
    def from_values(cls, values, k0=0):
        values = np.asarray(values, dtype=float)
        k = np.arange(k0, k0 + len(values))
        neg = np.flatnonzero(values < 0)
        return cls(k=k, I=values, first_negative=int(k[neg[0]]) if neg.size else None)


def _sqrt_root(p, c):
    """Largest x >= 0 with x**2 - p x - c = 0, or None if there is no real root."""
    disc = p * p + 4 * c
    if disc < 0:
        return None
    return 0.5 * (p + math.sqrt(disc))


def recurse_moment(scheme, data, tau, max_steps):
    """Second-moment sequence I_0, I_1, ... of the semi-discrete scheme.

    For ``alpha == 0`` the sequence is exact.  For ``alpha > 0`` it is the
    worst-case envelope: the largest ``I_k >= 0`` allowed by the scheme's
    inequality.  When no nonnegative ``I_k`` is allowed, the explicit part of
    the relation (then negative) is recorded instead.  Iteration stops at the
    first negative value.
    """
    name = _scheme_name(scheme)
    if max_steps < 1:
        raise ValueError("max_steps must be positive")
    if not tau > 0:
        raise ValueError("tau must be positive")
    alpha, gamma, beta = data.alpha, data.gamma, data.beta
    if alpha > 0 and name in ("bdf3", "rk"):
        raise NotApplicableError(
            f"no second-moment estimate for scheme {scheme!r} with alpha > 0"
        )
    b_sum = float(np.sum(scheme.b)) if name == "rk" else 1.0

    I = [float(data.I0)]
    for k in range(1, max_steps + 1):
        prev = I[-1]
        if alpha == 0:
            if name == "bdf2" and k >= 2:
                nxt = prev + (prev - I[-2]) / 3 - 2 * tau * gamma / 3
            elif name == "bdf3" and k >= 3:
                nxt = (18 * prev - 9 * I[-2] + 2 * I[-3] - 6 * tau * gamma) / 11
            elif name == "bdf3" and k == 2:
                nxt = prev + (prev - I[-2]) / 3 - 2 * tau * gamma / 3
            else:
                nxt = prev - tau * gamma * b_sum
        else:
            # x = sqrt(I_k) solves x**2 - p x - c = 0
            if name == "bdf2" and k >= 2:
                p = 2 * tau * beta / 3
                c = prev + (prev - I[-2]) / 3 - 2 * tau * gamma / 3
            elif name == "midpoint":
                p = tau * beta / 2
                c = prev + tau * (beta * math.sqrt(prev) - 2 * gamma) / 2
            elif name == "trapezoid":
                p = tau * beta / 4
                c = prev - tau * gamma + tau * beta * math.sqrt(prev) / 4
            else:
                p = tau * beta
                c = prev - tau * gamma
            x = _sqrt_root(p, c)
            nxt = c if x is None else x * x
        I.append(nxt)
        if nxt < 0:
            break
    return MomentTrace.from_values(I)


@dataclass
class VirialReport:
    """Per-step residuals ``lhs - rhs`` of the scheme's moment relation.

    ``residuals[i]`` belongs to step ``steps[i]``.  Identities (``alpha ==
    0``) fail where ``|residual| > tol``; inequalities where ``residual > tol``.
    """

    steps: np.ndarray
    residuals: np.ndarray
    identity: bool
    tol: float
    flagged: list = field(default_factory=list)

    @property
    def passed(self):
        return not self.flagged


def check_discrete_virial(trace, scheme, data, tau, tol=1e-12):
    """Check a given moment sequence against the scheme's moment relation.

    ``trace`` is a :class:`MomentTrace` or a plain sequence of values starting
    at ``k = 0``.  The BDF schemes use the Euler relation for their startup
    steps (BDF-3: Euler, then BDF-2), matching :func:`recurse_moment`.
    """
    I = np.asarray(trace.I if isinstance(trace, MomentTrace) else trace, dtype=float)
    name = _scheme_name(scheme)
    if I.size < 2:
        raise ValueError(f"need at least two moment values, got {I.size}")
    alpha, gamma, beta = data.alpha, data.gamma, data.beta
    if alpha > 0 and name in ("bdf3", "rk"):
        raise NotApplicableError(f"no moment inequality for scheme {scheme!r} with alpha > 0")
    b_sum = float(np.sum(scheme.b)) if name == "rk" else 1.0

    def f(s):
        return beta * math.sqrt(max(s, 0.0)) - gamma

    res = np.empty(I.size - 1)
    for k in range(1, I.size):
        dI = I[k] - I[k - 1]
        bdf2_step = (name == "bdf2" and k >= 2) or (name == "bdf3" and k == 2)
        if name == "bdf3" and k >= 3:
            rhs = (7 * (I[k - 1] - I[k - 2]) - 2 * (I[k - 2] - I[k - 3]) - 6 * tau * gamma) / 11
        elif bdf2_step:
            rhs = (I[k - 1] - I[k - 2]) / 3 + 2 * tau * f(I[k]) / 3
        elif name == "midpoint":
            rhs = tau * (f(I[k]) + f(I[k - 1])) / 2
        elif name == "trapezoid":
            rhs = -tau * gamma + tau * beta * (math.sqrt(max(I[k], 0)) + math.sqrt(max(I[k - 1], 0))) / 4
        else:
            rhs = tau * f(I[k]) * b_sum if alpha > 0 else -tau * gamma * b_sum
        res[k - 1] = dI - rhs
    identity = alpha == 0
    bad = np.abs(res) > tol if identity else res > tol
    steps = np.arange(1, I.size)
    return VirialReport(steps=steps, residuals=res, identity=identity, tol=tol,
                        flagged=[int(s) for s in steps[bad]])
