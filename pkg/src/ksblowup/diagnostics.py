"""Monitored quantities, blow-up plateau detection and temporal convergence studies.

All integrals use the lumped quadrature ``int f ~ sum_i m_i f(P_i)`` with
``m_i`` the dual-cell areas.
"""
from dataclasses import dataclass, field
import math

import numpy as np

__all__ = [
    "DiagRecord",
    "PlateauReport",
    "ConvergenceReport",
    "mass",
    "centroid",
    "second_moment",
    "free_energy",
    "lp_norm",
    "diag_record",
    "blowup_indicator",
    "convergence_study",
    "fit_order",
]

SERIES_COLUMNS = ("k", "t", "mass", "I", "linf", "min", "energy")


@dataclass(frozen=True)
class DiagRecord:
    k: int
    t: float
    mass: float
    I: float
    linf: float
    min: float
    energy: float

    def row(self):
        return (self.k, self.t, self.mass, self.I, self.linf, self.min, self.energy)


def mass(n, lumped):
    return float(np.dot(lumped, n))


def centroid(n, lumped, vertices):
    m = mass(n, lumped)
    if m == 0:
        raise ValueError("centroid of a field with zero mass")
    return (lumped * n) @ vertices / m


def second_moment(n, lumped, vertices, center=(0.0, 0.0)):
    d = vertices - np.asarray(center, dtype=float)
    return float(np.dot(lumped * n, np.einsum("id,id->i", d, d)))


def free_energy(n, c, lumped, neg_tol=1e-12):
    """``sum_i m_i (n_i (log n_i - 1) - c_i n_i / 2)`` with ``0 log 0 = 0``.

    Values in ``[-neg_tol, 0)`` are treated as zero; anything more negative
    is rejected.
    """
    n = np.asarray(n, dtype=float)
    if n.size and n.min() < -neg_tol:
        raise ValueError(f"free energy needs a nonnegative density, min = {n.min():.3e}")
    n = np.maximum(n, 0.0)
    ent = np.zeros_like(n)
    pos = n > 0
    ent[pos] = n[pos] * (np.log(n[pos]) - 1)
    return float(np.dot(lumped, ent - 0.5 * np.asarray(c) * n))


def lp_norm(v, lumped, p):
    v = np.abs(np.asarray(v, dtype=float))
    if p == np.inf or p == "inf":
        return float(v.max())
    return float(np.dot(lumped, v**p) ** (1.0 / p))


def diag_record(k, t, n, lumped, vertices, center, c=None):
    """Diagnostics of one state; ``c`` is the chemical field used for the energy.

    The energy is NaN when ``c`` is missing or the density is significantly
    negative.
    """
    energy = math.nan
    if c is not None:
        try:
            energy = free_energy(n, c, lumped, neg_tol=1e-12 * max(1.0, float(np.abs(n).max())))
        except ValueError:
            pass
    return DiagRecord(
        k=int(k), t=float(t), mass=mass(n, lumped),
        I=second_moment(n, lumped, vertices, center),
        linf=float(np.abs(n).max()), min=float(n.min()), energy=energy,
    )


@dataclass
class PlateauReport:
    k_plateau: int | None
    k_max: float | None
    window: int
    rel_tol: float

    @property
    def found(self):
        return self.k_plateau is not None

    @property
    def ratio(self):
        if self.k_plateau is None or not self.k_max:
            return None
        return self.k_plateau / self.k_max


def blowup_indicator(records, bounds=None, window=5, rel_tol=1e-3):
    """First step after which the L-infinity norm stays flat over ``window`` steps.

    The plateau step is the smallest ``k`` with
    ``max(linf[k:k+window+1]) - min(...) < rel_tol * linf[k]``.
    """
    records = list(records)
    if not records:
        raise ValueError("empty diagnostics trace")
    linf = np.array([r.linf for r in records])
    ks = [r.k for r in records]
    k_plat = None
    for s in range(len(linf) - window):
        w = linf[s:s + window + 1]
        if w.max() - w.min() < rel_tol * linf[s]:
            k_plat = ks[s]
            break
    k_max = None if bounds is None else bounds.k_max
    return PlateauReport(k_plateau=k_plat, k_max=k_max, window=window, rel_tol=rel_tol)


def fit_order(taus, errors):
    """Least-squares slope of ``log(error)`` against ``log(tau)``."""
    slope, _ = np.polyfit(np.log(taus), np.log(errors), 1)
    return float(slope)


@dataclass
class ConvergenceReport:
    taus: list
    errors: dict = field(default_factory=dict)
    orders: dict = field(default_factory=dict)
    tau_ref: float | None = None
    T: float | None = None

    def rows(self):
        ps = list(self.errors)
        for idx, tau in enumerate(self.taus):
            yield (tau, *(self.errors[p][idx] for p in ps))


def convergence_study(problem, scheme_config, n0, taus, tau_ref, T, ps=(1, 2, 4, np.inf), workers=None):
    """Temporal errors at time ``T`` against a fine-step reference solution.

    ``workers`` > 1 runs the trajectories in separate processes.
    """
    from dataclasses import replace

    from .integrators import final_state

    taus = sorted((float(t) for t in taus), reverse=True)
    if not tau_ref < min(taus):
        raise ValueError("reference step must be smaller than every study step")
    for tau in taus + [tau_ref]:
        steps = T / tau
        if abs(steps - round(steps)) > 1e-6 * steps:
            raise ValueError(f"T = {T} is not a multiple of tau = {tau}")
    configs = [replace(scheme_config, tau=tau) for tau in [tau_ref] + taus]
    nsteps = [round(T / c.tau) for c in configs]
    if workers and workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            finals = list(pool.map(final_state, [problem] * len(configs), configs,
                                   [n0] * len(configs), nsteps))
    else:
        finals = [final_state(problem, c, n0, s) for c, s in zip(configs, nsteps)]
    ref, rest = finals[0], finals[1:]
    report = ConvergenceReport(taus=taus, tau_ref=tau_ref, T=T)
    for p in ps:
        errs = [lp_norm(n - ref, problem.lumped, p) for n in rest]
        report.errors[p] = errs
        report.orders[p] = fit_order(taus, errs) if len(taus) > 1 else math.nan
    return report
