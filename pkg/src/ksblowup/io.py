"""Experiment configuration, presets, initial data and file outputs.

Configuration files are plain ``key = value`` text.  Blank lines and lines
starting with ``#`` are ignored.  Numbers may be written as ``6pi`` or
``pi`` for multiples of pi.  Recognized keys::

    name       free text
    domain     x0 x1 y0 y1
    a          subdivisions per side
    scheme     euler | bdf2 | bdf3 | midpoint | trapezoid
    tau, eps, m_max, alpha, solver
    t_end      end time (or use max_steps)
    max_steps  number of steps
    bump       x0 y0 M theta [weight]      (repeatable)
    snapshot_every
    output_dir
    taus       space-separated study steps (convergence runs)
    tau_ref    reference step (convergence runs)
"""
from dataclasses import dataclass, fields, replace
import csv
import math
import os

import numpy as np

from .diagnostics import SERIES_COLUMNS
from .mesh import build_uniform
from .virial import SCHEMES

__all__ = [
    "ConfigError",
    "OutputError",
    "GaussianBump",
    "ExperimentConfig",
    "gaussian_init",
    "presets",
    "load_config",
    "save_config",
    "write_snapshot",
    "write_series",
    "write_svg_plot",
    "write_convergence_plot",
    "mesh_for_h",
    "ensure_dir",
]


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""

    def __init__(self, message, path=None, lineno=None):
        where = ""
        if path is not None:
            where = f"{path}:{lineno}: " if lineno is not None else f"{path}: "
        super().__init__(where + message)
        self.path = path
        self.lineno = lineno


class OutputError(OSError):
    """Writing an output file failed."""


@dataclass(frozen=True)
class GaussianBump:
    """``weight * M / (2 pi theta) * exp(-|x - (x0, y0)|^2 / (2 theta))``."""

    x0: float
    y0: float
    M: float
    theta: float
    weight: float = 1.0

    def __post_init__(self):
        if not (self.M > 0 and self.theta > 0 and self.weight > 0):
            raise ValueError("bump mass, variance and weight must be positive")

    @property
    def mass(self):
        return self.weight * self.M

    def __call__(self, x, y):
        r2 = (x - self.x0) ** 2 + (y - self.y0) ** 2
        return self.weight * self.M / (2 * math.pi * self.theta) * np.exp(-r2 / (2 * self.theta))


def gaussian_init(mesh, bumps):
    """Nodal interpolation of a sum of Gaussian bumps."""
    x, y = mesh.vertices[:, 0], mesh.vertices[:, 1]
    n = np.zeros(mesh.n_vertices)
    for b in bumps:
        n += b(x, y)
    return n


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "custom"
    domain: tuple = ((0.0, 1.0), (0.0, 1.0))
    a: int = 64
    scheme: str = "bdf2"
    tau: float = 5e-5
    eps: float = 1e-4
    m_max: int = 10
    alpha: float = 1.0
    solver: str = "direct"
    t_end: float | None = None
    max_steps: int | None = None
    bumps: tuple = ()
    snapshot_every: int = 100
    output_dir: str = "out"
    taus: tuple = ()
    tau_ref: float | None = None

    def __post_init__(self):
        (x0, x1), (y0, y1) = self.domain
        if not (x1 > x0 and y1 > y0):
            raise ValueError(f"degenerate domain {self.domain!r}")
        if self.a < 1:
            raise ValueError("a must be at least 1")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.solver not in ("direct", "bicgstab"):
            raise ValueError(f"unknown linear solver {self.solver!r}")
        for key in ("tau", "eps", "alpha"):
            if not getattr(self, key) > 0:
                raise ValueError(f"{key} must be positive")
        if self.m_max < 1 or self.snapshot_every < 0:
            raise ValueError("m_max must be >= 1 and snapshot_every >= 0")
        if self.t_end is not None and not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if self.max_steps is not None and self.max_steps < 1:
            raise ValueError("max_steps must be positive")
        for b in self.bumps:
            if not (x0 < b.x0 < x1 and y0 < b.y0 < y1):
                raise ValueError(f"bump center ({b.x0}, {b.y0}) outside the domain")
        if any(t <= 0 for t in self.taus) or (self.tau_ref is not None and self.tau_ref <= 0):
            raise ValueError("study steps must be positive")

    @property
    def mass(self):
        return sum(b.mass for b in self.bumps)

    @property
    def n_steps(self):
        if self.max_steps is not None:
            return self.max_steps
        if self.t_end is None:
            raise ValueError("config has neither t_end nor max_steps")
        return int(round(self.t_end / self.tau))

    def mesh(self):
        return build_uniform(self.domain, self.a)

    def initial(self, mesh=None):
        return gaussian_init(self.mesh() if mesh is None else mesh, self.bumps)

    def scheme_config(self):
        from .integrators import SchemeConfig

        return SchemeConfig(kind=self.scheme, tau=self.tau, eps=self.eps, m_max=self.m_max,
                            alpha=self.alpha, solver=self.solver)


def mesh_for_h(length, h):
    """Smallest ``a`` whose cell diagonal ``sqrt(2) * length / a`` is at most ``h``."""
    return math.ceil(math.sqrt(2) * length / h - 1e-9)


def presets():
    """Named configurations of the numerical experiments."""
    M, theta = 6 * math.pi, 1 / 500
    four = tuple(GaussianBump(x, y, M, theta) for x, y in
                 ((0.33, 0.33), (0.33, 0.66), (0.66, 0.33), (0.66, 0.66)))
    three = (GaussianBump(0.33, 0.66, M, theta, 1 / 3), GaussianBump(0.33, 0.33, M, theta, 1 / 2),
             GaussianBump(0.66, 0.66, M, theta, 1.0))
    base = ExperimentConfig(a=64, scheme="bdf2", tau=5e-5, eps=1e-4, m_max=10, alpha=1.0)
    return {
        "example1": replace(base, name="example1", bumps=four, t_end=0.02),
        "example2": replace(base, name="example2", bumps=three, t_end=0.1001),
        "convergence": replace(base, name="convergence", bumps=four, t_end=0.01,
                               taus=(4e-4, 2e-4, 1e-4), tau_ref=1e-6),
        "blowup": ExperimentConfig(
            name="blowup", domain=((0.0, 2.0), (0.0, 2.0)), a=mesh_for_h(2.0, 0.02),
            scheme="bdf2", tau=1e-5, eps=1e-4, m_max=10, alpha=1.0, max_steps=200,
            bumps=(GaussianBump(1.0, 1.0, 30 * math.pi, theta),),
        ),
    }


def _number(tok):
    tok = tok.strip().lower()
    if tok.endswith("pi"):
        head = tok[:-2].rstrip("*")
        return (float(head) if head else 1.0) * math.pi
    return float(tok)


def _floats(text, count=None):
    vals = [_number(t) for t in text.split()]
    if count is not None and len(vals) not in count:
        raise ValueError(f"expected {' or '.join(map(str, count))} numbers, got {len(vals)}")
    return vals


_INT_KEYS = {"a", "m_max", "max_steps", "snapshot_every"}
_FLOAT_KEYS = {"tau", "eps", "alpha", "t_end", "tau_ref"}
_STR_KEYS = {"name", "scheme", "solver", "output_dir"}
_KEYS = _INT_KEYS | _FLOAT_KEYS | _STR_KEYS | {"domain", "bump", "taus"}


def load_config(path):
    """Parse a ``key = value`` file into an :class:`ExperimentConfig`."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", path) from exc
    values, bumps = {}, []
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", path, lineno)
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"unknown key {key!r}", path, lineno)
        try:
            if key == "bump":
                x0, y0, M, th, *w = _floats(val, (4, 5))
                bumps.append(GaussianBump(x0, y0, M, th, *w))
                continue
            if key in values:
                raise ValueError(f"duplicate key {key!r}")
            if key == "domain":
                x0, x1, y0, y1 = _floats(val, (4,))
                values[key] = ((x0, x1), (y0, y1))
            elif key == "taus":
                values[key] = tuple(_floats(val))
            elif key in _INT_KEYS:
                values[key] = int(val)
            elif key in _FLOAT_KEYS:
                values[key] = _number(val)
            else:
                values[key] = val
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}", path, lineno) from exc
    try:
        return ExperimentConfig(bumps=tuple(bumps), **values)
    except ValueError as exc:
        raise ConfigError(str(exc), path) from exc


def save_config(config, path):
    """Write ``config`` so that :func:`load_config` returns an equal object."""
    out = []
    for f in fields(config):
        v = getattr(config, f.name)
        if f.name == "bumps":
            out += [f"bump = {b.x0!r} {b.y0!r} {b.M!r} {b.theta!r} {b.weight!r}" for b in v]
        elif f.name == "domain":
            (x0, x1), (y0, y1) = v
            out.append(f"domain = {x0!r} {x1!r} {y0!r} {y1!r}")
        elif f.name == "taus":
            if v:
                out.append("taus = " + " ".join(repr(float(t)) for t in v))
        elif v is not None:
            out.append(f"{f.name} = {v!r}" if not isinstance(v, str) else f"{f.name} = {v}")
    _write_text(path, "\n".join(out) + "\n")


def _write_text(path, text):
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OutputError(exc.errno, f"cannot write {path}: {exc.strerror}") from exc


def _fmt(v):
    # repr of a Python float is locale independent and round-trips
    return repr(float(v))


def write_snapshot(values, mesh, path):
    """Header with domain and ``a``, then one row of nodal values per grid line."""
    grid = mesh.grid(values)
    (x0, x1), (y0, y1) = mesh.domain
    lines = [f"# domain {_fmt(x0)} {_fmt(x1)} {_fmt(y0)} {_fmt(y1)}", f"# a {mesh.a}"]
    lines += [" ".join(_fmt(v) for v in row) for row in grid]
    _write_text(path, "\n".join(lines) + "\n")


def write_series(records, path):
    """CSV with columns ``k, t, mass, I, linf, min, energy``."""
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SERIES_COLUMNS)
            for r in records:
                k, *rest = r.row()
                w.writerow([int(k)] + [_fmt(v) for v in rest])
    except OSError as exc:
        raise OutputError(exc.errno, f"cannot write {path}: {exc.strerror}") from exc


def _figure():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "ksblowup"
    return plt


def _savefig(plt, fig, path):
    try:
        fig.savefig(path, format="svg", metadata={"Date": None})
    except OSError as exc:
        raise OutputError(exc.errno, f"cannot write {path}: {exc.strerror}") from exc
    finally:
        plt.close(fig)


def write_svg_plot(records, path, k_max=None, tau=None, title=None):
    """L-infinity norm and second moment against time.

    When ``k_max`` and ``tau`` are given, both panels get a vertical line at
    ``t = k_max * tau`` (element ids ``kmax-marker-linf`` and ``kmax-marker-I``).
    """
    plt = _figure()
    t = [r.t for r in records]
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
    for ax, key, label in zip(axes, ("linf", "I"), (r"$\|n_k\|_\infty$", r"$I_k$")):
        ax.plot(t, [getattr(r, key) for r in records], lw=1.2)
        ax.set_xlabel("t")
        ax.set_ylabel(label)
        if k_max is not None and tau is not None and math.isfinite(k_max):
            ax.axvline(k_max * tau, color="k", ls="--", lw=0.8, gid=f"kmax-marker-{key}")
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    _savefig(plt, fig, path)


def write_convergence_plot(report, path):
    """Log-log plot of the L^p errors against the time step."""
    plt = _figure()
    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    for p, errs in report.errors.items():
        lab = "inf" if p == np.inf else str(p)
        ax.loglog(report.taus, errs, "o-", label=f"p={lab} ({report.orders[p]:.2f})")
    ax.set_xlabel(r"$\tau$")
    ax.set_ylabel(r"$e_p$")
    ax.legend(fontsize=8)
    fig.tight_layout()
    _savefig(plt, fig, path)


def ensure_dir(path):
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise OutputError(exc.errno, f"cannot create {path}: {exc.strerror}") from exc
    return path
