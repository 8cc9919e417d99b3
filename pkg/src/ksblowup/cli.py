"""Command-line entry point.

Exit codes: 0 success, 1 input error, 2 solver failure.
"""
import argparse
import csv
from dataclasses import replace
import logging
import math
import os
import sys

import numpy as np

from . import io as kio
from .assembly import SolverError
from .virial import SCHEMES, ProblemData, blowup_bounds, existence_tau_bound, recurse_moment

EXIT_OK, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2

log = logging.getLogger("ksblowup")


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; that code is reserved for solver failures
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _num(text):
    try:
        return kio._number(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")


def bump_moments(bumps):
    """Mass and second moment about the mass centroid of a sum of Gaussians in the plane."""
    M = sum(b.mass for b in bumps)
    cx = sum(b.mass * b.x0 for b in bumps) / M
    cy = sum(b.mass * b.y0 for b in bumps) / M
    I0 = sum(b.mass * (2 * b.theta + (b.x0 - cx) ** 2 + (b.y0 - cy) ** 2) for b in bumps)
    return M, I0


def _experiment(args):
    if args.config:
        cfg = kio.load_config(args.config)
    else:
        table = kio.presets()
        if args.preset not in table:
            raise InputError(f"unknown preset {args.preset!r}; choose from {sorted(table)}")
        cfg = table[args.preset]
    over = {k: getattr(args, k) for k in ("a", "scheme", "tau", "max_steps", "t_end", "solver")
            if getattr(args, k, None) is not None}
    if "t_end" in over and "max_steps" not in over:
        over["max_steps"] = None
    if args.out:
        over["output_dir"] = args.out
    return replace(cfg, **over) if over else cfg


def cmd_run(args):
    from .diagnostics import blowup_indicator
    from .integrators import FEMProblem, run

    cfg = _experiment(args)
    out = kio.ensure_dir(cfg.output_dir)
    kio.save_config(cfg, os.path.join(out, "config.txt"))
    mesh = cfg.mesh()
    problem = FEMProblem(mesh, alpha=cfg.alpha)
    n0 = cfg.initial(mesh)
    M, I0 = bump_moments(cfg.bumps)
    bounds = blowup_bounds(ProblemData(M=M, I0=I0, alpha=cfg.alpha), cfg.tau)

    print(f"{cfg.name}: a={cfg.a} h={mesh.h:.4g} scheme={cfg.scheme} tau={cfg.tau:g} "
          f"steps={cfg.n_steps} mass={problem.lumped @ n0:.6g}")
    traj = run(problem, cfg.scheme_config(), n0, max_steps=cfg.n_steps,
               snapshot_every=cfg.snapshot_every or None)
    kio.write_series(traj.records, os.path.join(out, "series.csv"))
    for k, field in sorted(traj.snapshots.items()):
        kio.write_snapshot(field, mesh, os.path.join(out, f"snapshot_{k:06d}.txt"))
    kio.write_svg_plot(traj.records, os.path.join(out, "linf_I.svg"), k_max=bounds.k_max,
                       tau=cfg.tau, title=cfg.name)

    last = traj.records[-1]
    print(f"steps done {traj.steps}, t={last.t:.6g}, linf={last.linf:.6g}, I={last.I:.6g}, "
          f"min={min(r.min for r in traj.records):.3e}")
    if bounds.finite:
        plat = blowup_indicator(traj.records, bounds)
        print(f"k_max={bounds.k_max:.4f} plateau={plat.k_plateau}")
    bad = sum(not r.converged for r in traj.reports)
    if bad:
        print(f"warning: Picard iteration hit m_max in {bad} steps")
    print(f"outputs written to {out}")
    if traj.status != "ok":
        print(f"solver failure: {traj.error}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def cmd_bounds(args):
    if args.preset:
        cfg = kio.presets().get(args.preset)
        if cfg is None:
            raise InputError(f"unknown preset {args.preset!r}")
        M, I0 = bump_moments(cfg.bumps)
        alpha = cfg.alpha if args.alpha is None else args.alpha
        tau = cfg.tau if args.tau is None else args.tau
    else:
        if args.M is None or args.I0 is None or args.tau is None:
            raise InputError("give --preset or all of --M, --I0, --tau")
        M, I0, tau = args.M, args.I0, args.tau
        alpha = 0.0 if args.alpha is None else args.alpha
    b = blowup_bounds(ProblemData(M=M, I0=I0, alpha=alpha), tau)
    rows = [("M", M), ("I0", I0), ("alpha", alpha), ("tau", tau), ("gamma", b.gamma),
            ("beta", b.beta), ("I_star", b.I_star), ("tau_star", b.tau_star), ("T_star", b.T_star),
            ("k_max", b.k_max), ("k_max_floor", b.k_max_floor), ("k_max_nearest", b.k_max_nearest),
            ("supercritical", b.supercritical), ("hypotheses_ok", b.hypotheses_ok)]
    if args.normX is not None:
        for s in ("euler", "bdf2"):
            rows.append((f"tau_exist_{s}", existence_tau_bound(s, args.normX)))
    for key, val in rows:
        print(f"{key},{'' if val is None else val}")
    return EXIT_OK


def cmd_virial(args):
    data = ProblemData(M=args.M, I0=args.I0, alpha=args.alpha)
    trace = recurse_moment(args.scheme, data, args.tau, args.steps)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(("k", "I"))
    for k, v in zip(trace.k, trace.I):
        w.writerow((int(k), repr(float(v))))
    b = blowup_bounds(data, args.tau)
    print(f"# first_negative={trace.first_negative} k_max={b.k_max}")
    return EXIT_OK


def cmd_kernel_check(args):
    from .kernels import KernelParams, kernel_constants

    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(("alpha", "l1_B", "exact_l1_B", "l1_gradB", "exact_l1_gradB", "K", "sup_rB1"))
    for a in args.alpha:
        if not a > 0:
            raise InputError(f"kernel constants need alpha > 0, got {a}")
        c = kernel_constants(KernelParams(a))
        w.writerow((a, f"{c.l1_B:.12g}", f"{1 / a:.12g}", f"{c.l1_gradB:.12g}",
                    f"{math.pi / (2 * math.sqrt(a)):.12g}", f"{c.K:.8g}", f"{c.sup_rB1:.8g}"))
    return EXIT_OK


def cmd_convergence(args):
    from .diagnostics import convergence_study
    from .integrators import FEMProblem, SchemeConfig

    cfg = kio.presets()["convergence"]
    a = cfg.a if args.a is None else args.a
    taus = cfg.taus if args.taus is None else tuple(args.taus)
    tau_ref = cfg.tau_ref if args.tau_ref is None else args.tau_ref
    T = cfg.t_end if args.T is None else args.T
    mesh = kio.build_uniform(cfg.domain, a)
    problem = FEMProblem(mesh, alpha=cfg.alpha)
    sc = SchemeConfig(kind=args.scheme, tau=taus[0], eps=cfg.eps, m_max=cfg.m_max, alpha=cfg.alpha)
    rep = convergence_study(problem, sc, kio.gaussian_init(mesh, cfg.bumps), taus, tau_ref, T,
                            workers=args.workers)
    ps = list(rep.errors)
    names = ["inf" if p == np.inf else f"{p:g}" for p in ps]
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["tau"] + [f"e_{n}" for n in names])
    for row in rep.rows():
        w.writerow([f"{row[0]:g}"] + [f"{e:.6e}" for e in row[1:]])
    w.writerow(["order"] + [f"{rep.orders[p]:.4f}" for p in ps])
    if args.out:
        kio.ensure_dir(args.out)
        kio.write_convergence_plot(rep, os.path.join(args.out, f"convergence_{args.scheme}.svg"))
    return EXIT_OK


def build_parser():
    p = _Parser(prog="ksblowup", description="Keller-Segel blow-up bounds and upwind FEM simulations")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run a preset or a config file")
    g = r.add_mutually_exclusive_group(required=True)
    g.add_argument("--preset", help="example1, example2, convergence or blowup")
    g.add_argument("--config", help="key = value configuration file")
    r.add_argument("--out", help="output directory")
    r.add_argument("--a", type=int, help="subdivisions per side")
    r.add_argument("--scheme", choices=SCHEMES)
    r.add_argument("--tau", type=_num, help="time step")
    r.add_argument("--max-steps", type=int, help="step limit")
    r.add_argument("--t-end", type=_num, help="final time")
    r.add_argument("--solver", choices=("direct", "bicgstab"))
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("bounds", help="blow-up time and index bounds")
    b.add_argument("--preset", help="take M, I0, alpha and tau from a preset")
    b.add_argument("--M", type=_num, help="initial mass, e.g. 6pi")
    b.add_argument("--I0", type=_num, help="initial second moment")
    b.add_argument("--alpha", type=_num, help="degradation rate")
    b.add_argument("--tau", type=_num, help="time step")
    b.add_argument("--normX", type=_num, help="also print the existence step bounds")
    b.set_defaults(func=cmd_bounds)

    v = sub.add_parser("virial", help="second-moment recursion of a scheme")
    v.add_argument("--scheme", choices=SCHEMES, default="euler")
    v.add_argument("--M", type=_num, required=True)
    v.add_argument("--I0", type=_num, required=True)
    v.add_argument("--alpha", type=_num, default=0.0)
    v.add_argument("--tau", type=_num, required=True)
    v.add_argument("--steps", type=int, default=1000, help="step limit")
    v.set_defaults(func=cmd_virial)

    k = sub.add_parser("kernel-check", help="Bessel kernel constants against closed forms")
    k.add_argument("--alpha", type=_num, nargs="+", default=[1.0], help="degradation rates to check")
    k.set_defaults(func=cmd_kernel_check)

    c = sub.add_parser("convergence", help="temporal convergence study on the first example")
    c.add_argument("--scheme", choices=SCHEMES, default="bdf2")
    c.add_argument("--a", type=int, help="subdivisions per side")
    c.add_argument("--taus", type=_num, nargs="+", help="study time steps")
    c.add_argument("--tau-ref", type=_num, help="reference time step")
    c.add_argument("--T", type=_num, help="comparison time")
    c.add_argument("--workers", type=int, default=1, help="worker processes")
    c.add_argument("--out", help="directory for the SVG plot")
    c.set_defaults(func=cmd_convergence)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (InputError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
