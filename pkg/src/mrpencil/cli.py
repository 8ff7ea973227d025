"""Command-line interface: ``mrpencil <command> [options]``.

Exit codes: 0 success, 1 verification failure, 2 model/input error,
3 numerical failure, 4 unstable pencil.
"""

from __future__ import annotations

import argparse
import itertools
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
from scipy import linalg as sla

from . import __version__
from ._linalg import NumericalError
from .dae_core import (
    BUILTIN_NAMES,
    Dims,
    Event,
    LinearDae,
    ModelError,
    Partition,
    apply_partition,
    builtin_model,
    linearize,
    load_model,
    load_partition,
    reduce_state_matrix,
    save_partition,
)
from .modal import eig_reduced, participation, pf_partition_report
from .multirate import run_multirate, run_reference, trajectory_error, verify_pencil_consistency
from .output import write_csv, write_svg
from .pencil import (
    CORRECTORS,
    LAYOUTS,
    PREDICTORS,
    SchemeSpec,
    analyze,
    assemble_pencil,
    cost_table,
    load_scheme,
    sweep_hf,
    sweep_r,
)

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_MODEL = 2
EXIT_NUMERICAL = 3
EXIT_UNSTABLE = 4

VERIFY_TOL = 1e-9
DEFAULT_DELTA = 20.0


class CliError(Exception):
    def __init__(self, message, code=EXIT_MODEL):
        super().__init__(message)
        self.code = code


# ----------------------------------------------------------------------------
# argument helpers
# ----------------------------------------------------------------------------


def parse_hf_grid(spec: str) -> list:
    """``"start:stop:log|lin:count"`` or a comma-separated list."""
    spec = spec.strip()
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 4:
            raise ModelError(f"grid spec {spec!r} must look like start:stop:log:count")
        try:
            lo, hi, count = float(parts[0]), float(parts[1]), int(parts[3])
        except ValueError as exc:
            raise ModelError(f"bad grid spec {spec!r}") from exc
        if count < 1 or lo <= 0 or hi < lo:
            raise ModelError(f"bad grid spec {spec!r}")
        if parts[2] == "log":
            return [float(v) for v in np.geomspace(lo, hi, count)]
        if parts[2] == "lin":
            return [float(v) for v in np.linspace(lo, hi, count)]
        raise ModelError(f"grid spacing must be 'log' or 'lin', got {parts[2]!r}")
    try:
        vals = [float(v) for v in spec.split(",") if v.strip()]
    except ValueError as exc:
        raise ModelError(f"bad grid list {spec!r}") from exc
    if not vals:
        raise ModelError("grid is empty")
    return vals


def parse_r_grid(spec: str) -> list:
    try:
        vals = [int(v) for v in spec.split(",") if v.strip()]
    except ValueError as exc:
        raise ModelError(f"bad r grid {spec!r}") from exc
    if not vals or any(v < 1 for v in vals):
        raise ModelError("r grid must hold positive integers")
    return vals


def parse_event(spec: str) -> Event:
    try:
        t, name, value = spec.split(":")
        return Event(float(t), name, float(value))
    except ValueError as exc:
        raise ModelError(f"event {spec!r} must look like t:parameter:value") from exc


def _load(args):
    if args.model and args.builtin:
        raise ModelError("give either --model or --builtin, not both")
    if args.model:
        return load_model(args.model)
    if args.builtin:
        return builtin_model(args.builtin)
    raise ModelError("a model is required (--model FILE or --builtin NAME)")


def _partition(args, lin: LinearDae):
    sources = [s for s in (args.partition, args.delta, args.all_fast or None) if s is not None]
    if len(sources) > 1:
        raise ModelError("give exactly one of --partition, --delta, --all-fast")
    if args.partition:
        return load_partition(args.partition, lin.n, lin.m), None
    if args.all_fast:
        return Partition.all_fast(lin.n, lin.m), None
    delta = DEFAULT_DELTA if args.delta is None else args.delta
    rep = pf_partition_report(lin, delta)
    return rep.partition, rep


def _scheme(args) -> SchemeSpec:
    base = load_scheme(args.scheme) if args.scheme else SchemeSpec()
    updates = {}
    for attr in ("predictor", "corrector_fast", "corrector_slow", "interpolation", "epsilon", "max_passes"):
        v = getattr(args, attr, None)
        if v is not None:
            updates[attr] = v
    h_f, h_s, r = getattr(args, "h_f", None), getattr(args, "h_s", None), getattr(args, "r", None)
    if r is None:
        if h_f is not None:
            updates["h_f"] = h_f
        if h_s is not None:
            updates["h_s"] = h_s
    elif h_s is not None:
        if h_f is not None:
            raise ModelError("give at most two of --h-f, --h-s, --r")
        updates["h_s"], updates["h_f"] = h_s, h_s / r
    else:
        hf = base.h_f if h_f is None else h_f
        updates["h_f"], updates["h_s"] = hf, hf * r
    return replace(base, **updates)


def _out(args) -> Path:
    p = Path(args.out_dir)
    try:
        p.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ModelError(f"cannot create output directory {p}: {exc}") from exc
    return p


# ----------------------------------------------------------------------------
# commands
# ----------------------------------------------------------------------------


def cmd_modes(args) -> int:
    model = _load(args)
    lin = linearize(model)
    modes = eig_reduced(reduce_state_matrix(lin))
    pm = participation(lin, modes)
    out = _out(args)
    s = modes.eigenvalues
    write_csv(
        out / "modes.csv",
        ["index", "re", "im", "freq_hz", "zeta"],
        [(i, s[i].real, s[i].imag, modes.frequency_hz[i], modes.damping[i]) for i in range(s.size)],
    )
    cols = list(itertools.chain.from_iterable((f"mode{i}_re", f"mode{i}_im") for i in range(s.size)))
    for fname, names, P in (
        ("participation_states.csv", lin.state_names, pm.P_x),
        ("participation_algebraic.csv", lin.alg_names, pm.P_y),
    ):
        write_csv(
            out / fname,
            ["variable"] + cols,
            [[name] + list(itertools.chain.from_iterable((p.real, p.imag) for p in row)) for name, row in zip(names, P)],
        )
    print(f"{'mode':>4} {'re':>14} {'im':>14} {'f [Hz]':>10} {'zeta':>10}")
    for i in range(s.size):
        print(f"{i:>4} {s[i].real:>14.6g} {s[i].imag:>14.6g} {modes.frequency_hz[i]:>10.4g} {modes.damping[i]:>10.4g}")
    if args.plot:
        write_svg(out / "modes.svg", [("modes", s.real, s.imag)], "Re s [1/s]", "Im s [rad/s]", scatter=True)
    return EXIT_OK


def cmd_partition(args) -> int:
    model = _load(args)
    lin = linearize(model)
    if args.partition or args.all_fast:
        raise ModelError("the partition command computes a partition from --delta")
    delta = DEFAULT_DELTA if args.delta is None else args.delta
    rep = pf_partition_report(lin, delta)
    out = _out(args)
    save_partition(rep.partition, out / "partition.json")
    rows = rep.rows(lin)
    write_csv(
        out / "partition_summary.csv",
        ["variable", "kind", "dominant_re", "dominant_im", "dominant_abs", "class"],
        [
            (name, kind, math.nan if lam is None else lam.real, math.nan if lam is None else lam.imag,
             math.nan if lam is None else abs(lam), cls)
            for name, kind, lam, cls in rows
        ],
    )
    print(f"delta = {delta:g} rad/s")
    print(f"{'variable':<12} {'kind':<10} {'dominant eigenvalue':>28} {'class':>6}")
    for name, kind, lam, cls in rows:
        lam_s = "-" if lam is None else f"{lam.real:.6g}{lam.imag:+.6g}j"
        print(f"{name:<12} {kind:<10} {lam_s:>28} {cls:>6}")
    return EXIT_OK


def _spectrum_rows(res):
    rows = []
    for mm in res.report.matches:
        if mm.s_hat is None:
            rows.append((mm.s.real, mm.s.imag, math.nan, math.nan, math.nan, math.nan, math.nan, math.nan))
        else:
            rows.append((mm.s.real, mm.s.imag, mm.s_hat.real, mm.s_hat.imag, abs(mm.z),
                         mm.rel_deform, mm.re_deform, mm.im_deform))
    return rows


def cmd_pencil(args) -> int:
    model = _load(args)
    lin = linearize(model)
    part, _ = _partition(args, lin)
    scheme = _scheme(args)
    res = analyze(lin, part, scheme, args.layout)
    out = _out(args)
    write_csv(
        out / "spectrum.csv",
        ["re_s", "im_s", "re_s_hat", "im_s_hat", "abs_z", "rel_deform", "re_deform", "im_deform"],
        _spectrum_rows(res),
    )
    z = res.spectrum.z
    order = np.lexsort((z.imag, z.real, -np.abs(z)))
    write_csv(out / "pencil_eigenvalues.csv", ["re_z", "im_z", "abs_z"],
              [(z[i].real, z[i].imag, abs(z[i])) for i in order])
    if args.save_matrices:
        write_csv(out / "F.csv", [f"c{j}" for j in range(res.pair.order)], res.pair.F)
        write_csv(out / "G.csv", [f"c{j}" for j in range(res.pair.order)], res.pair.G)
    rep = res.report
    print(f"layout={args.layout} r={scheme.r} h_f={scheme.h_f:g} h_s={scheme.h_s:g} "
          f"order={res.pair.order} infinite={res.spectrum.n_infinite} zero={res.spectrum.n_zero}")
    print(f"spectral radius {rep.spectral_radius:.12g} -> {'stable' if rep.stable else 'UNSTABLE'}")
    for s in rep.nyquist_warnings:
        print(f"warning: mode {s:.6g} lies beyond the Nyquist limit pi/h_f", file=sys.stderr)
    if args.plot:
        sh = np.array([mm.s_hat for mm in rep.matches if mm.s_hat is not None])
        s = np.array([mm.s for mm in rep.matches])
        write_svg(out / "spectrum.svg", [("s", s.real, s.imag), ("s_hat", sh.real, sh.imag)],
                  "Re [1/s]", "Im [rad/s]", scatter=True)
    return EXIT_OK if rep.stable else EXIT_UNSTABLE


def cmd_sweep(args) -> int:
    model = _load(args)
    lin = linearize(model)
    part, _ = _partition(args, lin)
    scheme = _scheme(args)
    if (args.hf_grid is None) == (args.r_grid is None):
        raise ModelError("give exactly one of --hf-grid and --r-grid")
    if args.hf_grid is not None:
        rows = sweep_hf(lin, part, scheme, parse_hf_grid(args.hf_grid), scheme.r, args.layout)
        xname, xs = "h_f [s]", [row.h_f for row in rows]
    else:
        rows = sweep_r(lin, part, scheme, scheme.h_s, parse_r_grid(args.r_grid), args.layout)
        xname, xs = "r", [row.r for row in rows]
    out = _out(args)
    write_csv(
        out / "sweep.csv",
        ["h_f", "h_s", "r", "dominant_rel_deform", "dominant_re_deform", "dominant_im_deform",
         "spectral_radius", "stable"],
        [row[:8] for row in rows],
    )
    for row in rows:
        if row.error:
            print(f"h_f={row.h_f:g} r={row.r}: {row.error}", file=sys.stderr)
    if args.plot:
        write_svg(out / "sweep.svg", [("rel. deformation", xs, [row.dominant_rel_deform for row in rows])],
                  xname, "dominant mode relative deformation", logx=args.hf_grid is not None, logy=True)
    print(f"{len(rows)} sweep points written to {out / 'sweep.csv'}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    model = _load(args)
    lin = linearize(model)
    part, _ = _partition(args, lin)
    scheme = _scheme(args)
    events = None if args.event is None else tuple(parse_event(e) for e in args.event)
    x0 = None if args.x0 is None else [float(v) for v in args.x0.split(",")]
    traj, res = run_multirate(model, scheme, part, args.t_end, events, x0=x0)
    out = _out(args)
    names = list(traj.variable_names)
    write_csv(out / "trajectory.csv", ["t"] + names,
              (np.concatenate([[t], z]) for t, z in zip(traj.t, traj.z)))
    write_csv(out / "residual.csv", ["t", "res_norm_slow"], zip(res.t, res.res_norm_slow))
    vars_ = args.vars.split(",") if args.vars else []
    for v in vars_:
        if v not in names:
            raise ModelError(f"unknown variable {v!r}")
    if args.reference_step is not None:
        ref = run_reference(model, args.reference_step, args.t_end, events, x0=x0)
        for v in vars_ or names:
            err = trajectory_error(traj, ref, v)
            write_csv(out / f"error_{v}.csv", ["t", "abs_error"], zip(err.t, err.abs_error))
    if args.plot:
        shown = vars_ or names[: min(4, len(names))]
        write_svg(out / "trajectory.svg", [(v, traj.t, traj.column(v)) for v in shown], "t [s]", "value")
        write_svg(out / "residual.svg", [("slow residual", res.t, res.res_norm_slow)], "t [s]",
                  "||g_s||_2")
    passes = [m.passes for m in traj.macro]
    print(f"{len(traj.macro)} macro steps, corrector passes per step: min {min(passes)}, max {max(passes)}")
    return EXIT_OK


def cmd_verify(args) -> int:
    model = _load(args)
    if not isinstance(model, LinearDae):
        raise ModelError("pencil consistency checks need a linear model")
    part, _ = _partition(args, model)
    base = _scheme(args)
    r_grid = parse_r_grid(args.r_grid)
    out = _out(args)
    rows = []
    worst = 0.0
    for pred, cf, cs, r, layout in itertools.product(PREDICTORS, CORRECTORS, CORRECTORS, r_grid, LAYOUTS):
        sc = replace(base, predictor=pred, corrector_fast=cf, corrector_slow=cs, interpolation="linear",
                     max_passes=1).with_steps(base.h_f, r)
        pair = assemble_pencil(apply_partition(model, part), sc, layout)
        if args.corrupt:
            G = pair.G.copy()
            G[0, 0] += 1e-3
            pair = replace(pair, G=G)
        res = verify_pencil_consistency(model, part, sc, args.steps, layout=layout, pair=pair)
        worst = max(worst, res)
        rows.append((pred, cf, cs, r, layout, res))
    write_csv(out / "verify.csv", ["predictor", "corrector_fast", "corrector_slow", "r", "layout", "max_residual"], rows)
    ok = worst <= VERIFY_TOL
    print(f"{len(rows)} configurations, max residual {worst:.3e} ({'PASS' if ok else 'FAIL'} at {VERIFY_TOL:g})")
    return EXIT_OK if ok else EXIT_VERIFY_FAILED


def cmd_cost(args) -> int:
    scheme = _scheme(args)
    if args.dims:
        try:
            n, m, n_f, m_f = (int(v) for v in args.dims.split(","))
        except ValueError as exc:
            raise ModelError("--dims must be n,m,n_f,m_f") from exc
        dims = Dims(n, m, n_f, m_f)
    else:
        model = _load(args)
        lin = linearize(model)
        part, _ = _partition(args, lin)
        dims = part.dims
    rows = []
    for label, table in cost_table(scheme, dims):
        for row in table:
            rows.append((label, row.stage, row.order, row.count))
    _out_dir = _out(args)
    write_csv(_out_dir / "cost.csv", ["scheme", "stage", "order", "count"], rows)
    print(f"n={dims.n} m={dims.m} n_f={dims.n_f} m_f={dims.m_f} r={scheme.r}")
    for label, stage, order, count in rows:
        print(f"{label:<30} {stage:<18} order {order:>4}  x{count}")
    return EXIT_OK


# ----------------------------------------------------------------------------
# parser
# ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("model and output")
    g.add_argument("--model", help="model JSON file")
    g.add_argument("--builtin", choices=BUILTIN_NAMES, help="bundled model name")
    g.add_argument("--partition", help="partition JSON file")
    g.add_argument("--delta", type=float, help=f"participation threshold in rad/s (default {DEFAULT_DELTA:g})")
    g.add_argument("--all-fast", action="store_true", help="single-rate partition")
    g.add_argument("--out-dir", default=".", help="output directory (default: current)")
    g.add_argument("--plot", action="store_true", help="also write SVG figures")

    sch = argparse.ArgumentParser(add_help=False)
    s = sch.add_argument_group("scheme (inline values override --scheme)")
    s.add_argument("--scheme", help="scheme JSON file")
    s.add_argument("--predictor", choices=PREDICTORS)
    s.add_argument("--corrector-fast", dest="corrector_fast", choices=CORRECTORS)
    s.add_argument("--corrector-slow", dest="corrector_slow", choices=CORRECTORS)
    s.add_argument("--interpolation", choices=("linear", "spline"))
    s.add_argument("--h-f", dest="h_f", type=float, help="fast step [s]")
    s.add_argument("--h-s", dest="h_s", type=float, help="slow step [s]")
    s.add_argument("--r", type=int, help="step ratio h_s/h_f")
    s.add_argument("--epsilon", type=float)
    s.add_argument("--max-passes", dest="max_passes", type=int)
    s.add_argument("--layout", choices=LAYOUTS, default="monodromy", help="pencil block arrangement")

    p = argparse.ArgumentParser(prog="mrpencil", description="Multirate DAE scheme analysis")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("modes", parents=[common], help="eigenvalues and participation factors")
    sp.set_defaults(func=cmd_modes)
    sp = sub.add_parser("partition", parents=[common], help="participation-based fast/slow partition")
    sp.set_defaults(func=cmd_partition)
    sp = sub.add_parser("pencil", parents=[common, sch], help="pencil spectrum and mode deformation")
    sp.add_argument("--save-matrices", action="store_true", help="also write F.csv and G.csv")
    sp.set_defaults(func=cmd_pencil)
    sp = sub.add_parser("sweep", parents=[common, sch], help="deformation over h_f or r")
    sp.add_argument("--hf-grid", help='fast-step grid, e.g. "1e-4:5e-3:log:20" (r fixed)')
    sp.add_argument("--r-grid", help='step-ratio grid, e.g. "1,2,5,10" (h_s fixed)')
    sp.set_defaults(func=cmd_sweep)
    sp = sub.add_parser("simulate", parents=[common, sch], help="multirate time-domain simulation")
    sp.add_argument("--t-end", type=float, required=True)
    sp.add_argument("--event", action="append", help="parameter step t:parameter:value (repeatable)")
    sp.add_argument("--x0", help="comma-separated initial states (default: equilibrium)")
    sp.add_argument("--vars", help="comma-separated variables for error series")
    sp.add_argument("--reference-step", type=float, help="also run the single-rate reference with this step")
    sp.set_defaults(func=cmd_simulate)
    sp = sub.add_parser("verify", parents=[common, sch], help="pencil/simulator consistency check")
    sp.add_argument("--r-grid", default="2,5,10")
    sp.add_argument("--steps", type=int, default=5, help="macro steps per configuration")
    sp.add_argument("--corrupt", action="store_true", help="perturb one pencil entry (self-test)")
    sp.set_defaults(func=cmd_verify)
    sp = sub.add_parser("cost", parents=[common, sch], help="factorizations per macro step")
    sp.add_argument("--dims", help="n,m,n_f,m_f instead of a model and partition")
    sp.set_defaults(func=cmd_cost)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except (NumericalError, np.linalg.LinAlgError, sla.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
