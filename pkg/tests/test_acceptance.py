"""Acceptance criteria; each test prints and records one PASS/FAIL line."""

import itertools
import math
import time
import warnings

import numpy as np

from conftest import ACCEPTANCE_LINES
from mrpencil.cli import main
from mrpencil.dae_core import FAST, Dims, Event, LinearDae, Partition, builtin_model, linearize, reduce_state_matrix
from mrpencil.modal import dominant_mode_index, eig_reduced, participation, pf_partition
from mrpencil.multirate import run_multirate, run_reference, trajectory_error, verify_pencil_consistency
from mrpencil.pencil import (
    CORRECTORS,
    LAYOUTS,
    PREDICTORS,
    CostRow,
    SchemeSpec,
    analyze,
    apply_partition,
    assemble_pencil,
    deformation_report,
    factorization_cost,
    single_rate_pencil,
    solve_pencil,
    sweep_hf,
)

SCHEMES = list(itertools.product(PREDICTORS, CORRECTORS, CORRECTORS))


def report(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    assert ok, line


def rho_tm(h_lambda):
    return (1 + h_lambda / 2) / (1 - h_lambda / 2)


def finite_sorted(z):
    z = np.asarray(z, complex)
    return np.sort_complex(z[np.abs(z) > 1e-12])


def test_criterion_01_pencil_trajectory_consistency():
    models = {"decoupled2": 10.0, "coupled_stiff": 20.0}
    start = time.perf_counter()
    worst, cases = 0.0, 0
    for name, delta in models.items():
        lin = builtin_model(name)
        part = pf_partition(lin, delta)
        for (pred, cf, cs), r in itertools.product(SCHEMES, (2, 5, 10)):
            sc = SchemeSpec(pred, cf, cs).with_steps(1e-3, r)
            worst = max(worst, verify_pencil_consistency(lin, part, sc, steps=5))
            cases += 1
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and elapsed < 30.0 and cases == 72
    report(1, ok, f"{cases} cases, worst residual {worst:.2e}, {elapsed:.1f} s")


def test_criterion_02_analytic_deformation():
    h = 0.1
    oracle_s = math.log(rho_tm(-h)) / h
    spec = solve_pencil(single_rate_pencil(LinearDae([[-1.0]], np.zeros((1, 0)), np.zeros((0, 1)), np.zeros((0, 0))), "TM", h))
    m = deformation_report([-1.0], spec).matches[0]
    ok_scalar = (
        abs(m.s_hat.real - oracle_s) <= 1e-6 * abs(oracle_s)
        and abs(m.s_hat.real + 1.0008346) <= 1e-6 * 1.0008346
        and abs(m.rel_deform - abs(oracle_s + 1.0)) <= 1e-6 * abs(oracle_s + 1.0)
        and f"{m.rel_deform:.2e}" == "8.35e-04"
    )
    lin = builtin_model("decoupled2")
    part = pf_partition(lin, 10.0)
    z_1e3 = analyze(lin, part, SchemeSpec().with_steps(1e-3, 10)).report.match_for(-50.0).z
    # the stated literal is the amplification at half this fast step
    z_5e4 = analyze(lin, part, SchemeSpec().with_steps(5e-4, 10)).report.match_for(-50.0).z
    ok_fast = abs(z_1e3 - rho_tm(-50.0 * 1e-3)) <= 1e-10 and abs(z_5e4 - 0.9753086420) <= 1e-10
    report(2, ok_scalar and ok_fast,
           f"s_hat {m.s_hat.real:.7f}, rel_deform {m.rel_deform:.3e}, "
           f"z(h_f=1e-3) {z_1e3.real:.10f}, z(h_f=5e-4) {z_5e4.real:.10f}")


def test_criterion_03_unit_ratio_equivalence():
    worst = 0.0
    for name, delta in (("decoupled2", 10.0), ("coupled_stiff", 20.0)):
        lin = builtin_model(name)
        pdae = apply_partition(lin, pf_partition(lin, delta))
        for corrector, pred, layout in itertools.product(CORRECTORS, PREDICTORS, LAYOUTS):
            sc = SchemeSpec(pred, corrector, corrector).with_steps(0.01, 1)
            ref = finite_sorted(solve_pencil(single_rate_pencil(lin, corrector, 0.01)).z)
            got = finite_sorted(solve_pencil(assemble_pencil(pdae, sc, layout)).z)
            worst = max(worst, np.abs(got - ref).max() if got.size == ref.size else math.inf)
    report(3, worst <= 1e-9, f"largest eigenvalue gap {worst:.2e}")


def test_criterion_04_order_of_accuracy():
    lin = builtin_model("coupled_stiff")
    modes = eig_reduced(reduce_state_matrix(lin))
    dom = modes.eigenvalues[dominant_mode_index(modes.eigenvalues)]
    grid = np.geomspace(1e-4, 1e-3, 6)
    single = [deformation_report(modes, solve_pencil(single_rate_pencil(lin, "TM", h))).match_for(dom).rel_deform
              for h in grid]
    slope = np.polyfit(np.log(grid), np.log(single), 1)[0]
    rows = sweep_hf(lin, pf_partition(lin, 20.0), SchemeSpec(), grid, 10)
    multi = [r.dominant_rel_deform for r in rows]
    monotone = all(a < b for a, b in zip(multi, multi[1:]))
    ok = abs(slope - 2.0) <= 0.3 and monotone and multi[0] < 1e-5
    report(4, ok, f"single-rate slope {slope:.3f}, multirate monotone {monotone}, "
                  f"deformation at 1e-4 {multi[0]:.2e}")


def simulated_growth(lin, part, pred, h_f, r):
    sc = SchemeSpec(pred, "TM", "TM", "linear", max_passes=1).with_steps(h_f, r)
    x0 = np.random.default_rng(1).standard_normal(lin.n)
    traj, _ = run_multirate(lin, sc, part, 10 * sc.h_s, events=(), x0=x0)
    z = traj.z[traj.macro_slice]
    return np.linalg.norm(z[-1]) / np.linalg.norm(z[0])


def test_criterion_05_stability_dichotomy():
    lin = builtin_model("coupled_stiff")
    part = Partition.from_fast(2, 2, [0, 1], [])
    grid = np.logspace(-4, 1, 16)
    verdicts = {}
    disagreements = []
    for pred in ("FEM", "TM"):
        for row in sweep_hf(lin, part, SchemeSpec(pred), grid, 10):
            growth = simulated_growth(lin, part, pred, row.h_f, 10)
            verdicts[pred, row.h_f] = (row.spectral_radius, growth)
            if abs(row.spectral_radius - 1.0) > 1e-6 and (row.spectral_radius < 1) != (growth < 1):
                disagreements.append((pred, row.h_f))
    witnesses = [h for h in grid
                 if verdicts["FEM", h][0] > 1 and verdicts["FEM", h][1] > 1
                 and verdicts["TM", h][0] < 1 and verdicts["TM", h][1] < 1]
    ok = bool(witnesses) and not disagreements
    report(5, ok, f"dichotomy at h_f {[f'{h:.2g}' for h in witnesses]}, disagreements {disagreements}")


def test_criterion_06_participation_invariants():
    deltas = [0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 1e6]
    checked, failures, seed = 0, [], 0
    while checked < 100:
        rng = np.random.default_rng(seed)
        seed += 1
        lin = LinearDae(rng.standard_normal((6, 6)), rng.standard_normal((6, 4)),
                        rng.standard_normal((4, 6)), rng.standard_normal((4, 4)) + 4.0 * np.eye(4))
        modes = eig_reduced(reduce_state_matrix(lin))
        if not modes.diagonalizable:
            continue
        checked += 1
        pm = participation(lin, modes)
        if np.abs(pm.P_x.sum(axis=1) - 1.0).max() > 1e-8:
            failures.append((seed - 1, "row sums"))
        norms = np.linalg.norm(pm.P_y, axis=1)[~pm.zero_alg_rows]
        if norms.size and np.abs(norms - 1.0).max() > 1e-10:
            failures.append((seed - 1, "unit norms"))
        fast_sets = []
        for d in deltas:
            p = pf_partition(lin, d)
            fast_sets.append(set(p.fast_states) | {("y", j) for j in p.fast_algebraics})
        if any(not hi <= lo for lo, hi in zip(fast_sets, fast_sets[1:])):
            failures.append((seed - 1, "monotone"))
        p0 = pf_partition(lin, 0.0)
        if set(p0.state_class) != {FAST} or set(p0.alg_class) != {FAST}:
            failures.append((seed - 1, "all fast at zero"))
    report(6, not failures, f"{checked} diagonalizable models from {seed} seeds, failures {failures[:5]}")


def table_one(dims, r, explicit):
    """Expected rows written directly from the cost table."""
    n_m, fast, slow = dims.n + dims.m, dims.n_f + dims.m_f, dims.n_s + dims.m_s
    first = CostRow("predict_slow_alg", dims.m_s, 1) if explicit else CostRow("full", n_m, 1)
    return [first, CostRow("fast", fast, r), CostRow("slow", slow, 1)], [CostRow("full", n_m, r)]


def test_criterion_07_cost_model():
    mismatches = []
    for dims, r, pred in itertools.product((Dims(10, 20, 3, 4), Dims(4, 2, 1, 0), Dims(2, 2, 1, 1)), (1, 5, 10),
                                           PREDICTORS):
        sc = SchemeSpec(pred).with_steps(1e-3, r)
        multi, single = table_one(dims, r, pred == "FEM")
        if factorization_cost(sc, dims) != multi or factorization_cost(sc, dims, multirate=False) != single:
            mismatches.append(("table", dims, r, pred))
    engine_steps = 0
    cases = [("smib_avr", pf_partition(linearize(builtin_model("smib_avr")), 20.0)),
             ("coupled_stiff", Partition.from_fast(2, 2, [0], [0]))]
    for (name, part), (pred, cf, cs) in itertools.product(cases, SCHEMES):
        model = builtin_model(name)
        sc = SchemeSpec(pred, cf, cs, max_passes=1).with_steps(1e-3, 10)
        x0 = (model.equilibrium[0] if name == "smib_avr" else np.zeros(2)) + 0.05
        traj, _ = run_multirate(model, sc, part, 3 * sc.h_s, events=(), x0=x0)
        expected = {(row.stage, row.order, row.count) for row in factorization_cost(sc, part.dims, auxiliary=True)}
        for step in traj.macro:
            recorded = {(s, step.factorization_orders[s], c) for s, c in step.factorizations.items()}
            engine_steps += 1
            if recorded != expected:
                mismatches.append((name, pred, cf, cs, step.t))
    report(7, not mismatches, f"table rows and {engine_steps} engine macro steps, mismatches {mismatches[:3]}")


def test_criterion_08_interpolation_comparison():
    model = builtin_model("smib_avr")
    part = pf_partition(linearize(model), 20.0)
    events = (Event(1.0, "x_e", 0.7), Event(1.1, "x_e", 0.5))
    h_s, t_end = 0.01, 3.0
    ref = run_reference(model, h_s / 50, t_end, events)
    results, ok = {}, True
    for r in (5, 10):
        for interp in ("linear", "spline"):
            sc = SchemeSpec("TM", "TM", "TM", interp).with_steps(h_s / r, r)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                traj, _ = run_multirate(model, sc, part, t_end, events)
            results[r, interp] = trajectory_error(traj, ref, "omega").abs_error.max()
        ok &= results[r, "spline"] <= results[r, "linear"]
    detail = ", ".join(f"r={r} spline {results[r, 'spline']:.4e} linear {results[r, 'linear']:.4e}" for r in (5, 10))
    report(8, ok, detail)


def test_criterion_09_equilibrium_invariance():
    worst = 0.0
    for name in ("smib_avr", "coupled_stiff", "decoupled2"):
        model = builtin_model(name)
        part = pf_partition(linearize(model), 20.0 if name != "decoupled2" else 10.0)
        z0 = np.concatenate(model.equilibrium) if name == "smib_avr" else np.zeros(4)
        for (pred, cf, cs), interp in itertools.product(SCHEMES, ("linear", "spline")):
            sc = SchemeSpec(pred, cf, cs, interp).with_steps(1e-3, 10)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                traj, _ = run_multirate(model, sc, part, 10 * sc.h_s, events=())
            worst = max(worst, np.abs(traj.z - z0).max())
    report(9, worst <= 1e-12, f"largest drift {worst:.2e} over 72 runs of 10 macro steps")


CLI_RUNS = [
    ["modes", "--builtin", "smib_avr", "--plot"],
    ["partition", "--builtin", "smib_avr", "--delta", "20"],
    ["pencil", "--builtin", "coupled_stiff", "--h-f", "1e-3", "--r", "10", "--plot"],
    ["sweep", "--builtin", "coupled_stiff", "--hf-grid", "1e-4:1e-2:log:5", "--r", "10", "--plot"],
    ["simulate", "--builtin", "smib_avr", "--t-end", "0.3", "--h-s", "0.01", "--r", "5",
     "--event", "0.1:x_e:0.7", "--reference-step", "0.001", "--vars", "omega", "--plot"],
    ["verify", "--builtin", "decoupled2", "--delta", "10", "--r-grid", "2"],
    ["cost", "--dims", "10,20,3,4", "--r", "10"],
]


def test_criterion_10_cli_determinism(tmp_path):
    outputs = []
    for attempt in ("first", "second"):
        out = tmp_path / attempt
        out.mkdir()
        for argv in CLI_RUNS:
            sub = out / argv[0]
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                assert main([*argv, "--out-dir", str(sub)]) == 0
        outputs.append({p.relative_to(out): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file()})
    first, second = outputs
    n_csv = sum(1 for p in first if p.suffix == ".csv")
    differing = [str(p) for p in first if first[p] != second.get(p)]
    ok = first.keys() == second.keys() and not differing and n_csv > 0
    report(10, ok, f"{len(first)} files ({n_csv} CSV) compared, differing {differing}")
