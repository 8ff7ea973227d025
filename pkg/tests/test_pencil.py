import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mrpencil.dae_core import Dims, LinearDae, ModelError, Partition, apply_partition, builtin_model
from mrpencil.modal import eig_reduced, pf_partition
from mrpencil.multirate import run_multirate
from mrpencil.pencil import (
    CORRECTORS,
    LAYOUTS,
    PREDICTORS,
    CostRow,
    PencilPair,
    SchemeSpec,
    analyze,
    assemble_pencil,
    deformation_report,
    factorization_cost,
    load_scheme,
    method_params,
    save_scheme,
    single_rate_pencil,
    solve_pencil,
    step_blocks,
    sweep_hf,
    sweep_r,
)


def rho_tm(h_lambda):
    return (1 + h_lambda / 2) / (1 - h_lambda / 2)


def finite_sorted(z):
    z = np.asarray(z, complex)
    return np.sort_complex(z[np.abs(z) > 1e-12])


def bare_pair(F, G, h_f=1.0):
    n = np.asarray(F).shape[0]
    return PencilPair(np.asarray(F, float), np.asarray(G, float), 1, h_f, Dims(n, 0, n, 0), "test")


# ----------------------------------------------------------------------------
# scheme description
# ----------------------------------------------------------------------------


def test_scheme_validation():
    with pytest.raises(ModelError):
        SchemeSpec(h_f=1e-3, h_s=2.5e-3)
    with pytest.raises(ModelError):
        SchemeSpec(h_f=1e-3, h_s=5e-4)
    with pytest.raises(ModelError):
        SchemeSpec(corrector_fast="FEM")
    with pytest.raises(ModelError):
        SchemeSpec(epsilon=0.0)
    with pytest.raises(ModelError):
        SchemeSpec(max_passes=0)
    assert SchemeSpec(h_f=0.1, h_s=0.3).r == 3
    assert SchemeSpec(predictor="fem", interpolation="cubic").predictor == "FEM"


def test_scheme_file_round_trip(tmp_path):
    sc = SchemeSpec(predictor="BEM", corrector_slow="BEM", interpolation="spline", h_f=2e-3, h_s=1e-2)
    save_scheme(sc, tmp_path / "s.json")
    assert load_scheme(tmp_path / "s.json") == sc
    (tmp_path / "bad.json").write_text('{"predictor": "TM", "order": 2}')
    with pytest.raises(ModelError):
        load_scheme(tmp_path / "bad.json")


def test_method_params_fem_predictor():
    p = method_params(SchemeSpec(predictor="FEM", h_f=0.005, h_s=0.05))
    assert (p.a, p.a_star) == (0.05, 0.0)


def test_method_params_trapezoidal():
    p = method_params(SchemeSpec(h_f=0.001, h_s=0.01))
    assert p == pytest.approx((0.005, 0.005, 0.0005, 0.0005, 0.005, 0.005))


def test_method_params_backward_euler():
    p = method_params(SchemeSpec("BEM", "BEM", "BEM", h_f=0.001, h_s=0.01))
    assert p == pytest.approx((0.0, 0.01, 0.0, 0.001, 0.0, 0.01))


@settings(max_examples=50, deadline=None)
@given(
    pred=st.sampled_from(PREDICTORS), cf=st.sampled_from(CORRECTORS), cs=st.sampled_from(CORRECTORS),
    h_f=st.floats(1e-5, 1.0), r=st.integers(1, 50),
)
def test_weights_sum_to_step(pred, cf, cs, h_f, r):
    sc = SchemeSpec(pred, cf, cs).with_steps(h_f, r)
    p = method_params(sc)
    assert p.a + p.a_star == pytest.approx(sc.h_s)
    assert p.b + p.b_star == pytest.approx(sc.h_f)
    assert p.c + p.c_star == pytest.approx(sc.h_s)


# ----------------------------------------------------------------------------
# QZ and deformation
# ----------------------------------------------------------------------------


def test_diagonal_pencil():
    spec = solve_pencil(bare_pair(np.eye(2), np.diag([0.5, 0.9])))
    np.testing.assert_allclose(np.sort(spec.z.real), [0.5, 0.9])
    assert spec.n_infinite == 0


def test_singular_f_filters_infinite_pair():
    spec = solve_pencil(bare_pair(np.diag([1.0, 0.0]), np.eye(2)))
    np.testing.assert_allclose(spec.z, [1.0])
    assert spec.n_infinite == 1


def test_exact_exponential_has_no_deformation():
    spec = solve_pencil(bare_pair([[1.0]], [[math.exp(-0.1)]], h_f=0.1))
    rep = deformation_report([-1.0], spec)
    m = rep.matches[0]
    assert m.s_hat == pytest.approx(-1.0, abs=1e-14)
    assert m.rel_deform < 1e-14


def test_single_rate_trapezoidal_analytic_oracle():
    lin = LinearDae([[-1.0]], np.zeros((1, 0)), np.zeros((0, 1)), np.zeros((0, 0)))
    spec = solve_pencil(single_rate_pencil(lin, "TM", 0.1))
    np.testing.assert_allclose(spec.z, [0.9047619048], atol=1e-10)
    oracle = math.log(rho_tm(-0.1)) / 0.1
    m = deformation_report([-1.0], spec).matches[0]
    assert m.s_hat.real == pytest.approx(oracle, rel=1e-12)
    assert m.s_hat.real == pytest.approx(-1.0008346, abs=1e-7)
    assert m.rel_deform == pytest.approx(abs(oracle + 1.0), rel=1e-9)


@pytest.mark.parametrize("layout", LAYOUTS)
def test_decoupled2_fast_mode_closed_form(layout):
    lin = builtin_model("decoupled2")
    res = analyze(lin, pf_partition(lin, 10.0), SchemeSpec().with_steps(1e-3, 10), layout)
    m = res.report.match_for(-50.0)
    assert m.z.real == pytest.approx(rho_tm(-0.05), abs=1e-10)
    assert m.s_hat.real == pytest.approx(math.log(rho_tm(-0.05)) / 1e-3, rel=1e-12)
    assert m.s_hat.real == pytest.approx(-50.0104, abs=1e-4)
    assert m.rel_deform == pytest.approx(2.08e-4, abs=1e-6)


def test_nyquist_flag():
    spec = solve_pencil(bare_pair([[1.0]], [[-0.5]], h_f=0.1))
    rep = deformation_report([-7.0 + 40j], spec)
    assert rep.matches[0].nyquist or rep.nyquist_warnings


def test_matching_uses_each_eigenvalue_once():
    spec = solve_pencil(bare_pair(np.eye(3), np.diag([0.9, 0.5, 0.1]), h_f=0.1))
    rep = deformation_report([-1.0, -1.1, -7.0], spec)
    used = [m.z for m in rep.matches if m.z is not None]
    assert len(set(np.round(used, 12))) == len(used)


# ----------------------------------------------------------------------------
# pencil assembly
# ----------------------------------------------------------------------------


@pytest.mark.parametrize("name", ["decoupled2", "coupled_stiff"])
@pytest.mark.parametrize("corrector", CORRECTORS)
def test_unit_ratio_matches_single_rate(name, corrector):
    lin = builtin_model(name)
    sc = SchemeSpec(corrector, corrector, corrector).with_steps(0.01, 1)
    ref = finite_sorted(solve_pencil(single_rate_pencil(lin, corrector, 0.01)).z)
    for layout in LAYOUTS:
        got = finite_sorted(solve_pencil(assemble_pencil(apply_partition(lin, pf_partition(lin, 20.0)), sc, layout)).z)
        np.testing.assert_allclose(got, ref, atol=1e-9)


@pytest.mark.parametrize("corrector", CORRECTORS)
def test_all_fast_reproduces_single_rate_recurrence(corrector):
    lin = builtin_model("coupled_stiff")
    h, r = 2e-3, 5
    sc = SchemeSpec("TM", corrector, corrector).with_steps(h, r)
    pdae = apply_partition(lin, Partition.all_fast(2, 2))
    single = finite_sorted(solve_pencil(single_rate_pencil(lin, corrector, h)).z)
    for z in finite_sorted(solve_pencil(assemble_pencil(pdae, sc, "stepwise")).z):
        assert np.min(np.abs(single - z)) < 1e-10
    # the monodromy layout holds the r-th roots of the macro multipliers
    for z in finite_sorted(solve_pencil(assemble_pencil(pdae, sc, "monodromy")).z):
        assert np.min(np.abs(single**r - z**r)) < 1e-10


def test_stepwise_layout_block_triangular():
    lin = builtin_model("coupled_stiff")
    sc = SchemeSpec("FEM").with_steps(1e-3, 4)
    pair = assemble_pencil(apply_partition(lin, pf_partition(lin, 20.0)), sc, "stepwise")
    N, r = 4, 4
    sb = pair.blocks
    for k in range(r):
        for j in range(r):
            Fkj = pair.F[k * N:(k + 1) * N, j * N:(j + 1) * N]
            Gkj = pair.G[k * N:(k + 1) * N, j * N:(j + 1) * N]
            if j != k:
                assert not Fkj.any()
            if j not in (k, r - 1):
                assert not Gkj.any()
        diag = sb.Z_r if k == 0 else sb.Z[r - k]
        np.testing.assert_array_equal(pair.F[k * N:(k + 1) * N, k * N:(k + 1) * N], diag)


@pytest.mark.parametrize("pred", PREDICTORS)
def test_monodromy_spectrum_is_rth_root_of_simulated_macro_map(pred):
    lin = builtin_model("coupled_stiff")
    part = pf_partition(lin, 20.0)
    r = 5
    sc = SchemeSpec(pred, max_passes=1).with_steps(2e-3, r)
    columns = []
    for k in range(lin.n):
        traj, _ = run_multirate(lin, sc, part, sc.h_s, events=(), x0=np.eye(lin.n)[k])
        columns.append(traj.x[r])
    multipliers = np.linalg.eigvals(np.column_stack(columns))
    spec = solve_pencil(assemble_pencil(apply_partition(lin, part), sc))
    powers = finite_sorted(spec.z) ** r
    assert powers.size == r * lin.n
    assert spec.n_zero == r * lin.m
    for p in powers:
        assert np.min(np.abs(multipliers - p)) < 1e-10
    for mu in multipliers:
        assert np.min(np.abs(powers - mu)) < 1e-10


def test_spline_interpolation_rejected():
    lin = builtin_model("decoupled2")
    with pytest.raises(ModelError):
        assemble_pencil(apply_partition(lin, pf_partition(lin, 10.0)), SchemeSpec(interpolation="spline"))


def test_unknown_layout_rejected():
    lin = builtin_model("decoupled2")
    with pytest.raises(ModelError):
        assemble_pencil(apply_partition(lin, pf_partition(lin, 10.0)), SchemeSpec(), "diagonal")


def test_slow_prediction_maps_empty_blocks():
    lin = builtin_model("coupled_stiff")
    sb = step_blocks(apply_partition(lin, Partition.all_slow(2, 2)), SchemeSpec().with_steps(1e-3, 2))
    assert sb.maps.H3.shape == (2, 2)
    sb = step_blocks(apply_partition(lin, Partition.all_fast(2, 2)), SchemeSpec().with_steps(1e-3, 2))
    assert sb.maps.H3.shape == (0, 0)


@settings(max_examples=20, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1), pred=st.sampled_from(PREDICTORS),
    cf=st.sampled_from(CORRECTORS), cs=st.sampled_from(CORRECTORS), r=st.integers(1, 6),
    layout=st.sampled_from(LAYOUTS),
)
def test_finite_spectrum_conjugate_closed(seed, pred, cf, cs, r, layout):
    rng = np.random.default_rng(seed)
    lin = LinearDae(
        rng.standard_normal((3, 3)) - 2 * np.eye(3), rng.standard_normal((3, 2)),
        rng.standard_normal((2, 3)), rng.standard_normal((2, 2)) + 3 * np.eye(2),
    )
    part = Partition.from_fast(3, 2, [int(rng.integers(3))], [int(rng.integers(2))])
    z = finite_sorted(solve_pencil(assemble_pencil(apply_partition(lin, part),
                                                   SchemeSpec(pred, cf, cs).with_steps(0.01, r), layout)).z)
    scale = max(1.0, np.abs(z).max(initial=0.0))
    for v in z:
        assert np.min(np.abs(z - np.conj(v))) <= 1e-8 * scale


# ----------------------------------------------------------------------------
# sweeps
# ----------------------------------------------------------------------------


def test_single_point_sweep_equals_direct_analysis():
    lin = builtin_model("coupled_stiff")
    part = pf_partition(lin, 20.0)
    row = sweep_hf(lin, part, SchemeSpec(), [2e-4], 10)[0]
    res = analyze(lin, part, SchemeSpec().with_steps(2e-4, 10))
    assert row.dominant_rel_deform == res.dominant_match.rel_deform
    assert row.spectral_radius == res.report.spectral_radius


def test_tm_deformation_shrinks_with_step():
    lin = builtin_model("coupled_stiff")
    rows = sweep_hf(lin, pf_partition(lin, 20.0), SchemeSpec(), np.geomspace(1e-4, 1e-3, 6), 10)
    d = [r.dominant_rel_deform for r in rows]
    assert all(a < b for a, b in zip(d, d[1:]))


def test_fem_large_step_unstable():
    lin = builtin_model("coupled_stiff")
    part = Partition.from_fast(2, 2, [0, 1], [])
    rows = sweep_hf(lin, part, SchemeSpec("FEM"), [10.0], 10)
    assert rows[0].spectral_radius > 1 and not rows[0].stable


def test_fem_r_sweep_not_monotone():
    lin = builtin_model("coupled_stiff")
    d = [row.dominant_rel_deform
         for row in sweep_r(lin, pf_partition(lin, 20.0), SchemeSpec("FEM"), 0.5, [1, 2, 3, 4, 5, 10])]
    steps = np.diff(d)
    assert (steps > 0).any() and (steps < 0).any()


def test_tm_r_sweep_stable():
    lin = builtin_model("coupled_stiff")
    rows = sweep_r(lin, pf_partition(lin, 20.0), SchemeSpec(), 0.5, [1, 2, 5, 10, 20])
    assert all(row.stable and np.isfinite(row.dominant_rel_deform) for row in rows)


def test_unit_ratio_sweep_row_matches_single_rate():
    lin = builtin_model("coupled_stiff")
    row = sweep_r(lin, pf_partition(lin, 20.0), SchemeSpec(), 0.01, [1])[0]
    spec = solve_pencil(single_rate_pencil(lin, "TM", 0.01))
    modes = eig_reduced(lin.f_x - lin.f_y @ np.linalg.solve(lin.g_y, lin.g_x))
    rep = deformation_report(modes, spec, 0.01)
    dom = rep.match_for(min(modes.eigenvalues, key=lambda s: -s.real))
    assert row.dominant_rel_deform == pytest.approx(dom.rel_deform, rel=1e-9)


def test_sweep_rejects_spline_and_empty_grid():
    lin = builtin_model("decoupled2")
    part = pf_partition(lin, 10.0)
    with pytest.raises(ModelError):
        sweep_hf(lin, part, SchemeSpec(interpolation="spline"), [1e-3], 2)
    with pytest.raises(ValueError):
        sweep_hf(lin, part, SchemeSpec(), [], 2)


# ----------------------------------------------------------------------------
# factorization cost
# ----------------------------------------------------------------------------


DIMS = Dims(10, 20, 3, 4)


def test_cost_explicit_predictor():
    rows = factorization_cost(SchemeSpec("FEM").with_steps(1e-3, 10), DIMS)
    assert rows == [CostRow("predict_slow_alg", 16, 1), CostRow("fast", 7, 10), CostRow("slow", 23, 1)]


def test_cost_implicit_predictor():
    rows = factorization_cost(SchemeSpec("TM").with_steps(1e-3, 10), DIMS)
    assert rows == [CostRow("full", 30, 1), CostRow("fast", 7, 10), CostRow("slow", 23, 1)]


def test_cost_single_rate():
    rows = factorization_cost(SchemeSpec().with_steps(1e-3, 5), DIMS, multirate=False)
    assert rows == [CostRow("full", 30, 5)]


def test_cost_unit_ratio_explicit():
    rows = factorization_cost(SchemeSpec("FEM").with_steps(1e-3, 1), DIMS)
    assert [(r.order, r.count) for r in rows] == [(16, 1), (7, 1), (23, 1)]


def test_cost_auxiliary_row():
    rows = factorization_cost(SchemeSpec("FEM").with_steps(1e-3, 10), DIMS, auxiliary=True)
    assert rows[0] == CostRow("predict_fast_alg", 4, 1)
