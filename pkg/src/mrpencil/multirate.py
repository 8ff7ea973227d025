"""Literal two-rate predictor/corrector integration of semi-explicit DAEs.

Each macro step of length ``h_s = r h_f``:

1. predict the values at ``t + h_s`` (FEM, TM or BEM over ``h_s``, then solve the
   algebraic constraints);
2. interpolate the slow variables at the micro steps (linear or natural cubic spline);
3. integrate the fast subsystem over micro steps ``1 .. r-1`` with the fast corrector;
4. solve the last micro step for fast and slow variables together, the slow states
   with the slow corrector over ``h_s``;
5. compare the slow result with the prediction and, if the mismatch exceeds
   ``epsilon``, repeat 2-4 with the slow result as the new prediction.

Newton solves reuse one Jacobian factorization per solve (dishonest Newton) and
fall back to refactorizing every iteration after five non-improving iterations.
Factorizations are counted per stage so that the cost model can be checked.
"""

from __future__ import annotations

import math
import warnings
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from ._linalg import LU, NumericalError
from .dae_core import Event, LinearDae, ModelError, NonlinearModel, Partition
from .pencil import (
    STAGE_FAST,
    STAGE_FULL,
    STAGE_PREDICT_FAST_ALG,
    STAGE_PREDICT_SLOW_ALG,
    STAGE_SLOW,
    PencilPair,
    SchemeSpec,
    apply_partition,
    assemble_pencil,
    _weights,
)

NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 20
STAGNATION_LIMIT = 5
#: relative update size treated as converged at round-off level
ROUNDOFF_STEP = 1e-14

#: stage label of the algebraic re-solve after a parameter event
STAGE_EVENT = "event"


class NewtonError(NumericalError):
    """Newton iteration failed to reach the residual tolerance."""


class PassLimitWarning(UserWarning):
    """Corrector passes hit ``max_passes`` with the mismatch still above ``epsilon``."""


# ----------------------------------------------------------------------------
# Newton machinery
# ----------------------------------------------------------------------------


class FactorizationLog:
    """Counts Jacobian factorizations by stage label."""

    def __init__(self):
        self.counts = Counter()
        self.orders = {}

    def record(self, stage: str, order: int):
        self.counts[stage] += 1
        self.orders[stage] = order

    def snapshot(self) -> dict:
        return dict(self.counts)


class _StepSolver:
    """Factorized step Jacobian, optionally split into two diagonal blocks.

    With ``split = (first, second)`` (index arrays into the unknown vector) the
    solve eliminates the first block and factorizes its Schur complement, so
    two factorizations of the block orders are recorded.
    """

    def __init__(self, J, labels, log: FactorizationLog, split=None):
        self.split = split
        if split is None:
            self.lu = LU(J, f"{labels[0]} step Jacobian")
            log.record(labels[0], J.shape[0])
            return
        a, b = split
        J11, J12 = J[np.ix_(a, a)], J[np.ix_(a, b)]
        J21, J22 = J[np.ix_(b, a)], J[np.ix_(b, b)]
        self.lu1 = LU(J11, f"{labels[0]} step Jacobian")
        log.record(labels[0], a.size)
        self.X = self.lu1.solve(J12)
        self.J21 = J21
        self.lu2 = LU(J22 - J21 @ self.X, f"{labels[1]} step Jacobian (Schur complement)")
        log.record(labels[1], b.size)

    def solve(self, rhs):
        if self.split is None:
            return self.lu.solve(rhs)
        a, b = self.split
        u1 = self.lu1.solve(rhs[a])
        u2 = self.lu2.solve(rhs[b] - self.J21 @ u1)
        out = np.empty_like(rhs)
        out[a] = u1 - self.X @ u2
        out[b] = u2
        return out


@dataclass(frozen=True)
class NewtonOptions:
    tol: float = NEWTON_TOL
    max_iter: int = NEWTON_MAX_ITER
    dishonest: bool = True
    stagnation_limit: int = STAGNATION_LIMIT


def newton(residual: Callable, jacobian: Callable, u0, labels, log: FactorizationLog,
           split=None, options: NewtonOptions = NewtonOptions()):
    """Solve ``residual(u) = 0`` starting from ``u0``.

    The Jacobian is factorized once at ``u0``.  After ``stagnation_limit``
    iterations without a decrease of the residual infinity norm every further
    iteration refactorizes (full Newton).

    Returns
    -------
    u : ndarray
    iterations : int
    """
    u = np.array(u0, dtype=float)
    res = residual(u)
    nrm = float(np.abs(res).max()) if res.size else 0.0
    solver = _StepSolver(jacobian(u), labels, log, split)
    honest = not options.dishonest
    best, stall, it = nrm, 0, 0
    while nrm > options.tol:
        if it >= options.max_iter:
            raise NewtonError(f"Newton did not converge in {options.max_iter} iterations (residual {nrm:.3e})")
        if honest and it > 0:
            solver = _StepSolver(jacobian(u), labels, log, split)
        step = solver.solve(res)
        u = u - step
        res = residual(u)
        nrm = float(np.abs(res).max())
        it += 1
        if not np.isfinite(nrm):
            raise NewtonError("Newton iteration diverged (non-finite residual)")
        if np.abs(step).max() <= ROUNDOFF_STEP * max(1.0, float(np.abs(u).max())):
            # the update is at round-off level: large iterates cannot reach the absolute tolerance
            break
        if nrm < best:
            best, stall = nrm, 0
        else:
            stall += 1
            if stall >= options.stagnation_limit:
                honest = True
    return u, it


# ----------------------------------------------------------------------------
# model adapter
# ----------------------------------------------------------------------------


class _System:
    """Evaluates ``f``, ``g`` and Jacobians on the stacked vector ``z = (x, y)``."""

    def __init__(self, model, partition: Partition):
        if not isinstance(model, (LinearDae, NonlinearModel)):
            raise ModelError("model must be a LinearDae or NonlinearModel")
        partition.check(model.dims)
        self.model = model
        self.n, self.m = model.n, model.m
        n = self.n
        self.XF = partition.fast_states
        self.XS = partition.slow_states
        self.YF = n + partition.fast_algebraics
        self.YS = n + partition.slow_algebraics
        self.FAST = np.concatenate([self.XF, self.YF]).astype(int)
        self.SLOW = np.concatenate([self.XS, self.YS]).astype(int)
        self.params = dict(model.parameters)

    def f(self, z):
        return self.model.f(z[: self.n], z[self.n :], self.params)

    def g(self, z):
        return self.model.g(z[: self.n], z[self.n :], self.params)

    def jac(self, z):
        fx, fy, gx, gy = self.model.jacobian(z[: self.n], z[self.n :], self.params)
        return np.block([[fx, fy], [gx, gy]])


# ----------------------------------------------------------------------------
# stages
# ----------------------------------------------------------------------------


def predict(sys: _System, scheme: SchemeSpec, z_t, log: FactorizationLog, options=NewtonOptions()):
    """Predicted ``z`` at ``t + h_s`` and the Newton iteration count."""
    n = sys.n
    a, a_star = _weights(scheme.predictor, scheme.h_s)
    f_t = sys.f(z_t)
    if a_star == 0.0:
        z = z_t.copy()
        z[:n] = z_t[:n] + a * f_t
        if sys.m == 0:
            return z, 0
        yf = np.arange(sys.YF.size)
        ys = np.arange(sys.YF.size, sys.YF.size + sys.YS.size)
        order = np.concatenate([sys.YF, sys.YS])

        def res(u):
            zz = z.copy()
            zz[order] = u
            return sys.g(zz)[order - n]

        def jac(u):
            zz = z.copy()
            zz[order] = u
            return sys.jac(zz)[np.ix_(order, order)]

        u, it = newton(res, jac, z[order], (STAGE_PREDICT_FAST_ALG, STAGE_PREDICT_SLOW_ALG), log,
                       split=(yf, ys), options=options)
        z[order] = u
        return z, it

    x_t = z_t[:n]

    def res(u):
        return np.concatenate([u[:n] - x_t - a * f_t[:n] - a_star * sys.f(u), sys.g(u)])

    def jac(u):
        J = sys.jac(u)
        J[:n] *= -a_star
        J[:n, :n] += np.eye(n)
        return J

    return newton(res, jac, z_t, (STAGE_FULL,), log, options=options)


def interpolate(v_t, v_pred, i: int, r: int, spline: CubicSpline | None = None, t=None):
    """Slow values at micro step ``i`` of ``r``.

    Linear interpolation between the start value and the prediction, or the
    given spline evaluated at time ``t``.
    """
    if spline is not None:
        return spline(t)
    w = i / r
    return (1.0 - w) * np.asarray(v_t) + w * np.asarray(v_pred)


def _build_spline(history, t, h_s, slow_pred):
    """Natural cubic spline through (t-2h_s, t-h_s, t, t+h_s), or None on cold start."""
    if len(history) < 3:
        return None
    knots = np.array([t - 2 * h_s, t - h_s, t, t + h_s])
    values = np.vstack([history[-3], history[-2], history[-1], slow_pred])
    return CubicSpline(knots, values, axis=0, bc_type="natural")


def solve_fast_step(sys: _System, scheme: SchemeSpec, z_prev, slow_values, log, options=NewtonOptions()):
    """One fast micro step with the slow variables fixed to ``slow_values``."""
    b, b_star = _weights(scheme.corrector_fast, scheme.h_f)
    n = sys.n
    FAST, XF = sys.FAST, sys.XF
    nxf = XF.size
    f_prev = sys.f(z_prev)[XF]
    z = z_prev.copy()
    z[sys.SLOW] = slow_values

    def full(u):
        zz = z.copy()
        zz[FAST] = u
        return zz

    def res(u):
        zz = full(u)
        return np.concatenate(
            [u[:nxf] - z_prev[XF] - b_star * sys.f(zz)[XF] - b * f_prev, sys.g(zz)[sys.YF - n]]
        )

    rows = np.concatenate([XF, sys.YF])

    def jac(u):
        J = sys.jac(full(u))[np.ix_(rows, FAST)]
        J[:nxf] *= -b_star
        J[:nxf, :nxf] += np.eye(nxf)
        return J

    u, it = newton(res, jac, z_prev[FAST], (STAGE_FAST,), log, options=options)
    return full(u), it


def solve_final_step(sys: _System, scheme: SchemeSpec, z_prev, z_t, z_guess, log, options=NewtonOptions()):
    """Last micro step: fast states from ``z_prev`` over ``h_f`` and slow states
    from ``z_t`` over ``h_s``, solved together with all algebraic constraints.

    The Newton matrix is split into the fast block and its slow Schur complement.
    """
    b, b_star = _weights(scheme.corrector_fast, scheme.h_f)
    c, c_star = _weights(scheme.corrector_slow, scheme.h_s)
    n = sys.n
    XF, XS = sys.XF, sys.XS
    order = np.concatenate([sys.FAST, sys.SLOW])
    nF = sys.FAST.size
    f_prev = sys.f(z_prev)
    f_t = sys.f(z_t)
    w_star = np.zeros(n)
    w_star[XF], w_star[XS] = b_star, c_star
    base = np.zeros(n)
    base[XF] = z_prev[XF] + b * f_prev[XF]
    base[XS] = z_t[XS] + c * f_t[XS]

    def full(u):
        zz = np.empty_like(z_guess)
        zz[order] = u
        return zz

    def res(u):
        zz = full(u)
        r = np.concatenate([zz[:n] - base - w_star * sys.f(zz), sys.g(zz)])
        return r[order]

    def jac(u):
        J = sys.jac(full(u))
        J[:n] *= -w_star[:, None]
        J[:n, :n] += np.eye(n)
        return J[np.ix_(order, order)]

    split = (np.arange(nF), np.arange(nF, order.size))
    u, it = newton(res, jac, z_guess[order], (STAGE_FAST, STAGE_SLOW), log, split=split, options=options)
    return full(u), it


def _resolve_algebraics(sys: _System, z, log, options=NewtonOptions()):
    n = sys.n
    if sys.m == 0:
        return z
    idx = np.arange(n, n + sys.m)

    def res(u):
        zz = z.copy()
        zz[n:] = u
        return sys.g(zz)

    def jac(u):
        zz = z.copy()
        zz[n:] = u
        return sys.jac(zz)[np.ix_(idx, idx)]

    u, _ = newton(res, jac, z[n:], (STAGE_EVENT,), log, options=options)
    out = z.copy()
    out[n:] = u
    return out


# ----------------------------------------------------------------------------
# results
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class MacroStepInfo:
    t: float
    passes: int
    newton_iterations: int
    factorizations: dict
    mismatch: float
    converged: bool
    spline_fallback: bool
    #: Jacobian order per factorized stage
    factorization_orders: dict = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Samples at fast-step resolution.

    ``x[j]`` and ``y[j]`` are the values at ``t[j]``; inside a macro step the slow
    entries are the interpolated values used by the fast solves.
    """

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    state_names: tuple
    alg_names: tuple
    h_f: float
    h_s: float
    macro: tuple = ()
    factorizations: dict = field(default_factory=dict)

    @property
    def r(self) -> int:
        return int(round(self.h_s / self.h_f))

    @property
    def variable_names(self) -> tuple:
        return tuple(self.state_names) + tuple(self.alg_names)

    @property
    def z(self) -> np.ndarray:
        return np.hstack([self.x, self.y])

    def column(self, name: str) -> np.ndarray:
        if name in self.state_names:
            return self.x[:, self.state_names.index(name)]
        if name in self.alg_names:
            return self.y[:, self.alg_names.index(name)]
        raise KeyError(f"unknown variable {name!r}")

    @property
    def macro_slice(self) -> slice:
        """Indices of the samples on the macro grid."""
        return slice(0, None, self.r)


@dataclass(frozen=True, eq=False)
class ResidualSeries:
    """Euclidean norm of the slow algebraic residual at every sample."""

    t: np.ndarray
    res_norm_slow: np.ndarray


@dataclass(frozen=True, eq=False)
class ErrorSeries:
    t: np.ndarray
    abs_error: np.ndarray
    variable: str


def _initial_point(model, sys: _System, x0, y0, log):
    if x0 is None:
        if isinstance(model, NonlinearModel) and model.equilibrium is not None:
            x0 = model.equilibrium[0]
            if y0 is None:
                y0 = model.equilibrium[1]
        else:
            x0 = np.zeros(sys.n)
    x0 = np.asarray(x0, float)
    if x0.shape != (sys.n,):
        raise ModelError(f"initial state must have length {sys.n}")
    z = np.concatenate([x0, np.zeros(sys.m) if y0 is None else np.asarray(y0, float)])
    if z.size != sys.n + sys.m:
        raise ModelError(f"initial algebraics must have length {sys.m}")
    if y0 is None:
        if isinstance(model, LinearDae):
            z[sys.n :] = model.consistent_algebraics(x0)
        else:
            z = _resolve_algebraics(sys, z, log)
    return z


def _snap_events(events, t0, step, n_steps, params):
    snapped = {}
    for ev in events:
        if ev.parameter not in params:
            raise ModelError(f"event refers to unknown parameter {ev.parameter!r}")
        k = int(round((ev.t - t0) / step))
        if 0 <= k < n_steps:
            snapped.setdefault(k, []).append(ev)
    return snapped


def _macro_count(t_end, h_s):
    if not t_end > 0:
        raise ModelError("t_end must be positive")
    return max(1, int(math.ceil(t_end / h_s - 1e-9)))


def run_multirate(model, scheme: SchemeSpec, partition: Partition, t_end: float,
                  events: Sequence[Event] | None = None, x0=None, y0=None,
                  options: NewtonOptions = NewtonOptions()):
    """Integrate ``model`` with the multirate scheme up to ``t_end``.

    Parameters
    ----------
    model : LinearDae or NonlinearModel
    events : sequence of Event, optional
        Defaults to the events stored in the model.  Each event is applied at the
        nearest macro boundary; states carry over and algebraics are re-solved.
    x0, y0 : array_like, optional
        Initial point.  Defaults to the model equilibrium (zero for linear
        models); missing algebraics are made consistent.

    Returns
    -------
    Trajectory, ResidualSeries
    """
    sys = _System(model, partition)
    events = tuple(model.events if events is None else events)
    if events and not sys.params:
        raise ModelError("events need a model with parameters")
    log = FactorizationLog()
    z_t = _initial_point(model, sys, x0, y0, log)
    n, r, h_f, h_s = sys.n, scheme.r, scheme.h_f, scheme.h_s
    n_macro = _macro_count(t_end, h_s)
    snapped = _snap_events(events, 0.0, h_s, n_macro, sys.params)
    use_spline = scheme.interpolation == "spline"
    history = [z_t[sys.SLOW].copy(), z_t[sys.SLOW].copy()]

    samples = [z_t.copy()]
    res_norms = [_slow_residual_norm(sys, z_t)]
    info = []
    for k in range(n_macro):
        t = k * h_s
        if k in snapped:
            for ev in snapped[k]:
                sys.params[ev.parameter] = ev.value
            z_t = _resolve_algebraics(sys, z_t, log, options)
            samples[-1] = z_t.copy()
            res_norms[-1] = _slow_residual_norm(sys, z_t)
            history = [z_t[sys.SLOW].copy(), z_t[sys.SLOW].copy()]
        before = log.snapshot()
        z_pred, iters = predict(sys, scheme, z_t, log, options)
        slow_pred = z_pred[sys.SLOW].copy()
        fallback = False
        for p in range(1, scheme.max_passes + 1):
            spline = _build_spline(history, t, h_s, slow_pred) if use_spline else None
            fallback = use_spline and spline is None
            window = [z_t]
            for i in range(1, r):
                slow_i = interpolate(z_t[sys.SLOW], slow_pred, i, r, spline, t + i * h_f)
                z_i, it = solve_fast_step(sys, scheme, window[-1], slow_i, log, options)
                iters += it
                window.append(z_i)
            guess = window[-1].copy()
            guess[sys.SLOW] = slow_pred
            z_r, it = solve_final_step(sys, scheme, window[-1], z_t, guess, log, options)
            iters += it
            window.append(z_r)
            diff = z_r[sys.SLOW] - slow_pred
            mismatch = float(np.abs(diff).max()) if diff.size else 0.0
            if mismatch <= scheme.epsilon or p == scheme.max_passes:
                break
            slow_pred = z_r[sys.SLOW].copy()
        converged = mismatch <= scheme.epsilon
        if not converged and scheme.max_passes > 1:
            warnings.warn(
                f"macro step at t={t:.6g}: {scheme.max_passes} corrector passes left a slow "
                f"mismatch of {mismatch:.3e} > epsilon={scheme.epsilon:.3e}",
                PassLimitWarning,
                stacklevel=2,
            )
        after = log.snapshot()
        counts = {s: after[s] - before.get(s, 0) for s in after if after[s] - before.get(s, 0)}
        info.append(
            MacroStepInfo(
                t=t,
                passes=p,
                newton_iterations=iters,
                factorizations=counts,
                mismatch=mismatch,
                converged=converged,
                spline_fallback=fallback,
                factorization_orders={s: log.orders[s] for s in counts},
            )
        )
        samples.extend(window[1:])
        res_norms.extend(_slow_residual_norm(sys, z) for z in window[1:])
        z_t = z_r
        history.append(z_r[sys.SLOW].copy())
        if len(history) > 3:
            history.pop(0)

    Z = np.array(samples)
    times = np.arange(Z.shape[0]) * h_f
    traj = Trajectory(
        t=times, x=Z[:, :n], y=Z[:, n:],
        state_names=tuple(model.state_names), alg_names=tuple(model.alg_names),
        h_f=h_f, h_s=h_s, macro=tuple(info), factorizations=log.snapshot(),
    )
    return traj, ResidualSeries(times, np.array(res_norms))


def _slow_residual_norm(sys: _System, z) -> float:
    if sys.YS.size == 0:
        return 0.0
    return float(np.linalg.norm(sys.g(z)[sys.YS - sys.n]))


def run_reference(model, h_ref: float, t_end: float, events: Sequence[Event] | None = None,
                  x0=None, y0=None, options: NewtonOptions = NewtonOptions()) -> Trajectory:
    """Single-rate trapezoidal solution of the whole DAE with step ``h_ref``."""
    if not h_ref > 0:
        raise ModelError("h_ref must be positive")
    part = Partition.all_fast(model.n, model.m)
    sys = _System(model, part)
    events = tuple(model.events if events is None else events)
    if events and not sys.params:
        raise ModelError("events need a model with parameters")
    log = FactorizationLog()
    z = _initial_point(model, sys, x0, y0, log)
    n = sys.n
    n_steps = max(1, int(math.ceil(t_end / h_ref - 1e-9)))
    snapped = _snap_events(events, 0.0, h_ref, n_steps, sys.params)
    w = 0.5 * h_ref
    out = [z.copy()]
    for k in range(n_steps):
        if k in snapped:
            for ev in snapped[k]:
                sys.params[ev.parameter] = ev.value
            z = _resolve_algebraics(sys, z, log, options)
            out[-1] = z.copy()
        base = z[:n] + w * sys.f(z)

        def res(u):
            return np.concatenate([u[:n] - base - w * sys.f(u), sys.g(u)])

        def jac(u):
            J = sys.jac(u)
            J[:n] *= -w
            J[:n, :n] += np.eye(n)
            return J

        z, _ = newton(res, jac, z, (STAGE_FULL,), log, options=options)
        out.append(z.copy())
    Z = np.array(out)
    return Trajectory(
        t=np.arange(Z.shape[0]) * h_ref, x=Z[:, :n], y=Z[:, n:],
        state_names=tuple(model.state_names), alg_names=tuple(model.alg_names),
        h_f=h_ref, h_s=h_ref, factorizations=log.snapshot(),
    )


def trajectory_error(traj: Trajectory, ref: Trajectory, variable: str) -> ErrorSeries:
    """``|traj - ref|`` of one variable on the macro grid of ``traj``."""
    if variable not in traj.variable_names or variable not in ref.variable_names:
        raise ModelError(f"unknown variable {variable!r}")
    q = traj.h_s / ref.h_f
    qi = int(round(q))
    if qi < 1 or abs(q - qi) > 1e-9 * q:
        raise ModelError("reference step must divide the macro step")
    t_macro = traj.t[traj.macro_slice]
    idx = np.arange(t_macro.size) * qi
    if idx[-1] >= ref.t.size:
        raise ModelError("reference does not cover the trajectory time span")
    if np.abs(ref.t[idx] - t_macro).max() > 1e-9 * max(1.0, t_macro[-1]):
        raise ModelError("reference and trajectory grids do not line up")
    err = np.abs(traj.column(variable)[traj.macro_slice] - ref.column(variable)[idx])
    return ErrorSeries(t_macro, err, variable)


def verify_pencil_consistency(lin: LinearDae, partition: Partition, scheme: SchemeSpec, steps: int = 5,
                              x0=None, layout: str = "monodromy", pair: PencilPair | None = None,
                              seed: int = 0) -> float:
    """Largest relative pencil residual over ``steps`` simulated macro windows.

    The simulation runs single-pass (``max_passes = 1``) with linear
    interpolation from ``x0`` (default: a seeded random state with consistent
    algebraics).  A prebuilt ``pair`` can be passed to test a modified pencil.
    """
    if not isinstance(lin, LinearDae):
        raise ModelError("pencil consistency is defined for linear models only")
    sc = replace(scheme, max_passes=1, interpolation="linear")
    if pair is None:
        pair = assemble_pencil(apply_partition(lin, partition), sc, layout)
    if x0 is None:
        x0 = np.random.default_rng(seed).standard_normal(lin.n)
    traj, _ = run_multirate(lin, sc, partition, steps * sc.h_s, events=(), x0=x0)
    perm = partition.perm
    Z = traj.z[:, perm]
    r = sc.r
    worst = 0.0
    for k in range((Z.shape[0] - 1) // r):
        window = [Z[k * r + i] for i in range(r + 1)]
        worst = max(worst, pair.residual(window))
    return worst
