"""Semi-explicit DAE models, fast/slow partitions and model files.

A model has states ``x`` (length ``n``) and algebraic variables ``y`` (length ``m``)::

    x' = f(x, y)
    0  = g(x, y)

Linear models store the four Jacobian blocks directly.  Nonlinear models carry
evaluators for ``f``, ``g`` and their Jacobian together with a parameter set, an
equilibrium and a list of parameter-step events.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Mapping, NamedTuple, Sequence

import numpy as np

from ._linalg import NumericalError, SingularMatrixError, condition_estimate, solve

FAST = "fast"
SLOW = "slow"

#: residual bound an equilibrium must satisfy
EQUILIBRIUM_TOL = 1e-8
#: above this bound linearization still works but is flagged
LINEARIZATION_TOL = 1e-6

_REFORMULATE_HINT = (
    "an algebraic Jacobian that is singular can always be made regular by "
    "reformulating the model equations"
)


class ModelError(ValueError):
    """Malformed model, partition or scheme input."""


class OffEquilibriumWarning(UserWarning):
    """Linearization requested at a point that does not satisfy f = 0, g = 0."""


# ----------------------------------------------------------------------------
# dimensions and partitions
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class Dims:
    """State/algebraic counts and their fast/slow split."""

    n: int
    m: int
    n_f: int = 0
    m_f: int = 0

    def __post_init__(self):
        for name in ("n", "m", "n_f", "m_f"):
            if int(getattr(self, name)) != getattr(self, name) or getattr(self, name) < 0:
                raise ModelError(f"{name} must be a nonnegative integer")
        if self.n_f > self.n or self.m_f > self.m:
            raise ModelError("fast counts cannot exceed totals")

    @property
    def n_s(self) -> int:
        return self.n - self.n_f

    @property
    def m_s(self) -> int:
        return self.m - self.m_f


@dataclass(frozen=True)
class Partition:
    """Fast/slow label for every state and every algebraic variable.

    Attributes
    ----------
    state_class, alg_class : tuple of {"fast", "slow"}
        Labels in original variable order.
    """

    state_class: tuple
    alg_class: tuple

    def __post_init__(self):
        object.__setattr__(self, "state_class", tuple(self.state_class))
        object.__setattr__(self, "alg_class", tuple(self.alg_class))
        for lab in self.state_class + self.alg_class:
            if lab not in (FAST, SLOW):
                raise ModelError(f"unknown partition label {lab!r}")

    @classmethod
    def from_fast(cls, n: int, m: int, fast_states=(), fast_algebraics=()) -> "Partition":
        fs, fa = set(int(i) for i in fast_states), set(int(j) for j in fast_algebraics)
        if any(i < 0 or i >= n for i in fs) or any(j < 0 or j >= m for j in fa):
            raise ModelError("partition index out of range")
        return cls(
            tuple(FAST if i in fs else SLOW for i in range(n)),
            tuple(FAST if j in fa else SLOW for j in range(m)),
        )

    @classmethod
    def all_fast(cls, n: int, m: int) -> "Partition":
        return cls((FAST,) * n, (FAST,) * m)

    @classmethod
    def all_slow(cls, n: int, m: int) -> "Partition":
        return cls((SLOW,) * n, (SLOW,) * m)

    @property
    def n(self) -> int:
        return len(self.state_class)

    @property
    def m(self) -> int:
        return len(self.alg_class)

    @property
    def fast_states(self) -> np.ndarray:
        return np.array([i for i, c in enumerate(self.state_class) if c == FAST], dtype=int)

    @property
    def slow_states(self) -> np.ndarray:
        return np.array([i for i, c in enumerate(self.state_class) if c == SLOW], dtype=int)

    @property
    def fast_algebraics(self) -> np.ndarray:
        return np.array([j for j, c in enumerate(self.alg_class) if c == FAST], dtype=int)

    @property
    def slow_algebraics(self) -> np.ndarray:
        return np.array([j for j, c in enumerate(self.alg_class) if c == SLOW], dtype=int)

    @property
    def dims(self) -> Dims:
        return Dims(self.n, self.m, len(self.fast_states), len(self.fast_algebraics))

    @property
    def perm(self) -> np.ndarray:
        """Indices into the stacked vector ``(x, y)`` giving block order.

        Block order is fast states, slow states, fast algebraics, slow algebraics,
        so ``z_block = z[perm]`` and ``z = z_block[argsort(perm)]``.
        """
        n = self.n
        return np.concatenate(
            [self.fast_states, self.slow_states, n + self.fast_algebraics, n + self.slow_algebraics]
        ).astype(int)

    @property
    def inverse_perm(self) -> np.ndarray:
        return np.argsort(self.perm)

    def check(self, dims: Dims | tuple) -> None:
        n, m = (dims.n, dims.m) if isinstance(dims, Dims) else dims
        if (self.n, self.m) != (n, m):
            raise ModelError(
                f"partition labels cover {self.n} states and {self.m} algebraics, model has {n} and {m}"
            )

    def to_dict(self) -> dict:
        return {
            "fast_states": [int(i) for i in self.fast_states],
            "fast_algebraics": [int(j) for j in self.fast_algebraics],
        }


def load_partition(path, n: int, m: int) -> Partition:
    """Read a partition file ``{"fast_states": [...], "fast_algebraics": [...]}``."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        unknown = set(data) - {"fast_states", "fast_algebraics"}
        if unknown:
            raise ModelError(f"cannot read partition file {path}: unknown keys {sorted(unknown)}")
        return Partition.from_fast(n, m, data.get("fast_states", []), data.get("fast_algebraics", []))
    except (OSError, json.JSONDecodeError, AttributeError, TypeError) as exc:
        raise ModelError(f"cannot read partition file {path}: {exc}") from exc


def save_partition(part: Partition, path) -> None:
    Path(path).write_text(json.dumps(part.to_dict(), indent=2) + "\n", encoding="utf-8")


# ----------------------------------------------------------------------------
# linear models
# ----------------------------------------------------------------------------


def _as_matrix(a, shape, name) -> np.ndarray:
    try:
        arr = np.array(a, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ModelError(f"{name} is not a numeric matrix") from exc
    if arr.size == 0:
        arr = arr.reshape(shape)
    if arr.shape != shape:
        raise ModelError(f"{name} has shape {arr.shape}, expected {shape}")
    if not np.all(np.isfinite(arr)):
        raise ModelError(f"{name} has non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LinearDae:
    """Linear(ized) DAE ``x' = f_x x + f_y y``, ``0 = g_x x + g_y y``.

    Attributes
    ----------
    f_x, f_y, g_x, g_y : ndarray
        Jacobian blocks of shapes (n, n), (n, m), (m, n), (m, m).
    state_names, alg_names : tuple of str
    name : str
    off_equilibrium : bool
        Set when the matrices come from a linearization at a non-equilibrium point.
    """

    f_x: np.ndarray
    f_y: np.ndarray
    g_x: np.ndarray
    g_y: np.ndarray
    state_names: tuple = ()
    alg_names: tuple = ()
    name: str = "linear"
    off_equilibrium: bool = False

    def __post_init__(self):
        fx = np.asarray(self.f_x, dtype=float)
        if fx.ndim != 2 or fx.shape[0] != fx.shape[1]:
            raise ModelError(f"f_x must be square, got shape {fx.shape}")
        n = fx.shape[0]
        gy = np.asarray(self.g_y, dtype=float)
        m = gy.shape[0] if gy.ndim == 2 else (0 if gy.size == 0 else -1)
        if m < 0:
            raise ModelError(f"g_y must be a matrix, got shape {gy.shape}")
        object.__setattr__(self, "f_x", _as_matrix(self.f_x, (n, n), "f_x"))
        object.__setattr__(self, "f_y", _as_matrix(self.f_y, (n, m), "f_y"))
        object.__setattr__(self, "g_x", _as_matrix(self.g_x, (m, n), "g_x"))
        object.__setattr__(self, "g_y", _as_matrix(self.g_y, (m, m), "g_y"))
        sn = tuple(self.state_names) or tuple(f"x{i + 1}" for i in range(n))
        an = tuple(self.alg_names) or tuple(f"y{j + 1}" for j in range(m))
        if len(sn) != n or len(an) != m:
            raise ModelError("variable name lists do not match n and m")
        if len(set(sn + an)) != n + m:
            raise ModelError("variable names must be unique")
        object.__setattr__(self, "state_names", sn)
        object.__setattr__(self, "alg_names", an)

    @property
    def n(self) -> int:
        return self.f_x.shape[0]

    @property
    def m(self) -> int:
        return self.g_y.shape[0]

    @property
    def dims(self) -> Dims:
        return Dims(self.n, self.m)

    @property
    def variable_names(self) -> tuple:
        return self.state_names + self.alg_names

    def full_matrix(self) -> np.ndarray:
        """The stacked Jacobian ``[[f_x, f_y], [g_x, g_y]]``."""
        return np.block([[self.f_x, self.f_y], [self.g_x, self.g_y]])

    # model protocol shared with NonlinearModel, used by the simulator
    parameters: Mapping = field(default_factory=dict, repr=False)
    events: tuple = ()

    def f(self, x, y, params=None) -> np.ndarray:
        return self.f_x @ x + self.f_y @ y

    def g(self, x, y, params=None) -> np.ndarray:
        return self.g_x @ x + self.g_y @ y

    def jacobian(self, x, y, params=None):
        return self.f_x, self.f_y, self.g_x, self.g_y

    def consistent_algebraics(self, x) -> np.ndarray:
        """Solve ``g(x, y) = 0`` for ``y``."""
        return -solve(self.g_y, self.g_x @ np.asarray(x, float), "g_y", _REFORMULATE_HINT)


def reduce_state_matrix(lin: LinearDae) -> np.ndarray:
    """Eliminate the algebraic variables: ``f_x - f_y g_y^{-1} g_x``.

    Raises
    ------
    SingularMatrixError
        If ``g_y`` is singular; the message carries the condition estimate.
    """
    if lin.m == 0:
        return lin.f_x.copy()
    return lin.f_x - lin.f_y @ solve(lin.g_y, lin.g_x, "algebraic Jacobian g_y", _REFORMULATE_HINT)


class Blocks(NamedTuple):
    """Four fast/slow sub-blocks of one Jacobian (row class first, column class second)."""

    ff: np.ndarray
    fs: np.ndarray
    sf: np.ndarray
    ss: np.ndarray

    def assemble(self) -> np.ndarray:
        return np.block([[self.ff, self.fs], [self.sf, self.ss]])


@dataclass(frozen=True, eq=False)
class PartitionedLinearDae:
    """The sixteen sub-blocks of a linear DAE under a fast/slow partition.

    ``f_x.fs`` for example is the block of ``f_x`` whose rows are fast states and
    whose columns are slow states.
    """

    f_x: Blocks
    f_y: Blocks
    g_x: Blocks
    g_y: Blocks
    partition: Partition
    source: LinearDae

    @property
    def dims(self) -> Dims:
        return self.partition.dims

    def block_matrix(self) -> np.ndarray:
        """Stacked Jacobian in block order ``(x_f, x_s, y_f, y_s)``."""
        return np.block(
            [[self.f_x.assemble(), self.f_y.assemble()], [self.g_x.assemble(), self.g_y.assemble()]]
        )


def _split(a: np.ndarray, rows_f, rows_s, cols_f, cols_s) -> Blocks:
    return Blocks(
        a[np.ix_(rows_f, cols_f)],
        a[np.ix_(rows_f, cols_s)],
        a[np.ix_(rows_s, cols_f)],
        a[np.ix_(rows_s, cols_s)],
    )


def apply_partition(lin: LinearDae, part: Partition) -> PartitionedLinearDae:
    """Split the Jacobian blocks of ``lin`` according to ``part``."""
    part.check(lin.dims)
    xf, xs = part.fast_states, part.slow_states
    yf, ys = part.fast_algebraics, part.slow_algebraics
    return PartitionedLinearDae(
        f_x=_split(lin.f_x, xf, xs, xf, xs),
        f_y=_split(lin.f_y, xf, xs, yf, ys),
        g_x=_split(lin.g_x, yf, ys, xf, xs),
        g_y=_split(lin.g_y, yf, ys, yf, ys),
        partition=part,
        source=lin,
    )


def reassemble(pdae: PartitionedLinearDae) -> LinearDae:
    """Inverse of :func:`apply_partition`; reproduces the source matrices exactly."""
    part = pdae.partition
    n, m = part.n, part.m
    xi = np.concatenate([part.fast_states, part.slow_states]).astype(int)
    yi = np.concatenate([part.fast_algebraics, part.slow_algebraics]).astype(int)
    out = {}
    for name, blocks, rows, cols in (
        ("f_x", pdae.f_x, xi, xi),
        ("f_y", pdae.f_y, xi, yi),
        ("g_x", pdae.g_x, yi, xi),
        ("g_y", pdae.g_y, yi, yi),
    ):
        a = np.empty((n if name[0] == "f" else m, n if name[2] == "x" else m))
        a[np.ix_(rows, cols)] = blocks.assemble()
        out[name] = a
    src = pdae.source
    return LinearDae(**out, state_names=src.state_names, alg_names=src.alg_names, name=src.name)


# ----------------------------------------------------------------------------
# nonlinear models
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class Event:
    """Parameter step applied at time ``t``."""

    t: float
    parameter: str
    value: float


def finite_difference_jacobian(model, x, y, params=None):
    """Central-difference Jacobian blocks with step ``1e-7 * max(1, |value|)``."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    n, m = x.size, y.size
    z = np.concatenate([x, y])
    cols = []
    for k in range(n + m):
        h = 1e-7 * max(1.0, abs(z[k]))
        zp, zm = z.copy(), z.copy()
        zp[k] += h
        zm[k] -= h
        try:
            rp = np.concatenate([model.f(zp[:n], zp[n:], params), model.g(zp[:n], zp[n:], params)])
            rm = np.concatenate([model.f(zm[:n], zm[n:], params), model.g(zm[:n], zm[n:], params)])
        except (ValueError, ArithmeticError) as exc:
            raise NumericalError(f"model evaluation failed at a perturbed point: {exc}") from exc
        cols.append((rp - rm) / (2.0 * h))
    jac = np.column_stack(cols) if cols else np.zeros((n + m, 0))
    return jac[:n, :n], jac[:n, n:], jac[n:, :n], jac[n:, n:]


@dataclass(frozen=True, eq=False)
class NonlinearModel:
    """Nonlinear semi-explicit DAE with parameters, equilibrium and events.

    Attributes
    ----------
    name : str
    state_names, alg_names : tuple of str
    parameters : Mapping[str, float]
        Nominal parameter values.
    rhs : callable
        ``rhs(x, y, params) -> f``.
    constraints : callable
        ``constraints(x, y, params) -> g``.
    analytic_jacobian : callable or None
        ``analytic_jacobian(x, y, params) -> (f_x, f_y, g_x, g_y)``.
    equilibrium : tuple of ndarray
        ``(x_o, y_o)`` for the nominal parameters.
    events : tuple of Event
    """

    name: str
    state_names: tuple
    alg_names: tuple
    parameters: Mapping
    rhs: Callable
    constraints: Callable
    analytic_jacobian: Callable | None = None
    equilibrium: tuple | None = None
    events: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "parameters", dict(self.parameters))
        object.__setattr__(self, "events", tuple(sorted(self.events, key=lambda e: e.t)))
        for ev in self.events:
            if ev.parameter not in self.parameters:
                raise ModelError(f"event refers to unknown parameter {ev.parameter!r}")
        if self.equilibrium is not None:
            x0, y0 = (np.array(v, dtype=float) for v in self.equilibrium)
            if x0.shape != (self.n,) or y0.shape != (self.m,):
                raise ModelError("equilibrium dimensions do not match the model")
            object.__setattr__(self, "equilibrium", (x0, y0))

    @property
    def n(self) -> int:
        return len(self.state_names)

    @property
    def m(self) -> int:
        return len(self.alg_names)

    @property
    def dims(self) -> Dims:
        return Dims(self.n, self.m)

    @property
    def variable_names(self) -> tuple:
        return tuple(self.state_names) + tuple(self.alg_names)

    def _p(self, params):
        return self.parameters if params is None else params

    def f(self, x, y, params=None) -> np.ndarray:
        return np.asarray(self.rhs(np.asarray(x, float), np.asarray(y, float), self._p(params)), float)

    def g(self, x, y, params=None) -> np.ndarray:
        return np.asarray(
            self.constraints(np.asarray(x, float), np.asarray(y, float), self._p(params)), float
        )

    def jacobian(self, x, y, params=None):
        if self.analytic_jacobian is not None:
            return tuple(np.asarray(b, float) for b in self.analytic_jacobian(x, y, self._p(params)))
        return finite_difference_jacobian(self, x, y, params)

    def residual_norm(self, x, y, params=None) -> float:
        r = np.concatenate([self.f(x, y, params), self.g(x, y, params)])
        return float(np.abs(r).max()) if r.size else 0.0

    def with_parameters(self, **updates) -> "NonlinearModel":
        unknown = set(updates) - set(self.parameters)
        if unknown:
            raise ModelError(f"unknown parameters {sorted(unknown)}")
        return replace(self, parameters={**self.parameters, **updates})

    @classmethod
    def from_linear(cls, lin: LinearDae) -> "NonlinearModel":
        """Wrap a linear model behind the nonlinear interface."""
        return cls(
            name=lin.name,
            state_names=lin.state_names,
            alg_names=lin.alg_names,
            parameters={},
            rhs=lambda x, y, p: lin.f_x @ x + lin.f_y @ y,
            constraints=lambda x, y, p: lin.g_x @ x + lin.g_y @ y,
            analytic_jacobian=None,
            equilibrium=(np.zeros(lin.n), np.zeros(lin.m)),
        )


def linearize(model, point=None) -> LinearDae:
    """Jacobian blocks of ``model`` at ``point`` (default: its equilibrium).

    Off-equilibrium points are allowed; the result then has ``off_equilibrium``
    set and an :class:`OffEquilibriumWarning` is emitted.
    """
    if isinstance(model, LinearDae):
        return model
    if point is None:
        if model.equilibrium is None:
            raise ModelError("model has no stored equilibrium; pass a point")
        point = model.equilibrium
    x, y = (np.asarray(v, float) for v in point)
    off = model.residual_norm(x, y) > LINEARIZATION_TOL
    if off:
        warnings.warn("linearizing at a point that is not an equilibrium", OffEquilibriumWarning, stacklevel=2)
    fx, fy, gx, gy = model.jacobian(x, y)
    return LinearDae(
        fx, fy, gx, gy,
        state_names=model.state_names,
        alg_names=model.alg_names,
        name=model.name,
        off_equilibrium=off,
    )


def solve_equilibrium(model: NonlinearModel, guess, params=None, bounds=None, tol=1e-12, max_iter=100):
    """Damped Newton on ``(f, g) = 0``.

    Parameters
    ----------
    guess : tuple of array_like
        Initial ``(x, y)``.
    bounds : dict, optional
        ``{state_index: (lo, hi)}``; steps are shortened to keep those entries
        strictly inside the open interval.

    Returns
    -------
    x, y : ndarray
    """
    n = model.n
    z = np.concatenate([np.asarray(guess[0], float), np.asarray(guess[1], float)])
    bounds = bounds or {}

    def res(zz):
        return np.concatenate([model.f(zz[:n], zz[n:], params), model.g(zz[:n], zz[n:], params)])

    r = res(z)
    for _ in range(max_iter):
        nrm = np.abs(r).max()
        if nrm <= tol:
            return z[:n], z[n:]
        fx, fy, gx, gy = model.jacobian(z[:n], z[n:], params)
        dz = -solve(np.block([[fx, fy], [gx, gy]]), r, "equilibrium Jacobian")
        lam = 1.0
        for k, (lo, hi) in bounds.items():
            while not (lo < z[k] + lam * dz[k] < hi) and lam > 1e-8:
                lam *= 0.5
        while True:
            trial = z + lam * dz
            r_trial = res(trial)
            if np.abs(r_trial).max() < nrm or lam < 1e-4:
                break
            lam *= 0.5
        z, r = trial, r_trial
    if np.abs(r).max() <= EQUILIBRIUM_TOL:
        return z[:n], z[n:]
    raise NumericalError("equilibrium Newton iteration did not converge")


# ----------------------------------------------------------------------------
# bundled models
# ----------------------------------------------------------------------------

SMIB_PARAMETERS = {
    "omega_b": 100.0 * math.pi,
    "H": 3.0,
    "D": 2.0,
    "T_d0": 5.0,
    "T_a": 0.02,
    "K_a": 50.0,
    "v_inf": 1.0,
    "x_e": 0.5,
    "p_m": 0.8,
    "v_ref": 3.0,
}


def _smib_rhs(x, y, p):
    delta, omega, e_q, v_r = x
    p_e, v_t = y
    return np.array(
        [
            p["omega_b"] * (omega - 1.0),
            (p["p_m"] - p_e - p["D"] * (omega - 1.0)) / (2.0 * p["H"]),
            (v_r - e_q) / p["T_d0"],
            (p["K_a"] * (p["v_ref"] - v_t) - v_r) / p["T_a"],
        ]
    )


def _smib_terminal(e_q, delta, v_inf):
    return math.sqrt(e_q * e_q + v_inf * v_inf + 2.0 * e_q * v_inf * math.cos(delta))


def _smib_constraints(x, y, p):
    delta, _, e_q, _ = x
    p_e, v_t = y
    return np.array(
        [
            p_e - e_q * p["v_inf"] / p["x_e"] * math.sin(delta),
            v_t - _smib_terminal(e_q, delta, p["v_inf"]),
        ]
    )


def _smib_jacobian(x, y, p):
    delta, _, e_q, _ = x
    vi, xe = p["v_inf"], p["x_e"]
    s = _smib_terminal(e_q, delta, vi)
    fx = np.array(
        [
            [0.0, p["omega_b"], 0.0, 0.0],
            [0.0, -p["D"] / (2.0 * p["H"]), 0.0, 0.0],
            [0.0, 0.0, -1.0 / p["T_d0"], 1.0 / p["T_d0"]],
            [0.0, 0.0, 0.0, -1.0 / p["T_a"]],
        ]
    )
    fy = np.array(
        [[0.0, 0.0], [-1.0 / (2.0 * p["H"]), 0.0], [0.0, 0.0], [0.0, -p["K_a"] / p["T_a"]]]
    )
    gx = np.array(
        [
            [-e_q * vi / xe * math.cos(delta), 0.0, -vi / xe * math.sin(delta), 0.0],
            [e_q * vi * math.sin(delta) / s, 0.0, -(e_q + vi * math.cos(delta)) / s, 0.0],
        ]
    )
    gy = np.eye(2)
    return fx, fy, gx, gy


def smib_avr(parameters: Mapping | None = None, events: Sequence[Event] = ()) -> NonlinearModel:
    """Single machine on an infinite bus with a first-order voltage regulator.

    States are rotor angle, speed, field voltage and regulator output; the
    algebraic variables are electrical power and terminal voltage.  The
    equilibrium is recomputed for the given parameters by damped Newton with the
    rotor angle kept in (0, pi/2).
    """
    params = {**SMIB_PARAMETERS, **(parameters or {})}
    model = NonlinearModel(
        name="smib_avr",
        state_names=("delta", "omega", "e_q", "v_r"),
        alg_names=("p_e", "v_t"),
        parameters=params,
        rhs=_smib_rhs,
        constraints=_smib_constraints,
        analytic_jacobian=_smib_jacobian,
        events=tuple(events),
    )
    guess = (np.array([0.5, 1.0, 1.0, 1.0]), np.array([params["p_m"], 1.0]))
    x0, y0 = solve_equilibrium(model, guess, bounds={0: (0.0, math.pi / 2)})
    return replace(model, equilibrium=(x0, y0))


def decoupled2() -> LinearDae:
    return LinearDae(
        f_x=[[-50.0, 0.0], [0.0, -1.0]],
        f_y=np.zeros((2, 2)),
        g_x=np.eye(2),
        g_y=-np.eye(2),
        state_names=("x1", "x2"),
        alg_names=("y1", "y2"),
        name="decoupled2",
    )


def coupled_stiff() -> LinearDae:
    return LinearDae(
        f_x=[[-50.0, 2.0], [0.5, -1.0]],
        f_y=[[0.2, 0.0], [0.0, 0.1]],
        g_x=np.eye(2),
        g_y=-np.eye(2),
        state_names=("x1", "x2"),
        alg_names=("y1", "y2"),
        name="coupled_stiff",
    )


_LINEAR_BUILTINS = {"decoupled2": decoupled2, "coupled_stiff": coupled_stiff}
_NONLINEAR_BUILTINS = {"smib_avr": smib_avr}
BUILTIN_NAMES = tuple(_LINEAR_BUILTINS) + tuple(_NONLINEAR_BUILTINS)


def builtin_model(name: str):
    """Return one of the bundled models by name."""
    if name in _LINEAR_BUILTINS:
        return _LINEAR_BUILTINS[name]()
    if name in _NONLINEAR_BUILTINS:
        return _NONLINEAR_BUILTINS[name]()
    raise ModelError(f"unknown builtin model {name!r}; choose from {', '.join(BUILTIN_NAMES)}")


# ----------------------------------------------------------------------------
# model files
# ----------------------------------------------------------------------------


def model_to_dict(model) -> dict:
    if isinstance(model, LinearDae):
        return {
            "name": model.name,
            "type": "linear",
            "n": model.n,
            "m": model.m,
            "f_x": model.f_x.tolist(),
            "f_y": model.f_y.tolist(),
            "g_x": model.g_x.tolist(),
            "g_y": model.g_y.tolist(),
            "state_names": list(model.state_names),
            "alg_names": list(model.alg_names),
        }
    if model.name not in _NONLINEAR_BUILTINS:
        raise ModelError("only builtin nonlinear models can be serialized")
    x0, y0 = model.equilibrium
    return {
        "type": "builtin_nonlinear",
        "name": model.name,
        "parameters": dict(model.parameters),
        "equilibrium": {"x": x0.tolist(), "y": y0.tolist()},
        "events": [{"t": e.t, "parameter": e.parameter, "value": e.value} for e in model.events],
    }


def save_model(model, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=2) + "\n", encoding="utf-8")


def model_from_dict(data: Mapping):
    """Build and validate a model from its file representation."""
    if not isinstance(data, Mapping):
        raise ModelError("model file must contain a JSON object")
    kind = data.get("type")
    if kind == "linear":
        try:
            n, m = int(data["n"]), int(data["m"])
            lin = LinearDae(
                f_x=_as_matrix(data["f_x"], (n, n), "f_x"),
                f_y=_as_matrix(data["f_y"], (n, m), "f_y"),
                g_x=_as_matrix(data["g_x"], (m, n), "g_x"),
                g_y=_as_matrix(data["g_y"], (m, m), "g_y"),
                state_names=tuple(data.get("state_names", ())),
                alg_names=tuple(data.get("alg_names", ())),
                name=str(data.get("name", "linear")),
            )
        except KeyError as exc:
            raise ModelError(f"linear model file lacks field {exc}") from exc
        if m and condition_estimate(lin.g_y) > 1e14:
            warnings.warn("g_y is singular or nearly so; reduction will fail", UserWarning, stacklevel=2)
        return lin
    if kind == "builtin_nonlinear":
        name = data.get("name")
        if name not in _NONLINEAR_BUILTINS:
            raise ModelError(f"unknown builtin nonlinear model {name!r}")
        try:
            events = tuple(
                Event(float(e["t"]), str(e["parameter"]), float(e["value"])) for e in data.get("events", [])
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelError(f"malformed event list: {exc}") from exc
        model = _NONLINEAR_BUILTINS[name](data.get("parameters") or {}, events)
        eq = data.get("equilibrium")
        if eq is not None:
            try:
                x0 = np.array(eq["x"], dtype=float)
                y0 = np.array(eq["y"], dtype=float)
            except (KeyError, TypeError, ValueError) as exc:
                raise ModelError(f"malformed equilibrium: {exc}") from exc
            if x0.shape != (model.n,) or y0.shape != (model.m,):
                raise ModelError("equilibrium dimensions do not match the model")
            if model.residual_norm(x0, y0) > EQUILIBRIUM_TOL:
                raise ModelError("stored equilibrium does not satisfy f = 0, g = 0")
            model = replace(model, equilibrium=(x0, y0))
        return model
    raise ModelError(f"unknown model type {kind!r}")


def load_model(path):
    """Read a model file (linear or builtin nonlinear)."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ModelError(f"cannot read model file {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"model file {path} is not valid JSON: {exc}") from exc
    return model_from_dict(data)


__all__ = [
    "FAST", "SLOW", "Dims", "Partition", "LinearDae", "PartitionedLinearDae", "Blocks",
    "NonlinearModel", "Event", "ModelError", "OffEquilibriumWarning", "SingularMatrixError",
    "NumericalError", "apply_partition", "reassemble", "reduce_state_matrix", "linearize",
    "finite_difference_jacobian", "solve_equilibrium", "builtin_model", "smib_avr", "decoupled2",
    "coupled_stiff", "load_model", "save_model", "model_to_dict", "model_from_dict",
    "load_partition", "save_partition", "BUILTIN_NAMES",
]
