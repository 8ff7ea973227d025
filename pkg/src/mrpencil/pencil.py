"""Discrete-time matrix pencil of a linearized multirate scheme.

The linearized scheme maps the values at the start of a macro step,
``z_t = (x_t, y_t)``, through ``r`` micro steps of length ``h_f``.  Every micro step
is written as ``Z_i z_i = B_i z_{i-1} + (L_i + C_i P) z_t`` where ``P`` is the
predictor map.  The blocks are arranged into a pencil ``z F - G`` of order
``r (n + m)`` whose eigenvalues ``z`` are mapped to continuous-time eigenvalues
``log(z) / h_f`` and compared with the exact spectrum.

Two block arrangements are available:

``"monodromy"`` (default)
    A cyclic arrangement whose finite eigenvalues are the ``r``-th roots of the
    exact macro-step multipliers.  Its spectral radius decides stability of the
    simulated scheme.
``"stepwise"``
    Block-triangular arrangement with one diagonal block pair ``(Z_i, B_i)`` per
    micro step and the slow coupling in the last block column of ``G``.  Its
    spectrum is the union of the per-step pencils and therefore measures the
    one-step amplification of each micro step rather than macro-step stability.

Vectors are ordered in block order ``(x_f, x_s, y_f, y_s)`` throughout.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
from scipy import linalg as sla

from ._linalg import NumericalError, SingularMatrixError, solve
from .dae_core import (
    Dims,
    LinearDae,
    ModelError,
    Partition,
    PartitionedLinearDae,
    apply_partition,
    linearize,
    reduce_state_matrix,
)
from .modal import ModeSet, dominant_mode_index, eig_reduced

PREDICTORS = ("FEM", "TM", "BEM")
CORRECTORS = ("TM", "BEM")
INTERPOLATIONS = ("linear", "spline")
LAYOUTS = ("monodromy", "stepwise")

INFINITE_BETA_TOL = 1e-12
ZERO_Z_TOL = 1e-14

_RECLASSIFY_HINT = "try moving algebraic variables between the fast and slow classes"


# ----------------------------------------------------------------------------
# scheme description
# ----------------------------------------------------------------------------


def _norm_choice(value, allowed, what):
    v = str(value)
    for a in allowed:
        if v.lower() == a.lower():
            return a
    if what == "interpolation" and v.lower() in ("cubicspline", "cubic_spline", "cubic"):
        return "spline"
    raise ModelError(f"unknown {what} {value!r}; choose from {', '.join(allowed)}")


@dataclass(frozen=True)
class SchemeSpec:
    """Multirate scheme choice and step sizes.

    Attributes
    ----------
    predictor : {"FEM", "TM", "BEM"}
    corrector_fast, corrector_slow : {"TM", "BEM"}
    interpolation : {"linear", "spline"}
    h_f, h_s : float
        Fast and slow step sizes; ``h_s / h_f`` must be a positive integer.
    epsilon : float
        Mismatch tolerance of the corrector pass loop.
    max_passes : int
        Cap on corrector passes per macro step.
    """

    predictor: str = "TM"
    corrector_fast: str = "TM"
    corrector_slow: str = "TM"
    interpolation: str = "linear"
    h_f: float = 1e-3
    h_s: float = 1e-2
    epsilon: float = 1e-6
    max_passes: int = 10

    def __post_init__(self):
        object.__setattr__(self, "predictor", _norm_choice(self.predictor, PREDICTORS, "predictor"))
        object.__setattr__(self, "corrector_fast", _norm_choice(self.corrector_fast, CORRECTORS, "corrector"))
        object.__setattr__(self, "corrector_slow", _norm_choice(self.corrector_slow, CORRECTORS, "corrector"))
        object.__setattr__(
            self, "interpolation", _norm_choice(self.interpolation, INTERPOLATIONS, "interpolation")
        )
        h_f, h_s = float(self.h_f), float(self.h_s)
        if not (h_f > 0 and math.isfinite(h_f)) or not (h_s > 0 and math.isfinite(h_s)):
            raise ModelError("step sizes must be positive and finite")
        ratio = h_s / h_f
        r = round(ratio)
        if r < 1 or abs(ratio - r) > 1e-9 * max(1.0, ratio):
            raise ModelError(f"h_s / h_f = {ratio!r} is not a positive integer")
        if not float(self.epsilon) > 0:
            raise ModelError("epsilon must be positive")
        if int(self.max_passes) != self.max_passes or self.max_passes < 1:
            raise ModelError("max_passes must be a positive integer")
        object.__setattr__(self, "h_f", h_f)
        object.__setattr__(self, "h_s", h_s)
        object.__setattr__(self, "epsilon", float(self.epsilon))
        object.__setattr__(self, "max_passes", int(self.max_passes))

    @property
    def r(self) -> int:
        return int(round(self.h_s / self.h_f))

    @property
    def explicit_predictor(self) -> bool:
        return self.predictor == "FEM"

    def with_steps(self, h_f: float, r: int) -> "SchemeSpec":
        return replace(self, h_f=float(h_f), h_s=float(h_f) * int(r))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data) -> "SchemeSpec":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(data) - known
        if extra:
            raise ModelError(f"unknown scheme fields {sorted(extra)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ModelError(f"malformed scheme: {exc}") from exc


def load_scheme(path) -> SchemeSpec:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelError(f"cannot read scheme file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ModelError("scheme file must contain a JSON object")
    return SchemeSpec.from_dict(data)


def save_scheme(scheme: SchemeSpec, path) -> None:
    Path(path).write_text(json.dumps(scheme.to_dict(), indent=2) + "\n", encoding="utf-8")


class MethodParams(NamedTuple):
    """Quadrature weights: unstarred on known values, starred on the new point.

    ``a, a_star`` belong to the predictor over ``h_s``; ``b, b_star`` to the fast
    corrector over ``h_f``; ``c, c_star`` to the slow corrector over ``h_s``.
    """

    a: float
    a_star: float
    b: float
    b_star: float
    c: float
    c_star: float


def _weights(method: str, h: float) -> tuple:
    return {"FEM": (h, 0.0), "TM": (0.5 * h, 0.5 * h), "BEM": (0.0, h)}[method]


def method_params(scheme: SchemeSpec) -> MethodParams:
    a, a_star = _weights(scheme.predictor, scheme.h_s)
    b, b_star = _weights(scheme.corrector_fast, scheme.h_f)
    c, c_star = _weights(scheme.corrector_slow, scheme.h_s)
    return MethodParams(a, a_star, b, b_star, c, c_star)


# ----------------------------------------------------------------------------
# per-step blocks
# ----------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SlowPredictionMaps:
    """Reduced algebraic predictor matrices.

    ``H1, H2, H3`` express the slow algebraic constraint after eliminating the
    fast algebraics: ``H1 x_f + H2 x_s + H3 y_s = 0``.  ``M`` (resp.
    ``M_star``) collects the four matrices that carry the predictor increment
    evaluated at the start point (resp. at the predicted point) into ``y_s``.
    """

    H1: np.ndarray
    H2: np.ndarray
    H3: np.ndarray
    M: tuple
    M_star: tuple
    #: rows ``(x_s, y_s)`` of the prediction acting on ``z_t``
    from_start: np.ndarray
    #: rows ``(x_s, y_s)`` of the prediction acting on the predicted point
    from_predicted: np.ndarray


def slow_prediction_maps(pdae: PartitionedLinearDae, p: MethodParams) -> SlowPredictionMaps:
    d = pdae.dims
    fx, fy, gx, gy = pdae.f_x, pdae.f_y, pdae.g_x, pdae.g_y
    gff_inv = lambda rhs: solve(gy.ff, rhs, "fast algebraic Jacobian g_ff,y", _RECLASSIFY_HINT)
    H1 = gx.sf - gy.sf @ gff_inv(gx.ff)
    H2 = gx.ss - gy.sf @ gff_inv(gx.fs)
    H3 = gy.ss - gy.sf @ gff_inv(gy.fs)
    H3_inv = lambda rhs: solve(H3, rhs, "reduced slow algebraic Jacobian H3", _RECLASSIFY_HINT)
    K1, K2 = H3_inv(H1), H3_inv(H2)

    def m_mats(w):
        return (
            -w * (K1 @ fx.ff + K2 @ fx.sf),
            -w * (K1 @ fx.fs + K2 @ fx.ss),
            -w * (K1 @ fy.ff + K2 @ fy.sf),
            -w * (K1 @ fy.fs + K2 @ fy.ss),
        )

    M, M_star = m_mats(p.a), m_mats(p.a_star)
    n_s, m_s = d.n_s, d.m_s
    I_ns = np.eye(n_s)
    from_start = np.block(
        [
            [p.a * fx.sf, I_ns + p.a * fx.ss, p.a * fy.sf, p.a * fy.ss],
            [-K1 + M[0], -K2 + M[1], M[2], M[3]],
        ]
    )
    from_predicted = np.block(
        [
            [p.a_star * fx.sf, p.a_star * fx.ss, p.a_star * fy.sf, p.a_star * fy.ss],
            list(M_star),
        ]
    )
    shape = (n_s + m_s, d.n + d.m)
    return SlowPredictionMaps(H1, H2, H3, M, M_star, from_start.reshape(shape), from_predicted.reshape(shape))


@dataclass(frozen=True, eq=False)
class StepBlocks:
    """Exact one-step matrices of the linearized single-pass scheme.

    For micro steps ``i = 1 .. r-1``::

        Z[i] z_i = B[i] z_{i-1} + (L[i] + C[i] @ predictor) z_t

    and for the last micro step, solved jointly for fast and slow variables::

        Z_r z_r = B_r z_{r-1} + C_r z_t

    ``Z``, ``B``, ``C``, ``L`` are dicts keyed by ``i``.
    """

    Z: dict
    B: dict
    C: dict
    L: dict
    Z_r: np.ndarray
    B_r: np.ndarray
    C_r: np.ndarray
    predictor: np.ndarray
    consistent: np.ndarray
    maps: SlowPredictionMaps
    dims: Dims
    r: int

    def transfer(self, i: int) -> np.ndarray:
        """Matrix taking the state part ``x_t`` of a consistent start to ``z_i``."""
        return self.transfers()[i]

    def transfers(self) -> list:
        T = [self.consistent]
        for i in range(1, self.r):
            rhs = self.B[i] @ T[-1] + (self.L[i] + self.C[i] @ self.predictor) @ self.consistent
            T.append(solve(self.Z[i], rhs, f"fast step matrix Z_{i}"))
        rhs = self.B_r @ T[-1] + self.C_r @ self.consistent
        T.append(solve(self.Z_r, rhs, "final step matrix Z_r"))
        return T


def _block_slices(d: Dims):
    n = d.n
    return (
        slice(0, d.n_f),
        slice(d.n_f, n),
        slice(n, n + d.m_f),
        slice(n + d.m_f, n + d.m),
    )


def step_blocks(pdae: PartitionedLinearDae, scheme: SchemeSpec) -> StepBlocks:
    """Per-step matrices of the linearized scheme (see :class:`StepBlocks`)."""
    if scheme.interpolation != "linear":
        raise ModelError(
            "cubic-spline interpolation has no linear one-step representation; "
            "assess it by simulation instead"
        )
    d = pdae.dims
    r = scheme.r
    p = method_params(scheme)
    N = d.n + d.m
    A = pdae.block_matrix()
    xf, xs, yf, ys = _block_slices(d)
    I = np.eye(N)
    E = np.zeros((N, N))
    E[: d.n, : d.n] = np.eye(d.n)

    # full predictor: (E - a* A_x) z^P = (E + a A_x) z_t with A_x the state rows
    Jp = np.vstack([E[: d.n] - p.a_star * A[: d.n], A[d.n :]])
    Rp = np.vstack([E[: d.n] + p.a * A[: d.n], np.zeros((d.m, N))])
    predictor = solve(Jp, Rp, "predictor Jacobian")

    maps = slow_prediction_maps(pdae, p)
    slow_rows = np.r_[np.arange(N)[xs], np.arange(N)[ys]]

    Z, B, C, L = {}, {}, {}, {}
    for i in range(1, r):
        w = i / r
        Zi = I.copy()
        Zi[xf] = I[xf] - p.b_star * A[xf]
        Zi[yf] = A[yf]
        Bi = np.zeros((N, N))
        Bi[xf] = I[xf] + p.b * A[xf]
        Li = np.zeros((N, N))
        Li[slow_rows] = (1.0 - w) * I[slow_rows] + w * maps.from_start
        Ci = np.zeros((N, N))
        Ci[slow_rows] = w * maps.from_predicted
        Z[i], B[i], C[i], L[i] = Zi, Bi, Ci, Li

    Z_r = np.empty((N, N))
    Z_r[xf] = I[xf] - p.b_star * A[xf]
    Z_r[xs] = I[xs] - p.c_star * A[xs]
    Z_r[d.n :] = A[d.n :]
    B_r = np.zeros((N, N))
    B_r[xf] = I[xf] + p.b * A[xf]
    C_r = np.zeros((N, N))
    C_r[xs] = I[xs] + p.c * A[xs]

    K = -solve(A[d.n :, d.n :], A[d.n :, : d.n], "algebraic Jacobian g_y")
    consistent = np.vstack([np.eye(d.n), K])
    return StepBlocks(Z, B, C, L, Z_r, B_r, C_r, predictor, consistent, maps, d, r)


# ----------------------------------------------------------------------------
# pencil assembly
# ----------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PencilPair:
    """Pencil ``z F - G`` acting on stacked micro-step vectors.

    Block ``k`` of the new-side vector holds ``z_{r-k}`` and block ``k`` of the
    old-side vector holds ``z_{r-1-k}``, each in block order ``(x_f, x_s, y_f, y_s)``.
    """

    F: np.ndarray
    G: np.ndarray
    r: int
    h_f: float
    dims: Dims
    layout: str
    partition: Partition | None = None
    blocks: StepBlocks | None = field(default=None, repr=False)

    @property
    def block_size(self) -> int:
        return self.dims.n + self.dims.m

    @property
    def order(self) -> int:
        return self.F.shape[0]

    def block_labels(self):
        """Names of the sub-vectors of the new-side and old-side stacks."""
        new = [f"z(t+{self.r - k}h_f)" for k in range(self.r)]
        old = [f"z(t+{self.r - 1 - k}h_f)" for k in range(self.r)]
        return new, old

    def stack(self, window: Sequence[np.ndarray]):
        """New-side and old-side stacks from ``[z_0, ..., z_r]`` in block order."""
        if len(window) != self.r + 1:
            raise ValueError(f"window must hold r + 1 = {self.r + 1} vectors")
        new = np.concatenate([window[self.r - k] for k in range(self.r)])
        old = np.concatenate([window[self.r - 1 - k] for k in range(self.r)])
        return new, old

    def residual(self, window: Sequence[np.ndarray]) -> float:
        """``||F new - G old||_inf / max(1, ||new||_inf)`` for one macro window."""
        new, old = self.stack(window)
        res = self.F @ new - self.G @ old
        return float(np.abs(res).max() / max(1.0, np.abs(new).max()))


def _arrange_stepwise(sb: StepBlocks):
    r, N = sb.r, sb.dims.n + sb.dims.m
    F = np.zeros((r * N, r * N))
    G = np.zeros((r * N, r * N))
    blk = lambda k: slice(k * N, (k + 1) * N)
    F[blk(0), blk(0)] = sb.Z_r
    G[blk(0), blk(0)] += sb.B_r
    G[blk(0), blk(r - 1)] += sb.C_r
    for k in range(1, r):
        i = r - k
        F[blk(k), blk(k)] = sb.Z[i]
        G[blk(k), blk(k)] += sb.B[i]
        G[blk(k), blk(r - 1)] += sb.L[i] + sb.C[i] @ sb.predictor
    return F, G


def _arrange_monodromy(sb: StepBlocks):
    r, d = sb.r, sb.dims
    n, N = d.n, d.n + d.m
    T = sb.transfers()
    F = np.zeros((r * N, r * N))
    G = np.zeros((r * N, r * N))
    blk = lambda k: slice(k * N, (k + 1) * N)
    F[blk(0), blk(0)] = sb.Z_r
    last = (r - 1) * N
    G[blk(0), last : last + n] = sb.B_r @ T[r - 1] + sb.C_r @ sb.consistent
    for k in range(1, r):
        F[blk(k), blk(k)] = np.eye(N)
        # states shift by one micro step, algebraics follow from the start values
        G[k * N : k * N + n, (k - 1) * N : (k - 1) * N + n] = np.eye(n)
        G[k * N + n : (k + 1) * N, last : last + n] = T[r - k][n:]
    return F, G


def assemble_pencil(pdae: PartitionedLinearDae, scheme: SchemeSpec, layout: str = "monodromy") -> PencilPair:
    """Pencil of order ``r (n + m)`` for the linearized single-pass scheme.

    Raises
    ------
    SingularMatrixError
        When the fast algebraic Jacobian or the reduced slow algebraic Jacobian
        is singular.
    ModelError
        For spline interpolation or an unknown layout.
    """
    if layout not in LAYOUTS:
        raise ModelError(f"unknown pencil layout {layout!r}; choose from {', '.join(LAYOUTS)}")
    sb = step_blocks(pdae, scheme)
    F, G = _arrange_stepwise(sb) if layout == "stepwise" else _arrange_monodromy(sb)
    return PencilPair(F, G, sb.r, scheme.h_f, pdae.dims, layout, pdae.partition, sb)


def single_rate_pencil(lin: LinearDae, corrector: str, h: float) -> PencilPair:
    """One-step pencil of a single-rate TM or BEM step of size ``h``."""
    corrector = _norm_choice(corrector, CORRECTORS, "corrector")
    w, w_star = _weights(corrector, h)
    n, m = lin.n, lin.m
    A = lin.full_matrix()
    E = np.zeros((n + m, n + m))
    E[:n, :n] = np.eye(n)
    F = np.vstack([E[:n] - w_star * A[:n], A[n:]])
    G = np.vstack([E[:n] + w * A[:n], np.zeros((m, n + m))])
    return PencilPair(F, G, 1, float(h), Dims(n, m, n, m), "single_rate", None, None)


# ----------------------------------------------------------------------------
# spectrum and deformation
# ----------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PencilSpectrum:
    alpha: np.ndarray
    beta: np.ndarray
    z: np.ndarray
    s_hat: np.ndarray
    h_f: float
    n_infinite: int
    n_zero: int

    @property
    def spectral_radius(self) -> float:
        return float(np.abs(self.z).max()) if self.z.size else 0.0


def solve_pencil(pair: PencilPair) -> PencilSpectrum:
    """Generalized eigenvalues of ``(G, F)`` by QZ, with infinite pairs filtered."""
    F, G = pair.F, pair.G
    if F.shape != G.shape or F.shape[0] != F.shape[1]:
        raise ValueError("F and G must be square and of equal order")
    if not (np.all(np.isfinite(F)) and np.all(np.isfinite(G))):
        raise ValueError("pencil has non-finite entries")
    try:
        alpha, beta = sla.eigvals(G, F, homogeneous_eigvals=True, check_finite=False)
    except sla.LinAlgError as exc:
        raise NumericalError(f"QZ iteration failed: {exc}") from exc
    scale = max(np.abs(F).sum(axis=1).max(initial=0.0), np.abs(G).sum(axis=1).max(initial=0.0))
    finite = np.abs(beta) > INFINITE_BETA_TOL * scale
    z = alpha[finite] / beta[finite]
    mappable = np.abs(z) > ZERO_Z_TOL
    s_hat = np.log(z[mappable].astype(complex)) / pair.h_f
    return PencilSpectrum(
        alpha, beta, z.astype(complex), s_hat, pair.h_f, int((~finite).sum()), int((~mappable).sum())
    )


class ModeMatch(NamedTuple):
    s: complex
    s_hat: complex | None
    z: complex | None
    rel_deform: float
    re_deform: float
    im_deform: float
    nyquist: bool


@dataclass(frozen=True, eq=False)
class DeformationReport:
    matches: list
    spectral_radius: float
    stable: bool
    nyquist_warnings: list
    unmatched: list

    def match_for(self, s) -> ModeMatch:
        for mm in self.matches:
            if mm.s == s:
                return mm
        raise KeyError(s)


def deformation_report(modes: ModeSet | Sequence, spectrum: PencilSpectrum, h_f: float | None = None) -> DeformationReport:
    """Greedy nearest matching of discrete eigenvalues to the exact modes.

    Modes are visited by ascending ``|s|``; each one takes the closest unused
    ``s_hat``.  The returned matches keep the original mode order.
    """
    s_all = np.asarray(modes.eigenvalues if isinstance(modes, ModeSet) else modes, complex)
    h_f = spectrum.h_f if h_f is None else float(h_f)
    z_map = spectrum.z[np.abs(spectrum.z) > ZERO_Z_TOL]
    s_hat = spectrum.s_hat
    used = np.zeros(s_hat.size, dtype=bool)
    result = [None] * s_all.size
    for idx in np.argsort(np.abs(s_all), kind="stable"):
        s = s_all[idx]
        nyq = abs(s.imag) >= math.pi / h_f
        dist = np.where(used, np.inf, np.abs(s_hat - s))
        if dist.size == 0 or not np.isfinite(dist.min()):
            result[idx] = ModeMatch(complex(s), None, None, math.nan, math.nan, math.nan, nyq)
            continue
        j = int(np.argmin(dist))
        used[j] = True
        sh = complex(s_hat[j])
        mag = abs(s)
        rel = abs(sh - s) / mag if mag > 0 else abs(sh - s)
        result[idx] = ModeMatch(
            complex(s), sh, complex(z_map[j]), rel, abs(sh.real - s.real), abs(sh.imag - s.imag), nyq
        )
    rho = spectrum.spectral_radius
    return DeformationReport(
        matches=result,
        spectral_radius=rho,
        stable=bool(rho < 1.0),
        nyquist_warnings=[mm.s for mm in result if mm.nyquist],
        unmatched=[mm.s for mm in result if mm.s_hat is None],
    )


# ----------------------------------------------------------------------------
# convenience drivers
# ----------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PencilAnalysis:
    pair: PencilPair
    spectrum: PencilSpectrum
    modes: ModeSet
    report: DeformationReport
    dominant: int

    @property
    def dominant_match(self) -> ModeMatch:
        return self.report.matches[self.dominant]


def analyze(model, partition: Partition, scheme: SchemeSpec, layout: str = "monodromy",
            modes: ModeSet | None = None) -> PencilAnalysis:
    """Assemble, solve and match in one call (nonlinear models are linearized)."""
    lin = linearize(model)
    if modes is None:
        modes = eig_reduced(reduce_state_matrix(lin))
    pair = assemble_pencil(apply_partition(lin, partition), scheme, layout)
    spec = solve_pencil(pair)
    rep = deformation_report(modes, spec, scheme.h_f)
    return PencilAnalysis(pair, spec, modes, rep, dominant_mode_index(modes.eigenvalues))


class SweepRow(NamedTuple):
    h_f: float
    h_s: float
    r: int
    dominant_rel_deform: float
    dominant_re_deform: float
    dominant_im_deform: float
    spectral_radius: float
    stable: bool
    error: str = ""


def _sweep_point(lin, partition, scheme, layout, modes) -> SweepRow:
    try:
        res = analyze(lin, partition, scheme, layout, modes)
    except (NumericalError, SingularMatrixError, ModelError, ValueError) as exc:
        nan = math.nan
        return SweepRow(scheme.h_f, scheme.h_s, scheme.r, nan, nan, nan, nan, False, str(exc))
    mm = res.dominant_match
    return SweepRow(
        scheme.h_f, scheme.h_s, scheme.r, mm.rel_deform, mm.re_deform, mm.im_deform,
        res.report.spectral_radius, res.report.stable,
    )


def sweep_hf(model, partition: Partition, template: SchemeSpec, hf_grid, r: int,
             layout: str = "monodromy") -> list:
    """Dominant-mode deformation and spectral radius over fast step sizes at fixed ``r``."""
    grid = [float(h) for h in hf_grid]
    if not grid:
        raise ValueError("h_f grid is empty")
    if template.interpolation != "linear":
        raise ModelError("sweeps need linear interpolation; spline schemes are assessed by simulation")
    lin = linearize(model)
    modes = eig_reduced(reduce_state_matrix(lin))
    return [_sweep_point(lin, partition, template.with_steps(h, r), layout, modes) for h in grid]


def sweep_r(model, partition: Partition, template: SchemeSpec, h_s: float, r_grid,
            layout: str = "monodromy") -> list:
    """Dominant-mode deformation over step ratios at fixed slow step ``h_s``."""
    grid = [int(r) for r in r_grid]
    if not grid or any(r < 1 for r in grid):
        raise ValueError("r grid must be nonempty with positive entries")
    if template.interpolation != "linear":
        raise ModelError("sweeps need linear interpolation; spline schemes are assessed by simulation")
    lin = linearize(model)
    modes = eig_reduced(reduce_state_matrix(lin))
    return [_sweep_point(lin, partition, template.with_steps(h_s / r, r), layout, modes) for r in grid]


# ----------------------------------------------------------------------------
# factorization cost
# ----------------------------------------------------------------------------


class CostRow(NamedTuple):
    stage: str
    order: int
    count: int


#: stage labels shared with the simulator's factorization log
STAGE_FULL = "full"
STAGE_PREDICT_SLOW_ALG = "predict_slow_alg"
STAGE_PREDICT_FAST_ALG = "predict_fast_alg"
STAGE_FAST = "fast"
STAGE_SLOW = "slow"


def factorization_cost(scheme: SchemeSpec, dims: Dims, multirate: bool = True,
                       auxiliary: bool = False) -> list:
    """Jacobian factorizations per macro step with a dishonest Newton method.

    ``multirate=False`` gives the single-rate scheme advanced with step ``h_f``.
    With ``auxiliary=True`` the explicit-predictor row also lists the
    factorization of the fast algebraic block ``g_ff,y`` that the algebraic
    predictor solve eliminates before factorizing its order ``m_s`` reduction.
    """
    r = scheme.r
    if not multirate:
        return [CostRow(STAGE_FULL, dims.n + dims.m, r)]
    if scheme.explicit_predictor:
        first = [CostRow(STAGE_PREDICT_SLOW_ALG, dims.m_s, 1)]
        if auxiliary:
            first.insert(0, CostRow(STAGE_PREDICT_FAST_ALG, dims.m_f, 1))
    else:
        first = [CostRow(STAGE_FULL, dims.n + dims.m, 1)]
    return first + [CostRow(STAGE_FAST, dims.n_f + dims.m_f, r), CostRow(STAGE_SLOW, dims.n_s + dims.m_s, 1)]


def cost_table(scheme: SchemeSpec, dims: Dims) -> list:
    """All three scheme variants: ``(label, rows)`` pairs."""
    explicit = replace(scheme, predictor="FEM")
    implicit = scheme if not scheme.explicit_predictor else replace(scheme, predictor="TM")
    return [
        ("multirate_explicit_predictor", factorization_cost(explicit, dims)),
        ("multirate_implicit_predictor", factorization_cost(implicit, dims)),
        ("single_rate_step_h_f", factorization_cost(scheme, dims, multirate=False)),
    ]
