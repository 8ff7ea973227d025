"""Eigenanalysis of the reduced state matrix, participation factors and
threshold-based fast/slow partitioning.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla

from ._linalg import NumericalError, solve
from .dae_core import FAST, SLOW, LinearDae, Partition, reduce_state_matrix

#: modal matrices with a larger condition number are reported as defective
DEFECTIVE_COND = 1e12


class NotDiagonalizableError(NumericalError):
    """Participation factors need a complete set of eigenvectors."""


class ZeroParticipationWarning(UserWarning):
    """An algebraic variable has no participation in any mode."""


@dataclass(frozen=True, eq=False)
class ModeSet:
    """Eigenvalues with right (columns of ``V``) and left (rows of ``W``) eigenvectors.

    Normalization: the largest-magnitude entry of every ``v_i`` is real and
    positive, and ``w_i @ v_i = 1``.
    """

    eigenvalues: np.ndarray
    V: np.ndarray
    W: np.ndarray
    diagonalizable: bool
    cond_V: float

    @property
    def n(self) -> int:
        return self.eigenvalues.size

    @property
    def frequency_hz(self) -> np.ndarray:
        return np.abs(self.eigenvalues.imag) / (2.0 * math.pi)

    @property
    def damping(self) -> np.ndarray:
        """``-Re s / |s|``; 1 for a zero eigenvalue by convention."""
        mag = np.abs(self.eigenvalues)
        with np.errstate(invalid="ignore", divide="ignore"):
            zeta = np.where(mag > 0, -self.eigenvalues.real / np.where(mag > 0, mag, 1.0), 1.0)
        return zeta


def eig_reduced(A) -> ModeSet:
    """Eigendecomposition of a real square matrix with normalized modal matrices."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("A must be square")
    if not np.all(np.isfinite(A)):
        raise ValueError("A has non-finite entries")
    n = A.shape[0]
    if n == 0:
        e = np.zeros(0, complex)
        return ModeSet(e, np.zeros((0, 0), complex), np.zeros((0, 0), complex), True, 1.0)
    try:
        s, vl, vr = sla.eig(A, left=True, right=True)
    except sla.LinAlgError as exc:
        raise NumericalError(f"eigenvalue computation failed: {exc}") from exc
    V = vr.astype(complex)
    for i in range(n):
        k = int(np.argmax(np.abs(V[:, i])))
        V[:, i] *= abs(V[k, i]) / V[k, i]
        V[:, i] /= np.linalg.norm(V[:, i])
    # scipy's left vectors satisfy vl^H A = s vl^H; the row vector w_i is conj(vl_i)
    W = vl.conj().T.astype(complex)
    with np.errstate(all="ignore"):
        cond = float(np.linalg.cond(V))
    scale = np.einsum("ij,ji->i", W, V)
    diag_ok = np.isfinite(cond) and cond < DEFECTIVE_COND and np.all(np.abs(scale) > 1e-14)
    if diag_ok:
        W = W / scale[:, None]
    return ModeSet(s.astype(complex), V, W, bool(diag_ok), cond)


def participation_states(modes: ModeSet) -> np.ndarray:
    """State participation matrix ``P_x[k, i] = W[i, k] * V[k, i]``."""
    if not modes.diagonalizable:
        raise NotDiagonalizableError(
            "participation factors assume every eigenvalue has equal algebraic and "
            f"geometric multiplicity; the modal matrix has condition {modes.cond_V:.3e}"
        )
    return modes.W.T * modes.V


def _normalize_rows(P: np.ndarray, names=None) -> np.ndarray:
    out = P.copy()
    for j, row in enumerate(P):
        nrm = np.linalg.norm(row)
        if nrm == 0.0:
            label = names[j] if names is not None else str(j)
            warnings.warn(
                f"algebraic variable {label} has zero participation in every mode",
                ZeroParticipationWarning,
                stacklevel=3,
            )
            continue
        out[j] = row / nrm
    return out


def participation_algebraic(lin: LinearDae, P_x: np.ndarray) -> np.ndarray:
    """Algebraic participation ``-g_y^{-1} g_x P_x`` with unit-norm rows.

    Rows that are identically zero stay zero and trigger a
    :class:`ZeroParticipationWarning`.
    """
    if lin.m == 0:
        return np.zeros((0, P_x.shape[1]), complex)
    C = -solve(lin.g_y, lin.g_x, "algebraic Jacobian g_y")
    return _normalize_rows(C @ P_x, lin.alg_names)


@dataclass(frozen=True, eq=False)
class ParticipationMatrices:
    P_x: np.ndarray
    P_y: np.ndarray
    dominant_state_mode: np.ndarray
    dominant_alg_mode: np.ndarray
    zero_alg_rows: np.ndarray


def dominant_modes(P: np.ndarray) -> np.ndarray:
    """Index of the largest ``|p|`` in every row; ties go to the lowest index."""
    if P.shape[1] == 0:
        return np.full(P.shape[0], -1, dtype=int)
    return np.argmax(np.abs(P), axis=1).astype(int)


def participation(lin: LinearDae, modes: ModeSet | None = None) -> ParticipationMatrices:
    """Both participation matrices and the dominant mode of every variable."""
    if modes is None:
        modes = eig_reduced(reduce_state_matrix(lin))
    P_x = participation_states(modes)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ZeroParticipationWarning)
        P_y = participation_algebraic(lin, P_x)
    zero = np.array([np.linalg.norm(r) == 0.0 for r in P_y], dtype=bool)
    for j in np.flatnonzero(zero):
        warnings.warn(
            f"algebraic variable {lin.alg_names[j]} has zero participation in every mode",
            ZeroParticipationWarning,
            stacklevel=2,
        )
    dom_y = dominant_modes(P_y)
    dom_y[zero] = -1
    return ParticipationMatrices(P_x, P_y, dominant_modes(P_x), dom_y, zero)


@dataclass(frozen=True, eq=False)
class PartitionReport:
    """Partition together with the dominant eigenvalue behind every label."""

    partition: Partition
    modes: ModeSet
    participation: ParticipationMatrices
    delta: float

    def rows(self, lin: LinearDae):
        """``(name, kind, dominant eigenvalue or None, label)`` per variable."""
        s = self.modes.eigenvalues
        out = []
        for k, name in enumerate(lin.state_names):
            out.append((name, "state", s[self.participation.dominant_state_mode[k]], self.partition.state_class[k]))
        for j, name in enumerate(lin.alg_names):
            idx = self.participation.dominant_alg_mode[j]
            out.append((name, "algebraic", None if idx < 0 else s[idx], self.partition.alg_class[j]))
        return out


def pf_partition_report(lin: LinearDae, delta: float) -> PartitionReport:
    """Participation-based partition: a variable is fast iff ``|lambda| > delta``.

    ``lambda`` is the eigenvalue with the largest participation magnitude in the
    variable's row.  Algebraics with an all-zero participation row are slow.
    """
    delta = float(delta)
    if not delta >= 0.0:
        raise ValueError("delta must be nonnegative")
    modes = eig_reduced(reduce_state_matrix(lin))
    pm = participation(lin, modes)
    mag = np.abs(modes.eigenvalues)
    states = tuple(FAST if mag[i] > delta else SLOW for i in pm.dominant_state_mode)
    algs = tuple(
        SLOW if i < 0 else (FAST if mag[i] > delta else SLOW) for i in pm.dominant_alg_mode
    )
    return PartitionReport(Partition(states, algs), modes, pm, delta)


def pf_partition(lin: LinearDae, delta: float) -> Partition:
    """Fast/slow partition by participation-factor dominance (see :func:`pf_partition_report`)."""
    return pf_partition_report(lin, delta).partition


def modal_analysis(lin: LinearDae) -> ModeSet:
    return eig_reduced(reduce_state_matrix(lin))


def dominant_mode_index(eigenvalues) -> int:
    """Least-damped oscillatory mode (positive imaginary part of the pair).

    Ties in damping go to the larger ``|Im s|``.  When the spectrum has no
    complex pair the least-damped real mode (largest real part) is returned.
    """
    s = np.asarray(eigenvalues, complex)
    if s.size == 0:
        raise ValueError("empty spectrum")
    mag = np.abs(s)
    osc = np.flatnonzero(s.imag > 1e-12 * np.maximum(mag, 1.0))
    if osc.size:
        zeta = -s.real[osc] / mag[osc]
        order = np.lexsort((-np.abs(s.imag[osc]), np.round(zeta, 12)))
        return int(osc[order[0]])
    order = np.lexsort((np.arange(s.size), -s.real))
    return int(order[0])
