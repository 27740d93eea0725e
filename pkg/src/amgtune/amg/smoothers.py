"""The four relaxation schemes selectable by the tuner.

The enumeration order fixes the one-hot layout used by the surrogate:
``sor-jacobi``, ``l1-jacobi``, ``l1-sor-jacobi``, ``fcf-jacobi``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from amgtune.amg import _kernels
from amgtune.sparse import canonical

FCF_WEIGHT = 2.0 / 3.0


class SmootherKind(enum.IntEnum):
    SOR_JACOBI = 1
    L1_JACOBI = 2
    L1_SOR_JACOBI = 3
    FCF_JACOBI = 4

    @property
    def label(self) -> str:
        return self.name.lower().replace("_", "-")

    @classmethod
    def parse(cls, value) -> "SmootherKind":
        if isinstance(value, cls):
            return value
        if isinstance(value, (int, np.integer)):
            return cls(int(value))
        key = str(value).strip().lower()
        for kind in cls:
            if kind.label == key:
                return kind
        raise ValueError(f"unknown smoother '{value}'; expected one of {[k.label for k in cls]}")

    def one_hot(self) -> np.ndarray:
        b = np.zeros(len(SmootherKind))
        b[self.value - 1] = 1.0
        return b

    @classmethod
    def from_one_hot(cls, b) -> "SmootherKind":
        b = np.asarray(b)
        if b.shape != (4,) or np.count_nonzero(b) != 1:
            raise ValueError("one-hot smoother code must have exactly one nonzero of four")
        return cls(int(np.flatnonzero(b)[0]) + 1)

    @property
    def is_sor(self) -> bool:
        return self in (SmootherKind.SOR_JACOBI, SmootherKind.L1_SOR_JACOBI)


SMOOTHER_NAMES = [k.label for k in SmootherKind]


@dataclass
class SmootherState:
    """Read-only per-level data shared by all smoother kinds."""

    A: object
    diag: np.ndarray
    l1_diag: np.ndarray
    f_mask: np.ndarray | None = None
    omega: float = 1.0
    fcf_omega: float = FCF_WEIGHT

    @classmethod
    def build(cls, A, f_mask=None, omega=1.0, fcf_omega=FCF_WEIGHT) -> "SmootherState":
        A = canonical(A)
        diag = A.diagonal().copy()
        l1 = np.asarray(abs(A).sum(axis=1)).ravel()
        return cls(A, diag, l1, None if f_mask is None else np.asarray(f_mask, dtype=bool), omega, fcf_omega)


def _check_diag(d: np.ndarray) -> None:
    bad = np.flatnonzero(d == 0.0)
    if bad.size:
        raise ZeroDivisionError(f"zero diagonal entry in row {int(bad[0])}")


def _jacobi(A, d, u, f, omega, rows=None):
    r = f - A @ u
    if rows is None:
        u += omega * r / d
    else:
        u[rows] += omega * r[rows] / d[rows]


def relax(state: SmootherState, kind: SmootherKind, u: np.ndarray, f: np.ndarray, nu: int = 1,
          backward: bool = False) -> np.ndarray:
    """Apply ``nu`` sweeps in place and return ``u``."""
    A = state.A
    if kind is SmootherKind.SOR_JACOBI or kind is SmootherKind.L1_SOR_JACOBI:
        d = state.diag if kind is SmootherKind.SOR_JACOBI else state.l1_diag
        _check_diag(d)
        for _ in range(nu):
            _kernels.sor_sweep(A.indptr, A.indices, A.data, d, u, f, state.omega, backward)
    elif kind is SmootherKind.L1_JACOBI:
        _check_diag(state.l1_diag)
        for _ in range(nu):
            _jacobi(A, state.l1_diag, u, f, 1.0)
    elif kind is SmootherKind.FCF_JACOBI:
        _check_diag(state.diag)
        if state.f_mask is None:
            raise ValueError("FCF relaxation needs a C/F splitting")
        fr = np.flatnonzero(state.f_mask)
        cr = np.flatnonzero(~state.f_mask)
        for _ in range(nu):
            _jacobi(A, state.diag, u, f, state.fcf_omega, fr)
            if cr.size:
                _jacobi(A, state.diag, u, f, state.fcf_omega, cr)
            _jacobi(A, state.diag, u, f, state.fcf_omega, fr)
    else:  # pragma: no cover
        raise ValueError(kind)
    return u


def smooth(kind, A, u, f, nu: int = 1, f_mask=None, omega: float = 1.0, backward: bool = False) -> np.ndarray:
    """Return ``u`` after ``nu`` sweeps of the chosen smoother (input untouched).

    ``f_mask`` marks F-points and is required by ``fcf-jacobi``; on a
    level without a splitting (coarsest) pass an all-true mask.
    """
    kind = SmootherKind.parse(kind)
    if nu < 0:
        raise ValueError("nu must be non-negative")
    u = np.array(u, dtype=np.float64, copy=True)
    if nu == 0:
        return u
    f = np.asarray(f, dtype=np.float64)
    if u.shape != (A.shape[0],) or f.shape != u.shape:
        raise ValueError("vector sizes do not match the matrix")
    state = SmootherState.build(A, f_mask=f_mask, omega=omega)
    return relax(state, kind, u, f, nu, backward)
