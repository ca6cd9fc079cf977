"""Spectral data at the wave vector: eigenpair, projections, group velocity, Hessian, L_j.

The dispersion matrix ``A(k) - iE`` is Hermitian.  Derivatives of the selected
eigenvalue branch are taken by central finite differences with one Richardson
extrapolation step; the branch is followed by maximal eigenvector overlap.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Dict, NamedTuple

import numpy as np

from .errors import AssumptionError, BranchTrackingError, DegenerateBranchError

__all__ = [
    "DispersionData",
    "Eigenpair",
    "assemble_A",
    "eigenpair",
    "group_velocity",
    "hessian",
    "L_matrix",
    "L_inverse",
    "L_perp_inverse",
    "compute_dispersion",
]

GAP_TOL = 1e-8
SINGULAR_TOL = 1e-10
GRAD_STEP = 1e-4
HESS_STEP = 1e-3
MIN_OVERLAP = 0.9


class Eigenpair(NamedTuple):
    omega: float
    v: np.ndarray
    P: np.ndarray
    gap: float


def assemble_A(k, spec) -> np.ndarray:
    """``A(k) = sum_l k_l A_l`` as a complex array."""
    k = np.atleast_1d(np.asarray(k, float))
    return np.tensordot(k, spec.A, axes=1).astype(complex)


def _dispersion_matrix(spec, k):
    return assemble_A(k, spec) - 1j * spec.E


def _fix_phase(v):
    mag = np.abs(v)
    i = int(np.flatnonzero(mag >= mag.max() * (1 - 1e-12))[0])
    return v * (np.conj(v[i]) / mag[i])


def eigenpair(spec, k, check_gap: bool = True) -> Eigenpair:
    """Selected eigenvalue of ``A(k) - iE`` with unit eigenvector, projector and gap.

    The eigenvector phase makes its largest-modulus component real positive
    (first such component on ties).
    """
    lam, Q = np.linalg.eigh(_dispersion_matrix(spec, k))
    i = spec.branch.select(lam)
    others = np.delete(lam, i)
    gap = float(np.min(np.abs(others - lam[i]))) if others.size else np.inf
    if check_gap and gap < GAP_TOL:
        raise DegenerateBranchError(gap)
    v = _fix_phase(Q[:, i])
    return Eigenpair(float(lam[i]), v, np.outer(v, v.conj()), gap)


def _tracked_eigenvalue(spec, k, v_ref):
    lam, Q = np.linalg.eigh(_dispersion_matrix(spec, k))
    overlap = np.abs(Q.conj().T @ v_ref)
    i = int(np.argmax(overlap))
    if overlap[i] < MIN_OVERLAP:
        raise BranchTrackingError(float(overlap[i]))
    return lam[i]


def _gradient(spec, k, v, h):
    d = k.size
    g = np.empty(d)
    for l in range(d):
        e = np.zeros(d)
        e[l] = h
        g[l] = (_tracked_eigenvalue(spec, k + e, v) - _tracked_eigenvalue(spec, k - e, v)) / (2 * h)
    return g


def _hessian(spec, k, v, omega, h):
    d = k.size
    H = np.empty((d, d))
    w = lambda kk: _tracked_eigenvalue(spec, kk, v)
    eye = np.eye(d) * h
    for a in range(d):
        H[a, a] = (w(k + eye[a]) - 2 * omega + w(k - eye[a])) / h**2
        for b in range(a):
            H[a, b] = H[b, a] = (w(k + eye[a] + eye[b]) - w(k + eye[a] - eye[b])
                                 - w(k - eye[a] + eye[b]) + w(k - eye[a] - eye[b])) / (4 * h**2)
    return H


def group_velocity(spec, k) -> np.ndarray:
    """Gradient of the selected branch at ``k`` (central differences, Richardson-extrapolated)."""
    k = np.atleast_1d(np.asarray(k, float))
    v = eigenpair(spec, k).v
    g1 = _gradient(spec, k, v, GRAD_STEP)
    g2 = _gradient(spec, k, v, GRAD_STEP / 2)
    return (4 * g2 - g1) / 3


def hessian(spec, k) -> np.ndarray:
    """Hessian of the selected branch at ``k`` (central differences, Richardson-extrapolated)."""
    k = np.atleast_1d(np.asarray(k, float))
    ep = eigenpair(spec, k)
    H1 = _hessian(spec, k, ep.v, ep.omega, HESS_STEP)
    H2 = _hessian(spec, k, ep.v, ep.omega, HESS_STEP / 2)
    H = (4 * H2 - H1) / 3
    return (H + H.T) / 2


def L_matrix(spec, omega: float, j: int) -> np.ndarray:
    """``L_j = -j omega I + A(j kappa) - iE``."""
    return -j * omega * np.eye(spec.n) + _dispersion_matrix(spec, j * spec.kappa)


def L_inverse(spec, omega: float, j: int) -> np.ndarray:
    """Dense inverse of ``L_j``; raises `AssumptionError` if it is numerically singular."""
    Lj = L_matrix(spec, omega, j)
    smin = float(np.linalg.svd(Lj, compute_uv=False)[-1])
    if smin < SINGULAR_TOL:
        raise AssumptionError(j, smin)
    return np.linalg.solve(Lj, np.eye(spec.n))


def L_perp_inverse(spec, k=None) -> np.ndarray:
    """Inverse of ``L_1`` on the range of ``P_perp``, extended by zero on the range of ``P``.

    Built from the spectral decomposition: ``sum_{i != sel} P_i / (omega_i - omega)``.
    """
    k = spec.kappa if k is None else np.atleast_1d(np.asarray(k, float))
    lam, Q = np.linalg.eigh(_dispersion_matrix(spec, k))
    i = spec.branch.select(lam)
    others = np.delete(np.arange(lam.size), i)
    if others.size and np.min(np.abs(lam[others] - lam[i])) < GAP_TOL:
        raise DegenerateBranchError(float(np.min(np.abs(lam[others] - lam[i]))))
    Qo = Q[:, others]
    return (Qo / (lam[others] - lam[i])) @ Qo.conj().T


@dataclass(frozen=True, eq=False)
class DispersionData:
    """Spectral objects at the wave vector ``kappa`` for expansion order ``m``."""

    kappa: np.ndarray
    omega: float
    v: np.ndarray
    P: np.ndarray
    Pperp: np.ndarray
    cg: np.ndarray
    H: np.ndarray
    Lj_inv: Dict[int, np.ndarray]
    Lperp_inv: np.ndarray
    gap: float
    m: int

    def L(self, spec, j):
        return L_matrix(spec, self.omega, j)

    def to_json(self):
        cplx = lambda a: {"re": np.real(a).tolist(), "im": np.imag(a).tolist()}
        return json.dumps({
            "kappa": self.kappa.tolist(),
            "omega": self.omega,
            "v": cplx(self.v),
            "P": cplx(self.P),
            "cg": self.cg.tolist(),
            "H": self.H.tolist(),
            "gap": self.gap,
            "m": self.m,
            "Lperp_inv": cplx(self.Lperp_inv),
            "Lj_inv": {str(j): cplx(M) for j, M in self.Lj_inv.items()},
        }, indent=2)


def compute_dispersion(spec, m: int = 1) -> DispersionData:
    """Everything the construction needs at ``spec.kappa``; ``L_j^{-1}`` for odd ``3 <= j <= m+2``."""
    ep = eigenpair(spec, spec.kappa)
    arrays = {
        "P": ep.P,
        "Pperp": np.eye(spec.n) - ep.P,
        "cg": group_velocity(spec, spec.kappa),
        "H": hessian(spec, spec.kappa),
        "Lperp_inv": L_perp_inverse(spec),
        "v": ep.v,
        "kappa": np.array(spec.kappa),
    }
    for a in arrays.values():
        a.setflags(write=False)
    Lj_inv = {j: L_inverse(spec, ep.omega, j) for j in range(3, m + 3, 2)}
    return DispersionData(omega=ep.omega, Lj_inv=Lj_inv, gap=ep.gap, m=m, **arrays)
