"""From slow modulation data to the physical oscillatory field.

    u(t, x) = sum_{j in J} exp(i j (kappa.x - omega t) / eps) vtilde_j(eps t, x - c_g t)

with ``vtilde_{-j} = conj(vtilde_j)``.  On a torus the fast phase
``exp(i kappa.x / eps)`` is periodic only when ``kappa_l L_l / (2 pi eps)`` is
an integer for every direction, which restricts the admissible eps.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AdmissibilityError, TauMismatchError
from .field import GridSpec, resample
from .mfe import ModulationHierarchy, _vtilde_raw

__all__ = [
    "ReconstructionPlan",
    "check_admissible",
    "make_plan",
    "polarized_initial_data",
    "evaluate_mfe",
]

ADMISSIBLE_TOL = 1e-9
REAL_TOL = 1e-10


def check_admissible(kappa, L, epsilon) -> np.ndarray:
    """Integer phase counts ``M_l = kappa_l L_l / (2 pi eps)``; raises if any is fractional."""
    if not epsilon > 0:
        raise AdmissibilityError(f"epsilon must be positive, got {epsilon}")
    ratio = np.asarray(kappa, float) * np.asarray(L, float) / (2 * np.pi * epsilon)
    M = np.rint(ratio)
    if np.any(np.abs(ratio - M) > ADMISSIBLE_TOL * np.maximum(1.0, np.abs(ratio))):
        raise AdmissibilityError(
            f"eps={epsilon} is not admissible: kappa L/(2 pi eps) = {ratio.tolist()} is not integral")
    return M.astype(np.int64)


def _next_pow2(x):
    return 1 << max(4, int(np.ceil(np.log2(max(x, 1)))))


@dataclass(frozen=True, eq=False)
class ReconstructionPlan:
    """Fast-scale grid and phase data for one eps."""

    epsilon: float
    grid_x: GridSpec
    kappa: np.ndarray
    omega: float
    cg: np.ndarray
    M: np.ndarray

    def __post_init__(self):
        M = check_admissible(self.kappa, self.grid_x.L, self.epsilon)
        if not np.array_equal(M, np.asarray(self.M)):
            raise AdmissibilityError("phase counts M do not match kappa, L and eps")


def make_plan(ctx, epsilon: float, oversample: float = 8.0, harmonics: int = None) -> ReconstructionPlan:
    """Plan on the slow grid's torus with ``N_x >= oversample * (3m M)`` points per direction.

    ``harmonics`` overrides the highest resolved harmonic (default ``3m``).
    """
    disp, grid = ctx.disp, ctx.grid
    M = check_admissible(disp.kappa, grid.L, epsilon)
    top = 3 * ctx.m if harmonics is None else harmonics
    N = tuple(max(Ns, _next_pow2(oversample * top * abs(Ml))) for Ns, Ml in zip(grid.N, M))
    return ReconstructionPlan(epsilon, GridSpec(grid.L, N), np.array(disp.kappa), disp.omega,
                              np.array(disp.cg), M)


def _fast_phase(plan: ReconstructionPlan, j: int):
    """``exp(i j kappa.x / eps)`` on the x-grid, from exact integer phase counts."""
    grid = plan.grid_x
    total = np.zeros(grid.shape)
    for l, (Nl, Ml) in enumerate(zip(grid.N, plan.M)):
        i = np.arange(Nl, dtype=np.int64)
        frac = np.mod(j * int(Ml) * i, Nl) / Nl
        shape = [1] * grid.d
        shape[l] = Nl
        total = total + frac.reshape(shape)
    return np.exp(2j * np.pi * total)


def evaluate_mfe(hier: ModulationHierarchy, plan: ReconstructionPlan, t: float,
                 nls_only: bool = False) -> np.ndarray:
    """Physical field ``u(t, .)`` on ``plan.grid_x`` from a hierarchy at ``tau = eps t``.

    With ``nls_only`` only the leading amplitude ``y_1^0`` is kept (the NLS
    approximation).  Returns a real array of shape ``grid_x.shape + (n,)``.
    """
    eps = plan.epsilon
    if abs(hier.tau - eps * t) > 1e-12:
        raise TauMismatchError(f"hierarchy is at tau={hier.tau}, need eps*t={eps * t}")
    ctx = hier.ctx
    if nls_only:
        slow = {1: hier.y(0)}
    else:
        slow = _vtilde_raw(hier, eps)
    shift = plan.cg * t
    u = np.zeros(plan.grid_x.shape + (ctx.n,), complex)
    for j, vt in slow.items():
        if vt is None:
            continue
        on_x = resample(ctx.field(vt), plan.grid_x, shift).values
        term = on_x * (_fast_phase(plan, j) * np.exp(-1j * j * plan.omega * t / eps))[..., None]
        u += term + np.conj(term)
    imag = float(np.max(np.abs(u.imag), initial=0.0))
    if imag > REAL_TOL * max(1.0, float(np.max(np.abs(u.real), initial=0.0))):
        raise ArithmeticError(f"reconstructed field is not real (|Im u| = {imag:.2e})")
    return u.real.copy()


def polarized_initial_data(hier: ModulationHierarchy, plan: ReconstructionPlan) -> np.ndarray:
    """Polarized initial value ``u(0, .)`` generated by the expansion at ``tau = 0``."""
    return evaluate_mfe(hier, plan, 0.0)
