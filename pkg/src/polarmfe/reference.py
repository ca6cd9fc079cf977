"""Direct pseudospectral solution of the oscillatory system, used as ground truth.

The linear part ``-(A(d/dx) + E/eps)`` is diagonal in Fourier space up to an
``n x n`` block per mode and is propagated exactly; the nonlinearity
``eps T(u, u, u)`` is handled by Lawson-RK4.  Real fields are stored through
their ``rfftn`` coefficients.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Sequence

import numpy as np
import scipy.fft as sfft

from .errors import BlowupError
from .field import GridSpec
from .integrators import lawson_rk4_step, step_plan

__all__ = ["OscillatorySolverConfig", "mode_propagator", "Trajectory", "reference_solve"]

BLOWUP = 1e6


@dataclass(frozen=True)
class OscillatorySolverConfig:
    """Fast-scale solver settings.

    ``dt`` must not exceed ``eps/20`` unless ``coarse=True`` (used for
    step-size studies and quick runs).
    """

    grid_x: GridSpec
    epsilon: float
    dt: float
    t_end: float
    integrator: str = "lawson-rk4"
    coarse: bool = False

    def __post_init__(self):
        if self.integrator != "lawson-rk4":
            raise ValueError(f"unknown integrator {self.integrator!r}")
        if not self.dt > 0 or not self.epsilon > 0:
            raise ValueError("dt and epsilon must be positive")
        if not self.coarse and self.dt > self.epsilon / 20 * (1 + 1e-12):
            raise ValueError(f"dt={self.dt} exceeds eps/20={self.epsilon / 20}")


def mode_propagator(k, dt: float, spec, epsilon: float) -> np.ndarray:
    """``exp(-dt (i A(k) + E/eps))`` for one wavenumber or a stack of them.

    ``k`` has shape ``(d,)`` or ``(..., d)``; the result has shape ``(..., n, n)``.
    Uses the eigendecomposition of the Hermitian ``A(eps k) - iE``.
    """
    k = np.asarray(k, float)
    single = k.ndim == 1
    k = np.atleast_2d(k) if single else k
    Hk = np.einsum("...l,lij->...ij", epsilon * k, spec.A) - 1j * spec.E
    lam, Q = np.linalg.eigh(Hk)
    U = (Q * np.exp(-1j * dt * lam / epsilon)[..., None, :]) @ np.conj(np.swapaxes(Q, -1, -2))
    return U[0] if single else U


def _rfft_wavenumbers(grid: GridSpec):
    ks = [2 * np.pi * sfft.fftfreq(Ni, d=Li / Ni) for Li, Ni in zip(grid.L[:-1], grid.N[:-1])]
    ks.append(2 * np.pi * sfft.rfftfreq(grid.N[-1], d=grid.L[-1] / grid.N[-1]))
    return np.stack(np.meshgrid(*ks, indexing="ij"), axis=-1)


class Trajectory:
    """Fields of one reference run at the requested times."""

    def __init__(self, times, fields: Dict[float, np.ndarray], steps: int):
        self.times = tuple(times)
        self._fields = fields
        self.steps = steps

    def __call__(self, t: float) -> np.ndarray:
        for s, u in self._fields.items():
            if abs(s - t) <= 1e-12 * max(1.0, abs(t)):
                return u
        raise KeyError(f"time {t} was not requested from the reference solver")


def reference_solve(u0: np.ndarray, config: OscillatorySolverConfig, spec,
                    times: Sequence[float] = None) -> Trajectory:
    """Integrate from the real field ``u0`` and sample at ``times`` (default: ``t_end``)."""
    grid = config.grid_x
    d = grid.d
    u0 = np.asarray(u0)
    if np.iscomplexobj(u0):
        if np.max(np.abs(u0.imag)) > 1e-10:
            raise ValueError("reference solver needs a real initial field")
        u0 = u0.real
    if u0.shape != grid.shape + (spec.n,):
        raise ValueError(f"initial field has shape {u0.shape}, expected {grid.shape + (spec.n,)}")
    times = sorted({float(t) for t in (times if times is not None else [config.t_end])})
    ax = tuple(range(d))
    k = _rfft_wavenumbers(grid)
    eps = config.epsilon
    T = spec.T
    N = grid.shape

    def nonlinear(uh):
        if T.is_zero:
            return np.zeros_like(uh)
        u = sfft.irfftn(uh, s=N, axes=ax)
        return eps * sfft.rfftn(T(u, u, u), axes=ax)

    uh = sfft.rfftn(u0, axes=ax)
    out = {}
    t = 0.0
    steps = 0
    for stop in times:
        if stop < t - 1e-12:
            raise ValueError("times must be non-negative")
        if stop - t > 1e-14:
            n, h = step_plan(t, stop, config.dt)
            U = mode_propagator(k, h / 2, spec, eps)
            flow = lambda x: np.einsum("...ij,...j->...i", U, x)
            with np.errstate(over="ignore", invalid="ignore"):
                for i in range(n):
                    uh = lawson_rk4_step(uh, h, flow, nonlinear)
                    # largest Fourier amplitude, a lower bound for the max norm
                    amp = float(np.max(np.abs(uh))) * 2 / grid.size
                    if not np.isfinite(amp) or amp > BLOWUP:
                        raise BlowupError(f"reference solution exceeded {BLOWUP:g} at t = {t + (i + 1) * h:.4g}")
            steps += n
        t = stop
        out[stop] = sfft.irfftn(uh, s=N, axes=ax)
    return Trajectory(times, out, steps)
