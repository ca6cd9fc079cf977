"""Slow-time integration of the amplitude hierarchy ``y_1^0 .. y_1^m``.

``y_1^0`` solves the nonlinear Schroedinger equation, each ``y_1^l`` (l >= 1)
a linear inhomogeneous Schroedinger equation forced by lower levels.  All
levels are advanced together so that the forcing is always evaluated at the
same slow time.  The common linear part ``(i/2) div H grad`` is a scalar
Fourier multiplier and is propagated exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Sequence, Tuple

import numpy as np
import scipy.fft as sfft

from .errors import BlowupError, ProjectionError
from .field import EnvelopeField, wiener_norm, _fft, _ifft
from .integrators import lawson_rk4_step, step_plan
from .mfe import MFEContext, ModulationHierarchy

__all__ = ["HierarchyState", "initial_state", "nls_rhs", "hierarchy_rhs", "propagate", "solve_hierarchy"]

BLOWUP = 1e6
PROJECTION_TOL = 1e-8


@dataclass(frozen=True)
class HierarchyState:
    """Amplitudes ``y_1^0..y_1^m`` at slow time ``tau``.

    ``checkpoints`` lists the times at which ``snapshots`` (earlier states of
    the same run) were stored by `propagate`.
    """

    tau: float
    y: Tuple[EnvelopeField, ...]
    checkpoints: Tuple[float, ...] = ()
    snapshots: Tuple["HierarchyState", ...] = dc_field(default=(), repr=False)

    def hierarchy(self, ctx: MFEContext) -> ModulationHierarchy:
        return ModulationHierarchy(ctx, self.y, self.tau)

    def at(self, tau):
        for t, s in zip(self.checkpoints, self.snapshots):
            if abs(t - tau) <= 1e-12:
                return s
        if abs(self.tau - tau) <= 1e-12:
            return self
        raise KeyError(f"no state stored at tau={tau}")


def initial_state(ctx: MFEContext, p: EnvelopeField) -> HierarchyState:
    """``y_1^0(0) = p`` and ``y_1^l(0) = 0`` for ``l >= 1``."""
    zero = EnvelopeField.zeros(ctx.grid, ctx.n)
    return HierarchyState(0.0, (p,) + (zero,) * ctx.m)


def _check_range(ctx, y):
    off = np.max(np.abs(y @ ctx.disp.Pperp.T), initial=0.0)
    if off > PROJECTION_TOL:
        raise ProjectionError(f"field leaves the range of P by {off:.2e}")


def nls_rhs(y0: EnvelopeField, ctx: MFEContext) -> EnvelopeField:
    """``(i/2) div H grad y0 + P (T(y,y,ybar) + T(y,ybar,y) + T(ybar,y,y))``."""
    _check_range(ctx, y0.values)
    ys = [y0] + [EnvelopeField.zeros(ctx.grid, ctx.n)] * ctx.m
    return ctx.field(ModulationHierarchy(ctx, ys).rate(0))


def hierarchy_rhs(state: HierarchyState, ell: int, ctx: MFEContext,
                  hier: ModulationHierarchy = None) -> EnvelopeField:
    """Right side of the ``y_1^ell`` evolution equation at ``state``."""
    if not 0 <= ell <= ctx.m:
        raise ValueError(f"level must be in [0, {ctx.m}]")
    hier = hier or state.hierarchy(ctx)
    return ctx.field(hier.rate(ell))


def _check_blowup(ctx, Y):
    for y in Y:
        w = float(np.sum(np.linalg.norm(_fft(y, ctx.d), axis=-1)))
        if not np.isfinite(w) or w > BLOWUP:
            raise BlowupError(f"hierarchy amplitude exceeded {BLOWUP:g} (Wiener norm {w:.3e})")


def propagate(state: HierarchyState, to_tau: float, dtau: float, ctx: MFEContext,
              checkpoints: Sequence[float] = ()) -> HierarchyState:
    """Advance the coupled hierarchy with Lawson-RK4 from ``state.tau`` to ``to_tau``.

    Steps are shortened so that every requested checkpoint is hit exactly;
    ``to_tau`` may lie before ``state.tau`` (backward integration).
    """
    t0 = state.tau
    sign = 1.0 if to_tau >= t0 else -1.0
    stops = sorted({float(t) for t in checkpoints if sign * (t - t0) > 1e-14 and sign * (to_tau - t) > 1e-14}
                   | {float(to_tau)}, key=lambda t: sign * t)
    d = ctx.d
    ax = tuple(range(1, d + 1))
    Y = np.stack([np.asarray(y.values) for y in state.y])
    snaps = list(zip(state.checkpoints, state.snapshots))
    if any(abs(t - t0) <= 1e-14 for t in checkpoints):
        snaps.append((t0, HierarchyState(t0, state.y)))

    def forcing(Yc):
        hier = ModulationHierarchy(ctx, list(Yc))
        out = np.empty_like(Yc)
        for l in range(ctx.m + 1):
            f = hier.forcing(l)
            out[l] = 0.0 if f is None else f
        return out

    t = t0
    for stop in stops:
        if abs(stop - t) <= 1e-14:
            continue
        n, h = step_plan(0.0, abs(stop - t), abs(dtau))
        h *= sign
        half = np.exp(0.5 * h * ctx.schroedinger_symbol)[None, ..., None]
        flow = lambda x: sfft.ifftn(sfft.fftn(x, axes=ax) * half, axes=ax)
        for _ in range(n):
            Y = lawson_rk4_step(Y, h, flow, forcing)
            _check_blowup(ctx, Y)
        t = stop
        if stop != to_tau or any(abs(stop - c) <= 1e-14 for c in checkpoints):
            snaps.append((stop, HierarchyState(stop, tuple(EnvelopeField(ctx.grid, y) for y in Y))))
    snaps.sort(key=lambda s: s[0])
    return HierarchyState(float(to_tau), tuple(EnvelopeField(ctx.grid, y) for y in Y),
                          tuple(s[0] for s in snaps), tuple(s[1] for s in snaps))


def solve_hierarchy(ctx: MFEContext, p: EnvelopeField, taus: Sequence[float], dtau: float = None):
    """Integrate from ``p`` and return the states at the requested slow times (sorted)."""
    taus = sorted(float(t) for t in taus)
    dtau = dtau or ctx.spec.tau_end / 200
    state = initial_state(ctx, p)
    final = propagate(state, taus[-1], dtau, ctx, checkpoints=taus)
    return [final.at(t) for t in taus]
