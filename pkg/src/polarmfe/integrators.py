"""Lawson (integrating-factor) Runge-Kutta 4 step for ``u' = L u + N(u)``."""
import numpy as np


def lawson_rk4_step(u, h, half_flow, nonlinear):
    """Advance ``u`` by ``h``.

    ``half_flow(x)`` must apply ``exp(h L / 2)``; the full flow is taken as two
    half flows, so only one propagator is ever needed.
    """
    k1 = nonlinear(u)
    e2u = half_flow(u)
    k2 = nonlinear(half_flow(u + (h / 2) * k1))
    k3 = nonlinear(e2u + (h / 2) * k2)
    k4 = nonlinear(half_flow(e2u + h * k3))
    return half_flow(half_flow(u + (h / 6) * k1) + (h / 3) * (k2 + k3)) + (h / 6) * k4


def step_plan(t0, t1, dt):
    """Number of steps and the adjusted step that lands exactly on ``t1``."""
    span = t1 - t0
    n = max(1, int(np.ceil(span / dt - 1e-9)))
    return n, span / n
