"""Modulation coefficients of the polarized expansion and their tau-derivatives.

Given the amplitudes ``y_1^l`` (l = 0..m) at one slow time, every other
coefficient is an explicit expression in them:

    z_1^l   = i Lperp^{-1} Pperp ( d_tau z_1^{l-2} + B (y_1^{l-1} + z_1^{l-1}) - S_1^{l-2} )
    v_j^l   = i L_j^{-1} ( d_tau v_j^{l-2} + B v_j^{l-1} - S_j^{l-2} ),      3 <= j <= m

where ``S_j^l = sum_{#J=j, |L|_1=l} T(v_J^L)``.  Time derivatives are never
approximated: ``d_tau y_1^l`` is replaced by the right side of its evolution
equation and everything else is differentiated through the graph (linear maps
commute with ``d_tau``, T obeys the Leibniz rule).  The recursion lowers the
superscript whenever it raises the derivative order, so it terminates.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache
from itertools import product
from math import factorial
from typing import Dict, List, Tuple

import numpy as np

from .errors import RecursionDepthError
from .field import EnvelopeField, GridSpec, B_symbol, dealias_mask, wiener_norm, _fft, _ifft

__all__ = [
    "IndexSet",
    "enumerate_terms",
    "MFEContext",
    "ModulationHierarchy",
    "z_field",
    "harmonic_field",
    "tau_derivative",
    "assemble_vtilde",
    "bound_diagnostics",
    "Residual",
    "residual",
]


def check_order(m):
    if not (isinstance(m, (int, np.integer)) and m >= 1 and m % 2 == 1):
        raise ValueError(f"expansion order m must be an odd positive integer, got {m!r}")
    return int(m)


@dataclass(frozen=True)
class IndexSet:
    """Odd harmonics used by an order-``m`` expansion."""

    m: int

    def __post_init__(self):
        check_order(self.m)

    @property
    def Jplus(self):
        return tuple(range(1, self.m + 1, 2))

    @property
    def J(self):
        return tuple(sorted(self.Jplus + tuple(-j for j in self.Jplus)))

    @property
    def harmonics3m(self):
        return tuple(range(1, 3 * self.m + 1, 2))


@lru_cache(maxsize=None)
def _terms(j, ell, m):
    J1 = [k for k in range(-m, m + 1) if k % 2]
    out = []
    for J in product(J1, repeat=3):
        if sum(J) != j:
            continue
        lo = [abs(k) - 1 for k in J]
        for L in product(range(m + 1), repeat=3):
            if sum(L) == ell and all(a >= b for a, b in zip(L, lo)):
                out.append((J, L))
    return tuple(sorted(out))


def enumerate_terms(j: int, ell: int, idx: IndexSet) -> List[Tuple[tuple, tuple]]:
    """All ``(J, L)`` with ``#J = j``, ``|L|_1 = ell``, ``|j_i| - 1 <= l_i <= m``, sorted."""
    return list(_terms(int(j), int(ell), idx.m))


def _multinomial_splits(r):
    for r1 in range(r + 1):
        for r2 in range(r - r1 + 1):
            r3 = r - r1 - r2
            yield (r1, r2, r3), factorial(r) // (factorial(r1) * factorial(r2) * factorial(r3))


def _add(*terms):
    """Sum of arrays where ``None`` means an identically zero field."""
    out = None
    for t in terms:
        if t is None:
            continue
        out = t if out is None else out + t
    return out


def _neg(x):
    return None if x is None else -x


class MFEContext:
    """Problem data shared by all hierarchies of one run: operators, symbols, order."""

    def __init__(self, spec, disp, grid: GridSpec, m: int, dealias: bool = False):
        self.spec = spec
        self.disp = disp
        self.grid = grid
        self.m = check_order(m)
        self.idx = IndexSet(self.m)
        self.dealias = dealias
        missing = [j for j in range(3, self.m + 3, 2) if j not in disp.Lj_inv]
        if missing:
            raise ValueError(f"dispersion data lacks L_j^-1 for j={missing}; recompute with m>={self.m}")
        self.T = spec.T
        self.n = spec.n
        self.d = grid.d

    @cached_property
    def B_symbol(self):
        return B_symbol(self.grid, self.spec, self.disp.cg)

    @cached_property
    def coupling_symbol(self):
        """Symbol of ``-P A(d) i Lperp^{-1} Pperp`` = ``P A(k) Lperp^{-1} Pperp``."""
        k = self.grid.wavenumbers
        Ak = np.einsum("...l,lij->...ij", k, self.spec.A)
        right = self.disp.Lperp_inv @ self.disp.Pperp
        return self.disp.P @ Ak @ right

    @cached_property
    def schroedinger_symbol(self):
        """Symbol of ``(i/2) div H grad``: ``-(i/2) k^T H k``."""
        k = self.grid.wavenumbers
        return -0.5j * np.einsum("...a,ab,...b->...", k, self.disp.H, k)

    @cached_property
    def mask(self):
        return dealias_mask(self.grid)

    # raw-array operators; ``None`` is the zero field
    def spectral(self, x, symbol):
        if x is None:
            return None
        c = _fft(x, self.d)
        if symbol.ndim == self.d:
            c = c * symbol[..., None]
        else:
            c = np.einsum("...ij,...j->...i", symbol, c)
        return _ifft(c, self.d)

    def B(self, x):
        return self.spectral(x, self.B_symbol)

    def matrix(self, M, x):
        return None if x is None else x @ M.T

    def trilinear(self, f, g, h):
        if self.dealias:
            trunc = lambda a: _ifft(_fft(a, self.d) * self.mask[..., None], self.d)
            return trunc(self.T(trunc(f), trunc(g), trunc(h)))
        return self.T(f, g, h)

    def field(self, x):
        if x is None:
            return EnvelopeField.zeros(self.grid, self.n)
        return EnvelopeField(self.grid, x)


class ModulationHierarchy:
    """All modulation coefficients at one slow time, built lazily from ``y_1^0..y_1^m``.

    Keys are ``("y", 1, l, r)``, ``("z", 1, l, r)``, ``("v", j, l, r)``,
    ``("S", j, l, r)`` (trilinear source sums) and ``("F", 1, l, r)`` (the
    non-Schroedinger part of the ``y_1^l`` evolution); ``r`` is the order of the
    tau-derivative.  Results are memoized for the lifetime of the object.
    """

    def __init__(self, ctx: MFEContext, ys, tau: float = 0.0):
        if len(ys) != ctx.m + 1:
            raise ValueError(f"need {ctx.m + 1} amplitude levels, got {len(ys)}")
        self.ctx = ctx
        self.tau = float(tau)
        self.ys = [np.asarray(y.values if isinstance(y, EnvelopeField) else y, dtype=complex) for y in ys]
        self._cache: Dict[tuple, object] = {}
        self._active: set = set()
        self._stack: list = []
        self.access_log: list = []  # (parent key, child key)

    @property
    def m(self):
        return self.ctx.m

    def _get(self, key, compute):
        if self._stack:
            self.access_log.append((self._stack[-1], key))
        if key in self._cache:
            return self._cache[key]
        if key in self._active:
            raise RecursionDepthError(f"cyclic dependency while constructing {key}")
        self._active.add(key)
        self._stack.append(key)
        try:
            val = compute()
        finally:
            self._stack.pop()
            self._active.discard(key)
        self._cache[key] = val
        return val

    # --- amplitudes and their rates ---------------------------------------
    def y(self, ell, r=0):
        if ell < 0 or ell > self.m:
            return None
        if r == 0:
            return self._get(("y", 1, ell, 0), lambda: self.ys[ell])
        return self._get(("y", 1, ell, r), lambda: self.rate(ell, r - 1))

    def rate(self, ell, r=0):
        """r-th tau-derivative of the right side of the ``y_1^ell`` equation."""
        ctx = self.ctx
        return _add(ctx.spectral(self.y(ell, r), ctx.schroedinger_symbol), self.forcing(ell, r))

    def forcing(self, ell, r=0):
        """Right side of the ``y_1^ell`` equation without the Schroedinger term."""
        ctx = self.ctx

        def compute():
            inner = _add(self.z(ell - 1, r + 1), ctx.B(self.z(ell, r)), _neg(self.source(1, ell - 1, r)))
            return _add(ctx.spectral(inner, ctx.coupling_symbol),
                        ctx.matrix(ctx.disp.P, self.source(1, ell, r)))

        return self._get(("F", 1, ell, r), compute)

    # --- derived coefficients ---------------------------------------------
    def z(self, ell, r=0):
        if ell < 1 or ell > self.m:
            return None
        ctx = self.ctx

        def compute():
            inner = _add(self.z(ell - 2, r + 1),
                         ctx.B(_add(self.y(ell - 1, r), self.z(ell - 1, r))),
                         _neg(self.source(1, ell - 2, r)))
            return ctx.matrix(1j * ctx.disp.Lperp_inv @ ctx.disp.Pperp, inner)

        return self._get(("z", 1, ell, r), compute)

    def v(self, j, ell, r=0):
        if j < 0:
            x = self.v(-j, ell, r)
            return None if x is None else np.conj(x)
        if j % 2 == 0 or j > self.m or ell < j - 1 or ell > self.m:
            return None
        if j == 1:
            return self._get(("v", 1, ell, r), lambda: _add(self.y(ell, r), self.z(ell, r)))
        ctx = self.ctx

        def compute():
            inner = _add(self.v(j, ell - 2, r + 1), ctx.B(self.v(j, ell - 1, r)),
                         _neg(self.source(j, ell - 2, r)))
            return ctx.matrix(1j * ctx.disp.Lj_inv[j], inner)

        return self._get(("v", j, ell, r), compute)

    def source(self, j, ell, r=0):
        """r-th tau-derivative of ``sum_{#J=j, |L|_1=ell} T(v_J^L)``."""
        if ell < 0:
            return None

        def compute():
            total = None
            for J, L in enumerate_terms(j, ell, self.ctx.idx):
                for rs, coef in _multinomial_splits(r):
                    args = [self.v(ji, li, ri) for ji, li, ri in zip(J, L, rs)]
                    if any(a is None for a in args):
                        continue
                    t = self.ctx.trilinear(*args)
                    total = _add(total, t if coef == 1 else coef * t)
            return total

        return self._get(("S", j, ell, r), compute)

    # --- field accessors ---------------------------------------------------
    def field(self, kind, j, ell, r=0) -> EnvelopeField:
        getter = {"y": lambda: self.y(ell, r), "z": lambda: self.z(ell, r),
                  "v": lambda: self.v(j, ell, r), "S": lambda: self.source(j, ell, r)}[kind]
        return self.ctx.field(getter())

    def coefficient_keys(self):
        """Keys ``(kind, j, l)`` of every stored coefficient of the truncated expansion."""
        keys = [("y", 1, l) for l in range(self.m + 1)]
        keys += [("z", 1, l) for l in range(1, self.m + 1)]
        keys += [("v", j, l) for j in self.ctx.idx.Jplus if j >= 3 for l in range(j - 1, self.m + 1)]
        return keys


def z_field(hier: ModulationHierarchy, ell: int) -> EnvelopeField:
    """``z_1^ell`` (range of ``Pperp``); ``z_1^0 = 0``."""
    return hier.field("z", 1, ell)


def harmonic_field(hier: ModulationHierarchy, j: int, ell: int) -> EnvelopeField:
    """``v_j^ell`` for odd ``3 <= j <= m``; zero below ``ell = j - 1``."""
    if j < 3 or j % 2 == 0 or j > hier.m:
        raise ValueError(f"harmonic index must be odd with 3 <= j <= m, got {j}")
    return hier.field("v", j, ell)


def tau_derivative(hier: ModulationHierarchy, key, order: int = 1) -> EnvelopeField:
    """``order``-th tau-derivative of the coefficient ``key = (kind, j, ell)``."""
    if order < 1:
        raise ValueError("order must be >= 1")
    kind, j, ell = key
    return hier.field(kind, j, ell, order)


def _vtilde_raw(hier, epsilon, order=0):
    out = {}
    for j in hier.ctx.idx.Jplus:
        out[j] = _add(*[None if (x := hier.v(j, l, order)) is None else epsilon**l * x
                        for l in range(j - 1, hier.m + 1)])
    return out


def assemble_vtilde(hier: ModulationHierarchy, epsilon: float) -> Dict[int, EnvelopeField]:
    """``vtilde_j = sum_{l=j-1}^m eps^l v_j^l`` for each positive harmonic."""
    return {j: hier.ctx.field(x) for j, x in _vtilde_raw(hier, epsilon).items()}


def bound_diagnostics(hier: ModulationHierarchy, epsilon: float) -> Dict[str, float]:
    """Scaled sizes ``|Pperp vtilde_1|_inf / eps`` and ``|vtilde_j|_inf / eps^(j-1)``."""
    vt = assemble_vtilde(hier, epsilon)
    out = {
        "P_v1": vt[1].apply_matrix(hier.ctx.disp.P).max_norm(),
        "Pperp_v1/eps": vt[1].apply_matrix(hier.ctx.disp.Pperp).max_norm() / epsilon,
    }
    for j in hier.ctx.idx.Jplus[1:]:
        out[f"v{j}/eps^{j - 1}"] = vt[j].max_norm() / epsilon ** (j - 1)
    return out


@dataclass
class Residual:
    """Per-harmonic defect fields ``r_j`` (positive odd ``j <= 3m``) and their Wiener norms."""

    epsilon: float
    fields: Dict[int, EnvelopeField]
    norms: Dict[int, float]

    @property
    def total(self):
        """Bound on the Wiener norm of the full residual; ``r_{-j}`` has the norm of ``r_j``."""
        return 2.0 * sum(self.norms.values())


def residual(hier: ModulationHierarchy, epsilon: float, s: int = 0) -> Residual:
    """Defect of the truncated expansion in the slow equation, split by harmonic."""
    ctx = hier.ctx
    vt = _vtilde_raw(hier, epsilon)
    dvt = _vtilde_raw(hier, epsilon, order=1)
    signed = {}
    for j, x in vt.items():
        signed[j] = x
        signed[-j] = None if x is None else np.conj(x)
    fields, norms = {}, {}
    J1 = ctx.idx.J
    for j in ctx.idx.harmonics3m:
        nonlin = None
        for J in product(J1, repeat=3):
            if sum(J) != j:
                continue
            args = [signed[k] for k in J]
            if any(a is None for a in args):
                continue
            nonlin = _add(nonlin, ctx.trilinear(*args))
        r = _neg(nonlin)
        if j <= ctx.m and vt[j] is not None:
            Lj = ctx.disp.L(ctx.spec, j)
            r = _add(dvt[j], ctx.matrix(1j * Lj / epsilon**2, vt[j]), ctx.B(vt[j]) / epsilon, r)
        f = ctx.field(r)
        fields[j] = f
        norms[j] = wiener_norm(f, s)
    return Residual(epsilon, fields, norms)
