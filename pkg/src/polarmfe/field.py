"""Periodic grids in the slow variable and spectral operations on envelope fields.

Field values are complex arrays of shape ``grid.shape + (n,)``.  Spectral
coefficients are normalized Fourier-series coefficients ``fftn(values) / size``
so that a single mode ``c exp(i k.x)`` has coefficient ``c``.  All FFTs run
over the leading ``d`` axes; reductions (norms) are plain numpy sums over the
flattened mode array, which fixes their order.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from functools import cached_property
from itertools import product
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.fft as sfft

from .errors import GridMismatchError

__all__ = [
    "GridSpec",
    "EnvelopeField",
    "apply_B",
    "apply_symbol",
    "wiener_norm",
    "trilinear_apply",
    "shift_evaluate",
    "resample",
    "dealias_mask",
    "export_field_csv",
]


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid ``x_i = i L / N`` per dimension."""

    L: tuple
    N: tuple

    def __post_init__(self):
        L = tuple(float(v) for v in np.atleast_1d(self.L))
        N = tuple(int(v) for v in np.atleast_1d(self.N))
        if len(L) != len(N):
            raise ValueError("L and N must have one entry per dimension")
        for Ni in N:
            if Ni < 16 or Ni & (Ni - 1):
                raise ValueError(f"grid sizes must be powers of two >= 16, got {Ni}")
        if any(not Li > 0 for Li in L):
            raise ValueError("torus lengths must be positive")
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "N", N)

    @classmethod
    def default(cls, d=1):
        return cls((32 * np.pi,) * d, (256,) * d)

    @property
    def d(self):
        return len(self.N)

    @property
    def shape(self):
        return self.N

    @property
    def size(self):
        return int(np.prod(self.N))

    def axes(self):
        return tuple(range(self.d))

    def coordinates(self):
        """Meshgrid of point coordinates, one array of ``shape`` per dimension."""
        pts = [np.arange(Ni) * (Li / Ni) for Li, Ni in zip(self.L, self.N)]
        return np.meshgrid(*pts, indexing="ij")

    @cached_property
    def wavenumbers(self):
        """Array of shape ``shape + (d,)`` with the angular wavenumber of each mode."""
        ks = [2 * np.pi * sfft.fftfreq(Ni, d=Li / Ni) for Li, Ni in zip(self.L, self.N)]
        return np.stack(np.meshgrid(*ks, indexing="ij"), axis=-1)

    def to_dict(self):
        return {"L": list(self.L), "N": list(self.N)}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["L"]), tuple(d["N"]))


def _fft(values, d):
    return sfft.fftn(values, axes=tuple(range(d))) / np.prod(values.shape[:d])


def _ifft(coeffs, d):
    return sfft.ifftn(coeffs * np.prod(coeffs.shape[:d]), axes=tuple(range(d)))


class EnvelopeField:
    """Complex n-vector field on a periodic grid with cached spectral coefficients."""

    def __init__(self, grid: GridSpec, values):
        values = np.asarray(values, dtype=complex)
        if values.shape[: grid.d] != grid.shape or values.ndim != grid.d + 1:
            raise GridMismatchError(f"values of shape {values.shape} do not fit grid {grid.shape}")
        values.setflags(write=False)
        self.grid = grid
        self.values = values

    @classmethod
    def from_coefficients(cls, grid, coeffs):
        return cls(grid, _ifft(coeffs, grid.d))

    @classmethod
    def zeros(cls, grid, n):
        return cls(grid, np.zeros(grid.shape + (n,), complex))

    @property
    def n(self):
        return self.values.shape[-1]

    @cached_property
    def coefficients(self):
        c = _fft(self.values, self.grid.d)
        c.setflags(write=False)
        return c

    def conj(self):
        return EnvelopeField(self.grid, np.conj(self.values))

    def apply_matrix(self, M):
        return EnvelopeField(self.grid, self.values @ np.asarray(M).T)

    def max_norm(self):
        """Maximum over grid points of the Euclidean norm."""
        return float(np.max(np.linalg.norm(self.values, axis=-1)))

    def l2_norm(self):
        """Discrete L2 norm, ``sqrt(sum |f|^2 dx)``."""
        dx = np.prod(np.asarray(self.grid.L) / np.asarray(self.grid.N))
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * dx))

    def __add__(self, other):
        _check_same_grid(self, other)
        return EnvelopeField(self.grid, self.values + other.values)

    def __sub__(self, other):
        _check_same_grid(self, other)
        return EnvelopeField(self.grid, self.values - other.values)

    def __mul__(self, scalar):
        return EnvelopeField(self.grid, self.values * scalar)

    __rmul__ = __mul__

    def __repr__(self):
        return f"EnvelopeField(grid={self.grid.N}, n={self.n}, max={self.max_norm():.3e})"


def _check_same_grid(*fields):
    g = fields[0].grid
    for f in fields[1:]:
        if f.grid != g:
            raise GridMismatchError(f"grids differ: {g} vs {f.grid}")


def apply_symbol(values, symbol, d):
    """Apply a Fourier multiplier to raw field values.

    ``symbol`` has shape ``shape`` (scalar multiplier) or ``shape + (n, n)``.
    """
    c = _fft(values, d)
    if symbol.ndim == d:
        c = c * symbol[..., None]
    else:
        c = np.einsum("...ij,...j->...i", symbol, c)
    return _ifft(c, d)


def B_symbol(grid, spec, cg):
    """``i B(k)`` per mode, ``B(k) = A(k) - (c_g.k) I``."""
    k = grid.wavenumbers
    Ak = np.einsum("...l,lij->...ij", k, spec.A)
    shift = (k @ np.asarray(cg))[..., None, None] * np.eye(spec.n)
    return 1j * (Ak - shift)


def apply_B(field: EnvelopeField, spec, disp) -> EnvelopeField:
    """``sum_l (A_l - (c_g)_l I) d/dxi_l`` applied spectrally."""
    sym = B_symbol(field.grid, spec, disp.cg)
    return EnvelopeField.from_coefficients(
        field.grid, np.einsum("...ij,...j->...i", sym, field.coefficients))


def _multi_indices(d, s):
    return [a for a in product(range(s + 1), repeat=d) if sum(a) <= s]


def wiener_norm(field, s: int = 0) -> float:
    """Discrete Wiener norm: sum over ``|alpha|_1 <= s`` of ``sum_k |k^alpha c(k)|_2``."""
    if s < 0:
        raise ValueError("s must be non-negative")
    if isinstance(field, EnvelopeField):
        coeffs, k = field.coefficients, field.grid.wavenumbers
    else:
        grid, values = field
        coeffs, k = _fft(np.asarray(values), grid.d), grid.wavenumbers
    mag = np.linalg.norm(coeffs, axis=-1)
    total = 0.0
    for alpha in _multi_indices(k.shape[-1], s):
        weight = np.prod(np.abs(k) ** np.asarray(alpha), axis=-1)
        total += float(np.sum(weight * mag))
    return total


def dealias_mask(grid: GridSpec):
    """Boolean mask of modes kept by the 2/3 rule."""
    idx = [np.abs(sfft.fftfreq(Ni) * Ni) for Ni in grid.N]
    keep = [i <= Ni // 3 for i, Ni in zip(idx, grid.N)]
    return np.logical_and.reduce(np.meshgrid(*keep, indexing="ij"))


def _truncate(values, mask, d):
    return _ifft(_fft(values, d) * mask[..., None], d)


def trilinear_apply(T, f: EnvelopeField, g: EnvelopeField, h: EnvelopeField,
                    dealias: bool = False) -> EnvelopeField:
    """Pointwise ``T(f, g, h)``; with ``dealias`` the 2/3 rule is applied to inputs and output."""
    _check_same_grid(f, g, h)
    grid = f.grid
    fv, gv, hv = f.values, g.values, h.values
    if dealias:
        mask = dealias_mask(grid)
        fv, gv, hv = (_truncate(x, mask, grid.d) for x in (fv, gv, hv))
        return EnvelopeField(grid, _truncate(T(fv, gv, hv), mask, grid.d))
    return EnvelopeField(grid, T(fv, gv, hv))


def shift_evaluate(field: EnvelopeField, delta) -> EnvelopeField:
    """Trigonometric interpolant of ``field`` evaluated at ``x - delta``."""
    delta = np.atleast_1d(np.asarray(delta, float))
    phase = np.exp(-1j * (field.grid.wavenumbers @ delta))
    return EnvelopeField.from_coefficients(field.grid, field.coefficients * phase[..., None])


def resample(field: EnvelopeField, grid: GridSpec, delta=None) -> EnvelopeField:
    """Evaluate the trigonometric interpolant of ``field`` on a finer grid of the same torus.

    The target grid must have the same lengths and at least as many points per
    dimension.  Nyquist modes of the source are dropped.  ``delta`` shifts the
    evaluation points to ``x - delta``.
    """
    src = field.grid
    if not np.allclose(src.L, grid.L, rtol=1e-14, atol=0) or any(a > b for a, b in zip(src.N, grid.N)):
        raise GridMismatchError("resample needs the same torus and a finer target grid")
    c = np.array(field.coefficients)
    if delta is not None:
        delta = np.atleast_1d(np.asarray(delta, float))
        c *= np.exp(-1j * (src.wavenumbers @ delta))[..., None]
    index = []
    for ax, (Ns, Nt) in enumerate(zip(src.N, grid.N)):
        modes = np.rint(sfft.fftfreq(Ns) * Ns).astype(int)
        nyq = modes == -Ns // 2
        c = np.delete(c, np.flatnonzero(nyq), axis=ax)
        index.append(np.mod(modes[~nyq], Nt))
    out = np.zeros(grid.shape + (field.n,), complex)
    out[np.ix_(*index)] = c
    return EnvelopeField.from_coefficients(grid, out)


def export_field_csv(field: EnvelopeField, path, metadata=None):
    """Write ``index, x..., Re/Im per component`` to CSV and metadata to a JSON sidecar."""
    path = Path(path)
    grid = field.grid
    coords = [c.ravel() for c in grid.coordinates()]
    flat = field.values.reshape(-1, field.n)
    xnames = ["x"] if grid.d == 1 else [f"x{l + 1}" for l in range(grid.d)]
    header = ["index", *xnames]
    for i in range(field.n):
        header += [f"re{i}", f"im{i}"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for idx in range(flat.shape[0]):
            row = [idx] + [repr(float(c[idx])) for c in coords]
            for z in flat[idx]:
                row += [repr(float(z.real)), repr(float(z.imag))]
            w.writerow(row)
    meta = {"grid": grid.to_dict(), "n": field.n}
    meta.update(metadata or {})
    path.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    return path
