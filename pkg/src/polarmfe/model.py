"""Problem instances: system matrices, trilinear nonlinearity, wave vector, envelope.

A problem is the semilinear hyperbolic system

    u_t + A(d/dx) u + E u / eps = eps * T(u, u, u)

with symmetric ``A_l``, skew-symmetric ``E`` and a real trilinear ``T``,
started from the oscillatory datum ``exp(i kappa.x / eps) p(x) + c.c.``.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import AssumptionError, PeriodizationError, StructuralError
from .field import EnvelopeField, GridSpec

__all__ = [
    "Trilinear",
    "Branch",
    "EnvelopeSpec",
    "SystemSpec",
    "CheckResult",
    "ValidationReport",
    "validate_system",
    "builtin_klein_gordon",
    "envelope_profile",
    "make_polarized_envelope",
]

SYMMETRY_TOL = 1e-12
SINGULAR_TOL = 1e-10
BOUNDARY_TOL = 1e-12
KG_AMPLITUDE = 0.5


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Trilinear:
    """Tagged trilinear map ``R^n x R^n x R^n -> R^n``.

    ``kind`` is one of ``"cubic"`` (componentwise ``u_i v_i w_i``),
    ``"coupling"`` (``(u.v) M w``), ``"zero"``, or ``"custom"`` (a Python
    callable, library use only; it cannot be written to a config file).
    Arguments are arrays whose last axis holds the ``n`` components.
    """

    kind: str = "cubic"
    matrix: Optional[np.ndarray] = None
    func: Optional[Callable] = None

    def __post_init__(self):
        if self.kind not in ("cubic", "coupling", "zero", "custom"):
            raise ValueError(f"unknown trilinear kind {self.kind!r}")
        if self.kind == "coupling":
            if self.matrix is None:
                raise ValueError("coupling nonlinearity needs a matrix")
            object.__setattr__(self, "matrix", _frozen(self.matrix))
        if self.kind == "custom" and self.func is None:
            raise ValueError("custom nonlinearity needs a callable")

    def __call__(self, f, g, h):
        if self.kind == "cubic":
            return f * g * h
        if self.kind == "coupling":
            return np.sum(f * g, axis=-1)[..., None] * (h @ self.matrix.T)
        if self.kind == "zero":
            return np.zeros(np.broadcast_shapes(f.shape, g.shape, h.shape), dtype=np.result_type(f, g, h))
        return self.func(f, g, h)

    @property
    def is_zero(self):
        return self.kind == "zero"

    def to_dict(self):
        if self.kind == "custom":
            raise ValueError("custom nonlinearities are not serializable")
        out = {"kind": self.kind}
        if self.kind == "coupling":
            out["matrix"] = self.matrix.tolist()
        return out

    @classmethod
    def from_dict(cls, d):
        return cls(kind=d.get("kind", "cubic"), matrix=d.get("matrix"))


@dataclass(frozen=True)
class Branch:
    """Eigenvalue selector: index into the descending spectrum of ``A(kappa) - iE``.

    If ``target`` is given the eigenvalue closest to it is taken instead.
    """

    index: int = 0
    target: Optional[float] = None

    def select(self, eigvals):
        if self.target is not None:
            return int(np.argmin(np.abs(eigvals - self.target)))
        order = np.argsort(-eigvals, kind="stable")
        return int(order[self.index])

    def to_dict(self):
        out = {"index": self.index}
        if self.target is not None:
            out["target"] = self.target
        return out


@dataclass(frozen=True, eq=False)
class EnvelopeSpec:
    """Scalar envelope ``alpha``; the vector envelope is ``p = alpha * v``.

    ``width`` and ``center`` default to ``L/16`` and ``L/2`` of the grid the
    envelope is sampled on.  For ``kind="tabulated"`` ``samples`` holds alpha
    on that grid.
    """

    kind: str = "gaussian"
    amplitude: complex = 1.0
    width: Optional[float] = None
    center: Optional[tuple] = None
    samples: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in ("gaussian", "tabulated"):
            raise ValueError(f"unknown envelope kind {self.kind!r}")
        object.__setattr__(self, "amplitude", complex(self.amplitude))
        if self.width is not None and not self.width > 0:
            raise ValueError("envelope width must be positive")
        if self.center is not None:
            object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))
        if self.kind == "tabulated":
            if self.samples is None:
                raise ValueError("tabulated envelope needs samples")
            object.__setattr__(self, "samples", _frozen(self.samples, complex))

    def to_dict(self):
        out = {"kind": self.kind, "amplitude": [self.amplitude.real, self.amplitude.imag]}
        if self.width is not None:
            out["width"] = float(self.width)
        if self.center is not None:
            out["center"] = list(self.center)
        if self.kind == "tabulated":
            out["samples_re"] = self.samples.real.tolist()
            out["samples_im"] = self.samples.imag.tolist()
        return out

    @classmethod
    def from_dict(cls, d):
        amp = d.get("amplitude", 1.0)
        if isinstance(amp, (list, tuple)):
            amp = complex(amp[0], amp[1])
        samples = None
        if "samples_re" in d:
            samples = np.asarray(d["samples_re"], float) + 1j * np.asarray(d.get("samples_im", 0.0), float)
        return cls(kind=d.get("kind", "gaussian"), amplitude=amp, width=d.get("width"),
                   center=d.get("center"), samples=samples)


@dataclass(frozen=True, eq=False)
class SystemSpec:
    """One problem instance ``(A_1..A_d, E, T, kappa, branch, envelope, tau_end)``."""

    A: np.ndarray
    E: np.ndarray
    kappa: np.ndarray
    T: Trilinear = dc_field(default_factory=Trilinear)
    branch: Branch = dc_field(default_factory=Branch)
    envelope: EnvelopeSpec = dc_field(default_factory=EnvelopeSpec)
    tau_end: float = 0.5

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        if A.ndim == 2:
            A = A[None]
        E = np.asarray(self.E, dtype=float)
        kappa = np.atleast_1d(np.asarray(self.kappa, dtype=float))
        if A.ndim != 3 or A.shape[1] != A.shape[2]:
            raise ValueError("A must be a list of square matrices")
        if E.shape != A.shape[1:]:
            raise ValueError("E must match the size of A_l")
        if kappa.shape != (A.shape[0],):
            raise ValueError("kappa must have one entry per spatial dimension")
        if not self.tau_end > 0:
            raise ValueError("tau_end must be positive")
        object.__setattr__(self, "A", _frozen(A))
        object.__setattr__(self, "E", _frozen(E))
        object.__setattr__(self, "kappa", _frozen(kappa))

    @property
    def d(self):
        return self.A.shape[0]

    @property
    def n(self):
        return self.A.shape[1]

    def replace(self, **changes):
        kw = dict(A=self.A, E=self.E, kappa=self.kappa, T=self.T, branch=self.branch,
                  envelope=self.envelope, tau_end=self.tau_end)
        kw.update(changes)
        return SystemSpec(**kw)

    def to_dict(self):
        return {
            "d": self.d,
            "n": self.n,
            "A": self.A.tolist(),
            "E": self.E.tolist(),
            "kappa": self.kappa.tolist(),
            "tau_end": float(self.tau_end),
            "branch": self.branch.to_dict(),
            "nonlinearity": self.T.to_dict(),
            "envelope": self.envelope.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        spec = cls(
            A=d["A"],
            E=d["E"],
            kappa=d["kappa"],
            T=Trilinear.from_dict(d.get("nonlinearity", {})),
            branch=Branch(**d.get("branch", {})),
            envelope=EnvelopeSpec.from_dict(d.get("envelope", {})),
            tau_end=d.get("tau_end", 0.5),
        )
        if "d" in d and d["d"] != spec.d or "n" in d and d["n"] != spec.n:
            raise ValueError("declared d/n do not match the matrices")
        return spec


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    value: float
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple
    sigma_min: tuple  # ((j, sigma_min(L_j)), ...)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def __str__(self):
        lines = [f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.value:.3e} {c.detail}".rstrip()
                 for c in self.checks]
        return "\n".join(lines)


def validate_system(spec: SystemSpec, m: int = 1, raise_on_failure: bool = True) -> ValidationReport:
    """Check the structural assumptions and the invertibility of ``L_j``.

    Raises `StructuralError` for a non-symmetric ``A_l``, a non-skew ``E`` or a
    zero wave vector, `DegenerateBranchError` for a non-simple eigenvalue and
    `AssumptionError` when some ``L_j`` (odd ``3 <= j <= m+2``) is singular.
    """
    from . import dispersion

    checks = []
    first_failure = None

    def record(name, passed, value, err, detail=""):
        nonlocal first_failure
        checks.append(CheckResult(name, bool(passed), float(value), detail))
        if not passed and first_failure is None:
            first_failure = err

    for l, Al in enumerate(spec.A, start=1):
        asym = float(np.max(np.abs(Al - Al.T), initial=0.0))
        record(f"A_{l} symmetric", asym <= SYMMETRY_TOL, asym, StructuralError(f"A_{l}", asym))
    skew = float(np.max(np.abs(spec.E + spec.E.T), initial=0.0))
    record("E skew-symmetric", skew <= SYMMETRY_TOL, skew, StructuralError("E", skew))
    knorm = float(np.linalg.norm(spec.kappa))
    record("kappa nonzero", knorm > 0, knorm, StructuralError("kappa", knorm, "wave vector kappa must be nonzero"))

    sig = []
    if first_failure is None:
        eig = dispersion.eigenpair(spec, spec.kappa, check_gap=False)
        gap = eig.gap
        record("eigenvalue simple", gap >= dispersion.GAP_TOL, gap, dispersion.DegenerateBranchError(gap))
        for j in range(3, m + 3, 2):
            s = float(np.linalg.svd(dispersion.L_matrix(spec, eig.omega, j), compute_uv=False)[-1])
            sig.append((j, s))
            record(f"L_{j} invertible", s >= SINGULAR_TOL, s, AssumptionError(j, s))

    report = ValidationReport(tuple(checks), tuple(sig))
    if raise_on_failure and first_failure is not None:
        raise first_failure
    return report


def builtin_klein_gordon(kappa: float = 1.0, epsilon_hint: Optional[float] = None,
                         tau_end: float = 0.5, amplitude: complex = KG_AMPLITUDE) -> SystemSpec:
    """Klein-Gordon system in first-order form, d = 1, n = 2.

    ``A(k) - iE`` has eigenvalues ``+-sqrt(1 + k^2)``; the upper branch is
    selected.  If ``epsilon_hint`` is given it is checked for admissibility on
    the default torus ``L = 32 pi``.

    The componentwise cubic T makes the envelope equation focus like
    ``a' = 1.5 |a|^2 a`` pointwise, so a unit Gaussian blows up at tau = 1/3;
    the default amplitude 0.5 keeps the solution bounded up to tau = 4/3.
    """
    if kappa == 0:
        raise StructuralError("kappa", 0.0, "wave vector kappa must be nonzero")
    if epsilon_hint is not None:
        from .reconstruct import check_admissible

        check_admissible(np.array([kappa]), GridSpec.default().L, epsilon_hint)
    return SystemSpec(
        A=[[[0.0, 1.0], [1.0, 0.0]]],
        E=[[0.0, -1.0], [1.0, 0.0]],
        kappa=[kappa],
        T=Trilinear("cubic"),
        branch=Branch(0),
        envelope=EnvelopeSpec("gaussian", amplitude=amplitude),
        tau_end=tau_end,
    )


def envelope_profile(env: EnvelopeSpec, grid: GridSpec) -> np.ndarray:
    """Scalar envelope alpha sampled on ``grid`` (shape ``grid.shape``)."""
    if env.kind == "tabulated":
        alpha = np.asarray(env.samples, dtype=complex)
        if alpha.shape != grid.shape:
            raise ValueError(f"tabulated envelope has shape {alpha.shape}, grid is {grid.shape}")
        return alpha
    L = np.asarray(grid.L)
    sigma = env.width if env.width is not None else float(np.min(L)) / 16
    center = np.asarray(env.center if env.center is not None else L / 2)
    r2 = sum((x - c) ** 2 for x, c in zip(grid.coordinates(), center))
    return env.amplitude * np.exp(-r2 / (2 * sigma**2))


def make_polarized_envelope(spec: SystemSpec, disp, grid: GridSpec,
                            alpha: Optional[np.ndarray] = None) -> EnvelopeField:
    """Sample ``p = alpha v`` on ``grid``; ``P p = p`` holds by construction."""
    if alpha is None:
        alpha = envelope_profile(spec.envelope, grid)
    alpha = np.asarray(alpha, dtype=complex)
    edge = max(float(np.max(np.abs(np.take(alpha, 0, axis=ax)))) for ax in range(grid.d))
    if edge > BOUNDARY_TOL:
        raise PeriodizationError(f"envelope is {edge:.2e} at the torus boundary (limit {BOUNDARY_TOL:g})")
    return EnvelopeField(grid, alpha[..., None] * disp.v)
