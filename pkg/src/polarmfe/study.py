"""Convergence studies: build, reconstruct, compare with the reference, fit slopes, report.

One study is a sweep over admissible eps for a fixed order ``m``.  The slow
hierarchy does not depend on eps and is integrated once; every eps then gets
its own reference run started from the polarized initial value of the
order-``m`` expansion.  The NLS baseline is measured against the same
reference run.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import subprocess
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .config import RunConfig
from .dispersion import compute_dispersion
from .field import export_field_csv, wiener_norm
from .mfe import MFEContext, ModulationHierarchy, bound_diagnostics, residual
from .model import make_polarized_envelope, validate_system
from .reconstruct import evaluate_mfe, make_plan
from .reference import OscillatorySolverConfig, reference_solve
from .schroedinger import solve_hierarchy

__all__ = [
    "SlopeFit",
    "fit_log2_slope",
    "EpsilonRecord",
    "RunReport",
    "SlowSolution",
    "prepare",
    "solve_slow",
    "measure_epsilon",
    "run_convergence",
    "verify_residual",
    "dump_hierarchy",
    "package_version",
]


@dataclass(frozen=True)
class SlopeFit:
    """Least-squares fit ``log2 e = intercept - slope * log2(1/eps)``; ``slope`` is the observed order."""

    slope: float
    intercept: float
    rms: float
    points: int

    def to_dict(self):
        return {"slope": self.slope, "intercept": self.intercept, "rms": self.rms, "points": self.points}


def fit_log2_slope(eps: Sequence[float], values: Sequence[float]) -> SlopeFit:
    """Observed order of ``values ~ C eps^slope``; needs at least three points."""
    eps = np.asarray(eps, float)
    values = np.asarray(values, float)
    if eps.size < 3:
        raise ValueError("a slope needs at least three eps values")
    if np.any(values <= 0) or np.any(eps <= 0):
        raise ValueError("slopes need positive data")
    x, y = np.log2(eps), np.log2(values)
    (slope, intercept), res, *_ = np.polyfit(x, y, 1, full=True)
    rms = float(np.sqrt(res[0] / x.size)) if res.size else 0.0
    return SlopeFit(float(slope), float(intercept), rms, int(x.size))


@dataclass(frozen=True)
class EpsilonRecord:
    """Measurements for one eps."""

    epsilon: float
    m: int
    error_maxnorm: float
    error_nls: Optional[float]
    residual_wiener: float
    bounds: Dict[str, float]
    grid_points: int
    reference_steps: int
    runtimes: Dict[str, float] = field(default_factory=dict, compare=False)


@dataclass
class RunReport:
    """Per-eps records plus fitted slopes.  ``approximation`` is ``"mfe"`` or ``"nls"``."""

    m: int
    approximation: str
    records: List[EpsilonRecord]
    slopes: Dict[str, SlopeFit] = field(default_factory=dict)

    def __post_init__(self):
        self.records = sorted(self.records, key=lambda r: -r.epsilon)
        if len(self.records) >= 3 and not self.slopes:
            eps = [r.epsilon for r in self.records]
            self.slopes["error"] = fit_log2_slope(eps, [r.error_maxnorm for r in self.records])
            if all(r.error_nls is not None for r in self.records):
                self.slopes["error_nls"] = fit_log2_slope(eps, [r.error_nls for r in self.records])
            if all(r.residual_wiener > 0 for r in self.records):
                self.slopes["residual"] = fit_log2_slope(eps, [r.residual_wiener for r in self.records])

    @property
    def epsilons(self):
        return [r.epsilon for r in self.records]

    def csv_text(self) -> str:
        """Deterministic table (no timings): one row per (eps, m)."""
        bound_keys = sorted({k for r in self.records for k in r.bounds})
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epsilon", "m", "approximation", "error_maxnorm", "error_nls", "residual_wiener",
                    *bound_keys, "grid_points", "reference_steps"])
        for r in self.records:
            w.writerow([repr(r.epsilon), r.m, self.approximation, repr(r.error_maxnorm),
                        "" if r.error_nls is None else repr(r.error_nls), repr(r.residual_wiener),
                        *[repr(r.bounds.get(k, float("nan"))) for k in bound_keys],
                        r.grid_points, r.reference_steps])
        return buf.getvalue()

    def sidecar(self, config_text: str = "") -> dict:
        return {
            "m": self.m,
            "approximation": self.approximation,
            "slopes": {k: v.to_dict() for k, v in self.slopes.items()},
            "runtimes": {repr(r.epsilon): r.runtimes for r in self.records},
            "config_sha256": hashlib.sha256(config_text.encode()).hexdigest(),
            "version": package_version(),
        }

    def write(self, out_dir, stem="converge", config_text: str = ""):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        table = out / f"{stem}.csv"
        table.write_text(self.csv_text())
        (out / f"{stem}.json").write_text(json.dumps(self.sidecar(config_text), indent=2, sort_keys=True))
        return table


def package_version() -> str:
    from . import __version__

    try:
        rev = subprocess.run(["git", "describe", "--always", "--dirty"], capture_output=True, text=True,
                             cwd=Path(__file__).parent, timeout=5)
        if rev.returncode == 0 and rev.stdout.strip():
            return f"{__version__}+{rev.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


@dataclass
class SlowSolution:
    """Slow-scale data of one study: context and hierarchy states at ``tau = 0`` and ``tau_end``."""

    ctx: MFEContext
    start: object
    end: object
    tau_end: float
    seconds: float = 0.0

    def hierarchy(self, which="end") -> ModulationHierarchy:
        return (self.end if which == "end" else self.start).hierarchy(self.ctx)


def prepare(cfg: RunConfig, m: Optional[int] = None) -> MFEContext:
    """Validate the system and assemble the slow-scale context for order ``m``."""
    m = cfg.run.m if m is None else m
    spec = cfg.system
    validate_system(spec, m)
    disp = compute_dispersion(spec, m)
    return MFEContext(spec, disp, cfg.grid, m, dealias=cfg.run.dealias)


def solve_slow(ctx: MFEContext, tau_end: float, dtau: Optional[float] = None) -> SlowSolution:
    t0 = time.perf_counter()
    p = make_polarized_envelope(ctx.spec, ctx.disp, ctx.grid)
    start, end = solve_hierarchy(ctx, p, [0.0, tau_end], dtau=dtau or tau_end / 200)
    return SlowSolution(ctx, start, end, tau_end, time.perf_counter() - t0)


def _error(u, v):
    return float(np.max(np.linalg.norm(u - v, axis=-1)))


def measure_epsilon(slow: SlowSolution, epsilon: float, dt_factor: float = 1 / 20,
                    nls_only: bool = False, nls_baseline: bool = True) -> EpsilonRecord:
    """Reference run and error measurement for one eps at ``t = tau_end / eps``."""
    ctx = slow.ctx
    plan = make_plan(ctx, epsilon)
    t_end = slow.tau_end / epsilon
    h0, h1 = slow.hierarchy("start"), slow.hierarchy("end")
    clock = time.perf_counter()
    u0 = evaluate_mfe(h0, plan, 0.0)
    config = OscillatorySolverConfig(plan.grid_x, epsilon, dt_factor * epsilon, t_end,
                                     coarse=dt_factor > 1 / 20)
    traj = reference_solve(u0, config, ctx.spec, [t_end])
    u_ref = traj(t_end)
    t_ref = time.perf_counter() - clock
    clock = time.perf_counter()
    err_nls = _error(evaluate_mfe(h1, plan, t_end, nls_only=True), u_ref)
    err_mfe = err_nls if nls_only else _error(evaluate_mfe(h1, plan, t_end), u_ref)
    res = residual(h1, epsilon)
    return EpsilonRecord(
        epsilon=float(epsilon), m=ctx.m,
        error_maxnorm=err_mfe,
        error_nls=err_nls if (nls_baseline or nls_only) else None,
        residual_wiener=res.total,
        bounds=bound_diagnostics(h1, epsilon),
        grid_points=plan.grid_x.size,
        reference_steps=traj.steps,
        runtimes={"reference": t_ref, "reconstruct": time.perf_counter() - clock, "slow": slow.seconds},
    )


def _measure_job(args):
    return measure_epsilon(*args)


def run_convergence(cfg: RunConfig, workers: int = 1, nls_baseline: bool = True) -> RunReport:
    """eps sweep for ``cfg.run``; one worker process per eps when ``workers > 1``."""
    ctx = prepare(cfg)
    slow = solve_slow(ctx, cfg.system.tau_end, cfg.run.dtau)
    jobs = [(slow, e, cfg.run.dt_factor, cfg.run.nls_only, nls_baseline) for e in cfg.run.eps]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_measure_job, jobs))
    else:
        records = [_measure_job(j) for j in jobs]
    return RunReport(ctx.m, "nls" if cfg.run.nls_only else "mfe", records)


def verify_residual(slow: SlowSolution, epsilon: float, s: int = 0) -> dict:
    """Residual norms per harmonic and bound diagnostics at ``tau_end``."""
    hier = slow.hierarchy("end")
    make_plan(slow.ctx, epsilon)  # admissibility
    res = residual(hier, epsilon, s)
    return {
        "epsilon": float(epsilon),
        "m": slow.ctx.m,
        "tau": slow.tau_end,
        "residual_total": res.total,
        "residual_by_harmonic": {str(j): v for j, v in res.norms.items()},
        "bounds": bound_diagnostics(hier, epsilon),
    }


def _field_name(kind, j, ell):
    return f"{kind}{j}^{ell}"


def dump_hierarchy(hier: ModulationHierarchy, out_dir, write_fields: bool = True) -> Path:
    """JSON manifest of every coefficient (name, j, l, tau, norms) and optional CSV snapshots."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tag = f"tau{hier.tau:.6g}"
    entries = []
    for kind, j, ell in hier.coefficient_keys():
        f = hier.field(kind, j, ell)
        name = _field_name(kind, j, ell)
        entry = {"name": name, "kind": kind, "j": j, "ell": ell, "tau": hier.tau,
                 "wiener": wiener_norm(f), "maxnorm": f.max_norm()}
        if write_fields:
            fname = f"{tag}_{kind}{j}_{ell}.csv"
            export_field_csv(f, out / fname, {"name": name, "tau": hier.tau, "m": hier.m})
            entry["file"] = fname
        entries.append(entry)
    manifest = out / f"{tag}_manifest.json"
    manifest.write_text(json.dumps({"tau": hier.tau, "m": hier.m, "fields": entries}, indent=2))
    return manifest
