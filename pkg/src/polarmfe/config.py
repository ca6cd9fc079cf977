"""TOML run configuration: one problem instance plus grid and run settings.

Schema (all tables optional except ``[system]``)::

    [system]
    A = [[[0.0, 1.0], [1.0, 0.0]]]     # list of d row-major n x n matrices
    E = [[0.0, -1.0], [1.0, 0.0]]
    kappa = [1.0]
    tau_end = 0.5
    d = 1                               # optional consistency checks
    n = 2

    [system.branch]
    index = 0                           # position in the descending spectrum
    target = 1.41                       # optional, closest eigenvalue wins

    [system.nonlinearity]
    kind = "cubic"                      # "cubic", "coupling" or "zero"
    matrix = [[1.0, 0.0], [0.0, 1.0]]   # coupling only

    [system.envelope]
    kind = "gaussian"                   # or "tabulated"
    amplitude = [0.5, 0.0]              # real and imaginary part
    width = 6.283                       # default L/16
    center = [50.26]                    # default L/2
    samples_re = [...]                  # tabulated only, on the [grid]
    samples_im = [...]

    [grid]
    L = [100.53]
    N = [256]

    [run]
    m = 1
    eps = [0.125, 0.0625, 0.03125]
    dtau = 0.0025
    dt_factor = 0.05                    # reference step dt = dt_factor * eps
    dealias = false
    nls_only = false
"""
from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Tuple

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .field import GridSpec
from .model import SystemSpec, builtin_klein_gordon

__all__ = ["RunSettings", "RunConfig", "load_config", "dump_config", "loads_config", "dumps_config"]


@dataclass(frozen=True)
class RunSettings:
    """Numerical settings shared by the CLI commands."""

    m: int = 1
    eps: Tuple[float, ...] = (1 / 8, 1 / 16, 1 / 32, 1 / 64)
    dtau: Optional[float] = None
    dt_factor: float = 1 / 20
    dealias: bool = False
    nls_only: bool = False

    def to_dict(self):
        out = {"m": self.m, "eps": list(self.eps), "dt_factor": self.dt_factor,
               "dealias": self.dealias, "nls_only": self.nls_only}
        if self.dtau is not None:
            out["dtau"] = self.dtau
        return out

    @classmethod
    def from_dict(cls, d):
        eps = d.get("eps", cls.eps)
        return cls(m=int(d.get("m", 1)), eps=tuple(float(e) for e in eps), dtau=d.get("dtau"),
                   dt_factor=float(d.get("dt_factor", cls.dt_factor)),
                   dealias=bool(d.get("dealias", False)), nls_only=bool(d.get("nls_only", False)))


@dataclass(frozen=True)
class RunConfig:
    system: SystemSpec = field(default_factory=builtin_klein_gordon)
    grid: GridSpec = field(default_factory=GridSpec.default)
    run: RunSettings = field(default_factory=RunSettings)

    def to_dict(self):
        return {"system": self.system.to_dict(), "grid": self.grid.to_dict(), "run": self.run.to_dict()}

    @classmethod
    def from_dict(cls, d):
        if "system" not in d:
            raise ValueError("config needs a [system] table")
        system = SystemSpec.from_dict(d["system"])
        grid = GridSpec.from_dict(d["grid"]) if "grid" in d else GridSpec.default(system.d)
        return cls(system, grid, RunSettings.from_dict(d.get("run", {})))

    def with_run(self, **changes):
        changes = {k: v for k, v in changes.items() if v is not None}
        return replace(self, run=replace(self.run, **changes))


def loads_config(text: str) -> RunConfig:
    return RunConfig.from_dict(tomllib.loads(text))


def dumps_config(cfg: RunConfig) -> str:
    return tomli_w.dumps(cfg.to_dict())


def load_config(path) -> RunConfig:
    with open(path, "rb") as fh:
        return RunConfig.from_dict(tomllib.load(fh))


def dump_config(cfg: RunConfig, path) -> Path:
    path = Path(path)
    path.write_text(dumps_config(cfg))
    return path
