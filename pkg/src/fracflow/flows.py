"""The six evolutions and their reference solutions.

=============  =====================================  ===============
family         energy                                 lambda
=============  =====================================  ===============
ZeroOrder(s)   ``s F^s``                              0
Renormalized   ``F^s - F^0/s``                        ``2 |Omega|``
BBM(s)         ``(1 - s) F^s``                        0
LimitODE       ``F^0 = (d omega_d/2) ||u||^2``        0
LimitZero      ``G^0 + J^0``                          ``2 |Omega|``
LimitHeat      ``F^1 = (omega_d/4) int |u'|^2``       0
=============  =====================================  ===============
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sla

from . import assembly
from .energy import AdmissibilityError, QuadraticEnergy
from .grid import D_OMEGA_D, OMEGA_D, Domain, Grid, GridFunction, builtin_family, make_grid, read_csv, sample
from .mm import Trajectory, run_mm

__all__ = [
    "FAMILIES",
    "S_FAMILIES",
    "FlowSpec",
    "build_energy",
    "solve",
    "exact_reference",
    "spectral_reference",
    "function_from_config",
    "lambda_for",
]

S_FAMILIES = ("ZeroOrder", "Renormalized", "BBM")
FAMILIES = S_FAMILIES + ("LimitODE", "LimitZero", "LimitHeat")


def lambda_for(family: str, domain: Domain) -> float:
    return 2.0 * domain.length if family in ("Renormalized", "LimitZero") else 0.0


def function_from_config(cfg: dict, grid: Grid, base_dir=None) -> GridFunction:
    """``{"family": name, "params": {...}}`` or ``{"csv_path": path}``."""
    if not isinstance(cfg, dict):
        raise ValueError("function config must be an object")
    if "csv_path" in cfg:
        if set(cfg) != {"csv_path"}:
            raise ValueError(f"unexpected keys in function config: {sorted(set(cfg) - {'csv_path'})}")
        path = Path(cfg["csv_path"])
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        if not path.exists():
            raise FileNotFoundError(f"input file {path} not found")
        return read_csv(path, grid)
    extra = set(cfg) - {"family", "params"}
    if extra or "family" not in cfg:
        raise ValueError(f"function config needs 'family' (and optional 'params'); got {sorted(cfg)}")
    f = builtin_family(cfg["family"], grid.domain, **dict(cfg.get("params", {})))
    return sample(f, grid)


@dataclass(frozen=True)
class FlowSpec:
    family: str
    grid: Grid
    tau: float
    T: float
    u0: GridFunction
    s: float | None = None
    mass: str = "lumped"
    u0_config: dict | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown flow family {self.family!r}; expected one of {FAMILIES}")
        if self.family in S_FAMILIES:
            if self.s is None or not (0.0 < self.s < 1.0):
                raise ValueError(f"{self.family} needs s in (0, 1), got {self.s}")
        elif self.s is not None:
            raise ValueError(f"{self.family} takes no s")
        if self.mass not in ("lumped", "consistent"):
            raise ValueError("mass must be 'lumped' or 'consistent'")
        if not (self.tau > 0 and self.T > 0):
            raise ValueError("tau and T must be positive")
        if self.u0.grid.fingerprint != self.grid.fingerprint:
            raise ValueError("initial datum lives on a different grid")
        lam = self.lambda_modulus
        if lam > 0 and not self.tau < 1.0 / (2.0 * lam):
            raise AdmissibilityError(
                f"tau = {self.tau} violates the window tau < 1/(2 lambda) = {1 / (2 * lam):.6g} "
                f"for {self.family} (lambda = 2|Omega| = {lam:g})")

    @property
    def lambda_modulus(self) -> float:
        return lambda_for(self.family, self.grid.domain)

    @property
    def label(self) -> str:
        return self.family if self.s is None else f"{self.family}({self.s:g})"

    def replace(self, **kw) -> "FlowSpec":
        d = dict(family=self.family, grid=self.grid, tau=self.tau, T=self.T, u0=self.u0,
                 s=self.s, mass=self.mass, u0_config=self.u0_config)
        if "grid" in kw and "u0" not in kw:
            if self.u0_config is None:
                raise ValueError("cannot move a CSV-free initial datum to a new grid")
            kw["u0"] = function_from_config(self.u0_config, kw["grid"])
        d.update(kw)
        return FlowSpec(**d)

    KEYS = frozenset({"family", "s", "domain", "n", "tau", "T", "u0", "mass"})

    @classmethod
    def from_dict(cls, cfg: dict, base_dir=None) -> "FlowSpec":
        unknown = set(cfg) - cls.KEYS
        if unknown:
            raise ValueError(f"unknown FlowSpec keys: {sorted(unknown)}")
        for k in ("family", "domain", "n", "tau", "T", "u0"):
            if k not in cfg:
                raise ValueError(f"FlowSpec is missing {k!r}")
        dom = cfg["domain"]
        if set(dom) != {"a", "b"}:
            raise ValueError("domain must be {\"a\": ..., \"b\": ...}")
        grid = make_grid(Domain(float(dom["a"]), float(dom["b"])), int(cfg["n"]))
        u0 = function_from_config(cfg["u0"], grid, base_dir)
        s = cfg.get("s")
        return cls(cfg["family"], grid, float(cfg["tau"]), float(cfg["T"]), u0,
                   s=None if s is None else float(s), mass=cfg.get("mass", "lumped"),
                   u0_config=cfg["u0"])

    @classmethod
    def from_json(cls, path) -> "FlowSpec":
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text()), base_dir=path.parent)

    def to_dict(self) -> dict:
        d = {"family": self.family}
        if self.s is not None:
            d["s"] = self.s
        d.update(domain={"a": self.grid.domain.a, "b": self.grid.domain.b}, n=self.grid.n,
                 tau=self.tau, T=self.T, u0=self.u0_config, mass=self.mass)
        return d


def build_energy(spec: FlowSpec) -> QuadraticEnergy:
    g, fam, s = spec.grid, spec.family, spec.s
    M = assembly.assemble_mass(g, spec.mass)
    lam = spec.lambda_modulus
    if fam == "ZeroOrder":
        return QuadraticEnergy(assembly.assemble_gagliardo(g, s), M, s, spec.label, lam)
    if fam == "Renormalized":
        return QuadraticEnergy(assembly.assemble_renormalized(g, s), M, 1.0, spec.label, lam)
    if fam == "BBM":
        return QuadraticEnergy(assembly.assemble_gagliardo(g, s), M, 1.0 - s, spec.label, lam)
    if fam == "LimitODE":
        return QuadraticEnergy(M, M, D_OMEGA_D / 2.0, spec.label, lam)
    if fam == "LimitZero":
        return QuadraticEnergy(assembly.assemble_hat0(g), M, 1.0, spec.label, lam)
    return QuadraticEnergy(assembly.assemble_dirichlet(g), M, OMEGA_D / 4.0, spec.label, lam)


def solve(spec: FlowSpec, energy: QuadraticEnergy | None = None) -> Trajectory:
    return run_mm(energy or build_energy(spec), spec.tau, spec.T, spec.u0)


def spectral_reference(E: QuadraticEnergy, u0):
    """Exact solution ``t -> x(t)`` of the spatially discrete flow ``M x' = -2 c A x``."""
    mu, V = sla.eigh(2.0 * E.c * E.A.data, E.M.data)
    coef = V.T @ (E.M.data @ np.asarray(getattr(u0, "coeffs", u0), dtype=float))

    def at(t):
        return V @ (np.exp(-mu * t) * coef)

    at.eigenvalues = mu
    at.eigenvectors = V
    return at


def exact_reference(spec: FlowSpec, t: float | None = None):
    """Closed-form reference for LimitODE / LimitHeat; ``None`` otherwise.

    With ``t`` the state at that time is returned, otherwise a callable.
    """
    if spec.family == "LimitODE":
        u0 = spec.u0.coeffs

        def ref(tt):
            return u0 * math.exp(-D_OMEGA_D * tt)
    elif spec.family == "LimitHeat":
        ref = spectral_reference(build_energy(spec), spec.u0)
    else:
        return None
    if t is None:
        return ref
    if not (0.0 <= t <= spec.T * (1 + 1e-12)):
        raise ValueError(f"t = {t} outside [0, {spec.T}]")
    return ref(t)
