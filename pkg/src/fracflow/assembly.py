"""Dense quadratic-form matrices of the fractional energies on a hat space.

Conventions (``d = 1``, ``u`` zero-extended off the domain):

* ``F^s(u) = 1/2 iint |u(x) - u(y)|^2 |x - y|^(-1-2s)`` (:data:`HALF_CONVENTION`)
* ``G^s(u)``: same integral restricted to ``|x - y| < 1``
* ``J^s(u) = -iint_{|x-y|>1} u(x) u(y) |x - y|^(-1-2s)``
* ``F^0(u) = (d omega_d / 2) ||u||^2``
* ``F^s - F^0 / s = G^s + J^s``

Each matrix ``A`` satisfies ``u^T A u = energy(u)`` for the nodal vector ``u``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import toeplitz

from .grid import D_OMEGA_D, Grid, format_float
from .kernels import FAR, FULL, NEAR, toeplitz_column

__all__ = [
    "HALF_CONVENTION",
    "EnergyMatrix",
    "assemble_gagliardo",
    "assemble_near",
    "assemble_far",
    "assemble_mass",
    "assemble_dirichlet",
    "assemble_renormalized",
    "assemble_hat0",
]

#: ``F^s`` is half of the full Gagliardo double integral.
HALF_CONVENTION = True

KINDS = ("gagliardo", "near", "far", "renormalized", "hat0", "mass", "dirichlet")


@dataclass(frozen=True)
class EnergyMatrix:
    kind: str
    data: np.ndarray = field(repr=False)
    grid: Grid = field(repr=False)
    s: float | None = None
    mode: str | None = None
    full_double_integral: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown matrix kind {self.kind!r}")
        a = np.array(self.data, dtype=float)
        if a.shape != (self.grid.n, self.grid.n):
            raise ValueError(f"matrix shape {a.shape} does not match grid n={self.grid.n}")
        if not np.all(np.isfinite(a)):
            raise ArithmeticError(f"{self.kind} matrix has non-finite entries")
        a.setflags(write=False)
        object.__setattr__(self, "data", a)

    @property
    def fingerprint(self) -> str:
        return self.grid.fingerprint

    def form(self, u) -> float:
        u = np.asarray(getattr(u, "coeffs", u), dtype=float)
        return float(u @ (self.data @ u))

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            for row in self.data:
                w.writerow([format_float(v) for v in row])


def _check_open_s(s):
    if not (0.0 < s < 1.0):
        raise ValueError(f"fractional order must lie in (0, 1), got {s}")


def _toeplitz(grid, s, clip, form):
    return toeplitz(toeplitz_column(grid.h, grid.n, s, clip, form))


def assemble_gagliardo(grid: Grid, s: float, full_double_integral: bool = False) -> EnergyMatrix:
    """Matrix of ``F^s``; doubled when ``full_double_integral`` is set."""
    _check_open_s(s)
    a = _toeplitz(grid, s, FULL, "difference")
    if full_double_integral:
        a = 2.0 * a
    return EnergyMatrix("gagliardo", a, grid, s=s, full_double_integral=full_double_integral)


def assemble_near(grid: Grid, s: float) -> EnergyMatrix:
    """Matrix of ``G^s``, ``s in [0, 1)``."""
    if not (0.0 <= s < 1.0):
        raise ValueError(f"fractional order must lie in [0, 1), got {s}")
    return EnergyMatrix("near", _toeplitz(grid, s, NEAR, "difference"), grid, s=s)


def assemble_far(grid: Grid, s: float) -> EnergyMatrix:
    """Matrix of ``J^s``; identically zero when the domain is no longer than 1."""
    if not (0.0 <= s < 1.0):
        raise ValueError(f"fractional order must lie in [0, 1), got {s}")
    return EnergyMatrix("far", _toeplitz(grid, s, FAR, "product"), grid, s=s)


def assemble_mass(grid: Grid, mode: str = "consistent") -> EnergyMatrix:
    """L2 mass matrix: ``h I`` (lumped) or ``h/6 tridiag(1, 4, 1)`` (consistent)."""
    n, h = grid.n, grid.h
    if mode == "lumped":
        m = h * np.eye(n)
    elif mode == "consistent":
        m = (h / 6.0) * (4.0 * np.eye(n) + np.eye(n, k=1) + np.eye(n, k=-1))
    else:
        raise ValueError(f"mass mode must be 'lumped' or 'consistent', got {mode!r}")
    return EnergyMatrix("mass", m, grid, mode=mode)


def assemble_dirichlet(grid: Grid) -> EnergyMatrix:
    """Stiffness matrix ``K = 1/h tridiag(-1, 2, -1)``, ``u^T K u = int |u'|^2``."""
    n, h = grid.n, grid.h
    k = (2.0 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)) / h
    return EnergyMatrix("dirichlet", k, grid)


def assemble_renormalized(grid: Grid, s: float) -> EnergyMatrix:
    """Matrix of ``F^s - F^0 / s``, built from the full Gagliardo matrix."""
    _check_open_s(s)
    a = assemble_gagliardo(grid, s).data
    m = assemble_mass(grid, "consistent").data
    return EnergyMatrix("renormalized", a - (D_OMEGA_D / (2.0 * s)) * m, grid, s=s)


def assemble_hat0(grid: Grid) -> EnergyMatrix:
    """Matrix of the 0-Gagliardo energy ``G^0 + J^0``."""
    return EnergyMatrix("hat0", assemble_near(grid, 0.0).data + assemble_far(grid, 0.0).data,
                        grid, s=0.0)
