"""One-dimensional domains, uniform grids and zero-extended hat functions."""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

__all__ = [
    "Domain",
    "Grid",
    "GridFunction",
    "make_grid",
    "sample",
    "builtin_family",
    "read_csv",
    "OMEGA_D",
    "D_OMEGA_D",
]

# Measure of the unit ball in R^1 and d * omega_d for d = 1.
OMEGA_D = 2.0
D_OMEGA_D = 2.0


@dataclass(frozen=True)
class Domain:
    """Open interval ``(a, b)``."""

    a: float = -1.0
    b: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)) or self.a >= self.b:
            raise ValueError(f"invalid domain ({self.a}, {self.b}): need a < b")

    @property
    def length(self) -> float:
        return self.b - self.a

    @property
    def center(self) -> float:
        return 0.5 * (self.a + self.b)

    omega_d = OMEGA_D
    d_omega_d = D_OMEGA_D


@dataclass(frozen=True)
class Grid:
    """Uniform grid of ``n`` interior nodes ``x_i = a + i h``, ``i = 1..n``."""

    domain: Domain
    n: int
    h: float = field(init=False)
    nodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise ValueError(f"grid needs n >= 3 interior nodes, got {self.n}")
        h = self.domain.length / (self.n + 1)
        nodes = self.domain.a + h * np.arange(1, self.n + 1)
        nodes.setflags(write=False)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "nodes", nodes)

    @property
    def fingerprint(self) -> str:
        key = f"{self.domain.a!r}|{self.domain.b!r}|{self.n}"
        return hashlib.sha1(key.encode()).hexdigest()[:12]

    def hat(self, i: int, x) -> np.ndarray:
        """Evaluate the hat function of node ``i`` (1-based) at ``x``."""
        if not 1 <= i <= self.n:
            raise IndexError(f"node index {i} outside 1..{self.n}")
        x = np.asarray(x, dtype=float)
        return np.maximum(0.0, 1.0 - np.abs(x - self.nodes[i - 1]) / self.h)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Nodal coefficients of ``u = sum_i u_i phi_i``, extended by zero off the domain."""

    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} coefficients, got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def __call__(self, x) -> np.ndarray:
        """Evaluate the zero-extended piecewise-linear interpolant."""
        g = self.grid
        xp = np.concatenate(([g.domain.a], g.nodes, [g.domain.b]))
        fp = np.concatenate(([0.0], self.coeffs, [0.0]))
        return np.interp(np.asarray(x, dtype=float), xp, fp, left=0.0, right=0.0)

    def with_coeffs(self, coeffs) -> "GridFunction":
        return GridFunction(self.grid, coeffs)

    def to_csv(self, path) -> None:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "u"])
            for x, u in zip(self.grid.nodes, self.coeffs):
                w.writerow([format_float(x), format_float(u)])


def format_float(v: float) -> str:
    """Locale-independent, round-trip-exact decimal string."""
    return format(float(v), ".17g")


def read_csv(path, grid: Grid | None = None) -> GridFunction:
    """Read a ``x,u`` CSV written by :meth:`GridFunction.to_csv`.

    Without ``grid`` the grid is rebuilt from the node column, assuming the
    nodes are interior nodes of a uniform grid.
    """
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["x", "u"]:
        raise ValueError(f"{path}: expected header 'x,u'")
    data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    if data.ndim != 2 or data.shape[0] < 3:
        raise ValueError(f"{path}: need at least 3 nodes")
    x, u = data[:, 0], data[:, 1]
    if grid is None:
        n = len(x)
        h = (x[-1] - x[0]) / (n - 1)
        grid = make_grid(Domain(x[0] - h, x[-1] + h), n)
    if grid.n != len(u) or not np.allclose(grid.nodes, x, rtol=0, atol=1e-12 * grid.domain.length):
        raise ValueError(f"{path}: nodes do not match the grid")
    return GridFunction(grid, u)


def make_grid(domain: Domain, n: int) -> Grid:
    return Grid(domain, n)


def sample(f: Callable, grid: Grid) -> GridFunction:
    """Nodal interpolation ``u_i = f(x_i)``."""
    vals = np.asarray(f(grid.nodes), dtype=float)
    if vals.shape == ():
        vals = np.full(grid.n, float(vals))
    return GridFunction(grid, vals)


def _smooth_step(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.asarray(t, dtype=float)

    def psi(r):
        out = np.zeros_like(r)
        pos = r > 0
        out[pos] = np.exp(-1.0 / r[pos])
        return out

    a, b = psi(t), psi(1.0 - t)
    return a / (a + b)


def builtin_family(name: str, domain: Domain | None = None, **params) -> Callable:
    """Smooth test functions compactly supported in the domain.

    Parameters
    ----------
    name : {"bump", "sine_mode", "plateau", "zero"}
    domain : Domain, optional
        Defaults to ``(-1, 1)``.
    **params
        ``bump``: ``center`` (domain midpoint), ``width`` (support half-width,
        default ``0.4 |Omega|`` so the support sits in the central 80%),
        ``amplitude`` (1).
        ``sine_mode``: ``k`` (mode number >= 1), ``amplitude``.
        ``plateau``: ``margin`` (fraction of ``|Omega|``, default 0.2) and
        ``ramp`` (fraction, default ``margin``): 0 within ``margin`` of the
        boundary, 1 on the centre, smooth in between.
    """
    domain = domain or Domain()
    a, b, L = domain.a, domain.b, domain.length
    amp = float(params.pop("amplitude", 1.0))

    if name == "zero":
        _no_extra(name, params)
        return lambda x: np.zeros_like(np.asarray(x, dtype=float))

    if name == "bump":
        c = float(params.pop("center", domain.center))
        w = float(params.pop("width", 0.4 * L))
        _no_extra(name, params)
        if not w > 0:
            raise ValueError("bump width must be positive")
        if c - w < a or c + w > b:
            raise ValueError("bump support must lie inside the domain")

        def bump(x):
            r = (np.asarray(x, dtype=float) - c) / w
            out = np.zeros_like(r)
            inside = np.abs(r) < 1
            out[inside] = np.exp(1.0 - 1.0 / (1.0 - r[inside] ** 2))
            return amp * out

        return bump

    if name == "sine_mode":
        k = params.pop("k", 1)
        _no_extra(name, params)
        if int(k) != k or k < 1:
            raise ValueError("sine_mode needs integer k >= 1")
        k = int(k)
        return lambda x: amp * np.sin(k * np.pi * (np.asarray(x, dtype=float) - a) / L)

    if name == "plateau":
        margin = float(params.pop("margin", 0.2))
        ramp = float(params.pop("ramp", margin))
        _no_extra(name, params)
        if not (0 < margin and 0 < ramp and margin + ramp < 0.5):
            raise ValueError("plateau needs margin, ramp > 0 and margin + ramp < 1/2")
        lo, hi = a + margin * L, b - margin * L
        r = ramp * L

        def plateau(x):
            x = np.asarray(x, dtype=float)
            return amp * _smooth_step((x - lo) / r) * _smooth_step((hi - x) / r)

        return plateau

    raise ValueError(f"unknown function family {name!r}")


def _no_extra(name, params):
    if params:
        raise ValueError(f"unexpected parameters for {name}: {sorted(params)}")
