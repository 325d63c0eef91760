"""Parameter sweeps: Gamma-limits of the energies and stability of the flows."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import assembly
from .flows import FlowSpec, build_energy, exact_reference, function_from_config
from .grid import D_OMEGA_D, OMEGA_D, Domain, GridFunction, format_float, make_grid, sample
from .mm import interpolate, mm_error_vs_reference, run_mm, sample_times

__all__ = [
    "SweepResult",
    "fit_order",
    "richardson_limit",
    "decreasing_with_slack",
    "gamma_sweep_order0",
    "gamma_sweep_order1",
    "gamma_sweep_bbm",
    "ms_constant_estimate",
    "coupled_n",
    "flow_stability",
    "tau_rate",
]

SLACK = 0.05
N_CAP = 2048


@dataclass
class SweepResult:
    """Rows of observables per parameter value plus a fit summary."""

    parameter: str
    values: list
    observables: dict = field(default_factory=dict)
    fit: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)

    def __post_init__(self):
        for k, col in self.observables.items():
            if len(col) != len(self.values):
                raise ValueError(f"observable {k!r} has {len(col)} rows, expected {len(self.values)}")
            if not all(math.isfinite(v) for v in col):
                raise ArithmeticError(f"observable {k!r} has non-finite values")

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def column(self, name) -> np.ndarray:
        return np.asarray(self.observables[name], dtype=float)

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            keys = list(self.observables)
            w.writerow([self.parameter] + keys)
            for i, v in enumerate(self.values):
                w.writerow([format_float(v)] + [format_float(self.observables[k][i]) for k in keys])

    def summary(self) -> dict:
        return {"parameter": self.parameter, "values": list(self.values), "fit": self.fit,
                "checks": self.checks, "passed": self.passed}


def fit_order(points) -> dict:
    """Least-squares line through ``(log param, log value)``.

    Returns ``slope``, ``intercept`` and the RMS ``residual``.
    """
    pts = [(float(p), float(v)) for p, v in points]
    if len(pts) < 3:
        raise ValueError("fit_order needs at least 3 points")
    p, v = np.array(pts).T
    if np.any(v <= 0) or np.any(p <= 0):
        raise ValueError("fit_order needs positive parameters and values")
    X = np.log(p)
    Y = np.log(v)
    slope, intercept = np.polyfit(X, Y, 1)
    resid = Y - (slope * X + intercept)
    return {"slope": float(slope), "intercept": float(intercept),
            "residual": float(np.sqrt(np.mean(resid ** 2)))}


def richardson_limit(params, values, order: int = 2) -> dict:
    """Polynomial extrapolation to ``param -> 0`` through the ``order + 1`` smallest params."""
    p = np.asarray(params, dtype=float)
    v = np.asarray(values, dtype=float)
    idx = np.argsort(np.abs(p))[: order + 1]
    coef = np.polyfit(p[idx], v[idx], len(idx) - 1)
    limit = float(coef[-1])
    # residual: drop one order and compare
    if len(idx) >= 2:
        lo = np.polyfit(p[idx[:-1]], v[idx[:-1]], len(idx) - 2)
        spread = abs(float(lo[-1]) - limit)
    else:
        spread = float("nan")
    return {"limit": limit, "spread": spread, "points": int(len(idx))}


def decreasing_with_slack(seq, slack: float = SLACK, min_len: int = 4) -> bool:
    seq = list(seq)
    if len(seq) < min_len:
        return False
    return all(b <= (1.0 + slack) * a for a, b in zip(seq[:-1], seq[1:]))


def _pmap(fn, items, jobs):
    if jobs and jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def _form(mat, u):
    return mat.form(u)


def _rel(a, b):
    return abs(a - b) / abs(b) if b != 0 else abs(a - b)


def gamma_sweep_order0(u: GridFunction, s_list, tol: float = 0.02,
                       full_double_integral: bool = False, jobs: int = 1) -> SweepResult:
    """Rows ``s, s F^s(u)``; the extrapolated limit is compared with ``F^0(u)``."""
    s_list = [float(s) for s in s_list]
    g = u.grid
    vals = _pmap(lambda s: s * _form(assembly.assemble_gagliardo(g, s, full_double_integral), u),
                 s_list, jobs)
    f0 = D_OMEGA_D / 2.0 * _form(assembly.assemble_mass(g, "consistent"), u)
    res = SweepResult("s", s_list, {"sFs": vals})
    if len(s_list) >= 2:
        rich = richardson_limit(s_list, vals)
        res.fit = {"limit": rich["limit"], "spread": rich["spread"], "F0": f0,
                   "rel_gap": _rel(rich["limit"], f0) if f0 else 0.0}
        res.checks["limit_matches_F0"] = bool(abs(rich["limit"] - f0) <= tol * abs(f0))
    res.checks["rows_positive"] = bool(all(v > 0 for v in vals)) if f0 > 0 else bool(
        all(v == 0 for v in vals))
    return res


def gamma_sweep_order1(u: GridFunction, s_list, tol_hat: float = 0.02, tol_near: float = 0.02,
                       tol_far: float = 0.01, jobs: int = 1) -> SweepResult:
    """Rows ``s, hat F^s, G^s, J^s`` compared with ``hat F^0, G^0, J^0`` at the smallest ``s``."""
    s_list = [float(s) for s in s_list]
    g = u.grid

    def row(s):
        return (_form(assembly.assemble_renormalized(g, s), u),
                _form(assembly.assemble_near(g, s), u),
                _form(assembly.assemble_far(g, s), u))

    rows = _pmap(row, s_list, jobs)
    fh, gg, jj = (list(c) for c in zip(*rows))
    G0 = _form(assembly.assemble_near(g, 0.0), u)
    J0 = _form(assembly.assemble_far(g, 0.0), u)
    H0 = G0 + J0
    res = SweepResult("s", s_list, {"Fhat": fh, "G": gg, "J": jj})
    k = int(np.argmin(s_list))
    res.fit = {"Fhat0": H0, "G0": G0, "J0": J0,
               "rel_gap_Fhat": _rel(fh[k], H0), "rel_gap_G": _rel(gg[k], G0),
               "rel_gap_J": _rel(jj[k], J0)}
    order = np.argsort(s_list)
    g_sorted = np.asarray(gg)[order]
    res.checks.update(
        Fhat_limit=bool(abs(fh[k] - H0) <= tol_hat * abs(H0) + 1e-300),
        G_limit=bool(abs(gg[k] - G0) <= tol_near * abs(G0) + 1e-300),
        J_limit=bool(abs(jj[k] - J0) <= tol_far * abs(J0) + 1e-300),
        G_monotone_in_s=bool(np.all(np.diff(g_sorted) >= -1e-12 * (1 + np.abs(g_sorted[1:])))),
    )
    return res


def coupled_n(s: float, n0: int, cap: int = N_CAP) -> int:
    """Grid size ``ceil(n0 / (1 - s))`` capped at ``cap``."""
    return int(min(math.ceil(n0 / (1.0 - s) - 1e-9), cap))


def gamma_sweep_bbm(f, domain: Domain, s_list, n_list=None, n0: int = 16,
                    target: float | None = None, tol: float = 0.05, jobs: int = 1) -> SweepResult:
    """Rows ``s, n, (1 - s) F^s_h(f)`` with ``n`` refined jointly with ``s``.

    The diagonal limit is a linear extrapolation in ``1 - s`` through the
    last two rows. ``target`` defaults to ``F^1`` of the interpolant on the
    finest grid. ``turning_point`` is the first ``s`` after which a row
    decreases. On a single fixed grid the rows saturate at ``F^1`` of the
    interpolant; ``saturation_point`` is where they come within 1% of it.
    """
    s_list = [float(s) for s in s_list]
    if n_list is None:
        n_list = [coupled_n(s, n0) for s in s_list]
    if len(n_list) != len(s_list):
        raise ValueError("n_list and s_list differ in length")

    def row(sn):
        s, n = sn
        g = make_grid(domain, int(n))
        u = sample(f, g)
        return (1.0 - s) * _form(assembly.assemble_gagliardo(g, s), u)

    vals = _pmap(row, list(zip(s_list, n_list)), jobs)
    if target is None:
        g = make_grid(domain, int(max(n_list)))
        target = OMEGA_D / 4.0 * _form(assembly.assemble_dirichlet(g), sample(f, g))
    res = SweepResult("s", s_list, {"n": [float(n) for n in n_list], "scaled_Fs": vals})
    if len(s_list) >= 2:
        one_minus = 1.0 - np.asarray(s_list)
        rich = richardson_limit(one_minus, vals, order=1)
        turning = None
        for i in range(1, len(vals)):
            if vals[i] < vals[i - 1]:
                turning = s_list[i - 1]
                break
        res.fit = {"limit": rich["limit"], "spread": rich["spread"], "target": target,
                   "rel_gap": _rel(rich["limit"], target), "turning_point": turning}
        if len(set(n_list)) == 1:
            # fixed grid: rows approach F^1 of the interpolant, not F^1(f)
            g = make_grid(domain, int(n_list[0]))
            f1_h = OMEGA_D / 4.0 * _form(assembly.assemble_dirichlet(g), sample(f, g))
            sat = next((sv for sv, v in zip(s_list, vals) if abs(v - f1_h) <= 0.01 * abs(f1_h)),
                       None)
            res.fit.update(fixed_grid_limit=f1_h, saturation_point=sat)
        res.checks["diagonal_limit"] = bool(abs(rich["limit"] - target) <= tol * abs(target))
    return res


@dataclass(frozen=True)
class MSConstant:
    """Empirical ``lim s [u]^2 / ||u||^2`` for both normalisations."""

    c_full: float
    c_half: float
    matches_full: str | None
    matches_half: str | None
    s_list: tuple = ()

    @property
    def finding(self) -> str:
        return (f"full double integral -> {self.c_full:.4f} ({self.matches_full}); "
                f"half convention -> {self.c_half:.4f} ({self.matches_half})")


def ms_constant_estimate(u: GridFunction, s_list, tol: float = 0.03, jobs: int = 1) -> MSConstant:
    """Fit the small-``s`` constant of ``s`` times the Gagliardo double integral over ``||u||^2``."""
    s_list = [float(s) for s in s_list]
    g = u.grid
    norm2 = _form(assembly.assemble_mass(g, "consistent"), u)
    if not norm2 > 0:
        raise ValueError("ms_constant_estimate needs u != 0")
    if len(s_list) < 3:
        raise ValueError("ms_constant_estimate needs at least 3 values of s")
    full = _pmap(lambda s: s * _form(assembly.assemble_gagliardo(g, s, True), u) / norm2,
                 s_list, jobs)
    c_full = richardson_limit(s_list, full)["limit"]
    c_half = c_full / 2.0

    def classify(c):
        for name, ref in (("d_omega_d", D_OMEGA_D), ("d_omega_d/2", D_OMEGA_D / 2.0)):
            if abs(c - ref) <= tol * ref:
                return name
        return None

    return MSConstant(c_full, c_half, classify(c_full), classify(c_half), tuple(s_list))


def _spec_for(family, s, grid, tau, T, u0_cfg, mass):
    u0 = function_from_config(u0_cfg, grid)
    return FlowSpec(family, grid, tau, T, u0, s=s, mass=mass, u0_config=u0_cfg)


def _limit_reference(spec: FlowSpec):
    ref = exact_reference(spec)
    if ref is not None:
        return ref, build_energy(spec)
    E = build_energy(spec)
    traj = run_mm(E, spec.tau, spec.T, spec.u0)
    return (lambda t: interpolate(traj, t)), E


def flow_stability(family: str, limit_family: str, s_list, tau: float, T: float,
                   u0: dict, domain: Domain, n: int | None = None, n0: int | None = None,
                   mass: str = "lumped", final_tol: float | None = None,
                   jobs: int = 1) -> SweepResult:
    """Distance between the ``family(s)`` flow and the limit flow, per ``s``.

    ``u0`` is a function config (``{"family": ..., "params": ...}``) sampled on
    each grid, so the datum is the same smooth function for every ``s``.
    With ``n0`` the grid is refined as :func:`coupled_n`. Errors are sup over
    sampled times in the lumped-mass norm, relative to ``||u0||``.
    """
    s_list = [float(s) for s in s_list]
    if not s_list:
        raise ValueError("empty s_list")
    if (n is None) == (n0 is None):
        raise ValueError("give exactly one of n and n0")
    times = sample_times(T, tau)
    t_mid = T / 2.0
    limit_cache = {}

    def get_limit(nn):
        if nn not in limit_cache:
            grid = make_grid(domain, nn)
            lspec = _spec_for(limit_family, None, grid, tau, T, u0, mass)
            limit_cache[nn] = _limit_reference(lspec) + (lspec,)
        return limit_cache[nn]

    def row(s):
        nn = n if n is not None else coupled_n(s, n0)
        ref, E_lim, lspec = get_limit(nn)
        spec = _spec_for(family, s, lspec.grid, tau, T, u0, mass)
        E = build_energy(spec)
        traj = run_mm(E, tau, T, spec.u0)
        ml = assembly.assemble_mass(spec.grid, "lumped").data
        u0n = math.sqrt(float(spec.u0.coeffs @ ml @ spec.u0.coeffs))
        err = 0.0
        for t in times:
            d = interpolate(traj, t) - ref(t)
            err = max(err, math.sqrt(max(float(d @ ml @ d), 0.0)))
        signed = E.value(interpolate(traj, t_mid)) - E_lim.value(ref(t_mid))
        rel = err / u0n if u0n > 0 else 0.0
        return float(nn), err, rel, abs(signed), signed

    if n is not None:
        get_limit(n)
    rows = _pmap(row, s_list, jobs)
    ns, errs, rels, gaps, signed = (list(c) for c in zip(*rows))
    res = SweepResult("s", s_list, {"n": ns, "sup_error": errs, "rel_sup_error": rels,
                                    "energy_gap": gaps, "energy_gap_signed": signed})
    res.fit = {"final_rel_error": rels[-1], "t_energy": t_mid}
    zero = all(e == 0 for e in errs)
    res.checks["error_decreasing"] = zero or decreasing_with_slack(errs)
    res.checks["energy_gap_decreasing"] = zero or decreasing_with_slack(gaps)
    if final_tol is not None:
        res.checks["final_error"] = bool(rels[-1] <= final_tol)
    return res


def tau_rate(spec: FlowSpec, tau_list, min_order: float = 0.45,
             order_range: tuple | None = None) -> SweepResult:
    """Observed order of the sup-in-time error in ``tau``.

    The reference is the exact solution when one exists, otherwise a run of
    the same energy with ``min(tau_list) / 16``.
    """
    taus = sorted((float(t) for t in tau_list), reverse=True)
    if len(taus) < 3:
        raise ValueError("tau_rate needs at least 3 step sizes")
    E = build_energy(spec)
    ref = exact_reference(spec)
    ref_kind = "exact"
    if ref is None:
        ref = run_mm(E, taus[-1] / 16.0, spec.T, spec.u0, strict=True)
        ref_kind = "fine_run"
    out = mm_error_vs_reference(E, taus, spec.T, spec.u0, ref)
    res = SweepResult("tau", taus, {"sup_error": out["errors"]})
    if all(e > 0 for e in out["errors"]):
        fit = fit_order(zip(taus, out["errors"]))
        res.fit = {"order": fit["slope"], "residual": fit["residual"], "reference": ref_kind}
        res.checks["order_at_least"] = bool(fit["slope"] >= min_order)
        if order_range is not None:
            lo, hi = order_range
            res.checks["order_in_range"] = bool(lo <= fit["slope"] <= hi)
    else:
        res.fit = {"order": None, "reference": ref_kind}
        res.checks["zero_error"] = True
    res.checks["halving_monotone"] = bool(all(
        b <= (1.0 + SLACK) * a for a, b in zip(out["errors"][:-1], out["errors"][1:])))
    return res


def dump_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
