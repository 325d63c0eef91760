"""``fracflow`` command line: energies, flows, sweeps, rates, stability studies and reports.

Every command reads a JSON config, writes CSV/JSON (and optionally SVG)
into ``--out`` together with ``manifest.json``, and maps failures to exit
codes: 0 success, 2 configuration or user error, 3 numerical failure,
4 failed self-check under ``--check``.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, assembly, lab
from .flows import FlowSpec, build_energy, function_from_config, solve
from .grid import D_OMEGA_D, OMEGA_D, Domain, builtin_family, format_float, make_grid
from .mm import dissipation_report, interpolate
from .output import MANIFEST, svg_chart, verify_manifest, write_json, write_manifest

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CHECK = 0, 2, 3, 4
COMMANDS = ("energy", "flow", "sweep", "rate", "stability", "report")
REL_TOL = 1e-8


class ConfigError(ValueError):
    pass


def _keys(cfg, allowed, required=()):
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(cfg) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    missing = [k for k in required if k not in cfg]
    if missing:
        raise ConfigError(f"missing config keys: {missing}")


def _domain(cfg) -> Domain:
    if not isinstance(cfg, dict) or set(cfg) != {"a", "b"}:
        raise ConfigError('domain must be {"a": ..., "b": ...}')
    return Domain(float(cfg["a"]), float(cfg["b"]))


def _float_list(cfg, key):
    vals = cfg.get(key)
    if not isinstance(vals, list) or not vals:
        raise ConfigError(f"{key} must be a non-empty list")
    return [float(v) for v in vals]


def _write_rows(path, header, rows):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([format_float(v) if isinstance(v, float) else v for v in r])


def _finish(ctx, summary):
    """Write summary + manifest; report checks."""
    write_json(ctx.out / "summary.json", summary)
    write_manifest(ctx.out, ctx.command, ctx.config, __version__)
    checks = summary.get("checks", {})
    for name in sorted(checks):
        print(f"{'PASS' if checks[name] else 'FAIL'} {ctx.command}:{name}")
    if ctx.check and not all(checks.values()):
        return EXIT_CHECK
    return EXIT_OK


# ---------------------------------------------------------------- energy

def cmd_energy(ctx) -> int:
    """Table of the fractional energies of one function.

    Config: ``domain``, ``n``, ``u`` (function config), ``s_list``.
    """
    cfg = ctx.config
    _keys(cfg, {"domain", "n", "u", "s_list"}, ("domain", "n", "u", "s_list"))
    grid = make_grid(_domain(cfg["domain"]), int(cfg["n"]))
    u = function_from_config(cfg["u"], grid, ctx.base_dir)
    s_list = _float_list(cfg, "s_list")
    F0 = D_OMEGA_D / 2.0 * assembly.assemble_mass(grid, "consistent").form(u)
    hat0 = assembly.assemble_hat0(grid).form(u)
    F1 = OMEGA_D / 4.0 * assembly.assemble_dirichlet(grid).form(u)
    rows, checks = [], {}
    ok_id = ok_split = True
    for s in s_list:
        Fs = assembly.assemble_gagliardo(grid, s).form(u)
        G = assembly.assemble_near(grid, s).form(u)
        J = assembly.assemble_far(grid, s).form(u)
        Fhat = assembly.assemble_renormalized(grid, s).form(u)
        rows.append((s, Fs, G, J, Fhat))
        scale = abs(Fs) + abs(F0 / s)
        ok_id &= abs(Fhat - (Fs - F0 / s)) <= REL_TOL * max(scale, 1e-300)
        ok_split &= abs(Fhat - (G + J)) <= REL_TOL * max(scale, 1e-300)
    _write_rows(ctx.out / "energy.csv", ["s", "F", "G", "J", "Fhat"], rows)
    _write_rows(ctx.out / "limits.csv", ["name", "value"],
                [("F0", F0), ("Fhat0", hat0), ("F1", F1)])
    checks["renormalization_identity"] = bool(ok_id)
    checks["near_far_split"] = bool(ok_split)
    checks["F_nonnegative"] = bool(all(r[1] >= 0 for r in rows))
    for r in rows:
        print("s={:<8g} F={:.10g} G={:.10g} J={:.10g} Fhat={:.10g}".format(*r))
    print(f"F0={F0:.10g} Fhat0={hat0:.10g} F1={F1:.10g}")
    if ctx.svg:
        (ctx.out / "energy.svg").write_text(svg_chart(
            {"s F^s": ([r[0] for r in rows], [r[0] * r[1] for r in rows]),
             "Fhat^s": ([r[0] for r in rows], [r[4] for r in rows])},
            title="energies vs s", xlabel="s", ylabel="value"))
    return _finish(ctx, {"checks": checks, "F0": F0, "Fhat0": hat0, "F1": F1})


# ---------------------------------------------------------------- flow

FLOW_EXTRA = {"snapshots", "reference"}


def cmd_flow(ctx) -> int:
    """Run one minimizing-movement flow.

    Config: the FlowSpec keys plus optional ``snapshots`` (list of times,
    default ``[0, T/2, T]``) and ``reference`` (``{"csv_path", "tol"}``:
    compare the final state in the metric norm relative to the reference).
    """
    cfg = dict(ctx.config)
    _keys(cfg, set(FlowSpec.KEYS) | FLOW_EXTRA)
    snaps = cfg.pop("snapshots", None)
    reference = cfg.pop("reference", None)
    spec = FlowSpec.from_dict(cfg, ctx.base_dir)
    E = build_energy(spec)
    traj = solve(spec, E)
    rep = dissipation_report(traj)
    times = [0.0, spec.T / 2, spec.T] if snaps is None else [float(t) for t in snaps]
    for t in times:
        if not 0.0 <= t <= spec.T:
            raise ConfigError(f"snapshot time {t} outside [0, T]")
    _write_rows(ctx.out / "trajectory.csv", ["t", "energy", "increment"],
                [(float(t), float(e), "" if k == 0 else float(traj.increments[k - 1]))
                 for k, (t, e) in enumerate(zip(traj.times, traj.energies))])
    g = spec.grid
    for k, t in enumerate(times):
        spec.u0.with_coeffs(interpolate(traj, t)).to_csv(ctx.out / f"snapshot_{k:02d}.csv")
    checks = {"per_step_dissipation": rep["steps_ok"], "summed_dissipation": rep["bound_ok"],
              "energy_nonincreasing": bool(np.all(np.diff(traj.energies) <=
                                                  1e-10 * (1 + np.abs(traj.energies[:-1]))))}
    summary = {"label": traj.label, "steps": traj.n_steps, "lambda": traj.lambda_modulus,
               "dissipation": rep, "snapshot_times": times,
               "energy_initial": float(traj.energies[0]), "energy_final": float(traj.energies[-1])}
    if reference is not None:
        _keys(reference, {"csv_path", "tol"}, ("csv_path",))
        ref = function_from_config({"csv_path": reference["csv_path"]}, g, ctx.base_dir)
        d = traj.states[-1] - ref.coeffs
        err = math.sqrt(E.norm2(d)) / max(math.sqrt(E.norm2(ref.coeffs)), 1e-300)
        summary["reference_rel_error"] = err
        checks["matches_reference"] = bool(err <= float(reference.get("tol", 1e-6)))
    print(f"{traj.label}: {traj.n_steps} steps, E {traj.energies[0]:.10g} -> {traj.energies[-1]:.10g}")
    if ctx.svg:
        (ctx.out / "energy.svg").write_text(svg_chart(
            {"E": (list(traj.times), list(traj.energies))},
            title=f"{traj.label} energy", xlabel="t", ylabel="E"))
        (ctx.out / "snapshots.svg").write_text(svg_chart(
            {f"t={t:g}": (list(g.nodes), list(interpolate(traj, t))) for t in times},
            title=f"{traj.label} states", xlabel="x", ylabel="u"))
    summary["checks"] = checks
    return _finish(ctx, summary)


# ---------------------------------------------------------------- sweep

SWEEP_KEYS = {"kind", "domain", "n", "n0", "u", "s_list", "tol"}


def cmd_sweep(ctx) -> int:
    """Gamma-limit sweeps.

    Config: ``kind`` in ``order0 | order1 | bbm | ms_constant``, ``domain``,
    ``u``, ``s_list`` and ``n`` (or ``n0`` for ``bbm``); ``tol`` optional.
    For ``bbm`` the function must be a builtin family, resampled per grid.
    """
    cfg = ctx.config
    _keys(cfg, SWEEP_KEYS, ("kind", "domain", "u", "s_list"))
    kind = cfg["kind"]
    dom = _domain(cfg["domain"])
    s_list = _float_list(cfg, "s_list")
    tol = cfg.get("tol")
    fit = {}
    if kind == "bbm":
        u_cfg = cfg["u"]
        if "family" not in u_cfg or set(u_cfg) - {"family", "params"}:
            raise ConfigError("bbm sweep needs a builtin family for u")
        f = builtin_family(u_cfg["family"], dom, **dict(u_cfg.get("params", {})))
        n0 = int(cfg.get("n0", 16))
        kw = {} if tol is None else {"tol": float(tol)}
        res = lab.gamma_sweep_bbm(f, dom, s_list, n0=n0, jobs=ctx.jobs, **kw)
    else:
        if "n" not in cfg:
            raise ConfigError("missing config key 'n'")
        grid = make_grid(dom, int(cfg["n"]))
        u = function_from_config(cfg["u"], grid, ctx.base_dir)
        if kind == "order0":
            res = lab.gamma_sweep_order0(u, s_list, jobs=ctx.jobs,
                                         **({} if tol is None else {"tol": float(tol)}))
        elif kind == "order1":
            res = lab.gamma_sweep_order1(u, s_list, jobs=ctx.jobs)
        elif kind == "ms_constant":
            m = lab.ms_constant_estimate(u, s_list, jobs=ctx.jobs)
            res = lab.SweepResult("s", s_list, {})
            fit = {"c_full": m.c_full, "c_half": m.c_half, "matches_full": m.matches_full,
                   "matches_half": m.matches_half, "finding": m.finding}
            res.fit = fit
            res.checks = {"full_matches_d_omega_d": m.matches_full == "d_omega_d",
                          "half_matches_d_omega_d_over_2": m.matches_half == "d_omega_d/2"}
            print(m.finding)
        else:
            raise ConfigError(f"unknown sweep kind {kind!r}")
    return _emit_sweep(ctx, res, f"sweep_{kind}", logx=False)


def _emit_sweep(ctx, res, stem, logx=False, logy=False):
    res.to_csv(ctx.out / f"{stem}.csv")
    for k, v in sorted(res.fit.items()):
        print(f"{k} = {v}")
    if ctx.svg and res.observables:
        series = {k: (res.values, v) for k, v in res.observables.items() if k != "n"}
        (ctx.out / f"{stem}.svg").write_text(svg_chart(
            series, title=stem, xlabel=res.parameter, ylabel="value", logx=logx, logy=logy))
    return _finish(ctx, res.summary())


# ---------------------------------------------------------------- rate

RATE_EXTRA = {"tau_list", "min_order", "order_range"}


def cmd_rate(ctx) -> int:
    """Time-step convergence order.

    Config: FlowSpec keys without ``tau``, plus ``tau_list`` and optional
    ``min_order`` (0.45) and ``order_range`` ([lo, hi]).
    """
    cfg = dict(ctx.config)
    _keys(cfg, (set(FlowSpec.KEYS) - {"tau"}) | RATE_EXTRA, ("tau_list",))
    taus = _float_list(cfg, "tau_list")
    min_order = float(cfg.pop("min_order", 0.45))
    rng = cfg.pop("order_range", None)
    cfg.pop("tau_list")
    cfg["tau"] = max(taus)
    spec = FlowSpec.from_dict(cfg, ctx.base_dir)
    res = lab.tau_rate(spec, taus, min_order=min_order,
                       order_range=None if rng is None else tuple(float(v) for v in rng))
    return _emit_sweep(ctx, res, "rate", logx=True, logy=True)


# ---------------------------------------------------------------- stability

STAB_KEYS = {"family", "limit_family", "s_list", "tau", "T", "u0", "domain", "n", "n0",
             "mass", "final_tol"}


def cmd_stability(ctx) -> int:
    """Distance between an s-family of flows and its limit flow.

    Config: ``family``, ``limit_family``, ``s_list``, ``tau``, ``T``,
    ``u0`` (builtin family config), ``domain``, one of ``n``/``n0``,
    optional ``mass`` and ``final_tol``.
    """
    cfg = ctx.config
    _keys(cfg, STAB_KEYS, ("family", "limit_family", "s_list", "tau", "T", "u0", "domain"))
    res = lab.flow_stability(
        cfg["family"], cfg["limit_family"], _float_list(cfg, "s_list"), float(cfg["tau"]),
        float(cfg["T"]), cfg["u0"], _domain(cfg["domain"]),
        n=None if "n" not in cfg else int(cfg["n"]),
        n0=None if "n0" not in cfg else int(cfg["n0"]),
        mass=cfg.get("mass", "lumped"),
        final_tol=None if "final_tol" not in cfg else float(cfg["final_tol"]),
        jobs=ctx.jobs)
    return _emit_sweep(ctx, res, "stability")


# ---------------------------------------------------------------- report

def cmd_report(ctx) -> int:
    """Consolidate the manifests under a results directory.

    Each run contributes its summary checks; a file whose hash no longer
    matches its manifest marks the run as an integrity failure.
    """
    root = ctx.results_dir
    if root is None or not root.is_dir():
        raise ConfigError(f"results directory {root} not found")
    runs = sorted(p.parent for p in root.rglob(MANIFEST) if p.parent != ctx.out)
    if not runs:
        raise ConfigError(f"no {MANIFEST} found under {root}")
    entries, lines, all_ok = [], [], True
    for run in runs:
        man = json.loads((run / MANIFEST).read_text())
        if man.get("command") == "report":
            continue
        bad = verify_manifest(run)
        summ_path = run / "summary.json"
        checks = json.loads(summ_path.read_text()).get("checks", {}) if summ_path.is_file() else {}
        ok = not bad and bool(checks) and all(checks.values())
        all_ok &= ok
        rel = run.relative_to(root).as_posix() or "."
        entries.append({"run": rel, "command": man.get("command"), "checks": checks,
                        "integrity_ok": not bad, "tampered_files": bad, "passed": ok})
        status = "PASS" if ok else "FAIL"
        note = f" integrity failure: {', '.join(bad)}" if bad else ""
        lines.append(f"{status} {rel} [{man.get('command')}] "
                     f"{sum(checks.values())}/{len(checks)} checks{note}")
        for name in sorted(checks):
            lines.append(f"    {'pass' if checks[name] else 'FAIL'} {name}")
    if not entries:
        raise ConfigError(f"no run manifests found under {root}")
    report = {"runs": entries, "n_runs": len(entries), "passed": all_ok}
    text = "\n".join(lines) + "\n"
    print(text, end="")
    ctx.out.mkdir(parents=True, exist_ok=True)
    (ctx.out / "report.txt").write_text(text)
    write_json(ctx.out / "report.json", report)
    write_manifest(ctx.out, "report", ctx.config, __version__)
    if ctx.check and not all_ok:
        return EXIT_CHECK
    return EXIT_OK


HANDLERS = {"energy": cmd_energy, "flow": cmd_flow, "sweep": cmd_sweep, "rate": cmd_rate,
            "stability": cmd_stability, "report": cmd_report}


class Context:
    def __init__(self, command, config, base_dir, out, jobs, check, svg, results_dir=None):
        self.command = command
        self.config = config
        self.base_dir = base_dir
        self.out = out
        self.jobs = jobs
        self.check = check
        self.svg = svg
        self.results_dir = results_dir


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fracflow", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"fracflow {__version__}")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("results_dir", nargs="?", help="report only: directory of prior runs")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--out", help="output directory (default: results/<command>)")
    p.add_argument("--jobs", type=int, default=None, help="worker threads (default: cores)")
    p.add_argument("--check", action="store_true", help="exit 4 if any self-check fails")
    p.add_argument("--svg", action="store_true", help="also write SVG charts")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config, base_dir = {}, Path.cwd()
        if args.config:
            path = Path(args.config)
            if not path.is_file():
                raise FileNotFoundError(f"config file {path} not found")
            config = json.loads(path.read_text())
            base_dir = path.parent
        elif args.command != "report":
            raise ConfigError("--config is required")
        results_dir = None
        if args.command == "report":
            if args.config:
                _keys(config, {"results_dir"}, ("results_dir",))
                results_dir = base_dir / config["results_dir"]
            if args.results_dir:
                results_dir = Path(args.results_dir)
            if results_dir is None:
                raise ConfigError("report needs a results directory")
            if not config:
                config = {"results_dir": str(results_dir)}
        elif args.results_dir:
            raise ConfigError(f"unexpected positional argument {args.results_dir!r}")
        jobs = args.jobs if args.jobs is not None else (os.cpu_count() or 1)
        if jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        out = Path(args.out) if args.out else Path("results") / args.command
        if args.command != "report":
            out.mkdir(parents=True, exist_ok=True)
        ctx = Context(args.command, config, base_dir, out, jobs, args.check, args.svg, results_dir)
        return HANDLERS[args.command](ctx)
    except (ValueError, FileNotFoundError, KeyError, TypeError) as exc:
        print(f"fracflow: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ArithmeticError as exc:
        print(f"fracflow: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
