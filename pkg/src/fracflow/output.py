"""Run directories: manifests with content hashes, and dependency-free SVG charts."""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

from .assembly import HALF_CONVENTION
from .grid import D_OMEGA_D, OMEGA_D

MANIFEST = "manifest.json"


def conventions() -> dict:
    return {"half_convention": HALF_CONVENTION, "omega_d": OMEGA_D, "d_omega_d": D_OMEGA_D,
            "dimension": 1}


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj))


def write_manifest(out_dir, command: str, config: dict, version: str) -> dict:
    """Hash every file in ``out_dir`` (except the manifest) into ``manifest.json``."""
    out = Path(out_dir)
    files = {p.name: sha256_file(p) for p in sorted(out.iterdir())
             if p.is_file() and p.name != MANIFEST}
    man = {
        "command": command,
        "config": config,
        "config_sha256": hashlib.sha256(dumps(config).encode()).hexdigest(),
        "conventions": conventions(),
        "version": version,
        "files": files,
    }
    write_json(out / MANIFEST, man)
    return man


def verify_manifest(run_dir) -> list:
    """Names of files whose content no longer matches the recorded hash."""
    run = Path(run_dir)
    man = json.loads((run / MANIFEST).read_text())
    bad = []
    for name, digest in man.get("files", {}).items():
        p = run / name
        if not p.is_file() or sha256_file(p) != digest:
            bad.append(name)
    return bad


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _ticklabel(v: float) -> str:
    return f"{v:.4g}"


def svg_chart(series: dict, title: str = "", xlabel: str = "", ylabel: str = "",
              logx: bool = False, logy: bool = False, width: int = 640, height: int = 420) -> str:
    """Static polyline chart.

    ``series`` maps a legend label to ``(xs, ys)``. Points that cannot be
    drawn on a log axis are dropped.
    """
    tx = (lambda v: math.log10(v)) if logx else float
    ty = (lambda v: math.log10(v)) if logy else float
    clean = {}
    for name, (xs, ys) in series.items():
        pts = [(tx(x), ty(y)) for x, y in zip(xs, ys)
               if math.isfinite(x) and math.isfinite(y) and (not logx or x > 0) and (not logy or y > 0)]
        if pts:
            clean[name] = pts
    allp = [p for pts in clean.values() for p in pts]
    if not allp:
        allp = [(0.0, 0.0), (1.0, 1.0)]
    x0, x1 = min(p[0] for p in allp), max(p[0] for p in allp)
    y0, y1 = min(p[1] for p in allp), max(p[1] for p in allp)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    ml, mr, mt, mb = 70, 20, 30, 50
    pw, ph = width - ml - mr, height - mt - mb

    def X(v):
        return ml + (v - x0) / (x1 - x0) * pw

    def Y(v):
        return mt + (1.0 - (v - y0) / (y1 - y0)) * ph

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for v, anchor in ((x0, "start"), (x1, "end")):
        lab = _ticklabel(10 ** v if logx else v)
        out.append(f'<text x="{_fmt(X(v))}" y="{height - mb + 16}" font-size="11" '
                   f'text-anchor="{anchor}">{lab}</text>')
    for v in (y0, y1):
        lab = _ticklabel(10 ** v if logy else v)
        out.append(f'<text x="{ml - 4}" y="{_fmt(Y(v) + 4)}" font-size="11" '
                   f'text-anchor="end">{lab}</text>')
    out.append(f'<text x="{ml + pw / 2:.1f}" y="{height - 12}" font-size="12" '
               f'text-anchor="middle">{_esc(xlabel)}{" (log)" if logx else ""}</text>')
    out.append(f'<text x="14" y="{mt + ph / 2:.1f}" font-size="12" text-anchor="middle" '
               f'transform="rotate(-90 14 {mt + ph / 2:.1f})">{_esc(ylabel)}'
               f'{" (log)" if logy else ""}</text>')
    out.append(f'<text x="{width / 2:.1f}" y="18" font-size="13" '
               f'text-anchor="middle">{_esc(title)}</text>')
    for k, (name, pts) in enumerate(clean.items()):
        c = colors[k % len(colors)]
        coords = " ".join(f"{_fmt(X(a))},{_fmt(Y(b))}" for a, b in pts)
        out.append(f'<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{coords}"/>')
        out.append(f'<text x="{ml + 8}" y="{mt + 16 + 14 * k}" font-size="11" '
                   f'fill="{c}">{_esc(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(s: str) -> str:
    return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
