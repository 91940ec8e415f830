"""CSV and SVG emission.  Files are written atomically (temp file + rename)."""
from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence
from xml.sax.saxutils import escape

from .gain_design import DesignPoint
from .robust_tube import Zonotope2D
from .simulator import SimulationTrace, SweepRow

REGION_COLUMNS = ("lambda", "k_inv", "stable", "gray")
SWEEP_COLUMNS = ("tau_s", "omega_tau", "k", "r", "rk", "p_span_m", "feasible")
TRACE_COLUMNS = ("time_s", "c_m", "cdot_mps", "xi_m", "p_m", "xi_ref_m", "p_ref_m", "v_m")
TUBE_COLUMNS = ("index", "g_c", "g_cdot", "center_c", "center_cdot", "tail_bound")
MEASURE_COLUMNS = ("tau_s", "analytic_span_m", "worst_case_span_m", "random_span_m", "diverged", "analytic_stable")


def fmt(x) -> str:
    """Decimal text that parses back to the identical double."""
    if x is None:
        return ""
    if isinstance(x, (bool,)):
        return str(int(x))
    if isinstance(x, int):
        return str(x)
    return format(float(x), ".17g")


def parse(s: str):
    return None if s == "" else float(s)


def write_atomic(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as f:
            f.write(text)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def read_csv(path) -> tuple[list[str], list[list]]:
    with open(path, newline="") as f:
        r = csv.reader(f)
        header = next(r)
        return header, [[parse(s) for s in row] for row in r]


def region_csv(rows) -> str:
    return csv_text(REGION_COLUMNS, rows)


def sweep_csv(points: Sequence[DesignPoint]) -> str:
    return csv_text(SWEEP_COLUMNS, (
        (d.tau, d.omega_tau, d.k, d.r, d.rk, d.p_span, d.feasible) for d in points
    ))


def measure_csv(rows: Sequence[SweepRow]) -> str:
    return csv_text(MEASURE_COLUMNS, (
        (r.tau, r.analytic_span, r.worst_case_span, r.random_span, r.diverged, r.analytic_stable) for r in rows
    ))


def trace_csv(tr: SimulationTrace) -> str:
    return csv_text(TRACE_COLUMNS, zip(
        tr.time, tr.x[:, 0], tr.x[:, 1], tr.xi, tr.p, tr.xi_ref, tr.p_ref, tr.v,
    ))


def tube_csv(z: Zonotope2D) -> str:
    rows = [(i, g[0], g[1], z.center[0], z.center[1], z.tail_bound) for i, g in enumerate(z.generators)]
    if not rows:
        rows = [(0, 0.0, 0.0, z.center[0], z.center[1], z.tail_bound)]
    return csv_text(TUBE_COLUMNS, rows)


# --- SVG -------------------------------------------------------------------

_W, _H = 640, 420
_ML, _MR, _MT, _MB = 70, 20, 36, 52
_STYLES = {
    "solid": "",
    "dashed": ' stroke-dasharray="7,4"',
    "dotted": ' stroke-dasharray="2,3"',
}


class Chart:
    """Minimal line chart with linear axes."""

    def __init__(self, title: str, xlabel: str, ylabel: str, xlim=None, ylim=None):
        self.title, self.xlabel, self.ylabel = title, xlabel, ylabel
        self.xlim, self.ylim = xlim, ylim
        self.series = []   # (xs, ys, color, style, label)
        self.polygons = []  # (points, fill, opacity)
        self.rects = []     # (x0, y0, x1, y1, fill)

    def line(self, xs, ys, color="#1f4fbf", style="solid", label=None):
        pts = [(float(x), float(y)) for x, y in zip(xs, ys) if math.isfinite(x) and math.isfinite(y)]
        self.series.append((pts, color, style, label))
        return self

    def polygon(self, pts, fill="none", opacity=1.0, stroke="#000"):
        self.polygons.append(([(float(x), float(y)) for x, y in pts], fill, opacity, stroke))
        return self

    def rect(self, x0, y0, x1, y1, fill="#bbb"):
        self.rects.append((x0, y0, x1, y1, fill))
        return self

    def _limits(self):
        xs = [p[0] for s in self.series for p in s[0]] + [p[0] for pg in self.polygons for p in pg[0]]
        ys = [p[1] for s in self.series for p in s[0]] + [p[1] for pg in self.polygons for p in pg[0]]
        xlim = self.xlim or (min(xs, default=0.0), max(xs, default=1.0))
        ylim = self.ylim or (min(ys, default=0.0), max(ys, default=1.0))
        if xlim[1] <= xlim[0]:
            xlim = (xlim[0] - 0.5, xlim[0] + 0.5)
        if ylim[1] <= ylim[0]:
            ylim = (ylim[0] - 0.5, ylim[0] + 0.5)
        if self.ylim is None:
            pad = 0.05 * (ylim[1] - ylim[0])
            ylim = (ylim[0] - pad, ylim[1] + pad)
        return xlim, ylim

    def render(self) -> str:
        (x0, x1), (y0, y1) = self._limits()
        pw, ph = _W - _ML - _MR, _H - _MT - _MB

        def sx(x):
            return _ML + (x - x0) / (x1 - x0) * pw

        def sy(y):
            return _MT + ph - (y - y0) / (y1 - y0) * ph

        out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" font-family="sans-serif" font-size="12">',
               f'<rect width="{_W}" height="{_H}" fill="white"/>',
               f'<clipPath id="plot"><rect x="{_ML}" y="{_MT}" width="{pw}" height="{ph}"/></clipPath>']
        out.append('<g clip-path="url(#plot)">')
        for a, b, c, d, fill in self.rects:
            xa, xb = sorted((sx(a), sx(c)))
            ya, yb = sorted((sy(b), sy(d)))
            out.append(f'<rect x="{xa:.2f}" y="{ya:.2f}" width="{xb - xa:.2f}" height="{yb - ya:.2f}" fill="{fill}"/>')
        for pts, fill, op, stroke in self.polygons:
            s = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
            out.append(f'<polygon points="{s}" fill="{fill}" fill-opacity="{op}" stroke="{stroke}" stroke-width="1.5"/>')
        for pts, color, style, _ in self.series:
            if pts:
                s = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
                out.append(f'<polyline points="{s}" fill="none" stroke="{color}" stroke-width="1.5"{_STYLES[style]}/>')
        out.append("</g>")
        out.append(f'<rect x="{_ML}" y="{_MT}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
        for i in range(6):
            xv = x0 + i * (x1 - x0) / 5
            yv = y0 + i * (y1 - y0) / 5
            out.append(f'<text x="{sx(xv):.1f}" y="{_MT + ph + 16}" text-anchor="middle">{xv:.3g}</text>')
            out.append(f'<text x="{_ML - 6}" y="{sy(yv) + 4:.1f}" text-anchor="end">{yv:.3g}</text>')
        out.append(f'<text x="{_ML + pw / 2}" y="{_H - 12}" text-anchor="middle">{escape(self.xlabel)}</text>')
        out.append(f'<text x="16" y="{_MT + ph / 2}" text-anchor="middle" transform="rotate(-90 16 {_MT + ph / 2})">{escape(self.ylabel)}</text>')
        out.append(f'<text x="{_ML + pw / 2}" y="22" text-anchor="middle" font-size="14">{escape(self.title)}</text>')
        ly = _MT + 14
        for _, color, style, label in self.series:
            if label:
                out.append(f'<line x1="{_ML + pw - 130}" y1="{ly - 4}" x2="{_ML + pw - 105}" y2="{ly - 4}" stroke="{color}" stroke-width="1.5"{_STYLES[style]}/>')
                out.append(f'<text x="{_ML + pw - 100}" y="{ly}">{escape(label)}</text>')
                ly += 16
        out.append("</svg>")
        return "\n".join(out) + "\n"


def trace_svg(tr: SimulationTrace, title: str) -> str:
    """CP solid, CoP dashed, references dotted."""
    ch = Chart(title, "time [s]", "lateral position [m]")
    ch.line(tr.time, tr.xi, "#1f4fbf", "solid", "CP")
    ch.line(tr.time, tr.p, "#000000", "dashed", "CoP")
    ch.line(tr.time, tr.xi_ref, "#1f4fbf", "dotted", "CP ref")
    ch.line(tr.time, tr.p_ref, "#000000", "dotted", "CoP ref")
    return ch.render()


def sweep_svg(points: Sequence[DesignPoint], tau0: float | None = None) -> str:
    ok = [d for d in points if d.feasible]
    spans = [d.p_span for d in ok]
    ymax = min(max(spans, default=1.0), 4.0 * min(spans, default=1.0))
    ch = Chart("CoP tracking-error span vs sampling period", "sampling period [ms]", "span [cm]",
               xlim=(0.0, 1000.0 * max(d.tau for d in points)), ylim=(0.0, 100.0 * ymax * 1.1))
    ch.line([1000.0 * d.tau for d in ok], [100.0 * s for s in spans], "#1f4fbf", "solid", "p~ span")
    if tau0 is not None:
        ch.line([1000.0 * tau0] * 2, [0.0, 100.0 * ymax * 1.1], "#888888", "dotted", "tau0")
    return ch.render()


def region_svg(params, rows, resolution_lam, resolution_kinv, vertices, curves=None) -> str:
    lams = sorted({r[0] for r in rows})
    kinvs = sorted({r[1] for r in rows})
    dl = (lams[-1] - lams[0]) / max(1, len(lams) - 1)
    dk = (kinvs[-1] - kinvs[0]) / max(1, len(kinvs) - 1)
    ch = Chart(f"Stable gains, omega*tau = {params.omega_tau:.4g}", "lambda [s]", "1/k",
               xlim=(lams[0], lams[-1]), ylim=(kinvs[0], kinvs[-1]))
    # gray cells merged into runs along 1/k for each lambda column
    by_lam: dict[float, list[float]] = {}
    for lam, kinv, _, gray in rows:
        if gray:
            by_lam.setdefault(lam, []).append(kinv)
    for lam, ks in by_lam.items():
        ks.sort()
        start = prev = ks[0]
        for kv in ks[1:] + [None]:
            if kv is None or kv - prev > 1.5 * dk:
                ch.rect(lam - dl / 2, start - dk / 2, lam + dl / 2, prev + dk / 2, "#c8c8c8")
                if kv is not None:
                    start = kv
            if kv is not None:
                prev = kv
    ch.polygon(vertices, "none", 1.0, "#000000")
    for name, pts in (curves or {}).items():
        if pts:
            ch.line([p[0] for p in pts], [p[1] for p in pts], "#3060e0", "solid" if name == "cp_line" else "dotted",
                    {"cp_line": "lambda = 1/omega"}.get(name))
    return ch.render()


def tube_svg(z: Zonotope2D) -> str:
    v = z.vertices()
    ch = Chart("Invariant tube (truncated)", "c error [m]", "cdot error [m/s]")
    ch.polygon(list(map(tuple, v)), "#c8c8c8", 0.8, "#000000")
    return ch.render()
