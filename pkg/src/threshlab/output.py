"""CSV/JSON persistence and a small hand-written SVG line chart."""
import csv
import json
import math
import os
from xml.sax.saxutils import escape

import numpy as np


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    if isinstance(v, (complex, np.complexfloating)):
        raise TypeError("split complex values into real and imaginary columns")
    return str(v)


def write_csv(path, header, rows):
    """Rows of numbers/strings; floats at 17 significant digits."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            if len(r) != len(header):
                raise ValueError(f"row has {len(r)} fields, header has {len(header)}")
            w.writerow([_fmt(v) for v in r])
    return path


def read_csv(path):
    """Column dict; a column becomes a float array when every entry parses."""
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        cols = [[] for _ in header]
        for r in rd:
            for c, v in zip(cols, r):
                c.append(v)
    out = {}
    for name, c in zip(header, cols):
        try:
            out[name] = np.array([float(v) for v in c])
        except ValueError:
            out[name] = c
    return out


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return path


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o).__name__}")


COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf")


def svg_chart(path, series, title="", xlabel="", ylabel="", logx=False, logy=False,
              ref_lines=(), width=640, height=420):
    """Line/scatter chart.

    series: iterable of dicts with keys x, y, label and optional style
    ("line" or "points").  ref_lines: dicts with either y (horizontal) or
    slope/intercept in plotted coordinates, plus label.
    """
    tx = (lambda v: math.log10(v)) if logx else float
    ty = (lambda v: math.log10(v)) if logy else float
    pts = []
    for s in series:
        xy = [(tx(a), ty(b)) for a, b in zip(s["x"], s["y"])
              if np.isfinite(a) and np.isfinite(b) and (not logx or a > 0) and (not logy or b > 0)]
        pts.append(xy)
    allx = [p[0] for xy in pts for p in xy] or [0.0, 1.0]
    ally = [p[1] for xy in pts for p in xy] or [0.0, 1.0]
    x0, x1 = min(allx), max(allx)
    y0, y1 = min(ally), max(ally)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad
    ml, mr, mt, mb = 70, 20, 40, 50
    pw, ph = width - ml - mr, height - mt - mb

    def X(v):
        return ml + (v - x0) / (x1 - x0) * pw

    def Y(v):
        return mt + (y1 - v) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
           f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
           f'<text x="{ml + pw / 2:.1f}" y="{height - 12}" text-anchor="middle">{escape(xlabel)}</text>',
           f'<text x="16" y="{mt + ph / 2:.1f}" text-anchor="middle" '
           f'transform="rotate(-90 16 {mt + ph / 2:.1f})">{escape(ylabel)}</text>']
    for k in range(5):
        xv = x0 + (x1 - x0) * k / 4
        yv = y0 + (y1 - y0) * k / 4
        xl = f"1e{xv:.2g}" if logx else f"{xv:.3g}"
        yl = f"1e{yv:.2g}" if logy else f"{yv:.3g}"
        out.append(f'<text x="{X(xv):.1f}" y="{mt + ph + 16}" text-anchor="middle">{xl}</text>')
        out.append(f'<text x="{ml - 6}" y="{Y(yv) + 4:.1f}" text-anchor="end">{yl}</text>')
    for j, r in enumerate(ref_lines):
        if "y" in r:
            ya = yb = ty(r["y"]) if logy else r["y"]
        else:
            ya = r["slope"] * x0 + r["intercept"]
            yb = r["slope"] * x1 + r["intercept"]
        out.append(f'<line x1="{X(x0):.1f}" y1="{Y(ya):.1f}" x2="{X(x1):.1f}" y2="{Y(yb):.1f}" '
                   f'stroke="gray" stroke-dasharray="5,4"/>')
        if r.get("label"):
            out.append(f'<text x="{X(x1) - 4:.1f}" y="{Y(yb) - 4:.1f}" text-anchor="end" '
                       f'fill="gray">{escape(r["label"])}</text>')
    for i, (s, xy) in enumerate(zip(series, pts)):
        col = COLORS[i % len(COLORS)]
        if s.get("style", "line") == "points":
            out.extend(f'<circle cx="{X(a):.1f}" cy="{Y(b):.1f}" r="2.5" fill="{col}"/>' for a, b in xy)
        elif xy:
            d = " ".join(f"{X(a):.1f},{Y(b):.1f}" for a, b in xy)
            out.append(f'<polyline points="{d}" fill="none" stroke="{col}" stroke-width="1.5"/>')
        out.append(f'<text x="{ml + 8}" y="{mt + 16 + 14 * i}" fill="{col}">{escape(s.get("label", ""))}</text>')
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")
    return path


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path
