"""Hand-written SVG figures. Each figure is drawn only from the data file it sits next to."""
from __future__ import annotations

import math
from pathlib import Path
from typing import Iterable, Sequence

from .outputs import read_csv, read_json

WIDTH = 600.0
MARGIN = 20.0
CAUSTIC_STROKE = 3.0
BRANCH_STROKE = 1.2
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")


class Frame:
    """Affine map from a data box to SVG pixels with the vertical axis pointing up."""

    def __init__(self, box: Sequence[float]):
        x0, x1, y0, y1 = (float(v) for v in box)
        if not (x1 > x0 and y1 > y0):
            x0, x1, y0, y1 = x0 - 1.0, x1 + 1.0, y0 - 1.0, y1 + 1.0
        self.box = (x0, x1, y0, y1)
        self.scale = (WIDTH - 2 * MARGIN) / (x1 - x0)
        self.height = (y1 - y0) * self.scale + 2 * MARGIN

    def __call__(self, x: float, y: float) -> tuple[float, float]:
        x0, _, _, y1 = self.box
        return MARGIN + (x - x0) * self.scale, MARGIN + (y1 - y) * self.scale


def _num(v: float) -> str:
    s = f"{v:.3f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def _path(frame: Frame, pts: Iterable[Sequence[float]]) -> str:
    cmds = []
    for p in pts:
        if not all(math.isfinite(float(c)) for c in p):
            continue
        u, v = frame(float(p[0]), float(p[1]))
        cmds.append(("M" if not cmds else "L") + f"{_num(u)} {_num(v)}")
    return " ".join(cmds)


def _document(frame: Frame, body: list[str], title: str) -> str:
    w, h = _num(WIDTH), _num(frame.height)
    x0, x1, y0, y1 = frame.box
    cx0, cy0 = frame(x0, y1)
    cw, ch = (x1 - x0) * frame.scale, (y1 - y0) * frame.scale
    head = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">',
        f"<title>{title}</title>",
        f'<defs><clipPath id="view"><rect x="{_num(cx0)}" y="{_num(cy0)}" width="{_num(cw)}" height="{_num(ch)}"/>'
        "</clipPath></defs>",
        f'<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>',
        f'<rect x="{_num(cx0)}" y="{_num(cy0)}" width="{_num(cw)}" height="{_num(ch)}" fill="none" '
        'stroke="#999" stroke-width="0.5"/>',
    ]
    return "\n".join(head + body + ["</svg>"]) + "\n"


def _axes(frame: Frame) -> list[str]:
    x0, x1, y0, y1 = frame.box
    out = []
    if x0 < 0.0 < x1:
        out.append(f'<path d="{_path(frame, [(0.0, y0), (0.0, y1)])}" stroke="#bbb" stroke-width="0.5" fill="none"/>')
    if y0 < 0.0 < y1:
        out.append(f'<path d="{_path(frame, [(x0, 0.0), (x1, 0.0)])}" stroke="#bbb" stroke-width="0.5" fill="none"/>')
    return out


def _bbox(points: Sequence[Sequence[float]], pad: float = 0.05) -> tuple[float, float, float, float]:
    xs = [float(p[0]) for p in points if math.isfinite(float(p[0]))]
    ys = [float(p[1]) for p in points if math.isfinite(float(p[1]))]
    if not xs:
        return -1.0, 1.0, -1.0, 1.0
    dx = max(max(xs) - min(xs), max(ys) - min(ys), 1e-9) * pad
    return min(xs) - dx, max(xs) + dx, min(ys) - dx, max(ys) + dx


def _caustic_body(frame: Frame, arcs: list[list[Sequence[float]]], vertices: list[Sequence[float]]) -> list[str]:
    out = [f'<g clip-path="url(#view)" stroke="black" stroke-width="{_num(CAUSTIC_STROKE)}" fill="none" '
           'stroke-linejoin="round">']
    for arc in arcs:
        if len(arc) > 1:
            out.append(f'<path d="{_path(frame, arc)}"/>')
    out.append("</g>")
    for v in vertices:
        u, w = frame(float(v[0]), float(v[1]))
        out.append(f'<circle cx="{_num(u)}" cy="{_num(w)}" r="3.5" fill="black"/>')
    return out


def caustic_svg(caustic_csv: Path) -> str:
    rows = read_csv(caustic_csv)
    arcs: dict[int, list[tuple[float, float]]] = {}
    vertices = []
    for r in rows:
        p = (float(r["x1"]), float(r["x2"]))
        if r["feature"] == "cusp_vertex":
            vertices.append(p)
        else:
            arcs.setdefault(int(r["arc_id"]), []).append(p)
    frame = Frame(_bbox([p for a in arcs.values() for p in a] + vertices))
    body = _axes(frame) + _caustic_body(frame, [arcs[k] for k in sorted(arcs)], vertices)
    return _document(frame, body, "caustic")


def locus_svg(diagram_json: Path) -> str:
    d = read_json(diagram_json)
    frame = Frame(d["region"])
    cau = d.get("caustic", {})
    body = _axes(frame) + _caustic_body(frame, [a["points"] for a in cau.get("arcs", [])], cau.get("vertices", []))
    body.append(f'<g clip-path="url(#view)" fill="none" stroke-width="{_num(BRANCH_STROKE)}">')
    for k, b in enumerate(d.get("branches", [])):
        col = PALETTE[k % len(PALETTE)]
        lab = f"B {b['label'][0]}-{b['label'][1]} ({b['sep'][0]},{b['sep'][1]})"
        body.append(f'<path d="{_path(frame, b["points"])}" stroke="{col}"><title>{lab}</title></path>')
    body.append("</g>")
    for it in d.get("intersections", []):
        u, w = frame(*it["point"])
        body.append(f'<circle cx="{_num(u)}" cy="{_num(w)}" r="3" fill="none" stroke="black"/>')
    return _document(frame, body, f"bifurcation diagram: {d.get('family', '')}")


_NODE_STYLE = {
    "saddle": ("white", "black"),
    "unstable_node": ("black", "black"),
    "stable_node": ("#888", "black"),
}


def portrait_svg(portrait_json: Path) -> str:
    d = read_json(portrait_json)
    frame = Frame(d["metadata"]["view"])
    body = _axes(frame)
    body.append(f'<g clip-path="url(#view)" fill="none" stroke-width="{_num(BRANCH_STROKE)}">')
    for name in sorted(d.get("separatrices", {})):
        pts = d["separatrices"][name]
        col = "#d62728" if ":unstable" in name else "#1f77b4"
        body.append(f'<path d="{_path(frame, pts)}" stroke="{col}"><title>{name}</title></path>')
    body.append("</g>")
    for n in d["nodes"]:
        u, w = frame(*n["y"])
        fill, stroke = _NODE_STYLE.get(n["class"], ("#ffcc00", "black"))
        body.append(f'<circle cx="{_num(u)}" cy="{_num(w)}" r="4" fill="{fill}" stroke="{stroke}">'
                    f'<title>{n["label"]} ({n["class"]})</title></circle>')
        body.append(f'<text x="{_num(u + 6)}" y="{_num(w - 6)}" font-size="12" font-family="sans-serif">'
                    f'{n["label"]}</text>')
    return _document(frame, body, f"phase portrait at x = ({d['x'][0]}, {d['x'][1]})")


def scan_svg(scan_csv: Path) -> str:
    every = read_csv(scan_csv)
    step = 2.0 * math.pi / max(len({r["alpha"] for r in every}), 1)
    rows = [r for r in every if r["psi"] not in ("", "nan")]
    series: dict[tuple[str, ...], list[tuple[float, float]]] = {}
    for r in rows:
        key = (r["label_i"], r["label_j"], r["sep_u"], r["sep_s"])
        series.setdefault(key, []).append((float(r["alpha"]), float(r["psi"])))
    vals = [v for s in series.values() for _, v in s]
    lim = max([abs(v) for v in vals] + [1e-12])
    frame = Frame((0.0, 2.0 * math.pi, -1.05 * lim, 1.05 * lim))
    body = _axes(frame)
    body.append(f'<g clip-path="url(#view)" fill="none" stroke-width="{_num(BRANCH_STROKE)}">')
    for k, key in enumerate(sorted(series)):
        col = PALETTE[k % len(PALETTE)]
        # break the curve at gaps in alpha so undefined stretches stay empty
        seg: list[tuple[float, float]] = []
        pts = sorted(series[key])
        for p in pts:
            if seg and p[0] - seg[-1][0] > 1.5 * step:
                body.append(f'<path d="{_path(frame, seg)}" stroke="{col}"><title>{" ".join(key)}</title></path>')
                seg = []
            seg.append(p)
        if seg:
            body.append(f'<path d="{_path(frame, seg)}" stroke="{col}"><title>{" ".join(key)}</title></path>')
    body.append("</g>")
    return _document(frame, body, "splitting function along the circle")
