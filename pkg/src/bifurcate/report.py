"""Pipeline behind each subcommand. Computation fans out to workers; files are written here after joins."""
from __future__ import annotations

import html
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import svg
from .bifurcation_tracer import BifurcationDiagram, compute_locus, scan_circle
from .caustic import trace_caustic
from .config import RunConfig
from .critical_points import CriticalPoint, NonConvergence, find_critical_points, label_at
from .diagram_validator import NotUmbilic, classify_topology, summarize, validate
from .flow_engine import (Edge, PhasePortraitGraph, Section, _oriented, connection_graph,
                          saddle_manifold, seed_offset)
from .integrator import Trajectory
from .outputs import read_json, write_csv, write_json
from .parallel import parallel_map, worker_count

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VIOLATIONS = 2

CRITPTS_HEADER = ("x1", "x2", "y1", "y2", "lambda1", "lambda2", "class", "label")
CAUSTIC_HEADER = ("arc_id", "x1", "x2", "feature")
TRAJECTORY_HEADER = ("t", "y1", "y2")
SCAN_HEADER = ("alpha", "x1", "x2", "label_i", "label_j", "sep_u", "sep_s", "psi", "status")
SCAN_ZERO_HEADER = ("alpha", "x1", "x2", "label_i", "label_j", "sep_u", "sep_s", "psi")
BRANCHES_HEADER = ("branch_id", "label_i", "label_j", "sep_u", "sep_s", "x1", "x2", "psi_residual")


@dataclass
class RunResult:
    status: int = EXIT_OK
    files: list[Path] = field(default_factory=list)
    messages: list[str] = field(default_factory=list)

    def merge(self, other: RunResult) -> RunResult:
        self.status = max(self.status, other.status)
        self.files.extend(other.files)
        self.messages.extend(other.messages)
        return self


def _out(cfg: RunConfig) -> Path:
    p = Path(cfg.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _workers(cfg: RunConfig) -> int:
    return worker_count(cfg.workers)


# ------------------------------------------------------------------ caustic

def run_caustic(cfg: RunConfig) -> RunResult:
    out = _out(cfg)
    cau = trace_caustic(cfg.family, cfg.window, cfg.caustic_step)
    rows = []
    for arc in cau.arcs:
        rows.extend((arc.arc_id, float(p[0]), float(p[1]), "fold") for p in arc.points)
    rows.extend((-1, float(v[0]), float(v[1]), "cusp_vertex") for v in cau.vertices)
    res = RunResult(files=[write_csv(out / "caustic.csv", CAUSTIC_HEADER, rows)])
    if cfg.figures:
        res.files.append(_write_text(out / "caustic.svg", svg.caustic_svg(out / "caustic.csv")))
    res.messages.append(f"caustic: {len(cau.arcs)} arcs, {len(cau.vertices)} vertices")
    return res


def _write_text(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    return path


# ------------------------------------------------------------------ critical points

def _critpts_job(args) -> list[tuple]:
    family, x, window, tol = args
    try:
        pts: Sequence[CriticalPoint] = label_at(family, x, window)
    except (NonConvergence, ValueError, RuntimeError):
        # labels cannot be continued here (degenerate path); report the points unlabeled
        pts = find_critical_points(family, x, window, degeneracy_tol=tol)
    return [(x[0], x[1], p.y[0], p.y[1], p.eigenvalues[0], p.eigenvalues[1], p.cls.value, p.label) for p in pts]


def critpts_grid(cfg: RunConfig, x: tuple[float, float] | None = None) -> list[tuple[float, float]]:
    if x is not None:
        return [x]
    n = cfg.critpts_grid
    a, b, c, d = cfg.region
    xs = np.linspace(a, b, n) if n > 1 else np.array([0.5 * (a + b)])
    ys = np.linspace(c, d, n) if n > 1 else np.array([0.5 * (c + d)])
    return [(float(u), float(v)) for v in ys for u in xs]


def run_critpts(cfg: RunConfig, x: tuple[float, float] | None = None) -> RunResult:
    out = _out(cfg)
    grid = critpts_grid(cfg, x)
    jobs = [(cfg.family, g, cfg.window, cfg.degeneracy_tol) for g in grid]
    rows = [r for chunk in parallel_map(_critpts_job, jobs, _workers(cfg)) for r in chunk]
    res = RunResult(files=[write_csv(out / "critical_points.csv", CRITPTS_HEADER, rows)])
    res.messages.append(f"critpts: {len(rows)} points at {len(grid)} parameter values")
    return res


# ------------------------------------------------------------------ portrait

def _view(nodes: Sequence[CriticalPoint]) -> tuple[float, float, float, float]:
    if not nodes:
        return (-2.0, 2.0, -2.0, 2.0)
    ys = np.array([p.y for p in nodes], dtype=float)
    lo, hi = ys.min(axis=0), ys.max(axis=0)
    c = 0.5 * (lo + hi)
    half = 0.5 * float(max(hi - lo)) * 1.5 + 0.5
    return (float(c[0] - half), float(c[0] + half), float(c[1] - half), float(c[1] + half))


def _clip(tr: Trajectory, view) -> list[list[float]]:
    """Leading part of the curve inside the view box."""
    pts = []
    for a, b in zip(tr.y1, tr.y2):
        if not (view[0] <= a <= view[1] and view[2] <= b <= view[3]):
            break
        pts.append([a, b])
    return pts


def edge_trajectory(cfg: RunConfig, graph: PhasePortraitGraph, edge: Edge) -> Trajectory:
    """The gradient line behind ``edge``, integrated from the saddle eigenvector."""
    pts = graph.nodes
    by = {p.label: p for p in pts}
    controls = cfg.controls
    if edge.kind == "node_to_saddle":
        s = by[edge.target]
        dlt = seed_offset(min([p.distance(s) for p in pts if p is not s] or [1.0]))
        return saddle_manifold(cfg.family, graph.x, s, edge.branch, controls, dlt, targets=pts)
    si, sj = by[edge.source], by[edge.target]
    sec = Section.auto(si, sj)
    eu = _oriented(si.unstable_vector, sec.normal)
    sgn = 1.0 if edge.sep[0] == "+" else -1.0
    dlt = seed_offset(2.0 * sec.half_width)
    return saddle_manifold(cfg.family, graph.x, si, "unstable+", controls, dlt, targets=pts,
                           vector=(sgn * eu[0], sgn * eu[1]))


def run_portrait(cfg: RunConfig, x: tuple[float, float] | None = None) -> RunResult:
    out = _out(cfg)
    xt = x if x is not None else cfg.x
    graph = connection_graph(cfg.family, xt, cfg.controls, cfg.window, keep_curves=True)
    view = _view(graph.nodes)
    data = graph.to_dict()
    data["metadata"] = dict(graph.metadata, view=list(view))
    data["separatrices"] = {name: _clip(graph.separatrices[name], view) for name in sorted(graph.separatrices)}
    res = RunResult(files=[write_json(out / "portrait.json", data)])
    rows: list[tuple] = []
    if graph.edges:
        tr = edge_trajectory(cfg, graph, graph.edges[0])
        rows = list(zip(tr.t, tr.y1, tr.y2))
    res.files.append(write_csv(out / "trajectory.csv", TRAJECTORY_HEADER, rows))
    if cfg.figures:
        res.files.append(_write_text(out / "portrait.svg", svg.portrait_svg(out / "portrait.json")))
    res.messages.append(f"portrait at x={xt}: {len(graph.nodes)} critical points, {len(graph.edges)} edges")
    return res


# ------------------------------------------------------------------ scan

def run_scan(cfg: RunConfig, r: float | None = None) -> RunResult:
    out = _out(cfg)
    radius = r if r is not None else cfg.scan_r
    scan = scan_circle(cfg.family, radius, cfg.scan_n, pair=cfg.scan_pair, controls=cfg.controls,
                       window=cfg.window, workers=_workers(cfg))
    rows = [(s.alpha, s.x[0], s.x[1], s.pair[0], s.pair[1], s.sep[0], s.sep[1], s.psi, s.status)
            for s in scan.samples]
    zrows = [(z.alpha, z.x[0], z.x[1], z.pair[0], z.pair[1], z.sep[0], z.sep[1], z.psi) for z in scan.zeros]
    res = RunResult(files=[write_csv(out / "scan.csv", SCAN_HEADER, rows),
                           write_csv(out / "scan_zeros.csv", SCAN_ZERO_HEADER, zrows)])
    if cfg.figures:
        res.files.append(_write_text(out / "scan.svg", svg.scan_svg(out / "scan.csv")))
    angles = ", ".join(f"{z.alpha:.6f}" for z in scan.zeros)
    res.messages.append(f"scan r={radius}: {len(scan.zeros)} zeros at alpha = [{angles}]")
    return res


# ------------------------------------------------------------------ locus

def compute_diagram(cfg: RunConfig) -> BifurcationDiagram:
    cau = trace_caustic(cfg.family, cfg.window, cfg.caustic_step)
    return compute_locus(cfg.family, cfg.region, cfg.circle_n, cfg.grid, controls=cfg.controls,
                         window=cfg.window, caustic=cau, workers=_workers(cfg))


def run_locus(cfg: RunConfig) -> RunResult:
    out = _out(cfg)
    diagram = compute_diagram(cfg)
    rows = []
    for b in diagram.branches:
        for p, res_ in zip(b.points, b.residuals):
            rows.append((b.branch_id, b.label[0], b.label[1], b.sep[0], b.sep[1], float(p[0]), float(p[1]),
                         float(res_)))
    res = RunResult(files=[write_csv(out / "branches.csv", BRANCHES_HEADER, rows),
                           write_json(out / "diagram.json", diagram.to_dict())])
    if cfg.figures:
        res.files.append(_write_text(out / "locus.svg", svg.locus_svg(out / "diagram.json")))
    res.messages.append(f"locus: {len(diagram.branches)} branches, {len(diagram.intersections)} intersections")
    return res


# ------------------------------------------------------------------ validate

def run_validate(cfg: RunConfig, diagram_path: Path | None = None) -> RunResult:
    out = _out(cfg)
    src = diagram_path or out / "diagram.json"
    if not src.exists():
        raise FileNotFoundError(f"{src} not found; run 'locus' first or pass --diagram")
    diagram = BifurcationDiagram.from_dict(read_json(src))
    violations = validate(diagram)
    try:
        topo = classify_topology(diagram).to_dict()
    except NotUmbilic as exc:
        topo = {"letter": None, "allowed": None, "case": None, "signature": None, "note": str(exc)}
    res = RunResult(files=[
        write_json(out / "violations.json", {"summary": summarize(violations),
                                             "violations": [v.to_dict() for v in violations]}),
        write_json(out / "topology.json", topo),
    ])
    if violations:
        res.status = EXIT_VIOLATIONS
        for v in violations:
            res.messages.append(f"violation {v.rule}: {v.message}")
    res.messages.append(f"validate: {len(violations)} violations, topology {topo.get('letter')}")
    return res


# ------------------------------------------------------------------ report

_FIGURES = ("caustic.svg", "locus.svg", "portrait.svg", "scan.svg")


def index_html(out: Path, files: Sequence[Path], title: str) -> str:
    names = sorted({f.name for f in files if f.parent.resolve() == out.resolve()})
    lines = ["<!DOCTYPE html>", "<html>", "<head>", '<meta charset="utf-8">',
             f"<title>{html.escape(title)}</title>", "</head>", "<body>", f"<h1>{html.escape(title)}</h1>"]
    figs = [n for n in _FIGURES if n in names]
    for n in figs:
        lines.append(f'<figure><img src="{n}" alt="{n}"><figcaption>{n}</figcaption></figure>')
    lines.append("<h2>Data files</h2>")
    lines.append("<ul>")
    for n in names:
        if n not in figs:
            lines.append(f'<li><a href="{n}">{n}</a></li>')
    lines += ["</ul>", "</body>", "</html>"]
    return "\n".join(lines) + "\n"


def run_report(cfg: RunConfig, x: tuple[float, float] | None = None, r: float | None = None) -> RunResult:
    out = _out(cfg)
    res = RunResult()
    for step in (lambda: run_caustic(cfg), lambda: run_critpts(cfg, x), lambda: run_portrait(cfg, x),
                 lambda: run_scan(cfg, r), lambda: run_locus(cfg), lambda: run_validate(cfg)):
        res.merge(step())
    res.files.append(_write_text(out / "index.html", index_html(out, res.files, f"bifurcate report: {cfg.family.name}")))
    return res


SUBCOMMANDS: dict[str, Callable[..., RunResult]] = {
    "caustic": run_caustic,
    "critpts": run_critpts,
    "portrait": run_portrait,
    "scan": run_scan,
    "locus": run_locus,
    "validate": run_validate,
    "report": run_report,
}
