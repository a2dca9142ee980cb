"""Gradient-flow integration, saddle manifolds, the splitting function and connection graphs."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

from .critical_points import (
    DEFAULT_WINDOW,
    CriticalPoint,
    PointClass,
    label_at,
    window_diagonal,
)
from .field_models import GeneratingFamily, ParameterPoint, PhasePoint, _xy
from .integrator import FlowControls, LineEvent, Termination, Trajectory, integrate_rhs

BRANCHES = ("unstable+", "unstable-", "stable+", "stable-")
SEP_COMBOS = (("+", "+"), ("+", "-"), ("-", "+"), ("-", "-"))


class Direction(str, Enum):
    FORWARD = "forward"
    BACKWARD = "backward"


class NoCrossing(RuntimeError):
    def __init__(self, message: str, cause: str):
        super().__init__(message)
        self.cause = cause

    def __reduce__(self):
        return type(self), (str(self), self.cause)


class MissingSaddle(LookupError):
    pass


class NotASaddle(ValueError):
    pass


def controls_for_window(window: Sequence[float] = DEFAULT_WINDOW, **overrides) -> FlowControls:
    """Default controls with escape radius ten times the phase-window radius."""
    radius = 0.5 * window_diagonal(window)
    params = dict(escape_radius=10.0 * radius)
    params.update(overrides)
    return FlowControls(**params)


DEFAULT_CONTROLS = controls_for_window()


def integrate(family: GeneratingFamily, x: ParameterPoint | Sequence[float], y0: PhasePoint | Sequence[float],
              direction: Direction | str = Direction.FORWARD, controls: FlowControls = DEFAULT_CONTROLS,
              section: Section | None = None, targets: Sequence[CriticalPoint] = (),
              t_end: float | None = None, dense: bool = False) -> Trajectory:
    """Integrate the flow at parameter ``x`` from ``y0``; backward runs in negative time."""
    d = Direction(direction)
    line = LineEvent(section.base, section.normal) if section is not None else None
    tg = [(p.label, p.y[0], p.y[1]) for p in targets]
    return integrate_rhs(family.rhs(_xy(x)), _xy(y0), 1 if d is Direction.FORWARD else -1, controls,
                         line=line, targets=tg, t_end=t_end, dense=dense)


@dataclass(frozen=True)
class Section:
    base: tuple[float, float]
    normal: tuple[float, float]
    tangent: tuple[float, float]
    half_width: float

    @classmethod
    def auto(cls, si: CriticalPoint, sj: CriticalPoint) -> Section:
        """Midpoint section of the segment s_i s_j; (normal, tangent) positively oriented."""
        d1, d2 = sj.y[0] - si.y[0], sj.y[1] - si.y[1]
        d = math.hypot(d1, d2)
        if d == 0.0:
            raise ValueError("saddles coincide; no section can separate them")
        n = (d1 / d, d2 / d)
        return cls((0.5 * (si.y[0] + sj.y[0]), 0.5 * (si.y[1] + sj.y[1])), n, (-n[1], n[0]), 0.5 * d)

    def coordinate(self, y: Sequence[float]) -> float:
        return (y[0] - self.base[0]) * self.tangent[0] + (y[1] - self.base[1]) * self.tangent[1]


@dataclass(frozen=True)
class SplittingSample:
    x: tuple[float, float]
    pair: tuple[str, str]
    h: float
    k: float
    psi: float
    sep: tuple[str, str]
    distance: float

    @property
    def connected(self) -> bool:
        return abs(self.psi) < 1e-6 * self.distance


def seed_offset(distance: float) -> float:
    return min(1e-4, max(1e-9, 1e-6 * distance))


def branch_vector(saddle: CriticalPoint, which: str) -> tuple[float, float]:
    if which not in BRANCHES:
        raise ValueError(f"branch must be one of {BRANCHES}, got {which!r}")
    e = saddle.unstable_vector if which.startswith("unstable") else saddle.stable_vector
    return e if which.endswith("+") else (-e[0], -e[1])


def saddle_manifold(family: GeneratingFamily, x: ParameterPoint | Sequence[float], saddle: CriticalPoint,
                    which: str, controls: FlowControls = DEFAULT_CONTROLS, delta: float | None = None,
                    section: Section | None = None, targets: Sequence[CriticalPoint] = (),
                    vector: tuple[float, float] | None = None, t_end: float | None = None,
                    dense: bool = False) -> Trajectory:
    """One separatrix branch of ``saddle``, seeded at ``saddle.y + delta * e``.

    ``+``/``-`` refer to the sign of the stored eigenvector unless ``vector``
    overrides the seed direction.
    """
    if saddle.cls is not PointClass.SADDLE:
        raise NotASaddle(f"point {saddle.label} at {saddle.y} is {saddle.cls.value}, not a saddle")
    e = vector if vector is not None else branch_vector(saddle, which)
    dlt = delta if delta is not None else 1e-6
    y0 = (saddle.y[0] + dlt * e[0], saddle.y[1] + dlt * e[1])
    direction = Direction.FORWARD if which.startswith("unstable") else Direction.BACKWARD
    tg = [p for p in targets if p.distance(saddle) > 10.0 * controls.basin_radius]
    return integrate(family, x, y0, direction, controls, section, tg, t_end=t_end, dense=dense)


def _crossing(traj: Trajectory, section: Section, what: str) -> float:
    if traj.termination is not Termination.SECTION_HIT:
        cause = traj.termination.value + (f":{traj.target}" if traj.target else "")
        raise NoCrossing(f"{what} did not reach the section ({cause})", cause)
    c = section.coordinate(traj.crossing)
    if abs(c) > section.half_width:
        raise NoCrossing(f"{what} crossed the section line outside the half-width", "outside")
    return c


@dataclass
class BranchCrossings:
    """Section crossings of both unstable branches of s_i and both stable branches of s_j."""

    x: tuple[float, float]
    pair: tuple[str, str]
    section: Section
    distance: float
    h: dict[str, float | NoCrossing]
    k: dict[str, float | NoCrossing]
    vectors: dict[str, tuple[float, float]]

    def sample(self, sep: tuple[str, str]) -> SplittingSample:
        h = self.h[sep[0]]
        k = self.k[sep[1]]
        if isinstance(h, NoCrossing):
            raise h
        if isinstance(k, NoCrossing):
            raise k
        return SplittingSample(self.x, self.pair, h, k, h - k, sep, self.distance)

    def psi(self, sep: tuple[str, str]) -> float | None:
        h = self.h[sep[0]]
        k = self.k[sep[1]]
        if isinstance(h, NoCrossing) or isinstance(k, NoCrossing):
            return None
        return h - k


def _oriented(vec: tuple[float, float], ref: tuple[float, float]) -> tuple[float, float]:
    return vec if vec[0] * ref[0] + vec[1] * ref[1] >= 0.0 else (-vec[0], -vec[1])


def branch_crossings(family: GeneratingFamily, x: Sequence[float], si: CriticalPoint, sj: CriticalPoint,
                     controls: FlowControls = DEFAULT_CONTROLS, targets: Sequence[CriticalPoint] = (),
                     orient: dict[str, tuple[float, float]] | None = None,
                     seps: Sequence[str] = ("+", "-"), delta: float | None = None,
                     seps_s: Sequence[str] | None = None) -> BranchCrossings:
    """Shoot the selected branches once and record their crossings of the auto section.

    The ``+`` unstable branch of s_i is the one whose eigenvector points toward
    s_j and the ``+`` stable branch of s_j points toward s_i, unless ``orient``
    supplies reference vectors to continue the choice along a parameter path.
    """
    for p in (si, sj):
        if p.cls is not PointClass.SADDLE:
            raise NotASaddle(f"point {p.label} at {p.y} is {p.cls.value}, not a saddle")
    sec = Section.auto(si, sj)
    d = 2.0 * sec.half_width
    dlt = delta if delta is not None else seed_offset(d)
    n = sec.normal
    if orient is None:
        eu = _oriented(si.unstable_vector, n)
        es = _oriented(sj.stable_vector, (-n[0], -n[1]))
    else:
        eu = _oriented(si.unstable_vector, orient["u"])
        es = _oriented(sj.stable_vector, orient["s"])
    h: dict[str, float | NoCrossing] = {}
    k: dict[str, float | NoCrossing] = {}
    for sgn in seps:
        s = 1.0 if sgn == "+" else -1.0
        tr = saddle_manifold(family, x, si, "unstable+", controls, dlt, sec, targets, vector=(s * eu[0], s * eu[1]))
        try:
            h[sgn] = _crossing(tr, sec, f"W^u({si.label}){sgn}")
        except NoCrossing as exc:
            h[sgn] = exc
    for sgn in (seps if seps_s is None else seps_s):
        s = 1.0 if sgn == "+" else -1.0
        tr = saddle_manifold(family, x, sj, "stable+", controls, dlt, sec, targets, vector=(s * es[0], s * es[1]))
        try:
            k[sgn] = _crossing(tr, sec, f"W^s({sj.label}){sgn}")
        except NoCrossing as exc:
            k[sgn] = exc
    return BranchCrossings(_xy(x), (si.label, sj.label), sec, d, h, k, {"u": eu, "s": es})


def _pick(points: Sequence[CriticalPoint], label: str) -> CriticalPoint:
    for p in points:
        if p.label == label:
            return p
    raise MissingSaddle(f"no critical point labelled {label}")


def pair_labels(pair: Sequence) -> tuple[str, str]:
    out = []
    for v in pair:
        if isinstance(v, (int,)) or (isinstance(v, str) and v.isdigit()):
            out.append(f"s{int(v)}")
        else:
            out.append(str(v))
    return out[0], out[1]


def splitting(family: GeneratingFamily, x: ParameterPoint | Sequence[float], pair: Sequence,
              sep: tuple[str, str] = ("+", "+"), controls: FlowControls = DEFAULT_CONTROLS,
              points: Sequence[CriticalPoint] | None = None, window: Sequence[float] = DEFAULT_WINDOW,
              delta: float | None = None) -> SplittingSample:
    """Splitting value psi = h - k for the ordered saddle pair at ``x``."""
    xt = _xy(x)
    pts = list(points) if points is not None else label_at(family, xt, window)
    li, lj = pair_labels(pair)
    si = _pick(pts, li)
    sj = _pick(pts, lj)
    for p in (si, sj):
        if p.cls is not PointClass.SADDLE:
            raise MissingSaddle(f"{p.label} is {p.cls.value} at x={xt}, not a saddle")
    bc = branch_crossings(family, xt, si, sj, controls, pts, seps=(sep[0],), seps_s=(sep[1],), delta=delta)
    return bc.sample(sep)


@dataclass(frozen=True)
class Edge:
    kind: str               # "node_to_saddle" or "saddle_to_saddle"
    source: str
    target: str
    sep: tuple[str, str] | None = None
    psi: float | None = None
    branch: str | None = None   # stable branch of the target saddle, node-to-saddle edges only

    @property
    def pair_id(self) -> str:
        """Separatrix pair id: ``+-`` style for connections, the stable branch name otherwise."""
        if self.sep is not None:
            return f"{self.source}:unstable{self.sep[0]}|{self.target}:stable{self.sep[1]}"
        return f"{self.target}:{self.branch}"


@dataclass
class PhasePortraitGraph:
    x: tuple[float, float]
    nodes: list[CriticalPoint]
    edges: list[Edge]
    separatrices: dict[str, Trajectory] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "x": list(self.x),
            "nodes": [
                {
                    "label": p.label,
                    "class": p.cls.value,
                    "y": list(p.y),
                    "eigenvalues": list(p.eigenvalues),
                    "eigenvectors": [list(v) for v in p.eigenvectors],
                }
                for p in self.nodes
            ],
            "edges": [
                {
                    "kind": e.kind,
                    "source": e.source,
                    "target": e.target,
                    "sep_u": e.sep[0] if e.sep else None,
                    "sep_s": e.sep[1] if e.sep else None,
                    "pair_id": e.pair_id,
                    "psi": e.psi,
                }
                for e in self.edges
            ],
            "metadata": self.metadata,
        }


def connection_graph(family: GeneratingFamily, x: ParameterPoint | Sequence[float],
                     controls: FlowControls = DEFAULT_CONTROLS, window: Sequence[float] = DEFAULT_WINDOW,
                     keep_curves: bool = False, curve_time: float = 20.0) -> PhasePortraitGraph:
    """Critical points plus node-to-saddle and saddle-to-saddle gradient lines at ``x``."""
    xt = _xy(x)
    pts = label_at(family, xt, window)
    saddles = [p for p in pts if p.cls is PointClass.SADDLE]
    nodes = [p for p in pts if p.cls is PointClass.UNSTABLE_NODE]
    edges: list[Edge] = []
    curves: dict[str, Trajectory] = {}
    diag = window_diagonal(window)
    for s in saddles:
        dlt = seed_offset(min([p.distance(s) for p in pts if p is not s] or [diag]))
        for which in ("stable+", "stable-"):
            tr = saddle_manifold(family, xt, s, which, controls, dlt, targets=pts)
            if tr.termination is Termination.CONVERGED and any(nd.label == tr.target for nd in nodes):
                edges.append(Edge("node_to_saddle", tr.target, s.label, branch=which))
        if keep_curves:
            for which in BRANCHES:
                tr = saddle_manifold(family, xt, s, which, controls, dlt, targets=pts, t_end=curve_time)
                curves[f"{s.label}:{which}"] = tr
    for si in saddles:
        for sj in saddles:
            if si is sj:
                continue
            bc = branch_crossings(family, xt, si, sj, controls, pts)
            for sep in SEP_COMBOS:
                v = bc.psi(sep)
                if v is not None and abs(v) < 1e-6 * bc.distance:
                    edges.append(Edge("saddle_to_saddle", si.label, sj.label, sep, v))
    edges.sort(key=lambda e: (e.kind, e.source, e.target, e.sep or ("", ""), e.branch or ""))
    meta = {
        "family": family.name,
        "section_rule": "auto-midpoint: normal along s_i->s_j, half-width 0.5*distance",
        "connection_tol": "1e-6*distance",
    }
    return PhasePortraitGraph(xt, pts, edges, curves, meta)
