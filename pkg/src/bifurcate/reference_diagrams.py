"""Hand-encoded reference diagrams: the fourteen lettered configurations and the crossing cases.

The tricuspoid is drawn with three quadratic Bezier sides meeting at (5,2), (1,4) and (1,0).
Side l1 is the left side, l2 the upper side and l3 the lower side. A branch that
enters through l_i and ends on l_j carries the label (s_j, s_k) with k the remaining index.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .bifurcation_tracer import BifurcationBranch, BifurcationDiagram, Endpoint, EndpointKind, segment_crossings
from .caustic import Caustic, CausticArc, polyline_distance

Bezier = tuple[tuple[float, float], tuple[float, float], tuple[float, float]]

SIDE_L: Bezier = ((1.0, 4.0), (2.0, 2.0), (1.0, 0.0))
SIDE_U: Bezier = ((5.0, 2.0), (2.0, 2.0), (1.0, 4.0))
SIDE_D: Bezier = ((5.0, 2.0), (2.0, 2.0), (1.0, 0.0))
SIDES = {1: SIDE_L, 2: SIDE_U, 3: SIDE_D}
VERTICES = ((5.0, 2.0), (1.0, 4.0), (1.0, 0.0))
FIXTURE_STEP = 0.05
SAMPLES = 65

_R: Bezier = ((4.5, 1.0), (3.5, 1.0), (3.5, 2.15))
_LOWER_UP: Bezier = ((2.0, 0.5), (2.5, 2.0), (2.5, 2.5))
_LOWER_UP_RIGHT: Bezier = ((3.0, 0.5), (2.5, 2.0), (2.5, 2.5))
_LOWER_LEFT: Bezier = ((3.0, 0.2), (3.0, 0.7), (1.3, 0.7))
_LOWER_LEFT_SHORT: Bezier = ((2.0, 0.2), (2.0, 0.7), (1.3, 0.7))
_LOWER_TOP: Bezier = ((2.0, 0.2), (2.0, 0.7), (1.7, 3.0))
_LEFT_TOP: Bezier = ((0.0, 3.5), (0.3, 3.0), (1.7, 3.0))
_LEFT_BOTTOM: Bezier = ((0.0, 1.5), (1.5, 1.5), (1.7, 1.0))
_LEFT_DOWN: Bezier = ((0.0, 3.5), (1.5, 3.5), (1.7, 1.0))
_TOP_LEFT: Bezier = ((2.0, 5.0), (2.0, 3.5), (1.45, 2.8))
_TOP_WIDE: Bezier = ((2.0, 5.0), (4.0, 5.0), (4.0, 1.95))
_TOP_MID: Bezier = ((2.0, 5.0), (3.0, 5.0), (3.0, 1.7))
_TOP_DOWN: Bezier = ((2.0, 5.0), (2.0, 3.0), (1.7, 1.0))

LETTER_FIXTURES: dict[str, tuple[Bezier, ...]] = {
    "A": (_R, _LOWER_UP, _LEFT_DOWN),
    "B": (_R, _LOWER_UP, _LEFT_TOP),
    "C": (_R, _LOWER_UP, _TOP_LEFT),
    "D": (_R, _LOWER_UP, _TOP_WIDE),
    "E": (_R, _LOWER_UP, _TOP_DOWN),
    "F": (_R, _LOWER_UP, _TOP_MID),
    "G": (_R, _LOWER_LEFT, _TOP_LEFT),
    "H": (_R, _LOWER_LEFT, _TOP_MID),
    "I": (_R, _LOWER_LEFT, _TOP_WIDE),
    "J": (_R, _LEFT_TOP, _TOP_MID),
    "K": (_R, _LEFT_TOP, _TOP_WIDE),
    "L": (_R, _LEFT_BOTTOM, _TOP_LEFT),
    "M": (_R, _LOWER_UP_RIGHT, _LOWER_LEFT_SHORT),
    "N": (_R, _LOWER_UP_RIGHT, _LOWER_TOP),
}


# crossing cases; every pair below crosses exactly once inside the caustic
CASE_FIXTURES: dict[str, tuple[Bezier, ...]] = {
    "a": (((4.5, 1.0), (3.5, 1.0), (2.5, 2.5)), ((2.0, 0.5), (2.5, 2.0), (3.0, 2.25))),
    "b": (((2.0, 0.5), (1.7, 2.0), (1.7, 3.0)), ((0.0, 3.5), (0.3, 3.0), (2.5, 2.5))),
    "c": (((2.0, 0.5), (2.5, 2.0), (2.25, 2.6)), ((4.0, 5.0), (4.0, 2.0), (1.5, 2.0))),
    "d": (_LOWER_UP, ((2.0, 4.5), (2.2, 2.2), (3.009, 1.711))),
    "e": (_LOWER_UP, ((3.2, 0.8), (2.6, 1.9), (1.5, 1.9))),
}
# the extra segment of case (c) runs from the crossing to a point of l2
CASE_C_EXTRA_END: tuple[tuple[float, float], tuple[float, float]] = ((2.8, 2.0), (3.5, 2.15))


def bezier(ctrl: Bezier, n: int = SAMPLES) -> np.ndarray:
    t = np.linspace(0.0, 1.0, n)[:, None]
    p0, p1, p2 = (np.asarray(c, dtype=float) for c in ctrl)
    return (1 - t) ** 2 * p0 + 2 * t * (1 - t) * p1 + t ** 2 * p2


def fixture_caustic() -> Caustic:
    arcs = [CausticArc(k, bezier(SIDES[side]), np.zeros((0, 2)), side) for k, side in enumerate((2, 1, 3))]
    return Caustic(arcs, np.asarray(VERTICES, dtype=float))


def _nearest_side(caustic: Caustic, x) -> tuple[int, float]:
    best, best_d = 0, float("inf")
    for arc in caustic.arcs:
        d = polyline_distance(arc.points, x)
        if d < best_d:
            best, best_d = arc.side, d
    return best, best_d


def _entry_side(caustic: Caustic, pts: np.ndarray, tol: float) -> int | None:
    for arc in caustic.arcs:
        for p, _, _ in segment_crossings(pts, arc.points):
            if min(np.hypot(*(p - pts[0])), np.hypot(*(p - pts[-1]))) > tol:
                return arc.side
    return None


def branch_from_geometry(pts: np.ndarray, caustic: Caustic, branch_id: int,
                         sep: tuple[str, str] = ("+", "+"), label: tuple[str, str] | None = None,
                         tol: float = 2 * FIXTURE_STEP) -> BifurcationBranch:
    """A branch whose label follows the entry/extreme rule unless given explicitly."""
    end_side, _ = _nearest_side(caustic, pts[-1])
    if label is None:
        entry = _entry_side(caustic, pts, tol)
        if entry is None or entry == end_side:
            raise ValueError(f"branch {branch_id} does not enter through a side other than its end side")
        k = ({1, 2, 3} - {entry, end_side}).pop()
        label = (f"s{end_side}", f"s{k}")
    start_side, start_d = _nearest_side(caustic, pts[0])
    first = (Endpoint(EndpointKind.CAUSTIC_FOLD, start_side, tuple(pts[0])) if start_d <= tol
             else Endpoint(EndpointKind.REGION_EXIT, None, tuple(pts[0])))
    last = Endpoint(EndpointKind.CAUSTIC_FOLD, end_side, tuple(pts[-1]))
    return BifurcationBranch(branch_id, label, sep, pts, np.zeros(len(pts)), [sep] * len(pts), (first, last))


def _diagram(branches: Sequence[BifurcationBranch], caustic: Caustic, name: str) -> BifurcationDiagram:
    return BifurcationDiagram(name, (0.0, 5.5, 0.0, 5.0), list(branches), [], caustic, FIXTURE_STEP)


def letter_fixture(letter: str) -> BifurcationDiagram:
    cau = fixture_caustic()
    branches = [branch_from_geometry(bezier(c), cau, k) for k, c in enumerate(LETTER_FIXTURES[letter])]
    return _diagram(branches, cau, f"fixture[{letter}]")


def case_fixture(case: str, seps: Sequence[tuple[str, str]] | None = None,
                 extra: bool = True) -> BifurcationDiagram:
    """Two crossing branches of the given case; for (c) the extra segment is added when ``extra``."""
    cau = fixture_caustic()
    curves = CASE_FIXTURES[case]
    seps = seps or [("+", "+")] * len(curves)
    branches = [branch_from_geometry(bezier(c), cau, k, sep=s) for k, (c, s) in enumerate(zip(curves, seps))]
    if case == "c" and extra:
        hits = segment_crossings(branches[0].points, branches[1].points)
        start = tuple(float(v) for v in hits[0][0])
        first, last = branches[0].label[0], branches[1].label[1]
        pts = bezier((start, *CASE_C_EXTRA_END))
        b = branch_from_geometry(pts, cau, len(branches), label=(first, last))
        b.endpoints = (Endpoint(EndpointKind.LOST_ZERO, None, start), b.endpoints[1])
        branches.append(b)
    return _diagram(branches, cau, f"fixture[case {case}]")


def rotate_fixture(diagram: BifurcationDiagram, turns: int = 1) -> BifurcationDiagram:
    """Relabel sides and saddles by the cyclic symmetry 1 -> 2 -> 3 -> 1 of the tricuspoid."""
    def rot(i: int) -> int:
        return (i - 1 + turns) % 3 + 1

    def rot_label(s: str) -> str:
        return f"s{rot(int(s[1:]))}" if s.startswith("s") and s[1:].isdigit() else s

    arcs = [CausticArc(a.arc_id, a.points, a.preimage, rot(a.side) if a.side else a.side) for a in diagram.caustic.arcs]
    branches = []
    for b in diagram.branches:
        ends = tuple(Endpoint(e.kind, rot(e.side) if e.side else e.side, e.point) for e in b.endpoints)
        branches.append(BifurcationBranch(b.branch_id, (rot_label(b.label[0]), rot_label(b.label[1])), b.sep,
                                          b.points, b.residuals, b.seps, ends, list(b.flags)))
    return BifurcationDiagram(diagram.family, diagram.region, branches, list(diagram.intersections),
                              Caustic(arcs, diagram.caustic.vertices), diagram.step, dict(diagram.metadata))
