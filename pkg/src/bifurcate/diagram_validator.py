"""Combinatorial checks on bifurcation diagrams and classification into the lettered catalog."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bifurcation_tracer import BifurcationBranch, BifurcationDiagram, EndpointKind, segment_crossings
from .caustic import Caustic, polyline_distance


class UnlabeledDiagram(ValueError):
    pass


class NotUmbilic(ValueError):
    pass


RULES = {
    "R1": "B_ij and B_ji intersect",
    "R2": "closure of B_ij meets side l_j",
    "R3": "cusp-family branch ends at the cusp vertex",
    "R4": "components of B_ij cross with different separatrix pairs",
    "R5": "crossing of two branches with the same target saddle (case d)",
    "R6": "crossing of B_ij with B_ji (case e)",
    "R7": "chain crossing (case c) without the extra branch to the source side",
}

ALLOWED_LETTERS = frozenset("ABCDGLMN")

# canonical boundary signatures: V = vertex, e<k> = entry of branch k, x<k> = its extreme
SIGNATURES: dict[str, str] = {
    "V e0 V x0 e1 e2 V x2 x1": "A",
    "V e0 V e1 e2 V x2 x1 x0": "B",
    "V e0 e1 V x1 x0 e2 V x2": "C",
    "V V e0 e1 x2 V e2 x1 x0": "D",
    "V V x0 e1 e2 V x2 x1 e0": "E",
    "V V e0 x1 e2 V x2 e1 x0": "F",
    "V e0 e1 V x1 e2 V x2 x0": "G",
    "V e0 x1 e2 V x2 e1 V x0": "H",
    "V e0 e1 x2 V e2 x1 V x0": "I",
    "V e0 V x1 e2 V x2 e1 x0": "J",
    "V e0 V e1 x2 V e2 x1 x0": "K",
    "V x0 e1 V x1 e2 V x2 e0": "L",
    "V e0 e1 e2 V x2 x1 V x0": "M",
    "V V e0 e1 e2 V x2 x1 x0": "N",
}


@dataclass(frozen=True)
class RuleViolation:
    rule: str
    branches: tuple[int, ...]
    location: tuple[float, float] | None
    message: str

    def to_dict(self) -> dict:
        return {"rule": self.rule, "branches": list(self.branches),
                "location": list(self.location) if self.location is not None else None,
                "message": self.message}


@dataclass(frozen=True)
class Crossing:
    point: tuple[float, float]
    branches: tuple[int, int]
    case: str


@dataclass(frozen=True)
class TopologyClass:
    letter: str
    allowed: bool
    case: str | None = None
    signature: str | None = None

    def to_dict(self) -> dict:
        return {"letter": self.letter, "allowed": self.allowed, "case": self.case, "signature": self.signature}


def tolerance(diagram: BifurcationDiagram) -> float:
    step = diagram.step
    if not step > 0.0:
        r = diagram.region
        step = 0.01 * math.hypot(r[1] - r[0], r[3] - r[2])
    return 2.0 * step


def _side_index(label: str) -> int | None:
    return int(label[1:]) if label.startswith("s") and label[1:].isdigit() else None


def _check_labels(diagram: BifurcationDiagram) -> None:
    for b in diagram.branches:
        if len(b.label) != 2 or any(not lab or lab == "unlabeled" for lab in b.label):
            raise UnlabeledDiagram(f"branch {b.branch_id} has no saddle-pair label")
        if not b.sep or len(b.sep) != 2:
            raise UnlabeledDiagram(f"branch {b.branch_id} has no separatrix pair id")


def _near_caustic(caustic: Caustic, p, tol: float) -> bool:
    return caustic.distance(p) < tol


def crossing_case(a: tuple[str, str], b: tuple[str, str]) -> str:
    """Intersection case of two crossing branches from their ordered saddle pairs."""
    if a == b:
        return "a"
    if a[0] == b[1] and a[1] == b[0]:
        return "e"
    if a[0] == b[0]:
        return "b"
    if a[1] == b[0] or b[1] == a[0]:
        return "c"
    if a[1] == b[1]:
        return "d"
    return "other"


def find_crossings(diagram: BifurcationDiagram, tol: float | None = None) -> list[Crossing]:
    """Proper crossings between distinct branches away from the caustic."""
    tol = tolerance(diagram) if tol is None else tol
    out = []
    bs = diagram.branches
    for i in range(len(bs)):
        for j in range(i + 1, len(bs)):
            for p, _, _ in segment_crossings(bs[i].points, bs[j].points):
                if _near_caustic(diagram.caustic, p, tol):
                    continue
                if any(_at_endpoint(b, p, tol) for b in (bs[i], bs[j])):
                    continue
                out.append(Crossing((float(p[0]), float(p[1])), (bs[i].branch_id, bs[j].branch_id),
                                    crossing_case(bs[i].label, bs[j].label)))
    out.sort(key=lambda c: (c.branches, c.point))
    return out


def _at_endpoint(b: BifurcationBranch, p, tol: float) -> bool:
    return min(math.hypot(*(b.points[0] - p)), math.hypot(*(b.points[-1] - p))) < tol


def _sep_near(b: BifurcationBranch, p) -> tuple[str, str]:
    d = np.hypot(b.points[:, 0] - p[0], b.points[:, 1] - p[1])
    return tuple(b.seps[int(np.argmin(d))])


def _closure_points(b: BifurcationBranch) -> list[tuple[int | None, tuple[float, float], EndpointKind]]:
    out = []
    for e, p in zip(b.endpoints, (b.points[0], b.points[-1])):
        out.append((e.side, (float(p[0]), float(p[1])), e.kind))
    return out


def _has_extra_branch(diagram: BifurcationDiagram, c: Crossing, tol: float) -> bool:
    by_id = {b.branch_id: b for b in diagram.branches}
    a, b = by_id[c.branches[0]], by_id[c.branches[1]]
    first, second = (a, b) if a.label[1] == b.label[0] else (b, a)
    want = (first.label[0], second.label[1])
    side = _side_index(want[0])
    for e in diagram.branches:
        if e.branch_id in c.branches or tuple(e.label) != want:
            continue
        ends = (e.points[0], e.points[-1])
        for k in (0, 1):
            near = math.hypot(ends[k][0] - c.point[0], ends[k][1] - c.point[1]) < tol
            other = ends[1 - k]
            on_side = side is not None and diagram.caustic.side_distance(side, other) < tol
            if near and on_side:
                return True
    return False


def validate(diagram: BifurcationDiagram) -> list[RuleViolation]:
    """All rule violations of the diagram; empty when it is consistent."""
    _check_labels(diagram)
    tol = tolerance(diagram)
    cau = diagram.caustic
    out: list[RuleViolation] = []
    bs = diagram.branches
    # R1: B_ij and B_ji share points away from the caustic
    for i in range(len(bs)):
        for j in range(i + 1, len(bs)):
            a, b = bs[i], bs[j]
            if (a.label[0], a.label[1]) != (b.label[1], b.label[0]):
                continue
            hit = _first_close_point(a.points, b.points, tol, cau)
            if hit is not None:
                out.append(RuleViolation("R1", (a.branch_id, b.branch_id), hit,
                                         f"B_{a.label[0]}{a.label[1]} meets B_{b.label[0]}{b.label[1]}"))
    # R2 and R3: closure points
    cusp = diagram.family.split("[")[-1].rstrip("]") == "cusp"
    for b in bs:
        j = _side_index(b.label[1])
        for side, p, kind in _closure_points(b):
            if j is not None and j in cau.sides and cau.side_distance(j, p) < tol:
                out.append(RuleViolation("R2", (b.branch_id,), p,
                                         f"branch {b.label[0]}->{b.label[1]} has a closure point on l{j}"))
            if cusp and (kind is EndpointKind.CAUSTIC_CUSP_VERTEX or cau.nearest_vertex(p)[1] < tol):
                out.append(RuleViolation("R3", (b.branch_id,), p, "cusp-family branch ends at the vertex"))
    # R4-R7: crossings
    by_id = {b.branch_id: b for b in bs}
    for c in find_crossings(diagram, tol):
        a, b = by_id[c.branches[0]], by_id[c.branches[1]]
        if c.case == "a" and _sep_near(a, c.point) != _sep_near(b, c.point):
            out.append(RuleViolation("R4", c.branches, c.point,
                                     f"components of B_{a.label[0]}{a.label[1]} cross with different separatrices"))
        elif c.case == "d":
            out.append(RuleViolation("R5", c.branches, c.point, "two branches with the same target saddle cross"))
        elif c.case == "e":
            out.append(RuleViolation("R6", c.branches, c.point, "B_ij crosses B_ji"))
        elif c.case == "c" and not _has_extra_branch(diagram, c, tol):
            out.append(RuleViolation("R7", c.branches, c.point,
                                     "chain crossing without the extra branch to the source side"))
    out.sort(key=lambda v: (v.rule, v.branches, v.location or (0.0, 0.0)))
    return out


def _first_close_point(P: np.ndarray, Q: np.ndarray, tol: float, cau: Caustic) -> tuple[float, float] | None:
    for p, _, _ in segment_crossings(P, Q):
        if not _near_caustic(cau, p, tol):
            return float(p[0]), float(p[1])
    for p in P:
        if polyline_distance(Q, p) < tol and not _near_caustic(cau, p, tol):
            return float(p[0]), float(p[1])
    return None


# ------------------------------------------------------------------ topology

def _ring(caustic: Caustic, tol: float) -> np.ndarray:
    """Closed counterclockwise boundary polyline assembled from the side arcs."""
    arcs = [a.points for a in caustic.arcs]
    ring = [p for p in arcs[0]]
    rest = arcs[1:]
    while rest:
        end = ring[-1]
        for k, a in enumerate(rest):
            if math.hypot(*(a[0] - end)) < tol:
                ring.extend(a[1:])
                break
            if math.hypot(*(a[-1] - end)) < tol:
                ring.extend(a[::-1][1:])
                break
        else:
            raise NotUmbilic("caustic sides do not form a closed curve")
        rest.pop(k)
    r = np.asarray(ring)
    area = 0.5 * float(np.sum(r[:-1, 0] * r[1:, 1] - r[1:, 0] * r[:-1, 1]))
    return r if area > 0 else r[::-1]


def _ring_param(ring: np.ndarray, p) -> float:
    a = ring[:-1]
    d = ring[1:] - a
    L = np.einsum("ij,ij->i", d, d)
    t = np.clip(np.einsum("ij,ij->i", np.asarray(p) - a, d) / np.where(L > 0, L, 1.0), 0.0, 1.0)
    proj = a + d * t[:, None]
    k = int(np.argmin(np.hypot(proj[:, 0] - p[0], proj[:, 1] - p[1])))
    seg = np.sqrt(L)
    return float(np.sum(seg[:k]) + t[k] * seg[k])


def _principal(diagram: BifurcationDiagram, tol: float):
    """Branches entering through one side and ending on another, with their boundary points."""
    out = []
    for b in diagram.branches:
        entries = []
        for arc in diagram.caustic.arcs:
            for p, _, _ in segment_crossings(b.points, arc.points):
                if not _at_endpoint(b, p, tol):
                    entries.append(p)
        if len(entries) != 1:
            continue
        end_a = diagram.caustic.distance(b.points[0])
        end_b = diagram.caustic.distance(b.points[-1])
        extreme = b.points[-1] if end_b <= end_a else b.points[0]
        out.append((b, entries[0], extreme))
    return out


def boundary_signature(diagram: BifurcationDiagram, tol: float | None = None) -> str | None:
    """Canonical cyclic token string of vertices, entries and extremes; None without three principal branches."""
    tol = tolerance(diagram) if tol is None else tol
    ring = _ring(diagram.caustic, tol)
    prin = _principal(diagram, tol)
    if len(prin) != 3:
        return None
    tokens = [(_ring_param(ring, v), "V", -1) for v in diagram.caustic.vertices]
    for k, (_, entry, extreme) in enumerate(prin):
        tokens.append((_ring_param(ring, entry), "e", k))
        tokens.append((_ring_param(ring, extreme), "x", k))
    tokens.sort(key=lambda t: t[0])
    seq = [(kind, k) for _, kind, k in tokens]
    best = None
    for s in range(len(seq)):
        if seq[s][0] != "V":
            continue
        rot = seq[s:] + seq[:s]
        names: dict[int, int] = {}
        words = []
        for kind, k in rot:
            if kind == "V":
                words.append("V")
            else:
                names.setdefault(k, len(names))
                words.append(f"{kind}{names[k]}")
        text = " ".join(words)
        if best is None or text < best:
            best = text
    return best


def classify_topology(diagram: BifurcationDiagram) -> TopologyClass:
    """Letter of the non-crossing catalog, or the intersection case when branches cross."""
    if len(diagram.caustic.sides) != 3 or len(diagram.caustic.vertices) != 3:
        raise NotUmbilic("classification needs a three-sided caustic with three vertices")
    _check_labels(diagram)
    tol = tolerance(diagram)
    sig = boundary_signature(diagram, tol)
    letter = SIGNATURES.get(sig, "Other") if sig is not None else "Other"
    crossings = find_crossings(diagram, tol)
    if not crossings:
        return TopologyClass(letter, letter in ALLOWED_LETTERS, None, sig)
    violations = {v.rule for v in validate(diagram)}
    case = crossings[0].case
    allowed = not violations & {"R1", "R4", "R5", "R6", "R7"} and all(c.case in "abc" for c in crossings)
    return TopologyClass(letter, allowed, case, sig)


def summarize(violations: Sequence[RuleViolation]) -> dict[str, int]:
    out: dict[str, int] = {}
    for v in violations:
        out[v.rule] = out.get(v.rule, 0) + 1
    return dict(sorted(out.items()))
