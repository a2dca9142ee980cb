"""Caustic tracing: the image of the Hessian-degeneracy curve under y -> grad f(y)."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .critical_points import (
    DEFAULT_WINDOW,
    PointClass,
    cusp_indicator,
    sym_eigen,
    find_critical_points,
    hess_det_gradient,
    label_at,
)
from .field_models import FamilyKind, GeneratingFamily


class EmptyCaustic(RuntimeError):
    pass


@dataclass
class CausticArc:
    arc_id: int
    points: np.ndarray          # (n, 2) parameter-space polyline
    preimage: np.ndarray        # (n, 2) phase-space points with det Hess = 0
    side: int | None = None     # i for side l_i


@dataclass
class Caustic:
    arcs: list[CausticArc]
    vertices: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))

    @property
    def sides(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {}
        for arc in self.arcs:
            if arc.side is not None:
                out.setdefault(arc.side, []).append(arc.arc_id)
        return dict(sorted(out.items()))

    def distance(self, x: Sequence[float]) -> float:
        return min(self.nearest_arc(x)[1], self.nearest_vertex(x)[1])

    def nearest_vertex(self, x: Sequence[float]) -> tuple[int | None, float]:
        if not len(self.vertices):
            return None, math.inf
        d = np.hypot(self.vertices[:, 0] - x[0], self.vertices[:, 1] - x[1])
        k = int(np.argmin(d))
        return k, float(d[k])

    def nearest_arc(self, x: Sequence[float]) -> tuple[int | None, float]:
        best, best_d = None, math.inf
        for arc in self.arcs:
            d = polyline_distance(arc.points, x)
            if d < best_d:
                best, best_d = arc.arc_id, d
        return best, best_d

    def side_distance(self, side: int, x: Sequence[float]) -> float:
        ds = [polyline_distance(a.points, x) for a in self.arcs if a.side == side]
        return min(ds) if ds else math.inf

    def nearest_feature(self, x: Sequence[float]) -> tuple[str, int | None, float]:
        """``("vertex", index, d)`` or ``("fold", side, d)`` for the closest caustic feature."""
        vi, vd = self.nearest_vertex(x)
        ai, ad = self.nearest_arc(x)
        if vi is not None and vd <= ad + 1e-12:
            return "vertex", vi, vd
        if ai is None:
            return "none", None, math.inf
        return "fold", self.arcs[ai].side, ad

    def to_dict(self) -> dict:
        return {
            "arcs": [
                {"arc_id": a.arc_id, "side": a.side, "points": a.points.tolist()} for a in self.arcs
            ],
            "vertices": self.vertices.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> Caustic:
        arcs = [
            CausticArc(int(a["arc_id"]), np.asarray(a["points"], dtype=float).reshape(-1, 2),
                       np.zeros((0, 2)), a.get("side"))
            for a in data.get("arcs", [])
        ]
        return cls(arcs, np.asarray(data.get("vertices", []), dtype=float).reshape(-1, 2))


def polyline_distance(poly: np.ndarray, x: Sequence[float]) -> float:
    p = np.asarray(poly, dtype=float)
    q = np.asarray(x, dtype=float)
    if len(p) == 1:
        return float(np.hypot(*(p[0] - q)))
    a = p[:-1]
    d = p[1:] - a
    L = np.einsum("ij,ij->i", d, d)
    t = np.where(L > 0, np.einsum("ij,ij->i", q - a, d) / np.where(L > 0, L, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    proj = a + d * t[:, None]
    return float(np.min(np.hypot(proj[:, 0] - q[0], proj[:, 1] - q[1])))


def _correct(family: GeneratingFamily, y: np.ndarray, iters: int = 30) -> np.ndarray | None:
    """Newton along grad D onto the curve D = det Hess = 0."""
    y = y.copy()
    for _ in range(iters):
        D = float(family.hess_det(y[0], y[1]))
        g = np.array(hess_det_gradient(family, y[0], y[1]))
        gg = float(g @ g)
        if gg == 0.0:
            return None
        dy = -D * g / gg
        y = y + dy
        if float(np.hypot(*dy)) < 1e-14 * max(1.0, float(np.hypot(*y))):
            return y
    return y if abs(float(family.hess_det(y[0], y[1]))) < 1e-10 else None


def arc_points_at(family: GeneratingFamily, arc: CausticArc, coord: int, value: float) -> list[np.ndarray]:
    """Points of ``arc`` with ``x[coord] == value``, solved on the degeneracy curve between samples."""
    if len(arc.preimage) != len(arc.points):
        raise ValueError("arc carries no phase-space preimage; trace it instead of loading it")
    from scipy.optimize import brentq

    def image(a, b, s):
        y = _correct(family, a + s * (b - a))
        if y is None:
            raise ValueError("corrector failed between caustic samples")
        g = family.gradient(y[0], y[1])
        return np.array([float(g[0]), float(g[1])])

    out = []
    d = arc.points[:, coord] - value
    for i in np.flatnonzero(d[:-1] * d[1:] <= 0.0):
        a, b = arc.preimage[i], arc.preimage[i + 1]
        if d[i] == 0.0:
            out.append(arc.points[i].copy())
            continue
        if d[i + 1] == 0.0:
            continue
        s = brentq(lambda s: image(a, b, s)[coord] - value, 0.0, 1.0, xtol=1e-15, rtol=1e-15)
        out.append(image(a, b, s))
    return out


def _inside(y, window) -> bool:
    return window[0] <= y[0] <= window[1] and window[2] <= y[1] <= window[3]


def _march(family, y0, direction, window, step, max_pts) -> tuple[list[np.ndarray], bool]:
    pts = [y0]
    y = y0
    prev_t = None
    for _ in range(max_pts):
        g = np.array(hess_det_gradient(family, y[0], y[1]))
        t = np.array([-g[1], g[0]]) / math.hypot(*g)
        if prev_t is None:
            t = t * direction
        elif float(t @ prev_t) < 0.0:
            t = -t
        h = step
        for _ in range(12):
            yn = _correct(family, y + h * t)
            if yn is not None and float(np.hypot(*(yn - y))) < 2.0 * h:
                break
            h *= 0.5
        else:
            return pts, False
        if not _inside(yn, window):
            return pts, False
        if len(pts) > 5 and float(np.hypot(*(yn - y0))) < 0.75 * step:
            pts.append(y0)
            return pts, True
        pts.append(yn)
        prev_t = t
        y = yn
    return pts, False


def _degenerate_curves(family: GeneratingFamily, window, step, grid: int = 81, max_pts: int = 20000):
    g1 = np.linspace(window[0], window[1], grid)
    g2 = np.linspace(window[2], window[3], grid)
    Y1, Y2 = np.meshgrid(g1, g2, indexing="ij")
    D = family.hess_det(Y1, Y2) + 0.0 * Y1
    seeds = []
    for axis in (0, 1):
        a = D[:-1, :] if axis == 0 else D[:, :-1]
        b = D[1:, :] if axis == 0 else D[:, 1:]
        idx = np.argwhere((a > 0.0) != (b > 0.0))
        for i, j in idx:
            p = np.array([Y1[i, j], Y2[i, j]])
            q = np.array([Y1[i + 1, j], Y2[i + 1, j]]) if axis == 0 else np.array([Y1[i, j + 1], Y2[i, j + 1]])
            seeds.append(0.5 * (p + q))
    curves: list[tuple[np.ndarray, bool]] = []
    for s in seeds:
        y0 = _correct(family, s)
        if y0 is None or not _inside(y0, window):
            continue
        if any(polyline_distance(c, y0) < 2.0 * step for c, _ in curves):
            continue
        fwd, closed = _march(family, y0, 1.0, window, step, max_pts)
        if closed:
            curves.append((np.array(fwd), True))
            continue
        bwd, _ = _march(family, y0, -1.0, window, step, max_pts)
        curves.append((np.array(bwd[::-1] + fwd[1:]), False))
    return curves


def _kernel(family: GeneratingFamily, y) -> np.ndarray:
    h11, h12, h22 = (float(v) for v in family.hessian(y[0], y[1]))
    lam, vecs = sym_eigen(h11, h12, h22)
    return np.array(vecs[0] if abs(lam[0]) <= abs(lam[1]) else vecs[1])


def _oriented_indicator(family: GeneratingFamily, pre: np.ndarray) -> np.ndarray:
    """Cusp indicator with the kernel vector oriented continuously along the curve."""
    out = np.empty(len(pre))
    prev = None
    for i, p in enumerate(pre):
        k = _kernel(family, p)
        if prev is not None and float(k @ prev) < 0.0:
            k = -k
        prev = k
        out[i] = float(k @ np.array(hess_det_gradient(family, p[0], p[1])))
    return out


def _oriented_kernel_at(family, pre, k) -> np.ndarray:
    prev = None
    for p in pre[: k + 1]:
        v = _kernel(family, p)
        if prev is not None and float(v @ prev) < 0.0:
            v = -v
        prev = v
    return prev


def _split_at_vertices(family, pre: np.ndarray, closed: bool):
    """Locate sign changes of the cusp indicator and refine them on the curve."""
    kappa = _oriented_indicator(family, pre)
    cuts = []
    for k in range(len(pre) - 1):
        if kappa[k] == 0.0:
            cuts.append((k, pre[k]))
        elif kappa[k] * kappa[k + 1] < 0.0:
            a, b = pre[k], pre[k + 1]
            ka, kb = kappa[k], kappa[k + 1]
            ref = _oriented_kernel_at(family, pre, k)
            for _ in range(60):
                m = _correct(family, 0.5 * (a + b))
                if m is None:
                    break
                km_k = _kernel(family, m)
                if float(km_k @ ref) < 0.0:
                    km_k = -km_k
                km = float(km_k @ np.array(hess_det_gradient(family, m[0], m[1])))
                if km == 0.0:
                    a = b = m
                    break
                if km * ka < 0.0:
                    b, kb = m, km
                else:
                    a, ka = m, km
                if float(np.hypot(*(b - a))) < 1e-14:
                    break
            cuts.append((k, 0.5 * (a + b)))
    return cuts


def trace_caustic(family: GeneratingFamily, phase_window: Sequence[float] = DEFAULT_WINDOW,
                  step: float = 0.01, label_sides: bool = True,
                  label_window: Sequence[float] | None = None) -> Caustic:
    """Trace the caustic and label fold sides by the saddle that merges with the node there."""
    window = tuple(float(v) for v in phase_window)
    curves = _degenerate_curves(family, window, step)
    arcs: list[CausticArc] = []
    vertices: list[np.ndarray] = []
    for pre, closed in curves:
        cuts = _split_at_vertices(family, pre, closed)
        pieces = []
        if not cuts:
            pieces.append(pre)
        else:
            bounds = [c[0] for c in cuts]
            vpts = [c[1] for c in cuts]
            vertices.extend(vpts)
            if closed:
                body = pre[:-1]
                n = len(body)
                for i, (k, v) in enumerate(cuts):
                    k2, v2 = cuts[(i + 1) % len(cuts)]
                    if i + 1 < len(cuts):
                        seg = body[k + 1:k2 + 1]
                    else:
                        seg = np.vstack([body[k + 1:], body[:k2 + 1]]) if k2 < n else body[k + 1:]
                    pieces.append(np.vstack([v, seg, v2]))
            else:
                edges = [-1] + bounds + [len(pre) - 1]
                vp = [None] + vpts + [None]
                for i in range(len(edges) - 1):
                    seg = pre[edges[i] + 1:edges[i + 1] + 1]
                    parts = ([vp[i]] if vp[i] is not None else []) + list(seg) + ([vp[i + 1]] if vp[i + 1] is not None else [])
                    pieces.append(np.array(parts))
        for piece in pieces:
            if len(piece) < 2:
                continue
            g1, g2 = family.gradient(piece[:, 0], piece[:, 1])
            img = np.column_stack([np.broadcast_to(g1, piece[:, 0].shape), np.broadcast_to(g2, piece[:, 0].shape)])
            arcs.append(CausticArc(len(arcs), img, piece))
    vimg = []
    for v in vertices:
        g = family.gradient(v[0], v[1])
        vimg.append([float(g[0]), float(g[1])])
    if not arcs:
        iso = _isolated_degenerate_point(family, window)
        if iso is None:
            raise EmptyCaustic("no Hessian degeneracy inside the phase window; enlarge the window")
        g = family.gradient(iso[0], iso[1])
        vimg.append([float(g[0]), float(g[1])])
    caustic = Caustic(arcs, _dedupe_vertices(np.array(vimg, dtype=float).reshape(-1, 2)))
    if label_sides:
        _label_sides(family, caustic, label_window or _hull(window, DEFAULT_WINDOW))
    return caustic


def _hull(a: Sequence[float], b: Sequence[float]) -> tuple[float, float, float, float]:
    return (min(a[0], b[0]), max(a[1], b[1]), min(a[2], b[2]), max(a[3], b[3]))


def _dedupe_vertices(v: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    out: list[np.ndarray] = []
    for p in v:
        if all(float(np.hypot(*(p - q))) > tol for q in out):
            out.append(p)
    out.sort(key=lambda p: (round(float(p[0]), 9), round(float(p[1]), 9)))
    return np.array(out).reshape(-1, 2)


def _isolated_degenerate_point(family: GeneratingFamily, window, grid: int = 81):
    """Point where the whole Hessian vanishes (the umbilic point), if any."""
    g1 = np.linspace(window[0], window[1], grid)
    g2 = np.linspace(window[2], window[3], grid)
    Y1, Y2 = np.meshgrid(g1, g2, indexing="ij")
    h11, h12, h22 = family.hessian(Y1, Y2)
    s = (h11 * h11 + 2 * h12 * h12 + h22 * h22) + 0.0 * Y1
    i, j = np.unravel_index(int(np.argmin(s)), s.shape)
    from scipy.optimize import least_squares

    def res(y):
        a, b, c = family.hessian(y[0], y[1])
        return [float(a), float(b), float(c)]

    sol = least_squares(res, [Y1[i, j], Y2[i, j]], xtol=1e-15, ftol=1e-15, gtol=1e-15)
    if sol.cost < 1e-20:
        return sol.x
    return None


def _label_sides(family: GeneratingFamily, caustic: Caustic, window) -> None:
    if family.core is FamilyKind.ELLIPTIC and family.kind is FamilyKind.ELLIPTIC:
        return
    for arc in caustic.arcs:
        pts = arc.points
        if len(pts) < 3:
            continue
        k = len(pts) // 2
        t = pts[min(k + 1, len(pts) - 1)] - pts[max(k - 1, 0)]
        nrm = np.array([-t[1], t[0]])
        if float(np.hypot(*nrm)) == 0.0:
            continue
        nrm = nrm / float(np.hypot(*nrm))
        span = float(np.hypot(*(pts[-1] - pts[0]))) + float(np.hypot(*t))
        eta = max(1e-4, 2e-3 * span)
        best = None
        for sgn in (1.0, -1.0):
            xp = pts[k] + sgn * eta * nrm
            try:
                pts_here = label_at(family, xp, window)
            except Exception:
                continue
            if best is None or len(pts_here) > len(best):
                best = pts_here
        if not best:
            continue
        nodes = [p for p in best if p.cls in (PointClass.UNSTABLE_NODE, PointClass.STABLE_NODE)]
        sads = [p for p in best if p.cls is PointClass.SADDLE and p.label.startswith("s")]
        if not nodes or not sads:
            continue
        nd = nodes[0]
        s = min(sads, key=lambda p: p.distance(nd))
        try:
            arc.side = int(s.label[1:])
        except ValueError:
            arc.side = None


def region_of(family: GeneratingFamily, caustic: Caustic, x: Sequence[float], buffer: float = 1e-9,
              window: Sequence[float] = DEFAULT_WINDOW) -> str:
    """``"on"`` within ``buffer`` of the caustic, else ``"inside"``/``"outside"`` by root count."""
    if caustic.distance(x) <= buffer:
        return "on"
    pts = find_critical_points(family, x, window)
    n = sum(1 for p in pts if not p.cls.degenerate)
    return "inside" if n > _outside_count(family) else "outside"


def _outside_count(family: GeneratingFamily) -> int:
    return {FamilyKind.FOLD: 0, FamilyKind.CUSP: 1, FamilyKind.ELLIPTIC: 2, FamilyKind.PERTURBED: 2}[family.core]
