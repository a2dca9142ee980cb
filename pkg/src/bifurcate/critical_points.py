"""Critical points of the gradient field: location, type and persistent labels."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .field_models import FamilyKind, GeneratingFamily, ParameterPoint, _xy

DEGENERACY_TOL = 1e-6
DEFAULT_WINDOW = (-4.0, 4.0, -4.0, 4.0)
MULTISTART_GRID = 21


class PointClass(str, Enum):
    SADDLE = "saddle"
    UNSTABLE_NODE = "unstable_node"
    STABLE_NODE = "stable_node"
    SADDLE_NODE = "saddle_node"
    TWO_FOLD_SADDLE = "two_fold_saddle"
    HIGHER_DEGENERATE = "higher_degenerate"

    @property
    def degenerate(self) -> bool:
        return self in (PointClass.SADDLE_NODE, PointClass.TWO_FOLD_SADDLE, PointClass.HIGHER_DEGENERATE)


class NonConvergence(RuntimeError):
    def __init__(self, message: str, starts: np.ndarray | None = None):
        super().__init__(message)
        self.starts = starts

    def __reduce__(self):
        return type(self), (str(self), self.starts)


class AmbiguousMatch(RuntimeError):
    pass


class DegenerateParameter(ValueError):
    pass


@dataclass(frozen=True)
class CriticalPoint:
    y: tuple[float, float]
    eigenvalues: tuple[float, float]
    eigenvectors: tuple[tuple[float, float], tuple[float, float]]
    cls: PointClass
    label: str = "unlabeled"

    @property
    def stable_vector(self) -> tuple[float, float]:
        return self.eigenvectors[0]

    @property
    def unstable_vector(self) -> tuple[float, float]:
        return self.eigenvectors[1]

    def distance(self, other: CriticalPoint | Sequence[float]) -> float:
        oy = other.y if isinstance(other, CriticalPoint) else other
        return math.hypot(self.y[0] - oy[0], self.y[1] - oy[1])


def sym_eigen(h11: float, h12: float, h22: float):
    """Ascending eigenpairs of a symmetric 2x2 matrix, unit eigenvectors."""
    mean = 0.5 * (h11 + h22)
    rad = math.hypot(0.5 * (h11 - h22), h12)
    lam = (mean - rad, mean + rad)
    vecs = []
    for lv in lam:
        a = (h12, lv - h11)
        b = (lv - h22, h12)
        v = a if a[0] * a[0] + a[1] * a[1] >= b[0] * b[0] + b[1] * b[1] else b
        n = math.hypot(v[0], v[1])
        if n == 0.0:
            v, n = ((1.0, 0.0), 1.0) if not vecs else ((-vecs[0][1], vecs[0][0]), 1.0)
        v = (v[0] / n, v[1] / n)
        # deterministic sign: first significant component positive
        if v[0] < -1e-14 or (abs(v[0]) <= 1e-14 and v[1] < 0.0):
            v = (-v[0], -v[1])
        vecs.append(v)
    return lam, (vecs[0], vecs[1])


def classify(eigenvalues: Sequence[float], degeneracy_tol: float = DEGENERACY_TOL) -> PointClass:
    l1, l2 = float(eigenvalues[0]), float(eigenvalues[1])
    z1 = abs(l1) < degeneracy_tol * max(1.0, abs(l2))
    z2 = abs(l2) < degeneracy_tol * max(1.0, abs(l1))
    if z1 and z2:
        return PointClass.TWO_FOLD_SADDLE
    if z1 or z2:
        return PointClass.SADDLE_NODE
    if l1 * l2 < 0.0:
        return PointClass.SADDLE
    return PointClass.UNSTABLE_NODE if l1 > 0.0 else PointClass.STABLE_NODE


def hess_det_gradient(family: GeneratingFamily, y1: float, y2: float, h: float = 1e-6) -> tuple[float, float]:
    d = family.hess_det
    return (
        (d(y1 + h, y2) - d(y1 - h, y2)) / (2 * h),
        (d(y1, y2 + h) - d(y1, y2 - h)) / (2 * h),
    )


def cusp_indicator(family: GeneratingFamily, y: Sequence[float]) -> float:
    """Derivative of det Hess along the Hessian kernel; zero at cusp vertices."""
    h11, h12, h22 = family.hessian(y[0], y[1])
    lam, vecs = sym_eigen(float(h11), float(h12), float(h22))
    k = vecs[0] if abs(lam[0]) <= abs(lam[1]) else vecs[1]
    g = hess_det_gradient(family, float(y[0]), float(y[1]))
    return k[0] * g[0] + k[1] * g[1]


def make_point(family: GeneratingFamily, y: Sequence[float], label: str = "unlabeled",
               degeneracy_tol: float = DEGENERACY_TOL) -> CriticalPoint:
    y1, y2 = float(y[0]), float(y[1])
    h11, h12, h22 = family.hessian(y1, y2)
    lam, vecs = sym_eigen(float(h11), float(h12), float(h22))
    cls = classify(lam, degeneracy_tol)
    if cls is PointClass.SADDLE_NODE and abs(cusp_indicator(family, (y1, y2))) < 1e-5:
        cls = PointClass.HIGHER_DEGENERATE
    return CriticalPoint((y1, y2), (lam[0], lam[1]), vecs, cls, label)


def window_diagonal(window: Sequence[float]) -> float:
    return math.hypot(window[1] - window[0], window[3] - window[2])


def _in_window(y, window, pad: float = 0.0) -> bool:
    return (window[0] - pad <= y[0] <= window[1] + pad) and (window[2] - pad <= y[1] <= window[3] + pad)


def _residual(family: GeneratingFamily, x, y) -> float:
    g1, g2 = family.gradient(y[0], y[1])
    return math.hypot(float(g1) - x[0], float(g2) - x[1])


def _newton_step(family: GeneratingFamily, y1: float, y2: float, f1: float, f2: float):
    h11, h12, h22 = family.hessian(y1, y2)
    det = float(h11) * float(h22) - float(h12) ** 2
    if det == 0.0 or not math.isfinite(det):
        return None
    return -(float(h22) * f1 - float(h12) * f2) / det, -(-float(h12) * f1 + float(h11) * f2) / det


def newton_polish(family: GeneratingFamily, x, y, tol: float, max_iter: int = 80):
    """Plain Newton on grad f(y) = x; returns the root or None.

    Once the residual is below ``tol``, damped steps continue while it keeps shrinking, so roots
    near degenerate points are not left at the loose end of the tolerance."""
    y1, y2 = float(y[0]), float(y[1])
    for _ in range(max_iter):
        res = _residual(family, x, (y1, y2))
        if res < tol:
            break
        g1, g2 = family.gradient(y1, y2)
        d = _newton_step(family, y1, y2, float(g1) - x[0], float(g2) - x[1])
        if d is None:
            return None
        y1, y2 = y1 + d[0], y2 + d[1]
        if not (math.isfinite(y1) and math.isfinite(y2)) or abs(y1) + abs(y2) > 1e8:
            return None
    else:
        res = _residual(family, x, (y1, y2))
        if res >= tol:
            return None
    for _ in range(40):
        if res == 0.0:
            break
        g1, g2 = family.gradient(y1, y2)
        d = _newton_step(family, y1, y2, float(g1) - x[0], float(g2) - x[1])
        if d is None:
            break
        lam = 1.0
        while lam > 1e-6:
            t1, t2 = y1 + lam * d[0], y2 + lam * d[1]
            r = _residual(family, x, (t1, t2))
            if r < res:
                break
            lam *= 0.5
        else:
            break
        y1, y2, res = t1, t2, r
    return y1, y2


def _merge(cands: list[tuple[float, float]], tol: float) -> list[tuple[float, float]]:
    """Cluster candidates closer than ``tol`` and average each cluster."""
    clusters: list[list[tuple[float, float]]] = []
    for c in cands:
        for cl in clusters:
            if any(math.hypot(c[0] - p[0], c[1] - p[1]) < tol for p in cl):
                cl.append(c)
                break
        else:
            clusters.append([c])
    return [(sum(p[0] for p in cl) / len(cl), sum(p[1] for p in cl) / len(cl)) for cl in clusters]


def _real_roots(coeffs: Sequence[float], imag_tol: float) -> list[float]:
    roots = np.roots(np.asarray(coeffs, dtype=float))
    scale = max(1.0, float(np.max(np.abs(roots)))) if roots.size else 1.0
    return sorted(float(r.real) for r in roots if abs(r.imag) <= imag_tol * scale)


def closed_form_umbilic_saddles(x: ParameterPoint | Sequence[float]) -> tuple[CriticalPoint, CriticalPoint]:
    """The two antipodal saddles of the elliptic family, s1 first."""
    x1, x2 = _xy(x)
    r = math.hypot(x1, x2)
    if r == 0.0:
        raise DegenerateParameter("x = (0,0) is the umbilic point: the saddles merge into a 2-fold saddle")
    a = math.sqrt(max(0.0, 0.5 * (r + x1)))
    b = math.sqrt(max(0.0, 0.5 * (r - x1)))
    sgn = -1.0 if x2 < 0.0 else 1.0
    y = (a, -sgn * b)
    fam = GeneratingFamily(FamilyKind.ELLIPTIC)
    return make_point(fam, y, "s1"), make_point(fam, (-y[0], -y[1]), "s2")


def _closed_candidates(family: GeneratingFamily, x: tuple[float, float]) -> list[tuple[float, float]] | None:
    """Exact or algebraic roots for the polynomial families; None for bump families."""
    x1, x2 = x
    kind = family.kind
    if kind is FamilyKind.FOLD:
        if x1 < 0.0:
            return []
        s = math.sqrt(x1)
        return [(s, x2), (-s, x2)]
    if kind is FamilyKind.ELLIPTIC:
        if x1 == 0.0 and x2 == 0.0:
            return [(0.0, 0.0)]
        s1, s2 = closed_form_umbilic_saddles(x)
        return [s1.y, s2.y]
    if kind is FamilyKind.CUSP:
        if x1 == 0.0:
            out = [(0.0, x2)]
            if x2 > 0.0:
                s = math.sqrt(2.0 * x2)
                out += [(s, -x2), (-s, -x2)]
            return out
        # y2 = x2 - y1^2 reduces the system to y1^3 - 2 x2 y1 + x1 = 0
        return [(t, x2 - t * t) for t in _real_roots([1.0, 0.0, -2.0 * x2, x1], 1e-6)]
    if kind is FamilyKind.PERTURBED:
        if x2 == 0.0:
            out = []
            if x1 <= 0.75:
                s = math.sqrt(0.75 - x1)
                out += [(0.5, s), (0.5, -s)]
            if x1 >= -0.25:
                s = math.sqrt(1.0 + 4.0 * x1)
                out += [(0.5 * (-1.0 - s), 0.0), (0.5 * (-1.0 + s), 0.0)]
            return out
        # y2 = x2/(1-2 y1) reduces the system to (y1^2+y1-x1)(1-2y1)^2 - x2^2 = 0
        quad = np.array([1.0, 1.0, -x1])
        lin2 = np.array([4.0, -4.0, 1.0])
        poly = np.polymul(quad, lin2)
        poly[-1] -= x2 * x2
        out = []
        for t in _real_roots(poly, 1e-6):
            if abs(1.0 - 2.0 * t) > 1e-3:
                out.append((t, x2 / (1.0 - 2.0 * t)))
            else:
                # near y1 = 1/2 the quotient is ill-conditioned; take y2 from the first equation
                q = t * t + t - x1
                if q < -1e-6:
                    continue    # numerically split double root of a complex pair
                s = math.sqrt(max(0.0, q))
                out += [(t, s), (t, -s)]
        return out
    return None


def newton_multistart(family: GeneratingFamily, x: tuple[float, float], window: Sequence[float],
                      grid: int = MULTISTART_GRID, extra_starts: Sequence[Sequence[float]] = (),
                      max_iter: int = 60, rounds: int = 3) -> list[tuple[float, float]]:
    """Vectorized Newton from a uniform grid of starts, with deflation of found roots."""
    g1 = np.linspace(window[0], window[1], grid)
    g2 = np.linspace(window[2], window[3], grid)
    Y1, Y2 = np.meshgrid(g1, g2, indexing="ij")
    starts = np.column_stack([Y1.ravel(), Y2.ravel()])
    if len(extra_starts):
        starts = np.vstack([np.asarray(extra_starts, dtype=float).reshape(-1, 2), starts])
    scale = max(1.0, math.hypot(*x))
    tol = 1e-10 * scale
    merge_tol = 1e-7 * window_diagonal(window)
    found: list[tuple[float, float]] = []
    for _ in range(rounds):
        roots = np.array(found).reshape(-1, 2)
        y = starts.copy()
        active = np.ones(len(y), dtype=bool)
        with np.errstate(all="ignore"):
            for _ in range(max_iter):
                a1, a2 = y[active, 0], y[active, 1]
                f1, f2 = family.gradient(a1, a2)
                f1 = f1 - x[0]
                f2 = f2 - x[1]
                h11, h12, h22 = family.hessian(a1, a2)
                h11 = np.broadcast_to(h11, a1.shape)
                h12 = np.broadcast_to(h12, a1.shape)
                h22 = np.broadcast_to(h22, a1.shape)
                det = h11 * h22 - h12 * h12
                d1 = -(h22 * f1 - h12 * f2) / det
                d2 = -(-h12 * f1 + h11 * f2) / det
                if len(roots):
                    # deflation m(y) = prod(1/|y-r|^2 + 1); step d/(1 - grad log m . d)
                    e1 = a1[:, None] - roots[None, :, 0]
                    e2 = a2[:, None] - roots[None, :, 1]
                    q = e1 * e1 + e2 * e2
                    w = -2.0 / (q * (1.0 + q))
                    gl1 = np.sum(w * e1, axis=1)
                    gl2 = np.sum(w * e2, axis=1)
                    denom = 1.0 - (gl1 * d1 + gl2 * d2)
                    d1 = d1 / denom
                    d2 = d2 / denom
                y[active, 0] = a1 + d1
                y[active, 1] = a2 + d2
                bad = ~np.isfinite(y).all(axis=1) | (np.abs(y).max(axis=1) > 1e6)
                step = np.hypot(d1, d2)
                done_local = np.zeros(len(a1), dtype=bool)
                done_local |= ~np.isfinite(step) | (step < 1e-13 * scale)
                idx = np.flatnonzero(active)
                active[idx[done_local]] = False
                active &= ~bad
                if not active.any():
                    break
        ok = np.isfinite(y).all(axis=1) & (np.abs(y).max(axis=1) < 1e6)
        new = []
        for cand in y[ok]:
            if not _in_window(cand, window, pad=merge_tol):
                continue
            pol = newton_polish(family, x, cand, tol)
            if pol is None:
                continue
            if any(math.hypot(pol[0] - f[0], pol[1] - f[1]) < merge_tol for f in found + new):
                continue
            new.append(pol)
        if not new:
            break
        found.extend(new)
    return found


def _bump_candidates(family: GeneratingFamily, x: tuple[float, float], window: Sequence[float]):
    """Outside the bump support the field is the base field, so roots there are base roots; only
    the support needs a Newton search."""
    base = _closed_candidates(GeneratingFamily(family.core), x) or []
    b = family.bump
    c, sg = b.center, b.sigma
    box = (max(window[0], c[0] - sg), min(window[1], c[0] + sg), max(window[2], c[1] - sg), min(window[3], c[1] + sg))
    tol = 1e-10 * max(1.0, math.hypot(*x))
    cands = []
    for y in base:
        pol = newton_polish(family, x, y, tol)
        if pol is not None:
            cands.append(pol)
    if box[0] < box[1] and box[2] < box[3]:
        cands.extend(newton_multistart(family, x, box, grid=9, extra_starts=cands))
    return cands


def find_critical_points(family: GeneratingFamily, x: ParameterPoint | Sequence[float],
                         window: Sequence[float] = DEFAULT_WINDOW, method: str = "auto",
                         degeneracy_tol: float = DEGENERACY_TOL) -> list[CriticalPoint]:
    """All critical points of ``grad f - x`` inside the phase window, sorted by position."""
    xt = _xy(x)
    scale = max(1.0, math.hypot(*xt))
    tol = 1e-10 * scale
    merge_tol = 1e-7 * window_diagonal(window)
    cands = _closed_candidates(family, xt) if method != "newton" else None
    if cands is None:
        if family.kind is FamilyKind.BUMP and method == "auto":
            cands = _bump_candidates(family, xt, window)
        else:
            cands = newton_multistart(family, xt, window)
    pts = []
    for c in _merge([c for c in cands if _in_window(c, window, pad=merge_tol)], merge_tol):
        pol = newton_polish(family, xt, c, tol)
        if pol is None:
            raise NonConvergence(f"root candidate {c} at x={xt} failed to polish", np.array([c]))
        pts.append(pol)
    pts = _merge(pts, merge_tol)
    pts.sort()
    return [make_point(family, p, degeneracy_tol=degeneracy_tol) for p in pts]


# ---------------------------------------------------------------- labelling

def _count_saddle_labels(family: GeneratingFamily) -> int:
    core = family.core
    return {FamilyKind.FOLD: 1, FamilyKind.CUSP: 2, FamilyKind.ELLIPTIC: 2, FamilyKind.PERTURBED: 3}[core]


def reference_labeling(family: GeneratingFamily,
                       window: Sequence[float] = DEFAULT_WINDOW) -> tuple[tuple[float, float], list[CriticalPoint]]:
    """Canonical parameter point and labelled points from which labels are continued."""
    core = family.core
    if core is FamilyKind.FOLD:
        xr, named = (1.0, 0.0), {"n": (1.0, 0.0), "s1": (-1.0, 0.0)}
    elif core is FamilyKind.CUSP:
        s = math.sqrt(2.0)
        xr, named = (0.0, 1.0), {"n": (0.0, 1.0), "s1": (s, -1.0), "s2": (-s, -1.0)}
    elif core is FamilyKind.ELLIPTIC:
        xr, named = (1.0, 0.0), {"s1": (1.0, 0.0), "s2": (-1.0, 0.0)}
    else:
        h = math.sqrt(3.0) / 2.0
        xr, named = (0.0, 0.0), {"s1": (0.5, h), "s2": (0.5, -h), "s3": (-1.0, 0.0), "n": (0.0, 0.0)}
    base = [make_point(GeneratingFamily(core), y, lab) for lab, y in named.items()]
    if family.kind is not FamilyKind.BUMP:
        return xr, sorted(base, key=lambda p: p.label)
    pts = find_critical_points(family, xr, window)
    return xr, label_points(pts, xr, base)


def _predict(family: GeneratingFamily, p: CriticalPoint, dx: tuple[float, float]) -> tuple[float, float]:
    h11, h12, h22 = (float(v) for v in family.hessian(*p.y))
    det = h11 * h22 - h12 * h12
    if p.cls.degenerate or abs(det) < 1e-12:
        return p.y
    d1 = (h22 * dx[0] - h12 * dx[1]) / det
    d2 = (-h12 * dx[0] + h11 * dx[1]) / det
    return (p.y[0] + d1, p.y[1] + d2)


def _is_node(c: PointClass) -> bool:
    return c in (PointClass.UNSTABLE_NODE, PointClass.STABLE_NODE)


def merged_label(labels: Sequence[str]) -> str:
    parts = sorted(set(labels), key=lambda s: (s != "n", s))
    return "".join(parts)


def label_points(points: Sequence[CriticalPoint], x: Sequence[float] | ParameterPoint,
                 reference: Sequence[CriticalPoint], x_ref: Sequence[float] | ParameterPoint | None = None,
                 family: GeneratingFamily | None = None, merge_tol: float = 1e-6,
                 saddle_labels: Sequence[str] | None = None) -> list[CriticalPoint]:
    """Transfer labels from ``reference`` to ``points`` by nearest-neighbour matching.

    Positions of the reference points are first advanced to ``x`` with the linear
    predictor when ``family`` and ``x_ref`` are given. Node/saddle mismatches are
    penalized. Unmatched new points are born in pairs on fold crossings and get the
    unused labels; points absorbing several references get a merged label.
    """
    xt = _xy(x)
    refs = [r for r in reference if r.label != "unlabeled"]
    if not points:
        return []
    if not refs:
        return list(points)
    if family is not None and x_ref is not None:
        xr = _xy(x_ref)
        dx = (xt[0] - xr[0], xt[1] - xr[1])
        pred = [_predict(family, r, dx) for r in refs]
    else:
        pred = [r.y for r in refs]
    spread = max([1.0] + [math.hypot(p.y[0], p.y[1]) for p in points])
    cost = np.zeros((len(refs), len(points)))
    for i, (r, pr) in enumerate(zip(refs, pred)):
        for j, p in enumerate(points):
            c = math.hypot(pr[0] - p.y[0], pr[1] - p.y[1])
            if not p.cls.degenerate and not r.cls.degenerate and _is_node(r.cls) != _is_node(p.cls):
                c += 10.0 * spread
            cost[i, j] = c
    labels: list[str | None] = [None] * len(points)
    if len(refs) == len(points):
        rows, cols = linear_sum_assignment(cost)
        for i, j in zip(rows, cols):
            row = np.sort(cost[i])
            if len(row) > 1 and row[1] - row[0] < merge_tol and points[j].cls is PointClass.SADDLE:
                raise AmbiguousMatch(f"label {refs[i].label} matches two points within {merge_tol:g}; reduce the step")
            labels[j] = refs[i].label
    else:
        # counts differ: a class may legitimately change where points pass through a vertex
        raw = np.array([[math.hypot(pr[0] - p.y[0], pr[1] - p.y[1]) for p in points] for pr in pred])
        cost = raw
        groups: dict[int, list[int]] = {}
        for i in range(len(refs)):
            groups.setdefault(int(np.argmin(cost[i])), []).append(i)
        for j, members in groups.items():
            if len(members) == 1:
                labels[j] = refs[members[0]].label
            elif points[j].cls.degenerate:
                labels[j] = merged_label([refs[i].label for i in members])
            else:
                best = min(members, key=lambda i: cost[i, j])
                labels[j] = refs[best].label
    used = {lab for lab in labels if lab}
    n_sad = len(saddle_labels) if saddle_labels else 3
    free_s = [s for s in (saddle_labels or [f"s{k}" for k in range(1, n_sad + 1)]) if s not in used]
    out = []
    for p, lab in zip(points, labels):
        if lab is None:
            if _is_node(p.cls) and "n" not in used:
                lab = "n"
            elif p.cls is PointClass.SADDLE and free_s:
                lab = free_s.pop(0)
            else:
                lab = "unlabeled"
            used.add(lab)
        out.append(replace(p, label=lab))
    return out


def labeling_path(family: GeneratingFamily, x: Sequence[float]) -> list[tuple[float, float]]:
    """Waypoints from the reference parameter to ``x`` used to continue labels."""
    x1, x2 = float(x[0]), float(x[1])
    core = family.core
    if core is FamilyKind.CUSP:
        # stay inside the cusp region as long as possible
        if x2 > 0.0:
            return [(0.0, 1.0), (0.0, x2), (x1, x2)]
        return [(0.0, 1.0), (x1, 1.0), (x1, x2)]
    xr = reference_labeling(GeneratingFamily(core))[0]
    if core is FamilyKind.PERTURBED:
        return [xr, *_vertex_detour(x1, x2), (x1, x2)]
    return [xr, (x1, x2)]


# cusp vertices of the perturbed caustic sit at radius 3/4 on these rays
_VERTEX_ANGLES = (0.0, 2.0 * math.pi / 3.0, -2.0 * math.pi / 3.0)
_DETOUR = math.radians(25.0)
_RAY_TOL = 1e-9


def _vertex_detour(x1: float, x2: float) -> list[tuple[float, float]]:
    """Waypoints keeping the path off the cusp vertices, passing on the counterclockwise side when on a ray."""
    r = math.hypot(x1, x2)
    if r < 0.7:
        return []
    theta = math.atan2(x2, x1)
    for va in _VERTEX_ANGLES:
        off = math.remainder(theta - va, 2.0 * math.pi)
        if abs(off) < _DETOUR:
            a = va + (_DETOUR if off >= -_RAY_TOL else -_DETOUR)
            return [(0.5 * math.cos(a), 0.5 * math.sin(a)), (r * math.cos(a), r * math.sin(a))]
    return []


def continue_labels(family: GeneratingFamily, labeled: Sequence[CriticalPoint], x_from: Sequence[float],
                    x_to: Sequence[float], window: Sequence[float] = DEFAULT_WINDOW,
                    max_step: float = 0.02) -> list[CriticalPoint]:
    """Carry labels along the straight segment ``x_from -> x_to``."""
    a = np.asarray(x_from, dtype=float)
    b = np.asarray(x_to, dtype=float)
    length = float(np.hypot(*(b - a)))
    scale = max(1.0, float(np.hypot(*a)), float(np.hypot(*b)))
    nsteps = max(1, int(math.ceil(length / (max_step * scale))))
    cur = list(labeled)
    xa = tuple(a)
    sad = _saddle_label_names(family)
    for k in range(1, nsteps + 1):
        xb = tuple(a + (b - a) * (k / nsteps))
        pts = find_critical_points(family, xb, window)
        cur = label_points(pts, xb, cur, xa, family, saddle_labels=sad)
        xa = xb
    return cur


def _saddle_label_names(family: GeneratingFamily) -> list[str]:
    return [f"s{k}" for k in range(1, _count_saddle_labels(family) + 1)]


def elliptic_labels(points: Sequence[CriticalPoint], x: Sequence[float]) -> list[CriticalPoint]:
    """Labels for the unperturbed elliptic family with the cut on the negative x1 axis."""
    if len(points) != 2 or x[0] == 0.0 and x[1] == 0.0:
        return [replace(p, label="s1s2") for p in points]
    s1, _ = closed_form_umbilic_saddles(x)
    d0 = points[0].distance(s1)
    d1 = points[1].distance(s1)
    first = 0 if d0 <= d1 else 1
    return [replace(p, label="s1" if i == first else "s2") for i, p in enumerate(points)]


def label_at(family: GeneratingFamily, x: ParameterPoint | Sequence[float],
             window: Sequence[float] = DEFAULT_WINDOW) -> list[CriticalPoint]:
    """Critical points at ``x`` carrying labels continued from the reference labeling."""
    xt = _xy(x)
    pts = find_critical_points(family, xt, window)
    if family.kind is FamilyKind.ELLIPTIC:
        return elliptic_labels(pts, xt)
    if family.kind is FamilyKind.BUMP:
        base = GeneratingFamily(family.core)
        ref = label_at(base, xt, window)
        return label_points(pts, xt, ref, saddle_labels=_saddle_label_names(family))
    if family.kind is FamilyKind.FOLD:
        out = []
        for p in pts:
            lab = "n" if _is_node(p.cls) else ("s1" if p.cls is PointClass.SADDLE else "ns1")
            out.append(replace(p, label=lab))
        return out
    xr, cur = reference_labeling(family, window)
    way = labeling_path(family, xt)
    for p, q in zip(way[:-1], way[1:]):
        cur = continue_labels(family, cur, p, q, window)
    out = label_points(pts, xt, cur, xt, family, saddle_labels=_saddle_label_names(family))
    if family.kind is FamilyKind.PERTURBED:
        out = _vertex_ray_labels(out, xt)
    return out


# saddle that stays away from each vertex; the other two merge with n there
_FAR_SADDLE = ("s3", "s2", "s1")


def _vertex_ray_labels(points: list[CriticalPoint], x: tuple[float, float]) -> list[CriticalPoint]:
    """On a half-line leaving a vertex the node has passed through the vertex and continues as a saddle: call it n."""
    r = math.hypot(*x)
    if r <= 0.75:
        return points
    theta = math.atan2(x[1], x[0])
    for va, far in zip(_VERTEX_ANGLES, _FAR_SADDLE):
        if abs(math.remainder(theta - va, 2.0 * math.pi)) < _RAY_TOL:
            return [p if p.label == far or p.cls is not PointClass.SADDLE else replace(p, label="n")
                    for p in points]
    return points


def track_points(family: GeneratingFamily, labeled: Sequence[CriticalPoint], x_from: Sequence[float],
                 x_to: Sequence[float], tol: float | None = None) -> list[CriticalPoint] | None:
    """Newton-track labelled points to a nearby parameter; None if any point is lost.

    Cheaper than a full search; used by continuation loops where the parameter
    moves in small steps and only the tracked points matter.
    """
    xa = _xy(x_from)
    xb = _xy(x_to)
    dx = (xb[0] - xa[0], xb[1] - xa[1])
    tol = tol if tol is not None else 1e-10 * max(1.0, math.hypot(*xb))
    out = []
    for p in labeled:
        guess = _predict(family, p, dx)
        y = newton_polish(family, xb, guess, tol, max_iter=30)
        if y is None:
            return None
        out.append(make_point(family, y, p.label))
    for i in range(len(out)):
        for j in range(i + 1, len(out)):
            if out[i].distance(out[j]) < 1e-7:
                return None
    return out


def points_by_label(points: Sequence[CriticalPoint]) -> dict[str, CriticalPoint]:
    return {p.label: p for p in points}
