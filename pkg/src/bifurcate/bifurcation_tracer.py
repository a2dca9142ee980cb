"""Zeros of the splitting function: circle scans, branch continuation and the full locus."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .caustic import Caustic, polyline_distance, trace_caustic
from .critical_points import (
    DEFAULT_WINDOW,
    CriticalPoint,
    PointClass,
    find_critical_points,
    label_at,
    label_points,
    _saddle_label_names,
    track_points,
)
from .field_models import FamilyKind, GeneratingFamily, ParameterPoint, _xy
from .flow_engine import (
    DEFAULT_CONTROLS,
    SEP_COMBOS,
    BranchCrossings,
    NoCrossing,
    branch_crossings,
    pair_labels,
)
from .integrator import FlowControls, StepUnderflow
from .parallel import parallel_map

log = logging.getLogger(__name__)


class EndpointKind(str, Enum):
    CAUSTIC_FOLD = "caustic_fold"
    CAUSTIC_CUSP_VERTEX = "caustic_cusp_vertex"
    REGION_EXIT = "region_exit"
    CLOSED_LOOP = "closed_loop"
    LOST_ZERO = "lost_zero"


@dataclass(frozen=True)
class Endpoint:
    kind: EndpointKind
    side: int | None = None
    point: tuple[float, float] | None = None

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "side": self.side,
                "point": list(self.point) if self.point is not None else None}

    @classmethod
    def from_dict(cls, d: dict) -> Endpoint:
        pt = d.get("point")
        return cls(EndpointKind(d["kind"]), d.get("side"), tuple(pt) if pt is not None else None)


class LostZero(RuntimeError):
    pass


def sep_id(vec: Sequence[float], toward: Sequence[float]) -> str:
    return "+" if vec[0] * toward[0] + vec[1] * toward[1] >= 0.0 else "-"


# ------------------------------------------------------------------ evaluation

class _TrackFailure(RuntimeError):
    pass


@dataclass
class _PairState:
    """Tracked saddle pair at a parameter point with continued branch orientation."""

    x: tuple[float, float]
    si: CriticalPoint
    sj: CriticalPoint
    orient: dict[str, tuple[float, float]]
    psi: float = math.nan
    seps: tuple[str, str] = ("+", "+")
    others: tuple[CriticalPoint, ...] = ()


def _advance(family: GeneratingFamily, state: _PairState, x_new: Sequence[float], sep: tuple[str, str],
             controls: FlowControls, max_move: float = 0.25) -> _PairState:
    """Track the pair to ``x_new`` and evaluate psi; raises on tracking loss or missing crossings."""
    xt = (float(x_new[0]), float(x_new[1]))
    tracked = track_points(family, [state.si, state.sj], state.x, xt)
    if tracked is None:
        raise _TrackFailure("saddle tracking lost")
    si, sj = tracked
    d_old = state.si.distance(state.sj)
    for a, b in ((state.si, si), (state.sj, sj)):
        if b.cls is not PointClass.SADDLE:
            raise _TrackFailure(f"{b.label} became {b.cls.value}")
        if a.distance(b) > max_move * d_old:
            raise _TrackFailure(f"{b.label} jumped")
    # a saddle whose smaller |eigenvalue| collapses is merging with another point
    for a, b in ((state.si, si), (state.sj, sj)):
        la = min(abs(a.eigenvalues[0]), abs(a.eigenvalues[1]))
        lb = min(abs(b.eigenvalues[0]), abs(b.eigenvalues[1]))
        if lb < 0.25 * la:
            raise _TrackFailure(f"{b.label} approaches degeneracy")
    others = []
    for p in state.others:
        q = track_points(family, [p], state.x, xt)
        if q is not None and min(q[0].distance(si), q[0].distance(sj)) > 1e-7:
            others.append(q[0])
    su, ss = sep
    bc = branch_crossings(family, xt, si, sj, controls, targets=(si, sj, *others), orient=state.orient,
                          seps=(su,), seps_s=(ss,))
    psi = bc.psi(sep)
    if psi is None:
        h, k = bc.h[su], bc.k[ss]
        raise h if isinstance(h, NoCrossing) else k
    n = bc.section.normal
    s_u = 1.0 if su == "+" else -1.0
    s_s = 1.0 if ss == "+" else -1.0
    eu = bc.vectors["u"]
    es = bc.vectors["s"]
    ids = (sep_id((s_u * eu[0], s_u * eu[1]), n), sep_id((s_s * es[0], s_s * es[1]), (-n[0], -n[1])))
    return _PairState(xt, si, sj, dict(bc.vectors), psi, ids, tuple(others))


# ------------------------------------------------------------------ circle scans

@dataclass(frozen=True)
class ScanSample:
    alpha: float
    x: tuple[float, float]
    pair: tuple[str, str]
    sep: tuple[str, str]
    psi: float | None
    status: str


@dataclass(frozen=True)
class ScanZero:
    alpha: float
    x: tuple[float, float]
    pair: tuple[str, str]
    sep: tuple[str, str]
    psi: float
    si: CriticalPoint
    sj: CriticalPoint
    orient: dict
    others: tuple[CriticalPoint, ...] = ()


@dataclass
class ScanResult:
    r: float
    samples: list[ScanSample]
    zeros: list[ScanZero]
    jumps: list[float] = field(default_factory=list)

    @property
    def zero_angles(self) -> list[float]:
        return [z.alpha for z in self.zeros]


def _circle_labels(family: GeneratingFamily, xs: Sequence[tuple[float, float]], window) -> list[list[CriticalPoint]]:
    out = []
    prev = None
    prev_x = None
    names = _saddle_label_names(family)
    for x in xs:
        if prev is None:
            pts = label_at(family, x, window)
        else:
            pts = label_points(find_critical_points(family, x, window), x, prev, prev_x, family, saddle_labels=names)
        out.append(pts)
        prev, prev_x = pts, x
    return out


def _crossings_job(args) -> BranchCrossings | str:
    family, x, si, sj, controls, targets, orient = args
    try:
        return branch_crossings(family, x, si, sj, controls, targets, orient)
    except StepUnderflow as exc:
        return f"underflow: {exc}"


def _select_pairs(saddles: Sequence[CriticalPoint], pair: Sequence | None) -> list[tuple[str, str]]:
    labs = sorted(p.label for p in saddles)
    if pair is not None:
        a, b = pair_labels(pair)
        return [(a, b), (b, a)] if a in labs and b in labs else []
    return [(a, b) for a in labs for b in labs if a != b]


def scan_circle(family: GeneratingFamily, r: float, n: int = 360, pair: Sequence | None = None,
                seps: Sequence[tuple[str, str]] = SEP_COMBOS, controls: FlowControls = DEFAULT_CONTROLS,
                window: Sequence[float] = DEFAULT_WINDOW, center: Sequence[float] = (0.0, 0.0),
                alpha0: float | None = None, workers: int | None = None,
                xtol: float = 1e-7) -> ScanResult:
    """Sample psi on the circle of radius ``r`` and refine its sign changes.

    Saddle labels and branch orientations are continued around the circle from the
    first sample, so ``pair`` names the unordered pair at that sample; both
    orientations are scanned. Samples without crossings are recorded as gaps.
    """
    if n < 3:
        raise ValueError("a circle scan needs at least 3 samples")
    if not r > 0.0:
        raise ValueError("scan radius must be positive")
    a0 = math.pi / n if alpha0 is None else alpha0
    alphas = [a0 + 2.0 * math.pi * k / n for k in range(n + 1)]
    xs = [(center[0] + r * math.cos(a), center[1] + r * math.sin(a)) for a in alphas]
    labels = _circle_labels(family, xs, window)
    saddles0 = [p for p in labels[0] if p.cls is PointClass.SADDLE]
    pairs = _select_pairs(saddles0, pair)
    # continue branch orientation around the circle for every pair
    jobs = []
    keys = []
    for pr in pairs:
        orient = None
        for k, pts in enumerate(labels):
            lab = {p.label: p for p in pts}
            si, sj = lab.get(pr[0]), lab.get(pr[1])
            if si is None or sj is None or si.cls is not PointClass.SADDLE or sj.cls is not PointClass.SADDLE:
                orient = None
                continue
            if orient is not None:
                orient = {
                    "u": _orient_like(si.unstable_vector, orient["u"]),
                    "s": _orient_like(sj.stable_vector, orient["s"]),
                }
            else:
                dn = (sj.y[0] - si.y[0], sj.y[1] - si.y[1])
                orient = {
                    "u": _orient_like(si.unstable_vector, dn),
                    "s": _orient_like(sj.stable_vector, (-dn[0], -dn[1])),
                }
            jobs.append((family, xs[k], si, sj, controls, tuple(pts), dict(orient)))
            keys.append((pr, k))
    results = parallel_map(_crossings_job, jobs, workers)
    table: dict[tuple, dict[int, tuple]] = {}
    for (pr, k), job, res in zip(keys, jobs, results):
        table.setdefault(pr, {})[k] = (job, res)
    samples: list[ScanSample] = []
    zeros: list[ScanZero] = []
    jumps: list[float] = []
    for pr in pairs:
        rows = table.get(pr, {})
        for sep in seps:
            vals: list[float | None] = []
            for k in range(n + 1):
                item = rows.get(k)
                if item is None:
                    v, status = None, "missing_saddle"
                elif isinstance(item[1], str):
                    v, status = None, item[1]
                else:
                    v = item[1].psi(sep)
                    status = "ok" if v is not None else _nc_status(item[1], sep)
                vals.append(v)
                if k < n:
                    samples.append(ScanSample(alphas[k] % (2 * math.pi), xs[k], pr, sep, v, status))
            for k in range(n):
                va, vb = vals[k], vals[k + 1]
                if va is None or vb is None:
                    continue
                if va == 0.0 or (va < 0.0) != (vb < 0.0):
                    if vb == 0.0 and k + 1 < n:
                        continue
                    z = _refine_on_circle(family, r, center, alphas[k], alphas[k + 1], rows[k][0], sep,
                                          controls, xtol)
                    if z is None:
                        jumps.append(alphas[k] % (2 * math.pi))
                    else:
                        zeros.append(z)
    relabeled = []
    for z in zeros:
        pts = _true_labels(family, z.x, [z.si, z.sj, *z.others], window)
        if pts is not None:
            z = replace(z, pair=(pts[0].label, pts[1].label), si=pts[0], sj=pts[1], others=tuple(pts[2:]))
        relabeled.append(z)
    relabeled.sort(key=lambda z: (z.alpha, z.pair, z.sep))
    merged: list[ScanZero] = []
    for z in relabeled:
        if any(_angle_gap(z.alpha, m.alpha) < 1e-5 and z.pair == m.pair and z.sep == m.sep for m in merged):
            continue
        merged.append(z)
    return ScanResult(r, samples, merged, sorted(jumps))


def _nc_status(bc: BranchCrossings, sep) -> str:
    h, k = bc.h[sep[0]], bc.k[sep[1]]
    bad = h if isinstance(h, NoCrossing) else k
    return f"no_crossing:{bad.cause}"


def _signed_orient(st: _PairState, sep: tuple[str, str]) -> dict:
    """Branch vectors of ``sep`` so that the same branches are ``("+", "+")`` under this orientation."""
    su = 1.0 if sep[0] == "+" else -1.0
    ss = 1.0 if sep[1] == "+" else -1.0
    eu, es = st.orient["u"], st.orient["s"]
    return {"u": (su * eu[0], su * eu[1]), "s": (ss * es[0], ss * es[1])}


def _true_labels(family, x, points: Sequence[CriticalPoint], window) -> list[CriticalPoint] | None:
    """Relabel ``points`` with the labels continued from the reference point at ``x``."""
    try:
        ref = label_at(family, x, window)
    except Exception:
        return None
    out = []
    for p in points:
        q = min(ref, key=lambda r: r.distance(p))
        if q.distance(p) > 1e-6:
            return None
        out.append(replace(p, label=q.label))
    if len({p.label for p in out}) != len(out):
        return None
    return out


def _others(points, si, sj) -> tuple[CriticalPoint, ...]:
    return tuple(p for p in points if p.label not in (si.label, sj.label))


def _orient_like(v, ref):
    return v if v[0] * ref[0] + v[1] * ref[1] >= 0.0 else (-v[0], -v[1])


def _angle_gap(a: float, b: float) -> float:
    d = abs(a - b) % (2 * math.pi)
    return min(d, 2 * math.pi - d)


def _refine_on_circle(family, r, center, a_lo, a_hi, job, sep, controls, xtol) -> ScanZero | None:
    _, x0, si0, sj0, _, pts0, orient0 = job
    base = _PairState(x0, si0, sj0, orient0, others=_others(pts0, si0, sj0))

    def at(a):
        x = (center[0] + r * math.cos(a), center[1] + r * math.sin(a))
        return _advance(family, base, x, sep, controls, max_move=1.0)

    def f(a):
        return at(a).psi

    try:
        fa, fb = f(a_lo), f(a_hi)
        if fa == 0.0:
            a_star = a_lo
        elif fb == 0.0:
            a_star = a_hi
        elif (fa < 0.0) == (fb < 0.0):
            return None
        else:
            a_star = brentq(f, a_lo, a_hi, xtol=xtol, rtol=1e-14)
        st = at(a_star)
    except (NoCrossing, _TrackFailure, StepUnderflow, ValueError):
        return None
    d = st.si.distance(st.sj)
    if abs(st.psi) > 1e-6 * d:
        return None
    return ScanZero(a_star % (2 * math.pi), st.x, (st.si.label, st.sj.label), st.seps, st.psi, st.si, st.sj,
                    _signed_orient(st, sep), st.others)


# ------------------------------------------------------------------ branch continuation

@dataclass
class BifurcationBranch:
    branch_id: int
    label: tuple[str, str]
    sep: tuple[str, str]
    points: np.ndarray
    residuals: np.ndarray
    seps: list[tuple[str, str]]
    endpoints: tuple[Endpoint, Endpoint]
    flags: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "branch_id": self.branch_id,
            "label": list(self.label),
            "sep": list(self.sep),
            "points": self.points.tolist(),
            "psi_residual": self.residuals.tolist(),
            "seps": [list(s) for s in self.seps],
            "endpoints": [e.to_dict() for e in self.endpoints],
            "flags": list(self.flags),
        }

    @classmethod
    def from_dict(cls, d: dict) -> BifurcationBranch:
        pts = np.asarray(d["points"], dtype=float).reshape(-1, 2)
        res = np.asarray(d.get("psi_residual", [0.0] * len(pts)), dtype=float)
        seps = [tuple(s) for s in d.get("seps", [d["sep"]] * len(pts))]
        ends = tuple(Endpoint.from_dict(e) for e in d["endpoints"])
        return cls(int(d["branch_id"]), tuple(d["label"]), tuple(d["sep"]), pts, res, seps, ends,
                   list(d.get("flags", [])))


@dataclass(frozen=True)
class StepControls:
    initial: float = 0.04
    minimum: float = 1e-5
    maximum: float = 0.2
    fd_step: float = 5.7e-5
    corrector_tol: float = 1e-9
    max_corrector: int = 8
    max_steps: int = 4000
    grow_after: int = 5

    @classmethod
    def for_region(cls, region: Sequence[float], **kw) -> StepControls:
        diag = math.hypot(region[1] - region[0], region[3] - region[2])
        base = dict(initial=0.01 * diag, minimum=1e-5 * diag, maximum=0.05 * diag, fd_step=1e-5 * diag)
        base.update(kw)
        return cls(**base)


def _in_region(x, region, pad: float = 0.0) -> bool:
    return region[0] - pad <= x[0] <= region[1] + pad and region[2] - pad <= x[1] <= region[3] + pad


def _gradient(family, state: _PairState, sep, controls, h) -> np.ndarray:
    g = np.zeros(2)
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        try:
            fp = _advance(family, state, np.asarray(state.x) + e, sep, controls, max_move=1.0).psi
            fm = _advance(family, state, np.asarray(state.x) - e, sep, controls, max_move=1.0).psi
            g[k] = (fp - fm) / (2 * h)
        except (NoCrossing, _TrackFailure, StepUnderflow):
            try:
                fp = _advance(family, state, np.asarray(state.x) + e, sep, controls, max_move=1.0).psi
                g[k] = (fp - state.psi) / h
            except (NoCrossing, _TrackFailure, StepUnderflow):
                fm = _advance(family, state, np.asarray(state.x) - e, sep, controls, max_move=1.0).psi
                g[k] = (state.psi - fm) / h
    return g


def _correct(family, state: _PairState, x_pred: np.ndarray, grad: np.ndarray, sep, controls,
             steps: StepControls) -> _PairState:
    """Scalar Newton along the frozen gradient direction onto psi = 0."""
    gg = float(grad @ grad)
    x = x_pred.copy()
    st = _advance(family, state, x, sep, controls)
    for _ in range(steps.max_corrector):
        if abs(st.psi) < steps.corrector_tol:
            return st
        x = x - st.psi * grad / gg
        st = _advance(family, state, x, sep, controls)
    if abs(st.psi) < steps.corrector_tol:
        return st
    raise LostZero(f"corrector did not converge at x={tuple(x)} (psi={st.psi:.3g})")


def _classify_end(caustic: Caustic | None, x, radius: float, cause: str) -> Endpoint:
    pt = (float(x[0]), float(x[1]))
    if caustic is not None:
        kind, idx, d = caustic.nearest_feature(pt)
        if d <= radius:
            if kind == "vertex":
                return Endpoint(EndpointKind.CAUSTIC_CUSP_VERTEX, None, pt)
            return Endpoint(EndpointKind.CAUSTIC_FOLD, idx, pt)
    return Endpoint(EndpointKind.LOST_ZERO, None, pt)


def _trace_direction(family, start: _PairState, tangent0: np.ndarray, sep, controls, steps: StepControls,
                     region, caustic) -> tuple[list[_PairState], Endpoint]:
    states = [start]
    ds = steps.initial
    t_prev = tangent0
    clean = 0
    st = start
    grad = _gradient(family, st, sep, controls, steps.fd_step)
    x0 = np.asarray(start.x)
    last_cause = "track"
    for n_step in range(steps.max_steps):
        gnorm = float(np.hypot(*grad))
        if gnorm == 0.0:
            return states, Endpoint(EndpointKind.LOST_ZERO, None, st.x)
        t = np.array([-grad[1], grad[0]]) / gnorm
        if float(t @ t_prev) < 0.0:
            t = -t
        xc = np.asarray(st.x)
        x_pred = xc + ds * t
        exiting = not _in_region(x_pred, region)
        if exiting:
            # shorten the step to land on the region boundary
            ds_b = _distance_to_boundary(xc, t, region)
            if ds_b < steps.minimum:
                return states, Endpoint(EndpointKind.REGION_EXIT, None, st.x)
            x_pred = xc + ds_b * t
        try:
            new = _correct(family, st, x_pred, grad, sep, controls, steps)
            if float(np.hypot(*(np.asarray(new.x) - x_pred))) > 0.5 * max(ds, steps.minimum):
                raise LostZero("corrector moved too far from the predictor")
            moved = np.asarray(new.x) - xc
            if float(moved @ t) <= 0.0:
                raise LostZero("continuation reversed")
            new_grad = _gradient(family, new, sep, controls, steps.fd_step)
        except _TrackFailure:
            last_cause = "track"
            ok = False
        except (NoCrossing, LostZero, StepUnderflow):
            last_cause = "lost"
            ok = False
        else:
            ok = True
        if not ok:
            ds *= 0.5
            clean = 0
            if ds < steps.minimum:
                return states, _classify_end(caustic, st.x, 2.0 * steps.initial, last_cause)
            continue
        states.append(new)
        st = new
        grad = new_grad
        t_prev = t
        if exiting or not _in_region(new.x, region, pad=1e-12):
            return states, Endpoint(EndpointKind.REGION_EXIT, None, new.x)
        if n_step >= 10 and float(np.hypot(*(np.asarray(new.x) - x0))) < 0.5 * ds:
            states.append(start)
            return states, Endpoint(EndpointKind.CLOSED_LOOP, None, start.x)
        clean += 1
        if clean >= steps.grow_after:
            ds = min(2.0 * ds, steps.maximum)
            clean = 0
    return states, Endpoint(EndpointKind.LOST_ZERO, None, st.x)


def _distance_to_boundary(x, t, region) -> float:
    best = math.inf
    for k, (lo, hi) in enumerate(((region[0], region[1]), (region[2], region[3]))):
        if t[k] > 0:
            best = min(best, (hi - x[k]) / t[k])
        elif t[k] < 0:
            best = min(best, (lo - x[k]) / t[k])
    return max(best, 0.0)


def trace_branch(family: GeneratingFamily, seed: ParameterPoint | Sequence[float], pair: Sequence,
                 sep: tuple[str, str] = ("+", "+"), steps: StepControls | None = None,
                 controls: FlowControls = DEFAULT_CONTROLS, region: Sequence[float] = (-2.0, 2.0, -2.0, 2.0),
                 caustic: Caustic | None = None, window: Sequence[float] = DEFAULT_WINDOW,
                 points: Sequence[CriticalPoint] | None = None, orient: dict | None = None,
                 branch_id: int = 0) -> BifurcationBranch:
    """Continue the zero set of psi through ``seed`` in both directions."""
    steps = steps or StepControls.for_region(region)
    xs = _xy(seed)
    pts = list(points) if points is not None else label_at(family, xs, window)
    li, lj = pair_labels(pair)
    lab = {p.label: p for p in pts}
    if li not in lab or lj not in lab:
        raise LookupError(f"pair ({li},{lj}) not present at seed {xs}")
    si, sj = lab[li], lab[lj]
    if orient is None:
        dn = (sj.y[0] - si.y[0], sj.y[1] - si.y[1])
        orient = {"u": _orient_like(si.unstable_vector, dn), "s": _orient_like(sj.stable_vector, (-dn[0], -dn[1]))}
    if caustic is None:
        caustic = trace_caustic(family, window)
    base = _PairState(xs, si, sj, orient, others=_others(pts, si, sj))
    seed_state = _advance(family, base, xs, sep, controls, max_move=1.0)
    if abs(seed_state.psi) >= steps.corrector_tol:
        grad = _gradient(family, seed_state, sep, controls, steps.fd_step)
        seed_state = _correct(family, seed_state, np.asarray(xs, dtype=float), grad, sep, controls, steps)
    grad = _gradient(family, seed_state, sep, controls, steps.fd_step)
    if float(np.hypot(*grad)) == 0.0:
        raise LostZero("psi gradient vanishes at the seed")
    t0 = np.array([-grad[1], grad[0]]) / float(np.hypot(*grad))
    fwd, end_f = _trace_direction(family, seed_state, t0, sep, controls, steps, region, caustic)
    if end_f.kind is EndpointKind.CLOSED_LOOP:
        states, ends = fwd, (end_f, end_f)
    else:
        bwd, end_b = _trace_direction(family, seed_state, -t0, sep, controls, steps, region, caustic)
        states = bwd[::-1] + fwd[1:]
        ends = (end_b, end_f)
    flags = [f"lost_zero@{i}" for i, e in enumerate(ends) if e.kind is EndpointKind.LOST_ZERO]
    pts_arr = np.array([s.x for s in states], dtype=float)
    res = np.array([abs(s.psi) for s in states], dtype=float)
    return BifurcationBranch(branch_id, (li, lj), tuple(sep), pts_arr, res, [s.seps for s in states], ends, flags)


def reevaluate_residuals(family: GeneratingFamily, branch: BifurcationBranch,
                         controls: FlowControls = DEFAULT_CONTROLS,
                         window: Sequence[float] = DEFAULT_WINDOW, every: int = 1) -> np.ndarray:
    """Independent psi at branch points, with labels re-derived by continuation along the branch."""
    pts = branch.points
    k0 = len(pts) // 2
    cps = label_at(family, pts[k0], window)
    lab = {p.label: p for p in cps}
    si, sj = lab[branch.label[0]], lab[branch.label[1]]
    dn = (sj.y[0] - si.y[0], sj.y[1] - si.y[1])
    start = _PairState(tuple(pts[k0]), si, sj, {"u": _orient_like(si.unstable_vector, dn),
                                                "s": _orient_like(sj.stable_vector, (-dn[0], -dn[1]))},
                       others=_others(cps, si, sj))
    out = np.full(len(pts), np.nan)
    sep = branch.seps[k0]
    for rng in (range(k0, len(pts)), range(k0, -1, -1)):
        st = start
        for k in rng:
            try:
                st = _advance(family, st, pts[k], sep, controls, max_move=1.0)
            except (NoCrossing, _TrackFailure, StepUnderflow):
                continue
            if k % every == 0 or k == k0:
                out[k] = abs(st.psi)
    return out


# ------------------------------------------------------------------ full locus

@dataclass(frozen=True)
class Intersection:
    point: tuple[float, float]
    branches: tuple[int, int]
    seps: tuple[tuple[str, str], tuple[str, str]]
    residual: float

    def to_dict(self) -> dict:
        return {"point": list(self.point), "branches": list(self.branches),
                "seps": [list(s) for s in self.seps], "residual": self.residual}

    @classmethod
    def from_dict(cls, d: dict) -> Intersection:
        return cls(tuple(d["point"]), tuple(d["branches"]), tuple(tuple(s) for s in d["seps"]),
                   float(d.get("residual", 0.0)))


@dataclass
class BifurcationDiagram:
    family: str
    region: tuple[float, float, float, float]
    branches: list[BifurcationBranch]
    intersections: list[Intersection]
    caustic: Caustic
    step: float = 0.0
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "region": list(self.region),
            "step": self.step,
            "branches": [b.to_dict() for b in self.branches],
            "intersections": [i.to_dict() for i in self.intersections],
            "caustic": self.caustic.to_dict(),
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, d: dict) -> BifurcationDiagram:
        return cls(
            d.get("family", "unknown"),
            tuple(d["region"]),
            [BifurcationBranch.from_dict(b) for b in d.get("branches", [])],
            [Intersection.from_dict(i) for i in d.get("intersections", [])],
            Caustic.from_dict(d.get("caustic", {})),
            float(d.get("step", 0.0)),
            dict(d.get("metadata", {})),
        )


@dataclass(frozen=True)
class Seed:
    x: tuple[float, float]
    pair: tuple[str, str]
    sep: tuple[str, str]
    source: str
    si: CriticalPoint
    sj: CriticalPoint
    orient: dict
    others: tuple[CriticalPoint, ...] = ()


def _grid_job(args):
    family, x, controls, window = args
    try:
        found = find_critical_points(family, x, window)
    except Exception as exc:  # root finding can fail right on a caustic; the grid point becomes a gap
        return x, [], {}, str(exc)
    pts = [replace(p, label=f"c{k}") for k, p in enumerate(found)]
    out = {}
    for a, si in enumerate(pts):
        for b, sj in enumerate(pts):
            if a == b or si.cls is not PointClass.SADDLE or sj.cls is not PointClass.SADDLE:
                continue
            try:
                bc = branch_crossings(family, x, si, sj, controls, pts)
            except StepUnderflow:
                continue
            out[(a, b)] = {sep: bc.psi(sep) for sep in SEP_COMBOS}
    return x, pts, out, ""


def _match_indices(family, pa, xa, pb, xb) -> dict[int, int] | None:
    """Index map from points at ``xa`` to points at ``xb`` by Newton tracking."""
    tracked = track_points(family, pa, xa, xb)
    if tracked is None:
        return None
    out = {}
    for k, q in enumerate(tracked):
        if not pb:
            return None
        m = min(range(len(pb)), key=lambda j: pb[j].distance(q))
        if pb[m].distance(q) < 1e-6:
            out[k] = m
    return out


def _grid_seeds(family, region, grid, controls, window, workers) -> list[Seed]:
    """Sign changes of psi along grid edges; saddle identity is carried across each edge by tracking."""
    g1 = np.linspace(region[0], region[1], grid)
    g2 = np.linspace(region[2], region[3], grid)
    jobs = [(family, (float(a), float(b)), controls, window) for a in g1 for b in g2]
    results = parallel_map(_grid_job, jobs, workers)
    table = {(i, j): results[i * grid + j] for i in range(grid) for j in range(grid)}
    seeds: list[Seed] = []
    for i in range(grid):
        for j in range(grid):
            for di, dj in ((1, 0), (0, 1)):
                if i + di >= grid or j + dj >= grid:
                    continue
                xa, pa, va, _ = table[(i, j)]
                xb, pb, vb, _ = table[(i + di, j + dj)]
                if not va or not vb:
                    continue
                idx = _match_indices(family, pa, xa, pb, xb)
                if idx is None:
                    continue
                for (ia, ja), seps_a in va.items():
                    if ia not in idx or ja not in idx:
                        continue
                    seps_b = vb.get((idx[ia], idx[ja]))
                    if seps_b is None:
                        continue
                    for sep in SEP_COMBOS:
                        a, b = seps_a[sep], seps_b[sep]
                        if a is None or b is None or (a < 0.0) == (b < 0.0):
                            continue
                        s = _refine_on_segment(family, xa, xb, pa, pa[ia], pa[ja], sep, controls)
                        if s is not None:
                            seeds.append(s)
    return seeds


def _refine_on_segment(family, xa, xb, pts, si, sj, sep, controls) -> Seed | None:
    dn = (sj.y[0] - si.y[0], sj.y[1] - si.y[1])
    base = _PairState(tuple(xa), si, sj, {"u": _orient_like(si.unstable_vector, dn),
                                          "s": _orient_like(sj.stable_vector, (-dn[0], -dn[1]))},
                      others=_others(pts, si, sj))
    a = np.asarray(xa, dtype=float)
    b = np.asarray(xb, dtype=float)

    def at(s):
        return _advance(family, base, a + s * (b - a), sep, controls, max_move=1.0)

    try:
        s_star = brentq(lambda s: at(s).psi, 0.0, 1.0, xtol=1e-10)
        st = at(s_star)
    except (NoCrossing, _TrackFailure, StepUnderflow, ValueError):
        return None
    if abs(st.psi) > 1e-6 * st.si.distance(st.sj):
        return None
    return Seed(st.x, (st.si.label, st.sj.label), ("+", "+"), "grid", st.si, st.sj, _signed_orient(st, sep),
                st.others)


def _trace_job(args):
    family, seed, steps, controls, region, caustic, window = args
    try:
        return trace_branch(family, seed.x, seed.pair, seed.sep, steps, controls, region, caustic, window,
                            points=[seed.si, seed.sj, *seed.others], orient=seed.orient)
    except (LostZero, NoCrossing, _TrackFailure, StepUnderflow, LookupError) as exc:
        return f"seed {seed.x} failed: {exc}"


def _hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    da = max(polyline_distance(b, p) for p in a)
    db = max(polyline_distance(a, p) for p in b)
    return max(da, db)


def find_intersections(family: GeneratingFamily, branches: Sequence[BifurcationBranch],
                       controls: FlowControls = DEFAULT_CONTROLS, window: Sequence[float] = DEFAULT_WINDOW,
                       exclude: Sequence[Sequence[float]] = (), exclude_radius: float = 0.0,
                       refine: bool = True) -> list[Intersection]:
    out = []
    for a in range(len(branches)):
        for b in range(a + 1, len(branches)):
            A, B = branches[a], branches[b]
            for pt, ia, ib in segment_crossings(A.points, B.points):
                if any(math.hypot(pt[0] - e[0], pt[1] - e[1]) < exclude_radius for e in exclude):
                    continue
                res = 0.0
                if refine:
                    pt, res = _refine_intersection(family, A, B, ia, ib, pt, controls, window)
                out.append(Intersection((float(pt[0]), float(pt[1])), (A.branch_id, B.branch_id),
                                        (A.seps[ia], B.seps[ib]), res))
    return out


def segment_crossings(P: np.ndarray, Q: np.ndarray):
    """Proper crossings between two polylines as (point, segment index in P, segment index in Q)."""
    if len(P) < 2 or len(Q) < 2:
        return []
    a0 = P[:-1][:, None, :]
    a1 = P[1:][:, None, :]
    b0 = Q[:-1][None, :, :]
    b1 = Q[1:][None, :, :]
    r = a1 - a0
    s = b1 - b0
    denom = r[..., 0] * s[..., 1] - r[..., 1] * s[..., 0]
    qp = b0 - a0
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (qp[..., 0] * s[..., 1] - qp[..., 1] * s[..., 0]) / denom
        u = (qp[..., 0] * r[..., 1] - qp[..., 1] * r[..., 0]) / denom
    hit = (denom != 0) & (t >= 0) & (t <= 1) & (u >= 0) & (u <= 1)
    out = []
    for i, j in np.argwhere(hit):
        pt = P[i] + t[i, j] * (P[i + 1] - P[i])
        out.append((pt, int(i), int(j)))
    return out


def _refine_intersection(family, A, B, ia, ib, pt, controls, window):
    """Two-dimensional Newton on (psi_A, psi_B) = 0 with finite-difference Jacobian."""
    try:
        cps = label_at(family, pt, window)
        lab = {p.label: p for p in cps}
        states = []
        for br, idx in ((A, ia), (B, ib)):
            si, sj = lab[br.label[0]], lab[br.label[1]]
            dn = (sj.y[0] - si.y[0], sj.y[1] - si.y[1])
            states.append((_PairState(tuple(pt), si, sj, {"u": _orient_like(si.unstable_vector, dn),
                                                         "s": _orient_like(sj.stable_vector, (-dn[0], -dn[1]))},
                                      others=_others(cps, si, sj)),
                           br.seps[idx]))
        x = np.asarray(pt, dtype=float)
        h = 1e-6
        for _ in range(8):
            F = np.array([_advance(family, s, x, sep, controls, 1.0).psi for s, sep in states])
            if float(np.max(np.abs(F))) < 1e-10:
                break
            J = np.zeros((2, 2))
            for k in range(2):
                e = np.zeros(2)
                e[k] = h
                Fp = np.array([_advance(family, s, x + e, sep, controls, 1.0).psi for s, sep in states])
                J[:, k] = (Fp - F) / h
            x = x - np.linalg.solve(J, F)
        F = np.array([_advance(family, s, x, sep, controls, 1.0).psi for s, sep in states])
        if float(np.hypot(*(x - pt))) > 0.1:
            return pt, math.nan
        return x, float(np.max(np.abs(F)))
    except Exception:
        return pt, math.nan


def compute_locus(family: GeneratingFamily, region: Sequence[float] = (-2.0, 2.0, -2.0, 2.0),
                  circle_n: int = 720, grid: int = 41, circle_radius: float | None = None,
                  controls: FlowControls = DEFAULT_CONTROLS, window: Sequence[float] = DEFAULT_WINDOW,
                  steps: StepControls | None = None, caustic: Caustic | None = None,
                  workers: int | None = None, relabel: bool = True) -> BifurcationDiagram:
    """Seed from a boundary circle scan and an interior grid, trace, merge and intersect."""
    region = tuple(float(v) for v in region)
    steps = steps or StepControls.for_region(region)
    if caustic is None:
        caustic = trace_caustic(family, window)
    center = (0.5 * (region[0] + region[1]), 0.5 * (region[2] + region[3]))
    r = circle_radius or 0.95 * 0.5 * min(region[1] - region[0], region[3] - region[2])
    seeds: list[Seed] = []
    flags: list[str] = []
    if circle_n:
        scan = scan_circle(family, r, circle_n, controls=controls, window=window, center=center, workers=workers)
        for z in scan.zeros:
            seeds.append(Seed(z.x, z.pair, ("+", "+"), "circle", z.si, z.sj, z.orient, z.others))
    if grid:
        seeds.extend(_grid_seeds(family, region, grid, controls, window, workers))
    branches: list[BifurcationBranch] = []
    pending = list(seeds)
    while pending:
        batch = []
        for s in pending:
            if any(polyline_distance(b.points, s.x) < 2.0 * steps.initial for b in branches):
                continue
            batch.append(s)
        if not batch:
            break
        # trace the first uncovered seed, then re-filter the rest against the new branch
        first = batch[0]
        res = _trace_job((family, first, steps, controls, region, caustic, window))
        if isinstance(res, str):
            flags.append(res)
        else:
            res.branch_id = len(branches)
            if relabel:
                res = relabel_branch(family, res, first, window)
            if not any(_hausdorff(res.points, b.points) < steps.initial for b in branches):
                branches.append(res)
        pending = batch[1:]
    inter = find_intersections(family, branches, controls, window,
                               exclude=caustic.vertices.tolist(), exclude_radius=2.0 * steps.initial)
    meta = {"seeds": len(seeds), "circle_radius": r, "circle_n": circle_n, "grid": grid, "flags": flags}
    return BifurcationDiagram(family.name, region, branches, inter, caustic, steps.initial, meta)


def relabel_branch(family: GeneratingFamily, branch: BifurcationBranch, seed: Seed,
                   window: Sequence[float] = DEFAULT_WINDOW) -> BifurcationBranch:
    """Give the branch the labels continued from the reference point at its seed."""
    if family.kind is FamilyKind.FOLD:
        return branch
    try:
        ref = label_at(family, seed.x, window)
    except Exception:
        return branch
    sad = [p for p in ref if p.cls is PointClass.SADDLE]
    if len(sad) < 2:
        return branch
    li = min(sad, key=lambda p: p.distance(seed.si)).label
    lj = min(sad, key=lambda p: p.distance(seed.sj)).label
    if li != lj:
        branch.label = (li, lj)
    return branch


