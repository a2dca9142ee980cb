"""End-to-end acceptance checks, one test per criterion.

Each test prints a ``criterion N: PASS|FAIL`` line with the measured error,
its tolerance and the wall time against the runtime budget. The budget is
part of the verdict.
"""
from __future__ import annotations

import math
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from bifurcate.bifurcation_tracer import (BifurcationDiagram, EndpointKind, StepControls, compute_locus,
                                          scan_circle, trace_branch)
from bifurcate.caustic import arc_points_at, trace_caustic
from bifurcate.critical_points import PointClass, find_critical_points, label_at, points_by_label
from bifurcate.diagram_validator import ALLOWED_LETTERS, classify_topology, summarize, validate
from bifurcate.field_models import FamilyKind, GeneratingFamily, eval_field, polar_field
from bifurcate.flow_engine import integrate, saddle_manifold
from bifurcate.integrator import Termination
from bifurcate.reference_diagrams import LETTER_FIXTURES, case_fixture, letter_fixture

ROOT = Path(__file__).resolve().parents[1]
FOLD = GeneratingFamily(FamilyKind.FOLD)
CUSP = GeneratingFamily(FamilyKind.CUSP)
ELLIPTIC = GeneratingFamily(FamilyKind.ELLIPTIC)
PERTURBED = GeneratingFamily(FamilyKind.PERTURBED)
RAYS = (0.0, 2 * math.pi / 3, 4 * math.pi / 3)
CUSP_K = (4.0 / 3.0) * math.sqrt(2.0 / 3.0)

RESULTS: list[str] = []
# diagrams built under criteria 3 and 6, validated under criterion 8
COMPUTED: dict[str, BifurcationDiagram] = {}


def _gap(a: float, b: float) -> float:
    d = abs(a - b) % (2 * math.pi)
    return min(d, 2 * math.pi - d)


def _report(capsys, n: int, ok: bool, detail: str, elapsed: float, budget: float | None) -> bool:
    in_time = budget is None or elapsed < budget
    verdict = "PASS" if ok and in_time else "FAIL"
    limit = f"limit {budget:g}s" if budget is not None else "no limit"
    line = f"criterion {n}: {verdict} {detail}; {elapsed:.2f}s ({limit})"
    RESULTS.append(line)
    with capsys.disabled():
        print("\n" + line)
    return ok and in_time


def test_criterion_1_fold_has_no_bifurcation_locus(capsys):
    t0 = time.perf_counter()
    bad_classes = 0
    worst = 0.0
    missing = 0
    for x1 in np.linspace(0.05, 2.0, 20):
        for x2 in np.linspace(-2.0, 2.0, 20):
            x = (float(x1), float(x2))
            pts = label_at(FOLD, x)
            if sorted(p.cls.value for p in pts) != ["saddle", "unstable_node"]:
                bad_classes += 1
                continue
            by = points_by_label(pts)
            line = None
            for which in ("stable+", "stable-"):
                tr = saddle_manifold(FOLD, x, by["s1"], which, targets=pts)
                if tr.termination is Termination.CONVERGED and tr.target == "n":
                    line = tr
            if line is None:
                missing += 1
                continue
            # image of the line under y -> grad f; the segment joins (0, x2) to (x1, x2)
            g = FOLD.gradient(np.asarray(line.y1), np.asarray(line.y2))
            u, v = np.asarray(g[0], dtype=float), np.asarray(g[1], dtype=float)
            off = np.hypot(np.clip(u, 0.0, x1) - u, v - x2)
            worst = max(worst, float(off.max()))
    elapsed = time.perf_counter() - t0
    ok = bad_classes == 0 and missing == 0 and worst < 1e-8
    detail = (f"400 points, wrong classes {bad_classes}, missing node->saddle lines {missing}, "
              f"segment deviation {worst:.3g} (tol 1e-8)")
    assert _report(capsys, 1, ok, detail, elapsed, 5.0)


def test_criterion_2_cusp_caustic_and_counts(capsys):
    t0 = time.perf_counter()
    caustic = trace_caustic(CUSP)
    rel = 0.0
    sampled = []
    for x2 in np.linspace(0.04, 2.0, 50):
        for arc in caustic.arcs:
            for p in arc_points_at(CUSP, arc, 1, float(x2)):
                sampled.append(p)
                exact = CUSP_K * x2 ** 1.5
                rel = max(rel, abs(abs(p[0]) - exact) / exact)
    # both branches at every sampled height
    n_sampled = len(sampled)
    on_bad = 0
    for p in sampled:
        pts = find_critical_points(CUSP, (float(p[0]), float(p[1])))
        if len(pts) != 2 or sum(q.cls.degenerate for q in pts) != 1:
            on_bad += 1
    wrong = 0
    checked = 0
    for x1 in np.linspace(-2.0, 2.0, 50):
        for x2 in np.linspace(-1.0, 2.0, 50):
            x = (float(x1), float(x2))
            if caustic.distance(x) < 1e-4:
                continue
            checked += 1
            inside = x2 > 0.0 and abs(x1) < CUSP_K * x2 ** 1.5
            pts = find_critical_points(CUSP, x)
            if len(pts) != (3 if inside else 1) or any(q.cls.degenerate for q in pts):
                wrong += 1
    elapsed = time.perf_counter() - t0
    ok = n_sampled == 100 and rel < 1e-6 and on_bad == 0 and wrong == 0
    detail = (f"{n_sampled} caustic samples at 50 heights, max rel error {rel:.3g} (tol 1e-6); "
              f"on-branch miscounts {on_bad}; grid misclassified {wrong}/{checked} outside 1e-4 buffer")
    assert _report(capsys, 2, ok, detail, elapsed, 30.0)


def test_criterion_3_umbilic_rays(capsys):
    t0 = time.perf_counter()
    per_radius = []
    counts = []
    for r in (0.25, 1.0, 2.0):
        res = scan_circle(ELLIPTIC, r, n=360, pair=(1, 2))
        counts.append(len(res.zeros))
        per_radius.append(sorted(z.alpha % (2 * math.pi) for z in res.zeros))
    ray_err = max((min(_gap(a, ray) for a in angles) for angles in per_radius for ray in RAYS), default=math.inf)
    spread = 0.0
    if all(len(a) == 3 for a in per_radius):
        for k in range(3):
            spread = max(spread, max(_gap(a[k], per_radius[0][k]) for a in per_radius))
    else:
        spread = math.inf
    COMPUTED["elliptic"] = compute_locus(ELLIPTIC, circle_n=180, grid=11)
    elapsed = time.perf_counter() - t0
    ok = counts == [3, 3, 3] and ray_err < 1e-3 and spread < 1e-4
    detail = (f"zeros per radius {counts}, max distance to rays {ray_err:.3g} rad (tol 1e-3), "
              f"spread across radii {spread:.3g} rad (tol 1e-4)")
    assert _report(capsys, 3, ok, detail, elapsed, 60.0)


def test_criterion_4_rotation_scaling_symmetry(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(20261015)
    phase_err = 0.0
    for a in np.linspace(-math.pi, math.pi, 100, endpoint=False):
        x = (math.cos(a), math.sin(a))
        for p in find_critical_points(ELLIPTIC, x):
            d = (math.atan2(p.y[1], p.y[0]) + a / 2) % math.pi
            phase_err = max(phase_err, min(d, math.pi - d))
    scale_err = 0.0
    tried = 0
    while tried < 20:
        x = rng.uniform(-1.5, 1.5, 2)
        y0 = rng.uniform(-1.0, 1.0, 2)
        lam = float(rng.uniform(0.5, 2.0))
        a = integrate(ELLIPTIC, tuple(x), tuple(y0), t_end=0.5, dense=True)
        b = integrate(ELLIPTIC, tuple(x / lam**2), tuple(y0 / lam), t_end=0.5 * lam, dense=True)
        if a.termination is not Termination.MAX_TIME or b.termination is not Termination.MAX_TIME:
            continue  # left the window; draw again
        tried += 1
        for s in np.linspace(0.0, 0.5 * lam, 11):
            ya, yb = a.at(s / lam), b.at(s)
            scale_err = max(scale_err, math.hypot(ya[0] / lam - yb[0], ya[1] / lam - yb[1]))
    cart_err = 0.0
    polar_err = 0.0
    for _ in range(1000):
        x = tuple(rng.uniform(-2.0, 2.0, 2))
        rho, theta = float(rng.uniform(0.05, 3.0)), float(rng.uniform(0.0, 2 * math.pi))
        y = (rho * math.cos(theta), rho * math.sin(theta))
        f_plus = eval_field(ELLIPTIC, x, y)
        f_minus = eval_field(ELLIPTIC, x, (-y[0], -y[1]))
        cart_err = max(cart_err, abs(f_minus[0] - f_plus[0]), abs(f_minus[1] - f_plus[1]))
        p_plus = polar_field(x, (rho, theta))
        p_minus = polar_field(x, (rho, theta + math.pi))
        # theta + pi is rounded; scale by the theta-derivative bound times the angle magnitude
        r = math.hypot(*x)
        cond = (3 * rho * rho + 3 * rho + r + r / rho) * (theta + math.pi)
        polar_err = max(polar_err, max(abs(p_minus[0] + p_plus[0]), abs(p_minus[1] + p_plus[1])) / cond)
    elapsed = time.perf_counter() - t0
    eps = np.finfo(float).eps
    ok = phase_err < 1e-9 and scale_err < 1e-6 and cart_err == 0.0 and polar_err <= 4 * eps
    detail = (f"phase error {phase_err:.3g} (tol 1e-9); scaling error {scale_err:.3g} (tol 1e-6); "
              f"antipodal error cartesian {cart_err:.3g} (tol 0), polar {polar_err / eps:.3g} eps "
              f"relative to angle rounding (tol 4 eps)")
    assert _report(capsys, 4, ok, detail, elapsed, 10.0)


def _perturbed_axis_formulas(x1: float) -> list[tuple[float, float]]:
    out = []
    if x1 <= 0.75:
        w = math.sqrt(0.75 - x1)
        out += [(0.5, w), (0.5, -w)]
    if x1 >= -0.25:
        w = math.sqrt(1.0 + 4.0 * x1)
        out += [((-1.0 - w) / 2.0, 0.0), ((-1.0 + w) / 2.0, 0.0)]
    return out


def test_criterion_5_perturbed_closed_forms(capsys):
    t0 = time.perf_counter()
    worst = 0.0
    count_bad = 0
    for x1 in np.linspace(-0.2, 1.5, 50):
        want = _perturbed_axis_formulas(float(x1))
        got = [p.y for p in find_critical_points(PERTURBED, (float(x1), 0.0))]
        if len(got) != len(want):
            count_bad += 1
            continue
        for w in want:
            worst = max(worst, min(math.hypot(g[0] - w[0], g[1] - w[1]) for g in got))

    def node_class(x1: float) -> PointClass:
        w = math.sqrt(1.0 + 4.0 * x1)
        target = ((-1.0 + w) / 2.0, 0.0)
        pts = find_critical_points(PERTURBED, (x1, 0.0))
        return min(pts, key=lambda p: p.distance(target)).cls

    before, after = node_class(0.75 - 1e-3), node_class(0.75 + 1e-3)
    sn_at = []
    for x1 in np.linspace(-0.26, -0.24, 201):
        if any(p.cls is PointClass.SADDLE_NODE for p in find_critical_points(PERTURBED, (float(x1), 0.0))):
            sn_at.append(float(x1))
    sn_err = max((abs(v + 0.25) for v in sn_at), default=math.inf)
    elapsed = time.perf_counter() - t0
    ok = (count_bad == 0 and worst < 1e-10 and before is PointClass.UNSTABLE_NODE
          and after is PointClass.SADDLE and sn_at and sn_err < 1e-3)
    detail = (f"50 values, count mismatches {count_bad}, max formula error {worst:.3g} (tol 1e-10); "
              f"node class {before.value} -> {after.value} across 3/4+-1e-3; "
              f"saddle-node at {len(sn_at)} grid values, max offset from -1/4 {sn_err:.3g} (tol 1e-3)")
    assert _report(capsys, 5, ok, detail, elapsed, 10.0)


def test_criterion_6_analytic_connection(capsys):
    t0 = time.perf_counter()
    p = (-1.0 + math.sqrt(5.0)) / 2.0
    q = (-1.0 - math.sqrt(5.0)) / 2.0

    def exact(t: float) -> float:
        e = math.exp((p - q) * t)
        return p * q * (1.0 - e) / (q - p * e)

    err = 0.0
    for direction, sign in (("forward", 1.0), ("backward", -1.0)):
        tr = integrate(PERTURBED, (1.0, 0.0), (0.0, 0.0), direction, t_end=8.0, dense=True)
        for t in np.linspace(0.0, sign * float(abs(tr.t[-1])), 801):
            y = tr.at(float(t))
            err = max(err, abs(y[0] - exact(float(t))), abs(y[1]))
    region = (-2.0, 2.0, -2.0, 2.0)
    caustic = trace_caustic(PERTURBED)
    branch = trace_branch(PERTURBED, (1.0, 0.0), ("n", "s3"), region=region, caustic=caustic)
    step = StepControls.for_region(region).initial
    inner = [e for e in branch.endpoints if e.kind is not EndpointKind.REGION_EXIT]
    dist = min((math.hypot(e.point[0] - 0.75, e.point[1]) for e in inner), default=math.inf)
    off_axis = float(np.abs(branch.points[:, 1]).max())
    COMPUTED["perturbed"] = BifurcationDiagram(PERTURBED.name, region, [branch], [], caustic, step)
    elapsed = time.perf_counter() - t0
    ok = err < 1e-6 and off_axis < 1e-9 and dist < 2 * step
    detail = (f"sup error {err:.3g} (tol 1e-6); branch |x2| max {off_axis:.3g}; "
              f"inner endpoint {dist:.3g} from (3/4,0) (tol {2 * step:.3g} = 2 steps)")
    assert _report(capsys, 6, ok, detail, elapsed, 20.0)


def test_criterion_7_far_field_stability(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    base = sorted(z.alpha % (2 * math.pi) for z in scan_circle(ELLIPTIC, 3.0, n=360).zeros)
    counts = []
    worst = 0.0
    for _ in range(5):
        rad, phi = 0.5 * math.sqrt(rng.uniform()), rng.uniform(0.0, 2 * math.pi)
        center = (rad * math.cos(phi), rad * math.sin(phi))
        sigma = float(rng.uniform(0.1, 0.3))
        eps = float(rng.uniform(-0.05, 0.05))
        fam = GeneratingFamily.bumped(FamilyKind.ELLIPTIC, center, sigma, eps)
        zeros = [z.alpha for z in scan_circle(fam, 3.0, n=360).zeros]
        counts.append(len(zeros))
        for a in zeros:
            worst = max(worst, min(_gap(a, b) for b in base))
    elapsed = time.perf_counter() - t0
    ok = len(base) == 3 and counts == [3] * 5 and worst < 0.1
    detail = f"zeros per perturbation {counts}, max shift {worst:.3g} rad (tol 0.1)"
    assert _report(capsys, 7, ok, detail, elapsed, 180.0)


def test_criterion_8_validator_soundness(capsys):
    if set(COMPUTED) != {"elliptic", "perturbed"}:
        pytest.skip("needs the diagrams of criteria 3 and 6 from the same session")
    t0 = time.perf_counter()
    wrong = [k for k in sorted(LETTER_FIXTURES) if classify_topology(letter_fixture(k)).letter != k]
    allowed = {k for k in LETTER_FIXTURES if classify_topology(letter_fixture(k)).allowed}
    d_rules = summarize(validate(case_fixture("d")))
    e_rules = summarize(validate(case_fixture("e")))
    computed = {k: summarize(validate(v)) for k, v in sorted(COMPUTED.items())}
    elapsed = time.perf_counter() - t0
    ok = (len(LETTER_FIXTURES) == 14 and not wrong and allowed == set("ABCDGLMN") == set(ALLOWED_LETTERS)
          and "R5" in d_rules and "R6" in e_rules and all(not v for v in computed.values()))
    detail = (f"14 letters misclassified {wrong}, allowed {''.join(sorted(allowed))}; "
              f"case d {d_rules}, case e {e_rules}; computed diagrams {computed}")
    assert _report(capsys, 8, ok, detail, elapsed, 5.0)


def test_criterion_9_report_is_deterministic(capsys, tmp_path):
    t0 = time.perf_counter()
    outs = []
    for k, seed in enumerate(("1", "2")):
        out = tmp_path / f"run{k}"
        env = dict(os.environ, PYTHONHASHSEED=seed)
        proc = subprocess.run([sys.executable, "-m", "bifurcate", "report", "--config", str(ROOT / "configs" / "quick.cfg"),
                               "--out", str(out)], capture_output=True, text=True, env=env)
        assert proc.returncode in (0, 2), proc.stderr
        outs.append(out)
    names = sorted(p.name for p in outs[0].iterdir() if p.suffix in (".csv", ".json"))
    other = sorted(p.name for p in outs[1].iterdir() if p.suffix in (".csv", ".json"))
    differ = [n for n in names if (outs[0] / n).read_bytes() != (outs[1] / n).read_bytes()]
    elapsed = time.perf_counter() - t0
    ok = names == other and len(names) > 0 and not differ
    detail = f"{len(names)} CSV/JSON files compared, differing {differ}"
    assert _report(capsys, 9, ok, detail, elapsed, None)
