from __future__ import annotations

import math

import numpy as np
import pytest

from bifurcate.bifurcation_tracer import (BifurcationDiagram, EndpointKind, compute_locus, reevaluate_residuals,
                                          scan_circle, trace_branch)
from bifurcate.caustic import trace_caustic
from bifurcate.field_models import FamilyKind, GeneratingFamily

FOLD = GeneratingFamily(FamilyKind.FOLD)
CUSP = GeneratingFamily(FamilyKind.CUSP)
ELLIPTIC = GeneratingFamily(FamilyKind.ELLIPTIC)
PERTURBED = GeneratingFamily(FamilyKind.PERTURBED)
RAYS = (0.0, 2 * math.pi / 3, 4 * math.pi / 3)


def _gap(a, b):
    d = abs(a - b) % (2 * math.pi)
    return min(d, 2 * math.pi - d)


def _side(label):
    return int(label[1:]) if label.startswith("s") and label[1:].isdigit() else None


@pytest.fixture(scope="module")
def elliptic_locus():
    return compute_locus(ELLIPTIC, circle_n=180, grid=11)


@pytest.fixture(scope="module")
def perturbed_locus():
    return compute_locus(PERTURBED, circle_n=180, grid=11)


@pytest.mark.parametrize("r", [1.0, 0.25])
def test_elliptic_scan_finds_the_three_rays(r):
    res = scan_circle(ELLIPTIC, r, n=360, pair=(1, 2))
    angles = sorted(res.zero_angles)
    assert len(angles) == 3
    for a, ray in zip(angles, RAYS):
        assert _gap(a, ray) < 1e-6
    assert all(abs(z.psi) < 1e-6 for z in res.zeros)


def test_scan_records_gaps_instead_of_failing():
    res = scan_circle(ELLIPTIC, 1.0, n=36, pair=(1, 2))
    statuses = {s.status for s in res.samples}
    assert "ok" in statuses
    assert any(s.startswith("no_crossing") for s in statuses)
    assert all((s.psi is None) == (s.status != "ok") for s in res.samples)


def test_fold_scan_has_no_zeros():
    res = scan_circle(FOLD, 1.0, n=36)
    assert res.zeros == [] and res.samples == []


def test_scan_rejects_bad_arguments():
    with pytest.raises(ValueError):
        scan_circle(ELLIPTIC, 1.0, n=2)
    with pytest.raises(ValueError):
        scan_circle(ELLIPTIC, 0.0)


def test_perturbed_axis_branch():
    b = trace_branch(PERTURBED, (1.0, 0.0), ("n", "s3"))
    assert b.label == ("n", "s3")
    kinds = {e.kind for e in b.endpoints}
    assert kinds == {EndpointKind.REGION_EXIT, EndpointKind.CAUSTIC_CUSP_VERTEX}
    inner = next(e for e in b.endpoints if e.kind is EndpointKind.CAUSTIC_CUSP_VERTEX)
    step = 0.01 * math.hypot(4.0, 4.0)
    assert math.hypot(inner.point[0] - 0.75, inner.point[1]) < 2 * step
    assert np.abs(b.points[:, 1]).max() < 1e-9
    assert b.residuals.max() < 1e-6


def test_elliptic_branch_is_a_ray_to_the_origin():
    b = trace_branch(ELLIPTIC, (1.0, 0.0), (1, 2))
    kinds = [e.kind for e in b.endpoints]
    assert EndpointKind.REGION_EXIT in kinds and EndpointKind.CAUSTIC_CUSP_VERTEX in kinds
    inner = next(e for e in b.endpoints if e.kind is EndpointKind.CAUSTIC_CUSP_VERTEX)
    assert math.hypot(*inner.point) < 2 * 0.01 * math.hypot(4.0, 4.0)


def test_residuals_survive_independent_reevaluation():
    b = trace_branch(PERTURBED, (1.0, 0.0), ("n", "s3"))
    again = reevaluate_residuals(PERTURBED, b)
    assert not np.isnan(again).any()
    assert again.max() < 1e-6


def test_elliptic_locus_has_three_rays(elliptic_locus):
    d = elliptic_locus
    assert len(d.branches) == 3
    means = []
    for b in d.branches:
        far = b.points[np.hypot(b.points[:, 0], b.points[:, 1]) > 0.05]
        ang = np.arctan2(far[:, 1], far[:, 0])
        assert max(_gap(a, ang[0]) for a in ang) < 1e-4
        means.append(float(ang[0]) % (2 * math.pi))
        assert b.residuals.max() < 1e-6
    for ray in RAYS:
        assert min(_gap(a, ray) for a in means) < 1e-4
    assert d.intersections == []


def test_perturbed_locus_leaves_each_vertex(perturbed_locus):
    d = perturbed_locus
    assert len(d.branches) == 3
    vertices = [tuple(v) for v in d.caustic.vertices.tolist()]
    step = d.step
    hit = set()
    for b in d.branches:
        inner = [e for e in b.endpoints if e.kind is EndpointKind.CAUSTIC_CUSP_VERTEX]
        assert len(inner) == 1
        k = min(range(3), key=lambda i: math.hypot(inner[0].point[0] - vertices[i][0], inner[0].point[1] - vertices[i][1]))
        assert math.hypot(inner[0].point[0] - vertices[k][0], inner[0].point[1] - vertices[k][1]) < 2 * step
        hit.add(k)
        assert b.residuals.max() < 1e-6
    assert hit == {0, 1, 2}


def test_cusp_locus_is_empty():
    d = compute_locus(CUSP, circle_n=60, grid=7)
    assert d.branches == []


def test_diagram_round_trip(perturbed_locus):
    d = perturbed_locus
    back = BifurcationDiagram.from_dict(d.to_dict())
    assert back.to_dict() == d.to_dict()


def test_generic_bump_branch_ends_on_a_fold():
    fam = GeneratingFamily.bumped(FamilyKind.PERTURBED, (0.3, 0.2), 0.3, 0.03)
    res = scan_circle(fam, 3.0, n=120)
    assert len(res.zeros) == 3
    caustic = trace_caustic(fam)
    z = min(res.zeros, key=lambda z: _gap(z.alpha, 0.0))
    b = trace_branch(fam, z.x, z.pair, points=[z.si, z.sj, *z.others], orient=z.orient, caustic=caustic,
                     region=(-3.2, 3.2, -3.2, 3.2))
    ends = [e for e in b.endpoints if e.kind is not EndpointKind.REGION_EXIT]
    assert [e.kind for e in ends] == [EndpointKind.CAUSTIC_FOLD]
    # a branch B_ij never closes on side l_j
    assert ends[0].side != _side(b.label[1])
