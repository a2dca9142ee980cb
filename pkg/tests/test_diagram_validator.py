from __future__ import annotations

import pytest

from bifurcate.bifurcation_tracer import BifurcationDiagram, compute_locus
from bifurcate.diagram_validator import (ALLOWED_LETTERS, NotUmbilic, UnlabeledDiagram, classify_topology,
                                         crossing_case, summarize, validate)
from bifurcate.field_models import FamilyKind, GeneratingFamily
from bifurcate.reference_diagrams import (FIXTURE_STEP, LETTER_FIXTURES, bezier, branch_from_geometry,
                                          case_fixture, fixture_caustic, letter_fixture, rotate_fixture)

LETTERS = sorted(LETTER_FIXTURES)


def _diagram(branches):
    return BifurcationDiagram("test", (0.0, 5.5, 0.0, 5.0), branches, [], fixture_caustic(), FIXTURE_STEP)


def test_catalog_has_fourteen_letters_and_eight_allowed():
    assert LETTERS == list("ABCDEFGHIJKLMN")
    assert ALLOWED_LETTERS == frozenset("ABCDGLMN")


@pytest.mark.parametrize("letter", LETTERS)
def test_letter_fixture_classifies_to_itself(letter):
    d = letter_fixture(letter)
    topo = classify_topology(d)
    assert topo.letter == letter
    assert topo.allowed is (letter in "ABCDGLMN")
    assert topo.case is None
    assert validate(d) == []


@pytest.mark.parametrize("letter", LETTERS)
@pytest.mark.parametrize("turns", [1, 2])
def test_classification_is_invariant_under_side_rotation(letter, turns):
    assert classify_topology(rotate_fixture(letter_fixture(letter), turns)).letter == letter


@pytest.mark.parametrize("case, rules, allowed", [
    ("a", {}, True),
    ("b", {}, True),
    ("c", {}, True),
    ("d", {"R5": 1}, False),
    ("e", {"R1": 1, "R6": 1}, False),
])
def test_crossing_cases(case, rules, allowed):
    d = case_fixture(case)
    assert summarize(validate(d)) == rules
    topo = classify_topology(d)
    assert topo.case == case
    assert topo.allowed is allowed


def test_case_c_needs_the_extra_branch():
    d = case_fixture("c", extra=False)
    assert summarize(validate(d)) == {"R7": 1}
    assert not classify_topology(d).allowed


def test_same_component_crossing_needs_the_same_separatrix_pair():
    assert validate(case_fixture("a", seps=[("+", "+"), ("+", "+")])) == []
    v = validate(case_fixture("a", seps=[("+", "+"), ("+", "-")]))
    assert [x.rule for x in v] == ["R4"]
    assert v[0].location is not None and v[0].branches == (0, 1)


def test_crossing_case_table():
    assert crossing_case(("s1", "s2"), ("s1", "s2")) == "a"
    assert crossing_case(("s1", "s2"), ("s1", "s3")) == "b"
    assert crossing_case(("s1", "s2"), ("s2", "s3")) == "c"
    assert crossing_case(("s1", "s3"), ("s2", "s3")) == "d"
    assert crossing_case(("s1", "s2"), ("s2", "s1")) == "e"


def test_overlapping_opposite_branches_violate_r1():
    cau = fixture_caustic()
    p = bezier(LETTER_FIXTURES["A"][0])
    b0 = branch_from_geometry(p, cau, 0)
    q = p.copy()
    q[:, 1] += 0.01
    b1 = branch_from_geometry(q, cau, 1, label=(b0.label[1], b0.label[0]))
    rules = summarize(validate(_diagram([b0, b1])))
    assert rules.get("R1") == 1


def test_endpoint_on_target_side_violates_r2():
    cau = fixture_caustic()
    p = bezier(LETTER_FIXTURES["A"][0])
    good = branch_from_geometry(p, cau, 0)
    bad = branch_from_geometry(p, cau, 0, label=(good.label[1], good.label[0]))
    assert validate(_diagram([good])) == []
    (v,) = validate(_diagram([bad]))
    assert v.rule == "R2" and v.branches == (0,)
    assert v.to_dict()["location"] == [3.5, 2.15]


def test_unlabeled_branches_are_rejected():
    d = letter_fixture("A")
    d.branches[0].label = ("unlabeled", "s1")
    with pytest.raises(UnlabeledDiagram):
        validate(d)
    with pytest.raises(UnlabeledDiagram):
        classify_topology(d)


def test_non_umbilic_caustic_is_rejected():
    d = compute_locus(GeneratingFamily(FamilyKind.ELLIPTIC), circle_n=90, grid=0)
    assert validate(d) == []
    with pytest.raises(NotUmbilic):
        classify_topology(d)


def test_computed_perturbed_diagram_passes():
    d = compute_locus(GeneratingFamily(FamilyKind.PERTURBED), circle_n=180, grid=11)
    assert validate(d) == []
    assert validate(BifurcationDiagram.from_dict(d.to_dict())) == []
