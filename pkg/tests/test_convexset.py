import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sigcert import (
    Aff,
    Ball,
    Box,
    ConicProgram,
    EmptySetError,
    FullSpace,
    InputError,
    Intersection,
    Polyhedron,
    SamplingFailureError,
    UnboundedSetError,
    bounding_box,
    contains,
    sample_points,
    set_from_json_dict,
    set_to_json_dict,
    support_epigraph,
    support_value,
)
from sigcert.conic import INFEASIBLE, OPTIMAL
from sigcert.convexset import project


def min_t_of_epigraph(X, lam, backend):
    """min { t : support_epigraph(X, lam, t) feasible }, or +inf if infeasible.

    Independent probe of the epigraph constraints, solved as its own conic
    program with lam pinned by equalities.
    """
    prog = ConicProgram()
    lam_vars = prog.add_vars(X.dim)
    t_var = prog.add_var()
    for j, value in zip(lam_vars, lam):
        prog.add_eq(Aff.var(j), float(value))
    support_epigraph(X, prog, lam_vars, t_var)
    prog.minimize(Aff.var(t_var))
    result = backend.solve(prog)
    if result.status == OPTIMAL:
        return float(result.objective)
    if result.status == INFEASIBLE:
        return math.inf
    raise AssertionError(f"unexpected status {result.status}")


# -- support values ---------------------------------------------------------


def test_support_box():
    X = Box([-1.0, -1.0], [1.0, 1.0])
    assert support_value(X, np.array([1.0, 1.0])) == pytest.approx(2.0, abs=1e-12)
    assert support_value(X, np.array([-3.0, 0.5])) == pytest.approx(3.5, abs=1e-12)


def test_support_ball():
    X = Ball([0.0, 0.0], 1.0)
    assert support_value(X, np.array([3.0, 4.0])) == pytest.approx(5.0, abs=1e-12)
    Y = Ball([1.0, -1.0], 2.0)
    assert support_value(Y, np.array([0.0, 1.0])) == pytest.approx(1.0, abs=1e-12)


def test_support_toy_polyhedron(toy_set):
    # direct substitution oracle: x1 = 1 on the segment
    assert support_value(toy_set, np.array([1.5, 0.0])) == pytest.approx(1.5, abs=1e-9)
    assert support_value(toy_set, np.array([0.0, 1.0])) == pytest.approx(1.0, abs=1e-9)


def test_support_fullspace():
    X = FullSpace(2)
    assert support_value(X, np.zeros(2)) == 0.0
    assert support_value(X, np.array([0.0, 1.0])) == math.inf


def test_support_one_sided_box():
    X = Box([0.0], [math.inf])
    assert support_value(X, np.array([-1.0])) == pytest.approx(0.0)
    assert support_value(X, np.array([1.0])) == math.inf
    assert support_value(X, np.array([0.0])) == 0.0


def test_support_unbounded_polyhedron():
    X = Polyhedron([[1.0]], [0.0])  # x <= 0
    assert support_value(X, np.array([-1.0])) == math.inf
    assert support_value(X, np.array([1.0])) == pytest.approx(0.0, abs=1e-9)


def test_support_empty_polyhedron():
    X = Polyhedron([[1.0], [-1.0]], [0.0, -1.0])  # x <= 0 and x >= 1
    with pytest.raises(EmptySetError):
        support_value(X, np.array([1.0]))


def test_support_intersection_of_boxes(backend):
    X = Intersection((Box([-2.0, -2.0], [1.0, 1.0]), Box([-1.0, -3.0], [3.0, 0.5])))
    merged = Box([-1.0, -2.0], [1.0, 0.5])
    rng = np.random.default_rng(0)
    for _ in range(10):
        lam = rng.normal(size=2)
        got = support_value(X, lam, backend)
        want = support_value(merged, lam)
        assert got == pytest.approx(want, abs=1e-7)


def test_support_dimension_mismatch(toy_set):
    with pytest.raises(ValueError):
        support_value(toy_set, np.array([1.0]))


# -- epigraph --------------------------------------------------------------------


def test_epigraph_fullspace(backend):
    X = FullSpace(2)
    assert min_t_of_epigraph(X, np.zeros(2), backend) == pytest.approx(0.0, abs=1e-9)
    assert min_t_of_epigraph(X, np.array([1.0, 0.0]), backend) == math.inf


def test_epigraph_one_sided_box(backend):
    X = Box([0.0], [math.inf])
    assert min_t_of_epigraph(X, np.array([-2.0]), backend) == pytest.approx(0.0, abs=1e-9)
    assert min_t_of_epigraph(X, np.array([2.0]), backend) == math.inf


def test_epigraph_toy_values(toy_set, backend):
    t_min = min_t_of_epigraph(toy_set, np.array([1.5, 0.0]), backend)
    assert t_min == pytest.approx(1.5, abs=1e-7)
    # (lam, t) = ((1.5, 0), 1.4) must be infeasible: check via feasibility program
    prog = ConicProgram()
    lam_vars = prog.add_vars(2)
    t_var = prog.add_var()
    for j, value in zip(lam_vars, [1.5, 0.0]):
        prog.add_eq(Aff.var(j), value)
    prog.add_eq(Aff.var(t_var), 1.4)
    support_epigraph(toy_set, prog, lam_vars, t_var)
    assert backend.solve(prog).status == INFEASIBLE


@pytest.mark.parametrize(
    "X",
    [
        Box([-1.0, 0.5], [2.0, 1.5]),
        Ball([0.5, -0.25], 1.5),
        Polyhedron([[1.0, 1.0], [-1.0, 0.0], [0.0, -1.0]], [1.0, 1.0, 1.0]),
        Intersection((Box([-1.0, -1.0], [1.0, 1.0]), Ball([0.0, 0.0], 1.25))),
    ],
)
def test_epigraph_matches_support(X, backend):
    rng = np.random.default_rng(42)
    for _ in range(5):
        lam = rng.normal(size=2) * 2
        want = support_value(X, lam, backend)
        got = min_t_of_epigraph(X, lam, backend)
        assert got == pytest.approx(want, abs=1e-7)


# -- contains -----------------------------------------------------------------------


def test_contains_examples(toy_set):
    assert contains(Box([-1.0, -1.0], [1.0, 1.0]), np.zeros(2))
    assert contains(toy_set, np.array([1.0, 1.0000001]), tol=1e-6)
    assert not contains(Ball([0.0, 0.0], 1.0), np.array([1.0, 1.0]))
    assert contains(FullSpace(2), np.array([100.0, -100.0]))
    assert not contains(toy_set, np.array([1.0, 1.1]))


# -- sampling ----------------------------------------------------------------------


def test_sample_points_box():
    X = Box([-1.0, 0.0], [1.0, 2.0])
    pts = sample_points(X, 40, seed=3)
    assert pts.shape == (40, 2)
    assert all(contains(X, p, 1e-9) for p in pts)


def test_sample_points_toy_segment(toy_set):
    pts = sample_points(toy_set, 25, seed=1)
    assert pts.shape == (25, 2)
    assert np.max(np.abs(pts[:, 0] - 1.0)) <= 1e-9
    assert all(contains(toy_set, p, 1e-9) for p in pts)


def test_sample_points_ball():
    X = Ball([1.0, 2.0], 0.5)
    pts = sample_points(X, 30, seed=9)
    assert all(contains(X, p, 1e-9) for p in pts)


def test_sample_points_zero_count(toy_set):
    assert sample_points(toy_set, 0, seed=0).shape == (0, 2)


def test_sample_points_deterministic(toy_set):
    a = sample_points(toy_set, 12, seed=5)
    b = sample_points(toy_set, 12, seed=5)
    assert np.array_equal(a, b)


def test_sample_points_unbounded():
    with pytest.raises(UnboundedSetError):
        sample_points(FullSpace(1), 5, seed=0)


def test_sample_points_thin_diagonal_fails():
    # measure-zero diagonal segment not aligned with the box: rejection cannot
    # hit it, and only a handful of corner projections exist
    X = Polyhedron(
        [[1.0, 1.0], [-1.0, -1.0], [1.0, 0.0], [-1.0, 0.0]],
        [0.0, 0.0, 1.0, 1.0],
    )
    with pytest.raises(SamplingFailureError):
        sample_points(X, 10, seed=0)


def test_bounding_box_toy(toy_set):
    lo, hi = bounding_box(toy_set)
    assert lo == pytest.approx([1.0, -1.0], abs=1e-9)
    assert hi == pytest.approx([1.0, 1.0], abs=1e-9)


def test_project_ball(backend):
    X = Ball([0.0, 0.0], 1.0)
    z = project(X, np.array([3.0, 4.0]), backend)
    assert z == pytest.approx([0.6, 0.8], abs=1e-7)


# -- serialization ---------------------------------------------------------------------


def test_json_roundtrip_all_variants(toy_set):
    sets = [
        Box([-1.0, -math.inf], [math.inf, 2.0]),
        toy_set,
        Ball([0.0, 1.0], 2.5),
        Intersection((Box([-1.0], [1.0]), Ball([0.0], 1.0))),
        FullSpace(3),
    ]
    for X in sets:
        data = set_to_json_dict(X)
        Y = set_from_json_dict(data)
        assert type(Y) is type(X)
        assert set_to_json_dict(Y) == data


def test_json_infinity_strings():
    data = {"type": "box", "lower": ["-inf", 0.0], "upper": [1.0, "inf"]}
    X = set_from_json_dict(data)
    assert X.lower[0] == -math.inf
    assert X.upper[1] == math.inf
    assert set_to_json_dict(X)["lower"][0] == "-inf"


def test_json_bad_inputs():
    with pytest.raises(InputError):
        set_from_json_dict({"type": "wedge"})
    with pytest.raises(InputError):
        set_from_json_dict({"type": "box", "lower": [0.0]})
    with pytest.raises(InputError):
        set_from_json_dict({"type": "ball", "center": [0.0], "radius": "wide"})


def test_invalid_constructions():
    with pytest.raises(ValueError):
        Box([1.0], [0.0])
    with pytest.raises(ValueError):
        Ball([0.0], -1.0)
    with pytest.raises(ValueError):
        Intersection((Box([0.0], [1.0]), Box([0.0, 0.0], [1.0, 1.0])))
    with pytest.raises(ValueError):
        Polyhedron([[math.inf]], [1.0])


# -- properties -------------------------------------------------------------------------

box_sets = st.builds(
    lambda lo, width: Box(np.array(lo), np.array(lo) + np.array(width)),
    st.tuples(st.floats(-2, 1), st.floats(-2, 1)).map(list),
    st.tuples(st.floats(0.1, 2), st.floats(0.1, 2)).map(list),
)
ball_sets = st.builds(
    lambda c, r: Ball(np.array(c), r),
    st.tuples(st.floats(-1, 1), st.floats(-1, 1)).map(list),
    st.floats(0.0, 2.0),
)


@settings(max_examples=50, deadline=None)
@given(st.one_of(box_sets, ball_sets), st.integers(0, 1000), st.floats(0.1, 5.0))
def test_property_positive_homogeneity(X, seed, alpha):
    lam = np.random.default_rng(seed).normal(size=2)
    lhs = support_value(X, alpha * lam)
    rhs = alpha * support_value(X, lam)
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.one_of(box_sets, ball_sets), st.integers(0, 1000))
def test_property_subadditivity(X, seed):
    rng = np.random.default_rng(seed)
    lam1 = rng.normal(size=2)
    lam2 = rng.normal(size=2)
    assert support_value(X, lam1 + lam2) <= support_value(X, lam1) + support_value(X, lam2) + 1e-9


def test_property_sampled_points_respect_support(toy_set):
    rng = np.random.default_rng(8)
    pts = sample_points(toy_set, 50, seed=2)
    for _ in range(20):
        lam = rng.normal(size=2)
        assert np.max(pts @ lam) <= support_value(toy_set, lam) + 1e-7
