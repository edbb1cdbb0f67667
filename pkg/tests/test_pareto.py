import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from directive_dse.pareto import (
    BELOW_MIN, PAPER_WEIGHTS, FrontierEntry, Objectives, ParetoFrontier, ResourceRatios, ResourceWeights,
    build_frontier, dominates, elbow_point, frontier_hypervolume, hypervolume, nondominated, project_resource,
    update_frontier, weighted_resource)

from oracles import brute_nondominated, union_area

F2 = build_frontier([((10, 0.5), "a"), ((20, 0.3), "b")])


@pytest.mark.parametrize("r, expected", [
    (ResourceRatios(0.5, 0.5, 0.5, 0.5), 0.5),
    (ResourceRatios(0, 0, 0, 0), 0.0),
    (ResourceRatios(1, 1, 1, 1), 1.0),
])
def test_weighted_resource(r, expected):
    assert weighted_resource(r, PAPER_WEIGHTS) == pytest.approx(expected, abs=1e-12)


def test_weights_checked():
    with pytest.raises(ValueError):
        ResourceWeights(0, 0, 0, 0).check()
    with pytest.raises(ValueError):
        ResourceWeights(-1, 1, 1, 1).check()


def test_dominance_is_strict():
    assert dominates((10, 0.2), (20, 0.4))
    assert not dominates((10, 0.4), (20, 0.2))
    assert not dominates((10, 0.2), (10, 0.2))
    assert not dominates((10, 0.2), (10, 0.4))


def test_insert_into_empty():
    f, pushed = update_frontier(ParetoFrontier(), (3.0, 1.0), "x")
    assert pushed and f.entries == (FrontierEntry(3.0, 1.0, "x"),)


def test_insert_between():
    f, pushed = update_frontier(F2, (15, 0.4), "c")
    assert pushed and [e.point_id for e in f] == ["a", "c", "b"]


def test_insert_dominating_all():
    f, pushed = update_frontier(F2, (5, 0.2), "d")
    assert pushed and f.objectives() == [Objectives(5, 0.2)]


def test_dominated_and_duplicate_not_pushed():
    assert update_frontier(F2, (25, 0.4))[1] is False
    assert update_frontier(F2, (10, 0.5))[1] is False


def test_ties_keep_the_better_entry():
    f, pushed = update_frontier(F2, (10, 0.45), "c")
    assert pushed and f.objectives() == [(10, 0.45), (20, 0.3)]
    assert update_frontier(F2, (12, 0.5))[1] is False
    f, pushed = update_frontier(F2, (20, 0.25), "e")
    assert pushed and f.objectives() == [(10, 0.5), (20, 0.25)]


def test_projection():
    assert project_resource(F2, 15) == pytest.approx(0.4)
    assert project_resource(F2, 10) == 0.5
    assert project_resource(F2, 5) is BELOW_MIN
    assert project_resource(F2, 99) == 0.3
    with pytest.raises(ValueError):
        project_resource(ParetoFrontier(), 1.0)


def test_hypervolume_examples():
    assert hypervolume([(10, 0.5)], (20, 1.0)) == pytest.approx(5.0)
    assert hypervolume([], (20, 1.0)) == 0.0
    assert hypervolume([(10, 0.5), (15, 0.2)], (20, 1.0)) == pytest.approx(6.5)
    assert hypervolume([(25, 0.1)], (20, 1.0)) == 0.0


pairs = st.lists(st.tuples(st.integers(1, 12), st.integers(0, 12)), min_size=0, max_size=40)


@settings(max_examples=300, deadline=None)
@given(pairs)
def test_frontier_matches_brute_force_with_ties(pts):
    f = build_frontier(((a, b / 4), str(i)) for i, (a, b) in enumerate(pts))
    assert [tuple(o) for o in f.objectives()] == brute_nondominated([(a, b / 4) for a, b in pts])
    assert nondominated([(a, b / 4) for a, b in pts]) == [tuple(o) for o in f.objectives()]
    lats = [e.latency for e in f]
    ress = [e.resource for e in f]
    assert all(x < y for x, y in zip(lats, lats[1:]))
    assert all(x > y for x, y in zip(ress, ress[1:]))


@settings(max_examples=200, deadline=None)
@given(pairs)
def test_hypervolume_matches_union_area_and_is_monotone(pts):
    ref = (13, 3.5)
    f, last = ParetoFrontier(), 0.0
    for a, b in pts:
        f, _ = update_frontier(f, (a, b / 4))
        hv = frontier_hypervolume(f, ref)
        assert hv >= last - 1e-12
        last = hv
    assert last == pytest.approx(union_area([(a, b / 4) for a, b in pts], ref), abs=1e-9)


def test_csv_round_trip():
    f = build_frontier([((0.1 + i, 1.0 / (i + 1)), f"id{i}") for i in range(5)])
    text = f.to_csv()
    assert text.splitlines()[0] == "latency_us,weighted_resource,point_id"
    assert ParetoFrontier.from_csv(text) == f


def test_elbow_point():
    f = build_frontier([((1, 10), "a"), ((2, 2), "b"), ((10, 1), "c")])
    assert elbow_point(f).point_id == "b"
    assert elbow_point(build_frontier([((1, 1), "only")])).point_id == "only"
    # rescaling an axis must not move the elbow
    g = build_frontier([((100, 10), "a"), ((200, 2), "b"), ((1000, 1), "c")])
    assert elbow_point(g).point_id == "b"
