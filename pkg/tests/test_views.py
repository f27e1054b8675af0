import random

import pytest

from epimc.runs import Point, make_run, make_system
from epimc.views import (
    ViewPolicy,
    ViewPolicyError,
    build_index,
    export_graph,
    g_reachable,
    reachable_set,
)

from tests.helpers import bfs_reachable, random_model, singleton_class_pairs


def small_system():
    growing = make_run(
        "g", horizon=3, wake_up=[0, 0], initial_state=["a", "b"],
        events=[
            (0, 0, "send", 1, "m1"), (0, 1, "receive", 0, "m1"),
            (1, 0, "send", 1, "m2"), (1, 1, "receive", 0, "m2"),
            (2, 0, "send", 1, "m3"), (2, 1, "receive", 0, "m3"),
        ],
    )
    return make_system(2, 3, [growing])


def test_trivial_policy_gives_one_class_per_agent():
    system = small_system()
    index = build_index(system, ViewPolicy.trivial())
    for agent in (0, 1):
        assert len(index.classes_by_agent[agent]) == 1
        assert index.classes_by_agent[agent][0] == frozenset(system.points)


def test_complete_history_singleton_classes_when_histories_grow():
    system = small_system()
    index = build_index(system, ViewPolicy.complete_history())
    for agent in (0, 1):
        assert all(len(cls) == 1 for cls in index.classes_by_agent[agent])


def test_classes_match_pairwise_history_comparison():
    rng = random.Random(7)
    for _ in range(20):
        model = random_model(rng)
        if model.policy.kind != "complete":
            continue
        for agent in model.system.agents:
            expected_pairs = singleton_class_pairs(model, agent)
            got_pairs = set()
            for cls in model.index.classes_by_agent[agent]:
                members = sorted(cls)
                for i, a in enumerate(members):
                    for b in members[i + 1:]:
                        got_pairs.add((a, b))
            assert got_pairs == expected_pairs


def test_classes_partition_the_points():
    rng = random.Random(11)
    for _ in range(20):
        model = random_model(rng)
        for agent in model.system.agents:
            classes = model.index.classes_by_agent[agent]
            union = set()
            total = 0
            for cls in classes:
                total += len(cls)
                union |= cls
            assert union == set(model.system.points)
            assert total == len(model.system.points)


def test_complete_history_refines_every_policy():
    rng = random.Random(13)
    for _ in range(15):
        model = random_model(rng)
        complete = build_index(model.system, ViewPolicy.complete_history())
        for agent in model.system.agents:
            for cls in complete.classes_by_agent[agent]:
                target = model.index.class_of(agent, min(cls))
                assert cls <= target


def test_inconsistent_projection_is_rejected_naming_two_points():
    # an eventless run repeats the same history at every time, so a
    # projection that is not a function of the history gets caught
    quiet = make_run("q", horizon=2, wake_up=[0], initial_state=["s"])
    system = make_system(1, 2, [quiet])
    calls = []

    def unstable(history):
        calls.append(history)
        return len(calls)  # different answer every call

    with pytest.raises(ViewPolicyError) as err:
        build_index(system, ViewPolicy.local_state("unstable", unstable))
    assert "@" in str(err.value)


def test_g_reachable_zero_steps_and_singleton_group():
    system = small_system()
    index = build_index(system, ViewPolicy.complete_history())
    pt = Point("g", 1)
    assert g_reachable(index, pt, pt, (0,), max_steps=0)
    assert not g_reachable(index, pt, Point("g", 2), (0,), max_steps=5)


def test_reachable_set_under_trivial_and_singleton_class_policies():
    system = small_system()
    trivial = build_index(system, ViewPolicy.trivial())
    start = Point("g", 1)
    assert reachable_set(trivial, start, (0, 1)) == frozenset(system.points)
    complete = build_index(system, ViewPolicy.complete_history())
    # strictly growing histories give singleton classes, hence singleton closures
    assert reachable_set(complete, start, (0, 1)) == frozenset({start})


def test_reachable_set_matches_bfs_oracle():
    rng = random.Random(17)
    for _ in range(15):
        model = random_model(rng)
        group = tuple(model.system.agents)
        start = model.system.points[0]
        expected = bfs_reachable(model, start, group)
        assert reachable_set(model.index, start, group) == expected


def test_reachable_set_contains_start_and_is_a_fixed_point():
    rng = random.Random(19)
    for _ in range(10):
        model = random_model(rng)
        group = tuple(model.system.agents)
        for start in model.system.points[:3]:
            closure = reachable_set(model.index, start, group)
            assert start in closure
            expanded = set(closure)
            for pt in closure:
                for agent in group:
                    expanded |= model.index.class_of(agent, pt)
            assert expanded == set(closure)


def test_reachable_set_monotone_in_group():
    rng = random.Random(23)
    for _ in range(10):
        model = random_model(rng)
        agents = list(model.system.agents)
        start = model.system.points[-1]
        small = reachable_set(model.index, start, agents[:1])
        large = reachable_set(model.index, start, agents)
        assert small <= large
        one_step = model.index.class_of(agents[0], start)
        assert one_step <= small


def test_export_graph_deterministic_and_labelled():
    system = small_system()
    index = build_index(system, ViewPolicy.trivial())
    text1 = export_graph(index, (0, 1))
    text2 = export_graph(index, (0, 1))
    assert text1 == text2
    assert 'label="p0"' in text1 and 'label="p1"' in text1
    empty = export_graph(index, ())
    assert "--" not in empty and '"g@0";' in empty
