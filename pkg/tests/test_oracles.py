"""Point-by-point transcription oracles for the modal operators.

Each oracle quantifies exactly as the operator's definition reads, one
point at a time, with no indexing or batch set arithmetic. Agreement with
the evaluator's class-based fast paths is checked on random models.
"""

import random

from epimc import formulas as fm
from epimc.evaluate import Model, evaluate, make_valuation
from epimc.formulas import parse
from epimc.runs import Point, make_run, make_system
from epimc.views import ViewPolicy

from tests.helpers import random_model, random_valuation


def same_view(model: Model, agent, a, b) -> bool:
    policy = model.policy
    return policy.view_of(model.system.history(agent, a)) == policy.view_of(
        model.system.history(agent, b)
    )


def oracle_know(model: Model, agent, arg):
    return frozenset(
        pt
        for pt in model.system.points
        if all(
            other in arg
            for other in model.system.points
            if same_view(model, agent, pt, other)
        )
    )


def oracle_distributed(model: Model, group, arg):
    return frozenset(
        pt
        for pt in model.system.points
        if all(
            other in arg
            for other in model.system.points
            if all(same_view(model, a, pt, other) for a in group)
        )
    )


def oracle_interval(model: Model, group, eps, arg):
    horizon = model.system.horizon
    know = {a: oracle_know(model, a, arg) for a in group}
    out = set()
    for pt in model.system.points:
        for start in range(0, horizon - eps + 1):
            if not start <= pt.time <= start + eps:
                continue
            if all(
                any(
                    Point(pt.run_id, u) in know[a]
                    for u in range(start, start + eps + 1)
                )
                for a in group
            ):
                out.add(pt)
                break
    return frozenset(out)


def oracle_eventual(model: Model, group, arg):
    horizon = model.system.horizon
    know = {a: oracle_know(model, a, arg) for a in group}
    return frozenset(
        pt
        for pt in model.system.points
        if all(
            any(Point(pt.run_id, u) in know[a] for u in range(horizon + 1))
            for a in group
        )
    )


def oracle_stamped_know(model: Model, agent, stamp, arg):
    know = oracle_know(model, agent, arg)
    out = set()
    for run in model.system.runs:
        readings = [
            t
            for t in range(run.wake_up[agent], model.system.horizon + 1)
            if run.clock_at(agent, t) == stamp
        ]
        if readings and all(Point(run.id, t) in know for t in readings):
            out.update(Point(run.id, t) for t in range(model.system.horizon + 1))
    return frozenset(out)


def test_individual_knowledge_matches_the_quantifier_transcription():
    rng = random.Random(61)
    for _ in range(20):
        model = random_model(rng)
        arg = evaluate(model, fm.Prop("p"))
        for agent in model.system.agents:
            assert evaluate(model, fm.K(agent, fm.Prop("p"))) == oracle_know(
                model, agent, arg
            )


def test_distributed_knowledge_matches_the_joint_view_transcription():
    rng = random.Random(67)
    for _ in range(20):
        model = random_model(rng)
        arg = evaluate(model, fm.Prop("p"))
        group = tuple(model.system.agents)
        assert evaluate(model, fm.D(group, fm.Prop("p"))) == oracle_distributed(
            model, group, arg
        )


def test_interval_everyone_matches_the_quantifier_transcription():
    rng = random.Random(71)
    for _ in range(20):
        model = random_model(rng)
        arg = evaluate(model, fm.Prop("p"))
        group = tuple(model.system.agents)
        for eps in (0, 1, 2):
            if eps > model.system.horizon:
                continue
            assert evaluate(model, fm.EEps(group, eps, fm.Prop("p"))) == (
                oracle_interval(model, group, eps, arg)
            )


def test_eventual_everyone_matches_the_quantifier_transcription():
    rng = random.Random(73)
    for _ in range(20):
        model = random_model(rng)
        arg = evaluate(model, fm.Prop("p"))
        group = tuple(model.system.agents)
        assert evaluate(model, fm.EDiamond(group, fm.Prop("p"))) == oracle_eventual(
            model, group, arg
        )


def test_stamped_knowledge_matches_the_quantifier_transcription():
    rng = random.Random(79)
    done = 0
    while done < 12:
        model = random_model(rng)
        if not model.system.has_clocks:
            continue
        done += 1
        arg = evaluate(model, fm.Prop("p"))
        for agent in model.system.agents:
            for stamp in (0, 1, 2):
                assert evaluate(
                    model, fm.KTime(agent, stamp, fm.Prop("p"))
                ) == oracle_stamped_know(model, agent, stamp, arg)


def test_common_knowledge_on_a_hand_built_chain():
    # three runs forming a chain through alternating classes; the closure
    # of the middle point covers everything, so common knowledge needs the
    # fact everywhere
    runs = []
    for rid, (i0, i1) in (("a", ("x", "u")), ("b", ("x", "v")), ("c", ("y", "v"))):
        runs.append(
            make_run(rid, horizon=0, wake_up=[0, 0], initial_state=[i0, i1])
        )
    system = make_system(2, 0, runs)
    val = make_valuation({"p": {Point("a", 0), Point("b", 0), Point("c", 0)},
                          "q": {Point("a", 0), Point("b", 0)}})
    model = Model(system, val, ViewPolicy.complete_history())
    assert evaluate(model, parse("C{0,1} p")) == model.all_points
    assert evaluate(model, parse("C{0,1} q")) == frozenset()
    # one step of everyone-knows still holds for q at the far end of the chain
    assert evaluate(model, parse("E{0,1} q")) == {Point("a", 0)}
