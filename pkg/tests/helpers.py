"""Shared test fixtures: small random systems and independent oracles.

The oracles here deliberately avoid the library's own fast paths: the
fixed-point oracle enumerates every candidate subset, and the
reachability oracle is a plain breadth-first search over freshly compared
histories.
"""

from __future__ import annotations

import random
from itertools import combinations

from epimc.evaluate import Model, PointSet, evaluate, make_valuation
from epimc.formulas import Formula
from epimc.runs import Point, System, make_run, make_system
from epimc.views import VIEW_PROJECTIONS, ViewPolicy


def random_system(rng: random.Random, max_runs: int = 4, max_horizon: int = 4,
                  max_agents: int = 3) -> System:
    """A small well-formed system with random message traffic."""
    n = rng.randint(2, max_agents)
    horizon = rng.randint(1, max_horizon)
    n_runs = rng.randint(1, max_runs)
    clocked = rng.random() < 0.3
    runs = []
    for ri in range(n_runs):
        wake = [rng.choice((0, 0, 1)) for _ in range(n)]
        wake = [min(w, horizon) for w in wake]
        init = [rng.choice(("x", "y")) + str(a) for a in range(n)]
        events = []
        for k in range(rng.randint(0, 4)):
            sender = rng.randrange(n)
            recipient = rng.choice([a for a in range(n) if a != sender])
            st = rng.randint(wake[sender], horizon)
            body = f"m{ri}_{k}"
            events.append((st, sender, "send", recipient, body))
            if rng.random() < 0.7:
                dt = rng.randint(max(st, wake[recipient]), horizon)
                events.append((dt, recipient, "receive", sender, body))
        runs.append(
            make_run(
                f"r{ri}",
                horizon=horizon,
                wake_up=wake,
                initial_state=init,
                events=events,
                clock=(lambda a, t: t) if clocked else None,
            )
        )
    return make_system(n, horizon, runs)


def random_valuation(rng: random.Random, system: System, n_props: int = 2):
    names = ["p", "q", "s"][:n_props]
    return make_valuation(
        {
            name: {pt for pt in system.points if rng.random() < 0.5}
            for name in names
        }
    )


def random_policy(rng: random.Random) -> ViewPolicy:
    choice = rng.randrange(4)
    if choice <= 1:
        return ViewPolicy.complete_history()
    name = rng.choice(sorted(VIEW_PROJECTIONS))
    return ViewPolicy.local_state(name, VIEW_PROJECTIONS[name])


def random_model(rng: random.Random, **kwargs) -> Model:
    system = random_system(rng, **kwargs)
    return Model(system, random_valuation(rng, system), random_policy(rng))


def brute_force_gfp(model: Model, var: str, body: Formula,
                    env: dict | None = None) -> PointSet:
    """Union of every subset that the body maps to itself; enumerated over
    all 2^|points| candidates, independently of the descending iteration."""
    pts = sorted(model.all_points)
    n = len(pts)
    if n > 14:
        raise ValueError("brute force oracle is for small systems only")
    out: set[Point] = set()
    base = dict(env or {})
    for mask in range(2 ** n):
        candidate = frozenset(pts[i] for i in range(n) if mask >> i & 1)
        base[var] = candidate
        if evaluate(model, body, base) == candidate:
            out |= candidate
    return frozenset(out)


def bfs_reachable(model: Model, start: Point, group) -> frozenset[Point]:
    """Reachability oracle: breadth-first search comparing histories
    directly, without the prebuilt index."""
    system = model.system
    policy = model.policy
    views = {
        (a, pt): policy.view_of(system.history(a, pt))
        for a in group
        for pt in system.points
    }
    seen = {start}
    frontier = [start]
    while frontier:
        nxt = []
        for pt in frontier:
            for a in group:
                for other in system.points:
                    if other not in seen and views[(a, other)] == views[(a, pt)]:
                        seen.add(other)
                        nxt.append(other)
        frontier = nxt
    return frozenset(seen)


def singleton_class_pairs(model: Model, agent: int):
    """All point pairs with equal histories for ``agent``: the pairwise
    comparison oracle for index classes."""
    pts = model.system.points
    return {
        (a, b)
        for a, b in combinations(pts, 2)
        if model.system.history(agent, a) == model.system.history(agent, b)
    }
