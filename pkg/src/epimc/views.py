"""View policies and the indistinguishability index over points.

A view policy maps local histories to views; two points are
indistinguishable to an agent when its views there are equal. The index
partitions the point set per agent by view and is the edge structure all
knowledge operators are evaluated against: group-labelled reachability in
this graph is what common knowledge quantifies over.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Hashable, Iterable

from .runs import LocalHistory, ModelError, Point, System

AgentSet = tuple[int, ...]


class ViewPolicyError(ModelError):
    """A policy assigned different views to equal histories."""


def normalize_group(group: Iterable[int]) -> AgentSet:
    members = tuple(sorted(set(int(a) for a in group)))
    if not members:
        raise ModelError("agent group must be nonempty")
    return members


@dataclass(frozen=True)
class ViewPolicy:
    """How an agent's view is derived from its local history.

    ``complete`` keeps the whole history (finest distinctions),
    ``trivial`` maps everything to one view (coarsest), and
    ``projection`` applies a user function of the history.
    """

    kind: str
    name: str
    projection: Callable[[LocalHistory], Hashable] | None = field(
        default=None, compare=False
    )

    @staticmethod
    def complete_history() -> "ViewPolicy":
        return ViewPolicy("complete", "complete")

    @staticmethod
    def trivial() -> "ViewPolicy":
        return ViewPolicy("trivial", "trivial")

    @staticmethod
    def local_state(name: str, projection: Callable[[LocalHistory], Hashable]) -> "ViewPolicy":
        return ViewPolicy("projection", name, projection)

    def view_of(self, history: LocalHistory) -> Hashable:
        if self.kind == "complete":
            return history
        if self.kind == "trivial":
            return "*"
        assert self.projection is not None
        return self.projection(history)


def _last_event(h: LocalHistory):
    return (h.initial_state, h.events[-1] if h.events else None)


def _event_counts(h: LocalHistory):
    sends = sum(1 for e in h.events if e.kind == "send")
    return (h.initial_state, sends, len(h.events) - sends)


def _initial_only(h: LocalHistory):
    return (h.initial_state,)


#: Named history projections usable from system files.
VIEW_PROJECTIONS: dict[str, Callable[[LocalHistory], Hashable]] = {
    "last_event": _last_event,
    "event_counts": _event_counts,
    "initial_only": _initial_only,
}


def policy_from_name(name: str) -> ViewPolicy:
    if name == "complete":
        return ViewPolicy.complete_history()
    if name == "trivial":
        return ViewPolicy.trivial()
    if name in VIEW_PROJECTIONS:
        return ViewPolicy.local_state(name, VIEW_PROJECTIONS[name])
    raise ModelError(f"unknown view policy {name!r}")


@dataclass(frozen=True, eq=False)
class IndistIndex:
    """Per-agent partition of all points into view-equivalence classes.

    Class tuples are deterministically ordered by least member, so
    exports and iteration are reproducible.
    """

    points: tuple[Point, ...]
    classes_by_agent: tuple[tuple[frozenset[Point], ...], ...]

    @property
    def n_agents(self) -> int:
        return len(self.classes_by_agent)

    @cached_property
    def _class_of(self) -> tuple[dict[Point, frozenset[Point]], ...]:
        out = []
        for classes in self.classes_by_agent:
            m: dict[Point, frozenset[Point]] = {}
            for cls in classes:
                for pt in cls:
                    m[pt] = cls
            out.append(m)
        return tuple(out)

    @cached_property
    def _component_cache(self) -> dict[AgentSet, dict[Point, frozenset[Point]]]:
        return {}

    def class_of(self, agent: int, point: Point) -> frozenset[Point]:
        if not 0 <= agent < self.n_agents:
            raise ModelError(f"agent {agent} not in index")
        try:
            return self._class_of[agent][point]
        except KeyError:
            raise ModelError(f"point {point} not in index") from None

    def components(self, group: Iterable[int]) -> dict[Point, frozenset[Point]]:
        """Connected components of the subgraph with edges labelled by ``group``."""
        key = normalize_group(group)
        cached = self._component_cache.get(key)
        if cached is not None:
            return cached
        assignment: dict[Point, frozenset[Point]] = {}
        for start in self.points:
            if start in assignment:
                continue
            seen = {start}
            queue = deque([start])
            while queue:
                pt = queue.popleft()
                for agent in key:
                    for nxt in self._class_of[agent][pt]:
                        if nxt not in seen:
                            seen.add(nxt)
                            queue.append(nxt)
            component = frozenset(seen)
            for pt in component:
                assignment[pt] = component
        self._component_cache[key] = assignment
        return assignment


def build_index(system: System, policy: ViewPolicy) -> IndistIndex:
    """Group every point by view, per agent.

    Raises ViewPolicyError, naming two witnessing points, if the policy
    maps equal histories to different views; that can only happen for a
    misbehaving custom projection.
    """
    pts = system.points
    classes_by_agent = []
    for agent in system.agents:
        by_view: dict[Hashable, list[Point]] = {}
        by_history: dict[LocalHistory, tuple[Hashable, Point]] = {}
        for pt in pts:
            h = system.history(agent, pt)
            v = policy.view_of(h)
            prior = by_history.get(h)
            if prior is None:
                by_history[h] = (v, pt)
            elif prior[0] != v:
                raise ViewPolicyError(
                    f"policy {policy.name!r} gives different views to agent "
                    f"{agent} at {prior[1]} and {pt}, whose histories are equal"
                )
            by_view.setdefault(v, []).append(pt)
        classes = tuple(
            frozenset(members)
            for members in sorted(by_view.values(), key=min)
        )
        classes_by_agent.append(classes)
    return IndistIndex(pts, tuple(classes_by_agent))


def g_reachable(
    index: IndistIndex,
    frm: Point,
    to: Point,
    group: Iterable[int],
    max_steps: int | None = None,
) -> bool:
    """Is ``to`` reachable from ``frm`` along group-labelled edges?

    With ``max_steps`` set, only paths of at most that many edges count;
    zero steps reaches only the point itself.
    """
    members = normalize_group(group)
    if max_steps is None:
        return to in index.components(members)[frm]
    frontier = {frm}
    seen = {frm}
    steps = 0
    while True:
        if to in seen:
            return True
        if steps >= max_steps or not frontier:
            return False
        nxt: set[Point] = set()
        for pt in frontier:
            for agent in members:
                nxt |= index.class_of(agent, pt)
        frontier = nxt - seen
        seen |= nxt
        steps += 1


def reachable_set(index: IndistIndex, frm: Point, group: Iterable[int]) -> frozenset[Point]:
    """All points reachable from ``frm`` in finitely many group steps."""
    return index.components(normalize_group(group))[frm]


def export_graph(index: IndistIndex, group: Iterable[int]) -> str:
    """Render the indistinguishability graph as deterministic DOT text.

    Nodes are all points ordered by (run id, time); one undirected edge
    per indistinguishable pair per agent of ``group``, labelled p<i>.
    An empty group yields nodes only.
    """
    members = tuple(sorted(set(int(a) for a in group)))
    lines = ["graph indistinguishability {"]
    for pt in index.points:
        lines.append(f'  "{pt}";')
    for agent in members:
        for cls in index.classes_by_agent[agent]:
            ordered = sorted(cls)
            for i, a in enumerate(ordered):
                for b in ordered[i + 1 :]:
                    lines.append(f'  "{a}" -- "{b}" [label="p{agent}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
