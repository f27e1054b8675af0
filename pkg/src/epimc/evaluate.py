"""Set-based formula evaluation over a system, valuation, and view policy.

Every formula denotes a set of points. Knowledge of an agent is the union
of its indistinguishability classes contained in the argument set; group
operators intersect, quantify over intervals, or close under reachability.
Greatest fixed points are computed by descending iteration from the full
point set, which terminates on the finite lattice; the reachability
characterization of common knowledge is kept as a separate fast path and
must agree with the fixed-point route.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Sequence

from . import formulas as fm
from .formulas import Formula
from .runs import ModelError, Point, System, UnknownAgentError
from .views import IndistIndex, ViewPolicy, build_index, normalize_group

PointSet = frozenset[Point]


class EvalError(ModelError):
    pass


class UnknownPropError(EvalError):
    pass


class UnboundVariableError(EvalError):
    pass


@dataclass(frozen=True, eq=False)
class Valuation:
    """Truth sets per proposition name; absent points are false.

    Lookups of undeclared names are errors, not false, so a typo in a
    formula cannot silently pass.
    """

    truth: Mapping[str, PointSet]

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(sorted(self.truth))

    def truth_set(self, name: str) -> PointSet:
        try:
            return self.truth[name]
        except KeyError:
            raise UnknownPropError(
                f"proposition {name!r} is not declared in this model"
            ) from None


def make_valuation(pairs: Mapping[str, Iterable[Point]]) -> Valuation:
    return Valuation({name: frozenset(pts) for name, pts in pairs.items()})


@dataclass(frozen=True, eq=False)
class Model:
    """A system with a valuation and a view policy; the index is derived."""

    system: System
    valuation: Valuation
    policy: ViewPolicy

    @cached_property
    def index(self) -> IndistIndex:
        return build_index(self.system, self.policy)

    @cached_property
    def all_points(self) -> PointSet:
        return frozenset(self.system.points)

    @cached_property
    def point_order(self) -> tuple[Point, ...]:
        return self.system.points


def _validate_formula(model: Model, f: Formula) -> None:
    for agent in fm.agents_mentioned(f):
        if not 0 <= agent < model.system.n_agents:
            raise UnknownAgentError(
                f"agent {agent} out of range for a "
                f"{model.system.n_agents}-agent system"
            )
    if model.system.runs and not model.system.has_clocks:
        for node in fm.walk(f):
            if isinstance(node, (fm.KTime, fm.ETime, fm.CTime)):
                raise EvalError(
                    "clock-indexed operators need a system in which every "
                    "run has clocks"
                )


def _know(model: Model, agent: int, arg: PointSet) -> PointSet:
    """Points whose whole view class for ``agent`` lies inside ``arg``."""
    keep = []
    for cls in model.index.classes_by_agent[agent]:
        if cls <= arg:
            keep.append(cls)
    if not keep:
        return frozenset()
    return frozenset().union(*keep)


def _everyone(model: Model, group: Sequence[int], arg: PointSet) -> PointSet:
    out = _know(model, group[0], arg)
    for agent in group[1:]:
        if not out:
            break
        out &= _know(model, agent, arg)
    return out


def _someone(model: Model, group: Sequence[int], arg: PointSet) -> PointSet:
    out: PointSet = frozenset()
    for agent in group:
        out |= _know(model, agent, arg)
    return out


def _distributed(model: Model, group: Sequence[int], arg: PointSet) -> PointSet:
    """Joint-view classes (intersections of member classes) inside ``arg``."""
    joint: dict[tuple, list[Point]] = {}
    index = model.index
    for pt in model.point_order:
        key = tuple(id(index.class_of(a, pt)) for a in group)
        joint.setdefault(key, []).append(pt)
    out: set[Point] = set()
    for members in joint.values():
        cls = frozenset(members)
        if cls <= arg:
            out |= cls
    return frozenset(out)


def _know_times_by_run(model: Model, group: Sequence[int], arg: PointSet) -> dict[str, dict[int, list[int]]]:
    """Per run, per agent: sorted times at which the agent is in K(arg)."""
    per_agent = {a: _know(model, a, arg) for a in group}
    out: dict[str, dict[int, list[int]]] = {
        r.id: {a: [] for a in group} for r in model.system.runs
    }
    for a in group:
        for pt in sorted(per_agent[a]):
            out[pt.run_id][a].append(pt.time)
    return out


def _interval_everyone(model: Model, group: Sequence[int], eps: int, arg: PointSet) -> PointSet:
    """Shared width-eps interval containing now in which each member knows.

    Intervals are clipped to [0, horizon]; with eps = 0 this degenerates
    to plain E.
    """
    horizon = model.system.horizon
    if eps > horizon:
        return frozenset()
    times = _know_times_by_run(model, group, arg)
    out: set[Point] = set()
    for run in model.system.runs:
        per = times[run.id]
        for t in range(horizon + 1):
            lo = max(0, t - eps)
            hi = min(t, horizon - eps)
            for start in range(lo, hi + 1):
                if all(
                    any(start <= x <= start + eps for x in per[a]) for a in group
                ):
                    out.add(Point(run.id, t))
                    break
    return frozenset(out)


def _eventual_everyone(model: Model, group: Sequence[int], arg: PointSet) -> PointSet:
    """Each member knows at some time of the run; a run-level fact."""
    times = _know_times_by_run(model, group, arg)
    out: set[Point] = set()
    for run in model.system.runs:
        if all(times[run.id][a] for a in group):
            out.update(Point(run.id, t) for t in range(model.system.horizon + 1))
    return frozenset(out)


def _know_at_stamp(model: Model, agent: int, stamp: int, arg: PointSet) -> PointSet:
    """Run-level: the agent's clock reads ``stamp`` somewhere and it knows
    ``arg`` at every such time; false throughout runs that skip the stamp."""
    known = _know(model, agent, arg)
    out: set[Point] = set()
    for run in model.system.runs:
        reading_times = [
            t
            for t in range(run.wake_up[agent], model.system.horizon + 1)
            if run.clock_at(agent, t) == stamp
        ]
        if reading_times and all(Point(run.id, t) in known for t in reading_times):
            out.update(Point(run.id, t) for t in range(model.system.horizon + 1))
    return frozenset(out)


def _stamped_everyone(model: Model, group: Sequence[int], stamp: int, arg: PointSet) -> PointSet:
    out = _know_at_stamp(model, group[0], stamp, arg)
    for agent in group[1:]:
        if not out:
            break
        out &= _know_at_stamp(model, agent, stamp, arg)
    return out


def _descend_to_fixpoint(model: Model, step) -> PointSet:
    current = model.all_points
    while True:
        nxt = step(current)
        if nxt == current:
            return current
        if not nxt <= current:
            raise RuntimeError(
                "fixed-point iteration increased; the step function is not "
                "monotone under this evaluator"
            )
        current = nxt


def evaluate(
    model: Model,
    f: Formula,
    env: Mapping[str, PointSet] | None = None,
) -> PointSet:
    """The set of points where ``f`` holds.

    ``env`` binds free fixed-point variables to point sets. The formula
    must satisfy the positivity restriction and mention only agents of
    the system.
    """
    fm.check_positivity(f)
    _validate_formula(model, f)
    frozen_env: dict[str, PointSet] = {k: frozenset(v) for k, v in (env or {}).items()}
    return _eval(model, f, frozen_env)


def _eval(model: Model, f: Formula, env: dict[str, PointSet]) -> PointSet:
    if isinstance(f, fm.Var):
        try:
            return env[f.name]
        except KeyError:
            raise UnboundVariableError(f"variable {f.name!r} is unbound") from None
    if isinstance(f, fm.Prop):
        return model.valuation.truth_set(f.name) & model.all_points
    if isinstance(f, fm.TrueConst):
        return model.all_points
    if isinstance(f, fm.Not):
        return model.all_points - _eval(model, f.child, env)
    if isinstance(f, fm.And):
        return _eval(model, f.left, env) & _eval(model, f.right, env)
    if isinstance(f, fm.K):
        return _know(model, f.agent, _eval(model, f.child, env))
    if isinstance(f, fm.S):
        return _someone(model, f.group, _eval(model, f.child, env))
    if isinstance(f, fm.E):
        return _everyone(model, f.group, _eval(model, f.child, env))
    if isinstance(f, fm.EPow):
        out = _eval(model, f.child, env)
        for _ in range(f.power):
            out = _everyone(model, f.group, out)
        return out
    if isinstance(f, fm.D):
        return _distributed(model, f.group, _eval(model, f.child, env))
    if isinstance(f, fm.C):
        return eval_C_reach(model, f.group, f.child, env)
    if isinstance(f, fm.EEps):
        return _interval_everyone(model, f.group, f.eps, _eval(model, f.child, env))
    if isinstance(f, fm.CEps):
        base = _eval(model, f.child, env)
        return _descend_to_fixpoint(
            model, lambda cur: _interval_everyone(model, f.group, f.eps, base & cur)
        )
    if isinstance(f, fm.EDiamond):
        return _eventual_everyone(model, f.group, _eval(model, f.child, env))
    if isinstance(f, fm.CDiamond):
        base = _eval(model, f.child, env)
        return _descend_to_fixpoint(
            model, lambda cur: _eventual_everyone(model, f.group, base & cur)
        )
    if isinstance(f, fm.KTime):
        return _know_at_stamp(model, f.agent, f.stamp, _eval(model, f.child, env))
    if isinstance(f, fm.ETime):
        return _stamped_everyone(model, f.group, f.stamp, _eval(model, f.child, env))
    if isinstance(f, fm.CTime):
        base = _eval(model, f.child, env)
        return _descend_to_fixpoint(
            model, lambda cur: _stamped_everyone(model, f.group, f.stamp, base & cur)
        )
    if isinstance(f, fm.Nu):
        return gfp(model, f.var, f.body, env)
    raise EvalError(f"cannot evaluate {type(f).__name__}")


def gfp(
    model: Model,
    var: str,
    body: Formula,
    env: Mapping[str, PointSet] | None = None,
) -> PointSet:
    """Greatest fixed point of A -> eval(body, var := A).

    Iterates downward from the full point set; the chain is weakly
    decreasing on the finite lattice, so at most one iteration per point
    is needed. Equals the union of all fixed points of the body.
    """
    base_env: dict[str, PointSet] = {
        k: frozenset(v) for k, v in (env or {}).items()
    }

    def step(current: PointSet) -> PointSet:
        inner = dict(base_env)
        inner[var] = current
        return _eval(model, body, inner)

    return _descend_to_fixpoint(model, step)


def eval_C_reach(
    model: Model,
    group: Iterable[int],
    f: Formula,
    env: Mapping[str, PointSet] | None = None,
) -> PointSet:
    """Common knowledge via reachability: points whose whole reachable set
    satisfies the argument. Agrees with the nu-form on every model."""
    members = normalize_group(group)
    for agent in members:
        model.system.check_agent(agent)
    arg = _eval(model, f, {k: frozenset(v) for k, v in (env or {}).items()})
    components = model.index.components(members)
    out: set[Point] = set()
    for pt in model.point_order:
        if components[pt] <= arg:
            out.add(pt)
    return frozenset(out)


def holds(model: Model, f: Formula, point: Point) -> bool:
    if point not in model.all_points:
        raise ModelError(f"point {point} is not in the system")
    return point in evaluate(model, f)


def check_validity(model: Model, f: Formula) -> tuple[bool, Point | None]:
    """Valid iff true at every point; otherwise the least failing point."""
    sat = evaluate(model, f)
    for pt in model.point_order:
        if pt not in sat:
            return False, pt
    return True, None


# ---------------------------------------------------------------------------
# Axiom and rule reports

@dataclass(frozen=True)
class AxiomCheck:
    name: str
    formula: str
    status: str  # "pass" | "fail" | "info" | "vacuous"
    detail: str = ""
    counterexample: Point | None = None


@dataclass(frozen=True)
class AxiomReport:
    entries: tuple[AxiomCheck, ...]

    @property
    def failures(self) -> tuple[AxiomCheck, ...]:
        return tuple(e for e in self.entries if e.status == "fail")

    @property
    def ok(self) -> bool:
        return not self.failures

    def render(self) -> str:
        lines = []
        for e in self.entries:
            mark = e.status.upper()
            extra = f"  [{e.detail}]" if e.detail else ""
            cx = f"  counterexample={e.counterexample}" if e.counterexample else ""
            lines.append(f"{mark:8} {e.name}: {e.formula}{extra}{cx}")
        return "\n".join(lines)


@dataclass(frozen=True)
class InductionReport:
    premise_valid: bool
    conclusion_valid: bool
    vacuous: bool
    counterexample: Point | None

    @property
    def ok(self) -> bool:
        return self.vacuous or self.conclusion_valid


def check_induction_rule(
    model: Model,
    phi: Formula,
    psi: Formula,
    group: Iterable[int],
) -> InductionReport:
    """From the validity of phi -> E(phi & psi) conclude phi -> C psi.

    When the premise is invalid the rule is vacuous and nothing is
    asserted. Taking psi = phi gives the special case from phi -> E phi.
    """
    members = normalize_group(group)
    premise = fm.implies(phi, fm.E(members, fm.And(phi, psi)))
    premise_valid, _ = check_validity(model, premise)
    if not premise_valid:
        return InductionReport(False, False, True, None)
    conclusion = fm.implies(phi, fm.C(members, psi))
    conclusion_valid, cx = check_validity(model, conclusion)
    return InductionReport(True, conclusion_valid, False, cx)


def _s5_operators(model: Model, groups: Sequence[tuple[int, ...]]):
    ops: list[tuple[str, object]] = []
    for agent in model.system.agents:
        ops.append((f"K{agent}", lambda g, a=agent: fm.K(a, g)))
    for grp in groups:
        label = "{" + ",".join(map(str, grp)) + "}"
        ops.append((f"D{label}", lambda g, m=grp: fm.D(m, g)))
        ops.append((f"C{label}", lambda g, m=grp: fm.C(m, g)))
    return ops


def axiom_suite(
    model: Model,
    props: Sequence[str],
    *,
    max_k: int = 4,
    eps: int = 1,
    groups: Sequence[Iterable[int]] | None = None,
) -> AxiomReport:
    """Validity report for the S5 axioms, the fixed-point laws, and the
    knowledge hierarchy, over the given proposition samples.

    K, D, and C instances of the knowledge axiom, consequence closure,
    both introspection axioms, and necessitation are asserted. For the
    interval and eventual variants only positive introspection,
    necessitation, and the fixed-point axiom are asserted; their
    remaining S5 instances are reported as informational because they
    are not expected to hold.
    """
    if groups is None:
        grps: list[tuple[int, ...]] = [tuple(model.system.agents)]
    else:
        grps = [normalize_group(g) for g in groups]
    props = list(props)
    if not props:
        raise EvalError("axiom_suite needs at least one proposition")
    if eps > model.system.horizon:
        raise EvalError("the interval width must fit inside the horizon")
    entries: list[AxiomCheck] = []

    def assert_valid(name: str, formula: Formula, status_if_false: str = "fail") -> None:
        ok, cx = check_validity(model, formula)
        entries.append(
            AxiomCheck(
                name,
                fm.print_formula(formula),
                "pass" if ok else status_if_false,
                counterexample=None if ok else cx,
            )
        )

    def info_valid(name: str, formula: Formula, note: str) -> None:
        ok, cx = check_validity(model, formula)
        entries.append(
            AxiomCheck(
                name,
                fm.print_formula(formula),
                "info",
                detail=f"{note}; holds here: {ok}",
                counterexample=None if ok else cx,
            )
        )

    necessitation_samples: list[Formula] = [fm.TrueConst()]
    for name in props:
        p = fm.Prop(name)
        necessitation_samples.append(fm.disj(p, fm.Not(p)))

    for label, wrap in _s5_operators(model, grps):
        for name in props:
            p = fm.Prop(name)
            q = fm.Prop(props[0]) if len(props) == 1 else fm.Prop(props[(props.index(name) + 1) % len(props)])
            assert_valid(f"A1[{label}]", fm.implies(wrap(p), p))
            assert_valid(
                f"A2[{label}]",
                fm.implies(fm.And(wrap(p), wrap(fm.implies(p, q))), wrap(q)),
            )
            assert_valid(f"A3[{label}]", fm.implies(wrap(p), wrap(wrap(p))))
            assert_valid(
                f"A4[{label}]",
                fm.implies(fm.Not(wrap(p)), wrap(fm.Not(wrap(p)))),
            )
        for sample in necessitation_samples:
            valid, _ = check_validity(model, sample)
            if not valid:
                entries.append(
                    AxiomCheck(
                        f"R1[{label}]",
                        fm.print_formula(sample),
                        "vacuous",
                        detail="premise formula not valid here",
                    )
                )
                continue
            assert_valid(f"R1[{label}]", wrap(sample))

    for grp in grps:
        glabel = "{" + ",".join(map(str, grp)) + "}"
        for name in props:
            p = fm.Prop(name)
            assert_valid(
                f"C1[{glabel}]",
                fm.iff(fm.C(grp, p), fm.E(grp, fm.And(p, fm.C(grp, p)))),
            )
            report = check_induction_rule(model, p, p, grp)
            entries.append(
                AxiomCheck(
                    f"C2[{glabel}]",
                    f"from {name} -> E{glabel}({name} & {name}) infer "
                    f"{name} -> C{glabel} {name}",
                    "vacuous" if report.vacuous else ("pass" if report.ok else "fail"),
                    counterexample=report.counterexample,
                )
            )

            # hierarchy chain: C down to the bare fact, as set inclusions
            sets = [evaluate(model, fm.C(grp, p))]
            labels = [f"C{glabel}"]
            for k in range(max_k, 0, -1):
                sets.append(evaluate(model, fm.EPow(grp, k, p)))
                labels.append(f"E^{k}{glabel}")
            sets.append(evaluate(model, fm.S(grp, p)))
            labels.append(f"S{glabel}")
            sets.append(evaluate(model, fm.D(grp, p)))
            labels.append(f"D{glabel}")
            sets.append(evaluate(model, p))
            labels.append(name)
            for (hi_set, hi_label), (lo_set, lo_label) in zip(
                zip(sets, labels), zip(sets[1:], labels[1:])
            ):
                ok = hi_set <= lo_set
                cx = None if ok else min(hi_set - lo_set)
                entries.append(
                    AxiomCheck(
                        f"hierarchy[{hi_label} => {lo_label}]",
                        f"{hi_label} {name} implies {lo_label} {name}",
                        "pass" if ok else "fail",
                        counterexample=cx,
                    )
                )

            # fixed-point law and the asserted fragment for the variants
            ceps = fm.CEps(grp, eps, p)
            assert_valid(
                f"C1eps[{glabel}]",
                fm.iff(ceps, fm.EEps(grp, eps, fm.And(p, ceps))),
            )
            cdia = fm.CDiamond(grp, p)
            assert_valid(f"C1v[{glabel}]", fm.iff(cdia, fm.EDiamond(grp, fm.And(p, cdia))))
            assert_valid(f"A3eps[{glabel}]", fm.implies(ceps, fm.CEps(grp, eps, ceps)))
            assert_valid(f"A3v[{glabel}]", fm.implies(cdia, fm.CDiamond(grp, cdia)))
            info_valid(
                f"A1eps[{glabel}]",
                fm.implies(ceps, p),
                "knowledge axiom is not asserted for the interval variant",
            )
            q = fm.Prop(props[(props.index(name) + 1) % len(props)])
            info_valid(
                f"A2eps[{glabel}]",
                fm.implies(
                    fm.And(ceps, fm.CEps(grp, eps, fm.implies(p, q))),
                    fm.CEps(grp, eps, q),
                ),
                "consequence closure is not asserted for the interval variant",
            )
            info_valid(
                f"A4eps[{glabel}]",
                fm.implies(fm.Not(ceps), fm.CEps(grp, eps, fm.Not(ceps))),
                "negative introspection is not asserted for the interval variant",
            )
        for sample in necessitation_samples:
            valid, _ = check_validity(model, sample)
            if valid:
                assert_valid(f"R1eps[{glabel}]", fm.CEps(grp, eps, sample))
                assert_valid(f"R1v[{glabel}]", fm.CDiamond(grp, sample))

    return AxiomReport(tuple(entries))
