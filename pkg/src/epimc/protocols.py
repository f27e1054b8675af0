"""Run generation from deterministic protocols under delivery adversaries,
and the structural checks for unreliable or imprecise communication.

Generation is exhaustive: one run per initial configuration and admissible
delivery schedule, enumerated tick by tick. An agent's sends at a tick are
a function of its history strictly before that tick, so delivery choices
are the only branching. A guard refuses enumerations larger than a cap
rather than sampling, because the structural checks quantify over all runs.

Delivery delays are in ticks. A delay of zero means the message lands
within the tick it was sent and is observable from the next tick on,
which is the discrete rendering of delivery within one time unit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .runs import (
    EMPTY_HISTORY,
    Event,
    LocalHistory,
    ModelError,
    RECEIVE,
    Run,
    SEND,
    System,
    make_system,
    run_history,
    same_clock_readings,
    same_initial_configuration,
    timeline_sort_key,
)

DROPPED = "dropped"
PENDING = "pending"  # forced delivery that falls beyond the horizon


class ScheduleExplosionError(ModelError):
    """The admissible schedule count exceeded the configured cap."""


@dataclass(frozen=True)
class InitialConfiguration:
    """Per-agent wake-up times and initial states."""

    wake_up: tuple[int, ...]
    initial_state: tuple[str, ...]

    def __post_init__(self):
        if len(self.wake_up) != len(self.initial_state):
            raise ModelError("configuration field lengths differ")


@dataclass(frozen=True)
class JointProtocol:
    """A deterministic send rule per agent.

    ``rule(agent, history)`` returns the (recipient, body) pairs the agent
    sends now. Histories exclude the current tick, so actions depend only
    on the past; with clocks, the current reading is the last entry of the
    history's clock range.
    """

    name: str
    rule: Callable[[int, LocalHistory], Iterable[tuple[int, str]]] = field(compare=False)

    def sends(self, agent: int, history: LocalHistory) -> tuple[tuple[int, str], ...]:
        return tuple(sorted({(int(r), str(b)) for r, b in self.rule(agent, history)}))


@dataclass(frozen=True)
class DeliveryModel:
    """Admissible delivery outcomes for each sent message.

    Variants:

    * ``not_guaranteed(delays)``: any listed delay, or silently dropped.
      ``drop_deadline`` optionally confines drops to messages sent at or
      before that tick, so late losses cannot fall outside the window in
      which the other party could still detect them.
    * ``unbounded()``: any delay of at least one tick up to the horizon,
      or still pending at the horizon.
    * ``bounded_uncertain(L, H)``: guaranteed delivery with an integer
      delay strictly inside (L, H).
    * ``synchronous_broadcast(L, spread)``: guaranteed delivery with a
      delay between L and L + spread inclusive.
    """

    kind: str
    delays: tuple[int, ...] = ()
    low: int = 0
    high: int = 0
    drop_deadline: int | None = None

    @staticmethod
    def not_guaranteed(
        delays: Sequence[int] = (1,), drop_deadline: int | None = None
    ) -> "DeliveryModel":
        ds = tuple(sorted(set(int(d) for d in delays)))
        if any(d < 0 for d in ds):
            raise ModelError("delays are nonnegative tick counts")
        return DeliveryModel("not_guaranteed", ds, drop_deadline=drop_deadline)

    @staticmethod
    def unbounded() -> "DeliveryModel":
        return DeliveryModel("unbounded")

    @staticmethod
    def bounded_uncertain(low: int, high: int) -> "DeliveryModel":
        if not low < high:
            raise ModelError("bounded_uncertain requires low < high")
        if high - low < 2:
            raise ModelError("open interval (low, high) contains no integer delay")
        return DeliveryModel("bounded_uncertain", low=low, high=high)

    @staticmethod
    def synchronous_broadcast(low: int, spread: int) -> "DeliveryModel":
        if low < 0 or spread < 0:
            raise ModelError("broadcast bounds are nonnegative")
        return DeliveryModel("synchronous_broadcast", low=low, high=low + spread)

    def delay_bounds(self) -> tuple[int, int | None]:
        """(min delay, max delay or None for unbounded); drops not included."""
        if self.kind == "not_guaranteed":
            if not self.delays:
                return (0, 0)
            return (self.delays[0], self.delays[-1])
        if self.kind == "unbounded":
            return (1, None)
        if self.kind == "bounded_uncertain":
            return (self.low + 1, self.high - 1)
        return (self.low, self.high)

    def outcomes(self, send_time: int, horizon: int) -> tuple[object, ...]:
        """Delivery ticks within the horizon, plus DROPPED or PENDING."""
        if self.kind == "not_guaranteed":
            ticks = [send_time + d for d in self.delays if send_time + d <= horizon]
            droppable = self.drop_deadline is None or send_time <= self.drop_deadline
            if droppable:
                return tuple(ticks) + (DROPPED,)
            return tuple(ticks) if ticks else (PENDING,)
        if self.kind == "unbounded":
            ticks = list(range(send_time + 1, horizon + 1))
            return tuple(ticks) + (PENDING,)
        lo, hi = self.delay_bounds()
        assert hi is not None
        ticks = [send_time + d for d in range(lo, hi + 1) if send_time + d <= horizon]
        late = send_time + hi > horizon
        return tuple(ticks) + ((PENDING,) if late else ())

    def admits_delay(self, delay: int) -> bool:
        if self.kind == "not_guaranteed":
            return delay in self.delays
        lo, hi = self.delay_bounds()
        if delay < lo:
            return False
        return hi is None or delay <= hi


@dataclass(frozen=True)
class ScheduleEntry:
    """One delivery decision: a sent message and its outcome for a recipient."""

    sender: int
    send_time: int
    recipient: int
    message: str
    outcome: object  # delivery tick, DROPPED, or PENDING


def _outcome_tag(entry: ScheduleEntry) -> str:
    if entry.outcome == DROPPED:
        mark = "!"
    elif entry.outcome == PENDING:
        mark = "~"
    else:
        mark = f"@{entry.outcome}"
    return f"{entry.message}>{entry.recipient}{mark}"


def enumerate_runs(
    protocol: JointProtocol,
    delivery: DeliveryModel,
    configs: Sequence[InitialConfiguration],
    horizon: int,
    *,
    global_clock: bool = False,
    max_schedules: int = 4096,
) -> tuple[tuple[Run, tuple[ScheduleEntry, ...]], ...]:
    """All runs of the protocol under the delivery model, with their
    schedules. Deterministic: configurations in the given order, delivery
    options in the model's order."""
    if not configs:
        raise ModelError("at least one initial configuration is required")
    n = len(configs[0].wake_up)
    for cfg in configs:
        if len(cfg.wake_up) != n:
            raise ModelError("configurations disagree on the agent count")
        if any(w > horizon for w in cfg.wake_up):
            raise ModelError("wake-up times must not exceed the horizon")

    results: list[tuple[Run, tuple[ScheduleEntry, ...]]] = []
    count = 0

    def finish(ci: int, cfg: InitialConfiguration,
               events: tuple[tuple[int, int, Event], ...],
               schedule: tuple[ScheduleEntry, ...]) -> None:
        nonlocal count
        count += 1
        if count > max_schedules:
            raise ScheduleExplosionError(
                f"schedule enumeration yields more than {max_schedules} runs; "
                f"shrink the horizon or raise max_schedules"
            )
        tags = ",".join(_outcome_tag(e) for e in schedule)
        run_id = f"c{ci}" + (f":{tags}" if tags else "")
        per_agent: list[list[tuple[int, Event]]] = [[] for _ in range(n)]
        for t, agent, ev in events:
            per_agent[agent].append((t, ev))
        clk = None
        if global_clock:
            clk = tuple(
                tuple(range(cfg.wake_up[a], horizon + 1)) for a in range(n)
            )
        timeline = tuple(
            tuple(sorted(per_agent[a], key=timeline_sort_key)) for a in range(n)
        )
        results.append(
            (
                Run(run_id, cfg.wake_up, cfg.initial_state, timeline, clk),
                schedule,
            )
        )

    for ci, cfg in enumerate(configs):
        _explore(ci, cfg, n, protocol, delivery, horizon, global_clock, finish)

    return tuple(results)


def _explore(ci, cfg, n, protocol, delivery, horizon, global_clock, finish) -> None:
    """Depth-first enumeration; branch state is passed down immutably."""

    def history_at(events, agent: int, t: int) -> LocalHistory:
        if t < cfg.wake_up[agent]:
            return EMPTY_HISTORY
        mine = sorted(
            ((tt, ev) for (tt, a, ev) in events if a == agent),
            key=timeline_sort_key,
        )
        evs = tuple(ev for tt, ev in mine if tt < t)
        rng = None
        if global_clock:
            rng = tuple(dict.fromkeys(range(cfg.wake_up[agent], t + 1)))
        return LocalHistory(cfg.initial_state[agent], evs, rng)

    def go(t: int, events: tuple, schedule: tuple, minted: tuple) -> None:
        if t > horizon:
            finish(ci, cfg, events, schedule)
            return
        stamp = t if global_clock else None
        new_events = list(events)
        for entry in schedule:
            if entry.outcome == t:
                new_events.append(
                    (t, entry.recipient,
                     Event(RECEIVE, entry.sender, entry.message, stamp))
                )
        # sends are a function of history strictly before t, so nothing
        # landing at t itself can influence them
        outgoing: list[tuple[int, int, str]] = []
        mint_state: dict[tuple[int, str], list[int]] = {}
        for (sender, body), times in minted:
            mint_state[(sender, body)] = list(times)
        for agent in range(n):
            if t < cfg.wake_up[agent]:
                continue
            hist = history_at(new_events, agent, t)
            for recipient, body in protocol.sends(agent, hist):
                if not 0 <= recipient < n:
                    raise ModelError(
                        f"protocol {protocol.name!r} sends to unknown agent "
                        f"{recipient}"
                    )
                times = mint_state.setdefault((agent, body), [])
                if t not in times:
                    times.append(t)
                ordinal = times.index(t) + 1
                token = body if ordinal == 1 else f"{body}#{ordinal}"
                outgoing.append((agent, recipient, token))
        for sender, recipient, token in outgoing:
            new_events.append((t, sender, Event(SEND, recipient, token, stamp)))
        new_minted = tuple(
            (key, tuple(times)) for key, times in sorted(mint_state.items())
        )
        frozen_events = tuple(new_events)

        def options_for(recipient: int) -> tuple:
            # a sleeping recipient observes the message at its wake-up;
            # outcomes that collapse to the same effective tick are one branch
            wake = cfg.wake_up[recipient]
            seen: list = []
            for outcome in delivery.outcomes(t, horizon):
                if isinstance(outcome, int):
                    outcome = max(outcome, wake)
                if outcome not in seen:
                    seen.append(outcome)
            return tuple(seen)

        def assign(i: int, sched: tuple) -> None:
            if i == len(outgoing):
                # same-tick deliveries land after the sends of this tick
                settled = list(frozen_events)
                for entry in sched[len(schedule):]:
                    if entry.outcome == t:
                        settled.append(
                            (t, entry.recipient,
                             Event(RECEIVE, entry.sender, entry.message, stamp))
                        )
                go(t + 1, tuple(settled), sched, new_minted)
                return
            sender, recipient, token = outgoing[i]
            for outcome in options_for(recipient):
                assign(i + 1, sched + (ScheduleEntry(sender, t, recipient, token, outcome),))

        assign(0, schedule)

    go(0, (), (), ())


def generate_runs(
    protocol: JointProtocol,
    delivery: DeliveryModel,
    configs: Sequence[InitialConfiguration],
    horizon: int,
    *,
    global_clock: bool = False,
    max_schedules: int = 4096,
) -> System:
    """The system of all runs of the protocol under the delivery model."""
    if not configs or len(configs[0].wake_up) < 1:
        raise ModelError("at least one agent is required")
    pairs = enumerate_runs(
        protocol,
        delivery,
        configs,
        horizon,
        global_clock=global_clock,
        max_schedules=max_schedules,
    )
    n = len(configs[0].wake_up)
    return make_system(n, horizon, [run for run, _ in pairs])


# ---------------------------------------------------------------------------
# Built-in protocols

def silent_protocol() -> JointProtocol:
    return JointProtocol("silent", lambda agent, hist: ())


def handshake(k_legs: int, initiate_state: str = "favor") -> JointProtocol:
    """Two agents exchange numbered legs; agent 0 initiates leg 1 when its
    initial state equals ``initiate_state``, and each later leg is sent
    once the previous one has been received."""
    if k_legs < 1:
        raise ModelError("handshake needs at least one leg")

    def rule(agent: int, hist: LocalHistory):
        if not hist.awake:
            return ()
        sent = {e.message for e in hist.events if e.kind == SEND}
        got = {e.message for e in hist.events if e.kind == RECEIVE}
        peer = 1 - agent
        out = []
        if agent == 0 and hist.initial_state == initiate_state and "hs1" not in sent:
            out.append((peer, "hs1"))
        for leg in range(2, k_legs + 1):
            mine = agent == 0 if leg % 2 == 1 else agent == 1
            if mine and f"hs{leg - 1}" in got and f"hs{leg}" not in sent:
                out.append((peer, f"hs{leg}"))
        return out

    return JointProtocol(f"handshake({k_legs})", rule)


def ok_protocol(stop_time: int) -> JointProtocol:
    """Both agents confirm liveness every tick while confirmations keep
    arriving: send at clock time 0, and at clock time k > 0 exactly when
    k confirmations have been received so far. Requires a shared clock.
    Sending stops after ``stop_time`` so late losses stay detectable
    within the horizon."""

    def rule(agent: int, hist: LocalHistory):
        if not hist.awake or hist.clock_range is None:
            return ()
        now = hist.clock_range[-1]
        if now > stop_time:
            return ()
        got = sum(1 for e in hist.events if e.kind == RECEIVE)
        if now == 0 or got >= now:
            return ((1 - agent, "OK"),)
        return ()

    return JointProtocol(f"ok_protocol(stop={stop_time})", rule)


def broadcast_once(body: str = "m", sender: int = 0, n_agents: int = 2) -> JointProtocol:
    """The sender broadcasts one message to every agent (itself included)
    at its wake-up tick."""

    def rule(agent: int, hist: LocalHistory):
        if agent != sender or not hist.awake:
            return ()
        if any(e.kind == SEND for e in hist.events):
            return ()
        return tuple((r, body) for r in range(n_agents))

    return JointProtocol(f"broadcast_once({body!r})", rule)


def ping_once(body: str = "m") -> JointProtocol:
    """Agent 0 sends one message to agent 1 at its wake-up tick."""

    def rule(agent: int, hist: LocalHistory):
        if agent != 0 or not hist.awake:
            return ()
        if any(e.kind == SEND for e in hist.events):
            return ()
        return ((1, body),)

    return JointProtocol("ping_once", rule)


BUILTIN_PROTOCOLS: dict[str, Callable[..., JointProtocol]] = {
    "silent": silent_protocol,
    "handshake": handshake,
    "ok_protocol": ok_protocol,
    "broadcast_once": broadcast_once,
    "ping_once": ping_once,
}


# ---------------------------------------------------------------------------
# Structural checks

@dataclass(frozen=True)
class CheckReport:
    name: str
    violations: tuple[str, ...]
    notes: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def render(self) -> str:
        head = f"{self.name}: {'pass' if self.ok else f'{len(self.violations)} violation(s)'}"
        lines = [head]
        lines += [f"  {v}" for v in self.violations]
        lines += [f"  note: {n}" for n in self.notes]
        return "\n".join(lines)


def _receive_times(run: Run, agent: int) -> list[int]:
    return [t for t, ev in run.timeline[agent] if ev.kind == RECEIVE]


def _no_receives_at_or_after(run: Run, t: int) -> bool:
    return all(
        all(tt < t for tt in _receive_times(run, a)) for a in range(run.n_agents)
    )


def check_ng1(system: System) -> CheckReport:
    """For every point, some same-configuration, same-clock extension has
    no receives from that time on."""
    violations = []
    for run in system.runs:
        for t in range(system.horizon + 1):
            found = False
            for cand in system.runs:
                if not same_initial_configuration(run, cand):
                    continue
                if not same_clock_readings(run, cand):
                    continue
                if not _no_receives_at_or_after(cand, t):
                    continue
                if extends_runs(run, cand, t):
                    found = True
                    break
            if not found:
                violations.append(
                    f"({run.id}@{t}): no silent extension with the same "
                    f"configuration and clocks"
                )
    return CheckReport(
        "ng1",
        tuple(violations),
        ("quantifiers range over times 0..horizon only",),
    )


def extends_runs(a: Run, b: Run, t: int) -> bool:
    for agent in range(a.n_agents):
        for u in range(t + 1):
            if run_history(a, agent, u) != run_history(b, agent, u):
                return False
    return True


def check_ng2(system: System) -> CheckReport:
    """For every silent interval of one agent, some extension keeps that
    agent's history while everyone else receives nothing in it."""
    if system.n_agents < 2:
        raise ModelError("the condition concerns systems of two or more agents")
    violations = []
    for run in system.runs:
        for agent in system.agents:
            rec = set(_receive_times(run, agent))
            for t_lo in range(system.horizon + 1):
                for t_hi in range(t_lo + 1, system.horizon + 1):
                    if any(t_lo < x < t_hi for x in rec):
                        continue
                    if not _ng2_witness(system, run, agent, t_lo, t_hi):
                        violations.append(
                            f"run {run.id!r}, agent {agent}, interval "
                            f"({t_lo},{t_hi}): no witness extension"
                        )
    return CheckReport(
        "ng2",
        tuple(violations),
        ("quantifiers range over times 0..horizon only",),
    )


def _ng2_witness(system: System, run: Run, agent: int, t_lo: int, t_hi: int) -> bool:
    for cand in system.runs:
        if not same_initial_configuration(run, cand):
            continue
        if not same_clock_readings(run, cand):
            continue
        if not extends_runs(run, cand, t_lo):
            continue
        if any(
            run_history(run, agent, u) != run_history(cand, agent, u)
            for u in range(t_hi + 1)
        ):
            continue
        if any(
            any(t_lo <= x < t_hi for x in _receive_times(cand, other))
            for other in system.agents
            if other != agent
        ):
            continue
        return True
    return False


def check_ng1prime(system: System) -> CheckReport:
    """For every point and later time, some extension is silent on the
    whole closed interval between them."""
    violations = []
    for run in system.runs:
        for t in range(system.horizon + 1):
            for u in range(t, system.horizon + 1):
                found = False
                for cand in system.runs:
                    if not same_initial_configuration(run, cand):
                        continue
                    if not same_clock_readings(run, cand):
                        continue
                    if any(
                        any(t <= x <= u for x in _receive_times(cand, a))
                        for a in system.agents
                    ):
                        continue
                    if extends_runs(run, cand, t):
                        found = True
                        break
                if not found:
                    violations.append(
                        f"({run.id}@{t}): no extension silent on [{t},{u}]"
                    )
    return CheckReport(
        "ng1prime",
        tuple(violations),
        ("quantifiers range over times 0..horizon only",),
    )


def check_temporal_imprecision(system: System, delta: int = 1) -> CheckReport:
    """No agent pair can pin down their relative timing: for each probed
    point and ordered agent pair, some run shows the first agent's history
    shifted by ``delta`` while the second agent's history is unchanged.

    Probes stop ``delta`` ticks before the horizon, where the shifted
    counterpart still fits wholly inside the window; later points would
    quantify over structure the window cannot contain.
    """
    if delta < 1:
        raise ModelError("delta must be at least one tick")
    if system.n_agents < 2:
        raise ModelError("the condition concerns systems of two or more agents")
    violations = []
    for run in system.runs:
        for t in range(system.horizon - delta + 1):
            for i in system.agents:
                for j in system.agents:
                    if i == j:
                        continue
                    if not _timp_witness(system, run, t, i, j, delta):
                        violations.append(
                            f"({run.id}@{t}): no run shifts agent {i} by "
                            f"{delta} while fixing agent {j}"
                        )
    return CheckReport(
        "temporal_imprecision",
        tuple(violations),
        (
            f"probes truncated to times 0..horizon-{delta}; delta={delta}",
        ),
    )


def _timp_witness(system: System, run: Run, t: int, i: int, j: int, delta: int) -> bool:
    for cand in system.runs:
        if all(
            run_history(run, i, u) == run_history(cand, i, u + delta)
            for u in range(t)
            if u + delta <= system.horizon
        ) and all(
            run_history(run, j, u) == run_history(cand, j, u) for u in range(t)
        ):
            return True
    return False


def shift_run(
    run: Run,
    agent: int,
    delta: int,
    *,
    horizon: int,
    delivery: DeliveryModel | None = None,
) -> Run:
    """Delay one agent by ``delta`` ticks: wake-up, clock readings, and all
    of its events move later; everyone else is untouched. Messages to the
    agent thus take longer and messages from it are delivered faster.

    Raises when a moved event leaves [0, horizon] or, given a delivery
    model, when an implied delay leaves the model's bounds.
    """
    if delta < 0:
        raise ModelError("shifts are forward in time")
    if delta == 0:
        return run
    n = run.n_agents
    if not 0 <= agent < n:
        raise ModelError(f"agent {agent} not in run {run.id!r}")
    new_wake = list(run.wake_up)
    new_wake[agent] += delta
    if new_wake[agent] > horizon:
        raise ModelError(f"shift pushes agent {agent} wake-up past the horizon")

    send_times: dict[tuple[int, int, str], int] = {}
    for a in range(n):
        for tt, ev in run.timeline[a]:
            if ev.kind == SEND:
                send_times[(a, ev.peer, ev.message)] = tt

    def implied_delay(sender: int, recipient: int, message: str, recv_t: int) -> int:
        key = (sender, recipient, message)
        if key not in send_times:
            raise ModelError(
                f"receive of {message!r} by agent {recipient} has no matching send"
            )
        return recv_t - send_times[key]

    new_timeline: list[tuple[tuple[int, Event], ...]] = []
    for a in range(n):
        if a != agent:
            new_timeline.append(run.timeline[a])
            continue
        moved = []
        for tt, ev in run.timeline[a]:
            nt = tt + delta
            if nt > horizon:
                raise ModelError(
                    f"shift moves {ev.kind} of {ev.message!r} to {nt}, past the "
                    f"horizon"
                )
            moved.append((nt, ev))
        new_timeline.append(tuple(sorted(moved, key=timeline_sort_key)))

    if delivery is not None:
        for a in range(n):
            for tt, ev in new_timeline[a]:
                if ev.kind != RECEIVE:
                    continue
                sender = ev.peer
                send_t = send_times[(sender, a, ev.message)]
                if sender == agent:
                    send_t += delta
                if not delivery.admits_delay(tt - send_t):
                    raise ModelError(
                        f"shift gives message {ev.message!r} delay {tt - send_t}, "
                        f"outside the delivery bounds"
                    )

    new_clock = None
    if run.clock is not None:
        rows = []
        for a in range(n):
            if a != agent:
                rows.append(run.clock[a])
            else:
                readings = run.clock[a]
                trimmed = readings[: horizon - new_wake[agent] + 1]
                rows.append(trimmed)
        new_clock = tuple(rows)

    return Run(
        f"{run.id}+p{agent}d{delta}",
        tuple(new_wake),
        run.initial_state,
        tuple(new_timeline),
        new_clock,
    )


def close_under_shifts(
    system: System,
    delta: int = 1,
    *,
    delivery: DeliveryModel | None = None,
    max_runs: int = 4096,
) -> System:
    """Add every legal single-agent shift image, repeatedly, until no new
    run content appears."""
    runs = list(system.runs)
    seen = {r.content_key() for r in runs}
    frontier = list(system.runs)
    while frontier:
        nxt = []
        for run in frontier:
            for agent in range(system.n_agents):
                try:
                    image = shift_run(
                        run, agent, delta, horizon=system.horizon, delivery=delivery
                    )
                except ModelError:
                    continue
                key = image.content_key()
                if key in seen:
                    continue
                seen.add(key)
                runs.append(image)
                nxt.append(image)
                if len(runs) > max_runs:
                    raise ScheduleExplosionError(
                        f"shift closure exceeds {max_runs} runs"
                    )
        frontier = nxt
    return make_system(system.n_agents, system.horizon, runs)
