"""JSON encodings for systems, models, and scenario manifests.

Top level of a system file: ``schema`` (currently 1), ``agents`` (count),
``horizon``, ``runs``, and optionally ``valuation`` and ``policy``.
Details and examples live in docs/file-formats.md.
"""

from __future__ import annotations

import json
from typing import Any

from .evaluate import Model, Valuation, make_valuation
from .runs import ModelError, Point, Run, System, make_run, make_system
from .scenarios import Expectation, ScenarioManifest
from .views import policy_from_name

SCHEMA_VERSION = 1


class SchemaError(ModelError):
    """A file does not match the documented schema; the message names the
    offending field path."""


def _need(obj: dict, key: str, path: str) -> Any:
    if key not in obj:
        raise SchemaError(f"{path}.{key}: missing")
    return obj[key]


def parse_point(text: str) -> Point:
    """Points are addressed as ``run_id@time``; the last @ separates."""
    run_id, sep, t = text.rpartition("@")
    if not sep or not t.isdigit():
        raise SchemaError(f"point {text!r} is not of the form run_id@time")
    return Point(run_id, int(t))


def run_to_dict(run: Run) -> dict:
    events = []
    for agent in range(run.n_agents):
        for t, ev in run.timeline[agent]:
            events.append(
                {
                    "time": t,
                    "agent": agent,
                    "kind": ev.kind,
                    "peer": ev.peer,
                    "message": ev.message,
                }
            )
    events.sort(key=lambda e: (e["time"], e["agent"], e["kind"], e["peer"], e["message"]))
    out = {
        "id": run.id,
        "wake_up": {str(a): run.wake_up[a] for a in range(run.n_agents)},
        "initial_state": {str(a): run.initial_state[a] for a in range(run.n_agents)},
        "events": events,
    }
    if run.clock is not None:
        out["clock"] = {str(a): list(run.clock[a]) for a in range(run.n_agents)}
    return out


def run_from_dict(obj: dict, n_agents: int, horizon: int, path: str) -> Run:
    run_id = str(_need(obj, "id", path))
    wake_raw = _need(obj, "wake_up", path)
    init_raw = _need(obj, "initial_state", path)
    try:
        wake = [int(wake_raw[str(a)]) for a in range(n_agents)]
        init = [str(init_raw[str(a)]) for a in range(n_agents)]
    except KeyError as exc:
        raise SchemaError(f"{path}: missing agent entry {exc}") from None
    events = []
    for i, ev in enumerate(obj.get("events", [])):
        ev_path = f"{path}.events[{i}]"
        kind = _need(ev, "kind", ev_path)
        if kind not in ("send", "receive"):
            raise SchemaError(f"{ev_path}.kind: {kind!r} is not send or receive")
        events.append(
            (
                int(_need(ev, "time", ev_path)),
                int(_need(ev, "agent", ev_path)),
                kind,
                int(_need(ev, "peer", ev_path)),
                str(_need(ev, "message", ev_path)),
            )
        )
    clock = None
    if "clock" in obj and obj["clock"] is not None:
        raw = obj["clock"]
        try:
            clock = [list(map(int, raw[str(a)])) for a in range(n_agents)]
        except KeyError as exc:
            raise SchemaError(f"{path}.clock: missing agent entry {exc}") from None
    return make_run(
        run_id,
        horizon=horizon,
        wake_up=wake,
        initial_state=init,
        events=events,
        clock=clock,
    )


def system_to_dict(system: System) -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "agents": system.n_agents,
        "horizon": system.horizon,
        "runs": [run_to_dict(r) for r in system.runs],
    }


def system_from_dict(obj: dict, path: str = "system") -> System:
    schema = obj.get("schema", SCHEMA_VERSION)
    if schema != SCHEMA_VERSION:
        raise SchemaError(f"{path}.schema: unsupported version {schema!r}")
    n = int(_need(obj, "agents", path))
    horizon = int(_need(obj, "horizon", path))
    runs = [
        run_from_dict(r, n, horizon, f"{path}.runs[{i}]")
        for i, r in enumerate(_need(obj, "runs", path))
    ]
    return make_system(n, horizon, runs)


def valuation_to_dict(valuation: Valuation) -> dict:
    return {
        name: sorted([p.run_id, p.time] for p in valuation.truth_set(name))
        for name in valuation.names
    }


def valuation_from_dict(obj: dict, path: str = "valuation") -> Valuation:
    pairs = {}
    for name, entries in obj.items():
        pts = set()
        for i, entry in enumerate(entries):
            if not (isinstance(entry, list) and len(entry) == 2):
                raise SchemaError(f"{path}.{name}[{i}]: expected [run_id, time]")
            pts.add(Point(str(entry[0]), int(entry[1])))
        pairs[name] = pts
    return make_valuation(pairs)


def model_to_dict(model: Model) -> dict:
    out = system_to_dict(model.system)
    out["valuation"] = valuation_to_dict(model.valuation)
    out["policy"] = model.policy.name
    return out


def model_from_dict(obj: dict, path: str = "system") -> Model:
    system = system_from_dict(obj, path)
    valuation = valuation_from_dict(obj.get("valuation", {}), f"{path}.valuation")
    policy = policy_from_name(obj.get("policy", "complete"))
    return Model(system, valuation, policy)


def manifest_to_dict(manifest: ScenarioManifest) -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "scenario": manifest.name,
        "parameters": dict(manifest.parameters),
        "system": model_to_dict(manifest.model),
        "expectations": [
            {
                "formula": e.formula,
                "point": str(e.point) if e.point is not None else None,
                "expected": e.expected,
                "note": e.note,
            }
            for e in manifest.expectations
        ],
    }


def manifest_from_dict(obj: dict) -> ScenarioManifest:
    schema = obj.get("schema", SCHEMA_VERSION)
    if schema != SCHEMA_VERSION:
        raise SchemaError(f"manifest.schema: unsupported version {schema!r}")
    model = model_from_dict(_need(obj, "system", "manifest"), "manifest.system")
    expectations = []
    for i, e in enumerate(obj.get("expectations", [])):
        path = f"manifest.expectations[{i}]"
        point_text = e.get("point")
        expectations.append(
            Expectation(
                str(_need(e, "formula", path)),
                parse_point(point_text) if point_text is not None else None,
                bool(_need(e, "expected", path)),
                str(e.get("note", "")),
            )
        )
    return ScenarioManifest(
        str(obj.get("scenario", "unnamed")),
        dict(obj.get("parameters", {})),
        model,
        tuple(expectations),
    )


def dump_json(obj: dict) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def load_json(text: str) -> dict:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not valid JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise SchemaError("top level must be a JSON object")
    return obj
