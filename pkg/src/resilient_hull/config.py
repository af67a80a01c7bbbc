"""JSON run configuration for simulations.

A config has four sections: ``problem`` (state dimension and initial
states), ``resilience`` (kappa and solver tolerance), ``simulation``
(topology, update law, adversary, metric, rounds, seed) and ``output``
(file paths).  Documents are validated against :data:`SCHEMA` before
anything is computed; unknown keys are rejected and errors carry the line
number of the offending value.
"""

from __future__ import annotations

import copy
import hashlib
import json
import re
from json.decoder import scanstring
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from .qp import DEFAULT_TOL
from .sim import (
    LINEAR_EQUATIONS,
    AdversaryModel,
    AgentSpec,
    Metric,
    Role,
    SimConfig,
    UpdateLaw,
    attack_schedule,
    states_on_constraints,
    strided_targets,
    uniform_box_states,
)

_VEC = {"type": "array", "items": {"type": "number"}, "minItems": 1}
_MAT = {"type": "array", "items": _VEC, "minItems": 1}
_INT_LIST = {"type": "array", "items": {"type": "integer", "minimum": 0}}


def _obj(properties: dict, required: tuple[str, ...] = ()) -> dict:
    return {
        "type": "object",
        "properties": properties,
        "required": list(required),
        "additionalProperties": False,
    }


SCHEMA: dict = _obj(
    {
        "problem": _obj(
            {
                "dimension": {"type": "integer", "minimum": 1},
                "initial": _obj(
                    {
                        "kind": {"enum": ["uniform_box", "on_constraints", "explicit"]},
                        "lo": _VEC,
                        "hi": _VEC,
                        "scale": {"type": "number", "minimum": 0},
                        "states": _MAT,
                    },
                    ("kind",),
                ),
            },
            ("dimension", "initial"),
        ),
        "resilience": _obj(
            {
                "kappa": {"type": "integer", "minimum": 0},
                "tol": {"type": "number", "exclusiveMinimum": 0},
            }
        ),
        "simulation": _obj(
            {
                "seed": {"type": "integer", "minimum": 0},
                "rounds": {"type": "integer", "minimum": 0},
                "update": {"enum": [law.value for law in UpdateLaw]},
                "topology": _obj(
                    {
                        "num_normal": {"type": "integer", "minimum": 1},
                        "offsets": {"type": "array", "items": {"type": "integer"}},
                        "num_malicious": {"type": "integer", "minimum": 0},
                        "attach": {"type": "integer", "minimum": 0},
                        "stride": {"type": "integer", "minimum": 1},
                        "period": {"type": "integer", "minimum": 1},
                        "targets": {"type": "array", "items": {"type": "array", "items": _INT_LIST}, "minItems": 1},
                    }
                ),
                "constraints": {
                    "oneOf": [
                        {"const": "linear_example"},
                        {"type": "array", "items": _obj({"A": _MAT, "b": _VEC}, ("A", "b"))},
                    ]
                },
                "adversary": _obj(
                    {
                        "kind": {"enum": ["uniform_box", "constant", "drift"]},
                        "lo": _VEC,
                        "hi": _VEC,
                        "value": _VEC,
                        "rate": _VEC,
                    },
                    ("kind",),
                ),
                "metric": _obj(
                    {
                        "kind": {"enum": ["consecutive", "distance"]},
                        "target": _VEC,
                    },
                    ("kind",),
                ),
            },
            ("rounds", "update"),
        ),
        "output": _obj(
            {
                "trace": {"type": "string", "minLength": 1},
                "svg": {"type": "string", "minLength": 1},
            }
        ),
    },
    ("problem", "simulation"),
)

_TOPOLOGY_DEFAULTS = {
    "num_normal": 9,
    "offsets": [1, 2, 4],
    "num_malicious": 2,
    "attach": 2,
    "stride": 3,
    "period": 1,
}


class ConfigError(ValueError):
    """A config document failed to parse or validate."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


def _value_offsets(text: str) -> dict[tuple, int]:
    """Character offset of every value in a syntactically valid JSON text,
    keyed by its path of object keys and array indices."""
    decoder = json.JSONDecoder()
    ws = re.compile(r"\s*")
    found: dict[tuple, int] = {}

    def skip(i: int) -> int:
        return ws.match(text, i).end()

    def value(i: int, path: tuple) -> int:
        i = skip(i)
        found[path] = i
        if text[i] == "{":
            i = skip(i + 1)
            if text[i] == "}":
                return i + 1
            while True:
                key, i = scanstring(text, i + 1)
                i = skip(i) + 1  # past ':'
                i = skip(value(i, path + (key,)))
                if text[i] == "}":
                    return i + 1
                i = skip(i + 1)
        if text[i] == "[":
            i = skip(i + 1)
            if text[i] == "]":
                return i + 1
            k = 0
            while True:
                i = skip(value(i, path + (k,)))
                k += 1
                if text[i] == "]":
                    return i + 1
                i += 1
        _, end = decoder.raw_decode(text, i)
        return end

    value(0, ())
    return found


def _line_of(text: str, offset: int) -> int:
    return text.count("\n", 0, offset) + 1


def parse_config(text: str) -> dict:
    """Parse and schema-validate a config document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", exc.lineno) from None
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        err = errors[0]
        offsets = _value_offsets(text)
        path = tuple(err.absolute_path)
        if err.validator == "additionalProperties" and isinstance(err.instance, dict):
            extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
            if extra:
                path = path + (extra[0],)
        line = _line_of(text, offsets.get(path, offsets[tuple(err.absolute_path)]))
        where = "/".join(map(str, err.absolute_path)) or "<root>"
        raise ConfigError(f"{where}: {err.message}", line)
    return doc


def load_config(path: str | Path) -> dict:
    return parse_config(Path(path).read_text())


def normalize(doc: dict) -> dict:
    """Copy of ``doc`` with every default filled in, so that two documents
    describing the same run normalize identically."""
    cfg = copy.deepcopy(doc)
    n = cfg["problem"]["dimension"]
    res = cfg.setdefault("resilience", {})
    res.setdefault("kappa", 0)
    res.setdefault("tol", DEFAULT_TOL)
    sim = cfg["simulation"]
    sim.setdefault("seed", 0)
    topo = sim.setdefault("topology", {})
    for key, val in _TOPOLOGY_DEFAULTS.items():
        topo.setdefault(key, copy.deepcopy(val))
    if "targets" not in topo:
        topo["targets"] = strided_targets(
            topo["num_normal"], topo["num_malicious"], topo["attach"], topo["stride"], topo["period"]
        )
    # attach/stride/period only generate targets; once expanded they carry no meaning
    for key in ("attach", "stride", "period"):
        topo.pop(key)
    topo["num_malicious"] = len(topo["targets"][0])
    adv = sim.setdefault("adversary", {"kind": "uniform_box"})
    if adv["kind"] == "uniform_box":
        adv.setdefault("lo", [0.0] * n)
        adv.setdefault("hi", [2.0] * n)
    else:
        adv.setdefault("value", [0.0] * n)
        if adv["kind"] == "drift":
            adv.setdefault("rate", [0.0] * n)
    sim.setdefault("metric", {"kind": "consecutive"})
    init = cfg["problem"]["initial"]
    if init["kind"] == "uniform_box":
        init.setdefault("lo", [0.0] * n)
        init.setdefault("hi", [2.0] * n)
    elif init["kind"] == "on_constraints":
        init.setdefault("scale", 1.0)
    cfg.setdefault("output", {})
    return cfg


def config_hash(doc: dict) -> str:
    """SHA-256 of the normalized config without its ``output`` section."""
    semantic = {k: v for k, v in normalize(doc).items() if k != "output"}
    canonical = json.dumps(semantic, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(canonical.encode()).hexdigest()


def _constraints(spec, num_normal: int) -> list[tuple[np.ndarray, np.ndarray]] | None:
    if spec is None:
        return None
    if spec == "linear_example":
        if num_normal != len(LINEAR_EQUATIONS):
            raise ConfigError(f"linear_example needs exactly {len(LINEAR_EQUATIONS)} normal agents")
        pairs = LINEAR_EQUATIONS
    else:
        if len(spec) != num_normal:
            raise ConfigError(f"{len(spec)} constraints given for {num_normal} normal agents")
        pairs = [(c["A"], c["b"]) for c in spec]
    return [(np.array(A, dtype=float), np.array(b, dtype=float)) for A, b in pairs]


def _check_len(vec, n: int, what: str) -> None:
    if len(vec) != n:
        raise ConfigError(f"{what} has length {len(vec)}, expected dimension {n}")


def build_sim_config(doc: dict, seed: int | None = None) -> SimConfig:
    """Turn a validated document into a :class:`SimConfig`.

    ``seed`` overrides the document's seed (used for sweeps).
    """
    cfg = normalize(doc)
    if seed is not None:
        cfg["simulation"]["seed"] = int(seed)
    n = cfg["problem"]["dimension"]
    sim = cfg["simulation"]
    seed = sim["seed"]
    topo = sim["topology"]
    num_normal = topo["num_normal"]
    try:
        schedule = attack_schedule(num_normal, topo["offsets"], topo["targets"])
    except ValueError as exc:
        raise ConfigError(f"simulation/topology: {exc}") from None

    law = UpdateLaw(sim["update"])
    constraints = _constraints(sim.get("constraints"), num_normal)
    if law.projected and constraints is None:
        raise ConfigError(f"{law.value} needs simulation/constraints")
    if constraints is not None:
        for A, b in constraints:
            if A.ndim != 2 or A.shape[1] != n or A.shape[0] != b.shape[0]:
                raise ConfigError("constraint shapes do not match the dimension")
    kappa = cfg["resilience"]["kappa"]
    try:
        agents = [
            AgentSpec(Role.NORMAL, law, constraints[i] if constraints else None, kappa) for i in range(num_normal)
        ]
    except ValueError as exc:
        raise ConfigError(f"simulation/constraints: {exc}") from None
    agents += [AgentSpec(Role.MALICIOUS)] * topo["num_malicious"]

    init = cfg["problem"]["initial"]
    if init["kind"] == "uniform_box":
        _check_len(init["lo"], n, "problem/initial/lo")
        _check_len(init["hi"], n, "problem/initial/hi")
        x0 = uniform_box_states(num_normal, init["lo"], init["hi"], seed)
    elif init["kind"] == "on_constraints":
        if constraints is None:
            raise ConfigError("problem/initial kind on_constraints needs simulation/constraints")
        x0 = states_on_constraints(constraints, seed, init["scale"])
    else:
        if "states" not in init:
            raise ConfigError("problem/initial kind explicit needs states")
        x0 = np.array(init["states"], dtype=float)
        if x0.shape != (num_normal, n):
            raise ConfigError(f"problem/initial/states must be {num_normal} x {n}")
    x0 = np.vstack([x0, np.zeros((topo["num_malicious"], n))])

    adv = sim["adversary"]
    for key in ("lo", "hi", "value", "rate"):
        if key in adv:
            _check_len(adv[key], n, f"simulation/adversary/{key}")
    metric = sim["metric"]
    if "target" in metric:
        _check_len(metric["target"], n, "simulation/metric/target")
    try:
        adversary = AdversaryModel(
            kind=adv["kind"],
            lo=tuple(adv.get("lo", [0.0] * n)),
            hi=tuple(adv.get("hi", [0.0] * n)),
            value=tuple(adv.get("value", [0.0] * n)),
            rate=tuple(adv.get("rate", [0.0] * n)),
            seed=seed,
        )
        return SimConfig(
            schedule=schedule,
            agents=tuple(agents),
            initial_states=x0,
            rounds=sim["rounds"],
            adversary=adversary,
            metric=Metric(metric["kind"], tuple(metric["target"]) if "target" in metric else None),
            tol=cfg["resilience"]["tol"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def seed_of(doc: dict) -> int:
    return normalize(doc)["simulation"]["seed"]


def example_config(name: str) -> dict:
    """Ready-made configs for the bundled scenarios."""
    base: dict[str, Any] = {
        "problem": {"dimension": 2, "initial": {"kind": "uniform_box", "lo": [0.0, 0.0], "hi": [2.0, 2.0]}},
        "resilience": {"kappa": 1},
        "simulation": {
            "seed": 0,
            "rounds": 200,
            "update": "ResilientConsensus",
            "adversary": {"kind": "uniform_box", "lo": [0.0, 0.0], "hi": [2.0, 2.0]},
            "metric": {"kind": "consecutive"},
        },
    }
    if name == "consensus":
        return base
    if name == "consensus-plain":
        base["simulation"]["update"] = "PlainConsensus"
        return base
    if name == "consensus-switching":
        base["simulation"]["topology"] = {"period": 3}
        return base
    if name == "linear":
        base["problem"]["initial"] = {"kind": "on_constraints", "scale": 1.0}
        base["simulation"].update(
            rounds=300,
            update="ResilientProjectedLinear",
            constraints="linear_example",
            topology={"period": 3},
            metric={"kind": "distance", "target": [1.0, 1.0]},
        )
        return base
    raise KeyError(f"unknown example {name!r}")


EXAMPLES = ("consensus", "consensus-plain", "consensus-switching", "linear")
