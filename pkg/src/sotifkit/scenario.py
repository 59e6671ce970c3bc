"""Six-layer scenario descriptions and their data/logic checks."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Dict, Mapping, Optional, Tuple

from . import _json
from .errors import DocumentSyntaxError, DuplicateId
from .ontology import Kind, Ontology
from .report import Issue, sort_report

LAYER_NAMES = {
    1: "road network and traffic guidance objects",
    2: "roadside structures",
    3: "temporary modifications",
    4: "dynamic objects",
    5: "environmental conditions",
    6: "digital information",
}

LAYER_VOCABULARY = {
    1: frozenset({"road_segment", "lane_marking", "road_marking", "traffic_sign", "traffic_light"}),
    2: frozenset({"building", "vegetation", "street_lamp", "advertising_board", "guard_rail"}),
    3: frozenset({"roadwork_sign", "temporary_marking", "covered_marking"}),
    4: frozenset({"ego", "lead_vehicle", "vehicle", "pedestrian", "trailer", "animal"}),
    5: frozenset({"illumination", "precipitation", "road_weather", "fog"}),
    6: frozenset({"traffic_light_state", "switchable_sign", "v2x_message"}),
}

LEAD_PROFILES = ("constant_speed", "stopped", "scripted_decel")


@dataclass(frozen=True)
class SceneElement:
    kind: str
    layer: int
    attrs: Mapping[str, object] = field(default_factory=dict)

    def to_dict(self):
        out = {"kind": self.kind}
        if self.attrs:
            out["attrs"] = {k: _json.compact(v) for k, v in self.attrs.items()}
        return out


@dataclass(frozen=True)
class ParamAssignment:
    param: str
    value: Optional[float] = None
    range: Optional[Tuple[float, float]] = None

    @property
    def is_fixed(self):
        return self.range is None

    @property
    def interval(self) -> Tuple[float, float]:
        if self.range is None:
            return (self.value, self.value)
        return self.range

    def to_dict(self):
        if self.range is None:
            return {"param": self.param, "value": _json.compact(self.value)}
        return {"param": self.param, "range": [_json.compact(v) for v in self.range]}


@dataclass(frozen=True)
class FunctionUnderTest:
    """Minimal perception-and-brake model of an AEB-style function.

    ``illum_full`` is the illuminance (lux) at which detection range is no
    longer degraded; below it the range factor falls linearly to
    ``illum_floor_factor`` at 0 lux.
    """

    sensor_max_range: float = 200.0
    reaction_time: float = 0.5
    max_decel_at_mu1: float = 6.0
    illum_full: float = 1000.0
    illum_floor_factor: float = 0.5

    def with_overrides(self, overrides):
        return replace(self, **dict(overrides or {}))

    def to_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


FUT_FIELDS = tuple(f.name for f in fields(FunctionUnderTest))


@dataclass(frozen=True)
class Scenario:
    id: str
    odd_tags: Tuple[str, ...] = ()
    layers: Mapping[int, Tuple[SceneElement, ...]] = field(default_factory=dict)
    params: Tuple[ParamAssignment, ...] = ()
    function: Optional[Mapping[str, float]] = None

    def elements(self, layer=None):
        if layer is not None:
            return tuple(self.layers.get(layer, ()))
        return tuple(e for n in sorted(self.layers) for e in self.layers[n])

    def find(self, kind, layer=4):
        return [e for e in self.elements(layer) if e.kind == kind]

    def param(self, path) -> Optional[ParamAssignment]:
        for p in self.params:
            if p.param == path:
                return p
        return None

    @property
    def free_params(self):
        return [p for p in self.params if not p.is_fixed]

    def function_under_test(self, base: Optional[FunctionUnderTest] = None) -> FunctionUnderTest:
        return (base or FunctionUnderTest()).with_overrides(self.function)

    def to_dict(self):
        return {
            "id": self.id,
            "odd_tags": list(self.odd_tags),
            "layers": {str(n): [e.to_dict() for e in self.layers[n]] for n in sorted(self.layers)},
            "params": [p.to_dict() for p in self.params],
            "function": dict(self.function) if self.function is not None else None,
        }

    def dumps(self):
        return _json.dumps(self.to_dict())


def _parse_attrs(raw, label):
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise DocumentSyntaxError("attrs must be an object", entity=label)
    attrs = {}
    for key, value in raw.items():
        if isinstance(value, str):
            attrs[key] = value
        else:
            attrs[key] = _json.number(value, label, f"attr {key}")
    return attrs


def load_scenario(document) -> Scenario:
    data = _json.parse(document, "scenario document")
    _json.check_keys(data, ("id", "odd_tags", "layers", "params", "function"), required=("id",), what="scenario")
    sid = _json.string(data["id"], "<scenario>", "id")

    tags = data.get("odd_tags") or []
    if not isinstance(tags, list) or not all(isinstance(t, str) for t in tags):
        raise DocumentSyntaxError("odd_tags must be a list of strings", entity=sid)

    raw_layers = data.get("layers") or {}
    if not isinstance(raw_layers, dict):
        raise DocumentSyntaxError("layers must be an object keyed by layer number", entity=sid)
    layers: Dict[int, Tuple[SceneElement, ...]] = {}
    for key, items in raw_layers.items():
        if key not in {str(n) for n in LAYER_NAMES}:
            raise DocumentSyntaxError(f"layer {key!r} is not one of 1..6", entity=f"layer{key}")
        n = int(key)
        if not isinstance(items, list):
            raise DocumentSyntaxError("layer content must be a list", entity=f"layer{n}")
        elements = []
        for i, raw in enumerate(items):
            label = f"layer{n}[{i}]"
            _json.check_keys(raw, ("kind", "attrs"), required=("kind",), entity=label, what="scene element")
            kind = _json.string(raw["kind"], label, "kind")
            elements.append(SceneElement(kind, n, _parse_attrs(raw.get("attrs"), label)))
        layers[n] = tuple(elements)

    raw_params = data.get("params") or []
    if not isinstance(raw_params, list):
        raise DocumentSyntaxError("params must be a list", entity=sid)
    params = []
    seen = set()
    for i, raw in enumerate(raw_params):
        label = raw.get("param") if isinstance(raw, dict) and isinstance(raw.get("param"), str) else f"params[{i}]"
        _json.check_keys(raw, ("param", "value", "range"), required=("param",), entity=label, what="param assignment")
        if ("value" in raw) == ("range" in raw):
            raise DocumentSyntaxError("param assignment needs exactly one of value/range", entity=label)
        path = _json.string(raw["param"], label, "param")
        if path in seen:
            raise DuplicateId(path, "param assignment")
        seen.add(path)
        if "value" in raw:
            params.append(ParamAssignment(path, value=_json.number(raw["value"], label)))
        else:
            params.append(ParamAssignment(path, range=_json.pair(raw["range"], label, "range")))

    function = data.get("function")
    if function is not None:
        _json.check_keys(function, FUT_FIELDS, entity="function", what="function")
        function = {k: _json.number(v, f"function/{k}", k) for k, v in function.items()}

    return Scenario(sid, tuple(tags), layers, tuple(params), function)


def _check_number(issues, label, attrs, key, minimum=0.0, strict=False, required=False):
    if key not in attrs:
        if required:
            issues.append(Issue(label, f"missing attribute {key}"))
        return
    value = attrs[key]
    if isinstance(value, str) or value < minimum or (strict and value == minimum):
        op = ">" if strict else ">="
        issues.append(Issue(label, f"attribute {key} must be a number {op} {minimum:g}"))


def validate_scenario(s: Scenario, o: Ontology):
    issues = []
    for n, elements in s.layers.items():
        for i, e in enumerate(elements):
            label = f"layer{n}/{e.kind}[{i}]"
            if n not in LAYER_VOCABULARY:
                issues.append(Issue(label, f"layer {n} is not one of 1..6"))
            elif e.kind not in LAYER_VOCABULARY[n]:
                issues.append(Issue(label, f"unknown element kind {e.kind!r} for layer {n}"))
            if e.layer != n:
                issues.append(Issue(label, f"element declares layer {e.layer} but sits in layer {n}"))

    egos = s.find("ego")
    if len(egos) != 1:
        issues.append(Issue(f"{s.id}/layer4", f"exactly one ego required, found {len(egos)}"))
    for i, ego in enumerate(egos):
        _check_number(issues, f"layer4/ego[{i}]", ego.attrs, "speed")
    for i, lead in enumerate(s.find("lead_vehicle")):
        label = f"layer4/lead_vehicle[{i}]"
        _check_number(issues, label, lead.attrs, "speed")
        _check_number(issues, label, lead.attrs, "initial_gap", strict=True)
        profile = lead.attrs.get("profile", "constant_speed")
        if profile not in LEAD_PROFILES:
            issues.append(Issue(label, f"unknown lead profile {profile!r}"))
        if profile == "scripted_decel":
            _check_number(issues, label, lead.attrs, "decel", strict=True, required=True)
            _check_number(issues, label, lead.attrs, "decel_start", required=True)

    for p in s.params:
        entity = o.entities.get(p.param)
        if entity is None:
            issues.append(Issue(p.param, "unresolved param"))
            continue
        if entity.kind is not Kind.PARAM:
            issues.append(Issue(p.param, f"{entity.kind.value} cannot be assigned, only PARAMs"))
            continue
        lo, hi = p.interval
        if lo > hi:
            issues.append(Issue(p.param, "range lower bound exceeds upper bound"))
        blo, bhi = entity.bounds
        if min(lo, hi) < blo:
            issues.append(Issue(p.param, "below physical bounds"))
        if max(lo, hi) > bhi:
            issues.append(Issue(p.param, "above physical bounds"))

    if s.function is not None:
        for key, value in s.function.items():
            label = f"function/{key}"
            if key not in FUT_FIELDS:
                issues.append(Issue(label, "unknown function field"))
            elif not math.isfinite(value) or value <= 0:
                issues.append(Issue(label, "must be positive"))
            elif key == "illum_floor_factor" and value > 1:
                issues.append(Issue(label, "must not exceed 1"))
    return sort_report(issues)


def validate_document(document, o: Ontology):
    try:
        s = load_scenario(document)
    except DocumentSyntaxError as exc:
        return None, [Issue(exc.entity or "<document>", str(exc))]
    except DuplicateId as exc:
        return None, [Issue(exc.ident, str(exc))]
    return s, validate_scenario(s, o)


def assignment_value(s: Scenario, path, default=None):
    """Fixed value of ``path`` in ``s`` (midpoint when the scenario gives a range)."""
    p = s.param(path)
    if p is None:
        return default
    lo, hi = p.interval
    return 0.5 * (lo + hi)

