"""Scenario constraints, triggering conditions and their composition.

A triggering condition (TC) is a named set of scenario constraints plus
optional sub-conditions.  ``flatten`` collects every constraint of a composite
TC and ``merge`` folds them into one effective constraint per parameter.

Merge rule per parameter:

* every non-FACTOR constraint becomes a closed interval (MAX/MIN fill the open
  side from the physical bounds, or +-inf);
* compatible intervals are intersected;
* when the intervals conflict (empty intersection, or two intervals merely
  touching in one point) the most limiting constraint overrides: the bound on
  the limiting side is the most extreme one, the bound on the favourable side
  stays the most restrictive one;
* FACTOR values multiply.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Mapping, Optional, Tuple, Union

from . import _json
from .errors import (
    CyclicComposition,
    DocumentSyntaxError,
    EmptySamplingRange,
    InfeasibleConstraints,
    NotFound,
    UnknownSubCondition,
    UnresolvedParam,
    WrongKind,
)
from .ontology import Direction, Kind, Ontology, OntologyEntity
from .report import Issue, sort_report
from .scenario import Scenario

Interval = Tuple[float, float]


class ConstraintType(str, Enum):
    MAX = "MAX"
    MIN = "MIN"
    RANGE = "RANGE"
    FACTOR = "FACTOR"
    FIXED = "FIXED"


@dataclass(frozen=True)
class ScenarioConstraint:
    param: str
    ctype: ConstraintType
    value: Union[float, Interval]

    def interval(self, entity: OntologyEntity) -> Interval:
        lo, hi = entity.bounds
        if self.ctype is ConstraintType.MAX:
            return (lo, self.value)
        if self.ctype is ConstraintType.MIN:
            return (self.value, hi)
        if self.ctype is ConstraintType.RANGE:
            return tuple(self.value)
        if self.ctype is ConstraintType.FIXED:
            return (self.value, self.value)
        raise ValueError("FACTOR constraints have no interval")

    def sort_key(self):
        value = self.value if isinstance(self.value, tuple) else (self.value,)
        return (self.param, self.ctype.value, value)

    def to_dict(self):
        value = [_json.compact(v) for v in self.value] if isinstance(self.value, tuple) else _json.compact(self.value)
        return {"param": self.param, "type": self.ctype.value, "value": value}


@dataclass(frozen=True)
class TriggeringCondition:
    id: str
    name: str = ""
    constraints: Tuple[ScenarioConstraint, ...] = ()
    sub_conditions: Tuple[str, ...] = ()

    def to_dict(self):
        return {
            "id": self.id,
            "name": self.name,
            "constraints": [c.to_dict() for c in self.constraints],
            "sub_conditions": list(self.sub_conditions),
        }

    def dumps(self):
        return _json.dumps(self.to_dict())


def _parse_constraint(raw, label):
    _json.check_keys(raw, ("param", "type", "value"), required=("param", "type", "value"), entity=label, what="constraint")
    param = _json.string(raw["param"], label, "param")
    try:
        ctype = ConstraintType(raw["type"])
    except ValueError:
        raise DocumentSyntaxError(f"unknown constraint type {raw['type']!r}", entity=label) from None
    if ctype is ConstraintType.RANGE:
        value = _json.pair(raw["value"], label, "RANGE value")
    else:
        value = _json.number(raw["value"], label, f"{ctype.value} value")
    return ScenarioConstraint(param, ctype, value)


def load_tc(document) -> TriggeringCondition:
    data = _json.parse(document, "triggering-condition document")
    _json.check_keys(data, ("id", "name", "constraints", "sub_conditions"), required=("id",), what="triggering condition")
    tid = _json.string(data["id"], "<tc>", "id")
    name = _json.string(data.get("name", ""), tid, "name")
    raw_constraints = data.get("constraints") or []
    subs = data.get("sub_conditions") or []
    if not isinstance(raw_constraints, list):
        raise DocumentSyntaxError("constraints must be a list", entity=tid)
    if not isinstance(subs, list) or not all(isinstance(s, str) for s in subs):
        raise DocumentSyntaxError("sub_conditions must be a list of ids", entity=tid)
    constraints = tuple(_parse_constraint(c, f"{tid}/constraints[{i}]") for i, c in enumerate(raw_constraints))
    return TriggeringCondition(tid, name, constraints, tuple(subs))


def validate_tc(tc: TriggeringCondition, o: Ontology, known_ids=None):
    """Check constraint invariants against the ontology.

    ``known_ids`` (when given) is the set of TC ids sub-conditions may refer to.
    """
    issues = []
    for i, c in enumerate(tc.constraints):
        label = f"{tc.id}/constraints[{i}]"
        entity = o.entities.get(c.param)
        if entity is None:
            issues.append(Issue(label, f"unresolved param {c.param}"))
            continue
        if entity.kind is not Kind.PARAM:
            issues.append(Issue(label, f"{c.param} is a {entity.kind.value}; only PARAMs can be constrained"))
            continue
        if c.ctype is ConstraintType.RANGE:
            lo, hi = c.value
            if lo > hi:
                issues.append(Issue(label, "RANGE lower bound exceeds upper bound"))
        elif c.ctype is ConstraintType.FACTOR:
            if not 0 < c.value <= 1:
                issues.append(Issue(label, "FACTOR must lie in (0, 1]"))
        else:
            lo, hi = entity.bounds
            if not lo <= c.value <= hi:
                issues.append(Issue(label, f"{c.ctype.value} value outside physical bounds"))
    if known_ids is not None:
        for sub in tc.sub_conditions:
            if sub not in known_ids:
                issues.append(Issue(tc.id, f"unknown sub-condition {sub}"))
    if tc.id in tc.sub_conditions:
        issues.append(Issue(tc.id, "triggering condition lists itself as a sub-condition"))
    return sort_report(issues)


Lookup = Union[Mapping[str, TriggeringCondition], Callable[[str], TriggeringCondition]]


def _lookup(lookup: Lookup, ident) -> TriggeringCondition:
    try:
        return lookup(ident) if callable(lookup) else lookup[ident]
    except (KeyError, NotFound):
        raise UnknownSubCondition(f"unknown sub-condition {ident!r}") from None


def flatten(tc: TriggeringCondition, lookup: Lookup) -> List[Tuple[str, ScenarioConstraint]]:
    """Depth-first list of ``(tc_id, constraint)``: own constraints first, then each sub-condition in order."""
    out: List[Tuple[str, ScenarioConstraint]] = []

    def visit(node, stack):
        if node.id in stack:
            chain = " -> ".join(stack + (node.id,))
            raise CyclicComposition(f"cyclic composition: {chain}")
        stack = stack + (node.id,)
        out.extend((node.id, c) for c in node.constraints)
        for sub in node.sub_conditions:
            visit(_lookup(lookup, sub), stack)

    visit(tc, ())
    return out


@dataclass(frozen=True)
class Contribution:
    tc_id: str
    constraint: ScenarioConstraint
    role: str = "applied"  # applied | overridden
    overridden_by: Optional[str] = None

    def to_dict(self):
        out = {"tc_id": self.tc_id, "role": self.role, **self.constraint.to_dict()}
        if self.overridden_by is not None:
            out["overridden_by"] = self.overridden_by
        return out


@dataclass(frozen=True)
class ParamEffect:
    param: str
    unit: Optional[str]
    interval: Optional[Interval] = None  # None: no interval constraint, only factors
    factor: float = 1.0
    overridden: bool = False
    provenance: Tuple[Contribution, ...] = ()

    def values(self):
        return (self.interval, self.factor)

    def to_dict(self):
        interval = None
        if self.interval is not None:
            interval = [None if math.isinf(v) else _json.compact(v) for v in self.interval]
        return {
            "param": self.param,
            "unit": self.unit,
            "admissible_interval": interval,
            "factor": self.factor,
            "overridden": self.overridden,
            "provenance": [p.to_dict() for p in self.provenance],
        }


@dataclass(frozen=True)
class EffectiveConstraintSet:
    entries: Dict[str, ParamEffect] = field(default_factory=dict)
    warnings: Tuple[str, ...] = ()
    tc_ids: Tuple[str, ...] = ()

    def __getitem__(self, param) -> ParamEffect:
        return self.entries[param]

    def __contains__(self, param):
        return param in self.entries

    def __len__(self):
        return len(self.entries)

    def values(self):
        """Entry values without provenance, for equality checks."""
        return {p: e.values() for p, e in self.entries.items()}

    def as_constraints(self, tc_id="merged") -> List[Tuple[str, ScenarioConstraint]]:
        """Re-express the set as plain constraints (one RANGE/MAX/MIN and one FACTOR per param)."""
        out = []
        for p, e in self.entries.items():
            if e.interval is not None:
                lo, hi = e.interval
                if math.isinf(lo) and math.isinf(hi):
                    pass
                elif math.isinf(lo):
                    out.append((tc_id, ScenarioConstraint(p, ConstraintType.MAX, hi)))
                elif math.isinf(hi):
                    out.append((tc_id, ScenarioConstraint(p, ConstraintType.MIN, lo)))
                else:
                    out.append((tc_id, ScenarioConstraint(p, ConstraintType.RANGE, (lo, hi))))
            if e.factor != 1.0 or e.interval is None:
                out.append((tc_id, ScenarioConstraint(p, ConstraintType.FACTOR, e.factor)))
        return out

    def to_dict(self):
        return {
            "tc_ids": list(self.tc_ids),
            "entries": [e.to_dict() for e in self.entries.values()],
            "warnings": list(self.warnings),
        }


def _resolve(o: Ontology, path) -> OntologyEntity:
    try:
        return o.resolve_param(path)
    except (NotFound, WrongKind) as exc:
        raise UnresolvedParam(str(exc)) from None


def _product(values):
    # sorted so the float result does not depend on input order
    return math.prod(sorted(values))


def _merge_param(entity: OntologyEntity, items, warnings) -> ParamEffect:
    factors = [c.value for _, c in items if c.ctype is ConstraintType.FACTOR]
    bounded = [(tc, c, c.interval(entity)) for tc, c in items if c.ctype is not ConstraintType.FACTOR]
    factor = _product(factors) if factors else 1.0
    if not bounded:
        prov = tuple(Contribution(tc, c) for tc, c in items)
        return ParamEffect(entity.id, entity.unit, None, factor, False, prov)

    fixed = sorted({c.value for _, c, _ in bounded if c.ctype is ConstraintType.FIXED})
    if len(fixed) > 1:
        raise InfeasibleConstraints(
            f"{entity.id}: FIXED values {', '.join(f'{v:g}' for v in fixed)} cannot hold at once"
        )

    lo = max(iv[0] for _, _, iv in bounded)
    hi = min(iv[1] for _, _, iv in bounded)
    has_point = any(iv[0] == iv[1] for _, _, iv in bounded)
    conflict = lo > hi or (lo == hi and not has_point)
    if not conflict:
        prov = tuple(Contribution(tc, c) for tc, c in items)
        return ParamEffect(entity.id, entity.unit, (lo, hi), factor, False, prov)

    lower_worse = entity.direction is Direction.LOWER_IS_WORSE
    if lower_worse:
        result = (min(iv[0] for _, _, iv in bounded), min(iv[1] for _, _, iv in bounded))
        extreme = [b for b in bounded if b[2][0] == result[0]]
    else:
        result = (max(iv[0] for _, _, iv in bounded), max(iv[1] for _, _, iv in bounded))
        extreme = [b for b in bounded if b[2][1] == result[1]]
    # tie-break: narrower interval, then smaller TC id
    extreme.sort(key=lambda b: (b[2][1] - b[2][0], b[0], b[1].sort_key()))
    winner = extreme[0][0]
    if len({b[2] for b in extreme}) > 1:
        warnings.append(
            f"DegenerateOverride: {entity.id}: {len(extreme)} constraints share the limiting bound; "
            f"{winner} wins by tie-break"
        )

    prov = []
    for tc, c in items:
        if c.ctype is ConstraintType.FACTOR:
            prov.append(Contribution(tc, c))
            continue
        iv = c.interval(entity)
        if iv[0] == result[0] or iv[1] == result[1]:
            prov.append(Contribution(tc, c))
        else:
            prov.append(Contribution(tc, c, "overridden", winner))
    return ParamEffect(entity.id, entity.unit, result, factor, True, tuple(prov))


def merge(constraints, ontology: Ontology) -> EffectiveConstraintSet:
    """Fold ``(tc_id, constraint)`` pairs into one effective entry per parameter."""
    grouped: Dict[str, list] = {}
    for tc, c in constraints:
        _resolve(ontology, c.param)
        grouped.setdefault(c.param, []).append((tc, c))
    entries = {}
    warnings: List[str] = []
    for param in sorted(grouped):
        items = sorted(grouped[param], key=lambda item: (item[0], item[1].sort_key()))
        entries[param] = _merge_param(ontology.get(param), items, warnings)
    tc_ids = tuple(sorted({tc for tc, _ in constraints}))
    return EffectiveConstraintSet(entries, tuple(warnings), tc_ids)


def compose(tc_ids, lookup: Lookup, ontology: Ontology) -> EffectiveConstraintSet:
    """Flatten and merge several triggering conditions selected together."""
    pairs = []
    for ident in tc_ids:
        try:
            tc = lookup(ident) if callable(lookup) else lookup[ident]
        except KeyError:
            raise NotFound(f"unknown triggering condition {ident!r}") from None
        pairs.extend(flatten(tc, lookup))
    ecs = merge(pairs, ontology)
    return EffectiveConstraintSet(ecs.entries, ecs.warnings, tuple(tc_ids))


@dataclass(frozen=True)
class ParamDomain:
    """Sampling domain of one scenario parameter: interval, then factor, then clamp."""

    param: str
    interval: Interval
    factor: float = 1.0
    bounds: Interval = (-math.inf, math.inf)

    @property
    def is_free(self):
        return self.interval[0] < self.interval[1]

    def transform(self, value):
        lo, hi = self.bounds
        return min(max(value * self.factor, lo), hi)

    @property
    def effective_interval(self) -> Interval:
        return (self.transform(self.interval[0]), self.transform(self.interval[1]))


@dataclass(frozen=True)
class ConstrainedScenario:
    scenario: Scenario
    domains: Dict[str, ParamDomain]
    tc_ids: Tuple[str, ...] = ()

    @property
    def is_nominal(self):
        return not self.tc_ids


def unconstrained(s: Scenario, ontology: Ontology) -> ConstrainedScenario:
    """The scenario's own parameter ranges, no triggering conditions applied."""
    domains = {}
    for p in sorted(s.params, key=lambda p: p.param):
        entity = _resolve(ontology, p.param)
        domains[p.param] = ParamDomain(p.param, p.interval, 1.0, entity.bounds)
    return ConstrainedScenario(s, domains, ())


def apply_to_scenario(ecs: EffectiveConstraintSet, s: Scenario, ontology: Ontology) -> ConstrainedScenario:
    base = unconstrained(s, ontology)
    domains = dict(base.domains)
    for param, effect in ecs.entries.items():
        entity = _resolve(ontology, param)
        current = domains.get(param)
        if current is None:
            interval = effect.interval or entity.bounds
            if math.isinf(interval[0]) or math.isinf(interval[1]):
                raise EmptySamplingRange(f"{param}: no finite sampling range (scenario leaves it free, TC gives no bounds)")
        elif effect.interval is None:
            interval = current.interval
        else:
            lo = max(current.interval[0], effect.interval[0])
            hi = min(current.interval[1], effect.interval[1])
            if lo > hi:
                raise EmptySamplingRange(
                    f"{param}: scenario range {list(current.interval)} and admissible interval "
                    f"{list(effect.interval)} are disjoint"
                )
            interval = (lo, hi)
        domains[param] = ParamDomain(param, interval, effect.factor, entity.bounds)
    return ConstrainedScenario(s, dict(sorted(domains.items())), tuple(ecs.tc_ids))
