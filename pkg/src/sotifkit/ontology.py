"""Scenario ontology: a Node/Enum/Value/Param hierarchy naming every scenario aspect.

Entity ids are slash-separated paths such as ``environment/ambient/visibility``.
Only PARAM entities are quantitative and can be constrained; VALUE entities
name phenomena that exist in the vocabulary but carry no parametrization.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterator, Optional, Tuple

from . import _json
from .errors import DanglingParent, DocumentSyntaxError, DuplicateId, NotFound, WrongKind
from .report import WARNING, Issue, sort_report

SEGMENT = re.compile(r"[a-z0-9_]+")


class Kind(str, Enum):
    NODE = "NODE"
    ENUM = "ENUM"
    VALUE = "VALUE"
    PARAM = "PARAM"


class Direction(str, Enum):
    LOWER_IS_WORSE = "LOWER_IS_WORSE"
    HIGHER_IS_WORSE = "HIGHER_IS_WORSE"


@dataclass(frozen=True)
class OntologyEntity:
    id: str
    kind: Kind
    parent: Optional[str] = None
    unit: Optional[str] = None
    physical_bounds: Optional[Tuple[float, float]] = None
    limiting_direction: Optional[Direction] = None

    @property
    def segments(self):
        return tuple(self.id.split("/"))

    @property
    def bounds(self) -> Tuple[float, float]:
        """Physical bounds, open-ended sides as infinities."""
        if self.physical_bounds is None:
            return (-math.inf, math.inf)
        return self.physical_bounds

    @property
    def direction(self) -> Direction:
        return self.limiting_direction or Direction.LOWER_IS_WORSE

    def to_dict(self):
        return {
            "id": self.id,
            "kind": self.kind.value,
            "parent": self.parent,
            "unit": self.unit,
            "physical_bounds": [_json.compact(v) for v in self.physical_bounds] if self.physical_bounds else None,
            "limiting_direction": self.limiting_direction.value if self.limiting_direction else None,
        }


@dataclass(frozen=True)
class Ontology:
    entities: Dict[str, OntologyEntity] = field(default_factory=dict)

    @property
    def roots(self):
        return [e.id for e in self.entities.values() if e.parent is None]

    def __len__(self):
        return len(self.entities)

    def __iter__(self) -> Iterator[OntologyEntity]:
        return iter(self.entities.values())

    def __contains__(self, ident):
        return ident in self.entities

    def get(self, ident) -> OntologyEntity:
        try:
            return self.entities[ident]
        except KeyError:
            raise NotFound(f"no entity {ident!r} in ontology") from None

    def children(self, ident):
        return [e for e in self.entities.values() if e.parent == ident]

    def params(self):
        return [e for e in self.entities.values() if e.kind is Kind.PARAM]

    def resolve_param(self, ident) -> OntologyEntity:
        return resolve_param(self, ident)

    def to_dict(self):
        return {"entities": [e.to_dict() for e in self.entities.values()]}

    def dumps(self):
        return _json.dumps(self.to_dict())


_ENTITY_KEYS = ("id", "kind", "parent", "unit", "physical_bounds", "limiting_direction")


def _parse_entity(raw, index):
    label = raw.get("id") if isinstance(raw, dict) and isinstance(raw.get("id"), str) else f"#{index}"
    _json.check_keys(raw, _ENTITY_KEYS, required=("id", "kind"), entity=label, what="entity")
    ident = _json.string(raw["id"], label, "id")
    try:
        kind = Kind(raw["kind"])
    except ValueError:
        raise DocumentSyntaxError(f"unknown kind {raw['kind']!r}", entity=label) from None
    parent = _json.string(raw.get("parent"), label, "parent", optional=True)
    unit = _json.string(raw.get("unit"), label, "unit", optional=True)
    bounds = raw.get("physical_bounds")
    if bounds is not None:
        bounds = _json.pair(bounds, label, "physical_bounds")
    direction = raw.get("limiting_direction")
    if direction is not None:
        try:
            direction = Direction(direction)
        except ValueError:
            raise DocumentSyntaxError(f"unknown limiting_direction {direction!r}", entity=label) from None
    elif kind is Kind.PARAM:
        direction = Direction.LOWER_IS_WORSE
    return OntologyEntity(ident, kind, parent, unit, bounds, direction)


def load_ontology(document) -> Ontology:
    """Parse an ontology JSON document into a linked, immutable :class:`Ontology`."""
    data = _json.parse(document, "ontology document")
    _json.check_keys(data, ("entities",), required=("entities",), what="ontology document")
    if not isinstance(data["entities"], list):
        raise DocumentSyntaxError("'entities' must be a list")
    entities: Dict[str, OntologyEntity] = {}
    for index, raw in enumerate(data["entities"]):
        entity = _parse_entity(raw, index)
        if entity.id in entities:
            raise DuplicateId(entity.id, "entity id")
        entities[entity.id] = entity
    for entity in entities.values():
        if entity.parent is not None and entity.parent not in entities:
            raise DanglingParent(entity.id, entity.parent)
    return Ontology(entities)


def _find_cycles(o: Ontology):
    """Return one representative id (the smallest) per parent-link cycle."""
    state: Dict[str, int] = {}
    found = []
    for start in o.entities:
        path = []
        node = start
        while node is not None and node in o.entities and node not in state:
            state[node] = 1
            path.append(node)
            node = o.entities[node].parent
        if node is not None and state.get(node) == 1 and node in path:
            found.append(min(path[path.index(node):]))
        for p in path:
            state[p] = 2
    return found


def validate_ontology(o: Ontology):
    """Check every structural invariant of ``o``; problems come back as report entries."""
    issues = []
    if not o.entities:
        issues.append(Issue("<ontology>", "no roots", WARNING))
    for e in o:
        segments = e.id.split("/")
        if not e.id or not all(SEGMENT.fullmatch(s) for s in segments):
            issues.append(Issue(e.id or "<empty>", "id segments must match [a-z0-9_]+"))

        parent = o.entities.get(e.parent) if e.parent is not None else None
        if e.parent is not None and parent is None:
            issues.append(Issue(e.id, f"unresolved parent {e.parent}"))
        if e.kind is Kind.NODE:
            if parent is not None and parent.kind is not Kind.NODE:
                issues.append(Issue(e.id, "NODE parent must be NODE"))
        elif e.kind in (Kind.ENUM, Kind.PARAM):
            if e.parent is None:
                issues.append(Issue(e.id, f"{e.kind.value} must have a NODE parent"))
            elif parent is not None and parent.kind is not Kind.NODE:
                issues.append(Issue(e.id, f"{e.kind.value} parent must be NODE"))
        elif e.kind is Kind.VALUE:
            if parent is None or parent.kind is not Kind.ENUM:
                issues.append(Issue(e.id, "VALUE parent must be ENUM"))

        if e.kind is Kind.PARAM:
            if not e.unit:
                issues.append(Issue(e.id, "PARAM must have a unit"))
            if e.physical_bounds is not None:
                lo, hi = e.physical_bounds
                if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
                    issues.append(Issue(e.id, "physical_bounds must be a non-empty finite interval"))
        else:
            if e.unit is not None:
                issues.append(Issue(e.id, f"{e.kind.value} must not have a unit"))
            if e.physical_bounds is not None:
                issues.append(Issue(e.id, f"{e.kind.value} must not have physical_bounds"))
            if e.limiting_direction is not None:
                issues.append(Issue(e.id, f"{e.kind.value} must not have a limiting_direction"))

        if e.kind is Kind.ENUM and not any(c.kind is Kind.VALUE for c in o.children(e.id)):
            issues.append(Issue(e.id, "ENUM must have at least one VALUE"))

    for ident in _find_cycles(o):
        issues.append(Issue(ident, "cycle detected"))
    return sort_report(issues)


def resolve_param(o: Ontology, path) -> OntologyEntity:
    entity = o.entities.get(path)
    if entity is None:
        raise NotFound(f"no entity {path!r} in ontology")
    if entity.kind is not Kind.PARAM:
        raise WrongKind(f"{path} is a {entity.kind.value}, not a PARAM")
    return entity


def validate_document(document):
    """Load and validate in one go; load failures become a single error entry."""
    try:
        o = load_ontology(document)
    except DocumentSyntaxError as exc:
        return None, [Issue(exc.entity or "<document>", str(exc))]
    except DuplicateId as exc:
        return None, [Issue(exc.ident, str(exc))]
    except DanglingParent as exc:
        return None, [Issue(exc.ident, str(exc))]
    return o, validate_ontology(o)
