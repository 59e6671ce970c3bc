"""Test-matrix generation: full factorial grids and t-wise reduced matrices."""
from __future__ import annotations

import itertools
import json
import random
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Sequence, Tuple, Union

from .constraints import ConstrainedScenario, unconstrained
from .errors import DocumentSyntaxError, InvalidLevels
from .ontology import Ontology
from .scenario import Scenario

NOMINAL = "NOMINAL"
TC_SET = "TC_SET"
DEFAULT_SEED = 0


@dataclass(frozen=True)
class Provenance:
    kind: str = NOMINAL
    tc_ids: Tuple[str, ...] = ()

    @classmethod
    def of(cls, tc_ids):
        return cls(TC_SET, tuple(tc_ids)) if tc_ids else cls()

    @property
    def label(self):
        return "+".join(self.tc_ids) if self.tc_ids else NOMINAL

    def to_dict(self):
        return {"kind": self.kind, "tc_ids": list(self.tc_ids)}


@dataclass(frozen=True)
class TestCase:
    __test__ = False  # not a pytest class

    scenario_id: str
    assignment: Mapping[str, float]
    provenance: Provenance = Provenance()
    case_index: int = 0

    def to_dict(self):
        return {
            "case_index": self.case_index,
            "scenario_id": self.scenario_id,
            "provenance": self.provenance.to_dict(),
            "assignment": dict(self.assignment),
        }

    @classmethod
    def from_dict(cls, raw):
        try:
            prov = raw["provenance"]
            return cls(
                str(raw["scenario_id"]),
                {str(k): float(v) for k, v in raw["assignment"].items()},
                Provenance(prov["kind"], tuple(prov.get("tc_ids", ()))),
                int(raw["case_index"]),
            )
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise DocumentSyntaxError(f"malformed test case: {exc}") from None


@dataclass(frozen=True)
class TestMatrix:
    __test__ = False

    cases: Tuple[TestCase, ...] = ()
    domains: Mapping[str, Tuple[float, ...]] = field(default_factory=dict)

    def __len__(self):
        return len(self.cases)

    def __iter__(self):
        return iter(self.cases)

    def dumps(self):
        """JSON lines, one test case per line."""
        return "".join(json.dumps(c.to_dict(), sort_keys=False) + "\n" for c in self.cases)


def load_matrix(text) -> TestMatrix:
    cases = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DocumentSyntaxError(f"malformed matrix line: {exc.msg}", line=lineno, column=exc.colno) from None
        cases.append(TestCase.from_dict(raw))
    domains: Dict[str, set] = {}
    for c in cases:
        for p, v in c.assignment.items():
            domains.setdefault(p, set()).add(v)
    return TestMatrix(tuple(cases), {p: tuple(sorted(v)) for p, v in sorted(domains.items())})


def discretize(interval, levels: int) -> List[float]:
    """``levels`` evenly spaced values over ``interval``; the midpoint when ``levels == 1``."""
    lo, hi = interval
    if levels < 1:
        raise InvalidLevels(f"levels must be >= 1, got {levels}")
    if lo > hi:
        raise ValueError(f"empty interval [{lo}, {hi}]")
    if levels == 1:
        return [0.5 * (lo + hi)]
    step = (hi - lo) / (levels - 1)
    values = [lo + i * step for i in range(levels - 1)] + [hi]
    out = []
    for v in values:
        if not out or v > out[-1]:
            out.append(v)
    return out


def domain_levels(cs: ConstrainedScenario, levels: Union[int, Mapping[str, int]]) -> Dict[str, List[float]]:
    """Post-factor, post-clamp level lists per parameter, sorted by parameter path."""
    out = {}
    for path, dom in sorted(cs.domains.items()):
        k = levels if isinstance(levels, int) else levels.get(path, 1)
        if not dom.is_free:
            k = 1
        values = []
        for v in discretize(dom.interval, k):
            t = dom.transform(v)
            if not values or t > values[-1]:
                values.append(t)
        out[path] = values
    return out


def _matrix(scenario_id, rows, params, domains, tc_ids) -> TestMatrix:
    prov = Provenance.of(tc_ids)
    seen = set()
    cases = []
    for row in rows:
        key = tuple(row)
        if key in seen:
            continue
        seen.add(key)
        cases.append(TestCase(scenario_id, dict(zip(params, row)), prov, len(cases)))
    return TestMatrix(tuple(cases), {p: tuple(domains[p]) for p in params})


def grid_rows(domains: Mapping[str, Sequence[float]]):
    params = sorted(domains)
    return params, [list(r) for r in itertools.product(*(domains[p] for p in params))]


def generate_grid(cs: ConstrainedScenario, levels: Union[int, Mapping[str, int]]) -> TestMatrix:
    domains = domain_levels(cs, levels)
    params, rows = grid_rows(domains)
    return _matrix(cs.scenario.id, rows, params, domains, cs.tc_ids)


def generate_nominal(s: Scenario, ontology: Ontology, levels: Union[int, Mapping[str, int]]) -> TestMatrix:
    return generate_grid(unconstrained(s, ontology), levels)


def covering_rows(sizes: Sequence[int], strength: int = 2, seed: int = DEFAULT_SEED) -> List[List[int]]:
    """Rows of level indices covering every ``strength``-way combination (IPOG).

    Columns are processed largest domain first: the first ``strength`` columns
    are seeded with their full factorial, every further column is added by
    horizontal growth (each row takes the level covering most uncovered
    tuples, lowest index on ties) followed by vertical growth (new rows for
    tuples still uncovered).  Cells left unconstrained at the end are filled
    from ``random.Random(seed)``.
    """
    n = len(sizes)
    if n == 0:
        return [[]]
    if strength < 2:
        raise ValueError("strength must be >= 2")
    if n <= strength:
        return [list(r) for r in itertools.product(*(range(s) for s in sizes))]

    order = sorted(range(n), key=lambda i: (-sizes[i], i))
    osizes = [sizes[i] for i in order]
    free = None  # marker for don't-care cells

    rows: List[list] = [list(r) for r in itertools.product(*(range(s) for s in osizes[:strength]))]

    for col in range(strength, n):
        # uncovered: for each combination of (strength-1) earlier columns, the set of value tuples + new level
        combos = list(itertools.combinations(range(col), strength - 1))
        uncovered = {
            cols: set(itertools.product(*(range(osizes[c]) for c in cols), range(osizes[col])))
            for cols in combos
        }

        def gain(row, level):
            count = 0
            for cols, missing in uncovered.items():
                vals = tuple(row[c] for c in cols)
                if free in vals:
                    continue
                if vals + (level,) in missing:
                    count += 1
            return count

        # horizontal growth
        for row in rows:
            best, best_gain = 0, -1
            for level in range(osizes[col]):
                g = gain(row, level)
                if g > best_gain:
                    best, best_gain = level, g
            row.append(best)
            for cols, missing in uncovered.items():
                vals = tuple(row[c] for c in cols)
                if free not in vals:
                    missing.discard(vals + (best,))

        # vertical growth
        for cols in combos:
            for tup in sorted(uncovered[cols]):
                placed = False
                for row in rows:
                    if row[col] != tup[-1]:
                        continue
                    if all(row[c] is free or row[c] == v for c, v in zip(cols, tup)):
                        for c, v in zip(cols, tup):
                            row[c] = v
                        placed = True
                        break
                if not placed:
                    row = [free] * (col + 1)
                    for c, v in zip(cols, tup):
                        row[c] = v
                    row[col] = tup[-1]
                    rows.append(row)
                # the placement may also cover tuples of other column sets
            for other in combos:
                missing = uncovered[other]
                if not missing:
                    continue
                for row in rows:
                    vals = tuple(row[c] for c in other)
                    if free not in vals:
                        missing.discard(vals + (row[col],))

    rng = random.Random(seed)
    for row in rows:
        for c in range(n):
            if row[c] is free:
                row[c] = rng.randrange(osizes[c])

    inverse = [0] * n
    for pos, i in enumerate(order):
        inverse[i] = pos
    return [[row[inverse[i]] for i in range(n)] for row in rows]


def reduce_pairwise(
    domains: Mapping[str, Sequence[float]],
    scenario_id: str = "",
    tc_ids: Sequence[str] = (),
    seed: int = DEFAULT_SEED,
    strength: int = 2,
) -> TestMatrix:
    """Covering-array reduction of the full grid over ``domains``.

    Falls back to the full grid if the covering array would not be smaller.
    """
    params = sorted(domains)
    sizes = [len(domains[p]) for p in params]
    grid_size = 1
    for s in sizes:
        grid_size *= s
    index_rows = covering_rows(sizes, strength, seed)
    if len(index_rows) >= grid_size:
        index_rows = [list(r) for r in itertools.product(*(range(s) for s in sizes))]
    rows = [[domains[p][i] for p, i in zip(params, r)] for r in index_rows]
    return _matrix(scenario_id, rows, params, domains, tc_ids)


def generate_reduced(
    cs: ConstrainedScenario,
    levels: Union[int, Mapping[str, int]],
    seed: int = DEFAULT_SEED,
    strength: int = 2,
) -> TestMatrix:
    return reduce_pairwise(domain_levels(cs, levels), cs.scenario.id, cs.tc_ids, seed, strength)


def uncovered_tuples(matrix_rows: Sequence[Sequence[float]], domains: Sequence[Sequence[float]], strength=2):
    """Independent coverage check: every ``strength``-way value combination missing from the rows."""
    missing = []
    for cols in itertools.combinations(range(len(domains)), strength):
        seen = {tuple(r[c] for c in cols) for r in matrix_rows}
        for combo in itertools.product(*(domains[c] for c in cols)):
            if combo not in seen:
                missing.append((cols, combo))
    return missing
