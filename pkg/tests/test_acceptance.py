"""Acceptance criteria, one test per criterion; the terminal summary prints one line each."""
import copy
import json
import math
import random
import time

import pytest
from hypothesis import given, settings

from sotifkit import catalog as catalog_mod
from sotifkit import ontology, scenario
from sotifkit.catalog import BUNDLED, SCENARIO, TC, Catalog
from sotifkit.classify import COLLISION_ONLY, bisect_threshold, find_threshold, verdict
from sotifkit.cli import main
from sotifkit.constraints import compose, merge
from sotifkit.scenario import load_scenario
from sotifkit.simkernel import SimConfig, simulate, stopping_distance
from sotifkit.testgen import reduce_pairwise, uncovered_tuples

from test_constraints import PROP_ONTOLOGY, constraint_sets, feasible
from test_constraints import test_merge_idempotent as merge_idempotent
from test_constraints import test_merge_monotone as merge_monotone
from test_constraints import test_merge_order_insensitive as merge_order_insensitive
from test_constraints import test_override_takes_most_extreme_bound as override_extremity

VIS = "environment/ambient/visibility"
ILLUM = "environment/ambient/illuminance"
FRICTION = "environment/road/asphalt_friction"
HAND_VALUE = 43.33


def cli(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.mark.acceptance(1, "heavy-snow constraint set reproduced exactly")
def test_ac1_heavy_snow(bundled):
    start = time.perf_counter()
    ecs = compose(["heavy_snow"], bundled.tc_lookup, bundled.ontology())
    assert ecs[VIS].interval == (0.0, 500.0)
    assert ecs[ILLUM].interval == (1.0, 2000.0)
    assert ecs[FRICTION].factor == 0.8
    assert not any(e.overridden for e in ecs.entries.values())
    assert time.perf_counter() - start < 1.0


@pytest.mark.acceptance(2, "night-time overrides heavy-snow illuminance")
def test_ac2_override(bundled):
    onto = bundled.ontology()
    single = compose(["heavy_snow"], bundled.tc_lookup, onto)
    both = compose(["heavy_snow_night"], bundled.tc_lookup, onto)
    illum = both[ILLUM]
    assert illum.interval[1] == 1.0 and illum.overridden
    roles = {(c.tc_id, c.role, c.overridden_by) for c in illum.provenance}
    assert ("night_time", "applied", None) in roles
    assert ("heavy_snow", "overridden", "night_time") in roles
    assert both[VIS].interval == single[VIS].interval == (0.0, 500.0)
    assert both[FRICTION].factor == single[FRICTION].factor == 0.8


@settings(max_examples=1000, deadline=None)
@given(constraint_sets)
def _tie_break_deterministic(items):
    if not feasible(items):
        return
    first = merge(items, PROP_ONTOLOGY).to_dict()
    assert merge(list(reversed(items)), PROP_ONTOLOGY).to_dict() == first
    assert merge(items, PROP_ONTOLOGY).to_dict() == first


@pytest.mark.acceptance(3, "merge algebra properties over >=1000 random constraint sets")
def test_ac3_merge_algebra():
    merge_idempotent()
    merge_order_insensitive()
    merge_monotone()
    override_extremity()
    _tie_break_deterministic()


@pytest.mark.acceptance(4, "pairwise coverage, reduced never larger than the grid")
def test_ac4_pairwise():
    rng = random.Random(4)
    start = time.perf_counter()
    shapes = [[rng.randint(2, 6) for _ in range(rng.randint(1, 6))] for _ in range(150)]
    shapes += [[6] * 6, [2] * 6, [2, 2, 2], [6, 6, 2]]
    for sizes in shapes:
        domains = {f"p{i}": [float(v) for v in range(k)] for i, k in enumerate(sizes)}
        m = reduce_pairwise(domains, "s", seed=rng.randrange(1000))
        rows = [[c.assignment[p] for p in sorted(domains)] for c in m]
        grid = math.prod(sizes)
        assert uncovered_tuples(rows, [domains[p] for p in sorted(domains)]) == []
        assert len(m) <= grid
        if len(sizes) >= 3:
            assert len(m) < grid, sizes
    assert time.perf_counter() - start < 10.0


def _far_lead(v, fut_kw):
    raw = json.loads((BUNDLED / "scenarios" / "highway_stopped_vehicle.json").read_text())
    raw["layers"]["4"][0]["attrs"]["speed"] = v
    raw["layers"]["4"][1]["attrs"]["initial_gap"] = 1000
    raw["params"] = []
    raw["function"] = fut_kw
    return load_scenario(json.dumps(raw))


@pytest.mark.acceptance(5, "simulated stopping distance matches the closed form")
def test_ac5_kinematics(stopped):
    rng = random.Random(5)
    cfg = SimConfig(dt=0.01, horizon=60.0)
    cases = [(20.0, 0.5, 6.0, 0.8)]
    while len(cases) < 50:
        cases.append((rng.uniform(5, 35), rng.uniform(0.2, 1.5), rng.uniform(4, 9), rng.choice([0.3, 0.5, 0.8, 1.0, rng.uniform(0.3, 1)])))
    for v, t_r, a, mu in cases:
        fut = dict(sensor_max_range=2000, reaction_time=t_r, max_decel_at_mu1=a, illum_full=1000, illum_floor_factor=0.5)
        s = _far_lead(v, fut)
        _, r = simulate({FRICTION: mu}, s, cfg=cfg, record=False)
        assert not r.collision
        expected = stopping_distance(v, t_r, a * mu)
        assert abs((r.initial_gap - r.min_gap) - expected) <= 0.5, (v, t_r, a, mu)
    _, r = simulate({VIS: 500}, stopped, record=False)
    assert abs((r.initial_gap - r.min_gap) - HAND_VALUE) <= 0.5


@pytest.mark.acceptance(6, "heavy snow confirmed as triggering condition end to end")
def test_ac6_pipeline(capsys, tmp_path):
    start = time.perf_counter()
    paths = {}
    for name, tcs in (("nominal", []), ("snow", ["--tc", "heavy_snow"])):
        matrix = tmp_path / f"{name}.jsonl"
        results = tmp_path / f"{name}.results.jsonl"
        assert cli(capsys, "gen", "--scenario", "highway_lead_brake", *tcs, "--levels", 3, "-o", matrix)[0] == 0
        assert cli(capsys, "run", "--matrix", matrix, "-o", results)[0] == 0
        paths[name] = results
    code, out, _ = cli(capsys, "classify", "--nominal", paths["nominal"], "--tc-results", paths["snow"])
    result = json.loads(out)
    assert code == 0
    assert result["nominal_hazard_rate"] == 0
    assert result["tc_hazard_rate"] > 0
    assert result["status"] == "CONFIRMED_TRIGGERING_CONDITION"
    assert time.perf_counter() - start < 30.0


@pytest.mark.acceptance(7, "visibility threshold agrees with closed form and linear sweep")
def test_ac7_threshold(stopped):
    fut = stopped.function_under_test()
    tol, v, dt = 0.5, 20.0, 0.01
    lo, hi = 10.0, 200.0
    t = find_threshold(VIS, (lo, hi), {}, stopped, fut, COLLISION_ONLY, tol)
    assert t.diagnostic is None
    assert abs(t.value - stopping_distance(v, fut.reaction_time, fut.max_decel_at_mu1)) <= tol + v * dt

    def hazardous(x):
        return verdict(simulate({VIS: x}, stopped, fut, record=False)[1], COLLISION_ONLY).hazardous

    x = lo
    while hazardous(x):
        x += tol / 2
    assert abs(t.value - (x - tol / 4)) <= tol

    value, diagnostic, _ = bisect_threshold(lambda x: hazardous(x) or 120 < x < 150, lo, hi, tol)
    assert value is None and diagnostic.startswith("NonMonotone")


def _entity(data, ident):
    return next(e for e in data["entities"] if e["id"] == ident)


def _onto_mutations(base):
    def m(fn):
        d = copy.deepcopy(base)
        fn(d)
        return d

    yield "environment/ambient/Visibility", m(lambda d: _entity(d, VIS).update(id="environment/ambient/Visibility"))
    yield VIS, m(lambda d: _entity(d, VIS).update(parent="environment/nowhere"))
    yield VIS, m(lambda d: d["entities"].append(copy.deepcopy(_entity(d, VIS))))
    yield VIS, m(lambda d: _entity(d, VIS).update(unit=None))
    yield VIS, m(lambda d: _entity(d, VIS).update(physical_bounds=[10, 0]))
    yield "environment", m(lambda d: _entity(d, "environment").update(unit="m"))
    yield "environment", m(lambda d: _entity(d, "environment").update(physical_bounds=[0, 1]))
    yield "environment", m(lambda d: _entity(d, "environment").update(limiting_direction="HIGHER_IS_WORSE"))
    yield "environment/weather/snowfall/heavy_snow", m(
        lambda d: _entity(d, "environment/weather/snowfall/heavy_snow").update(parent="environment/weather"))
    yield "environment/weather/fog", m(lambda d: d["entities"].append(
        {"id": "environment/weather/fog", "kind": "ENUM", "parent": "environment/weather"}))
    yield "environment/ambient/visibility/child", m(lambda d: d["entities"].append(
        {"id": "environment/ambient/visibility/child", "kind": "PARAM", "parent": VIS, "unit": "m"}))
    yield "environment/weather/snowfall", m(
        lambda d: _entity(d, "environment/weather/snowfall").update(parent=ILLUM))
    yield "environment", m(lambda d: _entity(d, "environment").update(parent="environment/weather"))


def _scenario_mutations(base):
    def m(fn):
        d = copy.deepcopy(base)
        fn(d)
        return d

    ego = lambda d: d["layers"]["4"][0]
    lead = lambda d: d["layers"]["4"][1]
    yield "layer7", m(lambda d: d["layers"].__setitem__("7", [{"kind": "ghost", "attrs": {}}]))
    yield "layer2/spaceship[0]", m(lambda d: d["layers"].__setitem__("2", [{"kind": "spaceship", "attrs": {}}]))
    yield "layer1/ego[1]", m(lambda d: d["layers"]["1"].append({"kind": "ego", "attrs": {"speed": 1}}))
    yield "highway_stopped_vehicle/layer4", m(lambda d: d["layers"]["4"].append({"kind": "ego", "attrs": {"speed": 1}}))
    yield "highway_stopped_vehicle/layer4", m(lambda d: d["layers"]["4"].pop(0))
    yield "layer4/ego[0]", m(lambda d: ego(d)["attrs"].update(speed=-3))
    yield "layer4/lead_vehicle[0]", m(lambda d: lead(d)["attrs"].update(speed=-1))
    yield "layer4/lead_vehicle[0]", m(lambda d: lead(d)["attrs"].update(initial_gap=0))
    yield "layer4/lead_vehicle[0]", m(lambda d: lead(d)["attrs"].update(profile="teleport"))
    yield "layer4/lead_vehicle[0]", m(lambda d: lead(d)["attrs"].update(profile="scripted_decel"))
    yield "environment/ambient/fog_density", m(lambda d: d["params"][0].update(param="environment/ambient/fog_density"))
    yield "environment/ambient", m(lambda d: d["params"][0].update(param="environment/ambient"))
    yield VIS, m(lambda d: d["params"][0].update(range=[5000, 100]))
    yield VIS, m(lambda d: d["params"][0].update(range=[100, 20000]))
    yield FRICTION, m(lambda d: d["params"][1].update(value=0.01))
    yield VIS, m(lambda d: d["params"].append({"param": VIS, "value": 300}))
    yield "function/reaction_time", m(lambda d: d["function"].update(reaction_time=-0.5))
    yield "function/illum_floor_factor", m(lambda d: d["function"].update(illum_floor_factor=1.5))


@pytest.mark.acceptance(8, "validators flag every single mutation and nothing in the clean corpus")
def test_ac8_validators(bundled):
    onto = bundled.ontology()
    onto_base = json.loads((BUNDLED / "ontologies" / "default.json").read_text())
    assert ontology.validate_document(json.dumps(onto_base))[1] == []
    for e in bundled.list(SCENARIO):
        assert scenario.validate_document(bundled.read(SCENARIO, e.id), onto)[1] == [], e.id

    count = 0
    for expected, doc in _onto_mutations(onto_base):
        _, report = ontology.validate_document(json.dumps(doc))
        assert report, expected
        assert any(i.entity == expected for i in report), (expected, report)
        count += 1
    base = json.loads((BUNDLED / "scenarios" / "highway_stopped_vehicle.json").read_text())
    for expected, doc in _scenario_mutations(base):
        _, report = scenario.validate_document(json.dumps(doc), onto)
        assert report, expected
        assert any(i.entity == expected for i in report), (expected, report)
        count += 1
    assert count >= 25


@pytest.mark.acceptance(9, "catalog round trip, re-index equality and atomic writes")
def test_ac9_catalog(catalog_copy, monkeypatch):
    doc = json.loads((BUNDLED / "scenarios" / "highway_lead_brake.json").read_text())
    doc["id"] = "lead_brake_copy"
    text = json.dumps(doc, indent=2)
    catalog_copy.add(SCENARIO, text)
    assert catalog_copy.get(SCENARIO, "lead_brake_copy") == load_scenario(text)
    tc = {"id": "dusk", "name": "Dusk", "constraints": [{"param": ILLUM, "type": "RANGE", "value": [10, 400]}],
          "sub_conditions": ["night_time"]}
    catalog_copy.add(TC, json.dumps(tc))
    assert catalog_copy.get(TC, "dusk").sub_conditions == ("night_time",)

    incremental = catalog_copy.index_path.read_bytes()
    assert catalog_copy.rebuild() == catalog_copy.entries()
    assert catalog_copy.index_path.read_bytes() == incremental

    def interrupted(src, dst):
        raise OSError("interrupted")

    monkeypatch.setattr(catalog_mod.os, "replace", interrupted)
    with pytest.raises(OSError):
        catalog_copy.add(TC, json.dumps(dict(tc, id="dawn")))
    monkeypatch.undo()
    assert catalog_copy.index_path.read_bytes() == incremental
    fresh = Catalog(catalog_copy.root)
    assert [e.id for e in fresh.list(TC)] == ["dusk", "heavy_snow", "heavy_snow_night", "night_time"]
    assert not list(catalog_copy.root.rglob("*.tmp"))
