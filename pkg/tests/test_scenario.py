import json

import pytest

from sotifkit.catalog import SCENARIO
from sotifkit.errors import DocumentSyntaxError, DuplicateId
from sotifkit.scenario import FunctionUnderTest, load_scenario, validate_document, validate_scenario


def test_highway_lead_brake_has_two_dynamic_objects(highway):
    assert len(highway.elements(4)) == 2
    assert {e.kind for e in highway.elements(4)} == {"ego", "lead_vehicle"}


def test_layer_seven_is_syntax_error(bundled):
    raw = json.loads(bundled.read(SCENARIO, "highway_lead_brake"))
    raw["layers"]["7"] = [{"kind": "road_segment"}]
    with pytest.raises(DocumentSyntaxError):
        load_scenario(json.dumps(raw))


def test_zero_free_params():
    s = load_scenario('{"id": "s", "layers": {"4": [{"kind": "ego"}]}, "params": [{"param": "a", "value": 1}]}')
    assert s.free_params == []


def test_duplicate_param_assignment():
    with pytest.raises(DuplicateId):
        load_scenario('{"id": "s", "params": [{"param": "a", "value": 1}, {"param": "a", "value": 2}]}')


def test_value_and_range_exclusive():
    with pytest.raises(DocumentSyntaxError):
        load_scenario('{"id": "s", "params": [{"param": "a", "value": 1, "range": [0, 2]}]}')


def test_negative_visibility_below_bounds(highway, onto):
    raw = highway.to_dict()
    raw["params"][0] = {"param": "environment/ambient/visibility", "value": -5}
    report = validate_scenario(load_scenario(json.dumps(raw)), onto)
    assert [(i.entity, i.message) for i in report] == [("environment/ambient/visibility", "below physical bounds")]


def test_unresolved_param(highway, onto):
    raw = highway.to_dict()
    raw["params"].append({"param": "environment/ambient/fog_density", "value": 1})
    report = validate_scenario(load_scenario(json.dumps(raw)), onto)
    assert [i.message for i in report] == ["unresolved param"]


@pytest.mark.parametrize("sid", ["highway_lead_brake", "highway_stopped_vehicle", "urban_pedestrian_crossing"])
def test_corpus_scenarios_validate(bundled, onto, sid):
    assert validate_scenario(bundled.get(SCENARIO, sid), onto) == []


@pytest.mark.parametrize("sid", ["highway_lead_brake", "highway_stopped_vehicle", "urban_pedestrian_crossing"])
def test_round_trip(bundled, sid):
    s = bundled.get(SCENARIO, sid)
    assert load_scenario(s.dumps()) == s


def test_validate_document_wraps_load_errors(onto):
    s, report = validate_document('{"id": "s", "layers": {"7": []}}', onto)
    assert s is None and len(report) == 1


def test_function_overrides(stopped):
    fut = stopped.function_under_test()
    assert fut == FunctionUnderTest(200, 0.5, 6, 1000, 0.5)
    assert FunctionUnderTest().with_overrides({"reaction_time": 1.0}).reaction_time == 1.0
