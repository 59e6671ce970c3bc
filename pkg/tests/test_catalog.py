import json
import os

import pytest

from sotifkit import catalog as catalog_mod
from sotifkit.catalog import BUNDLED, ONTOLOGY, SCENARIO, TC, Catalog
from sotifkit.errors import DigestMismatch, DuplicateId, NotFound, ValidationFailed

FOG = {
    "id": "dense_fog",
    "name": "Dense fog",
    "constraints": [{"param": "environment/ambient/visibility", "type": "MAX", "value": 80}],
    "sub_conditions": [],
}


def _scenario_doc(ident="copy_of_stopped"):
    raw = json.loads((BUNDLED / "scenarios" / "highway_stopped_vehicle.json").read_text())
    raw["id"] = ident
    raw["odd_tags"] = ["rural"]
    return json.dumps(raw, indent=2)


def test_bundled_index_matches_files(bundled):
    assert bundled.entries() == bundled.scan()


def test_add_get_round_trip(catalog_copy):
    doc = _scenario_doc()
    catalog_copy.add(SCENARIO, doc)
    assert catalog_copy.read(SCENARIO, "copy_of_stopped") == doc.encode()
    got = catalog_copy.get(SCENARIO, "copy_of_stopped")
    assert got.to_dict() == json.loads(doc)
    catalog_copy.add(TC, json.dumps(FOG))
    assert catalog_copy.get(TC, "dense_fog").constraints[0].value == 80


def test_add_duplicate(catalog_copy):
    with pytest.raises(DuplicateId):
        catalog_copy.add(TC, (BUNDLED / "tcs" / "night_time.json").read_bytes())


def test_add_invalid_carries_report(catalog_copy):
    bad = dict(FOG, constraints=[{"param": "environment/ambient/nowhere", "type": "MAX", "value": 1}])
    with pytest.raises(ValidationFailed) as info:
        catalog_copy.add(TC, json.dumps(bad))
    assert any("environment/ambient/nowhere" in i.entity or "nowhere" in i.message for i in info.value.report)
    assert "dense_fog" not in {e.id for e in catalog_copy.entries()}


def test_add_ontology_needs_id(catalog_copy):
    doc = (BUNDLED / "ontologies" / "default.json").read_bytes()
    with pytest.raises(ValueError):
        catalog_copy.add(ONTOLOGY, doc)
    catalog_copy.add(ONTOLOGY, doc, "second")
    assert catalog_copy.ontology().to_dict() == catalog_copy.get(ONTOLOGY, "second").to_dict()


def test_list_filters(bundled):
    assert [e.id for e in bundled.list(odd_tag="highway")] == ["highway_lead_brake", "highway_stopped_vehicle"]
    assert [e.id for e in bundled.list(layer_kind="pedestrian")] == ["urban_pedestrian_crossing"]
    assert [e.id for e in bundled.list(TC)] == ["heavy_snow", "heavy_snow_night", "night_time"]


def test_unknown_id(bundled):
    with pytest.raises(NotFound):
        bundled.get(SCENARIO, "nope")


def test_tampered_file(catalog_copy):
    path = catalog_copy.root / "tcs" / "night_time.json"
    path.write_text(path.read_text().replace('"value": 1', '"value": 2'))
    with pytest.raises(DigestMismatch):
        catalog_copy.get(TC, "night_time")


def test_rebuild_equals_incremental(catalog_copy):
    catalog_copy.add(SCENARIO, _scenario_doc())
    catalog_copy.add(TC, json.dumps(FOG))
    incremental = catalog_copy.index_path.read_bytes()
    catalog_copy.rebuild()
    assert catalog_copy.index_path.read_bytes() == incremental


def test_interrupted_write_keeps_old_index(catalog_copy, monkeypatch):
    before = catalog_copy.index_path.read_bytes()

    def boom(src, dst):
        raise OSError("disk unplugged")

    monkeypatch.setattr(catalog_mod.os, "replace", boom)
    with pytest.raises(OSError):
        catalog_copy.add(TC, json.dumps(FOG))
    monkeypatch.undo()
    assert catalog_copy.index_path.read_bytes() == before
    assert not [f for f in os.listdir(catalog_copy.root / "tcs") if f.endswith(".tmp")]
    assert catalog_copy.entries() == Catalog(catalog_copy.root).scan()


def test_env_var(monkeypatch, catalog_copy):
    monkeypatch.setenv(catalog_mod.ENV_VAR, str(catalog_copy.root))
    assert Catalog().root == catalog_copy.root
