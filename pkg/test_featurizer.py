import pytest

from conftest import FAMILY_SCRIPTS, _family_member, package
from crx.manifest_analyzer import FlatManifest, flatten_manifest
from features.featurizer import EmptyInput, FeatureDocument, feature_set, serialize_features, token_stats
from jsengine.static_tracer import ApiCall
from store.extractor import ExtractOptions, document_from_features, extract_package, vocabulary_from_features


def test_document_text():
    flat = flatten_manifest({"manifest_version": 2, "permissions": ["tabs", "storage"]})
    doc = serialize_features(flat, [ApiCall("browser.tabs.create")])
    assert doc.text == "call browser tabs create; manifest manifest version 2; manifest permissions tabs storage"


def test_empty_input_still_has_version():
    doc = serialize_features(FlatManifest([], 3), [])
    assert doc.text == "manifest manifest version 3"


def test_calls_are_presence_only():
    flat = flatten_manifest({"manifest_version": 3})
    once = serialize_features(flat, [ApiCall("browser.tabs.query", count=1)])
    many = serialize_features(flat, [ApiCall("browser.tabs.query", count=9), ApiCall("browser.tabs.query", "dynamic")])
    assert once.text == many.text


def test_value_cap():
    flat = flatten_manifest({"manifest_version": 3, "permissions": [f"p{i:02d}" for i in range(15)]})
    sentence = [s for s in serialize_features(flat, []).sentences if s.startswith("manifest permissions")][0]
    assert sentence.split()[2:] == [f"p{i:02d}" for i in range(10)]


def test_value_normalization_and_wildcards():
    flat = flatten_manifest({"manifest_version": 3, "host_permissions": ["https://*.Example.com/*"]})
    doc = serialize_features(flat, [ApiCall("browser.*.get")], [ApiCall("navigator.userAgent")])
    assert "manifest host permissions https // .example.com/" in doc.sentences
    assert "call browser any get" in doc.sentences
    assert "read navigator useragent" in doc.sentences


def test_feature_set_vocabulary():
    flat = flatten_manifest({"manifest_version": 2, "permissions": ["tabs"], "background": {"scripts": ["a.js"]}})
    assert feature_set(flat, [ApiCall("browser.tabs.query")]) == {
        "mv2", "tabs", "background.scripts", "browser.tabs.query"}


def test_text_round_trip():
    doc = FeatureDocument.from_sentences(["b x", "a y", "b x"])
    assert doc.sentences == ["a y", "b x"]
    assert FeatureDocument.from_text(doc.text) == doc


def test_token_stats():
    docs = [FeatureDocument([" ".join(["w"] * 10)]), FeatureDocument([" ".join(["w"] * 20)])]
    stats = token_stats(docs)
    assert stats.mean == pytest.approx(15.0)
    assert stats.stddev == pytest.approx(7.0710678, rel=1e-6)
    assert stats.fraction_within(15) == 0.5
    with pytest.raises(EmptyInput):
        token_stats([])


def test_extract_package_finds_static_and_dynamic_calls():
    manifest, files = _family_member(0, 0)
    features = extract_package(package(manifest, files), ext_id="x")
    paths = {(c["path"], c["origin"]) for c in features["calls"]}
    assert ("browser.tabs.create", "static") in paths
    assert ("browser.tabs.create", "dynamic") in paths
    assert ("browser.tabs.reload", "dynamic") in paths
    assert ("browser.tabs.highlight", "dynamic") in paths
    assert features["coverage"] == {"bg.js": 1.0}
    assert features["entrypoints"] == [{"kind": "background", "path": "bg.js", "missing_file": False,
                                        "module": False}]


def test_eval_family_needs_dynamic_analysis():
    manifest, files = _family_member(4, 0)
    assert "eval(" in FAMILY_SCRIPTS[4]
    static = extract_package(package(manifest, files), ExtractOptions(dynamic=False))
    dynamic = extract_package(package(manifest, files), ExtractOptions(static=False))
    assert static["calls"] == []
    assert "browser.management.getAll" in {c["path"] for c in dynamic["calls"]}


def test_stored_features_rebuild_document():
    manifest, files = _family_member(2, 1)
    features = extract_package(package(manifest, files, crx=True))
    doc = document_from_features(features, value_cap=10)
    assert "call browser storage local set" in doc.sentences
    assert "manifest name" not in doc.text
    assert "browser.storage.onChanged.addListener" in vocabulary_from_features(features)


@pytest.mark.parametrize("family, kind, path, call", [
    (1, "browser_action_popup", "popup.js", "browser.notifications.create"),
    (3, "override_page", "newtab.js", "browser.history.search"),
])
def test_page_entrypoints(family, kind, path, call):
    manifest, files = _family_member(family, 0)
    features = extract_package(package(manifest, files))
    assert [(e["kind"], e["path"]) for e in features["entrypoints"]] == [(kind, path)]
    assert call in {c["path"] for c in features["calls"]}


def test_empty_manifest_family_has_no_calls():
    manifest, files = _family_member(5, 3)
    features = extract_package(package(manifest, files))
    assert features["entrypoints"] == [] and features["calls"] == []
    doc = document_from_features(features, value_cap=10)
    assert doc.sentences == ["manifest icons icon.png", "manifest manifest version 3"]
