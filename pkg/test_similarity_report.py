import pytest

from conftest import FAMILY_SCRIPTS, _family_member, make_zip, package
from crx.crx_reader import FileTree, MissingManifest, load_package
from crx.manifest_analyzer import flatten_manifest
from clustering.similarity_report import (
    NOT_SIMILAR, SIMILAR, beautified_equal, compare_pair, identical_sources, is_third_party, unique_values,
)


def _member(family, member, **overrides):
    manifest, files = _family_member(family, member)
    files.update(overrides)
    return load_package(package(manifest, files))


def test_same_family_is_similar():
    report = compare_pair(_member(0, 1), _member(0, 2), "a", "b")
    assert report.verdict == SIMILAR
    assert report.manifest_key_overlap == 1.0
    assert report.file_tree_overlap == 1.0
    assert report.identical_source_files == ["bg.js"]
    assert "bg.js" in report.shared_unique_values
    assert all(report.evidence.values())


def test_self_compare_is_similar():
    a = _member(3, 0)
    assert compare_pair(a, a).verdict == SIMILAR


def test_reformatted_source_still_identical():
    reformatted = "// rebuilt\n" + FAMILY_SCRIPTS[0].replace(" ", "\n    ").replace(";", " ;")
    report = compare_pair(_member(0, 1), _member(0, 2, **{"bg.js": reformatted}))
    assert report.identical_source_files == ["bg.js"]
    assert report.verdict == SIMILAR


def test_same_layout_different_code_is_not_similar():
    report = compare_pair(_member(0, 1), _member(2, 1))
    assert report.evidence["manifest_keys"] and report.evidence["file_tree"]
    assert not report.evidence["identical_sources"]
    assert report.verdict == NOT_SIMILAR


def test_symmetric():
    a, b = _member(1, 0), _member(3, 4)
    ab, ba = compare_pair(a, b), compare_pair(b, a)
    assert (ab.manifest_key_overlap, ab.file_tree_overlap, ab.verdict) == \
           (ba.manifest_key_overlap, ba.file_tree_overlap, ba.verdict)
    assert ab.shared_unique_values == ba.shared_unique_values


def test_third_party_files_do_not_count():
    files = {"lib/jquery.min.js": "/* lib */", "vendor/x.js": "1", "js/React.production.js": "2"}
    a = FileTree({k: v.encode() for k, v in files.items()})
    assert identical_sources(a, a) == []
    assert is_third_party("lib/anything.js", ["lib/"])
    assert is_third_party("js/React.production.js", ["react*"])
    assert not is_third_party("src/library.js", ["lib/"])
    assert identical_sources(a, a, patterns=()) == sorted(files)


@pytest.mark.parametrize("a, b, equal", [
    ("var a=1;", "var a = 1 ;\n// c\n", True),
    ("var a = 1;", "var a = 2;", False),
    ("f('x')", 'f("x")', False),
    ("a = 1.0;", "a = 1;", False),
    ("a = 0x10;", "a = 16;", False),
    ('s = "\\x41";', 's = "A";', False),
    ("`a\\x41`", "`aA`", False),
    ("f( 'x' , 0x10 )", "f('x',0x10)", True),
    ("`a${ x+1 }b`", "`a${x + 1}b`", True),
    ("`a${x}b`", "`a${y}b`", False),
])
def test_beautified_equal(a, b, equal):
    assert beautified_equal(a, b) is equal


def test_unique_values():
    flat = flatten_manifest({
        "manifest_version": 3, "background": {"service_worker": "bg.js"},
        "permissions": ["tabs"], "optional_permissions": ["tabs"], "homepage_url": "https://x.example",
        "incognito": "spanning", "minimum_chrome_version": "88",
    })
    tree = FileTree({"bg.js": b""})
    assert unique_values(flat, tree) == {"bg.js", "https://x.example", "spanning"}


def test_missing_manifest():
    bare = load_package(package({"manifest_version": 3}))
    empty = load_package(make_zip({"bg.js": "x"}))
    with pytest.raises(MissingManifest):
        compare_pair(bare, empty, "a", "b")


@pytest.mark.parametrize("manifest", [
    {"manifest_version": 3},
    {"manifest_version": 2, "incognito": "spanning", "offline_enabled": True},
    {"manifest_version": 3, "minimum_chrome_version": "88", "key_cap": 4, "extra": None},
])
def test_minimal_manifest_is_similar_to_itself(manifest):
    a = load_package(package(manifest, {"a.js": "var a = 1;"}))
    report = compare_pair(a, a, "a", "a")
    assert report.evidence["unique_values"]
    assert report.verdict == SIMILAR


def test_scalar_values_count_only_without_anything_else():
    tree = FileTree({"a.js": b""})
    assert unique_values(flatten_manifest({"manifest_version": 3}), tree) == {"3"}
    flat = flatten_manifest({"manifest_version": 3, "offline_enabled": True, "homepage_url": "https://x.example"})
    assert unique_values(flat, tree) == {"https://x.example"}
