import io
import zipfile

import pytest

from conftest import make_crx2, make_crx3, make_zip
from crx.crx_reader import (
    ArchiveError, BadMagic, DuplicatePath, MissingManifest, TruncatedHeader, UnsupportedVersion, load_package,
    load_plain_zip, normalize_path, parse_crx, resolve_relative, tree_to_zip,
)

FILES = {"manifest.json": '{"manifest_version": 3}', "bg.js": "chrome.tabs.query({})", "img/a.png": b"\x89PNG"}


def _unzip(data):
    with zipfile.ZipFile(io.BytesIO(data)) as zf:
        return {name: zf.read(name) for name in zf.namelist()}


def test_crx3_payload_matches_manual_strip():
    header = b"\x12\x34" * 20
    raw = make_crx3(make_zip(FILES), header)
    package = parse_crx(raw)
    assert package.header.version == 3
    assert package.header.header_length == len(header)
    assert package.header.header_bytes == header
    manual = _unzip(raw[12 + len(header):])
    assert package.tree.entries == manual
    assert package.tree.has_manifest()


def test_crx2_header_is_key_plus_signature():
    raw = make_crx2(make_zip(FILES), key=b"k" * 10, signature=b"s" * 6)
    package = parse_crx(raw)
    assert package.header.version == 2
    assert package.header.header_length == 16
    assert package.header.header_bytes == b"k" * 10 + b"s" * 6
    assert package.tree.paths() == sorted(FILES)


def test_raw_zip_is_bad_magic_for_parse_crx():
    with pytest.raises(BadMagic):
        parse_crx(make_zip(FILES))


def test_unsupported_version():
    raw = b"Cr24" + (7).to_bytes(4, "little") + (0).to_bytes(4, "little") + make_zip(FILES)
    with pytest.raises(UnsupportedVersion):
        parse_crx(raw)


def test_truncated_header():
    with pytest.raises(TruncatedHeader):
        parse_crx(b"Cr24\x03\x00")
    overrun = b"Cr24" + (3).to_bytes(4, "little") + (1000).to_bytes(4, "little") + b"xx"
    with pytest.raises(TruncatedHeader):
        parse_crx(overrun)


def test_garbage_payload_is_archive_error():
    with pytest.raises(ArchiveError):
        parse_crx(make_crx3(b"this is not a zip file at all"))


def test_plain_zip_exact_paths():
    tree = load_plain_zip(make_zip({"manifest.json": "{}", "bg.js": "x"}))
    assert tree.paths() == ["bg.js", "manifest.json"]


def test_dot_dot_segments_normalize():
    tree = load_plain_zip(make_zip({"a/../manifest.json": "{}"}))
    assert tree.paths() == ["manifest.json"]


def test_duplicate_entries():
    with pytest.raises(DuplicatePath):
        load_plain_zip(make_zip([("x.js", "1"), ("x.js", "2")]))


def test_duplicates_after_normalization():
    with pytest.raises(DuplicatePath):
        load_plain_zip(make_zip([("x.js", "1"), ("./x.js", "2")]))


@pytest.mark.parametrize("name", ["../evil.js", "/etc/passwd", "C:/windows/x", "a\x00b"])
def test_unsafe_paths_rejected(name):
    with pytest.raises(ArchiveError):
        normalize_path(name)


def test_directory_entries_skipped():
    assert normalize_path("folder/") is None
    assert normalize_path("a\\b.js") == "a/b.js"


def test_entry_size_cap():
    data = make_zip({"manifest.json": "{}", "big.js": "x" * 5000})
    with pytest.raises(ArchiveError):
        load_plain_zip(data, max_entry_bytes=1000)


def test_load_package_dispatch():
    zipped = make_zip(FILES)
    assert load_package(zipped).header is None
    assert load_package(make_crx3(zipped)).header.version == 3
    with pytest.raises(BadMagic):
        load_package(b"GIF89a....")


def test_package_hash_is_of_raw_bytes():
    import hashlib
    raw = make_crx3(make_zip(FILES))
    assert parse_crx(raw).sha256 == hashlib.sha256(raw).hexdigest()


def test_manifest_bytes_requires_manifest():
    assert load_package(make_zip(FILES)).tree.manifest_bytes() == b'{"manifest_version": 3}'
    with pytest.raises(MissingManifest) as info:
        load_package(make_zip({"bg.js": "x()"})).tree.manifest_bytes("a" * 32)
    assert info.value.ext_id == "a" * 32


def test_resolve_relative():
    assert resolve_relative("pages", "../js/a.js?v=1") == "js/a.js"
    assert resolve_relative("pages", "/root.js") == "root.js"
    assert resolve_relative("", "#frag") is None


def test_tree_round_trips_through_zip():
    tree = load_plain_zip(make_zip(FILES))
    assert load_plain_zip(tree_to_zip(tree)).entries == tree.entries
