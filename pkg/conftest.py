import datetime
import hashlib
import io
import json
import os
import struct
import sys
import warnings
import zipfile

import pytest

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

collect_ignore = ["examples"]


def make_zip(files):
    """ZIP bytes from a path -> content mapping (or a list of pairs, duplicates allowed)."""
    items = files.items() if isinstance(files, dict) else files
    buffer = io.BytesIO()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # duplicate names are written on purpose
        with zipfile.ZipFile(buffer, "w", compression=zipfile.ZIP_DEFLATED) as zf:
            for path, content in items:
                if isinstance(content, (dict, list)):
                    content = json.dumps(content)
                zf.writestr(path, content)
    return buffer.getvalue()


def make_crx3(zip_bytes, header=b"\x0a\x04test-proof"):
    return b"Cr24" + struct.pack("<II", 3, len(header)) + header + zip_bytes


def make_crx2(zip_bytes, key=b"K" * 16, signature=b"S" * 8):
    return b"Cr24" + struct.pack("<III", 2, len(key), len(signature)) + key + signature + zip_bytes


def ext_id(seed):
    """32-letter a-p id derived from a seed string."""
    digest = hashlib.sha256(str(seed).encode("utf-8")).hexdigest()[:32]
    return "".join(chr(ord("a") + int(c, 16)) for c in digest)


def package(manifest, files=None, crx=False):
    entries = {"manifest.json": manifest}
    entries.update(files or {})
    data = make_zip(entries)
    return make_crx3(data) if crx else data


# ---------------------------------------------------------------- fixture corpus

FAMILY_NAMES = ["Deal Finder", "Prize Alerts", "Quick Notes", "Ocean Wallpaper HD", "Account Sync", "Minimal Start"]
FAMILY_SLUGS = ["deals", "prizes", "notes", "ocean", "sync", None]
FAMILY_SCRIPTS = [
    # tabs-heavy background worker
    "chrome.tabs.create({url: 'https://shop.example/deal'});\n"
    "chrome.tabs.query({active: true}, function (tabs) { chrome.tabs.highlight({tabs: 0}); });\n"
    "chrome.tabs.onUpdated.addListener(function (id) { chrome.tabs.reload(id); });\n"
    "chrome.tabs.onActivated.addListener(function (info) { chrome.tabs.get(1, function (t) {}); });\n",
    # browser-action popup pushing notifications
    "chrome.notifications.create('promo', {type: 'basic', title: 'You won!', message: 'Claim now'});\n"
    "chrome.browserAction.setBadgeText({text: 'NEW'});\n"
    "chrome.browserAction.setBadgeBackgroundColor({color: '#f00'});\n"
    "chrome.notifications.onClicked.addListener(function (id) {\n"
    "  chrome.tabs.create({url: 'https://prize.example/claim'});\n});\n",
    # storage-heavy background worker
    "chrome.storage.local.get('notes', function (v) { chrome.storage.local.set({notes: []}); });\n"
    "chrome.storage.sync.get(null, function (s) {});\n"
    "chrome.storage.onChanged.addListener(function (changes, area) { chrome.storage.local.remove('draft'); });\n"
    "chrome.storage.local.getBytesInUse(null, function (n) {});\n",
    # new tab override page
    "chrome.topSites.get(function (sites) {});\n"
    "var api = chrome['his' + 'tory'];\napi.search({text: '', maxResults: 8}, function (h) {});\n"
    "chrome.runtime.getURL('wallpaper.jpg');\n",
    # every call behind eval
    "var ns = 'chrome.' + 'management';\n"
    "eval(ns + '.getAll(function (l) {})');\n"
    "eval(\"chrome.identity.getAuthToken({interactive: false}, function (t) {})\");\n"
    "eval('chrome.' + 'runtime.setUninstallURL(\"https://sync.example/bye\")');\n",
    None,
]
FAMILY_EXTRA_CALLS = [
    "chrome.tabs.discard(1);\n",
    "chrome.notifications.clear('promo');\n",
    "chrome.storage.sync.clear();\n",
    "chrome.bookmarks.getRecent(8, function (b) {});\n",
    "eval('chrome.identity.removeCachedAuthToken({token: \"t\"})');\n",
    None,
]
FAMILY_PERMISSIONS = [
    ["tabs", "activeTab"],
    ["notifications", "<all_urls>"],
    ["storage", "unlimitedStorage"],
    ["topSites", "history"],
    ["management", "identity"],
    None,
]
FAMILY_LABELS = [
    ["malware"] * 3 + ["none"] * 7,
    ["policy_violation"] * 10,
    ["none"] * 10,
    ["minor_policy_violation"] + ["none"] * 9,
    ["malware"] * 4 + ["none"] * 6,
    ["malware", "malware"] + ["none"] * 8,
]
PAGE = "<html><body><script src=\"{}\"></script></body></html>"


def _family_member(family, member):
    """Manifest and files of one family member; members 4 and 9 carry one extra call."""
    manifest = {
        "manifest_version": 3 if family in (0, 2, 4, 5) else 2,
        "name": f"{FAMILY_NAMES[family]} {member}",
        "version": f"1.{family}.{member}",
        "description": f"variant {member}",
        "icons": {"128": "icon.png"},
    }
    files = {"icon.png": b"\x89PNG fixture " + bytes([member])}
    if FAMILY_SCRIPTS[family] is None:
        return manifest, files

    manifest["permissions"] = FAMILY_PERMISSIONS[family]
    manifest["homepage_url"] = f"https://{FAMILY_SLUGS[family]}{member}.example"
    script = FAMILY_SCRIPTS[family]
    if member % 5 == 4:
        script += FAMILY_EXTRA_CALLS[family]
    if family == 1:
        manifest["browser_action"] = {"default_popup": "popup.html", "default_title": "Prizes"}
        files.update({"popup.html": PAGE.format("popup.js"), "popup.js": script})
    elif family == 3:
        manifest["chrome_url_overrides"] = {"newtab": "newtab.html"}
        files.update({"newtab.html": PAGE.format("newtab.js"), "newtab.js": script})
    else:
        manifest["background"] = {"service_worker": "bg.js"}
        files["bg.js"] = script
    files["lib/jquery.min.js"] = "/* lib */"
    return manifest, files


def _singleton(n):
    """Manifest-only package whose values share nothing with the families or with each other."""
    words = " ".join(f"s{n}w{k}" for k in range(240))
    manifest = {
        "manifest_version": 3 if n % 3 == 0 else 2,
        "name": f"Solo tool {n}",
        "version": "0.1",
        f"solo{n}_notes": words,
    }
    if n % 2 == 0:
        manifest["permissions"] = [f"solo{n}perm{k}" for k in range(4 + n % 3)]
    return manifest, {f"readme{n}.txt": words}


def _record(eid, name, label, publisher, day_offset, users):
    publish = datetime.date(2020, 1, 1) + datetime.timedelta(days=day_offset)
    removed = label != "none"
    removal = publish + datetime.timedelta(days=30 + 11 * day_offset) if removed else None
    return {
        "id": eid, "version": "1.0", "publisher": publisher, "user_count": users,
        "publish_date": publish.isoformat(), "version_release_date": publish.isoformat(),
        "removal_date": removal.isoformat() if removal else None,
        "vetting_label": label, "name": name, "sha256": None,
    }


@pytest.fixture(scope="session")
def fixture_corpus(tmp_path_factory):
    """70 packages: six behaviour families of 10 extensions each plus ten singletons."""
    root = tmp_path_factory.mktemp("corpus")
    corpus_dir = root / "packages"
    corpus_dir.mkdir()
    families, singletons, records = {}, [], []

    for family in range(6):
        ids = []
        for member in range(10):
            eid = ext_id(f"family-{family}-{member}")
            manifest, files = _family_member(family, member)
            suffix = ".crx" if member % 3 == 0 else ".zip"
            (corpus_dir / f"{eid}{suffix}").write_bytes(package(manifest, files, crx=suffix == ".crx"))
            publisher = "repeat-pub" if family == 5 and member < 2 else f"pub-{family}-{member % 4}"
            records.append(_record(eid, manifest["name"], FAMILY_LABELS[family][member], publisher,
                                   10 * family + member, 1000 * (member + 1)))
            ids.append(eid)
        families[family] = ids

    for n in range(10):
        eid = ext_id(f"single-{n}")
        manifest, files = _singleton(n)
        (corpus_dir / f"{eid}.zip").write_bytes(package(manifest, files))
        label = "malware" if n in (0, 1) else "none"
        publisher = "repeat-pub" if n == 0 else f"solo-{n}"
        records.append(_record(eid, manifest["name"], label, publisher, 100 + n, 50 * (n + 1)))
        singletons.append(eid)

    metadata = root / "metadata.jsonl"
    metadata.write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")
    return {
        "corpus_dir": str(corpus_dir),
        "metadata": str(metadata),
        "families": families,
        "singletons": singletons,
        "records": {r["id"]: r for r in records},
    }


@pytest.fixture(scope="session")
def built_store(fixture_corpus, tmp_path_factory):
    """The fixture corpus ingested, analyzed, embedded and clustered through the CLI."""
    from main import dispatch

    store = str(tmp_path_factory.mktemp("store"))
    base = ["--store", store, "--quiet"]
    assert dispatch(base + ["ingest", "--corpus", fixture_corpus["corpus_dir"],
                            "--metadata", fixture_corpus["metadata"]]) == 0
    assert dispatch(base + ["analyze", "--jobs", "1"]) == 0
    assert dispatch(base + ["embed"]) == 0
    assert dispatch(base + ["cluster"]) == 0
    return dict(fixture_corpus, store=store)
