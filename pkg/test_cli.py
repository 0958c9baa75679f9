import glob
import hashlib
import json
import os

import pytest
from sklearn.metrics import adjusted_rand_score

from clustering.cluster_engine import OUTLIER, load_assignments
from main import COMMANDS, dispatch, load_command


def _run(store, *argv):
    return dispatch(["--store", store, "--quiet", *argv])


def _json(capsys, store, *argv):
    capsys.readouterr()
    assert _run(store, *argv, "--json") == 0
    return json.loads(capsys.readouterr().out)


def test_every_command_resolves():
    for name in COMMANDS:
        assert callable(load_command(name))


def test_families_form_separate_clusters(built_store):
    assignment = load_assignments(os.path.join(built_store["store"], "assignments.csv"))
    labels = []
    for ids in built_store["families"].values():
        family_labels = {assignment.label_of(i) for i in ids}
        assert len(family_labels) == 1
        labels.append(family_labels.pop())
    assert OUTLIER not in labels
    assert len(set(labels)) == len(labels)
    assert all(len(members) >= 5 for members in assignment.clusters().values())


def test_query_lists_siblings_first(built_store, capsys):
    family = built_store["families"][2]
    result = _json(capsys, built_store["store"], "query", family[0], "--top", "12")
    assert sorted(result["siblings"]) == sorted(family[1:])
    first, rest = result["neighbours"][:9], result["neighbours"][9:]
    assert {hit["id"] for hit in first} == set(family[1:])
    assert min(hit["similarity"] for hit in first) >= 0.9
    assert max(hit["similarity"] for hit in rest) < min(hit["similarity"] for hit in first)


def test_query_unknown_id(built_store, capsys):
    capsys.readouterr()
    assert _run(built_store["store"], "query", "a" * 32) == 1
    assert "UnknownId" in capsys.readouterr().err


def test_compare_self_and_siblings(built_store, capsys):
    family = built_store["families"][0]
    capsys.readouterr()
    assert _run(built_store["store"], "compare", family[0], family[0]) == 0
    assert "similar" in capsys.readouterr().out

    report = _json(capsys, built_store["store"], "compare", family[1], family[3])
    assert report["verdict"] == "similar"
    assert report["identical_source_files"] == ["bg.js"]

    other = _json(capsys, built_store["store"], "compare", family[1], built_store["families"][2][1])
    assert other["verdict"] == "not_similar"


def test_family_partition_agrees_with_clusters(built_store):
    assignment = load_assignments(os.path.join(built_store["store"], "assignments.csv"))
    truth, predicted = [], []
    for family, ids in built_store["families"].items():
        truth += [family] * len(ids)
        predicted += [assignment.label_of(i) for i in ids]
    assert adjusted_rand_score(truth, predicted) >= 0.90
    outliers = [i for i in built_store["singletons"] if assignment.label_of(i) == OUTLIER]
    assert len(outliers) >= 7


def test_eval_pairs(built_store, capsys, tmp_path):
    families = built_store["families"]
    lines = ["id_a,id_b,expected"]
    for n in range(20):
        family = n % 6
        lines.append(f"{families[family][0]},{families[family][1 + n // 6]},similar")
    for n in range(20):
        fa = n % 6
        fb = (fa + 1 + n // 6) % 6
        lines.append(f"{families[fa][5 + n // 6]},{families[fb][(n + 2) % 10]},different")
    pairs = tmp_path / "pairs.csv"
    pairs.write_text("\n".join(lines) + "\n", encoding="utf-8")
    metrics = _json(capsys, built_store["store"], "eval-pairs", "--pairs", str(pairs))
    assert metrics["pairs"] == 40
    assert metrics["accuracy"] >= 0.9
    assert metrics["precision"] >= 0.85 and metrics["recall"] >= 0.85


@pytest.mark.parametrize("kind, files", [
    ("infringing", ["infringing_clusters.csv", "top_clusters.csv", "impact.csv", "repeat_offenders.json",
                    "detection_rate.json", "republished.json", "infringing_clusters.png"]),
    ("survival", ["km_All.csv", "km_M.csv", "logrank.csv", "lifetimes.json", "km.png", "survival.xlsx"]),
    ("labels", ["labels.csv", "labels.json"]),
])
def test_reports(built_store, capsys, kind, files):
    listing = _json(capsys, built_store["store"], "report", kind, "--xlsx")
    for name in files:
        assert name in listing["files"]


def test_infringing_report_contents(built_store):
    reports = os.path.join(built_store["store"], "reports")
    assert _run(built_store["store"], "report", "infringing") == 0
    with open(os.path.join(reports, "detection_rate.json"), encoding="utf-8") as f:
        rates = json.load(f)
    assignment = load_assignments(os.path.join(built_store["store"], "assignments.csv"))
    vetted = [i for i, r in built_store["records"].items() if r["vetting_label"] != "none"]
    expected = {assignment.label_of(i) for i in vetted} - {OUTLIER}
    assert rates["clusters"] == len(expected)
    # family 1 is entirely policy violations; its four publishers and repeat-pub each have 2+ vetted items
    assert rates["perfect"] == 1
    with open(os.path.join(reports, "repeat_offenders.json"), encoding="utf-8") as f:
        assert json.load(f)["offenders"] == 5


def _package_sha(corpus_dir, ext_id):
    (path,) = glob.glob(os.path.join(corpus_dir, ext_id + ".*"))
    with open(path, "rb") as f:
        return hashlib.sha256(f.read()).hexdigest()


def test_triage_report(built_store, tmp_path):
    # metadata rows carry no sha256, so matching relies on the hash taken at ingest
    assert all(r["sha256"] is None for r in built_store["records"].values())
    corpus, families = built_store["corpus_dir"], built_store["families"]
    flagged = [{"name": "engine-a", "category": "malicious"}, {"name": "engine-b", "category": "undetected"}]
    rows = [{"sha256": _package_sha(corpus, i), "found": True, "engines": flagged, "suggested_label": "adware.deals"}
            for i in families[0][:3]]
    rows.append({"sha256": _package_sha(corpus, families[4][0]), "found": True,
                 "engines": [{"name": "engine-a", "category": "undetected"}]})
    rows.append({"sha256": _package_sha(corpus, families[4][1]), "found": False})
    detections = tmp_path / "detections.jsonl"
    detections.write_text("".join(json.dumps(r) + "\n" for r in rows), encoding="utf-8")
    assert _run(built_store["store"], "report", "triage", "--detections", str(detections)) == 0
    with open(os.path.join(built_store["store"], "reports", "triage.json"), encoding="utf-8") as f:
        assert json.load(f) == {"NotFound": 7, "Clean": 1, "Malicious": 3}
    assert _run(built_store["store"], "report", "triage") == 1


def test_usage_errors(tmp_path):
    assert dispatch(["no-such-command"]) == 2
    assert dispatch(["--store", str(tmp_path), "analyze", "--static-only", "--dynamic-only"]) == 2
    assert dispatch(["--store", str(tmp_path / "empty"), "--quiet", "cluster"]) == 1
