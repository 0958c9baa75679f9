import datetime
import json

import pytest

from clustering.cluster_engine import OUTLIER, ClusterAssignment
from conftest import ext_id
from vetting.analytics import (
    NTE, MissingRecord, count_republished, detection_rate_summary, find_infringing_clusters,
    find_repeat_offenders, impact_summary, label_feature_frame, label_feature_table, malicious_cluster_summary,
    republished_summary, top_infringing_clusters,
)
from vetting.records import (
    ExtensionRecord, InvariantViolation, RecordFormatError, VettingLabel, crawl_end_of, latest_versions,
)
from vetting.triage import (
    CLEAN, MALICIOUS, NO_FAMILY, NOT_FOUND, DetectionReport, SchemaError, load_detection_reports,
    triage_detection_reports,
)

DAY = datetime.date(2020, 1, 1)


def _rec(n, label="none", published=0, removed=None, publisher="pub", users=100, name=None, sha=None):
    label = VettingLabel.parse(label)
    if removed is None and label.vetted:
        removed = published + 100
    publish = DAY + datetime.timedelta(days=published)
    return ExtensionRecord(
        id=ext_id(n), version="1.0", publisher=publisher, user_count=users,
        publish_date=publish, version_release_date=publish,
        removal_date=DAY + datetime.timedelta(days=removed) if removed is not None else None,
        vetting_label=label, name=name or f"Extension {n}", sha256=sha,
    )


def _world(groups, outliers=()):
    """Records keyed by id plus an assignment with one cluster per group."""
    records, ids, labels = {}, [], []
    for label, members in enumerate(groups):
        for record in members:
            records[record.id] = record
            ids.append(record.id)
            labels.append(label)
    for record in outliers:
        records[record.id] = record
        ids.append(record.id)
        labels.append(OUTLIER)
    return records, ClusterAssignment(tuple(ids), labels)


# ---------------------------------------------------------------- records

def test_label_parsing():
    assert VettingLabel.parse("PV") is VettingLabel.POLICY_VIOLATION
    assert VettingLabel.parse(None) is VettingLabel.NONE
    assert VettingLabel.MINOR_POLICY_VIOLATION.code == "MPV"
    with pytest.raises(RecordFormatError):
        VettingLabel.parse("bad")


def test_record_validation_rules():
    assert _rec(1).validate()
    bad_dates = _rec(2, removed=-5)
    with pytest.raises(InvariantViolation) as info:
        bad_dates.validate()
    assert info.value.rule == "date_order"

    unremoved = ExtensionRecord(ext_id(3), "1", "p", 1, DAY, DAY, None, VettingLabel.MALWARE, "x")
    with pytest.raises(InvariantViolation) as info:
        unremoved.validate()
    assert info.value.rule == "label_removal"

    with pytest.raises(InvariantViolation) as info:
        ExtensionRecord("short", "1", "p", 1, DAY, DAY, None, VettingLabel.NONE, "x").validate()
    assert info.value.rule == "id_format"


def test_record_dict_round_trip():
    record = _rec(4, "malware", published=3, sha="AB" * 32)
    back = ExtensionRecord.from_dict(record.to_dict())
    assert back == ExtensionRecord.from_dict(json.loads(json.dumps(record.to_dict())))
    assert back.sha256 == "ab" * 32
    with pytest.raises(RecordFormatError):
        ExtensionRecord.from_dict({"id": "x"})


def test_lifetime_and_latest_versions():
    record = _rec(5, "malware", published=10, removed=40)
    assert record.lifetime_days() == 30
    still = _rec(6, published=10)
    assert still.lifetime_days() is None
    assert still.lifetime_days(DAY + datetime.timedelta(days=15)) == 5
    older = ExtensionRecord(still.id, "0.9", "pub", 1, DAY, DAY, None, VettingLabel.NONE, "old")
    assert latest_versions([still, older])[still.id].version == "1.0"
    assert crawl_end_of([record, still]) == DAY + datetime.timedelta(days=40)


# ---------------------------------------------------------------- infringing clusters

def test_detection_rate_one_third():
    records, assignment = _world([[_rec(1, "malware"), _rec(2), _rec(3)]])
    (stats,) = find_infringing_clusters(assignment, records)
    assert stats.size == 3 and stats.vetted_count == 1 and stats.published_count == 2
    assert stats.detection_rate == pytest.approx(1 / 3)
    assert stats.vetted_count + stats.unpublished_count + stats.published_count == stats.size


def test_detection_rate_half_with_unpublished():
    members = [_rec(1, "malware"), _rec(2, "policy_violation"), _rec(3, removed=50), _rec(4)]
    records, assignment = _world([members])
    (stats,) = find_infringing_clusters(assignment, records)
    assert stats.detection_rate == 0.5
    assert (stats.vetted_count, stats.unpublished_count, stats.published_count) == (2, 1, 1)
    assert stats.label_counts == {"M": 1, "PV": 1}


def test_clusters_without_vetted_members_excluded():
    records, assignment = _world([[_rec(1), _rec(2)], [_rec(3, "malware"), _rec(4)]],
                                 outliers=[_rec(5, "malware")])
    stats = find_infringing_clusters(assignment, records)
    assert [s.cluster for s in stats] == [1]


def test_missing_record():
    records, assignment = _world([[_rec(1, "malware"), _rec(2)]])
    del records[ext_id(2)]
    with pytest.raises(MissingRecord):
        find_infringing_clusters(assignment, records)


@pytest.mark.parametrize("members, expected", [
    ([("malware", 0), ("none", 366), ("none", 731)], 2),
    ([("malware", 5), ("none", 5), ("none", 5)], 0),
    ([("malware", 0), ("malware", 730), ("none", 365)], 2),
])
def test_count_republished(members, expected):
    cluster = [_rec(n, label, published=day) for n, (label, day) in enumerate(members)]
    assert count_republished(cluster) == expected


def test_repeat_offenders():
    records = [
        _rec(1, "malware", publisher="a"), _rec(2, "policy_violation", publisher="a"), _rec(3, publisher="a"),
        _rec(4, "malware", publisher="b"),
        _rec(5, "malware", publisher="c"), _rec(6, "malware", publisher="c"), _rec(7, "malware", publisher="c"),
    ]
    by_id, assignment = _world([records[:4], records[4:]])
    stats = find_infringing_clusters(assignment, by_id)
    offenders = find_repeat_offenders(by_id, stats)
    assert sorted(offenders) == ["a", "c"]
    assert (offenders["a"].vetted_count, offenders["a"].published_infringing_count) == (2, 1)
    assert offenders["c"].vetted_count == 3


def test_summaries():
    records, assignment = _world([
        [_rec(1, "malware", users=10), _rec(2, "malware", users=20)],
        [_rec(3, "malware", published=0, users=5), _rec(4, published=9, users=1000)],
    ])
    stats = find_infringing_clusters(assignment, records)
    rates = detection_rate_summary(stats)
    assert rates["clusters"] == 2 and rates["perfect"] == 1 and rates["perfect_share"] == 0.5
    republished = republished_summary(stats)
    assert republished["republished"] == 1 and republished["clusters_with_republished"] == 1
    impact = impact_summary(stats, records).set_index("status")
    assert impact.loc["removed", "sum"] == 35
    assert impact.loc["published", "sum"] == 1000
    assert detection_rate_summary([])["clusters"] == 0


def test_top_clusters_table():
    big = [_rec(n, "malware" if n < 2 else "none", users=n + 1) for n in range(5)]
    small = [_rec(10, "minor_policy_violation"), _rec(11)]
    themed = [_rec(20 + n, "malware", name=f"Blue Theme {n}") for n in range(3)]
    records, assignment = _world([big, small, themed])
    stats = find_infringing_clusters(assignment, records)

    table = top_infringing_clusters(stats, records, top=2)
    assert list(table["cluster"]) == [0, 2, "total"]
    first = table.iloc[0]
    assert (first["T"], first["P"], first["M"], first["example_id"]) == (5, 3, 2, ext_id(4))
    assert table.iloc[-1]["T"] == 10

    capped = top_infringing_clusters(stats, records, top=5, max_nte_clusters=0)
    assert list(capped["cluster"]) == [0, 1, "total"]


# ---------------------------------------------------------------- label / feature table

def test_nte_takes_precedence():
    records = [
        _rec(1, "malware", name="Ocean Wallpaper HD"),
        _rec(2, "malware"), _rec(3, "malware"),
        _rec(4, "policy_violation"),
        _rec(5),
    ]
    features = {
        ext_id(1): {"mv3", "chrome_url_overrides.newtab"},
        ext_id(2): {"mv2", "browser.tabs.create", "tabs"},
        ext_id(3): {"mv3", "browser.tabs.create"},
        ext_id(4): {"mv3"},
        ext_id(5): {"mv3", "cookies"},
    }
    table = label_feature_table(records, features)
    assert [f for f, _, _ in table[NTE]] == ["chrome_url_overrides.newtab", "mv3"]
    assert table["M"][0] == ("browser.tabs.create", 1.0, 1)
    assert table["M"][1:] == [("mv2", 0.5, 2), ("mv3", 0.5, 3), ("tabs", 0.5, 4)]
    assert table["MPV"] == []
    assert "cookies" not in {f for rows in table.values() for f, _, _ in rows}

    frame = label_feature_frame(table, top=1)
    assert list(frame.columns)[:3] == ["feature", "M rank", "M %"]
    row = frame.set_index("feature").loc["browser.tabs.create"]
    assert row["M %"] == 100.0
    assert row["NTE %"] == 0.0


# ---------------------------------------------------------------- triage

def _report(sha, flagged, total=70, label=None, found=True):
    engines = [{"name": f"e{i}", "category": "malicious" if i < flagged else "undetected"} for i in range(total)]
    return {"sha256": sha, "found": found, "engines": engines, "suggested_label": label}


def test_triage(tmp_path):
    shas = [f"{n:064x}" for n in range(5)]
    records = [_rec(n, "malware", sha=shas[n], users=10 * (n + 1), published=n) for n in range(5)]
    lines = [
        _report(shas[1], 0),
        _report(shas[2], 32, total=100, label="trojan.chromex"),
        _report(shas[3], 18, total=100, label="trojan.chromex"),
        _report(shas[4], 1, total=10),
    ]
    path = tmp_path / "detections.jsonl"
    path.write_text("\n".join(json.dumps(line) for line in lines) + "\n", encoding="utf-8")

    result = triage_detection_reports(records, load_detection_reports(str(path)))
    assert result.categories[ext_id(0)] == NOT_FOUND
    assert result.categories[ext_id(1)] == CLEAN
    assert result.categories[ext_id(2)] == MALICIOUS
    assert result.counts() == {NOT_FOUND: 1, CLEAN: 1, MALICIOUS: 3}

    family = result.families.iloc[0]
    assert family["family"] == "trojan.chromex" and family["count"] == 2
    assert family["max_detection"] == pytest.approx(0.32)
    assert family["avg_detection"] == pytest.approx(0.25)
    assert family["users"] == 70
    assert result.families.iloc[1]["family"] == NO_FAMILY

    assignment = ClusterAssignment((ext_id(2), ext_id(3), ext_id(9)), [0, OUTLIER, 0])
    summary = malicious_cluster_summary(result.categories, assignment)
    assert summary == {"malicious": 3, "clustered": 1, "outliers": 1, "not_analyzed": 1, "clusters": 1}


@pytest.mark.parametrize("row", [
    {"sha256": "ab", "found": True, "engines": []},
    {"sha256": "a" * 64, "found": "yes", "engines": []},
    {"sha256": "a" * 64, "found": True, "engines": [{"name": "x", "category": "harmless"}]},
    {"sha256": "a" * 64, "found": True, "engines": [], "suggested_label": 3},
])
def test_detection_schema_errors(tmp_path, row):
    path = tmp_path / "bad.jsonl"
    path.write_text(json.dumps(row) + "\n", encoding="utf-8")
    with pytest.raises(SchemaError):
        load_detection_reports(str(path))


def test_not_found_flag_counts_as_missing():
    sha = "c" * 64
    record = _rec(1, "malware", sha=sha)
    reports = {sha: DetectionReport(sha, False)}
    assert triage_detection_reports([record], reports).categories[record.id] == NOT_FOUND
