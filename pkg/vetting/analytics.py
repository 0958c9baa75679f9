# analytics.py
"""Infringing clusters, republishing, repeat offenders and label/feature tables."""
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import List

import numpy as np
import pandas as pd

from clustering.cluster_engine import OUTLIER
from common import config
from common.errors import LookalikeError
from vetting.records import VETTED_LABELS, crawl_end_of, is_nte

logger = logging.getLogger(__name__)

NTE = "NTE"
LABEL_GROUPS = tuple(label.code for label in VETTED_LABELS) + (NTE,)


class MissingRecord(LookalikeError):
    pass


@dataclass
class InfringingClusterStats:
    cluster: int
    size: int
    vetted_count: int
    unpublished_count: int
    published_count: int
    detection_rate: float
    republished_count: int
    publisher_count: int
    user_sum: int
    members: List[str] = field(default_factory=list)
    label_counts: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "cluster": self.cluster,
            "size": self.size,
            "vetted": self.vetted_count,
            "unpublished": self.unpublished_count,
            "published": self.published_count,
            "detection_rate": self.detection_rate,
            "republished": self.republished_count,
            "publishers": self.publisher_count,
            "users": self.user_sum,
        }


@dataclass(frozen=True)
class RepeatOffender:
    publisher: str
    vetted_count: int
    published_infringing_count: int


def count_republished(cluster):
    """Members published strictly after the earliest vetted member's publish date."""
    vetted = [r.publish_date for r in cluster if r.vetted]
    if not vetted:
        return 0
    first = min(vetted)
    return sum(1 for r in cluster if r.publish_date > first)


def find_infringing_clusters(assignment, records):
    """
    Clusters of two or more members with at least one vetted member.

    Parameters:
        assignment: ClusterAssignment.
        records: dict id -> ExtensionRecord (newest version per id).

    Returns:
        InfringingClusterStats list ordered by cluster id.
    """
    stats = []
    for label, ids in assignment.clusters().items():
        missing = [i for i in ids if i not in records]
        if missing:
            raise MissingRecord(f"cluster {label} member has no metadata", missing[0])
        members = [records[i] for i in ids]
        if len(members) < 2 or not any(r.vetted for r in members):
            continue
        vetted = sum(r.vetted for r in members)
        unpublished = sum(r.removed and not r.vetted for r in members)
        published = sum(r.published for r in members)
        stats.append(InfringingClusterStats(
            cluster=label,
            size=len(members),
            vetted_count=vetted,
            unpublished_count=unpublished,
            published_count=published,
            detection_rate=vetted / len(members),
            republished_count=count_republished(members),
            publisher_count=len({r.publisher for r in members}),
            user_sum=sum(r.user_count for r in members),
            members=list(ids),
            label_counts=dict(Counter(r.vetting_label.code for r in members if r.vetted)),
        ))
    logger.info("%d infringing clusters out of %d", len(stats), assignment.n_clusters)
    return stats


def find_repeat_offenders(records, stats=()):
    """Publishers with two or more vetted extensions, with their still-published infringing items."""
    records = list(records.values()) if isinstance(records, dict) else list(records)
    infringing = {i for s in stats for i in s.members}
    vetted = Counter(r.publisher for r in records if r.vetted)
    published = Counter(r.publisher for r in records if r.published and r.id in infringing)
    return {
        publisher: RepeatOffender(publisher, count, published.get(publisher, 0))
        for publisher, count in sorted(vetted.items())
        if count >= 2
    }


def _describe(values):
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return {"count": 0, "sum": 0.0, "mean": float("nan"), "std": float("nan"),
                "q25": float("nan"), "q50": float("nan"), "q75": float("nan")}
    q25, q50, q75 = np.percentile(values, [25, 50, 75])
    return {
        "count": int(values.size),
        "sum": float(values.sum()),
        "mean": float(values.mean()),
        "std": float(values.std(ddof=1)) if values.size > 1 else 0.0,
        "q25": float(q25),
        "q50": float(q50),
        "q75": float(q75),
    }


def impact_summary(stats, records):
    """User counts of removed vs still-published infringing extensions."""
    members = [records[i] for s in stats for i in s.members]
    rows = {
        "removed": _describe([r.user_count for r in members if r.removed]),
        "published": _describe([r.user_count for r in members if r.published]),
    }
    return pd.DataFrame.from_dict(rows, orient="index").rename_axis("status").reset_index()


def detection_rate_summary(stats):
    rates = np.array([s.detection_rate for s in stats], dtype=float)
    if rates.size == 0:
        return {"clusters": 0, "perfect": 0, "perfect_share": 0.0, "mean": float("nan"),
                "q25": float("nan"), "q50": float("nan"), "q75": float("nan")}
    q25, q50, q75 = np.percentile(rates, [25, 50, 75])
    perfect = int(np.sum(np.isclose(rates, 1.0)))
    return {
        "clusters": int(rates.size),
        "perfect": perfect,
        "perfect_share": perfect / rates.size,
        "mean": float(rates.mean()),
        "q25": float(q25),
        "q50": float(q50),
        "q75": float(q75),
    }


def republished_summary(stats):
    total_items = sum(s.size for s in stats)
    with_republished = sum(1 for s in stats if s.republished_count > 0)
    republished = sum(s.republished_count for s in stats)
    return {
        "clusters": len(stats),
        "clusters_with_republished": with_republished,
        "clusters_with_republished_share": with_republished / len(stats) if stats else 0.0,
        "republished": republished,
        "republished_share": republished / total_items if total_items else 0.0,
    }


def repeat_offender_summary(offenders, stats, records):
    published_infringing = [records[i] for s in stats for i in s.members if records[i].published]
    from_offenders = sum(1 for r in published_infringing if r.publisher in offenders)
    return {
        "offenders": len(offenders),
        "offenders_with_published": sum(1 for o in offenders.values() if o.published_infringing_count > 0),
        "published_infringing": len(published_infringing),
        "published_from_offenders": from_offenders,
        "published_from_offenders_share": from_offenders / len(published_infringing) if published_infringing else 0.0,
    }


def _nte_dominated(members, keywords):
    return sum(is_nte(r, keywords) for r in members) * 2 > len(members)


def top_infringing_clusters(stats, records, top=30, max_nte_clusters=None,
                            nte_keywords=config.NTE_KEYWORDS, crawl_end=None):
    """
    Largest infringing clusters as a table, plus a totals row over every cluster.

    NTE-dominated clusters (most member names match an NTE keyword) can be
    capped with max_nte_clusters.
    """
    crawl_end = crawl_end or crawl_end_of(records.values())
    ordered = sorted(stats, key=lambda s: (-s.size, s.cluster))
    rows, nte_taken = [], 0
    for s in ordered:
        if len(rows) >= top:
            break
        members = [records[i] for i in s.members]
        if _nte_dominated(members, nte_keywords):
            if max_nte_clusters is not None and nte_taken >= max_nte_clusters:
                continue
            nte_taken += 1
        rows.append(_cluster_row(s, members, crawl_end))

    every = [records[i] for s in stats for i in s.members]
    totals = {
        "cluster": "total", "T": sum(s.size for s in stats),
        "P": sum(s.published_count for s in stats),
        "PV": sum(s.label_counts.get("PV", 0) for s in stats),
        "MPV": sum(s.label_counts.get("MPV", 0) for s in stats),
        "M": sum(s.label_counts.get("M", 0) for s in stats),
        "publishers": len({r.publisher for r in every}),
        "users": sum(r.user_count for r in every),
    }
    totals.update(_lifetimes(every, crawl_end))
    totals.update({"example_id": "", "example_name": ""})
    columns = ["cluster", "T", "P", "PV", "MPV", "M", "publishers", "users",
               "lifetime_avg", "lifetime_max", "example_id", "example_name"]
    return pd.DataFrame(rows + [totals], columns=columns)


def _lifetimes(members, crawl_end):
    days = [r.lifetime_days(crawl_end) for r in members]
    days = [d for d in days if d is not None]
    return {
        "lifetime_avg": float(np.mean(days)) if days else float("nan"),
        "lifetime_max": int(max(days)) if days else 0,
    }


def _cluster_row(s, members, crawl_end):
    example = max(members, key=lambda r: (r.user_count, r.id))
    row = {
        "cluster": s.cluster, "T": s.size, "P": s.published_count,
        "PV": s.label_counts.get("PV", 0), "MPV": s.label_counts.get("MPV", 0),
        "M": s.label_counts.get("M", 0),
        "publishers": s.publisher_count, "users": s.user_sum,
        "example_id": example.id, "example_name": example.name,
    }
    row.update(_lifetimes(members, crawl_end))
    return row


def label_group(record, nte_keywords=config.NTE_KEYWORDS):
    """NTE when the name matches a keyword, otherwise the label code; None for unvetted."""
    if not record.vetted:
        return None
    if is_nte(record, nte_keywords):
        return NTE
    return record.vetting_label.code


def label_feature_table(records, features, nte_keywords=config.NTE_KEYWORDS):
    """
    Feature occurrence per vetted group (M, PV, MPV, NTE).

    Returns:
        dict group -> list of (feature, fraction, rank), highest fraction
        first, ties broken by feature name.
    """
    records = list(records.values()) if isinstance(records, dict) else list(records)
    grouped = defaultdict(list)
    for record in records:
        group = label_group(record, nte_keywords)
        if group is not None:
            grouped[group].append(record)

    table = {}
    for group in LABEL_GROUPS:
        members = grouped.get(group, [])
        counts = Counter()
        for record in members:
            counts.update(set(features.get(record.id, ())))
        ranked = sorted(((f, c / len(members)) for f, c in counts.items()), key=lambda x: (-x[1], x[0]))
        table[group] = [(f, frac, rank) for rank, (f, frac) in enumerate(ranked, 1)]
    return table


def label_feature_frame(table, top=20):
    """Feature x (rank, %) per group, over the union of every group's top features."""
    chosen = []
    for group in LABEL_GROUPS:
        for feature, _, _ in table.get(group, [])[:top]:
            if feature not in chosen:
                chosen.append(feature)
    lookup = {g: {f: (rank, frac) for f, frac, rank in rows} for g, rows in table.items()}
    rows = []
    for feature in chosen:
        row = {"feature": feature}
        for group in LABEL_GROUPS:
            rank, frac = lookup.get(group, {}).get(feature, (None, 0.0))
            row[f"{group} rank"] = rank
            row[f"{group} %"] = round(100 * frac, 1)
        rows.append(row)
    columns = ["feature"] + [f"{g} {c}" for g in LABEL_GROUPS for c in ("rank", "%")]
    return pd.DataFrame(rows, columns=columns)


def malicious_cluster_summary(categories, assignment, malicious="Malicious"):
    """How Malicious-triaged extensions spread over clusters and outliers."""
    ids = sorted(i for i, c in categories.items() if c == malicious)
    clustered = [i for i in ids if i in assignment and assignment.label_of(i) != OUTLIER]
    outliers = [i for i in ids if i in assignment and assignment.label_of(i) == OUTLIER]
    return {
        "malicious": len(ids),
        "clustered": len(clustered),
        "outliers": len(outliers),
        "not_analyzed": len(ids) - len(clustered) - len(outliers),
        "clusters": len({assignment.label_of(i) for i in clustered}),
    }
