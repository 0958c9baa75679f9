# triage.py
"""Sort Malware-labelled extensions by third-party detection reports."""
import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import pandas as pd

from common.errors import LookalikeError

logger = logging.getLogger(__name__)

NOT_FOUND = "NotFound"
CLEAN = "Clean"
MALICIOUS = "Malicious"
FLAGGING = ("malicious", "suspicious")
CATEGORIES = ("malicious", "suspicious", "undetected")
NO_FAMILY = "N/A"


class SchemaError(LookalikeError):
    pass


@dataclass(frozen=True)
class DetectionReport:
    sha256: str
    found: bool
    engines: Tuple[Tuple[str, str], ...] = ()
    suggested_label: str = None

    @property
    def flagged(self):
        return sum(1 for _, category in self.engines if category in FLAGGING)

    @property
    def detection_ratio(self):
        return self.flagged / len(self.engines) if self.engines else 0.0

    @classmethod
    def from_dict(cls, row, line_no=None):
        where = f"line {line_no}: " if line_no else ""
        if not isinstance(row, dict):
            raise SchemaError(f"{where}report is not an object")
        sha = row.get("sha256")
        if not isinstance(sha, str) or len(sha) != 64:
            raise SchemaError(f"{where}sha256 must be a 64-character hex string")
        if not isinstance(row.get("found"), bool):
            raise SchemaError(f"{where}found must be a boolean")
        engines = row.get("engines", [])
        if not isinstance(engines, list):
            raise SchemaError(f"{where}engines must be a list")
        parsed = []
        for engine in engines:
            if not isinstance(engine, dict) or not isinstance(engine.get("name"), str):
                raise SchemaError(f"{where}engine entries need a name")
            if engine.get("category") not in CATEGORIES:
                raise SchemaError(f"{where}unknown engine category {engine.get('category')!r}")
            parsed.append((engine["name"], engine["category"]))
        label = row.get("suggested_label")
        if label is not None and not isinstance(label, str):
            raise SchemaError(f"{where}suggested_label must be a string or null")
        return cls(sha.lower(), row["found"], tuple(parsed), label)


def load_detection_reports(path):
    """JSON Lines file -> dict sha256 -> DetectionReport."""
    reports = {}
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except ValueError as e:
                raise SchemaError(f"line {line_no}: not JSON ({e})") from e
            report = DetectionReport.from_dict(row, line_no)
            reports[report.sha256] = report
    logger.info("loaded %d detection reports from %s", len(reports), path)
    return reports


def categorize(record, reports):
    report = reports.get(record.sha256) if record.sha256 else None
    if report is None or not report.found:
        return NOT_FOUND
    return MALICIOUS if report.flagged else CLEAN


@dataclass
class TriageResult:
    categories: Dict[str, str] = field(default_factory=dict)
    families: pd.DataFrame = None

    def counts(self):
        counts = {c: 0 for c in (NOT_FOUND, CLEAN, MALICIOUS)}
        for category in self.categories.values():
            counts[category] += 1
        return counts


def triage_detection_reports(records, reports):
    """
    Categorize records and build the malware family table.

    Parameters:
        records: ExtensionRecord list (Malware-labelled).
        reports: dict sha256 -> DetectionReport.

    Returns:
        TriageResult with id -> NotFound|Clean|Malicious and a family table
        (count, max/avg detection ratio, user sum, release-date span).
    """
    categories = {}
    families: Dict[str, List] = defaultdict(list)
    for record in sorted(records, key=lambda r: r.id):
        category = categorize(record, reports)
        categories[record.id] = category
        if category == MALICIOUS:
            report = reports[record.sha256]
            families[report.suggested_label or NO_FAMILY].append((record, report.detection_ratio))

    rows = []
    for family, items in families.items():
        ratios = [ratio for _, ratio in items]
        released = [r.version_release_date for r, _ in items]
        rows.append({
            "family": family,
            "count": len(items),
            "max_detection": max(ratios),
            "avg_detection": sum(ratios) / len(ratios),
            "users": sum(r.user_count for r, _ in items),
            "lifetime_from": min(released).isoformat(),
            "lifetime_to": max(released).isoformat(),
        })
    columns = ["family", "count", "max_detection", "avg_detection", "users", "lifetime_from", "lifetime_to"]
    frame = pd.DataFrame(rows, columns=columns)
    if not frame.empty:
        frame = frame.sort_values(["count", "family"], ascending=[False, True], ignore_index=True)
    return TriageResult(categories, frame)
