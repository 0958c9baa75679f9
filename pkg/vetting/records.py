# records.py
"""Extension metadata records and vetting labels."""
import datetime
import re
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from common.errors import LookalikeError
from common.utils import days_between, parse_day

ID_PATTERN = re.compile(r"^[a-p]{32}$")
REQUIRED_FIELDS = ("id", "version", "publisher", "user_count", "publish_date", "version_release_date",
                   "vetting_label", "name")


class RecordFormatError(LookalikeError):
    pass


class InvariantViolation(LookalikeError):
    def __init__(self, message="", ext_id=None, rule=""):
        super().__init__(message, ext_id)
        self.rule = rule


class VettingLabel(Enum):
    NONE = "none"
    MALWARE = "malware"
    POLICY_VIOLATION = "policy_violation"
    MINOR_POLICY_VIOLATION = "minor_policy_violation"

    @property
    def code(self):
        return _CODES[self]

    @property
    def vetted(self):
        return self is not VettingLabel.NONE

    @classmethod
    def parse(cls, value):
        text = "none" if value is None else str(value).strip().lower()
        for label in cls:
            if text in (label.value, _CODES[label].lower()):
                return label
        raise RecordFormatError(f"unknown vetting_label {value!r}")


_CODES = {
    VettingLabel.NONE: "",
    VettingLabel.MALWARE: "M",
    VettingLabel.POLICY_VIOLATION: "PV",
    VettingLabel.MINOR_POLICY_VIOLATION: "MPV",
}
VETTED_LABELS = (VettingLabel.MALWARE, VettingLabel.POLICY_VIOLATION, VettingLabel.MINOR_POLICY_VIOLATION)


@dataclass(frozen=True)
class ExtensionRecord:
    id: str
    version: str
    publisher: str
    user_count: int
    publish_date: datetime.date
    version_release_date: datetime.date
    removal_date: Optional[datetime.date]
    vetting_label: VettingLabel
    name: str
    sha256: Optional[str] = None

    @property
    def vetted(self):
        return self.vetting_label.vetted

    @property
    def removed(self):
        return self.removal_date is not None

    @property
    def published(self):
        return self.removal_date is None

    def lifetime_days(self, crawl_end=None):
        """Days from the version's release to removal (or crawl_end while still published)."""
        end = self.removal_date or crawl_end
        if end is None:
            return None
        return days_between(self.version_release_date, end)

    def validate(self):
        if not ID_PATTERN.match(self.id):
            raise InvariantViolation(f"id {self.id!r} is not 32 letters a-p", self.id, "id_format")
        if self.user_count < 0:
            raise InvariantViolation("negative user_count", self.id, "user_count")
        if self.removal_date is not None and self.removal_date < self.publish_date:
            raise InvariantViolation("removal_date precedes publish_date", self.id, "date_order")
        if self.vetted and self.removal_date is None:
            raise InvariantViolation("vetted extension without removal_date", self.id, "label_removal")
        return self

    @classmethod
    def from_dict(cls, row):
        if not isinstance(row, dict):
            raise RecordFormatError(f"metadata row is a {type(row).__name__}, not an object")
        missing = [f for f in REQUIRED_FIELDS if f not in row]
        if missing:
            raise RecordFormatError(f"missing fields: {', '.join(missing)}", row.get("id"))
        try:
            user_count = int(row["user_count"])
            publish = parse_day(row["publish_date"])
            release = parse_day(row["version_release_date"])
            removal = parse_day(row.get("removal_date"))
        except (TypeError, ValueError) as e:
            raise RecordFormatError(f"bad field value: {e}", row.get("id")) from e
        if publish is None or release is None:
            raise RecordFormatError("publish_date and version_release_date are required", row.get("id"))
        sha = row.get("sha256")
        return cls(
            id=str(row["id"]),
            version=str(row["version"]),
            publisher=str(row["publisher"]),
            user_count=user_count,
            publish_date=publish,
            version_release_date=release,
            removal_date=removal,
            vetting_label=VettingLabel.parse(row["vetting_label"]),
            name=str(row["name"]),
            sha256=str(sha).lower() if sha else None,
        )

    def to_dict(self):
        return {
            "id": self.id,
            "version": self.version,
            "publisher": self.publisher,
            "user_count": self.user_count,
            "publish_date": self.publish_date.isoformat(),
            "version_release_date": self.version_release_date.isoformat(),
            "removal_date": self.removal_date.isoformat() if self.removal_date else None,
            "vetting_label": self.vetting_label.value,
            "name": self.name,
            "sha256": self.sha256,
        }


def latest_versions(records):
    """Newest version per id by version_release_date; later rows win ties."""
    newest = {}
    for record in records:
        current = newest.get(record.id)
        if current is None or record.version_release_date >= current.version_release_date:
            newest[record.id] = record
    return dict(sorted(newest.items()))


def is_nte(record, keywords):
    name = record.name.lower()
    return any(k.lower() in name for k in keywords)


def crawl_end_of(records):
    """Latest date seen in the metadata, used when no crawl end is given."""
    dates = []
    for r in records:
        dates.extend(d for d in (r.publish_date, r.version_release_date, r.removal_date) if d)
    return max(dates) if dates else None
