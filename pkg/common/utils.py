# utils.py
import datetime
import hashlib
import io
import json
import logging
import os
import tempfile

import pandas as pd

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def setup_logging(level="INFO"):
    """Configure root logging once for the CLI."""
    logging.basicConfig(level=getattr(logging, str(level).upper(), logging.INFO),
                        format=LOG_FORMAT, force=True)


def sha256_bytes(data):
    return hashlib.sha256(data).hexdigest()


def sha256_text(text):
    return sha256_bytes(text.encode("utf-8"))


def atomic_write_bytes(path, data):
    """Write to a temp file next to path, then rename over it."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text):
    atomic_write_bytes(path, text.encode("utf-8"))


def atomic_write_json(path, payload):
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n")


def write_frame_csv(path, df):
    """Write a DataFrame as UTF-8 CSV atomically."""
    atomic_write_text(path, df.to_csv(index=False, lineterminator="\n"))


def parse_day(value):
    """ISO-8601 calendar day (YYYY-MM-DD) to date; None passes through."""
    if value is None or value == "":
        return None
    if isinstance(value, datetime.date):
        return value
    return datetime.date.fromisoformat(str(value)[:10])


def days_between(start, end):
    """Day difference end - start, floored at 0."""
    return max(0, (end - start).days)


def export_to_excel(frames):
    """
    Returns a BytesIO object containing an Excel workbook.

    Args:
        frames (dict): sheet name -> DataFrame
    """
    output = io.BytesIO()
    with pd.ExcelWriter(output, engine="openpyxl") as writer:
        for sheet, df in frames.items():
            df.to_excel(writer, sheet_name=sheet[:31], index=False)
    output.seek(0)
    return output
