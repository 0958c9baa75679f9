# crx_reader.py
"""Read CRX2/CRX3 packages and plain ZIP archives into an in-memory file tree."""
import io
import posixpath
import re
import struct
import zipfile
from dataclasses import dataclass, field
from typing import Dict, Optional

from common import config
from common.errors import LookalikeError
from common.utils import sha256_bytes

CRX_MAGIC = b"Cr24"
ZIP_MAGIC = b"PK"
SUPPORTED_VERSIONS = (2, 3)


class CrxError(LookalikeError, IOError):
    pass


class BadMagic(CrxError):
    pass


class UnsupportedVersion(CrxError):
    pass


class TruncatedHeader(CrxError):
    pass


class ArchiveError(CrxError):
    pass


class DuplicatePath(CrxError):
    pass


class MissingManifest(LookalikeError):
    pass


@dataclass(frozen=True)
class CrxHeader:
    magic: bytes
    version: int
    header_length: int
    header_bytes: bytes = field(repr=False)

    @property
    def prefix_length(self):
        return 12 if self.version == 3 else 16


@dataclass
class FileTree:
    entries: Dict[str, bytes] = field(default_factory=dict)

    def __contains__(self, path):
        return path in self.entries

    def __len__(self):
        return len(self.entries)

    def paths(self):
        return sorted(self.entries)

    def get(self, path, default=None):
        return self.entries.get(path, default)

    def read_text(self, path):
        """Decode a file as UTF-8 (BOM dropped, bad bytes replaced)."""
        return self.entries[path].decode("utf-8-sig", errors="replace")

    def has_manifest(self):
        return "manifest.json" in self.entries

    def manifest_bytes(self, ext_id=None):
        """Raw manifest.json; packages without one are not accepted downstream."""
        if not self.has_manifest():
            raise MissingManifest("package has no manifest.json", ext_id)
        return self.entries["manifest.json"]


@dataclass
class CrxPackage:
    header: Optional[CrxHeader]
    tree: FileTree
    sha256: str = ""


_DRIVE = re.compile(r"^[A-Za-z]:")


def normalize_path(name):
    """
    Normalize an archive entry name to a relative forward-slash path.

    Returns None for directory entries. Raises ArchiveError for absolute
    paths, paths escaping the root and NUL bytes.
    """
    if "\x00" in name:
        raise ArchiveError(f"NUL byte in entry name {name!r}")
    path = name.replace("\\", "/")
    if path.endswith("/"):
        return None
    if path.startswith("/") or _DRIVE.match(path):
        raise ArchiveError(f"absolute entry path {name!r}")
    parts = []
    for segment in path.split("/"):
        if segment in ("", "."):
            continue
        if segment == "..":
            if not parts:
                raise ArchiveError(f"entry escapes archive root: {name!r}")
            parts.pop()
            continue
        parts.append(segment)
    if not parts:
        return None
    return "/".join(parts)


def resolve_relative(base_dir, reference):
    """Resolve a manifest/HTML reference against a directory inside the tree."""
    ref = reference.split("#", 1)[0].split("?", 1)[0].strip()
    if not ref:
        return None
    if ref.startswith("/"):
        joined = ref.lstrip("/")
    else:
        joined = posixpath.join(base_dir, ref) if base_dir else ref
    try:
        return normalize_path(joined)
    except ArchiveError:
        return None


def _read_entry(zf, info, max_entry_bytes):
    if info.file_size > max_entry_bytes:
        raise ArchiveError(f"entry {info.filename!r} declares {info.file_size} bytes (cap {max_entry_bytes})")
    with zf.open(info) as handle:
        data = handle.read(max_entry_bytes + 1)
    if len(data) > max_entry_bytes:
        raise ArchiveError(f"entry {info.filename!r} exceeds {max_entry_bytes} bytes")
    return data


def _tree_from_zip(payload, max_entry_bytes):
    try:
        zf = zipfile.ZipFile(io.BytesIO(payload))
    except (zipfile.BadZipFile, zipfile.LargeZipFile, ValueError, OSError) as e:
        raise ArchiveError(f"payload is not a ZIP archive: {e}") from e
    entries = {}
    with zf:
        for info in zf.infolist():
            path = normalize_path(info.filename)
            if path is None:
                continue
            if path in entries:
                raise DuplicatePath(f"duplicate entry {path!r}")
            try:
                entries[path] = _read_entry(zf, info, max_entry_bytes)
            except CrxError:
                raise
            except Exception as e:  # BadZipFile, zlib.error, encrypted entries
                raise ArchiveError(f"cannot read entry {info.filename!r}: {e}") from e
    return FileTree(entries)


def read_header(data):
    """Parse the CRX fixed prefix and header region."""
    if data[:4] != CRX_MAGIC:
        raise BadMagic(f"unexpected magic {data[:4]!r}")
    if len(data) < 8:
        raise TruncatedHeader("missing version field")
    version = struct.unpack("<I", data[4:8])[0]
    if version not in SUPPORTED_VERSIONS:
        raise UnsupportedVersion(f"CRX version {version}")
    if version == 3:
        if len(data) < 12:
            raise TruncatedHeader("missing header length")
        header_length = struct.unpack("<I", data[8:12])[0]
        prefix = 12
    else:
        if len(data) < 16:
            raise TruncatedHeader("missing key/signature lengths")
        key_length, sig_length = struct.unpack("<II", data[8:16])
        header_length = key_length + sig_length
        prefix = 16
    if prefix + header_length > len(data):
        raise TruncatedHeader(f"header of {header_length} bytes overruns {len(data)}-byte file")
    return CrxHeader(CRX_MAGIC, version, header_length, bytes(data[prefix:prefix + header_length]))


def parse_crx(data, max_entry_bytes=config.MAX_ENTRY_BYTES):
    """
    Parse a CRX2/CRX3 package.

    The header region is kept as opaque bytes; everything after it is read
    as a standard ZIP archive.
    """
    if not data:
        raise TruncatedHeader("empty input")
    header = read_header(data)
    payload = data[header.prefix_length + header.header_length:]
    tree = _tree_from_zip(payload, max_entry_bytes)
    return CrxPackage(header=header, tree=tree, sha256=sha256_bytes(data))


def load_plain_zip(data, max_entry_bytes=config.MAX_ENTRY_BYTES):
    """Read a plain ZIP archive with the same normalization as parse_crx."""
    return _tree_from_zip(data, max_entry_bytes)


def load_package(data, max_entry_bytes=config.MAX_ENTRY_BYTES):
    """Dispatch on magic: CRX packages and plain ZIPs both become a CrxPackage."""
    if data[:4] == CRX_MAGIC:
        return parse_crx(data, max_entry_bytes)
    if data[:2] == ZIP_MAGIC:
        return CrxPackage(header=None, tree=load_plain_zip(data, max_entry_bytes), sha256=sha256_bytes(data))
    raise BadMagic(f"neither CRX nor ZIP: {data[:4]!r}")


def tree_to_zip(tree):
    """Serialize a FileTree back into ZIP bytes (sorted paths, deflated)."""
    buffer = io.BytesIO()
    with zipfile.ZipFile(buffer, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        for path in tree.paths():
            zf.writestr(path, tree.entries[path])
    return buffer.getvalue()
