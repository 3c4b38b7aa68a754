"""Dataset metadata table: media filename -> label, split, forgery source.

The on-disk format is a header-bearing CSV with columns
``name,label,split,original`` (UTF-8, LF or CRLF line endings). The token
``None`` (any case) or an empty field in the ``original`` column both mean
"no un-forged source recorded".
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .errors import ManifestError

LABELS = ("REAL", "FAKE")
SPLITS = ("train", "val", "test")

_EXPECTED_HEADER = ["name", "label", "split", "original"]


@dataclass(frozen=True)
class ManifestEntry:
    """One media file's label, split, and optional source-of-forgery name."""

    name: str
    label: str
    split: str
    original: str | None = None


@dataclass(frozen=True)
class Manifest:
    entries: tuple[ManifestEntry, ...]
    source_path: str

    def __len__(self) -> int:
        return len(self.entries)


def _parse_row(row: list[str], row_number: int) -> ManifestEntry:
    if len(row) != 4:
        raise ManifestError(
            f"row {row_number}: expected 4 columns, found {len(row)}"
        )
    name, label, split, original = (field.strip() for field in row)
    if not name:
        raise ManifestError(f"row {row_number}: empty media name")
    label_norm = label.upper()
    if label_norm not in LABELS:
        raise ManifestError(f"row {row_number}: unknown label token {label!r}")
    split_norm = split.lower()
    if split_norm not in SPLITS:
        raise ManifestError(f"row {row_number}: unknown split token {split!r}")
    original_value: str | None = original
    if original == "" or original.lower() == "none":
        original_value = None
    if label_norm == "REAL" and original_value is not None:
        raise ManifestError(
            f"row {row_number}: REAL entry {name!r} must not carry an original"
        )
    return ManifestEntry(
        name=name, label=label_norm, split=split_norm, original=original_value
    )


def parse_manifest(text: str, source: str = "<memory>") -> Manifest:
    """Parse manifest CSV text; see :func:`load_manifest` for the contract."""
    reader = csv.reader(io.StringIO(text, newline=""))
    rows = [row for row in reader]
    if not rows or all(not any(field.strip() for field in row) for row in rows):
        raise ManifestError(f"{source}: empty manifest")
    header = [field.strip().lower() for field in rows[0]]
    body = rows[1:] if header == _EXPECTED_HEADER else rows
    entries: list[ManifestEntry] = []
    seen: set[str] = set()
    for offset, row in enumerate(body):
        row_number = offset + (2 if body is not rows else 1)
        if not any(field.strip() for field in row):
            continue
        entry = _parse_row(row, row_number)
        if entry.name in seen:
            raise ManifestError(
                f"row {row_number}: duplicate media name {entry.name!r}"
            )
        seen.add(entry.name)
        entries.append(entry)
    if not entries:
        raise ManifestError(f"{source}: empty manifest")
    return Manifest(entries=tuple(entries), source_path=source)


def load_manifest(path: str | Path) -> Manifest:
    """Load a manifest CSV, preserving file order.

    Raises :class:`ManifestError` for a missing file, a malformed row, an
    unknown label/split token, or a duplicate name; the offending row number
    is included in the message.
    """
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"manifest file not found: {path}")
    text = path.read_text(encoding="utf-8")
    return parse_manifest(text, source=str(path))


def save_manifest(manifest: Manifest, path: str | Path) -> None:
    """Write entries back out as CSV; reloading yields equal entries."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(_EXPECTED_HEADER)
        for entry in manifest.entries:
            writer.writerow(
                [entry.name, entry.label, entry.split, entry.original or ""]
            )


def class_distribution(manifest: Manifest) -> dict[tuple[str, str], int]:
    """Count entries per (label, split) cell; all six cells are present."""
    counts = {(label, split): 0 for label in LABELS for split in SPLITS}
    for entry in manifest.entries:
        counts[(entry.label, entry.split)] += 1
    return counts


def entries_for_split(manifest: Manifest, split: str) -> list[ManifestEntry]:
    if split not in SPLITS:
        raise ManifestError(f"unknown split token {split!r}")
    return [entry for entry in manifest.entries if entry.split == split]


def build_manifest(rows: Iterable[tuple[str, str, str, str | None]],
                   source: str = "<memory>") -> Manifest:
    """Assemble a Manifest from in-memory tuples, applying full validation."""
    lines = ["name,label,split,original"]
    for name, label, split, original in rows:
        lines.append(f"{name},{label},{split},{original or ''}")
    return parse_manifest("\n".join(lines) + "\n", source=source)
