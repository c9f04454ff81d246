"""WAV (RIFF PCM16 mono) reading/writing and annotation-table ingestion."""

from __future__ import annotations

import csv
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "WavFormatError",
    "LabelTableError",
    "Recording",
    "LabelEntry",
    "LabelTable",
    "read_wav",
    "write_wav",
    "read_label_table",
    "EXPECTED_RATE",
    "LOCATIONS",
]

EXPECTED_RATE = 4000
LOCATIONS = ("PV", "TV", "AV", "MV", "Phc")
_PCM = 1
_EXTENSIBLE = 0xFFFE


class WavFormatError(ValueError):
    """Malformed or unsupported WAV content; ``offset`` is the byte position."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class LabelTableError(ValueError):
    pass


@dataclass
class Recording:
    samples: np.ndarray
    sample_rate: int
    id: str
    label: str | None = None
    location: str | None = None
    warnings: list[str] = field(default_factory=list)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


def _read_fmt(body: bytes, offset: int) -> tuple[int, int, int]:
    if len(body) < 16:
        raise WavFormatError(f"fmt chunk is {len(body)} bytes, need at least 16", offset)
    fmt_tag, channels, rate, _, _, bits = struct.unpack_from("<HHIIHH", body)
    if fmt_tag == _EXTENSIBLE and len(body) >= 26:
        fmt_tag = struct.unpack_from("<H", body, 24)[0]
    if fmt_tag != _PCM:
        raise WavFormatError(f"unsupported codec tag 0x{fmt_tag:04x}; only integer PCM is read",
                             offset)
    if channels != 1:
        raise WavFormatError(f"{channels} channels found; only mono is supported", offset + 2)
    if bits != 16:
        raise WavFormatError(f"{bits}-bit samples found; only 16-bit PCM is supported",
                             offset + 14)
    if rate == 0:
        raise WavFormatError("sample rate is zero", offset + 4)
    return channels, rate, bits


def read_wav(path, recording_id: str | None = None) -> Recording:
    """Read a RIFF/WAVE PCM16 mono file; samples are ``int16 / 32768``.

    A sample rate other than 4 kHz is accepted and noted in
    ``Recording.warnings``.
    """
    path = Path(path)
    data = path.read_bytes()
    if len(data) < 12:
        raise WavFormatError(f"file is {len(data)} bytes, too short for a RIFF header", len(data))
    if data[0:4] != b"RIFF":
        raise WavFormatError(f"expected 'RIFF' tag, found {data[0:4]!r}", 0)
    if data[8:12] != b"WAVE":
        raise WavFormatError(f"expected 'WAVE' form type, found {data[8:12]!r}", 8)

    pos, rate, payload = 12, None, None
    while pos + 8 <= len(data):
        cid = data[pos:pos + 4]
        size = struct.unpack_from("<I", data, pos + 4)[0]
        body_start = pos + 8
        if cid == b"fmt ":
            if body_start + size > len(data):
                raise WavFormatError(f"fmt chunk declares {size} bytes past end of file", pos)
            _, rate, _ = _read_fmt(data[body_start:body_start + size], body_start)
        elif cid == b"data":
            if rate is None:
                raise WavFormatError("data chunk appears before the fmt chunk", pos)
            available = len(data) - body_start
            if size > available:
                raise WavFormatError(
                    f"data chunk declares {size} bytes but only {available} follow", pos
                )
            if size % 2:
                raise WavFormatError(f"data chunk size {size} is not a whole number of "
                                     "16-bit samples", pos + 4)
            payload = data[body_start:body_start + size]
            break
        pos = body_start + size + (size & 1)
    if rate is None:
        raise WavFormatError("no fmt chunk found", min(pos, len(data)))
    if payload is None:
        raise WavFormatError("no data chunk found", min(pos, len(data)))

    ints = np.frombuffer(payload, dtype="<i2")
    notes = []
    if rate != EXPECTED_RATE:
        notes.append(f"{path.name}: sample rate {rate} Hz differs from {EXPECTED_RATE} Hz")
    rid = recording_id if recording_id is not None else path.stem
    location = None
    parts = rid.split("_")
    if len(parts) > 1 and parts[1] in LOCATIONS:
        location = parts[1]
    return Recording(ints.astype(float) / 32768.0, int(rate), rid, None, location, notes)


def write_wav(path, samples, sample_rate: int = EXPECTED_RATE) -> None:
    """Write a PCM16 mono WAV.

    Integer arrays are written as-is; float arrays are scaled by 32768,
    rounded and clipped to the int16 range.
    """
    x = np.asarray(samples)
    if np.issubdtype(x.dtype, np.integer):
        if x.min(initial=0) < -32768 or x.max(initial=0) > 32767:
            raise ValueError("integer samples exceed the int16 range")
        ints = x.astype("<i2")
    else:
        if not np.all(np.isfinite(x)):
            raise ValueError("samples must be finite")
        ints = np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2")
    payload = ints.tobytes()
    header = b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE"
    fmt = b"fmt " + struct.pack("<IHHIIHH", 16, _PCM, 1, sample_rate, 2 * sample_rate, 2, 16)
    Path(path).write_bytes(header + fmt + b"data" + struct.pack("<I", len(payload)) + payload)


_ID_COLUMNS = ("Patient ID", "patient_id", "patient id", "id", "recording_id")
_LABEL_COLUMNS = ("Murmur", "murmur", "label")
_LOCATION_COLUMNS = ("Recording locations:", "location", "locations")
_LABEL_VALUES = {"present": "present", "absent": "absent", "unknown": "unknown",
                 "1": "present", "0": "absent"}


@dataclass(frozen=True)
class LabelEntry:
    label: str
    location: str | None
    metadata: dict


@dataclass
class LabelTable:
    entries: dict[str, LabelEntry]
    warnings: list[str] = field(default_factory=list)

    @property
    def usable(self) -> dict[str, int]:
        """Ids with a definite label, mapped to 1 (present) or 0 (absent)."""
        return {k: int(e.label == "present") for k, e in self.entries.items()
                if e.label in ("present", "absent")}

    @property
    def excluded(self) -> list[str]:
        return [k for k, e in self.entries.items() if e.label not in ("present", "absent")]

    def label_for(self, recording_id: str) -> int | None:
        """Label of a recording id, falling back to the subject prefix before ``_``."""
        usable = self.usable
        if recording_id in usable:
            return usable[recording_id]
        return usable.get(recording_id.split("_")[0])


def _pick(header, candidates):
    for c in candidates:
        if c in header:
            return c
    return None


def read_label_table(path) -> LabelTable:
    """Parse an annotation CSV into id -> (label, location, metadata).

    Labels are normalised to ``present``/``absent``/``unknown``; anything else
    is kept lower-cased and treated as not usable.  A repeated id keeps its
    last row and adds a warning.
    """
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        id_col = _pick(header, _ID_COLUMNS)
        label_col = _pick(header, _LABEL_COLUMNS)
        missing = []
        if id_col is None:
            missing.append("id (one of " + ", ".join(_ID_COLUMNS) + ")")
        if label_col is None:
            missing.append("murmur label (one of " + ", ".join(_LABEL_COLUMNS) + ")")
        if missing:
            raise LabelTableError("label table is missing required columns: " + "; ".join(missing))
        loc_col = _pick(header, _LOCATION_COLUMNS)
        table = LabelTable({})
        for row in reader:
            rid = (row.get(id_col) or "").strip()
            if not rid:
                continue
            raw = (row.get(label_col) or "").strip().lower()
            label = _LABEL_VALUES.get(raw, raw or "unknown")
            if rid in table.entries:
                msg = f"duplicate id {rid!r} in label table; keeping the last row"
                table.warnings.append(msg)
                warnings.warn(msg)
            meta = {k: v for k, v in row.items() if k not in (id_col, label_col)}
            table.entries[rid] = LabelEntry(label, row.get(loc_col) if loc_col else None, meta)
    return table
