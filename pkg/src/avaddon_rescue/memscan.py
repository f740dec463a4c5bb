"""Locate AES-256 session keys inside a memory dump of the paused process.

The platform crypto provider keeps a generated key behind a three-level
chain: an opaque key handle whose last field, XOR-masked with 0xE35A172C,
points to a one-pointer cell, which in turn points to the key-data record

    { unknown*, alg: u32, flags: u32, key_size: u32, key_bytes* }

For an AES-256 session key the three known fields are 0x6610, 1 and 0x20.
The scanner anchors on that 12-byte triple (strictly weaker than matching
the whole record, so it never misses), reads the key pointer that follows,
and extracts 32 candidate key bytes. False positives are culled by
known-plaintext verification, never by the scan itself; the full chain is
only used to rank confidence.
"""

from __future__ import annotations

import json
import logging
import mmap
import os
import struct
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .cipher import SessionKey, decrypt_stream
from .errors import DumpFormatError, EvidenceError
from .minidump import SIGNATURE as MDMP_SIGNATURE
from .minidump import MemoryRange, read_minidump
from .trailer import APPENDIX_LEN, ENCRYPTED_PREFIX_LIMIT, ceil16, probe

log = logging.getLogger(__name__)

ALG_AES_256 = 0x6610
KEY_FLAGS = 0x1
KEY_SIZE = 0x20

#: The 12 bytes every AES-256 key-data record carries: (alg, flags, key_size).
KEY_DATA_PATTERN = struct.pack("<III", ALG_AES_256, KEY_FLAGS, KEY_SIZE)

#: Mask applied to the key handle's last pointer field.
HANDLE_XOR_CONSTANT = 0xE35A172C

DEFAULT_ALIGNMENT = 4

#: Leading bytes of common file types, used when no original file is at
#: hand. Every entry must be at least 8 bytes so a match is meaningful.
HEADER_MAGICS: tuple[tuple[str, bytes], ...] = (
    ("png", b"\x89PNG\r\n\x1a\n"),
    ("ole-cfb", bytes.fromhex("d0cf11e0a1b11ae1")),
    ("sqlite3", b"SQLite format 3\x00"),
    ("rar5", b"Rar!\x1a\x07\x01\x00"),
    ("xml-decl", b"<?xml ve"),
)
MIN_MAGIC_MATCH = 8
assert all(len(magic) >= MIN_MAGIC_MATCH for _, magic in HEADER_MAGICS)

MIN_PLAINTEXT_MATCH = 16


class DumpImage:
    """A loaded dump: backing bytes plus the virtual-address map.

    Read-only after construction; safe to share across scanning threads.
    """

    def __init__(
        self,
        path: Path,
        data,  # mmap.mmap | bytes
        ranges: list[MemoryRange],
        pointer_width: int,
        fmt: str,
        _file=None,
    ) -> None:
        if pointer_width not in (4, 8):
            raise DumpFormatError(f"pointer width must be 4 or 8, got {pointer_width}")
        self.path = path
        self.data = data
        self.pointer_width = pointer_width
        self.format = fmt
        self._file = _file
        self.ranges = sorted((r for r in ranges if r.length > 0), key=lambda r: r.va)
        for prev, cur in zip(self.ranges, self.ranges[1:]):
            if cur.va < prev.va_end:
                raise DumpFormatError(
                    f"ranges overlap in virtual space: "
                    f"[{prev.va:#x},{prev.va_end:#x}) and [{cur.va:#x},{cur.va_end:#x})"
                )
        size = len(data)
        for r in self.ranges:
            if r.offset + r.length > size:
                raise DumpFormatError(
                    f"range at va {r.va:#x} points past the end of the dump file"
                )

    def __enter__(self) -> "DumpImage":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def close(self) -> None:
        if isinstance(self.data, mmap.mmap):
            self.data.close()
        if self._file is not None:
            self._file.close()
            self._file = None

    def range_of(self, va: int) -> MemoryRange | None:
        for r in self.ranges:
            if r.va <= va < r.va_end:
                return r
        return None

    def translate(self, va: int) -> int | None:
        """Virtual address to file offset; None when unmapped."""
        r = self.range_of(va)
        if r is None:
            return None
        return r.offset + (va - r.va)

    def offset_to_va(self, offset: int) -> int | None:
        for r in self.ranges:
            if r.offset <= offset < r.offset + r.length:
                return r.va + (offset - r.offset)
        return None

    def read_va(self, va: int, count: int) -> bytes | None:
        """Read `count` bytes at a virtual address, walking adjacent ranges.

        Returns None when any part of the span is unmapped.
        """
        out = bytearray()
        while count > 0:
            r = self.range_of(va)
            if r is None:
                return None
            take = min(count, r.va_end - va)
            off = r.offset + (va - r.va)
            out += self.data[off : off + take]
            va += take
            count -= take
        return bytes(out)

    def read_offset(self, offset: int, count: int) -> bytes | None:
        if offset < 0 or offset + count > len(self.data):
            return None
        return bytes(self.data[offset : offset + count])


def _load_sidecar_map(map_path: Path) -> list[MemoryRange]:
    try:
        entries = json.loads(map_path.read_text())
    except json.JSONDecodeError as exc:
        raise DumpFormatError(f"sidecar map {map_path} is not valid JSON: {exc}") from exc
    if not isinstance(entries, list):
        raise DumpFormatError(f"sidecar map {map_path} must be a JSON array")
    ranges = []
    for entry in entries:
        try:
            ranges.append(MemoryRange(int(entry["va"]), int(entry["length"]), int(entry["offset"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise DumpFormatError(f"bad sidecar map entry {entry!r}: {exc}") from exc
    return ranges


def default_map_path(dump_path: str | os.PathLike) -> Path:
    return Path(str(dump_path) + ".map.json")


def load_dump(
    path: str | os.PathLike,
    fmt: str = "auto",
    *,
    map_path: str | os.PathLike | None = None,
    pointer_width: int | None = None,
) -> DumpImage:
    """Open a dump as one of {raw, raw_with_map, minidump}, or sniff it.

    raw maps the whole file at virtual address 0 (offset == VA);
    raw_with_map takes ranges from a JSON sidecar; minidump parses the
    stream directory. `pointer_width` overrides the default of 4 for the
    raw flavors; for minidumps it is read from the system-info stream.
    """
    path = Path(path)
    size = path.stat().st_size
    fh = open(path, "rb")
    data: mmap.mmap | bytes = b""
    try:
        if size:
            data = mmap.mmap(fh.fileno(), 0, access=mmap.ACCESS_READ)

        if fmt == "auto":
            if size >= 4 and bytes(data[:4]) == MDMP_SIGNATURE:
                fmt = "minidump"
            elif (map_path and Path(map_path).exists()) or default_map_path(path).exists():
                fmt = "raw_with_map"
            else:
                fmt = "raw"

        if fmt == "raw":
            ranges = [MemoryRange(0, size, 0)]
            return DumpImage(path, data, ranges, pointer_width or 4, fmt, _file=fh)
        if fmt == "raw_with_map":
            side = Path(map_path) if map_path else default_map_path(path)
            if not side.exists():
                raise DumpFormatError(f"sidecar map not found: {side}")
            ranges = _load_sidecar_map(side)
            return DumpImage(path, data, ranges, pointer_width or 4, fmt, _file=fh)
        if fmt == "minidump":
            if size < 4 or bytes(data[:4]) != MDMP_SIGNATURE:
                raise DumpFormatError(f"{path} does not start with the MDMP signature")
            ranges, parsed_width = read_minidump(data)
            width = parsed_width or pointer_width or 4
            return DumpImage(path, data, ranges, width, fmt, _file=fh)
        raise ValueError(f"unknown dump format {fmt!r}")
    except BaseException:
        if isinstance(data, mmap.mmap):
            data.close()
        fh.close()
        raise


@dataclass
class KeyCandidate:
    """One scan hit: where the pattern sat and what the key pointer yielded."""

    struct_offset: int
    struct_va: int | None
    key_va: int | None = None
    key: SessionKey | None = None
    key_source: str | None = None  # "va" | "file_offset"
    chain_confirmed: bool = False
    verified: bool = False

    def to_dict(self) -> dict:
        return {
            "struct_offset": self.struct_offset,
            "struct_va": self.struct_va,
            "key_va": self.key_va,
            "key_present": self.key is not None,
            "key_source": self.key_source,
            "chain_confirmed": self.chain_confirmed,
            "verified": self.verified,
        }


def _read_candidate_key(dump: DumpImage, key_ptr: int) -> tuple[SessionKey | None, str | None]:
    raw = dump.read_va(key_ptr, 32)
    if raw is not None:
        return SessionKey(raw), "va"
    # flat dumps and damaged maps: the pointer may already be a file offset
    raw = dump.read_offset(key_ptr, 32)
    if raw is not None:
        return SessionKey(raw), "file_offset"
    return None, None


def scan_key_candidates(
    dump: DumpImage, *, alignment: int = DEFAULT_ALIGNMENT
) -> list[KeyCandidate]:
    """Single linear pass over all mapped ranges for the key-data triple.

    Every aligned pattern hit becomes a candidate even when its key
    pointer cannot be resolved; candidates with identical key bytes are
    collapsed to the first occurrence. An empty list is a normal result.
    """
    pw = dump.pointer_width
    hits: list[KeyCandidate] = []
    for rng in dump.ranges:
        start, end = rng.offset, rng.offset + rng.length
        pos = start
        while True:
            found = dump.data.find(KEY_DATA_PATTERN, pos, end)
            if found == -1:
                break
            pos = found + 1
            va = rng.va + (found - rng.offset)
            if alignment > 1 and va % alignment:
                continue
            cand = KeyCandidate(struct_offset=found, struct_va=va)
            ptr_end = found + len(KEY_DATA_PATTERN) + pw
            if ptr_end <= end:
                key_ptr = int.from_bytes(
                    dump.data[found + len(KEY_DATA_PATTERN) : ptr_end], "little"
                )
                cand.key_va = key_ptr
                cand.key, cand.key_source = _read_candidate_key(dump, key_ptr)
            hits.append(cand)

    hits.sort(key=lambda c: c.struct_offset)
    seen: set[bytes] = set()
    out = []
    for cand in hits:
        if cand.key is not None:
            if cand.key.key_bytes in seen:
                continue
            seen.add(cand.key.key_bytes)
        out.append(cand)
    return out


def _find_value(dump: DumpImage, value: int, *, alignment: int = DEFAULT_ALIGNMENT):
    """Yield virtual addresses of every aligned cell holding `value`."""
    needle = value.to_bytes(dump.pointer_width, "little")
    for rng in dump.ranges:
        start, end = rng.offset, rng.offset + rng.length
        pos = start
        while True:
            found = dump.data.find(needle, pos, end)
            if found == -1:
                break
            pos = found + 1
            va = rng.va + (found - rng.offset)
            if alignment > 1 and va % alignment:
                continue
            yield va


def confirm_chain(dump: DumpImage, candidate: KeyCandidate) -> bool:
    """Look for the two upper links of the key-handle chain.

    True iff some cell points at the candidate's key-data record and some
    other cell holds that cell's address XOR-masked with the handle
    constant. Only raises candidate confidence; never disqualifies.
    """
    if candidate.struct_va is None:
        return False
    pw = dump.pointer_width
    mask = (1 << (8 * pw)) - 1
    key_data_va = candidate.struct_va - pw
    if key_data_va < 0:
        return False
    for magic_cell_va in _find_value(dump, key_data_va):
        masked = (magic_cell_va ^ HANDLE_XOR_CONSTANT) & mask
        for _ in _find_value(dump, masked):
            return True
    return False


@dataclass(frozen=True)
class Evidence:
    """What we check a candidate key against.

    Either the first bytes of the original version of one encrypted file
    (at least 16), or — when no original is available — the built-in
    library of file-type header magics.
    """

    encrypted_path: Path
    plaintext_prefix: bytes | None = None

    def __post_init__(self) -> None:
        if self.plaintext_prefix is not None and len(self.plaintext_prefix) < MIN_PLAINTEXT_MATCH:
            raise EvidenceError(
                f"known plaintext prefix must be at least {MIN_PLAINTEXT_MATCH} bytes, "
                f"got {len(self.plaintext_prefix)}"
            )

    @classmethod
    def from_original(
        cls, encrypted_path: str | os.PathLike, original_path: str | os.PathLike
    ) -> "Evidence":
        with open(original_path, "rb") as fh:
            prefix = fh.read(64)
        if len(prefix) < MIN_PLAINTEXT_MATCH:
            raise EvidenceError(
                f"original file {original_path} is shorter than "
                f"{MIN_PLAINTEXT_MATCH} bytes and cannot anchor verification"
            )
        return cls(Path(encrypted_path), prefix)

    @classmethod
    def from_header_magics(cls, encrypted_path: str | os.PathLike) -> "Evidence":
        return cls(Path(encrypted_path))


def verify_key(key: SessionKey, evidence: Evidence) -> bool:
    """Decrypt the evidence file's first block(s) with `key` and compare.

    Known-plaintext mode needs a 16-byte match minimum; header-magic mode
    accepts any library entry (all 8+ bytes) as a decrypted prefix.
    """
    trailer = probe(evidence.encrypted_path)
    if trailer is None:
        raise EvidenceError(f"{evidence.encrypted_path} is not an infected file")
    size = Path(evidence.encrypted_path).stat().st_size
    body = size - APPENDIX_LEN
    if body < 16:
        raise EvidenceError(f"{evidence.encrypted_path} has an empty encrypted body")

    if evidence.plaintext_prefix is not None:
        want = evidence.plaintext_prefix[: trailer.original_length]
        if len(want) < MIN_PLAINTEXT_MATCH:
            raise EvidenceError("known plaintext shorter than the evidence file content")
        ct_len = min(ceil16(len(want)), body, ENCRYPTED_PREFIX_LIMIT)
    else:
        ct_len = 16

    with open(evidence.encrypted_path, "rb") as fh:
        ciphertext = fh.read(ct_len)
    plain = decrypt_stream(key, ciphertext)

    if evidence.plaintext_prefix is not None:
        return plain[: len(want)] == want
    return any(plain.startswith(magic) for _, magic in HEADER_MAGICS)


def verify_candidate(candidate: KeyCandidate, evidence: Evidence) -> bool:
    """Candidate wrapper around `verify_key`; keyless candidates never verify."""
    if candidate.key is None:
        return False
    return verify_key(candidate.key, evidence)


class RecoveryOutcome(str, Enum):
    FOUND = "found"
    NOT_FOUND = "not_found"
    AMBIGUOUS = "ambiguous"

    def __str__(self) -> str:
        return self.value


@dataclass
class RecoveryResult:
    outcome: RecoveryOutcome
    key: SessionKey | None
    candidates: list[KeyCandidate] = field(default_factory=list)

    def to_dict(self, *, include_key: bool = False) -> dict:
        return {
            "outcome": self.outcome.value,
            "key_hex": self.key.hex() if (self.key and include_key) else None,
            "candidates": [c.to_dict() for c in self.candidates],
        }


def recover_key(
    dump: DumpImage,
    evidence: Evidence,
    *,
    alignment: int = DEFAULT_ALIGNMENT,
) -> RecoveryResult:
    """Scan, verify, and rank; return the single verified key if any.

    Never returns an unverified key. Two distinct keys both passing
    verification is reported as ambiguous rather than guessing.
    """
    candidates = scan_key_candidates(dump, alignment=alignment)
    for cand in candidates:
        if cand.key is None:
            continue
        cand.verified = verify_candidate(cand, evidence)
        cand.chain_confirmed = confirm_chain(dump, cand)
    candidates.sort(key=lambda c: (not c.verified, not c.chain_confirmed, c.struct_offset))

    verified_keys = {c.key.key_bytes for c in candidates if c.verified}
    if not verified_keys:
        log.info("scan produced %d candidates, none verified", len(candidates))
        return RecoveryResult(RecoveryOutcome.NOT_FOUND, None, candidates)
    if len(verified_keys) > 1:
        log.warning("%d distinct keys verified; refusing to guess", len(verified_keys))
        return RecoveryResult(RecoveryOutcome.AMBIGUOUS, None, candidates)
    key = next(c.key for c in candidates if c.verified)
    return RecoveryResult(RecoveryOutcome.FOUND, key, candidates)
