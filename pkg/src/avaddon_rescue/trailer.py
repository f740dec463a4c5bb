"""On-disk infection format: the 24-byte trailer and 512-byte victim block.

An infected file ends with 536 extra bytes: a 512-byte opaque victim block
followed by a 24-byte trailer. The trailer records the original file length
(little-endian u64 at offset 0) and two fixed magic constants (u32 at
offsets 8 and 16) that mark the file as already encrypted. Detection is
content-based only; file names and extensions are never consulted.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from pathlib import Path

from .errors import TrailerError

TRAILER_LEN = 24
VICTIM_BLOCK_LEN = 512
APPENDIX_LEN = VICTIM_BLOCK_LEN + TRAILER_LEN

MAGIC_A = 0x200
MAGIC_B = 0x01030307

#: Only the first 0x100000 bytes of a file are ever encrypted.
ENCRYPTED_PREFIX_LIMIT = 0x100000

#: Sanity bound on the recorded original length (2^48 bytes).
MAX_ORIGINAL_LENGTH = 1 << 48

_TRAILER_STRUCT = struct.Struct("<QIII4s")
assert _TRAILER_STRUCT.size == TRAILER_LEN


@dataclass(frozen=True)
class Trailer:
    """Decoded trailer fields; decoding never validates, see `has_valid_magics`."""

    original_length: int
    magic_a: int
    reserved_c: int
    magic_b: int
    tail_d: bytes

    @property
    def has_valid_magics(self) -> bool:
        return self.magic_a == MAGIC_A and self.magic_b == MAGIC_B

    @property
    def length_sane(self) -> bool:
        return 0 <= self.original_length <= MAX_ORIGINAL_LENGTH


@dataclass(frozen=True)
class VictimBlock:
    """The 512 opaque bytes written before the trailer."""

    data: bytes

    def __post_init__(self) -> None:
        if len(self.data) != VICTIM_BLOCK_LEN:
            raise TrailerError(
                f"victim block must be {VICTIM_BLOCK_LEN} bytes, got {len(self.data)}"
            )

    @classmethod
    def zeros(cls) -> "VictimBlock":
        return cls(bytes(VICTIM_BLOCK_LEN))


def ceil16(n: int) -> int:
    """Round up to the next multiple of the AES block size."""
    return (n + 15) & ~15


def expected_body_length(original_length: int) -> int:
    """Encrypted body length implied by a recorded original length.

    Bodies shorter than the encrypted-prefix limit are zero-padded to a
    whole block; at or past the limit only the prefix is encrypted, so the
    body keeps the original length.
    """
    if original_length < ENCRYPTED_PREFIX_LIMIT:
        return ceil16(original_length)
    return original_length


def encrypted_file_size(original_length: int) -> int:
    """Total on-disk size of an infected file with the given original length."""
    return expected_body_length(original_length) + APPENDIX_LEN


def parse_trailer(raw: bytes) -> Trailer:
    """Decode 24 trailer bytes.

    Decoding is purely structural: magic mismatches do not raise, so a
    damaged trailer can still be inspected and reported field by field.

    Raises:
        TrailerError: if `raw` is not exactly 24 bytes.
    """
    if len(raw) != TRAILER_LEN:
        raise TrailerError(f"trailer must be {TRAILER_LEN} bytes, got {len(raw)}")
    original_length, magic_a, reserved_c, magic_b, tail_d = _TRAILER_STRUCT.unpack(raw)
    return Trailer(original_length, magic_a, reserved_c, magic_b, tail_d)


def build_trailer(original_length: int) -> bytes:
    """Serialize a trailer for a file of `original_length` bytes.

    The reserved field is written as 1 and the 4 tail bytes as zeros; their
    semantics are unknown and nothing downstream checks them.
    """
    if not 0 <= original_length <= MAX_ORIGINAL_LENGTH:
        raise TrailerError(f"original length {original_length} outside sanity bound")
    return _TRAILER_STRUCT.pack(original_length, MAGIC_A, 1, MAGIC_B, b"\x00" * 4)


def trailer_consistent_with_body(trailer: Trailer, body_length: int) -> bool:
    """True when the recorded original length implies exactly this body length."""
    return trailer.length_sane and expected_body_length(trailer.original_length) == body_length


def probe(path: str | os.PathLike) -> Trailer | None:
    """Return the trailer when `path` is an infected file, else None.

    A file counts as infected when it is large enough to carry the 536-byte
    appendix, both magics match, and the recorded original length is
    consistent with the encrypted body length. I/O problems propagate as
    OSError so callers can tell "unreadable" from "clean".
    """
    path = Path(path)
    size = path.stat().st_size
    if size < APPENDIX_LEN:
        return None
    with open(path, "rb") as fh:
        fh.seek(size - TRAILER_LEN)
        trailer = parse_trailer(fh.read(TRAILER_LEN))
    if not trailer.has_valid_magics:
        return None
    if not trailer_consistent_with_body(trailer, size - APPENDIX_LEN):
        return None
    return trailer


def is_infected(path: str | os.PathLike) -> bool:
    """Content-based infection check; see `probe` for the full rules."""
    return probe(path) is not None
