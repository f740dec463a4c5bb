"""Whole-file transforms: infect (emulator only) and recover.

Encryption touches only the first 0x100000 bytes of a file, leaves the
remainder untouched, and appends the 512-byte victim block plus the
24-byte trailer. Recovery reverses that: decrypt the encrypted prefix,
copy the remainder, drop the 536-byte appendix, truncate to the recorded
original length.

Both directions write to a temporary sibling and replace atomically, so a
crash mid-operation never leaves a half-written file as the only copy.
"""

from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, BinaryIO

from .cipher import CHUNK_LEN, CbcStream, SessionKey
from .errors import SandboxViolation
from .trailer import (
    APPENDIX_LEN,
    ENCRYPTED_PREFIX_LIMIT,
    MAGIC_A,
    MAGIC_B,
    TRAILER_LEN,
    VictimBlock,
    build_trailer,
    parse_trailer,
    trailer_consistent_with_body,
)

log = logging.getLogger(__name__)

_TMP_SUFFIX = ".avrescue-tmp"
SIDE_BY_SIDE_SUFFIX = ".decrypted"


class FileStatus(str, Enum):
    DECRYPTED = "decrypted"
    ENCRYPTED = "encrypted"
    SKIPPED_CLEAN = "skipped_clean"
    SKIPPED_INFECTED = "skipped_infected"
    CORRUPT_TRAILER = "corrupt_trailer"
    IO_ERROR = "io_error"

    def __str__(self) -> str:
        return self.value


@dataclass
class FileRecoveryReport:
    """One row of a run report; `status == decrypted` implies the output
    file length equals `original_length`."""

    path: str
    status: FileStatus
    original_length: int | None = None
    bytes_processed: int = 0
    duration_s: float = 0.0
    detail: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "path": self.path,
            "status": self.status.value,
            "original_length": self.original_length,
            "bytes_processed": self.bytes_processed,
            "duration_s": round(self.duration_s, 6),
            "detail": self.detail,
        }


def _pump_prefix(src: BinaryIO, dst: BinaryIO, stream: CbcStream, prefix_len: int) -> int:
    """Run `prefix_len` source bytes through the cipher stream in the
    original 0x2000-byte chunking; returns bytes written."""
    written = 0
    remaining = prefix_len
    while remaining > CHUNK_LEN:
        out = stream.update(src.read(CHUNK_LEN))
        dst.write(out)
        written += len(out)
        remaining -= CHUNK_LEN
    last = src.read(remaining)
    out = stream.tail(last)
    dst.write(out)
    return written + len(out)


def _copy_remainder(src: BinaryIO, dst: BinaryIO) -> None:
    while True:
        chunk = src.read(1 << 20)
        if not chunk:
            return
        dst.write(chunk)


def _replace_via_tmp(path: Path, write_body) -> None:
    """Write a replacement for `path` to a temp sibling, then rename over it."""
    tmp = path.with_name(path.name + _TMP_SUFFIX)
    try:
        with open(tmp, "wb") as dst:
            write_body(dst)
        os.replace(tmp, path)
    except BaseException:
        tmp.unlink(missing_ok=True)
        raise


def encrypt_file(
    path: str | os.PathLike,
    key: SessionKey,
    victim_block: VictimBlock,
    *,
    sandbox_root: str | os.PathLike,
) -> FileRecoveryReport:
    """Infect one regular file in place. Emulator and fixture use only.

    The mandatory `sandbox_root` is a hard gate: the resolved target must
    live strictly inside it. Already-infected files are refused, mirroring
    the re-encryption check the format was designed around.
    """
    started = time.perf_counter()
    path = Path(path)
    root = Path(sandbox_root).resolve()
    real = path.resolve()
    if root == Path(root.anchor) or not real.is_relative_to(root) or real == root:
        raise SandboxViolation(f"{path} is not inside the sandbox root {root}")

    try:
        size = real.stat().st_size
        with open(real, "rb") as src:
            tail = b""
            if size >= APPENDIX_LEN:
                src.seek(size - TRAILER_LEN)
                tail = src.read(TRAILER_LEN)
                src.seek(0)
            if tail and len(tail) == TRAILER_LEN:
                trailer = parse_trailer(tail)
                if trailer.has_valid_magics and trailer_consistent_with_body(
                    trailer, size - APPENDIX_LEN
                ):
                    return FileRecoveryReport(
                        str(path),
                        FileStatus.SKIPPED_INFECTED,
                        original_length=trailer.original_length,
                        duration_s=time.perf_counter() - started,
                    )

            prefix_len = min(size, ENCRYPTED_PREFIX_LIMIT)
            processed = 0

            def write_body(dst: BinaryIO) -> None:
                nonlocal processed
                stream = CbcStream(key)
                processed = _pump_prefix(src, dst, stream, prefix_len)
                _copy_remainder(src, dst)
                dst.write(victim_block.data)
                dst.write(build_trailer(size))

            _replace_via_tmp(real, write_body)
    except OSError as exc:
        log.warning("could not encrypt %s: %s", path, exc)
        return FileRecoveryReport(
            str(path),
            FileStatus.IO_ERROR,
            duration_s=time.perf_counter() - started,
            detail=str(exc),
        )

    return FileRecoveryReport(
        str(path),
        FileStatus.ENCRYPTED,
        original_length=size,
        bytes_processed=processed,
        duration_s=time.perf_counter() - started,
    )


def _classify_trailer(size: int, tail: bytes) -> tuple[FileStatus, str | None]:
    """Decide between clean and damaged for a file that failed the strict check.

    Both magics present but an inconsistent length means a damaged trailer;
    a single matching magic likewise. No matching magic is just a clean
    file.
    """
    trailer = parse_trailer(tail)
    magic_hits = (trailer.magic_a == MAGIC_A) + (trailer.magic_b == MAGIC_B)
    if magic_hits == 2:
        return (
            FileStatus.CORRUPT_TRAILER,
            f"magics match but recorded length {trailer.original_length} is "
            f"inconsistent with body length {size - APPENDIX_LEN}",
        )
    if magic_hits == 1:
        return (
            FileStatus.CORRUPT_TRAILER,
            f"one magic damaged: magic_a={trailer.magic_a:#x} magic_b={trailer.magic_b:#x}",
        )
    return FileStatus.SKIPPED_CLEAN, None


def decrypt_file(
    path: str | os.PathLike,
    key: SessionKey,
    output_policy: str = "in_place",
) -> FileRecoveryReport:
    """Recover one infected file.

    `output_policy` is "in_place" (atomic replace of the infected file) or
    "side_by_side" (write `<name>.decrypted` next to it, source untouched).
    Key validity is not judged here; a wrong key yields garbage content
    with correct structure. Verification belongs to the memory-scan side.
    """
    if output_policy not in ("in_place", "side_by_side"):
        raise ValueError(f"unknown output policy {output_policy!r}")
    started = time.perf_counter()
    path = Path(path)

    try:
        size = path.stat().st_size
        if size < APPENDIX_LEN:
            return FileRecoveryReport(
                str(path), FileStatus.SKIPPED_CLEAN, duration_s=time.perf_counter() - started
            )
        with open(path, "rb") as src:
            src.seek(size - TRAILER_LEN)
            tail = src.read(TRAILER_LEN)
            trailer = parse_trailer(tail)
            body = size - APPENDIX_LEN
            if not (
                trailer.has_valid_magics and trailer_consistent_with_body(trailer, body)
            ):
                status, detail = _classify_trailer(size, tail)
                return FileRecoveryReport(
                    str(path), status, duration_s=time.perf_counter() - started, detail=detail
                )

            original_length = trailer.original_length
            enc_prefix = min(body, ENCRYPTED_PREFIX_LIMIT)
            src.seek(0)
            processed = 0

            def write_body(dst: BinaryIO) -> None:
                nonlocal processed
                stream = CbcStream(key, decrypt=True)
                remaining = enc_prefix
                while remaining:
                    step = min(remaining, CHUNK_LEN)
                    out = stream.update(src.read(step))
                    dst.write(out)
                    processed += len(out)
                    remaining -= step
                # untouched middle of a large file; stop before the appendix
                middle = body - enc_prefix
                while middle:
                    chunk = src.read(min(middle, 1 << 20))
                    if not chunk:
                        raise OSError("file shrank while decrypting")
                    dst.write(chunk)
                    middle -= len(chunk)
                dst.truncate(original_length)

            if output_policy == "in_place":
                _replace_via_tmp(path, write_body)
            else:
                out_path = path.with_name(path.name + SIDE_BY_SIDE_SUFFIX)
                tmp = out_path.with_name(out_path.name + _TMP_SUFFIX)
                try:
                    with open(tmp, "wb") as dst:
                        write_body(dst)
                    os.replace(tmp, out_path)
                except BaseException:
                    tmp.unlink(missing_ok=True)
                    raise
    except OSError as exc:
        log.warning("could not decrypt %s: %s", path, exc)
        return FileRecoveryReport(
            str(path),
            FileStatus.IO_ERROR,
            duration_s=time.perf_counter() - started,
            detail=str(exc),
        )

    return FileRecoveryReport(
        str(path),
        FileStatus.DECRYPTED,
        original_length=original_length,
        bytes_processed=processed,
        duration_s=time.perf_counter() - started,
    )
