"""Benign, sandboxed generation of format-faithful test artifacts.

Three fixture factories live here: an infection emulator that encrypts a
corpus under the same traversal/skip rules the real sample uses, a hybrid
wrap of the session key under a locally generated operator RSA pair, and
a synthetic memory-dump writer that plants the key-handle structure chain
for the scanner to find.

Every write is gated: the sandbox root must sit strictly inside an
allow-listed location and the caller must pass a literal confirmation
token. Nothing here deletes, persists, spawns processes, or touches
anything outside the sandbox and the explicit dump output path.
"""

from __future__ import annotations

import json
import logging
import os
import random
import secrets
import struct
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import padding, rsa

from .cipher import SessionKey
from .errors import LayoutSpecError, SandboxViolation, WrapError
from .filecodec import FileRecoveryReport, FileStatus, encrypt_file
from .memscan import ALG_AES_256, HANDLE_XOR_CONSTANT, KEY_FLAGS, KEY_SIZE, default_map_path
from .minidump import read_minidump, write_minidump
from .trailer import VICTIM_BLOCK_LEN, VictimBlock, probe

log = logging.getLogger(__name__)

#: Path fragments the encryption pass leaves untouched.
DEFAULT_PATH_SUBSTRINGS: tuple[str, ...] = (
    "C:\\Program Files\\Microsoft\\Exchange Server",
    "C:\\Program Files (x86)\\Microsoft\\Exchange Server",
    "C:\\Program Files\\Microsoft SQL Server",
    "C:\\Program Files (x86)\\Microsoft SQL Server",
    "C:\\Windows",
    "C:\\Program Files",
    "C:\\Users\\All Users",
    "C:\\Users\\Public",
    "C:\\Users\\%User Profile%\\AppData\\Local\\Temp",
    "C:\\Program Files (x86)",
    "C:\\Users\\%User Profile%\\AppData",
    "C:\\ProgramData",
    "Tor Browser",
    "AppData",
    "ProgramData",
    "Program Files",
    "Windows",
    "363053-readme.html",
    "bckgrd.bmp",
)

#: Extensions that are never encrypted.
DEFAULT_EXCLUDED_EXTENSIONS: tuple[str, ...] = (
    "bin", "ini", "sys", "dll", "lnk", "dat", "exe",
    "drv", "rdp", "prf", "swp", "mdf", "mds", "sql",
)

CONFIRM_TOKEN = "i-understand-this-writes-files"
ALLOWLIST_ENV_VAR = "AVADDON_RESCUE_SANDBOX_ALLOWLIST"


@dataclass(frozen=True)
class SkipPolicy:
    """The path-substring whitelist plus the excluded-extension list."""

    path_substrings: tuple[str, ...]
    extensions: tuple[str, ...]

    @classmethod
    def default(cls) -> "SkipPolicy":
        return cls(DEFAULT_PATH_SUBSTRINGS, DEFAULT_EXCLUDED_EXTENSIONS)

    def exclusion_reason(self, path: str | os.PathLike, *, check_substrings: bool = True) -> str | None:
        """Why `path` would be skipped, or None if it would be encrypted.

        The substring check is suppressed for priority folders, matching
        the original traversal's special case.
        """
        text = str(path)
        if check_substrings:
            for fragment in self.path_substrings:
                if fragment in text:
                    return f"path contains {fragment!r}"
        suffix = Path(text).suffix
        if suffix:
            ext = suffix[1:].lower()
            if ext in self.extensions:
                return f"extension {ext!r} is excluded"
        return None


def generate_session_key(seed: int | None = None) -> SessionKey:
    """32 random key bytes; pass a seed for reproducible fixtures."""
    if seed is None:
        return SessionKey(secrets.token_bytes(32))
    return SessionKey(random.Random(seed).randbytes(32))


_OAEP = padding.OAEP(
    mgf=padding.MGF1(algorithm=hashes.SHA256()), algorithm=hashes.SHA256(), label=None
)


@dataclass(frozen=True)
class OperatorKeyPair:
    """Test-only stand-in for the operators' RSA pair (we hold both halves)."""

    private: rsa.RSAPrivateKey

    @property
    def public(self) -> rsa.RSAPublicKey:
        return self.private.public_key()

    @classmethod
    def generate(cls, bits: int = 2048) -> "OperatorKeyPair":
        if bits < 2048:
            raise WrapError(f"operator key must be at least 2048 bits, got {bits}")
        return cls(rsa.generate_private_key(public_exponent=65537, key_size=bits))

    def private_pem(self) -> bytes:
        return self.private.private_bytes(
            serialization.Encoding.PEM,
            serialization.PrivateFormat.PKCS8,
            serialization.NoEncryption(),
        )

    @classmethod
    def from_private_pem(cls, pem: bytes) -> "OperatorKeyPair":
        key = serialization.load_pem_private_key(pem, password=None)
        if not isinstance(key, rsa.RSAPrivateKey):
            raise WrapError("operator key file does not hold an RSA private key")
        return cls(key)


def wrap_session_key(key: SessionKey, operator_public: rsa.RSAPublicKey) -> VictimBlock:
    """Asymmetrically encrypt the session key into a 512-byte victim block.

    Ciphertext sits at offset 0, zero-filled to 512. The recovery path
    never parses this block; it exists so the operator-side round trip can
    be exercised end to end.
    """
    ciphertext = operator_public.encrypt(key.key_bytes, _OAEP)
    if len(ciphertext) > VICTIM_BLOCK_LEN:
        raise WrapError(
            f"wrapped key is {len(ciphertext)} bytes and does not fit the "
            f"{VICTIM_BLOCK_LEN}-byte victim block; use a smaller operator key"
        )
    return VictimBlock(ciphertext + bytes(VICTIM_BLOCK_LEN - len(ciphertext)))


def unwrap_session_key(block: VictimBlock, operator_private: rsa.RSAPrivateKey) -> SessionKey:
    """Inverse of `wrap_session_key`; tampering fails the padding check."""
    ciphertext = block.data[: operator_private.key_size // 8]
    try:
        raw = operator_private.decrypt(ciphertext, _OAEP)
    except ValueError as exc:
        raise WrapError("victim block failed integrity check during unwrap") from exc
    if len(raw) != 32:
        raise WrapError(f"unwrapped key has {len(raw)} bytes, expected 32")
    return SessionKey(raw)


def plan_traversal(
    roots: Sequence[str | os.PathLike],
    priority_paths: Sequence[str | os.PathLike] = (),
    policy: SkipPolicy | None = None,
) -> list[Path]:
    """Depth-first, lexicographic traversal producing the encryption plan.

    Priority paths come first and skip the path-substring whitelist (the
    extension and already-infected checks still apply there). Symlinks are
    never followed. Unreadable directories are logged and skipped.
    """
    policy = policy or SkipPolicy.default()
    planned: list[Path] = []
    seen: set[str] = set()

    def consider(path: Path, check_substrings: bool) -> None:
        key = str(path.resolve())
        if key in seen:
            return
        seen.add(key)
        if policy.exclusion_reason(path, check_substrings=check_substrings):
            return
        try:
            if probe(path) is not None:
                return
        except OSError as exc:
            log.warning("cannot probe %s: %s", path, exc)
            return
        planned.append(path)

    def walk(directory: Path, check_substrings: bool) -> None:
        try:
            with os.scandir(directory) as it:
                entries = sorted(it, key=lambda e: e.name)
        except OSError as exc:
            log.warning("cannot list %s: %s", directory, exc)
            return
        for entry in entries:
            child = Path(entry.path)
            try:
                if entry.is_symlink():
                    continue
                if entry.is_dir(follow_symlinks=False):
                    walk(child, check_substrings)
                elif entry.is_file(follow_symlinks=False):
                    consider(child, check_substrings)
            except OSError as exc:
                log.warning("cannot stat %s: %s", child, exc)

    for priority in priority_paths:
        walk(Path(priority).absolute(), check_substrings=False)
    for root in roots:
        walk(Path(root).absolute(), check_substrings=True)
    return planned


def allowed_sandbox_roots(extra: Iterable[str | os.PathLike] = ()) -> list[Path]:
    """Locations a sandbox may live under.

    Defaults to the system temp directory; the env var points at a config
    file (one path per line, `#` comments) that replaces the default.
    """
    roots: list[Path] = []
    config = os.environ.get(ALLOWLIST_ENV_VAR)
    if config:
        for line in Path(config).read_text().splitlines():
            line = line.strip()
            if line and not line.startswith("#"):
                roots.append(Path(line))
    else:
        roots.append(Path(tempfile.gettempdir()))
    roots.extend(Path(p) for p in extra)
    return [p.resolve() for p in roots]


def ensure_sandbox(
    sandbox_root: str | os.PathLike,
    *,
    confirm_token: str | None,
    allow_roots: Sequence[str | os.PathLike] | None = None,
) -> Path:
    """Validate the sandbox gate; returns the resolved root or raises.

    Refuses: a missing token, filesystem roots, home directories, and any
    resolved path (symlinks and `..` collapse first) that is not a strict
    descendant of an allow-listed location.
    """
    if confirm_token != CONFIRM_TOKEN:
        raise SandboxViolation(
            f"refusing to write files: confirmation token missing "
            f"(pass {CONFIRM_TOKEN!r})"
        )
    root = Path(sandbox_root).resolve()
    if not root.is_dir():
        raise SandboxViolation(f"sandbox root {root} is not an existing directory")
    if root == Path(root.anchor):
        raise SandboxViolation(f"refusing to use the filesystem root {root} as sandbox")
    if root == Path.home().resolve():
        raise SandboxViolation(f"refusing to use the home directory {root} as sandbox")
    allowed = (
        [Path(p).resolve() for p in allow_roots]
        if allow_roots is not None
        else allowed_sandbox_roots()
    )
    for candidate in allowed:
        if root != candidate and root.is_relative_to(candidate):
            return root
    raise SandboxViolation(
        f"sandbox root {root} is not strictly inside any allow-listed "
        f"location ({', '.join(map(str, allowed)) or 'none configured'})"
    )


@dataclass
class InfectionReport:
    """Counts and sizes of one emulation pass, one row per touched file."""

    sandbox_root: str
    planned: int = 0
    encrypted: int = 0
    skipped_infected: int = 0
    errors: int = 0
    bytes_encrypted: int = 0
    duration_s: float = 0.0
    rows: list[FileRecoveryReport] = field(default_factory=list)

    def to_dict(self, *, include_rows: bool = True) -> dict[str, Any]:
        out: dict[str, Any] = {
            "sandbox_root": self.sandbox_root,
            "planned": self.planned,
            "encrypted": self.encrypted,
            "skipped_infected": self.skipped_infected,
            "errors": self.errors,
            "bytes_encrypted": self.bytes_encrypted,
            "duration_s": round(self.duration_s, 6),
        }
        if include_rows:
            out["rows"] = [r.to_dict() for r in self.rows]
        return out


def emulate_infection(
    sandbox_root: str | os.PathLike,
    key: SessionKey,
    policy: SkipPolicy | None,
    victim_block: VictimBlock,
    *,
    confirm_token: str | None = None,
    allow_roots: Sequence[str | os.PathLike] | None = None,
    priority_paths: Sequence[str | os.PathLike] = (),
) -> InfectionReport:
    """Encrypt every plannable file under the sandbox root.

    The gate runs before any file is touched; a violation is a hard
    refusal. Re-running over the same sandbox encrypts nothing, because
    infected files fail the plan's re-encryption check.
    """
    root = ensure_sandbox(sandbox_root, confirm_token=confirm_token, allow_roots=allow_roots)
    started = time.perf_counter()
    plan = plan_traversal([root], priority_paths=priority_paths, policy=policy)
    report = InfectionReport(sandbox_root=str(root), planned=len(plan))
    for path in plan:
        try:
            row = encrypt_file(path, key, victim_block, sandbox_root=root)
        except SandboxViolation as exc:
            row = FileRecoveryReport(str(path), FileStatus.IO_ERROR, detail=str(exc))
        report.rows.append(row)
        if row.status is FileStatus.ENCRYPTED:
            report.encrypted += 1
            report.bytes_encrypted += row.original_length or 0
        elif row.status is FileStatus.SKIPPED_INFECTED:
            report.skipped_infected += 1
        else:
            report.errors += 1
    report.duration_s = time.perf_counter() - started
    return report


# --- synthetic dumps -------------------------------------------------------


@dataclass
class PlantedChain:
    """Ground truth for one key-handle chain inside a synthetic dump.

    `magic_s_va`/`hcryptkey_va` may be None to plant a bare key-data
    record, which the scanner must still pick up (chain unconfirmed).
    """

    key: SessionKey
    key_data_va: int
    key_va: int
    magic_s_va: int | None = None
    hcryptkey_va: int | None = None


@dataclass
class Decoy:
    """A key-data pattern that must never verify.

    kind "wrong_key": valid pointer to 32 garbage bytes at `key_va`.
    kind "bad_pointer": pointer that resolves neither as VA nor as a file
    offset.
    """

    kind: str
    key_data_va: int
    key_va: int | None = None


@dataclass
class DumpLayoutSpec:
    """Declarative layout for `write_synthetic_dump`."""

    ranges: list[tuple[int, int]]  # (va, length)
    chains: list[PlantedChain]
    decoys: list[Decoy] = field(default_factory=list)
    pointer_width: int = 4
    container: str = "raw"  # raw | raw_with_map | minidump
    minidump_list: str = "memory64"
    fill: str = "zero"  # zero | random
    seed: int | None = None


_BAD_POINTER_32 = 0xFFFF_FF00
_BAD_POINTER_64 = 0xFFFF_FFFF_FFFF_F000


def _hcryptkey_bytes(pw: int, magic_s_va: int) -> bytes:
    mask = (1 << (8 * pw)) - 1
    fields = [0] * 11 + [(magic_s_va ^ HANDLE_XOR_CONSTANT) & mask]
    return b"".join(v.to_bytes(pw, "little") for v in fields)


def _key_data_bytes(pw: int, key_va: int) -> bytes:
    return (
        bytes(pw)
        + struct.pack("<III", ALG_AES_256, KEY_FLAGS, KEY_SIZE)
        + key_va.to_bytes(pw, "little")
    )


def write_synthetic_dump(spec: DumpLayoutSpec, path: str | os.PathLike) -> dict[str, Any]:
    """Emit the dump file plus a ground-truth manifest.

    The manifest (also written to `<path>.manifest.json`) records every
    planted VA and the final file offsets so tests can assert translation
    correctness without re-deriving the layout. The planted chains are
    read back from the finished buffers as a self-check before anything
    hits disk.
    """
    if spec.pointer_width not in (4, 8):
        raise LayoutSpecError("pointer width must be 4 or 8")
    if spec.container not in ("raw", "raw_with_map", "minidump"):
        raise LayoutSpecError(f"unknown container {spec.container!r}")
    if spec.fill not in ("zero", "random"):
        raise LayoutSpecError(f"unknown fill profile {spec.fill!r}")
    pw = spec.pointer_width
    rng = random.Random(spec.seed)

    ranges = sorted(spec.ranges, key=lambda r: r[0])
    if spec.container == "raw":
        # a raw dump is one identity mapping; collapse to a single flat region
        if ranges:
            flat_end = max(va + length for va, length in ranges)
            ranges = [(0, flat_end)]
    for (va_a, len_a), (va_b, _len_b) in zip(ranges, ranges[1:]):
        if va_b < va_a + len_a:
            raise LayoutSpecError(f"declared ranges overlap at {va_b:#x}")
    if any(length <= 0 for _, length in ranges):
        raise LayoutSpecError("ranges must have positive length")

    total = sum(length for _, length in ranges)
    bad_pointer = _BAD_POINTER_32 if pw == 4 else _BAD_POINTER_64
    if total > bad_pointer:
        raise LayoutSpecError("dump too large for the reserved bad-pointer value")
    if any(d.kind == "bad_pointer" for d in spec.decoys) and any(
        rva <= bad_pointer < rva + rlen for rva, rlen in ranges
    ):
        raise LayoutSpecError("a declared range covers the reserved bad-pointer value")

    # collect structure extents, validate containment and collisions
    extents: list[tuple[int, int, str]] = []

    def claim(va: int | None, size: int, what: str) -> None:
        if va is None:
            return
        if not any(rva <= va and va + size <= rva + rlen for rva, rlen in ranges):
            raise LayoutSpecError(f"{what} at {va:#x} does not fit inside any range")
        extents.append((va, va + size, what))

    for i, chain in enumerate(spec.chains):
        claim(chain.hcryptkey_va, 12 * pw, f"chain{i}.hcryptkey")
        claim(chain.magic_s_va, pw, f"chain{i}.magic_s")
        claim(chain.key_data_va, 2 * pw + 12, f"chain{i}.key_data")
        claim(chain.key_va, 32, f"chain{i}.key")
    for i, decoy in enumerate(spec.decoys):
        if decoy.kind not in ("wrong_key", "bad_pointer"):
            raise LayoutSpecError(f"unknown decoy kind {decoy.kind!r}")
        claim(decoy.key_data_va, 2 * pw + 12, f"decoy{i}.key_data")
        if decoy.kind == "wrong_key":
            if decoy.key_va is None:
                raise LayoutSpecError(f"decoy{i} of kind wrong_key needs a key_va")
            claim(decoy.key_va, 32, f"decoy{i}.key")
    extents.sort()
    for (s_a, e_a, what_a), (s_b, _e_b, what_b) in zip(extents, extents[1:]):
        if s_b < e_a:
            raise LayoutSpecError(f"{what_a} and {what_b} collide at {s_b:#x}")

    # build per-range buffers
    def filler(length: int) -> bytearray:
        if spec.fill == "zero":
            return bytearray(length)
        buf = bytearray(length)
        step = 16 << 20  # randbytes overflows past ~256 MiB
        for lo in range(0, length, step):
            n = min(step, length - lo)
            buf[lo : lo + n] = rng.randbytes(n)
        return buf

    buffers = [filler(length) for _, length in ranges]

    def poke(va: int, data: bytes) -> None:
        for buf, (rva, rlen) in zip(buffers, ranges):
            if rva <= va and va + len(data) <= rva + rlen:
                buf[va - rva : va - rva + len(data)] = data
                return
        raise LayoutSpecError(f"write at {va:#x} falls outside every range")

    true_keys = {chain.key.key_bytes for chain in spec.chains}
    for chain in spec.chains:
        poke(chain.key_data_va, _key_data_bytes(pw, chain.key_va))
        poke(chain.key_va, chain.key.key_bytes)
        if chain.magic_s_va is not None:
            poke(chain.magic_s_va, chain.key_data_va.to_bytes(pw, "little"))
            if chain.hcryptkey_va is not None:
                poke(chain.hcryptkey_va, _hcryptkey_bytes(pw, chain.magic_s_va))
    decoy_rows = []
    for decoy in spec.decoys:
        if decoy.kind == "wrong_key":
            garbage = rng.randbytes(32)
            while garbage in true_keys:
                garbage = rng.randbytes(32)
            poke(decoy.key_data_va, _key_data_bytes(pw, decoy.key_va))
            poke(decoy.key_va, garbage)
        else:
            poke(decoy.key_data_va, _key_data_bytes(pw, bad_pointer))
        decoy_rows.append({"kind": decoy.kind, "key_data_va": decoy.key_data_va,
                           "key_va": decoy.key_va})

    # lay out the container and compute final file offsets
    path = Path(path)
    va_payloads = [(rva, bytes(buf)) for buf, (rva, _r) in zip(buffers, ranges)]
    sidecar: Path | None = None
    if spec.container == "minidump":
        blob = write_minidump(va_payloads, pw, list_kind=spec.minidump_list)
        # read our own container back so the manifest carries real offsets
        loaded_ranges, _width = read_minidump(blob)
        range_rows = [{"va": r.va, "length": r.length, "offset": r.offset} for r in loaded_ranges]
    elif spec.container == "raw_with_map":
        blob_parts = []
        range_rows = []
        offset = 0
        for rva, payload in va_payloads:
            blob_parts.append(payload)
            range_rows.append({"va": rva, "length": len(payload), "offset": offset})
            offset += len(payload)
        blob = b"".join(blob_parts)
        sidecar = default_map_path(path)
    else:  # raw: identity mapping
        blob = b"".join(payload for _rva, payload in va_payloads)
        range_rows = [{"va": rva, "length": len(p), "offset": rva} for rva, p in va_payloads]

    def file_offset(va: int) -> int:
        for row in range_rows:
            if row["va"] <= va < row["va"] + row["length"]:
                return row["offset"] + (va - row["va"])
        raise LayoutSpecError(f"va {va:#x} missing from final range table")

    # self-check: every planted invariant must hold in the final blob
    mask = (1 << (8 * pw)) - 1
    for chain in spec.chains:
        off = file_offset(chain.key_va)
        if blob[off : off + 32] != chain.key.key_bytes:
            raise LayoutSpecError("self-check failed: key bytes not at planted offset")
        if chain.magic_s_va is not None and chain.hcryptkey_va is not None:
            hk_off = file_offset(chain.hcryptkey_va) + 11 * pw
            magic_field = int.from_bytes(blob[hk_off : hk_off + pw], "little")
            if magic_field != ((chain.magic_s_va ^ HANDLE_XOR_CONSTANT) & mask):
                raise LayoutSpecError("self-check failed: handle XOR link broken")

    path.write_bytes(blob)
    if sidecar is not None:
        sidecar.write_text(json.dumps(range_rows, indent=2))

    manifest: dict[str, Any] = {
        "container": spec.container,
        "pointer_width": pw,
        "key_hex": spec.chains[0].key.hex() if spec.chains else None,
        "chains": [
            {
                "hcryptkey_va": c.hcryptkey_va,
                "magic_s_va": c.magic_s_va,
                "key_data_va": c.key_data_va,
                "key_va": c.key_va,
                "key_hex": c.key.hex(),
                "key_file_offset": file_offset(c.key_va),
            }
            for c in spec.chains
        ],
        "decoys": decoy_rows,
        "ranges": range_rows,
    }
    Path(str(path) + ".manifest.json").write_text(json.dumps(manifest, indent=2))
    return manifest


def random_dump_layout(
    seed: int,
    *,
    pointer_width: int = 4,
    container: str = "raw",
    n_decoys: int = 0,
    n_chains: int = 1,
    total_bytes: int = 64 << 20,
    fill: str | None = None,
    minidump_list: str | None = None,
) -> DumpLayoutSpec:
    """Build a randomized but valid layout for stress fixtures.

    All placement, filler, decoy kinds and keys derive from `seed`, so a
    failing case reproduces exactly.
    """
    rng = random.Random(seed)
    pw = pointer_width

    if container == "raw":
        ranges = [(0, total_bytes)]
    else:
        n_ranges = rng.randint(1, 3)
        cuts = sorted(rng.sample(range(1, 64), n_ranges - 1)) if n_ranges > 1 else []
        parts, prev = [], 0
        for cut in cuts + [64]:
            parts.append((cut - prev) * (total_bytes // 64))
            prev = cut
        parts[-1] += total_bytes - sum(parts)
        ranges = []
        va = rng.randrange(0x0040_0000, 0x0100_0000, 0x1000)
        for length in parts:
            ranges.append((va, length))
            va += length + rng.randrange(0x1000, 0x10_0000, 0x1000)

    # sequential allocator with random gaps; structures never collide
    cursors = [va + rng.randrange(0x100, 0x1000, 16) for va, _ in ranges]

    def alloc(size: int) -> int:
        idx = rng.randrange(len(ranges))
        rva, rlen = ranges[idx]
        va = cursors[idx]
        if va + size > rva + rlen:
            idx = max(range(len(ranges)), key=lambda i: ranges[i][0] + ranges[i][1] - cursors[i])
            rva, rlen = ranges[idx]
            va = cursors[idx]
            if va + size > rva + rlen:
                raise LayoutSpecError("layout ran out of room for structures")
        cursors[idx] = va + size + rng.randrange(16, 0x2000, 16)
        return va

    chains = []
    for _ in range(n_chains):
        chains.append(
            PlantedChain(
                key=SessionKey(rng.randbytes(32)),
                key_data_va=alloc(2 * pw + 12),
                key_va=alloc(32),
                magic_s_va=alloc(pw),
                hcryptkey_va=alloc(12 * pw),
            )
        )
    decoys = []
    for _ in range(n_decoys):
        kind = rng.choice(("wrong_key", "bad_pointer"))
        decoys.append(
            Decoy(
                kind=kind,
                key_data_va=alloc(2 * pw + 12),
                key_va=alloc(32) if kind == "wrong_key" else None,
            )
        )

    return DumpLayoutSpec(
        ranges=ranges,
        chains=chains,
        decoys=decoys,
        pointer_width=pw,
        container=container,
        minidump_list=minidump_list or rng.choice(("memory64", "memory32")),
        fill=fill or rng.choice(("zero", "random")),
        seed=rng.randrange(1 << 30),
    )
