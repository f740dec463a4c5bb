"""Byte-exact emulation of the ransomware's AES-256 usage.

The malware encrypts each file with AES-256 in CBC mode, zero IV, feeding
0x2000-byte chunks through a never-finalized encryption call. Because the
chain is never finalized there is no standard padding: a trailing partial
block is zero-padded and the true length is recorded in the trailer
instead. Chunk boundaries are invisible in the ciphertext; one continuous
CBC stream per file.

The CBC/zero-IV choice matches the platform default for an AES key created
with no explicit mode or IV parameters, which is how the sample behaves.
It is the compatibility target of this whole toolkit; if a field sample
ever disagrees, only this module's defaults need to change.
"""

from __future__ import annotations

from dataclasses import dataclass

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from .errors import CipherError
from .trailer import ENCRYPTED_PREFIX_LIMIT, ceil16

KEY_LEN = 32
BLOCK_LEN = 16

#: Chunk size of the original encryption loop; kept for stream callers.
CHUNK_LEN = 0x2000

_ZERO_IV = bytes(BLOCK_LEN)


@dataclass(frozen=True)
class SessionKey:
    """A 32-byte AES-256 session key."""

    key_bytes: bytes

    def __post_init__(self) -> None:
        if len(self.key_bytes) != KEY_LEN:
            raise CipherError(f"session key must be {KEY_LEN} bytes, got {len(self.key_bytes)}")

    def hex(self) -> str:
        return self.key_bytes.hex()

    @classmethod
    def from_hex(cls, text: str) -> "SessionKey":
        try:
            raw = bytes.fromhex(text.strip())
        except ValueError as exc:
            raise CipherError(f"invalid key hex: {exc}") from exc
        return cls(raw)

    def __repr__(self) -> str:  # keep key material out of logs and tracebacks
        return "SessionKey(<32 bytes>)"


def zero_pad16(data: bytes) -> bytes:
    """Zero-pad to the next block boundary (identity for aligned input)."""
    if len(data) % BLOCK_LEN == 0:
        return data
    return data + bytes(ceil16(len(data)) - len(data))


class CbcStream:
    """One continuous zero-IV CBC stream, mirroring the never-finalized calls.

    Feed block-aligned chunks through `update`; the chain carries across
    calls exactly like repeated non-final encryption calls on one key
    handle. `tail` accepts the single trailing partial chunk and zero-pads
    it.
    """

    def __init__(self, key: SessionKey, *, decrypt: bool = False) -> None:
        cipher = Cipher(algorithms.AES(key.key_bytes), modes.CBC(_ZERO_IV))
        self._ctx = cipher.decryptor() if decrypt else cipher.encryptor()
        self._decrypt = decrypt
        self._tail_taken = False

    def update(self, chunk: bytes) -> bytes:
        if self._tail_taken:
            raise CipherError("stream already consumed its trailing partial chunk")
        if len(chunk) % BLOCK_LEN != 0:
            raise CipherError(f"chunk length {len(chunk)} is not a multiple of {BLOCK_LEN}")
        return self._ctx.update(chunk)

    def tail(self, chunk: bytes) -> bytes:
        """Encrypt the final, possibly partial chunk (zero-padded)."""
        if self._decrypt:
            raise CipherError("decryption input must already be block-aligned")
        out = self.update(zero_pad16(chunk))
        self._tail_taken = True
        return out


def encrypt_stream(key: SessionKey, plaintext: bytes) -> bytes:
    """Encrypt a whole buffer as one zero-IV CBC stream.

    The input is zero-padded to a block boundary, so the output length is
    ceil16(len(plaintext)). Callers never pass more than the encrypted
    prefix of a file.
    """
    if len(plaintext) > ENCRYPTED_PREFIX_LIMIT:
        raise CipherError(
            f"plaintext length {len(plaintext)} exceeds the encrypted prefix "
            f"limit {ENCRYPTED_PREFIX_LIMIT:#x}"
        )
    stream = CbcStream(key)
    return stream.tail(plaintext)


def decrypt_stream(key: SessionKey, ciphertext: bytes) -> bytes:
    """Invert `encrypt_stream`; returns the zero-padded plaintext.

    No padding is removed here: truncation to the recorded original length
    is the file codec's job.
    """
    if len(ciphertext) % BLOCK_LEN != 0:
        raise CipherError(f"ciphertext length {len(ciphertext)} is not a multiple of {BLOCK_LEN}")
    stream = CbcStream(key, decrypt=True)
    return stream.update(ciphertext)
