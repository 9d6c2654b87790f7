"""Deterministic derivations and the symmetric challenge cipher.

All identity material in the portal is derived here: pseudo-UUIDs (double
SHA-256), static keys (SHA-256 over XORed operand digests), numeric secret
codes, center identifiers, and the AES-256 encrypted 10-digit challenge
used by one-time verification pages. Everything is a pure function of its
inputs; randomness is always passed in from outside.
"""

from __future__ import annotations

import hashlib
import re
import secrets
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Mapping

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

SECRET_CODE_FAITHFUL = "faithful"
SECRET_CODE_UNIQUE = "unique"

CHALLENGE_MIN = 10**9          # smallest 10-digit number
CHALLENGE_MAX = 10**10         # exclusive upper bound
_CHALLENGE_PAD = b"\x00" * 6   # 10 ASCII digits + 6 zero bytes = one AES block

_HEX_RE = re.compile(r"^[0-9a-f]+$")


class ChallengeFormatError(Exception):
    """Decrypted block is not 10 ASCII digits followed by 6 zero bytes
    (wrong key or corrupted ciphertext)."""


def sha256_raw(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def sha256_hex(data: bytes) -> str:
    """FIPS 180-4 SHA-256, lowercase hex."""
    return hashlib.sha256(data).hexdigest()


def is_hex_digest(value: str) -> bool:
    return len(value) == 64 and bool(_HEX_RE.match(value))


def xor3_digest(a: str, b: str, c: str) -> bytes:
    """Bytewise XOR of the per-operand SHA-256 digests.

    Operands of arbitrary length are first mapped to 32 bytes by hashing
    their UTF-8 encoding, which makes the XOR well defined and the result
    symmetric in its arguments.
    """
    da = sha256_raw(a.encode("utf-8"))
    db = sha256_raw(b.encode("utf-8"))
    dc = sha256_raw(c.encode("utf-8"))
    return bytes(x ^ y ^ z for x, y, z in zip(da, db, dc))


def generate_pseudo_uuid(uuid: str, r: int) -> str:
    """Double SHA-256 of the UUID concatenated with the decimal random factor.

    The outer hash consumes the raw 32 bytes of the inner digest.
    """
    if not uuid:
        raise ValueError("uuid must be nonempty")
    inner = sha256_raw((uuid + str(r)).encode("utf-8"))
    return sha256_hex(inner)


def generate_static_key(identity: str, master_key: str, r: int) -> str:
    """SHA-256 over XOR(identity, masterKey, r); 64 hex chars.

    ``identity`` is the center ID for centers and the pseudo-UUID for
    citizens. The decoded 32 bytes double as AES-256 key material.
    """
    return sha256_hex(xor3_digest(identity, master_key, str(r)))


def _ceil_log2(h: int) -> int:
    # ceil(log2(h)) with ceil(log2(1)) = 0; h = 0 also maps to 0.
    if h <= 1:
        return 0
    return (h - 1).bit_length()


def generate_secret_code(
    pseudo_uuid: str,
    pin_code: str,
    mode: str = SECRET_CODE_UNIQUE,
    retry: int = 0,
) -> int:
    """Numeric credential derived from pseudo-UUID and PIN code.

    faithful mode: ceil(log2(H)) * 5 over the big-endian hash integer.
    The result is a multiple of 5 in [0, 1280] and collides for roughly
    half of all citizens (1280 is the modal value).

    unique mode (default): a 4-digit code 1000 + H' mod 9000, where H'
    additionally hashes the decimal retry counter; the caller bumps
    ``retry`` until the code is free within the PIN area.
    """
    if mode == SECRET_CODE_FAITHFUL:
        h = int.from_bytes(sha256_raw((pseudo_uuid + pin_code).encode("utf-8")), "big")
        return _ceil_log2(h) * 5
    if mode == SECRET_CODE_UNIQUE:
        if retry < 0:
            raise ValueError("retry must be >= 0")
        data = (pseudo_uuid + pin_code + str(retry)).encode("utf-8")
        h = int.from_bytes(sha256_raw(data), "big")
        return 1000 + h % 9000
    raise ValueError(f"unknown secret code mode: {mode!r}")


def generate_center_id(state_code: str, master_key: str, address: str, r: int) -> str:
    """Two state letters followed by 8 decimal digits, e.g. GJ34567816."""
    if len(state_code) != 2 or not state_code.isupper():
        raise ValueError("state code must be 2 uppercase letters")
    digest = sha256_raw((master_key + address + str(r)).encode("utf-8"))
    return state_code + str(int.from_bytes(digest, "big") % 10**8).zfill(8)


def generate_vaccination_id(pseudo_uuid: str, dose_number: int, center_id: str) -> str:
    """Plain concatenation: pseudoUUID + doseNumber + centerID."""
    if dose_number < 1:
        raise ValueError("dose number must be >= 1")
    return f"{pseudo_uuid}{dose_number}{center_id}"


# -- challenge cipher --------------------------------------------------------

def aes256_encrypt_block(block: bytes, key: bytes) -> bytes:
    """Raw AES-256 on a single 16-byte block."""
    if len(block) != 16:
        raise ValueError("block must be 16 bytes")
    if len(key) != 32:
        raise ValueError("key must be 32 bytes")
    enc = Cipher(algorithms.AES(key), modes.ECB()).encryptor()
    return enc.update(block) + enc.finalize()


def aes256_decrypt_block(block: bytes, key: bytes) -> bytes:
    if len(block) != 16:
        raise ValueError("block must be 16 bytes")
    if len(key) != 32:
        raise ValueError("key must be 32 bytes")
    dec = Cipher(algorithms.AES(key), modes.ECB()).decryptor()
    return dec.update(block) + dec.finalize()


def encrypt_challenge(n: int, static_key: str) -> str:
    """Encrypt a 10-digit challenge number under a static key.

    The plaintext block is the 10 ASCII digits of ``n`` followed by 6 zero
    bytes; the decoded static key is the AES-256 key. Returns 32 hex chars.
    """
    if not CHALLENGE_MIN <= n < CHALLENGE_MAX:
        raise ValueError("challenge number must have exactly 10 digits")
    block = str(n).encode("ascii") + _CHALLENGE_PAD
    return aes256_encrypt_block(block, bytes.fromhex(static_key)).hex()


def decrypt_challenge(ciphertext: str, static_key: str) -> int:
    """Invert encrypt_challenge.

    Raises ValueError for malformed ciphertext (wrong length or alphabet)
    and ChallengeFormatError when the decrypted block fails the
    digits-plus-zero-padding check, which is what a wrong key produces.
    """
    if len(ciphertext) != 32 or not _HEX_RE.match(ciphertext):
        raise ValueError("ciphertext must be 32 lowercase hex characters")
    block = aes256_decrypt_block(bytes.fromhex(ciphertext), bytes.fromhex(static_key))
    digits, pad = block[:10], block[10:]
    if pad != _CHALLENGE_PAD or not digits.isdigit():
        raise ChallengeFormatError("decrypted block failed the format check")
    return int(digits)


# -- signing -----------------------------------------------------------------

@dataclass(frozen=True)
class SigningKeypair:
    """Ed25519 keypair; ``address`` is the SHA-256 hex of the public key."""

    public_key: bytes
    private_seed: bytes
    address: str


def keypair_generate(seed: bytes) -> SigningKeypair:
    if len(seed) != 32:
        raise ValueError("seed must be 32 bytes")
    public = Ed25519PrivateKey.from_private_bytes(seed).public_key().public_bytes_raw()
    return SigningKeypair(public_key=public, private_seed=seed, address=sha256_hex(public))


def sign(message: bytes, private_seed: bytes) -> bytes:
    return Ed25519PrivateKey.from_private_bytes(private_seed).sign(message)


def verify(signature: bytes, message: bytes, public_key: bytes) -> bool:
    try:
        Ed25519PublicKey.from_public_bytes(public_key).verify(signature, message)
        return True
    except (InvalidSignature, ValueError):
        return False


# -- canonical serialization -------------------------------------------------

def rfc3339(ts: datetime) -> str:
    """RFC 3339 UTC with 1-second resolution."""
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _render_value(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans have no canonical form")
    if isinstance(value, int):
        return str(value)
    if isinstance(value, datetime):
        return rfc3339(value)
    if isinstance(value, (list, tuple)):
        return ",".join(_render_value(v) for v in value)
    raise TypeError(f"cannot canonicalize {type(value).__name__}")


def canonical_record_bytes(record: Mapping[str, object]) -> bytes:
    """Byte-exact serialization used for memo hashes and signatures.

    One ``name=value`` line per field, LF-terminated, fields in ascending
    byte order of their names, UTF-8 throughout.
    """
    out = []
    for name in sorted(record, key=lambda n: n.encode("utf-8")):
        out.append(f"{name}={_render_value(record[name])}\n")
    return "".join(out).encode("utf-8")


def canonical_hash(record: Mapping[str, object]) -> str:
    return sha256_hex(canonical_record_bytes(record))


# -- randomness helpers ------------------------------------------------------

def new_master_key(rng=None) -> str:
    """32 random bytes, hex-encoded; generated once per agency."""
    return rng_bytes(rng, 32).hex()


def random_factor(rng=None) -> int:
    """Unsigned 64-bit randomizing factor consumed by one derivation."""
    if rng is None:
        return secrets.randbits(64)
    return rng.getrandbits(64)


def random_challenge_number(rng=None) -> int:
    if rng is None:
        return CHALLENGE_MIN + secrets.randbelow(CHALLENGE_MAX - CHALLENGE_MIN)
    return rng.randrange(CHALLENGE_MIN, CHALLENGE_MAX)


def rng_bytes(rng, n: int) -> bytes:
    if rng is None:
        return secrets.token_bytes(n)
    return rng.randbytes(n)
