"""Shared primitives: hashing, signatures, and the canonical byte encoding.

Every value that is hashed, signed, or sent between actors goes through
``encode``/``decode``.  The encoding is a tag-length-value format chosen to be
injective: equal bytes imply equal values and vice versa, which is what makes
digests commitments and golden files stable across versions.
"""

from __future__ import annotations

import hashlib
from dataclasses import fields

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

Digest = bytes

DIGEST_LEN = 32
PUBKEY_LEN = 32
SIG_LEN = 64


def hash_data(data: bytes) -> Digest:
    return hashlib.sha256(data).digest()


#: Digest of the empty byte string; doubles as the digest of every empty
#: structure (empty chronological log, empty ordered map, absent subtree).
EMPTY_DIGEST: Digest = hash_data(b"")


class DecodeError(ValueError):
    """Raised for malformed encoded values, keys, or signatures."""


# ---------------------------------------------------------------------------
# Signatures (Ed25519)
# ---------------------------------------------------------------------------


class VerifyKey:
    __slots__ = ("_raw", "_key")

    def __init__(self, raw: bytes):
        if not isinstance(raw, bytes) or len(raw) != PUBKEY_LEN:
            raise DecodeError("public key must be %d bytes" % PUBKEY_LEN)
        self._raw = raw
        self._key = Ed25519PublicKey.from_public_bytes(raw)

    @property
    def bytes(self) -> bytes:
        return self._raw

    def verify(self, msg: bytes, sig: bytes) -> bool:
        """True iff sig was produced over exactly msg by the matching key."""
        if not isinstance(sig, bytes) or len(sig) != SIG_LEN:
            raise DecodeError("signature must be %d bytes" % SIG_LEN)
        try:
            self._key.verify(sig, msg)
            return True
        except InvalidSignature:
            return False

    def __eq__(self, other):
        return isinstance(other, VerifyKey) and self._raw == other._raw

    def __hash__(self):
        return hash(self._raw)

    def __repr__(self):
        return "VerifyKey(%s)" % self._raw.hex()[:16]


class SigningKey:
    __slots__ = ("_key", "_pub")

    def __init__(self, key: Ed25519PrivateKey):
        self._key = key
        self._pub = VerifyKey(key.public_key().public_bytes_raw())

    @classmethod
    def generate(cls, rng=None) -> "SigningKey":
        """Fresh key; pass a seeded ``random.Random`` for reproducible keys."""
        if rng is None:
            return cls(Ed25519PrivateKey.generate())
        return cls(Ed25519PrivateKey.from_private_bytes(rng.randbytes(32)))

    @property
    def public(self) -> VerifyKey:
        return self._pub

    def sign(self, msg: bytes) -> bytes:
        return self._key.sign(msg)


def verify(pk_bytes: bytes, msg: bytes, sig: bytes) -> bool:
    return VerifyKey(pk_bytes).verify(msg, sig)


# ---------------------------------------------------------------------------
# Canonical encoding
# ---------------------------------------------------------------------------
#
# Wire unit: 1 tag byte, 4-byte big-endian payload length, payload.
# Scalars encode minimally (ints as shortest big-endian, no leading zeros);
# tuples and registered record types concatenate their members' encodings in
# order.  Lists are accepted on encode but always decode as tuples.

_TAG_BYTES = 0x01
_TAG_INT = 0x02
_TAG_STR = 0x03
_TAG_TUPLE = 0x04
_TAG_NONE = 0x05
_TAG_BOOL = 0x06

_RECORD_TAGS: dict[int, type] = {}
_RECORD_TYPES: dict[type, int] = {}


def tlv_record(tag: int):
    """Class decorator registering a frozen dataclass as an encodable record."""

    def wrap(cls):
        if tag in _RECORD_TAGS:
            raise ValueError("record tag 0x%02x already taken by %s" % (tag, _RECORD_TAGS[tag]))
        if tag < 0x10 or tag > 0xFF:
            raise ValueError("record tags live in 0x10..0xff")
        _RECORD_TAGS[tag] = cls
        _RECORD_TYPES[cls] = tag
        return cls

    return wrap


def _unit(tag: int, payload: bytes) -> bytes:
    return bytes([tag]) + len(payload).to_bytes(4, "big") + payload


def encode(value) -> bytes:
    # bool first: it is a subclass of int
    if isinstance(value, bool):
        return _unit(_TAG_BOOL, b"\x01" if value else b"\x00")
    if isinstance(value, bytes):
        return _unit(_TAG_BYTES, value)
    if isinstance(value, int):
        if value < 0:
            raise TypeError("negative integers are outside the value domain")
        n = (value.bit_length() + 7) // 8
        return _unit(_TAG_INT, value.to_bytes(n, "big"))
    if isinstance(value, str):
        return _unit(_TAG_STR, value.encode("utf-8"))
    if value is None:
        return _unit(_TAG_NONE, b"")
    if isinstance(value, (tuple, list)):
        return _unit(_TAG_TUPLE, b"".join(encode(v) for v in value))
    tag = _RECORD_TYPES.get(type(value))
    if tag is not None:
        payload = b"".join(encode(getattr(value, f.name)) for f in fields(value))
        return _unit(tag, payload)
    raise TypeError("cannot encode %r" % type(value))


def _decode_one(data: bytes, pos: int):
    if pos + 5 > len(data):
        raise DecodeError("truncated header")
    tag = data[pos]
    length = int.from_bytes(data[pos + 1 : pos + 5], "big")
    end = pos + 5 + length
    if end > len(data):
        raise DecodeError("truncated payload")
    payload = data[pos + 5 : end]

    if tag == _TAG_BYTES:
        return payload, end
    if tag == _TAG_INT:
        if length and payload[0] == 0:
            raise DecodeError("non-minimal integer")
        return int.from_bytes(payload, "big"), end
    if tag == _TAG_STR:
        try:
            return payload.decode("utf-8"), end
        except UnicodeDecodeError as exc:
            raise DecodeError("bad utf-8") from exc
    if tag == _TAG_NONE:
        if length:
            raise DecodeError("none carries no payload")
        return None, end
    if tag == _TAG_BOOL:
        if payload not in (b"\x00", b"\x01"):
            raise DecodeError("bad boolean")
        return payload == b"\x01", end
    if tag == _TAG_TUPLE:
        return tuple(_decode_all(payload)), end
    cls = _RECORD_TAGS.get(tag)
    if cls is not None:
        values = _decode_all(payload)
        spec = fields(cls)
        if len(values) != len(spec):
            raise DecodeError("%s wants %d fields, got %d" % (cls.__name__, len(spec), len(values)))
        try:
            return cls(*values), end
        except (TypeError, ValueError) as exc:
            raise DecodeError("bad %s: %s" % (cls.__name__, exc)) from exc
    raise DecodeError("unknown tag 0x%02x" % tag)


def _decode_all(data: bytes) -> list:
    out = []
    pos = 0
    while pos < len(data):
        value, pos = _decode_one(data, pos)
        out.append(value)
    return out


def decode(data: bytes):
    value, end = _decode_one(data, 0)
    if end != len(data):
        raise DecodeError("trailing bytes after value")
    return value


def hash_encoded(value) -> Digest:
    """Digest of a value's canonical encoding; the universal h(...) helper."""
    return hash_data(encode(value))
