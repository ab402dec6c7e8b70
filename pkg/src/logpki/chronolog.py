"""Append-only authenticated sequence with positional presence and extension proofs.

The tree shape is the classic certificate-transparency one: leaves are
hash(0x00 || item), interior nodes hash(0x01 || left || right), and a tree over
n > 1 items splits at the largest power of two strictly below n.  That shape
gives O(log n) audit paths and O(log n) consistency ("extension") proofs, and
the digest of a sequence never depends on how it was appended.

The empty log's digest is the hash of the empty string, and an extension from
size 0 verifies with an empty proof, so a client cache can start from the null
pair (EMPTY_DIGEST, 0) and advance purely through verified extensions.
"""

from __future__ import annotations

from dataclasses import dataclass

from .primitives import EMPTY_DIGEST, Digest, hash_data, tlv_record

_LEAF = b"\x00"
_NODE = b"\x01"


def leaf_hash(item: bytes) -> Digest:
    return hash_data(_LEAF + item)


def node_hash(left: Digest, right: Digest) -> Digest:
    return hash_data(_NODE + left + right)


def _split_point(n: int) -> int:
    # largest power of two strictly less than n (n >= 2)
    k = 1
    while k * 2 < n:
        k *= 2
    return k


@tlv_record(0x10)
@dataclass(frozen=True)
class PresenceProofC:
    """Audit path for the item at ``index`` in a log of ``size`` items."""

    index: int
    size: int
    path: tuple

    def __post_init__(self):
        object.__setattr__(self, "path", tuple(self.path))


@tlv_record(0x11)
@dataclass(frozen=True)
class ExtensionProof:
    """Witness that the log of ``new_size`` extends the log of ``old_size``."""

    old_size: int
    new_size: int
    nodes: tuple

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))


class ChronoLog:
    """Immutable value: ``append`` returns a new log sharing subtree hashes."""

    __slots__ = ("_items", "_memo")

    def __init__(self, items=(), _memo=None):
        self._items = tuple(items)
        # subtree hash cache keyed by (start, end); safe to share between
        # snapshots because a range hash depends only on the items in range
        self._memo = {} if _memo is None else _memo

    @classmethod
    def from_items(cls, items) -> "ChronoLog":
        return cls(items)

    @property
    def items(self) -> tuple:
        return self._items

    def __len__(self) -> int:
        return len(self._items)

    def append(self, item: bytes) -> "ChronoLog":
        if not isinstance(item, bytes):
            raise TypeError("log items are byte strings")
        return ChronoLog(self._items + (item,), _memo=self._memo)

    def _mth(self, lo: int, hi: int) -> Digest:
        n = hi - lo
        if n == 0:
            return EMPTY_DIGEST
        if n == 1:
            return leaf_hash(self._items[lo])
        cached = self._memo.get((lo, hi))
        if cached is not None:
            return cached
        k = _split_point(n)
        dg = node_hash(self._mth(lo, lo + k), self._mth(lo + k, hi))
        self._memo[(lo, hi)] = dg
        return dg

    def digest(self) -> Digest:
        return self._mth(0, len(self._items))

    def digest_at(self, size: int) -> Digest:
        """Digest of the first ``size`` items (a historical snapshot)."""
        if size < 0 or size > len(self._items):
            raise ValueError("size out of range")
        return self._mth(0, size)

    # -- presence ----------------------------------------------------------

    def prove_presence(self, index: int, size: int | None = None) -> PresenceProofC:
        n = len(self._items) if size is None else size
        if n > len(self._items):
            raise ValueError("size out of range")
        if not 0 <= index < n:
            raise IndexError("index out of range")
        return PresenceProofC(index, n, tuple(self._audit_path(index, 0, n)))

    def _audit_path(self, m: int, lo: int, hi: int) -> list:
        n = hi - lo
        if n <= 1:
            return []
        k = _split_point(n)
        if m < k:
            return self._audit_path(m, lo, lo + k) + [self._mth(lo + k, hi)]
        return self._audit_path(m - k, lo + k, hi) + [self._mth(lo, lo + k)]

    # -- extension ---------------------------------------------------------

    def prove_extension(self, old_size: int, new_size: int | None = None) -> ExtensionProof:
        n = len(self._items) if new_size is None else new_size
        if n > len(self._items):
            raise ValueError("size out of range")
        if old_size < 0 or old_size > n:
            raise ValueError("old size exceeds new size")
        if old_size == 0 or old_size == n:
            return ExtensionProof(old_size, n, ())
        return ExtensionProof(old_size, n, tuple(self._subproof(old_size, 0, n, True)))

    def _subproof(self, m: int, lo: int, hi: int, complete: bool) -> list:
        n = hi - lo
        if m == n:
            return [] if complete else [self._mth(lo, hi)]
        k = _split_point(n)
        if m <= k:
            return self._subproof(m, lo, lo + k, complete) + [self._mth(lo + k, hi)]
        return self._subproof(m - k, lo + k, hi, False) + [self._mth(lo, lo + k)]


def verify_presence(dg: Digest, item: bytes, proof) -> bool:
    """True iff ``item`` sits at ``proof.index`` in the log committed by ``dg``."""
    if not isinstance(proof, PresenceProofC) or not isinstance(item, bytes):
        return False
    index, size, path = proof.index, proof.size, proof.path
    if not (isinstance(index, int) and isinstance(size, int)):
        return False
    if index < 0 or size < 1 or index >= size:
        return False
    if not all(isinstance(p, bytes) and len(p) == 32 for p in path):
        return False
    fn, sn = index, size - 1
    r = leaf_hash(item)
    for p in path:
        if sn == 0:
            return False
        if fn & 1 or fn == sn:
            r = node_hash(p, r)
            if not fn & 1:
                while fn and not fn & 1:
                    fn >>= 1
                    sn >>= 1
        else:
            r = node_hash(r, p)
        fn >>= 1
        sn >>= 1
    return sn == 0 and r == dg


def verify_extension(old_pair, new_pair, proof) -> bool:
    """True iff the log behind ``new_pair`` has the log behind ``old_pair`` as prefix.

    Pairs are (digest, size).  Size 0 extends into anything with an empty
    proof; equal sizes require equal digests and an empty proof.
    """
    try:
        old_dg, old_n = old_pair
        new_dg, new_n = new_pair
    except (TypeError, ValueError):
        return False
    if not isinstance(proof, ExtensionProof):
        return False
    if not (isinstance(old_n, int) and isinstance(new_n, int)):
        return False
    if proof.old_size != old_n or proof.new_size != new_n:
        return False
    nodes = proof.nodes
    if not all(isinstance(p, bytes) and len(p) == 32 for p in nodes):
        return False
    if old_n < 0 or old_n > new_n:
        return False
    if old_n == 0:
        return not nodes
    if old_n == new_n:
        return not nodes and old_dg == new_dg

    path = list(nodes)
    if old_n & (old_n - 1) == 0:  # exact power of two: old root is implicit
        path.insert(0, old_dg)
    if not path:
        return False
    fn, sn = old_n - 1, new_n - 1
    while fn & 1:
        fn >>= 1
        sn >>= 1
    fr = sr = path[0]
    for c in path[1:]:
        if sn == 0:
            return False
        if fn & 1 or fn == sn:
            fr = node_hash(c, fr)
            sr = node_hash(c, sr)
            if not fn & 1:
                while fn and not fn & 1:
                    fn >>= 1
                    sn >>= 1
        else:
            sr = node_hash(sr, c)
        fn >>= 1
        sn >>= 1
    return sn == 0 and fr == old_dg and sr == new_dg
