"""Key-ordered authenticated dictionary with verifiable mutations.

The structure is a Merkle treap: binary search tree on the key bytes, max-heap
on priorities derived as hash(key).  Because priorities are determined by the
keys, the tree shape — and therefore the root digest — is a function of the
entry *set* alone, never of insertion order (history independence).  Identical
digests mean identical contents, which is what lets auditors chain mutation
proofs from one record's digest to the next.

Node digest: hash(0x02 || len(key) || key || len(value) || value || left || right)
with absent children contributing EMPTY_DIGEST.  Key and value are length-
prefixed inside the preimage so the commitment is injective.

Proof shapes:

* presence/absence: the root-to-slot search path, one (key, value, direction,
  sibling digest) step per ancestor.  Verification folds the path back up to
  the root digest and checks search-order and heap-order consistency at every
  step, so a path that verifies is *the* canonical search path for the key.

* add/delete/modify: a pruned copy of the before-tree revealing exactly the
  nodes the deterministic treap algorithm reads; everything else is collapsed
  to a digest stub.  The verifier recomputes the before digest from the
  witness, re-executes the mutation on it (failing if the algorithm would
  have to look inside a stub), and compares the resulting digest with the
  claimed after digest.  One verifier therefore covers all three mutations.
"""

from __future__ import annotations

from dataclasses import dataclass

from .primitives import EMPTY_DIGEST, Digest, hash_data, tlv_record

_NODE_PREFIX = b"\x02"

K_ADD = 1
K_DELETE = 2
K_MODIFY = 3


class DuplicateKeyError(KeyError):
    pass


class MissingKeyError(KeyError):
    pass


class KeyPresentError(KeyError):
    """Absence proof requested for a key that is present."""


class _StubReached(Exception):
    """The mutation being re-executed needs a node the witness pruned away."""


def _priority(key: bytes) -> bytes:
    return hash_data(key)


def node_digest(key: bytes, value: bytes, left_dg: Digest, right_dg: Digest) -> Digest:
    return hash_data(
        _NODE_PREFIX
        + len(key).to_bytes(4, "big")
        + key
        + len(value).to_bytes(4, "big")
        + value
        + left_dg
        + right_dg
    )


class _Stub:
    __slots__ = ("dg",)

    def __init__(self, dg: Digest):
        self.dg = dg


class _Node:
    __slots__ = ("key", "value", "prio", "left", "right", "dg")

    def __init__(self, key, value, left, right, prio=None):
        self.key = key
        self.value = value
        self.prio = _priority(key) if prio is None else prio
        self.left = left
        self.right = right
        self.dg = node_digest(key, value, _dg(left), _dg(right))


def _dg(t) -> Digest:
    if t is None:
        return EMPTY_DIGEST
    return t.dg


def _rank(t):
    # heap comparison; ties impossible for distinct keys, key breaks them anyway
    return (t.prio, t.key)


def _need(t, touch):
    """Assert t's contents are available to the running algorithm."""
    if isinstance(t, _Stub):
        raise _StubReached
    if touch is not None and t is not None:
        touch(t.key)
    return t


def _split(t, key, touch=None):
    """Three-way split into (keys < key, node with key or None, keys > key)."""
    t = _need(t, touch)
    if t is None:
        return None, None, None
    if key == t.key:
        return t.left, t, t.right
    if key < t.key:
        l, m, r = _split(t.left, key, touch)
        return l, m, _Node(t.key, t.value, r, t.right, t.prio)
    l, m, r = _split(t.right, key, touch)
    return _Node(t.key, t.value, t.left, l, t.prio), m, r


def _merge(a, b, touch=None):
    """Join two treaps; every key in a precedes every key in b."""
    a = _need(a, touch)
    b = _need(b, touch)
    if a is None:
        return b
    if b is None:
        return a
    if _rank(a) > _rank(b):
        return _Node(a.key, a.value, a.left, _merge(a.right, b, touch), a.prio)
    return _Node(b.key, b.value, _merge(a, b.left, touch), b.right, b.prio)


def _insert(t, key, value, touch=None):
    l, m, r = _split(t, key, touch)
    if m is not None:
        raise DuplicateKeyError(key)
    fresh = _Node(key, value, None, None)
    if touch is not None:
        touch(key)
    return _merge(_merge(l, fresh, touch), r, touch)


def _delete(t, key, touch=None):
    l, m, r = _split(t, key, touch)
    if m is None:
        raise MissingKeyError(key)
    return _merge(l, r, touch), m


def _modify(t, key, value, touch=None):
    l, m, r = _split(t, key, touch)
    if m is None:
        raise MissingKeyError(key)
    fresh = _Node(key, value, None, None)
    if touch is not None:
        touch(key)
    return _merge(_merge(l, fresh, touch), r, touch), m


def _prune(t, keys):
    """Copy of t revealing only nodes whose key was touched; rest are stubs."""
    if t is None:
        return None
    if t.key in keys:
        return _Node(t.key, t.value, _prune(t.left, keys), _prune(t.right, keys), t.prio)
    return _Stub(t.dg)


# ---------------------------------------------------------------------------
# Wire forms
# ---------------------------------------------------------------------------


@tlv_record(0x12)
@dataclass(frozen=True)
class WitnessStub:
    dg: bytes


@tlv_record(0x13)
@dataclass(frozen=True)
class WitnessNode:
    key: bytes
    value: bytes
    left: object
    right: object


@tlv_record(0x14)
@dataclass(frozen=True)
class PathStep:
    key: bytes
    value: bytes
    went_left: bool
    sibling: bytes


@tlv_record(0x15)
@dataclass(frozen=True)
class PresenceProofO:
    steps: tuple
    left: bytes
    right: bytes

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))


@tlv_record(0x16)
@dataclass(frozen=True)
class AbsenceProofO:
    steps: tuple

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))


@tlv_record(0x17)
@dataclass(frozen=True)
class MutationProofO:
    kind: int
    witness: object


def _to_wire(t):
    if t is None:
        return None
    if isinstance(t, _Stub):
        return WitnessStub(t.dg)
    return WitnessNode(t.key, t.value, _to_wire(t.left), _to_wire(t.right))


def _from_wire(w):
    if w is None:
        return None
    if isinstance(w, WitnessStub):
        if not isinstance(w.dg, bytes) or len(w.dg) != 32:
            raise ValueError("bad stub digest")
        return _Stub(w.dg)
    if isinstance(w, WitnessNode):
        if not isinstance(w.key, bytes) or not isinstance(w.value, bytes):
            raise ValueError("bad witness node")
        return _Node(w.key, w.value, _from_wire(w.left), _from_wire(w.right))
    raise ValueError("bad witness")


# ---------------------------------------------------------------------------
# Public map
# ---------------------------------------------------------------------------


class OrderedMap:
    """Immutable authenticated dictionary; mutations return (map, proof)."""

    __slots__ = ("_root", "_size")

    def __init__(self, _root=None, _size=0):
        self._root = _root
        self._size = _size

    @classmethod
    def empty(cls) -> "OrderedMap":
        return cls()

    @classmethod
    def from_entries(cls, entries) -> "OrderedMap":
        m = cls()
        for key, value in entries:
            m, _ = m.insert(key, value)
        return m

    def digest(self) -> Digest:
        return _dg(self._root)

    def __len__(self) -> int:
        return self._size

    def __contains__(self, key) -> bool:
        return self._find(key) is not None

    def get(self, key: bytes, default=None):
        node = self._find(key)
        return default if node is None else node.value

    def _find(self, key):
        t = self._root
        while t is not None:
            if key == t.key:
                return t
            t = t.left if key < t.key else t.right
        return None

    def entries(self):
        """(key, value) pairs in ascending key order."""
        out = []
        stack = []
        t = self._root
        while stack or t is not None:
            while t is not None:
                stack.append(t)
                t = t.left
            t = stack.pop()
            out.append((t.key, t.value))
            t = t.right
        return out

    def keys(self):
        return [k for k, _ in self.entries()]

    # -- mutations ----------------------------------------------------------

    def _mutate(self, op, *args):
        touched = set()
        result = op(self._root, *args, touch=touched.add)
        return result, _prune(self._root, touched)

    def insert(self, key: bytes, value: bytes):
        self._check_kv(key, value)
        (root), witness = self._mutate(_insert, key, value)
        proof = MutationProofO(K_ADD, _to_wire(witness))
        return OrderedMap(root, self._size + 1), proof

    def delete(self, key: bytes):
        if not isinstance(key, bytes):
            raise TypeError("keys are bytes")
        (root, old), witness = self._mutate(_delete, key)
        proof = MutationProofO(K_DELETE, _to_wire(witness))
        return OrderedMap(root, self._size - 1), proof

    def modify(self, key: bytes, value: bytes):
        self._check_kv(key, value)
        (root, old), witness = self._mutate(_modify, key, value)
        proof = MutationProofO(K_MODIFY, _to_wire(witness))
        return OrderedMap(root, self._size), proof

    @staticmethod
    def _check_kv(key, value):
        if not isinstance(key, bytes) or not isinstance(value, bytes):
            raise TypeError("keys and values are bytes")

    # -- membership proofs --------------------------------------------------

    def prove_presence(self, key: bytes) -> PresenceProofO:
        steps = []
        t = self._root
        while t is not None:
            if key == t.key:
                return PresenceProofO(tuple(steps), _dg(t.left), _dg(t.right))
            if key < t.key:
                steps.append(PathStep(t.key, t.value, True, _dg(t.right)))
                t = t.left
            else:
                steps.append(PathStep(t.key, t.value, False, _dg(t.left)))
                t = t.right
        raise MissingKeyError(key)

    def prove_absence(self, key: bytes) -> AbsenceProofO:
        steps = []
        t = self._root
        while t is not None:
            if key == t.key:
                raise KeyPresentError(key)
            if key < t.key:
                steps.append(PathStep(t.key, t.value, True, _dg(t.right)))
                t = t.left
            else:
                steps.append(PathStep(t.key, t.value, False, _dg(t.left)))
                t = t.right
        return AbsenceProofO(tuple(steps))


def _fold_path(dg: Digest, key: bytes, steps, bottom: Digest, bottom_prio) -> bool:
    """Recompute the root from a search path and check order invariants."""
    cur = bottom
    child_prio = bottom_prio
    for step in reversed(steps):
        if not isinstance(step, PathStep):
            return False
        if not isinstance(step.key, bytes) or not isinstance(step.value, bytes):
            return False
        if not isinstance(step.sibling, bytes) or len(step.sibling) != 32:
            return False
        if step.went_left:
            if not key < step.key:
                return False
            cur = node_digest(step.key, step.value, cur, step.sibling)
        else:
            if not key > step.key:
                return False
            cur = node_digest(step.key, step.value, step.sibling, cur)
        prio = _priority(step.key)
        if child_prio is not None and (prio, step.key) <= child_prio:
            return False
        child_prio = (prio, step.key)
    return cur == dg


def verify_presence(dg: Digest, key: bytes, value: bytes, proof) -> bool:
    if not isinstance(proof, PresenceProofO):
        return False
    if not isinstance(key, bytes) or not isinstance(value, bytes):
        return False
    if not (isinstance(proof.left, bytes) and len(proof.left) == 32):
        return False
    if not (isinstance(proof.right, bytes) and len(proof.right) == 32):
        return False
    bottom = node_digest(key, value, proof.left, proof.right)
    return _fold_path(dg, key, proof.steps, bottom, (_priority(key), key))


def verify_absence(dg: Digest, key: bytes, proof) -> bool:
    if not isinstance(proof, AbsenceProofO) or not isinstance(key, bytes):
        return False
    return _fold_path(dg, key, proof.steps, EMPTY_DIGEST, None)


def _verify_mutation(kind, proof, dg_before, dg_after, run):
    if not isinstance(proof, MutationProofO) or proof.kind != kind:
        return False
    if not isinstance(dg_before, bytes) or not isinstance(dg_after, bytes):
        return False
    try:
        root = _from_wire(proof.witness)
    except ValueError:
        return False
    if _dg(root) != dg_before:
        return False
    try:
        new_root = run(root)
    except (_StubReached, DuplicateKeyError, MissingKeyError, TypeError):
        return False
    return _dg(new_root) == dg_after


def verify_add(d, dg_before: Digest, dg_after: Digest, proof) -> bool:
    """True iff dg_after is dg_before with entry d = (key, value) added."""
    try:
        key, value = d
    except (TypeError, ValueError):
        return False
    if not isinstance(key, bytes) or not isinstance(value, bytes):
        return False

    def run(root):
        return _insert(root, key, value)

    return _verify_mutation(K_ADD, proof, dg_before, dg_after, run)


def verify_delete(d, dg_before: Digest, dg_after: Digest, proof) -> bool:
    """True iff dg_after is dg_before with exactly entry d removed."""
    try:
        key, value = d
    except (TypeError, ValueError):
        return False
    if not isinstance(key, bytes) or not isinstance(value, bytes):
        return False
    removed = []

    def run(root):
        new_root, old = _delete(root, key)
        removed.append(old)
        return new_root

    if not _verify_mutation(K_DELETE, proof, dg_before, dg_after, run):
        return False
    return removed[0].value == value


def verify_modify(d, d_new, dg_before: Digest, dg_after: Digest, proof) -> bool:
    """True iff dg_after is dg_before with entry d replaced by d_new (same key)."""
    try:
        key, value = d
        key2, value2 = d_new
    except (TypeError, ValueError):
        return False
    if not all(isinstance(x, bytes) for x in (key, value, key2, value2)):
        return False
    if key != key2:
        return False
    replaced = []

    def run(root):
        new_root, old = _modify(root, key, value2)
        replaced.append(old)
        return new_root

    if not _verify_mutation(K_MODIFY, proof, dg_before, dg_after, run):
        return False
    return replaced[0].value == value


def check_shape(m: OrderedMap) -> bool:
    """Internal invariant: BST order on keys, heap order on priorities."""

    def walk(t, lo, hi):
        if t is None:
            return True
        if (lo is not None and t.key <= lo) or (hi is not None and t.key >= hi):
            return False
        for child in (t.left, t.right):
            if child is not None and _rank(child) >= _rank(t):
                return False
        return walk(t.left, lo, t.key) and walk(t.right, t.key, hi)

    return walk(m._root, None, None)


def depth_stats(m: OrderedMap):
    """(mean, max) root-to-node depth, root at depth 1; (0, 0) when empty."""
    total = 0
    deepest = 0
    count = 0
    stack = [(m._root, 1)]
    while stack:
        t, d = stack.pop()
        if t is None:
            continue
        total += d
        count += 1
        deepest = max(deepest, d)
        stack.append((t.left, d + 1))
        stack.append((t.right, d + 1))
    return (total / count if count else 0.0, deepest)
