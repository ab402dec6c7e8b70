"""Mapping-log maintainer: the single authority binding domain groups to
certificate logs.

The log itself is a chronological structure whose entries are hashes of
(request, time, dg_s, dg_bl, dg_r, dg_i) records; the four digests commit to
ordered maps holding, respectively, the active certificate-log maintainers
(with their latest signed (size, digest, time) triple), the blacklisted
maintainer identities, the rgx-to-maintainer assignments, and the per-
maintainer set of assigned rgx groups.

Updates arrive in batches closed by an ``end`` request; lookups, extension
proofs, and signed time-stamps are always answered from the state as of the
last completed batch, so clients never observe a half-applied update.

Every accepted request also yields the mutation proofs an auditor needs to
re-check that record later; rejected requests append nothing.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import regexset
from .certs import Certificate, in_validity, issuer_sig_valid
from .chronolog import ChronoLog, ExtensionProof, PresenceProofC
from .errors import (
    BadSignatureError,
    BlacklistedError,
    DuplicateIdError,
    NoMappingError,
    OverlapError,
    RequestRejected,
    StaleTimeError,
    UnknownIdError,
    UnknownSnapshotError,
)
from .ordmap import OrderedMap
from .primitives import (
    EMPTY_DIGEST,
    SigningKey,
    VerifyKey,
    decode,
    encode,
    hash_encoded,
    tlv_record,
)

DEFAULT_VALIDITY_WINDOW = 86400


# -- requests ----------------------------------------------------------------


@tlv_record(0x20)
@dataclass(frozen=True)
class AddMapping:
    rgx: bytes
    clm_id: bytes


@tlv_record(0x21)
@dataclass(frozen=True)
class DelMapping:
    rgx: bytes
    clm_id: bytes


@tlv_record(0x22)
@dataclass(frozen=True)
class NewClm:
    cert: Certificate
    initial_sig: bytes  # CLM-key signature over (0, EMPTY_DIGEST, t)


@tlv_record(0x23)
@dataclass(frozen=True)
class ModClm:
    old_cert: Certificate
    new_cert: Certificate
    endorse_sig: bytes  # old key over encode(new_cert)
    n: int
    dg: bytes
    state_sig: bytes  # new key over encode((n, dg, t))


@tlv_record(0x24)
@dataclass(frozen=True)
class BlacklistClm:
    clm_id: bytes


@tlv_record(0x25)
@dataclass(frozen=True)
class EndUpdate:
    pass


MAP_REQUESTS = (AddMapping, DelMapping, NewClm, ModClm, BlacklistClm, EndUpdate)


# -- records and wire types ----------------------------------------------------


@tlv_record(0x26)
@dataclass(frozen=True)
class MapRecord:
    req: object
    t: int
    dg_s: bytes
    dg_bl: bytes
    dg_r: bytes
    dg_i: bytes


@tlv_record(0x27)
@dataclass(frozen=True)
class SsEntry:
    """Value stored for an active maintainer: cert plus its signed log state."""

    cert: Certificate
    n: int
    dg: bytes
    t: int
    sig: bytes  # CLM key over encode((n, dg, t))


@tlv_record(0x28)
@dataclass(frozen=True)
class SignedMlogTimestamp:
    t: int
    dg: bytes
    n: int
    sig: bytes  # MLM key over encode((t, dg, n))

    def pair(self):
        return (self.dg, self.n)


@tlv_record(0x29)
@dataclass(frozen=True)
class MappingResponse:
    record: MapRecord
    record_proof: PresenceProofC
    rgx: bytes
    clm_id: bytes
    r_proof: object
    s_entry: SsEntry
    s_proof: object
    ts: SignedMlogTimestamp


def record_leaf(record: MapRecord) -> bytes:
    return hash_encoded(record)


def timestamp_payload(t: int, dg: bytes, n: int) -> bytes:
    return encode((t, dg, n))


def clm_state_payload(n: int, dg: bytes, t: int) -> bytes:
    return encode((n, dg, t))


class _Maps:
    """The four ordered structures plus the per-maintainer rgx maps."""

    __slots__ = ("s", "bl", "r", "i", "irgx")

    def __init__(self, s=None, bl=None, r=None, i=None, irgx=None):
        self.s = s or OrderedMap.empty()
        self.bl = bl or OrderedMap.empty()
        self.r = r or OrderedMap.empty()
        self.i = i or OrderedMap.empty()
        self.irgx = irgx if irgx is not None else {}

    def copy(self):
        return _Maps(self.s, self.bl, self.r, self.i, dict(self.irgx))

    def digests(self):
        return (self.s.digest(), self.bl.digest(), self.r.digest(), self.i.digest())


@dataclass
class ServingState:
    """What a mirror replicates: the published log and its signed time-stamp."""

    chrono: ChronoLog
    records: tuple
    maps: _Maps
    ts: SignedMlogTimestamp | None

    def pair(self):
        n = len(self.records)
        return (self.chrono.digest_at(n), n)

    def lookup(self, domain: str) -> MappingResponse:
        if self.ts is None:
            raise NoMappingError("no signed time-stamp published yet")
        match = None
        for rgx_key, clm_id in self.maps.r.entries():
            if regexset.parse(rgx_key.decode("ascii")).matches(domain):
                match = (rgx_key, clm_id)
                break
        if match is None:
            raise NoMappingError("no rgx group covers %s" % domain)
        rgx_key, clm_id = match
        if clm_id in self.maps.bl:
            raise BlacklistedError("maintainer %s is blacklisted" % clm_id)
        entry_bytes = self.maps.s.get(clm_id)
        if entry_bytes is None:
            raise UnknownIdError("mapped maintainer %s not registered" % clm_id)
        entry = decode(entry_bytes)
        n = len(self.records)
        return MappingResponse(
            record=self.records[-1],
            record_proof=self.chrono.prove_presence(n - 1, n),
            rgx=rgx_key,
            clm_id=clm_id,
            r_proof=self.maps.r.prove_presence(rgx_key),
            s_entry=entry,
            s_proof=self.maps.s.prove_presence(clm_id),
            ts=self.ts,
        )

    def prove_extension(self, old_pair) -> ExtensionProof:
        old_dg, old_n = old_pair
        n = len(self.records)
        if not isinstance(old_n, int) or old_n < 0 or old_n > n:
            raise UnknownSnapshotError("size %r out of range" % (old_n,))
        if old_n and self.chrono.digest_at(old_n) != old_dg:
            raise UnknownSnapshotError("no snapshot with that digest at size %d" % old_n)
        return self.chrono.prove_extension(old_n, n)


class MappingLog:
    """Single-writer state machine; reads go through completed-batch snapshots."""

    def __init__(self, signing_key: SigningKey, validity_window: int = DEFAULT_VALIDITY_WINDOW):
        self.key = signing_key
        self.window = validity_window
        self.chrono = ChronoLog()
        self.records: list[MapRecord] = []
        self.bundles: list[tuple] = []
        self.maps = _Maps()
        self.history: list[_Maps] = []  # state after record k
        self.serving_index = 0
        self.latest_ts: SignedMlogTimestamp | None = None
        self.last_t = 0

    @property
    def public_key(self) -> VerifyKey:
        return self.key.public

    # -- write side ----------------------------------------------------------

    def apply(self, req, t: int):
        """Process one request; returns (record, audit bundle) or raises."""
        if t < self.last_t:
            raise StaleTimeError("request time %d precedes last record %d" % (t, self.last_t))
        handler = {
            AddMapping: self._apply_add,
            DelMapping: self._apply_del,
            NewClm: self._apply_new,
            ModClm: self._apply_mod,
            BlacklistClm: self._apply_bl,
            EndUpdate: self._apply_end,
        }.get(type(req))
        if handler is None:
            raise RequestRejected("unknown request type %r" % type(req))
        new_maps, bundle = handler(req, t)

        record = MapRecord(req, t, *new_maps.digests())
        self.chrono = self.chrono.append(record_leaf(record))
        self.records.append(record)
        self.bundles.append(tuple(bundle))
        self.maps = new_maps
        self.history.append(new_maps.copy())
        self.last_t = t
        if isinstance(req, EndUpdate):
            self.serving_index = len(self.records)
        return record, self.bundles[-1]

    def _parse_rgx(self, rgx_bytes: bytes) -> regexset.Rgx:
        try:
            rgx = regexset.parse(rgx_bytes.decode("ascii"))
        except (UnicodeDecodeError, regexset.RgxSyntaxError) as exc:
            raise RequestRejected("bad rgx: %s" % exc) from exc
        if rgx.key() != rgx_bytes:
            raise RequestRejected("rgx not in canonical form")
        return rgx

    def _apply_add(self, req: AddMapping, t: int):
        rgx = self._parse_rgx(req.rgx)
        rgx_key = rgx.key()
        clm_id = req.clm_id
        if clm_id not in self.maps.s:
            raise UnknownIdError("no registered maintainer %s" % clm_id)
        if clm_id in self.maps.bl:
            raise BlacklistedError("%s is blacklisted" % clm_id)
        if rgx_key in self.maps.r:
            raise OverlapError("rgx %s already mapped" % rgx.text())
        for other_key, other_id in self.maps.r.entries():
            if other_id != clm_id and regexset.overlap(rgx, regexset.parse(other_key.decode("ascii"))):
                raise OverlapError("%s overlaps %s (held by %s)" % (rgx.text(), other_key, other_id))
        if not rgx.matches(clm_id.decode("ascii", "replace")):
            raise RequestRejected("maintainer id %s is not an instance of %s" % (clm_id, rgx.text()))

        maps = self.maps.copy()
        maps.r, p_r = maps.r.insert(rgx_key, clm_id)
        irgx_old = maps.irgx[clm_id]
        irgx_new, p_irgx = irgx_old.insert(rgx_key, b"")
        maps.irgx[clm_id] = irgx_new
        maps.i, p_i = maps.i.modify(clm_id, irgx_new.digest())
        bundle = [
            ("r_add", p_r),
            ("i_mod", p_i),
            ("irgx_add", p_irgx),
            ("irgx_before", irgx_old.digest()),
            ("irgx_after", irgx_new.digest()),
        ]
        return maps, bundle

    def _apply_del(self, req: DelMapping, t: int):
        rgx = self._parse_rgx(req.rgx)
        rgx_key = rgx.key()
        clm_id = req.clm_id
        mapped = self.maps.r.get(rgx_key)
        if mapped is None or mapped != clm_id:
            raise NoMappingError("no mapping (%s, %s)" % (rgx.text(), clm_id))

        maps = self.maps.copy()
        maps.r, p_r = maps.r.delete(rgx_key)
        irgx_old = maps.irgx[clm_id]
        irgx_new, p_irgx = irgx_old.delete(rgx_key)
        maps.irgx[clm_id] = irgx_new
        maps.i, p_i = maps.i.modify(clm_id, irgx_new.digest())
        bundle = [
            ("r_del", p_r),
            ("i_mod", p_i),
            ("irgx_del", p_irgx),
            ("irgx_before", irgx_old.digest()),
            ("irgx_after", irgx_new.digest()),
        ]
        return maps, bundle

    def _apply_new(self, req: NewClm, t: int):
        cert = req.cert
        clm_id = cert.subject
        if clm_id in self.maps.s:
            raise DuplicateIdError("maintainer %s already registered" % clm_id)
        if clm_id in self.maps.bl:
            raise BlacklistedError("%s is blacklisted" % clm_id)
        if not issuer_sig_valid(cert):
            raise BadSignatureError("maintainer certificate signature invalid")
        if not in_validity(cert, t):
            raise RequestRejected("maintainer certificate outside validity")
        if not VerifyKey(cert.public_key).verify(clm_state_payload(0, EMPTY_DIGEST, t), req.initial_sig):
            raise BadSignatureError("initial log-state signature invalid")

        entry = SsEntry(cert, 0, EMPTY_DIGEST, t, req.initial_sig)
        maps = self.maps.copy()
        p_bl_absent = maps.bl.prove_absence(clm_id)
        maps.s, p_s = maps.s.insert(clm_id, encode(entry))
        maps.i, p_i = maps.i.insert(clm_id, EMPTY_DIGEST)
        maps.irgx[clm_id] = OrderedMap.empty()
        bundle = [("s_add", p_s), ("i_add", p_i), ("bl_absent", p_bl_absent)]
        return maps, bundle

    def _apply_mod(self, req: ModClm, t: int):
        old_cert, new_cert = req.old_cert, req.new_cert
        if old_cert.subject != new_cert.subject:
            raise RequestRejected("certificates have different subjects")
        clm_id = old_cert.subject
        stored = self.maps.s.get(clm_id)
        if stored is None:
            raise UnknownIdError("no registered maintainer %s" % clm_id)
        old_entry = decode(stored)
        if old_entry.cert != old_cert:
            raise RequestRejected("old certificate does not match the log")
        if not VerifyKey(old_cert.public_key).verify(encode(new_cert), req.endorse_sig):
            raise BadSignatureError("old key does not endorse the new certificate")
        if not VerifyKey(new_cert.public_key).verify(clm_state_payload(req.n, req.dg, t), req.state_sig):
            raise BadSignatureError("new key's log-state signature invalid")
        if not issuer_sig_valid(new_cert) or not in_validity(new_cert, t):
            raise BadSignatureError("new certificate invalid")

        entry = SsEntry(new_cert, req.n, req.dg, t, req.state_sig)
        maps = self.maps.copy()
        maps.s, p_s = maps.s.modify(clm_id, encode(entry))
        bundle = [("s_mod", p_s), ("s_old", stored)]
        return maps, bundle

    def _apply_bl(self, req: BlacklistClm, t: int):
        clm_id = req.clm_id
        stored = self.maps.s.get(clm_id)
        if stored is None:
            raise UnknownIdError("no registered maintainer %s" % clm_id)

        maps = self.maps.copy()
        maps.bl, p_bl = maps.bl.insert(clm_id, b"")
        maps.s, p_s = maps.s.delete(clm_id)
        # purge every mapping held by the terminated maintainer, in key order
        r_dels = []
        for rgx_key, mapped in list(maps.r.entries()):
            if mapped == clm_id:
                before = maps.r.digest()
                maps.r, p = maps.r.delete(rgx_key)
                r_dels.append((rgx_key, before, maps.r.digest(), p))
        irgx_dg = maps.i.get(clm_id)
        maps.i, p_i = maps.i.delete(clm_id)
        maps.irgx.pop(clm_id, None)
        bundle = [
            ("bl_add", p_bl),
            ("s_del", p_s),
            ("s_old", stored),
            ("r_dels", tuple(r_dels)),
            ("i_del", p_i),
            ("i_old", irgx_dg),
        ]
        return maps, bundle

    def _apply_end(self, req: EndUpdate, t: int):
        return self.maps.copy(), []

    # -- read side -----------------------------------------------------------

    def serving(self) -> ServingState:
        n = self.serving_index
        maps = self.history[n - 1].copy() if n else _Maps()
        return ServingState(self.chrono, tuple(self.records[:n]), maps, self.latest_ts)

    def issue_timestamp(self, t: int) -> SignedMlogTimestamp:
        n = self.serving_index
        dg = self.chrono.digest_at(n)
        sig = self.key.sign(timestamp_payload(t, dg, n))
        self.latest_ts = SignedMlogTimestamp(t, dg, n, sig)
        return self.latest_ts

    def lookup(self, domain: str) -> MappingResponse:
        return self.serving().lookup(domain)

    def prove_extension(self, old_pair) -> ExtensionProof:
        return self.serving().prove_extension(old_pair)

    def prove_extension_between(self, old_pair, new_pair) -> ExtensionProof:
        for dg, n in (old_pair, new_pair):
            if not isinstance(n, int) or n < 0 or n > len(self.records):
                raise UnknownSnapshotError("size %r out of range" % (n,))
            if n and self.chrono.digest_at(n) != dg:
                raise UnknownSnapshotError("no snapshot with that digest at size %d" % n)
        return self.chrono.prove_extension(old_pair[1], new_pair[1])

    # -- audit view ----------------------------------------------------------

    def record_count(self) -> int:
        return len(self.records)

    def record(self, k: int) -> MapRecord:
        return self.records[k]

    def leaf(self, k: int) -> bytes:
        return self.chrono.items[k]

    def bundle(self, k: int) -> tuple:
        return self.bundles[k]

    def digests_before(self, k: int):
        if k == 0:
            return (EMPTY_DIGEST,) * 4
        prev = self.records[k - 1]
        return (prev.dg_s, prev.dg_bl, prev.dg_r, prev.dg_i)

    def r_presence_at(self, k: int, rgx_key: bytes):
        """(clm_id, proof) for the mapping at rgx_key as of record k, or None."""
        if k < 0 or k >= len(self.history):
            return None
        r = self.history[k].r
        clm_id = r.get(rgx_key)
        if clm_id is None:
            return None
        return clm_id, r.prove_presence(rgx_key)

    def mapping_record_index(self, cls, rgx_key: bytes, clm_id: bytes, since: int = 0):
        """Index of the first add/del record for (rgx, clm) at or after ``since``."""
        for k in range(since, len(self.records)):
            req = self.records[k].req
            if isinstance(req, cls) and req.rgx == rgx_key and req.clm_id == clm_id:
                return k
        return None
