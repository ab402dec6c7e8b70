"""Certificate-log maintainer: per-domain-group log of registrations,
revocations, and mapping-driven synchronisation.

Log entries are hashes of (request, N_mlog, dg_rgx) where N_mlog is the
maintainer's view of the mapping-log size when the request was processed and
dg_rgx commits to a two-level nest of ordered maps:

    dg_rgx:  rgx  ->  dg_id
    dg_id:   hash(domain) -> hash(master_cert, dg_active, dg_revoked)
    dg_active / dg_revoked: per-domain TLS certificates, keyed by
    (subject, serial)

The (rgx, dg_id) entry is created by the first record that places a domain
under the rgx and removed by the updel of the last one; which rgx groups the
maintainer is *authorised* for is plain synced state, updated when the mapping
log grants or withdraws a group.

Responses to domain owners and browsers carry the digests, the presence
proofs P1..P4 tying the answer to the latest record, and a signature over
(digest, size, [time,] hash of the response body), so any answer a maintainer
ever gives is non-repudiable evidence.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import regexset
from .certs import KIND_MASTER, KIND_TLS, Certificate, cert_key, in_validity, issuer_sig_valid
from .chronolog import ChronoLog, ExtensionProof, PresenceProofC, verify_extension
from .errors import (
    BadSignatureError,
    HasCertificatesError,
    DuplicateIdError,
    DuplicateMasterError,
    ForkAlarm,
    ManagedScopeError,
    NoPriorRegistrationError,
    NotActiveError,
    RequestRejected,
    StaleTimeError,
    SyncIntegrityError,
    UnknownIdError,
    UnknownSnapshotError,
    UnmappedSubjectError,
)
from .maplog import DEFAULT_VALIDITY_WINDOW, SignedMlogTimestamp, timestamp_payload
from .ordmap import OrderedMap
from .primitives import (
    EMPTY_DIGEST,
    SigningKey,
    VerifyKey,
    encode,
    hash_data,
    hash_encoded,
    tlv_record,
)

TAG_REG = "reg"
TAG_REV = "rev"


# -- requests and records ------------------------------------------------------


@tlv_record(0x30)
@dataclass(frozen=True)
class RegRequest:
    cert: Certificate
    t: int
    sig: bytes  # master key over encode((cert, t, "reg"))


@tlv_record(0x31)
@dataclass(frozen=True)
class RevRequest:
    cert: Certificate
    t: int
    sig: bytes  # the same master key over encode((cert, t, "rev"))


@tlv_record(0x32)
@dataclass(frozen=True)
class UpAdd:
    id_hash: bytes
    h: bytes


@tlv_record(0x33)
@dataclass(frozen=True)
class UpDel:
    id_hash: bytes
    h: bytes


@tlv_record(0x34)
@dataclass(frozen=True)
class CertRecord:
    req: object
    n_mlog: int
    dg_rgx: bytes


@tlv_record(0x35)
@dataclass(frozen=True)
class DomainImport:
    """Serialized per-domain subtree handed from one maintainer to the next."""

    domain: bytes
    master: object  # Certificate or b"" when the domain has no master
    active_entries: tuple
    revoked_entries: tuple


@tlv_record(0x36)
@dataclass(frozen=True)
class RegisterResponse:
    """No record echo: the requester rebuilds it from its own request plus
    (n_mlog, dg_rgx), which is all the maintainer adds."""

    n_mlog: int
    dg_rgx: bytes
    dg_clog: bytes
    n: int
    rgx: bytes
    dg_id: bytes
    dg_a: bytes
    dg_rv: bytes
    p1: PresenceProofC
    p2: object
    p3: object
    sig: bytes  # over (dg_clog, n, hash((rgx, dg_id, dg_rgx, dg_a, dg_rv, P)))


@tlv_record(0x37)
@dataclass(frozen=True)
class VerifyResponse:
    record: CertRecord
    dg_clog: bytes
    n: int
    dg_a: bytes
    dg_rv: bytes
    rgx: bytes
    dg_id: bytes
    p1: PresenceProofC
    p2: object
    p3: object
    p4: object
    sig: bytes  # over (dg_clog, n, t_a, hash(m))


@tlv_record(0x38)
@dataclass(frozen=True)
class AbsenceResponse:
    """Refusal / stripping-protection answer: proof that nothing is served."""

    kind: str  # rgx-absent | domain-absent | no-active | cert-absent
    record: object  # CertRecord or None for an empty log
    record_proof: object
    dg_clog: bytes
    n: int
    rgx: bytes
    rgx_proof: object  # presence of (rgx, dg_id), or absence of rgx
    dg_id: bytes
    id_proof: object  # presence/absence of hash(domain) in dg_id, or None
    preimage: object  # (master_bytes, dg_a, dg_rv) when the id entry is shown
    cert_proof: object  # absence of the queried cert in dg_a, or None
    sig: bytes


@tlv_record(0x39)
@dataclass(frozen=True)
class DomainStatusResponse:
    """Owner-side check: what the log currently says about one domain."""

    record: CertRecord
    dg_clog: bytes
    n: int
    rgx: bytes
    dg_id: bytes
    preimage: tuple  # (master_bytes, dg_a, dg_rv)
    p1: PresenceProofC
    p2: object
    p3: object
    sig: bytes


def cert_record_leaf(record: CertRecord) -> bytes:
    return hash_encoded(record)


def reg_payload(cert: Certificate, t: int, tag: str) -> bytes:
    return encode((cert, t, tag))


def domain_value(master, dg_a: bytes, dg_rv: bytes):
    """(hash, preimage) of an id entry; ``master`` may be None."""
    master_bytes = encode(master) if isinstance(master, Certificate) else b""
    preimage = (master_bytes, dg_a, dg_rv)
    return hash_encoded(preimage), preimage


@dataclass
class _Domain:
    rgx_key: bytes
    master: Certificate | None
    active: OrderedMap = field(default_factory=OrderedMap.empty)
    revoked: OrderedMap = field(default_factory=OrderedMap.empty)
    # cert_key -> (cert, t_reg, registering master pk, record index)
    reg_info: dict = field(default_factory=dict)
    # record index explaining an absent master (revocation or import)
    master_clear_index: int | None = None

    def value(self):
        return domain_value(self.master, self.active.digest(), self.revoked.digest())


class CertificateLog:
    """Single-writer state machine for one certificate-log maintainer."""

    def __init__(self, identity: bytes, signing_key: SigningKey,
                 validity_window: int = DEFAULT_VALIDITY_WINDOW):
        self.identity = identity
        self.key = signing_key
        self.cert: Certificate | None = None  # set when the CA issues it
        self.window = validity_window
        self.chrono = ChronoLog()
        self.records: list[CertRecord] = []
        self.bundles: list[tuple] = []
        self.authorized: dict[bytes, regexset.Rgx] = {}
        self.rgx_maps: dict[bytes, OrderedMap] = {}
        self.s_rgx = OrderedMap.empty()
        self.domains: dict[bytes, _Domain] = {}
        self.mlog_dg = EMPTY_DIGEST
        self.mlog_n = 0

    @property
    def public_key(self) -> VerifyKey:
        return self.key.public

    def pair(self):
        return (self.chrono.digest(), len(self.records))

    # -- mapping-log tracking -------------------------------------------------

    def observe_mlog(self, ts: SignedMlogTimestamp, ext_proof, mlm_key: VerifyKey, now: int):
        if not mlm_key.verify(timestamp_payload(ts.t, ts.dg, ts.n), ts.sig):
            raise BadSignatureError("mapping-log time-stamp signature invalid")
        if abs(now - ts.t) > self.window:
            raise StaleTimeError("mapping-log time-stamp outside validity")
        if not verify_extension((self.mlog_dg, self.mlog_n), (ts.dg, ts.n), ext_proof):
            raise ForkAlarm("mlog", "mapping log does not extend the cached view")
        self.mlog_dg, self.mlog_n = ts.dg, ts.n

    def grant_rgx(self, rgx: regexset.Rgx):
        self.authorized[rgx.key()] = rgx

    def withdraw_rgx(self, rgx: regexset.Rgx):
        self.authorized.pop(rgx.key(), None)

    def _match_authorized(self, subject: bytes) -> regexset.Rgx:
        name = subject.decode("ascii", "replace")
        for key in sorted(self.authorized):
            if self.authorized[key].matches(name):
                return self.authorized[key]
        raise UnmappedSubjectError("no authorised rgx group covers %s" % name)

    # -- record plumbing -------------------------------------------------------

    def _append(self, req, bundle) -> CertRecord:
        record = CertRecord(req, self.mlog_n, self.s_rgx.digest())
        self.chrono = self.chrono.append(cert_record_leaf(record))
        self.records.append(record)
        self.bundles.append(tuple(bundle))
        return record

    def attach_bundle_item(self, index: int, key: str, value):
        self.bundles[index] = self.bundles[index] + ((key, value),)

    def _set_id_entry(self, rgx_key: bytes, id_hash: bytes, value: bytes):
        """Add or modify the id entry; returns bundle items for the nest."""
        items = []
        id_map = self.rgx_maps.get(rgx_key, OrderedMap.empty())
        dg_id_before = id_map.digest()
        if id_hash in id_map:
            old = id_map.get(id_hash)
            id_map, p = id_map.modify(id_hash, value)
            items.append(("id_mod", p))
            items.append(("id_before", old))
        else:
            id_map, p = id_map.insert(id_hash, value)
            items.append(("id_add", p))
        self.rgx_maps[rgx_key] = id_map
        items += self._set_rgx_entry(rgx_key, dg_id_before, id_map.digest())
        return items

    def _set_rgx_entry(self, rgx_key: bytes, dg_id_before: bytes, dg_id_after: bytes):
        items = [("dgid_before", dg_id_before), ("dgid_after", dg_id_after)]
        if rgx_key in self.s_rgx:
            self.s_rgx, p = self.s_rgx.modify(rgx_key, dg_id_after)
            items.append(("rgx_mod", p))
        else:
            self.s_rgx, p = self.s_rgx.insert(rgx_key, dg_id_after)
            items.append(("rgx_add", p))
        return items

    def _drop_id_entry(self, rgx_key: bytes, id_hash: bytes, value: bytes):
        items = []
        id_map = self.rgx_maps[rgx_key]
        dg_id_before = id_map.digest()
        id_map, p = id_map.delete(id_hash)
        items.append(("id_del", p))
        items.append(("id_before", value))
        items.append(("dgid_before", dg_id_before))
        items.append(("dgid_after", id_map.digest()))
        if len(id_map):
            self.rgx_maps[rgx_key] = id_map
            self.s_rgx, p2 = self.s_rgx.modify(rgx_key, id_map.digest())
            items.append(("rgx_mod", p2))
        else:
            del self.rgx_maps[rgx_key]
            self.s_rgx, p2 = self.s_rgx.delete(rgx_key)
            items.append(("rgx_del", p2))
        return items

    # -- registration / revocation ---------------------------------------------

    def register(self, cert: Certificate, t: int, sig: bytes, now: int):
        if abs(now - t) > self.window:
            raise StaleTimeError("request time outside the acceptance window")
        if not issuer_sig_valid(cert):
            raise BadSignatureError("issuer signature invalid")
        if not in_validity(cert, now):
            raise RequestRejected("certificate outside its validity period")
        dom = self.domains.get(cert.subject)
        rgx_key = dom.rgx_key if dom is not None else self._match_authorized(cert.subject).key()
        if rgx_key not in self.authorized:
            raise UnmappedSubjectError("group no longer authorised for %s" % cert.subject)
        bundle = [("rgx", rgx_key)]

        if cert.kind == KIND_MASTER:
            if dom is not None and dom.master is not None:
                raise DuplicateMasterError("a master certificate already exists for %s" % cert.subject)
            if not VerifyKey(cert.public_key).verify(reg_payload(cert, t, TAG_REG), sig):
                raise BadSignatureError("registration signature invalid")
            if dom is None:
                dom = _Domain(rgx_key, cert)
                self.domains[cert.subject] = dom
            else:
                # master rotation after revocation/import; auditors want the why
                bundle.append(("preimage_before", dom.value()[1]))
                bundle.append(("master_clear_index", dom.master_clear_index))
                dom.master = cert
            signer_pk = cert.public_key
        elif cert.kind == KIND_TLS:
            if dom is None or dom.master is None:
                raise NoPriorRegistrationError("no master certificate on file for %s" % cert.subject)
            if not in_validity(dom.master, now):
                raise RequestRejected("master certificate expired")
            if not VerifyKey(dom.master.public_key).verify(reg_payload(cert, t, TAG_REG), sig):
                raise BadSignatureError("not signed by the master key on file")
            ck = cert_key(cert)
            if ck in dom.active or ck in dom.revoked:
                raise DuplicateIdError("certificate already registered")
            bundle.append(("preimage_before", dom.value()[1]))
            dom.active, p_a = dom.active.insert(ck, encode(cert))
            bundle.append(("a_add", p_a))
            signer_pk = dom.master.public_key
        else:
            raise RequestRejected("only master and tls certificates are registrable")

        value, preimage = dom.value()
        bundle.append(("preimage_after", preimage))
        bundle += self._set_id_entry(rgx_key, hash_data(cert.subject), value)
        record = self._append(RegRequest(cert, t, sig), bundle)
        dom.reg_info[cert_key(cert)] = (cert, t, signer_pk, len(self.records) - 1)
        return record, self._registration_response(cert.subject, dom)

    def revoke(self, cert: Certificate, t: int, sig: bytes, now: int):
        if abs(now - t) > self.window:
            raise StaleTimeError("request time outside the acceptance window")
        dom = self.domains.get(cert.subject)
        if dom is None:
            raise NoPriorRegistrationError("unknown domain %s" % cert.subject)
        info = dom.reg_info.get(cert_key(cert))
        if info is None or info[0] != cert:
            raise NoPriorRegistrationError("certificate was never registered here")
        reg_cert, t_reg, master_pk, reg_index = info
        if t <= t_reg:
            raise StaleTimeError("revocation time must exceed registration time")
        if not VerifyKey(master_pk).verify(reg_payload(cert, t, TAG_REV), sig):
            raise BadSignatureError("not signed by the registering master key")

        rgx_key = dom.rgx_key
        bundle = [("rgx", rgx_key), ("reg_index", reg_index),
                  ("preimage_before", dom.value()[1])]
        ck = cert_key(cert)
        if cert.kind == KIND_TLS:
            if dom.active.get(ck) != encode(cert):
                raise NoPriorRegistrationError("certificate is not active")
            dom.active, p_d = dom.active.delete(ck)
            bundle.append(("a_del", p_d))
        elif cert.kind == KIND_MASTER:
            if dom.master != cert:
                raise NoPriorRegistrationError("not the master certificate on file")
            dom.master = None
            dom.master_clear_index = len(self.records)  # the record being appended
        else:
            raise RequestRejected("only master and tls certificates are revocable")
        dom.revoked, p_rv = dom.revoked.insert(ck, encode(cert))
        bundle.append(("rv_add", p_rv))

        value, preimage = dom.value()
        bundle.append(("preimage_after", preimage))
        bundle += self._set_id_entry(rgx_key, hash_data(cert.subject), value)
        record = self._append(RevRequest(cert, t, sig), bundle)
        return record, self._registration_response(cert.subject, dom)

    def _registration_response(self, subject: bytes, dom: _Domain) -> RegisterResponse:
        n = len(self.records)
        dg_clog = self.chrono.digest()
        record = self.records[-1]
        rgx_key = dom.rgx_key
        id_map = self.rgx_maps[rgx_key]
        p1 = self.chrono.prove_presence(n - 1, n)
        p2 = self.s_rgx.prove_presence(rgx_key)
        p3 = id_map.prove_presence(hash_data(subject))
        dg_a, dg_rv = dom.active.digest(), dom.revoked.digest()
        m = (rgx_key, id_map.digest(), record.dg_rgx, dg_a, dg_rv, (p1, p2, p3))
        sig = self.key.sign(encode((dg_clog, n, hash_encoded(m))))
        return RegisterResponse(
            record.n_mlog, record.dg_rgx, dg_clog, n, rgx_key, id_map.digest(),
            dg_a, dg_rv, p1, p2, p3, sig,
        )

    # -- verification / absence -------------------------------------------------

    def verify_cert(self, t_a: int, cert: Certificate, cert_m: Certificate, now: int) -> VerifyResponse:
        if abs(now - t_a) > self.window:
            raise StaleTimeError("t_a outside the acceptance window")
        dom = self.domains.get(cert.subject)
        if dom is not None and dom.rgx_key in self.authorized:
            rgx = self.authorized[dom.rgx_key]
        else:
            rgx = self._match_scope(cert.subject)
        ck = cert_key(cert)
        if dom is None or dom.active.get(ck) != encode(cert):
            raise NotActiveError(
                "certificate is not currently active",
                response=self._absence_response(cert.subject, rgx, cert=cert),
            )
        id_map = self.rgx_maps[rgx.key()]
        n = len(self.records)
        record = self.records[-1]
        dg_clog = self.chrono.digest()
        p1 = self.chrono.prove_presence(n - 1, n)
        p2 = self.s_rgx.prove_presence(rgx.key())
        p3 = id_map.prove_presence(hash_data(cert.subject))
        p4 = dom.active.prove_presence(ck)
        dg_a, dg_rv = dom.active.digest(), dom.revoked.digest()
        m = (dg_a, dg_rv, rgx.key(), id_map.digest(), record.req, record.n_mlog,
             record.dg_rgx, (p1, p2, p3, p4))
        sig = self.key.sign(encode((dg_clog, n, t_a, hash_encoded(m))))
        return VerifyResponse(
            record, dg_clog, n, dg_a, dg_rv, rgx.key(), id_map.digest(), p1, p2, p3, p4, sig
        )

    def prove_absence(self, domain: bytes, cert: Certificate | None = None):
        rgx = self._match_scope(domain)
        dom = self.domains.get(domain)
        if dom is not None and cert is None and len(dom.active):
            raise HasCertificatesError("domain has active certificates")
        return self._absence_response(domain, rgx, cert=cert)

    def _match_scope(self, domain: bytes) -> regexset.Rgx:
        try:
            return self._match_authorized(domain)
        except UnmappedSubjectError as exc:
            raise ManagedScopeError(str(exc)) from exc

    def _absence_response(self, domain: bytes, rgx: regexset.Rgx, cert=None) -> AbsenceResponse:
        n = len(self.records)
        record = self.records[-1] if self.records else None
        record_proof = self.chrono.prove_presence(n - 1, n) if n else None
        dg_clog = self.chrono.digest() if n else EMPTY_DIGEST
        rgx_key = rgx.key()
        id_hash = hash_data(domain)
        dg_id = EMPTY_DIGEST
        id_proof = None
        preimage = None
        cert_proof = None
        if rgx_key not in self.s_rgx:
            kind = "rgx-absent"
            rgx_proof = self.s_rgx.prove_absence(rgx_key)
        else:
            id_map = self.rgx_maps[rgx_key]
            dg_id = id_map.digest()
            rgx_proof = self.s_rgx.prove_presence(rgx_key)
            dom = self.domains.get(domain)
            if dom is None:
                kind = "domain-absent"
                id_proof = id_map.prove_absence(id_hash)
            else:
                id_proof = id_map.prove_presence(id_hash)
                _, preimage = dom.value()
                if cert is not None:
                    kind = "cert-absent"
                    cert_proof = dom.active.prove_absence(cert_key(cert))
                else:
                    kind = "no-active"
        body = (kind, record, record_proof, dg_clog, n, rgx_key, rgx_proof,
                dg_id, id_proof, preimage, cert_proof)
        sig = self.key.sign(encode((dg_clog, n, hash_encoded(body))))
        return AbsenceResponse(kind, record, record_proof, dg_clog, n, rgx_key,
                               rgx_proof, dg_id, id_proof, preimage, cert_proof, sig)

    def domain_status(self, domain: bytes) -> DomainStatusResponse:
        rgx = self._match_scope(domain)
        dom = self.domains.get(domain)
        if dom is None:
            raise UnknownIdError("no entry for %s" % domain)
        id_map = self.rgx_maps[rgx.key()]
        n = len(self.records)
        record = self.records[-1]
        dg_clog = self.chrono.digest()
        _, preimage = dom.value()
        p1 = self.chrono.prove_presence(n - 1, n)
        p2 = self.s_rgx.prove_presence(rgx.key())
        p3 = id_map.prove_presence(hash_data(domain))
        body = (record, dg_clog, n, rgx.key(), id_map.digest(), preimage, (p1, p2, p3))
        sig = self.key.sign(encode((dg_clog, n, hash_encoded(body))))
        return DomainStatusResponse(
            record, dg_clog, n, rgx.key(), id_map.digest(), preimage, p1, p2, p3, sig
        )

    # -- synchronisation ---------------------------------------------------------

    def export_domain(self, domain: bytes):
        dom = self.domains.get(domain)
        if dom is None:
            raise UnknownIdError("no entry for %s" % domain)
        h, _ = dom.value()
        imp = DomainImport(
            domain,
            dom.master if dom.master is not None else b"",
            tuple(dom.active.entries()),
            tuple(dom.revoked.entries()),
        )
        return imp, h

    def sync_upadd(self, imp: DomainImport, h: bytes):
        rgx = self._match_scope(imp.domain)
        if imp.domain in self.domains:
            raise SyncIntegrityError("domain already present")
        master = imp.master if isinstance(imp.master, Certificate) else None
        active = OrderedMap.from_entries(imp.active_entries)
        revoked = OrderedMap.from_entries(imp.revoked_entries)
        dom = _Domain(rgx.key(), master, active, revoked)
        value, preimage = dom.value()
        if value != h:
            raise SyncIntegrityError("import does not hash to the announced value")
        self.domains[imp.domain] = dom
        if master is None:
            dom.master_clear_index = len(self.records)
        bundle = [("rgx", rgx.key()), ("domain", imp.domain), ("preimage_after", preimage)]
        bundle += self._set_id_entry(rgx.key(), hash_data(imp.domain), value)
        record = self._append(UpAdd(hash_data(imp.domain), h), bundle)
        dom.reg_info = {}
        return record

    def sync_updel(self, domain: bytes):
        dom = self.domains.get(domain)
        if dom is None:
            raise UnknownIdError("no entry for %s" % domain)
        value, preimage = dom.value()
        bundle = [("rgx", dom.rgx_key), ("domain", domain), ("preimage_before", preimage)]
        bundle += self._drop_id_entry(dom.rgx_key, hash_data(domain), value)
        record = self._append(UpDel(hash_data(domain), value), bundle)
        export = DomainImport(
            domain,
            dom.master if dom.master is not None else b"",
            tuple(dom.active.entries()),
            tuple(dom.revoked.entries()),
        )
        del self.domains[domain]
        return record, export, value

    # -- extension / audit view ----------------------------------------------------

    def prove_extension(self, old_pair) -> ExtensionProof:
        old_dg, old_n = old_pair
        n = len(self.records)
        if not isinstance(old_n, int) or old_n < 0 or old_n > n:
            raise UnknownSnapshotError("size %r out of range" % (old_n,))
        if old_n and self.chrono.digest_at(old_n) != old_dg:
            raise UnknownSnapshotError("no snapshot with that digest at size %d" % old_n)
        return self.chrono.prove_extension(old_n, n)

    def prove_extension_between(self, old_pair, new_pair) -> ExtensionProof:
        for dg, n in (old_pair, new_pair):
            if not isinstance(n, int) or n < 0 or n > len(self.records):
                raise UnknownSnapshotError("size %r out of range" % (n,))
            if n and self.chrono.digest_at(n) != dg:
                raise UnknownSnapshotError("no snapshot with that digest at size %d" % n)
        return self.chrono.prove_extension(old_pair[1], new_pair[1])

    def record_count(self) -> int:
        return len(self.records)

    def record(self, k: int) -> CertRecord:
        return self.records[k]

    def leaf(self, k: int) -> bytes:
        return self.chrono.items[k]

    def bundle(self, k: int) -> tuple:
        return self.bundles[k]

    def dg_rgx_before(self, k: int) -> bytes:
        return self.records[k - 1].dg_rgx if k else EMPTY_DIGEST

    def n_mlog_before(self, k: int) -> int:
        return self.records[k - 1].n_mlog if k else 0
