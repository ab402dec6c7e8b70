"""Client-side protocol engines: domain owner, browser, mirror, CA.

Each actor keeps a per-peer cache of (digest, size) pairs that only ever
advances through verified extension proofs, and each protocol run follows the
order-of-reveal rule: the actor discloses its cached pair only after the peer
has committed to a fresh signed answer.  Every failed check aborts the run
with the label of the first check that failed; fork alarms are raised when a
peer's fresh pair cannot be proven to extend the cached one.

Messages travel in-process; a Transcript records one line per logical message
with its canonical encoded size, which is what the size estimator reconciles
against.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass

from . import regexset
from .certlog import (
    AbsenceResponse,
    CertificateLog,
    RegisterResponse,
    RegRequest,
    RevRequest,
    VerifyResponse,
    cert_record_leaf,
    domain_value,
    reg_payload,
)
from .certs import KIND_LOG, KIND_MASTER, Certificate, in_validity, issuer_sig_valid
from .chronolog import verify_extension, verify_presence
from .errors import (
    ForkAlarm,
    NotActiveError,
    ProtocolAbort,
    RequestRejected,
    UnknownSnapshotError,
)
from .maplog import (
    DEFAULT_VALIDITY_WINDOW,
    MappingResponse,
    clm_state_payload,
    record_leaf,
    timestamp_payload,
)
from .ordmap import verify_absence as ods_verify_absence
from .ordmap import verify_presence as ods_verify_presence
from .primitives import (
    EMPTY_DIGEST,
    SigningKey,
    VerifyKey,
    encode,
    hash_data,
    hash_encoded,
    tlv_record,
)


# -- wire messages not defined elsewhere ---------------------------------------


@tlv_record(0x40)
@dataclass(frozen=True)
class MapLookupRequest:
    domain: bytes


@tlv_record(0x41)
@dataclass(frozen=True)
class CachePair:
    dg: bytes
    n: int


@tlv_record(0x42)
@dataclass(frozen=True)
class VerifReq:
    t_a: int
    cert: Certificate
    cert_m: Certificate


@tlv_record(0x43)
@dataclass(frozen=True)
class AbsenceQuery:
    domain: bytes


@tlv_record(0x44)
@dataclass(frozen=True)
class AddReq:
    cert: Certificate
    t: int
    sig: bytes


@tlv_record(0x45)
@dataclass(frozen=True)
class RevReq:
    cert: Certificate
    t: int
    sig: bytes


# -- transcript ------------------------------------------------------------------


@dataclass(frozen=True)
class TranscriptEntry:
    t: int
    protocol: str
    sender: str
    receiver: str
    label: str
    nbytes: int

    def line(self) -> str:
        return "%d,%s,%s,%s,%s,%d" % (
            self.t, self.protocol, self.sender, self.receiver, self.label, self.nbytes
        )


class Transcript:
    def __init__(self):
        self.entries: list[TranscriptEntry] = []
        self._protocol = "-"

    @contextmanager
    def run(self, name: str):
        previous = self._protocol
        self._protocol = name
        try:
            yield
        finally:
            self._protocol = previous

    def log(self, t: int, sender: str, receiver: str, label: str, payload):
        entry = TranscriptEntry(t, self._protocol, sender, receiver, label, len(encode(payload)))
        self.entries.append(entry)
        return entry

    def lines(self) -> list:
        return [e.line() for e in self.entries]

    def bytes_by_protocol(self) -> dict:
        out = {}
        for e in self.entries:
            out[e.protocol] = out.get(e.protocol, 0) + e.nbytes
        return out

    def runs_of(self, protocol: str) -> int:
        labels = [e for e in self.entries if e.protocol == protocol]
        return sum(1 for e in labels if e.label == "request")


# -- caches -----------------------------------------------------------------------


@dataclass
class CacheEntry:
    dg: bytes
    n: int
    t: int
    h: bytes
    sig: bytes


class DigestCache:
    """Per-peer (digest, size) pairs; advances only via verified extensions."""

    def __init__(self):
        self._entries: dict = {}
        self.history: dict = {}

    def get(self, peer) -> CacheEntry:
        entry = self._entries.get(peer)
        if entry is None:
            return CacheEntry(EMPTY_DIGEST, 0, 0, b"", b"")
        return entry

    def pair(self, peer):
        entry = self.get(peer)
        return (entry.dg, entry.n)

    def update(self, peer, dg, n, t, h=b"", sig=b""):
        self._entries[peer] = CacheEntry(dg, n, t, h, sig)
        self.history.setdefault(peer, []).append((dg, n))


# -- outcomes -----------------------------------------------------------------------


@dataclass
class Outcome:
    ok: bool
    step: str
    detail: str = ""

    @classmethod
    def success(cls, step="ok", detail=""):
        return cls(True, step, detail)

    @classmethod
    def failure(cls, step, detail=""):
        return cls(False, step, detail)


@dataclass
class MappingResult:
    rgx: regexset.Rgx
    clm_id: bytes
    clm_cert: Certificate
    n_min: int
    mlog_pair: tuple
    t: int


# -- mirror ---------------------------------------------------------------------------


class Mirror:
    """Untrusted replica of the mapping log; serves proofs under the MLM's
    signature and cannot forge anything on its own."""

    def __init__(self, name: str, mlm=None):
        self.name = name
        self._mlm = mlm
        self.copy = mlm.serving() if mlm is not None else None
        self.frozen = False

    def refresh(self, mlm=None):
        if self.frozen:
            return
        source = mlm if mlm is not None else self._mlm
        if source is not None:
            self.copy = source.serving()

    def serve_lookup(self, domain: str) -> MappingResponse:
        if self.copy is None:
            raise RequestRejected("mirror has no copy yet")
        return self.copy.lookup(domain)

    def serve_extension(self, old_pair):
        if self.copy is None:
            raise RequestRejected("mirror has no copy yet")
        return self.copy.prove_extension(old_pair)


class CertificateAuthority:
    """Issues certificates after (out of scope here) identity vetting."""

    def __init__(self, name: bytes, key: SigningKey):
        self.name = name
        self.key = key
        self._serial = 0

    def issue(self, subject: bytes, public_key: bytes, kind: int, t: int,
              lifetime: int = 10**8) -> Certificate:
        from .certs import issue as _issue

        self._serial += 1
        return _issue(self.name, self.key, subject, public_key, kind,
                      self._serial, t, t + lifetime)


# -- shared verification steps ----------------------------------------------------------


def _verify_mapping_response(resp: MappingResponse, domain: str, mlm_pk: VerifyKey,
                             now: int, window: int) -> None:
    if not isinstance(resp, MappingResponse):
        raise ProtocolAbort("response-shape")
    ts = resp.ts
    if not mlm_pk.verify(timestamp_payload(ts.t, ts.dg, ts.n), ts.sig):
        raise ProtocolAbort("ts-signature")
    if abs(now - ts.t) > window:
        raise ProtocolAbort("ts-stale")
    try:
        rgx = regexset.parse(resp.rgx.decode("ascii"))
    except Exception as exc:
        raise ProtocolAbort("rgx-parse") from exc
    if not rgx.matches(domain):
        raise ProtocolAbort("rgx-match")
    proof = resp.record_proof
    if proof.index != ts.n - 1 or proof.size != ts.n:
        raise ProtocolAbort("record-position")
    if not verify_presence(ts.dg, record_leaf(resp.record), proof):
        raise ProtocolAbort("record-presence")
    if not ods_verify_presence(resp.record.dg_r, resp.rgx, resp.clm_id, resp.r_proof):
        raise ProtocolAbort("mapping-presence")
    if not ods_verify_presence(resp.record.dg_s, resp.clm_id, encode(resp.s_entry), resp.s_proof):
        raise ProtocolAbort("maintainer-presence")
    cert = resp.s_entry.cert
    if cert.subject != resp.clm_id or cert.kind != KIND_LOG or not issuer_sig_valid(cert):
        raise ProtocolAbort("maintainer-cert")
    if not VerifyKey(cert.public_key).verify(
        clm_state_payload(resp.s_entry.n, resp.s_entry.dg, resp.s_entry.t), resp.s_entry.sig
    ):
        raise ProtocolAbort("maintainer-state-sig")


def _request_mapping(actor, mirror: Mirror, domain: str, t: int, transcript: Transcript) -> MappingResult:
    """The request-mapping protocol; updates the actor's mlm cache on success."""
    with transcript.run("request-mapping"):
        return _request_mapping_inner(actor, mirror, domain, t, transcript)


def _request_mapping_inner(actor, mirror, domain, t, transcript):
    transcript.log(t, actor.name, mirror.name, "request", MapLookupRequest(domain.encode()))
    resp = mirror.serve_lookup(domain)
    transcript.log(t, mirror.name, actor.name, "mapping-response", resp)
    _verify_mapping_response(resp, domain, actor.mlm_pk, t, actor.window)
    # only now reveal the cached pair and demand an extension proof
    cached = actor.cache.pair("mlog")
    transcript.log(t, actor.name, mirror.name, "cached-pair", CachePair(*cached))
    try:
        ext = mirror.serve_extension(cached)
    except (UnknownSnapshotError, RequestRejected) as exc:
        raise ForkAlarm("mlog", str(exc)) from exc
    transcript.log(t, mirror.name, actor.name, "extension-proof", ext)
    fresh = (resp.ts.dg, resp.ts.n)
    if not verify_extension(cached, fresh, ext):
        raise ForkAlarm("mlog", "extension proof failed")
    actor.cache.update("mlog", resp.ts.dg, resp.ts.n, resp.ts.t, record_leaf(resp.record), resp.ts.sig)
    return MappingResult(
        rgx=regexset.parse(resp.rgx.decode("ascii")),
        clm_id=resp.clm_id,
        clm_cert=resp.s_entry.cert,
        n_min=resp.s_entry.n,
        mlog_pair=fresh,
        t=t,
    )


def _verify_registration_response(resp: RegisterResponse, sent_req, cert: Certificate,
                                  cert_m: Certificate, mapping: MappingResult):
    """Rebuild the record from our own request and check the whole answer.

    Returns the reconstructed record on success.
    """
    if not isinstance(resp, RegisterResponse):
        raise ProtocolAbort("response-shape")
    from .certlog import CertRecord

    record = CertRecord(sent_req, resp.n_mlog, resp.dg_rgx)
    if resp.rgx != mapping.rgx.key():
        raise ProtocolAbort("rgx-echo")
    m = (resp.rgx, resp.dg_id, resp.dg_rgx, resp.dg_a, resp.dg_rv,
         (resp.p1, resp.p2, resp.p3))
    if not VerifyKey(mapping.clm_cert.public_key).verify(
        encode((resp.dg_clog, resp.n, hash_encoded(m))), resp.sig
    ):
        raise ProtocolAbort("response-signature")
    if resp.p1.index != resp.n - 1 or resp.p1.size != resp.n:
        raise ProtocolAbort("p1-position")
    if not verify_presence(resp.dg_clog, cert_record_leaf(record), resp.p1):
        raise ProtocolAbort("proof-p1")
    if not ods_verify_presence(resp.dg_rgx, resp.rgx, resp.dg_id, resp.p2):
        raise ProtocolAbort("proof-p2")
    value, _ = domain_value(cert_m, resp.dg_a, resp.dg_rv)
    if not ods_verify_presence(resp.dg_id, hash_data(cert.subject), value, resp.p3):
        raise ProtocolAbort("proof-p3")
    if resp.n < mapping.n_min:
        raise ProtocolAbort("stale-log")
    return record


def _extension_round(actor, peer_name: str, peer, fresh_pair, t: int,
                     transcript: Transcript, cache_h=b"", cache_sig=b"") -> None:
    """Reveal the cached pair, collect the extension proof, advance the cache."""
    log = getattr(actor, "_log", None)
    if log is None:
        def log(tr, tt, s, r, lbl, payload):
            tr.log(tt, s, r, lbl, payload)
    cached = actor.cache.pair(peer_name)
    log(transcript, t, actor.name, peer_name, "cached-pair", CachePair(*cached))
    try:
        ext = peer.prove_extension(cached)
    except (UnknownSnapshotError, RequestRejected) as exc:
        raise ForkAlarm(peer_name, str(exc)) from exc
    log(transcript, t, peer_name, actor.name, "extension-proof", ext)
    if not verify_extension(cached, fresh_pair, ext):
        raise ForkAlarm(peer_name, "extension proof failed")
    actor.cache.update(peer_name, fresh_pair[0], fresh_pair[1], t, cache_h, cache_sig)


# -- domain owner -----------------------------------------------------------------------


class DomainOwner:
    def __init__(self, name: str, domain: bytes, mlm_pk: VerifyKey,
                 window: int = DEFAULT_VALIDITY_WINDOW):
        self.name = name
        self.domain = domain
        self.mlm_pk = mlm_pk
        self.window = window
        self.cache = DigestCache()
        self.master_key: SigningKey | None = None
        self.master_cert: Certificate | None = None
        self.tls_creds: dict = {}  # serial -> (SigningKey, Certificate)
        self.published: dict = {}  # serial -> (Certificate, t_reg, reg signature)
        self.mapping: MappingResult | None = None
        self.alarms: list = []

    def _alarm(self, t, kind, detail=""):
        self.alarms.append((t, kind, detail))

    def request_mapping(self, mirror: Mirror, t: int, transcript: Transcript) -> Outcome:
        try:
            self.mapping = _request_mapping(self, mirror, self.domain.decode(), t, transcript)
        except ForkAlarm as alarm:
            self._alarm(t, "fork-alarm", str(alarm))
            return Outcome.failure("fork-alarm", str(alarm))
        except (ProtocolAbort, RequestRejected) as exc:
            step = exc.step if isinstance(exc, ProtocolAbort) else exc.label
            return Outcome.failure(step, str(exc))
        return Outcome.success()

    def _publish_or_revoke(self, clm: CertificateLog, cert: Certificate, t: int,
                           transcript: Transcript, revoking: bool) -> Outcome:
        if self.mapping is None or self.mapping.t < t - self.window:
            return Outcome.failure("mapping-stale", "run the request-mapping protocol first")
        if self.master_key is None:
            return Outcome.failure("no-master-key")
        tag = "rev" if revoking else "reg"
        sig = self.master_key.sign(reg_payload(cert, t, tag))
        msg = (RevReq if revoking else AddReq)(cert, t, sig)
        protocol = "revoke" if revoking else "publish"
        cert_m = cert if (cert.kind == KIND_MASTER and not revoking) else self.master_cert
        with transcript.run(protocol):
            transcript.log(t, self.name, clm.identity.decode(), "request", msg)
            try:
                if revoking:
                    record, resp = clm.revoke(cert, t, sig, now=t)
                else:
                    record, resp = clm.register(cert, t, sig, now=t)
            except RequestRejected as exc:
                return Outcome.failure(exc.label, str(exc))
            transcript.log(t, clm.identity.decode(), self.name, "register-response", resp)
            try:
                sent_req = (RevRequest if revoking else RegRequest)(cert, t, sig)
                if revoking and cert.kind == KIND_MASTER:
                    cert_m_for_value = None
                else:
                    cert_m_for_value = cert_m
                rebuilt = _verify_registration_response(
                    resp, sent_req, cert, cert_m_for_value, self.mapping
                )
                peer = clm.identity.decode()
                _extension_round(self, peer, clm, (resp.dg_clog, resp.n), t, transcript,
                                 cache_h=cert_record_leaf(rebuilt), cache_sig=resp.sig)
            except ForkAlarm as alarm:
                self._alarm(t, "fork-alarm", str(alarm))
                return Outcome.failure("fork-alarm", str(alarm))
            except ProtocolAbort as exc:
                if exc.step == "stale-log":
                    self._alarm(t, "stale-log", str(exc))
                return Outcome.failure(exc.step, str(exc))
        if not revoking and cert.kind != KIND_MASTER:
            self.published[cert.serial] = (cert, t, sig)
        return Outcome.success()

    def serve(self, serial: int | None = None):
        """What the TLS handshake hands a browser: the master certificate and
        a master-signed TLS certificate.  A stale or malicious server may keep
        serving a revoked certificate; the log is what stops it."""
        if serial is None:
            if not self.published:
                raise LookupError("nothing published yet")
            serial = max(self.published)
        cert, t_reg, sig = self.published[serial]
        return self.master_cert, cert, t_reg, sig

    def publish(self, clm: CertificateLog, cert: Certificate, t: int, transcript: Transcript) -> Outcome:
        return self._publish_or_revoke(clm, cert, t, transcript, revoking=False)

    def revoke(self, clm: CertificateLog, cert: Certificate, t: int, transcript: Transcript) -> Outcome:
        return self._publish_or_revoke(clm, cert, t, transcript, revoking=True)

    def check_after_blacklist(self, mirror: Mirror, clm_router, t: int,
                              transcript: Transcript) -> Outcome:
        """After a blacklist event, re-verify the master certificate at the
        successor maintainer named by the mapping log."""
        outcome = self.request_mapping(mirror, t, transcript)
        if not outcome.ok:
            return outcome
        clm = clm_router(self.mapping.clm_id)
        with transcript.run("blacklist-check"):
            transcript.log(t, self.name, self.mapping.clm_id.decode(), "request",
                           AbsenceQuery(self.domain))
            try:
                resp = clm.domain_status(self.domain)
            except RequestRejected as exc:
                self._alarm(t, "master-missing", str(exc))
                return Outcome.failure("master-missing", str(exc))
            transcript.log(t, self.mapping.clm_id.decode(), self.name, "status-response", resp)
            try:
                self._verify_domain_status(resp, t)
            except ProtocolAbort as exc:
                self._alarm(t, exc.step, str(exc))
                return Outcome.failure(exc.step, str(exc))
        return Outcome.success()

    def _verify_domain_status(self, resp, t: int) -> None:
        if resp.p1.index != resp.n - 1 or resp.p1.size != resp.n:
            raise ProtocolAbort("p1-position")
        if not verify_presence(resp.dg_clog, cert_record_leaf(resp.record), resp.p1):
            raise ProtocolAbort("proof-p1")
        if not ods_verify_presence(resp.record.dg_rgx, resp.rgx, resp.dg_id, resp.p2):
            raise ProtocolAbort("proof-p2")
        value = hash_encoded(tuple(resp.preimage))
        if not ods_verify_presence(resp.dg_id, hash_data(self.domain), value, resp.p3):
            raise ProtocolAbort("proof-p3")
        body = (resp.record, resp.dg_clog, resp.n, resp.rgx, resp.dg_id,
                tuple(resp.preimage), (resp.p1, resp.p2, resp.p3))
        if not VerifyKey(self.mapping.clm_cert.public_key).verify(
            encode((resp.dg_clog, resp.n, hash_encoded(body))), resp.sig
        ):
            raise ProtocolAbort("response-signature")
        if self.master_cert is None or resp.preimage[0] != encode(self.master_cert):
            raise ProtocolAbort("master-swapped")


# -- browser ------------------------------------------------------------------------------


class Browser:
    def __init__(self, name: str, mlm_pk: VerifyKey, window: int = DEFAULT_VALIDITY_WINDOW):
        self.name = name
        self.mlm_pk = mlm_pk
        self.window = window
        self.cache = DigestCache()
        self.mlog_size = 0
        self.alarms: list = []
        self.accepted: list = []  # (domain, tls public key, t_a)
        self._via = None

    def _alarm(self, t, kind, detail=""):
        self.alarms.append((t, kind, detail))

    def _log(self, transcript, t, sender, receiver, label, payload):
        """Relay through the redirect hop when one is configured."""
        via = getattr(self, "_via", None)
        if via is None or via in (sender, receiver):
            transcript.log(t, sender, receiver, label, payload)
        else:
            transcript.log(t, sender, via, label, payload)
            transcript.log(t, via, receiver, label, payload)

    def _mapping_run(self, mirror, domain, t, transcript) -> MappingResult:
        result = _request_mapping(self, mirror, domain, t, transcript)
        self.mlog_size = result.mlog_pair[1]
        return result

    def verify(self, mirror: Mirror, clm_router, domain: str, cert_m: Certificate,
               tls_cert: Certificate, t_reg: int, sig: bytes, t_a: int,
               transcript: Transcript, redirect_via: str | None = None) -> Outcome:
        """The certificate-verification protocol for one served certificate.

        ``sig`` is the master-key signature over (tls_cert, t_reg, 'reg') the
        domain owner serves alongside its certificates.  ``redirect_via``
        routes the maintainer round trips through the named party (the domain
        server, typically) so the maintainer never sees who is asking; it
        affects the transcript only, never the checks.
        """
        self._via = redirect_via
        with transcript.run("verify"):
            # local checks before any network round trip
            if not (in_validity(tls_cert, t_a) and in_validity(cert_m, t_a)):
                return Outcome.failure("cert-expired")
            if tls_cert.subject != domain.encode() or cert_m.subject != domain.encode():
                return Outcome.failure("subject-mismatch")
            if not VerifyKey(cert_m.public_key).verify(reg_payload(tls_cert, t_reg, "reg"), sig):
                return Outcome.failure("bad-master-sig")
            try:
                mapping = self._mapping_run(mirror, domain, t_a, transcript)
            except ForkAlarm as alarm:
                self._alarm(t_a, "fork-alarm", str(alarm))
                return Outcome.failure("fork-alarm", str(alarm))
            except (ProtocolAbort, RequestRejected) as exc:
                step = exc.step if isinstance(exc, ProtocolAbort) else exc.label
                return Outcome.failure(step, str(exc))

            for attempt in (0, 1):
                clm = clm_router(mapping.clm_id)
                peer = mapping.clm_id.decode()
                self._log(transcript, t_a, self.name, peer, "request",
                          VerifReq(t_a, tls_cert, cert_m))
                try:
                    resp = clm.verify_cert(t_a, tls_cert, cert_m, now=t_a)
                except NotActiveError as exc:
                    self._log(transcript, t_a, peer, self.name, "absence-response", exc.response)
                    return Outcome.failure("cert-not-active", str(exc))
                except RequestRejected as exc:
                    return Outcome.failure(exc.label, str(exc))
                self._log(transcript, t_a, peer, self.name, "verify-response", resp)
                if resp.record.n_mlog > self.mlog_size and attempt == 0:
                    # the mapping log moved on; refresh the local copy once
                    try:
                        mapping = self._mapping_run(mirror, domain, t_a, transcript)
                    except (ProtocolAbort, ForkAlarm, RequestRejected) as exc:
                        return Outcome.failure("mapping-rerun", str(exc))
                    continue
                break
            if resp.record.n_mlog > self.mlog_size:
                return Outcome.failure("mlog-ahead")
            if resp.record.n_mlog < self.mlog_size:
                return Outcome.failure("clm-stale-mlog", "answer predates the mapping log")

            try:
                self._verify_response(resp, mapping, domain, cert_m, tls_cert, t_a)
                _extension_round(self, peer, clm, (resp.dg_clog, resp.n), t_a, transcript,
                                 cache_h=cert_record_leaf(resp.record), cache_sig=resp.sig)
            except ForkAlarm as alarm:
                self._alarm(t_a, "fork-alarm", str(alarm))
                return Outcome.failure("fork-alarm", str(alarm))
            except ProtocolAbort as exc:
                return Outcome.failure(exc.step, str(exc))
            self.accepted.append((domain.encode(), tls_cert.public_key, t_a))
        return Outcome.success("accept")

    def _verify_response(self, resp: VerifyResponse, mapping: MappingResult, domain: str,
                         cert_m: Certificate, tls_cert: Certificate, t_a: int) -> None:
        if not isinstance(resp, VerifyResponse):
            raise ProtocolAbort("response-shape")
        record = resp.record
        m = (resp.dg_a, resp.dg_rv, resp.rgx, resp.dg_id, record.req, record.n_mlog,
             record.dg_rgx, (resp.p1, resp.p2, resp.p3, resp.p4))
        if not VerifyKey(mapping.clm_cert.public_key).verify(
            encode((resp.dg_clog, resp.n, t_a, hash_encoded(m))), resp.sig
        ):
            raise ProtocolAbort("response-signature")
        if resp.rgx != mapping.rgx.key() or not mapping.rgx.matches(domain):
            raise ProtocolAbort("rgx-echo")
        if resp.p1.index != resp.n - 1 or resp.p1.size != resp.n:
            raise ProtocolAbort("p1-position")
        if not verify_presence(resp.dg_clog, cert_record_leaf(record), resp.p1):
            raise ProtocolAbort("proof-p1")
        if not ods_verify_presence(record.dg_rgx, resp.rgx, resp.dg_id, resp.p2):
            raise ProtocolAbort("proof-p2")
        value, _ = domain_value(cert_m, resp.dg_a, resp.dg_rv)
        if not ods_verify_presence(resp.dg_id, hash_data(domain.encode()), value, resp.p3):
            raise ProtocolAbort("proof-p3")
        from .certs import cert_key

        if not ods_verify_presence(resp.dg_a, cert_key(tls_cert), encode(tls_cert), resp.p4):
            raise ProtocolAbort("proof-p4")
        if resp.n < mapping.n_min:
            raise ProtocolAbort("stale-log")

    def check_absence(self, mirror: Mirror, clm_router, domain: str, t: int,
                      transcript: Transcript) -> Outcome:
        """Stripping protection: is there provably no certificate for domain?"""
        self._via = None
        with transcript.run("check-absence"):
            try:
                mapping = self._mapping_run(mirror, domain, t, transcript)
            except (ProtocolAbort, ForkAlarm, RequestRejected) as exc:
                step = getattr(exc, "step", getattr(exc, "label", "abort"))
                return Outcome.failure(step, str(exc))
            clm = clm_router(mapping.clm_id)
            peer = mapping.clm_id.decode()
            transcript.log(t, self.name, peer, "request", AbsenceQuery(domain.encode()))
            try:
                resp = clm.prove_absence(domain.encode())
            except RequestRejected as exc:
                return Outcome.failure(exc.label, str(exc))
            transcript.log(t, peer, self.name, "absence-response", resp)
            try:
                self._verify_absence_response(resp, mapping, domain)
            except ProtocolAbort as exc:
                return Outcome.failure(exc.step, str(exc))
        return Outcome.success("absent")

    def _verify_absence_response(self, resp: AbsenceResponse, mapping: MappingResult,
                                 domain: str) -> None:
        if not isinstance(resp, AbsenceResponse):
            raise ProtocolAbort("response-shape")
        body = (resp.kind, resp.record, resp.record_proof, resp.dg_clog, resp.n, resp.rgx,
                resp.rgx_proof, resp.dg_id, resp.id_proof, resp.preimage, resp.cert_proof)
        if not VerifyKey(mapping.clm_cert.public_key).verify(
            encode((resp.dg_clog, resp.n, hash_encoded(body))), resp.sig
        ):
            raise ProtocolAbort("response-signature")
        if resp.rgx != mapping.rgx.key() or not mapping.rgx.matches(domain):
            raise ProtocolAbort("rgx-echo")
        if resp.record is None:
            if resp.n != 0 or resp.dg_clog != EMPTY_DIGEST:
                raise ProtocolAbort("empty-log-claim")
            dg_rgx = EMPTY_DIGEST
        else:
            if resp.record_proof.index != resp.n - 1 or resp.record_proof.size != resp.n:
                raise ProtocolAbort("p1-position")
            if not verify_presence(resp.dg_clog, cert_record_leaf(resp.record), resp.record_proof):
                raise ProtocolAbort("proof-p1")
            dg_rgx = resp.record.dg_rgx
        if resp.kind == "rgx-absent":
            if not ods_verify_absence(dg_rgx, resp.rgx, resp.rgx_proof):
                raise ProtocolAbort("rgx-absence")
            return
        if not ods_verify_presence(dg_rgx, resp.rgx, resp.dg_id, resp.rgx_proof):
            raise ProtocolAbort("rgx-presence")
        id_hash = hash_data(domain.encode())
        if resp.kind == "domain-absent":
            if not ods_verify_absence(resp.dg_id, id_hash, resp.id_proof):
                raise ProtocolAbort("id-absence")
            return
        if resp.kind == "no-active":
            value = hash_encoded(tuple(resp.preimage))
            if not ods_verify_presence(resp.dg_id, id_hash, value, resp.id_proof):
                raise ProtocolAbort("id-presence")
            if resp.preimage[1] != EMPTY_DIGEST:
                raise ProtocolAbort("active-set-not-empty")
            return
        raise ProtocolAbort("absence-kind")
