"""Crowd-style log verification: per-record audits, random sampling, gossip
comparison, and the ground-truth key oracle used by the test harness.

A record audit is a stateless pure function over a log view (live maintainer
or loaded state) plus the maintainer-supplied proof bundle for that record.
It re-derives what the record *claims* — which digests changed, how, and why —
and checks each claim with the ordered-structure verifiers.  The verdict names
the first failed check; "inconclusive" is reserved for missing mutation-proof
material (a maintainer refusing proofs is accountable, but the record itself
was not falsified).

The per-request check lists for the mapping log's add requests and the
certificate log's TLS registrations are the canonical ones; the lists for
del/new/mod/bl and for rev/upadd/updel mirror them following the documented
state-machine semantics.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from . import regexset
from .certlog import (
    CertRecord,
    RegRequest,
    RevRequest,
    UpAdd,
    UpDel,
    cert_record_leaf,
)
from .certs import KIND_MASTER, KIND_TLS, Certificate, in_validity
from .chronolog import verify_extension
from .errors import OracleIntegrityError, UnknownSnapshotError
from .maplog import (
    AddMapping,
    BlacklistClm,
    DelMapping,
    EndUpdate,
    MapRecord,
    ModClm,
    NewClm,
    SsEntry,
    clm_state_payload,
    record_leaf,
)
from .ordmap import verify_absence, verify_add, verify_delete, verify_modify
from .primitives import (
    EMPTY_DIGEST,
    DecodeError,
    VerifyKey,
    decode,
    encode,
    hash_data,
    hash_encoded,
)

PASS = "pass"
FAIL = "fail"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class AuditVerdict:
    log_id: str
    index: int
    result: str
    check: str  # first failed check, or "ok" / "missing:<item>"

    def line(self) -> str:
        return "%s,%d,%s,%s" % (self.log_id, self.index, self.result, self.check)


class _Missing(Exception):
    def __init__(self, item):
        super().__init__(item)
        self.item = item


class _Failed(Exception):
    def __init__(self, check):
        super().__init__(check)
        self.check = check


def _want(bundle: dict, item: str):
    if item not in bundle:
        raise _Missing(item)
    return bundle[item]


def _check(ok: bool, label: str):
    if not ok:
        raise _Failed(label)


# ---------------------------------------------------------------------------
# Mapping-log record audit
# ---------------------------------------------------------------------------


def audit_mlog_record(view, k: int) -> AuditVerdict:
    log_id = "mlog"
    try:
        record = view.record(k)
        bundle = dict(view.bundle(k))
        before = view.digests_before(k)
        _run_mlog_checks(record, bundle, before, view, k)
    except _Failed as f:
        return AuditVerdict(log_id, k, FAIL, f.check)
    except _Missing as m:
        return AuditVerdict(log_id, k, INCONCLUSIVE, "missing:%s" % m.item)
    except Exception:
        return AuditVerdict(log_id, k, FAIL, "malformed")
    return AuditVerdict(log_id, k, PASS, "ok")


def _run_mlog_checks(record: MapRecord, bundle, before, view, k):
    _check(isinstance(record, MapRecord), "record-shape")
    _check(view.leaf(k) == record_leaf(record), "leaf")
    s0, bl0, r0, i0 = before
    req = record.req

    if isinstance(req, EndUpdate):
        _check((record.dg_s, record.dg_bl, record.dg_r, record.dg_i) == (s0, bl0, r0, i0), "end-noop")

    elif isinstance(req, AddMapping):
        _check(record.dg_s == s0, "s-unchanged")
        _check(record.dg_bl == bl0, "bl-unchanged")
        _check(verify_add((req.rgx, req.clm_id), r0, record.dg_r, _want(bundle, "r_add")), "r-add")
        rgx = _parse_rgx(req.rgx)
        _check(rgx.matches(req.clm_id.decode("ascii", "replace")), "id-instance")
        irgx0, irgx1 = _want(bundle, "irgx_before"), _want(bundle, "irgx_after")
        _check(
            verify_modify((req.clm_id, irgx0), (req.clm_id, irgx1), i0, record.dg_i,
                          _want(bundle, "i_mod")),
            "i-mod",
        )
        _check(verify_add((req.rgx, b""), irgx0, irgx1, _want(bundle, "irgx_add")), "irgx-add")

    elif isinstance(req, DelMapping):
        _check(record.dg_s == s0, "s-unchanged")
        _check(record.dg_bl == bl0, "bl-unchanged")
        _check(verify_delete((req.rgx, req.clm_id), r0, record.dg_r, _want(bundle, "r_del")), "r-del")
        irgx0, irgx1 = _want(bundle, "irgx_before"), _want(bundle, "irgx_after")
        _check(
            verify_modify((req.clm_id, irgx0), (req.clm_id, irgx1), i0, record.dg_i,
                          _want(bundle, "i_mod")),
            "i-mod",
        )
        _check(verify_delete((req.rgx, b""), irgx0, irgx1, _want(bundle, "irgx_del")), "irgx-del")

    elif isinstance(req, NewClm):
        _check(record.dg_bl == bl0, "bl-unchanged")
        _check(record.dg_r == r0, "r-unchanged")
        cert = req.cert
        _check(isinstance(cert, Certificate), "cert-shape")
        from .certs import issuer_sig_valid

        _check(issuer_sig_valid(cert), "cert-sig")
        _check(
            VerifyKey(cert.public_key).verify(
                clm_state_payload(0, EMPTY_DIGEST, record.t), req.initial_sig
            ),
            "initial-sig",
        )
        entry = SsEntry(cert, 0, EMPTY_DIGEST, record.t, req.initial_sig)
        _check(
            verify_add((cert.subject, encode(entry)), s0, record.dg_s, _want(bundle, "s_add")),
            "s-add",
        )
        _check(
            verify_add((cert.subject, EMPTY_DIGEST), i0, record.dg_i, _want(bundle, "i_add")),
            "i-add",
        )
        _check(verify_absence(bl0, cert.subject, _want(bundle, "bl_absent")), "bl-absent")

    elif isinstance(req, ModClm):
        _check(record.dg_bl == bl0, "bl-unchanged")
        _check(record.dg_r == r0, "r-unchanged")
        _check(record.dg_i == i0, "i-unchanged")
        _check(req.old_cert.subject == req.new_cert.subject, "subject-match")
        _check(
            VerifyKey(req.old_cert.public_key).verify(encode(req.new_cert), req.endorse_sig),
            "endorse-sig",
        )
        _check(
            VerifyKey(req.new_cert.public_key).verify(
                clm_state_payload(req.n, req.dg, record.t), req.state_sig
            ),
            "state-sig",
        )
        s_old = _want(bundle, "s_old")
        entry = SsEntry(req.new_cert, req.n, req.dg, record.t, req.state_sig)
        _check(
            verify_modify(
                (req.old_cert.subject, s_old), (req.new_cert.subject, encode(entry)),
                s0, record.dg_s, _want(bundle, "s_mod"),
            ),
            "s-mod",
        )

    elif isinstance(req, BlacklistClm):
        cid = req.clm_id
        _check(verify_add((cid, b""), bl0, record.dg_bl, _want(bundle, "bl_add")), "bl-add")
        _check(verify_delete((cid, _want(bundle, "s_old")), s0, record.dg_s, _want(bundle, "s_del")), "s-del")
        cur = r0
        for step in _want(bundle, "r_dels"):
            rgx_key, dg_before, dg_after, proof = step
            _check(dg_before == cur, "r-del-chain")
            _check(verify_delete((rgx_key, cid), dg_before, dg_after, proof), "r-del-chain")
            cur = dg_after
        _check(cur == record.dg_r, "r-del-chain")
        _check(
            verify_delete((cid, _want(bundle, "i_old")), i0, record.dg_i, _want(bundle, "i_del")),
            "i-del",
        )

    else:
        _check(False, "unknown-request")


def _parse_rgx(rgx_bytes):
    try:
        return regexset.parse(rgx_bytes.decode("ascii"))
    except Exception as exc:
        raise _Failed("rgx-parse") from exc


# ---------------------------------------------------------------------------
# Certificate-log record audit
# ---------------------------------------------------------------------------


def audit_clog_record(view, mlog_view, k: int) -> AuditVerdict:
    log_id = view.identity.decode("ascii", "replace")
    try:
        record = view.record(k)
        bundle = dict(view.bundle(k))
        _run_clog_checks(view, mlog_view, k, record, bundle)
    except _Failed as f:
        return AuditVerdict(log_id, k, FAIL, f.check)
    except _Missing as m:
        return AuditVerdict(log_id, k, INCONCLUSIVE, "missing:%s" % m.item)
    except Exception:
        return AuditVerdict(log_id, k, FAIL, "malformed")
    return AuditVerdict(log_id, k, PASS, "ok")


def _decode_master(master_bytes, allow_empty=False):
    if master_bytes == b"":
        if allow_empty:
            return None
        raise _Failed("master-missing")
    try:
        cert = decode(master_bytes)
    except DecodeError as exc:
        raise _Failed("master-decode") from exc
    if not isinstance(cert, Certificate) or cert.kind != KIND_MASTER:
        raise _Failed("master-decode")
    return cert


def _run_clog_checks(view, mlog_view, k, record: CertRecord, bundle):
    _check(isinstance(record, CertRecord), "record-shape")
    _check(view.leaf(k) == cert_record_leaf(record), "leaf")
    dg_rgx0 = view.dg_rgx_before(k)
    _check(record.n_mlog >= view.n_mlog_before(k), "n-mlog-monotonic")
    req = record.req
    rgx_key = _want(bundle, "rgx")
    rgx = _parse_rgx(rgx_key)
    dgid0, dgid1 = _want(bundle, "dgid_before"), _want(bundle, "dgid_after")

    if isinstance(req, (RegRequest, RevRequest)):
        cert = req.cert
        _check(isinstance(cert, Certificate), "cert-shape")
        subject = cert.subject
        id_hash = hash_data(subject)
        _check(rgx.matches(subject.decode("ascii", "replace")), "subject-instance")
        after = _want(bundle, "preimage_after")
        value_after = hash_encoded(tuple(after))

        if isinstance(req, RegRequest):
            _audit_reg(view, k, record, bundle, cert, id_hash, after, value_after, dgid0, dgid1)
        else:
            _audit_rev(view, k, record, bundle, cert, id_hash, after, value_after, dgid0, dgid1)

        # the mapping log must have authorised this maintainer for the group
        # at the mapping-log size the record claims
        _crosscheck_mapping(mlog_view, view, record, rgx_key)

    elif isinstance(req, UpAdd):
        after = _want(bundle, "preimage_after")
        domain = _want(bundle, "domain")
        _check(hash_data(domain) == req.id_hash, "id-hash")
        _check(rgx.matches(domain.decode("ascii", "replace")), "subject-instance")
        _check(hash_encoded(tuple(after)) == req.h, "h-preimage")
        _check(verify_add((req.id_hash, req.h), dgid0, dgid1, _want(bundle, "id_add")), "id-add")
        _rgx_entry_step(record, bundle, rgx_key, dg_rgx0, dgid0, dgid1)
        _sync_crosscheck(mlog_view, view, record, bundle, rgx_key, AddMapping)

    elif isinstance(req, UpDel):
        before = _want(bundle, "preimage_before")
        domain = _want(bundle, "domain")
        _check(hash_data(domain) == req.id_hash, "id-hash")
        _check(hash_encoded(tuple(before)) == req.h, "h-preimage")
        _check(verify_delete((req.id_hash, req.h), dgid0, dgid1, _want(bundle, "id_del")), "id-del")
        _rgx_entry_step(record, bundle, rgx_key, dg_rgx0, dgid0, dgid1, deleting=True)
        _sync_crosscheck(mlog_view, view, record, bundle, rgx_key, (DelMapping, BlacklistClm))

    else:
        _check(False, "unknown-request")


def _audit_reg(view, k, record, bundle, cert, id_hash, after, value_after, dgid0, dgid1):
    req = record.req
    rgx_key = bundle["rgx"]
    if cert.kind == KIND_MASTER:
        _check(after[0] == encode(cert), "master-matches-entry")
        _check(
            VerifyKey(cert.public_key).verify(encode((cert, req.t, "reg")), req.sig),
            "reg-sig",
        )
        _check(in_validity(cert, req.t), "cert-valid")
        if "id_add" in bundle:
            # fresh domain: starts with empty active and revoked sets
            _check(after[1] == EMPTY_DIGEST and after[2] == EMPTY_DIGEST, "fresh-empty")
            _check(verify_add((id_hash, value_after), dgid0, dgid1, bundle["id_add"]), "id-add")
        else:
            # master rotation: only allowed over a cleared master slot, and the
            # record that cleared it must be cited and check out
            before = _want(bundle, "preimage_before")
            _check(before[0] == b"", "master-live-overwrite")
            _check(before[1] == after[1] and before[2] == after[2], "sets-unchanged")
            clear_idx = _want(bundle, "master_clear_index")
            _check(isinstance(clear_idx, int) and 0 <= clear_idx < k, "master-clear-cite")
            clear_req = view.record(clear_idx).req
            ok = (
                isinstance(clear_req, RevRequest)
                and clear_req.cert.kind == KIND_MASTER
                and clear_req.cert.subject == cert.subject
            ) or (isinstance(clear_req, UpAdd) and clear_req.id_hash == id_hash)
            _check(ok, "master-clear-cite")
            value_before = hash_encoded(tuple(before))
            _check(
                verify_modify((id_hash, value_before), (id_hash, value_after),
                              dgid0, dgid1, _want(bundle, "id_mod")),
                "id-mod",
            )
    elif cert.kind == KIND_TLS:
        before = _want(bundle, "preimage_before")
        master = _decode_master(before[0])
        _check(after[0] == before[0], "master-unchanged")
        _check(master.subject == cert.subject, "subject-match")
        _check(
            VerifyKey(master.public_key).verify(encode((cert, req.t, "reg")), req.sig),
            "reg-sig",
        )
        _check(in_validity(master, req.t), "master-valid")
        _check(in_validity(cert, req.t), "cert-valid")
        from .certs import cert_key

        _check(
            verify_add((cert_key(cert), encode(cert)), before[1], after[1], _want(bundle, "a_add")),
            "a-add",
        )
        _check(before[2] == after[2], "rv-unchanged")
        value_before = hash_encoded(tuple(before))
        _check(
            verify_modify((id_hash, value_before), (id_hash, value_after),
                          dgid0, dgid1, _want(bundle, "id_mod")),
            "id-mod",
        )
    else:
        _check(False, "cert-kind")
    _rgx_entry_step(record, bundle, rgx_key, view.dg_rgx_before(k), dgid0, dgid1)


def _audit_rev(view, k, record, bundle, cert, id_hash, after, value_after, dgid0, dgid1):
    req = record.req
    rgx_key = bundle["rgx"]
    before = _want(bundle, "preimage_before")
    value_before = hash_encoded(tuple(before))
    reg_index = _want(bundle, "reg_index")
    _check(isinstance(reg_index, int) and 0 <= reg_index < k, "prior-reg")
    reg_rec = view.record(reg_index)
    _check(isinstance(reg_rec.req, RegRequest) and reg_rec.req.cert == cert, "prior-reg")
    _check(req.t > reg_rec.req.t, "rev-ordering")

    if cert.kind == KIND_MASTER:
        signer = cert.public_key
        _check(before[0] == encode(cert), "master-on-file")
        _check(after[0] == b"", "master-cleared")
        _check(before[1] == after[1], "a-unchanged")
    else:
        reg_bundle = dict(view.bundle(reg_index))
        reg_master = _decode_master(_want(reg_bundle, "preimage_after")[0])
        signer = reg_master.public_key
        from .certs import cert_key

        _check(
            verify_delete((cert_key(cert), encode(cert)), before[1], after[1], _want(bundle, "a_del")),
            "a-del",
        )
        _check(before[0] == after[0], "master-unchanged")
    _check(VerifyKey(signer).verify(encode((cert, req.t, "rev")), req.sig), "rev-sig")
    from .certs import cert_key

    _check(
        verify_add((cert_key(cert), encode(cert)), before[2], after[2], _want(bundle, "rv_add")),
        "rv-add",
    )
    _check(
        verify_modify((id_hash, value_before), (id_hash, value_after),
                      dgid0, dgid1, _want(bundle, "id_mod")),
        "id-mod",
    )
    _rgx_entry_step(record, bundle, rgx_key, view.dg_rgx_before(k), dgid0, dgid1)


def _rgx_entry_step(record, bundle, rgx_key, dg_rgx0, dgid0, dgid1, deleting=False):
    if "rgx_add" in bundle:
        _check(dgid0 == EMPTY_DIGEST, "rgx-add-fresh")
        _check(verify_add((rgx_key, dgid1), dg_rgx0, record.dg_rgx, bundle["rgx_add"]), "rgx-entry")
    elif "rgx_del" in bundle:
        _check(deleting and dgid1 == EMPTY_DIGEST, "rgx-del-empty")
        _check(verify_delete((rgx_key, dgid0), dg_rgx0, record.dg_rgx, bundle["rgx_del"]), "rgx-entry")
    else:
        _check(
            verify_modify((rgx_key, dgid0), (rgx_key, dgid1), dg_rgx0, record.dg_rgx,
                          _want(bundle, "rgx_mod")),
            "rgx-entry",
        )


def _crosscheck_mapping(mlog_view, view, record, rgx_key):
    """The (rgx, this maintainer) pair must be live at mapping-log size N_mlog."""
    if mlog_view is None:
        raise _Missing("mlog-view")
    n = record.n_mlog
    _check(isinstance(n, int) and 1 <= n <= mlog_view.record_count(), "xcheck")
    mrec = mlog_view.record(n - 1)
    _check(mlog_view.leaf(n - 1) == record_leaf(mrec), "xcheck")
    found = mlog_view.r_presence_at(n - 1, rgx_key)
    _check(found is not None, "xcheck")
    clm_id, proof = found
    _check(clm_id == view.identity, "xcheck")
    from .ordmap import verify_presence

    _check(verify_presence(mrec.dg_r, rgx_key, clm_id, proof), "xcheck")


def _sync_crosscheck(mlog_view, view, record, bundle, rgx_key, req_cls):
    """upadd/updel must be justified by a mapping change at or after N_mlog.

    Deletions may also be justified by the blacklist record that purged the
    maintainer's mappings wholesale.
    """
    if mlog_view is None:
        raise _Missing("mlog-view")
    ref = bundle.get("mlog_ref")
    _check(ref is not None, "sync-xcheck")
    _check(isinstance(ref, int) and record.n_mlog <= ref < mlog_view.record_count(), "sync-xcheck")
    mreq = mlog_view.record(ref).req
    if isinstance(mreq, BlacklistClm):
        _check(isinstance(req_cls, tuple) and BlacklistClm in req_cls, "sync-xcheck")
        _check(mreq.clm_id == view.identity, "sync-xcheck")
        return
    cls = req_cls[0] if isinstance(req_cls, tuple) else req_cls
    _check(isinstance(mreq, cls) and mreq.rgx == rgx_key and mreq.clm_id == view.identity,
           "sync-xcheck")


# ---------------------------------------------------------------------------
# Sweeps, sampling, gossip
# ---------------------------------------------------------------------------


def audit_all(mlog_view, clog_views) -> list:
    """Exhaustive audit of every record of every supplied log."""
    verdicts = []
    for k in range(mlog_view.record_count()):
        verdicts.append(audit_mlog_record(mlog_view, k))
    for view in clog_views:
        for k in range(view.record_count()):
            verdicts.append(audit_clog_record(view, mlog_view, k))
    return verdicts


def random_check(seed: int, mlog_view, clog_views, m: int) -> list:
    """m uniform independent record picks across all logs, each audited."""
    if m < 1:
        raise ValueError("sample count must be at least 1")
    population = [("mlog", None, k) for k in range(mlog_view.record_count())]
    for view in clog_views:
        population.extend(
            ("clog", view, k) for k in range(view.record_count())
        )
    if not population:
        return []
    rng = random.Random(seed)
    cache = {}
    out = []
    for _ in range(m):
        kind, view, k = population[rng.randrange(len(population))]
        key = (id(view), k)
        if key not in cache:
            if kind == "mlog":
                cache[key] = audit_mlog_record(mlog_view, k)
            else:
                cache[key] = audit_clog_record(view, mlog_view, k)
        out.append(cache[key])
    return out


def gossip_compare(pair_a, pair_b, prover) -> str:
    """Compare two (digest, size) snapshots of the same log: consistent | fork."""
    (dg_a, n_a), (dg_b, n_b) = pair_a, pair_b
    if n_a == n_b:
        return "consistent" if dg_a == dg_b else "fork"
    old, new = (pair_a, pair_b) if n_a < n_b else (pair_b, pair_a)
    try:
        proof = prover.prove_extension_between(old, new)
    except (UnknownSnapshotError, ValueError):
        return "fork"
    return "consistent" if verify_extension(old, new, proof) else "fork"


def report_lines(verdicts) -> list:
    return [v.line() for v in verdicts]


# ---------------------------------------------------------------------------
# Ground-truth key oracle
# ---------------------------------------------------------------------------

ORACLE_NONE = "none"
ORACLE_ACTIVE = "authentic-active"
ORACLE_REVOKED = "authentic-revoked"


class KeyOracle:
    """Per-domain key lifecycle per the honest actors' intents.

    Fed only from successful honest protocol runs, never from log contents,
    so it is independent ground truth for what browsers should accept.
    """

    def __init__(self):
        self._life = {}  # (domain, pk) -> [t_reg, t_rev or None]

    def record_registration(self, domain: bytes, pk: bytes, t: int):
        key = (domain, pk)
        if key in self._life:
            raise OracleIntegrityError("key registered twice for %s" % domain)
        self._life[key] = [t, None]

    def record_revocation(self, domain: bytes, pk: bytes, t: int):
        key = (domain, pk)
        if key not in self._life:
            raise OracleIntegrityError("revoking a never-registered key")
        t_reg, t_rev = self._life[key]
        if t_rev is not None:
            raise OracleIntegrityError("key revoked twice")
        if t < t_reg:
            raise OracleIntegrityError("revocation precedes registration")
        self._life[key][1] = t

    def status(self, domain: bytes, pk: bytes, t: int) -> str:
        life = self._life.get((domain, pk))
        if life is None:
            return ORACLE_NONE
        t_reg, t_rev = life
        if t < t_reg:
            return ORACLE_NONE
        if t_rev is not None and t >= t_rev:
            return ORACLE_REVOKED
        return ORACLE_ACTIVE
