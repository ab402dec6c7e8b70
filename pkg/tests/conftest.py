"""Shared builders: a miniature world of one mapping log plus certificate logs."""

import random

from logpki import certs, regexset
from logpki.certlog import CertificateLog
from logpki.maplog import (
    AddMapping,
    EndUpdate,
    MappingLog,
    NewClm,
    clm_state_payload,
)
from logpki.primitives import EMPTY_DIGEST, SigningKey, hash_data


class MiniWorld:
    """Just enough wiring to drive the maintainer state machines in tests."""

    def __init__(self, seed=1):
        self.rng = random.Random(seed)
        self.mlm = MappingLog(SigningKey.generate(self.rng))
        self.ca_key = SigningKey.generate(self.rng)
        self.ca_name = b"test-ca"
        self.clms = {}
        self._serial = 0

    def next_serial(self):
        self._serial += 1
        return self._serial

    def issue(self, subject, public_key, kind, t, lifetime=10**8):
        return certs.issue(
            self.ca_name, self.ca_key, subject, public_key, kind,
            self.next_serial(), t, t + lifetime,
        )

    def add_clm(self, identity: bytes, t: int) -> CertificateLog:
        key = SigningKey.generate(self.rng)
        clm = CertificateLog(identity, key)
        clm.cert = self.issue(identity, key.public.bytes, certs.KIND_LOG, t)
        sig0 = key.sign(clm_state_payload(0, EMPTY_DIGEST, t))
        self.mlm.apply(NewClm(clm.cert, sig0), t)
        self.mlm.apply(EndUpdate(), t)
        self.publish(t)
        self.clms[identity] = clm
        return clm

    def publish(self, t: int):
        """Issue a fresh signed time-stamp and let every CLM advance its view."""
        ts = self.mlm.issue_timestamp(t)
        for clm in self.clms.values():
            proof = self.mlm.serving().prove_extension((clm.mlog_dg, clm.mlog_n))
            clm.observe_mlog(ts, proof, self.mlm.public_key, t)
        return ts

    def map_add(self, rgx_text: str, clm_id: bytes, t: int):
        rgx = regexset.parse(rgx_text)
        clm = self.clms[clm_id]
        clm.grant_rgx(rgx)  # maintainers sync before the mapping is published
        rec, _ = self.mlm.apply(AddMapping(rgx.key(), clm_id), t)
        self.mlm.apply(EndUpdate(), t)
        self.publish(t)
        return rec

    def map_move(self, rgx_text: str, from_id: bytes, to_id: bytes, t: int):
        """Reassign a group: sync both maintainers first, then publish."""
        from logpki.maplog import DelMapping

        rgx = regexset.parse(rgx_text)
        src, dst = self.clms[from_id], self.clms[to_id]
        moving = [d for d in list(src.domains) if src.domains[d].rgx_key == rgx.key()]
        dst.grant_rgx(rgx)
        sync_indexes = []  # (clm, record index, which mapping record justifies it)
        for domain in moving:
            _, export, h = src.sync_updel(domain)
            sync_indexes.append((src, src.record_count() - 1, "del"))
            dst.sync_upadd(export, h)
            sync_indexes.append((dst, dst.record_count() - 1, "add"))
        src.withdraw_rgx(rgx)
        self.mlm.apply(DelMapping(rgx.key(), from_id), t)
        del_index = self.mlm.record_count() - 1
        self.mlm.apply(AddMapping(rgx.key(), to_id), t)
        add_index = self.mlm.record_count() - 1
        self.mlm.apply(EndUpdate(), t)
        self.publish(t)
        for clm, rec_index, which in sync_indexes:
            clm.attach_bundle_item(rec_index, "mlog_ref", del_index if which == "del" else add_index)

    def make_master(self, domain: bytes, t: int):
        key = SigningKey.generate(self.rng)
        cert = self.issue(domain, key.public.bytes, certs.KIND_MASTER, t)
        return key, cert

    def make_tls(self, domain: bytes, t: int):
        key = SigningKey.generate(self.rng)
        cert = self.issue(domain, key.public.bytes, certs.KIND_TLS, t)
        return key, cert


def check_mlm_coherence(mlm: MappingLog) -> bool:
    """State digests equal the last record's; irgx nest matches S_i and S_r."""
    if mlm.records:
        rec = mlm.records[-1]
        if mlm.maps.digests() != (rec.dg_s, rec.dg_bl, rec.dg_r, rec.dg_i):
            return False
    for clm_id, dg in mlm.maps.i.entries():
        if mlm.maps.irgx[clm_id].digest() != dg:
            return False
        for rgx_key, _ in mlm.maps.irgx[clm_id].entries():
            if mlm.maps.r.get(rgx_key) != clm_id:
                return False
    return True


def check_clm_coherence(clm: CertificateLog) -> bool:
    """Recompute every nested digest from the leaf maps."""
    if clm.records and clm.records[-1].dg_rgx != clm.s_rgx.digest():
        return False
    by_hash = {hash_data(domain): domain for domain in clm.domains}
    ids_seen = set()
    for rgx_key, dg_id in clm.s_rgx.entries():
        id_map = clm.rgx_maps.get(rgx_key)
        if id_map is None or id_map.digest() != dg_id:
            return False
        for id_hash, value in id_map.entries():
            domain = by_hash.get(id_hash)
            if domain is None:
                return False
            ids_seen.add(domain)
            expected, _ = clm.domains[domain].value()
            if expected != value:
                return False
    return ids_seen == set(clm.domains)
