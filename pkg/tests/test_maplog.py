import pytest
from conftest import MiniWorld, check_mlm_coherence

from logpki import regexset
from logpki.chronolog import verify_extension, verify_presence
from logpki.errors import (
    BlacklistedError,
    DuplicateIdError,
    NoMappingError,
    OverlapError,
    RequestRejected,
    StaleTimeError,
    UnknownIdError,
    UnknownSnapshotError,
)
from logpki.maplog import (
    AddMapping,
    BlacklistClm,
    DelMapping,
    EndUpdate,
    MappingLog,
    record_leaf,
    timestamp_payload,
)
from logpki.ordmap import OrderedMap, verify_presence as ods_verify_presence
from logpki.primitives import EMPTY_DIGEST, SigningKey, decode, encode
import random


def _world_with_clog():
    w = MiniWorld(seed=5)
    w.add_clm(b"clog.org", t=100)
    return w


def test_add_keeps_s_and_bl_digests():
    w = _world_with_clog()
    prev = w.mlm.records[-1]
    rec = w.map_add(".*\\.org", b"clog.org", t=200)
    assert rec.dg_s == prev.dg_s
    assert rec.dg_bl == prev.dg_bl
    assert rec.dg_r != prev.dg_r
    assert rec.dg_i != prev.dg_i
    assert check_mlm_coherence(w.mlm)


def test_end_changes_no_digest():
    w = _world_with_clog()
    w.map_add(".*\\.org", b"clog.org", t=200)
    prev = w.mlm.records[-1]
    rec, bundle = w.mlm.apply(EndUpdate(), 300)
    assert (rec.dg_s, rec.dg_bl, rec.dg_r, rec.dg_i) == (prev.dg_s, prev.dg_bl, prev.dg_r, prev.dg_i)
    assert bundle == ()


def test_new_clm_stores_initial_signed_state():
    w = _world_with_clog()
    entry = decode(w.mlm.maps.s.get(b"clog.org"))
    assert entry.n == 0
    assert entry.dg == EMPTY_DIGEST
    from logpki.maplog import clm_state_payload

    clm = w.clms[b"clog.org"]
    assert clm.public_key.verify(clm_state_payload(0, EMPTY_DIGEST, entry.t), entry.sig)
    # independent re-insertion: rebuild S_s from scratch and compare digests
    rebuilt = OrderedMap.empty()
    rebuilt, _ = rebuilt.insert(b"clog.org", encode(entry))
    assert rebuilt.digest() == w.mlm.maps.s.digest()


def test_duplicate_clm_and_unknown_id_rejected():
    w = _world_with_clog()
    clm = w.clms[b"clog.org"]
    from logpki.maplog import NewClm, clm_state_payload

    sig0 = clm.key.sign(clm_state_payload(0, EMPTY_DIGEST, 500))
    with pytest.raises(DuplicateIdError):
        w.mlm.apply(NewClm(clm.cert, sig0), 500)
    with pytest.raises(UnknownIdError):
        w.mlm.apply(AddMapping(regexset.parse(".*\\.net").key(), b"nobody.net"), 500)


def test_overlap_rules():
    w = MiniWorld(seed=6)
    w.add_clm(b"clog.org", t=100)
    w.add_clm(b"a-certs.com", t=110)
    w.map_add(".*\\.org", b"clog.org", t=200)
    w.map_add("[a-h].*\\.com", b"a-certs.com", t=210)
    # same rgx again: rejected
    with pytest.raises(OverlapError):
        w.mlm.apply(AddMapping(regexset.parse(".*\\.org").key(), b"clog.org"), 300)
    # overlapping group for a different maintainer: rejected
    with pytest.raises(OverlapError):
        w.mlm.apply(AddMapping(regexset.parse("[a-b].*\\.com").key(), b"clog.org"), 300)
    # a second group for the same maintainer may overlap its own holdings
    w.map_add("[a-h].*\\.org", b"clog.org", t=310)
    assert check_mlm_coherence(w.mlm)


def test_add_requires_id_instance_of_rgx():
    w = MiniWorld(seed=7)
    w.add_clm(b"clog.org", t=100)
    with pytest.raises(RequestRejected):
        # clog.org is not an instance of .*\.net
        w.mlm.apply(AddMapping(regexset.parse(".*\\.net").key(), b"clog.org"), 200)


def test_stale_time_rejected():
    w = _world_with_clog()
    with pytest.raises(StaleTimeError):
        w.mlm.apply(EndUpdate(), 50)  # before the clm registration at t=100


def test_timestamp_signature_and_sizes():
    rng = random.Random(9)
    mlm = MappingLog(SigningKey.generate(rng))
    ts = mlm.issue_timestamp(10)
    assert (ts.dg, ts.n) == (EMPTY_DIGEST, 0)
    assert mlm.public_key.verify(timestamp_payload(ts.t, ts.dg, ts.n), ts.sig)
    other = SigningKey.generate(rng)
    assert not other.public.verify(timestamp_payload(ts.t, ts.dg, ts.n), ts.sig)

    w = _world_with_clog()
    w.map_add(".*\\.org", b"clog.org", t=200)
    ts2 = w.mlm.issue_timestamp(300)
    assert ts2.n == len(w.mlm.records)
    assert ts2.dg == w.mlm.chrono.digest()


def test_lookup_response_proofs_verify():
    w = _world_with_clog()
    w.map_add(".*\\.org", b"clog.org", t=200)
    resp = w.mlm.lookup("example.org")
    assert resp.clm_id == b"clog.org"
    assert regexset.parse(resp.rgx.decode()).matches("example.org")
    # record presence against the signed pair
    assert resp.record_proof.index == resp.ts.n - 1
    assert verify_presence(resp.ts.dg, record_leaf(resp.record), resp.record_proof)
    # mapping and maintainer entries against the record's digests
    assert ods_verify_presence(resp.record.dg_r, resp.rgx, resp.clm_id, resp.r_proof)
    assert ods_verify_presence(resp.record.dg_s, resp.clm_id, encode(resp.s_entry), resp.s_proof)


def test_lookup_unmapped_domain():
    w = _world_with_clog()
    w.map_add(".*\\.org", b"clog.org", t=200)
    with pytest.raises(NoMappingError):
        w.mlm.lookup("example.net")


def test_lookup_during_update_window_serves_old_state():
    w = _world_with_clog()
    w.map_add(".*\\.org", b"clog.org", t=200)
    before = w.mlm.serving().pair()
    # open an update batch without closing it
    w.clms[b"clog.org"].grant_rgx(regexset.parse("[a-c].*\\.org"))
    w.mlm.apply(AddMapping(regexset.parse("[a-c].*\\.org").key(), b"clog.org"), 300)
    assert w.mlm.serving().pair() == before
    resp = w.mlm.lookup("example.org")
    assert resp.ts.n == before[1]
    # closing the batch publishes it
    w.mlm.apply(EndUpdate(), 310)
    w.publish(310)
    assert w.mlm.serving().pair()[1] == before[1] + 2


def test_extension_proofs_for_all_history():
    w = _world_with_clog()
    w.map_add(".*\\.org", b"clog.org", t=200)
    serving = w.mlm.serving()
    dg_now, n_now = serving.pair()
    for n in range(n_now + 1):
        pair = (w.mlm.chrono.digest_at(n), n)
        proof = serving.prove_extension(pair)
        assert verify_extension(pair, (dg_now, n_now), proof)
    with pytest.raises(UnknownSnapshotError):
        serving.prove_extension((b"\x00" * 32, 2))


def test_blacklist_purges_everything():
    w = MiniWorld(seed=8)
    w.add_clm(b"clog.org", t=100)
    w.add_clm(b"certs.com", t=110)
    w.map_add(".*\\.org", b"clog.org", t=200)
    w.map_add(".*\\.com", b"certs.com", t=210)
    prev = w.mlm.records[-1]
    rec, bundle = w.mlm.apply(BlacklistClm(b"clog.org"), 300)
    w.mlm.apply(EndUpdate(), 300)
    w.publish(300)
    assert b"clog.org" in w.mlm.maps.bl
    assert b"clog.org" not in w.mlm.maps.s
    assert all(clm_id != b"clog.org" for _, clm_id in w.mlm.maps.r.entries())
    assert b"clog.org" not in w.mlm.maps.i
    assert rec.dg_bl != prev.dg_bl
    assert check_mlm_coherence(w.mlm)
    with pytest.raises(NoMappingError):
        w.mlm.lookup("example.org")
    # re-registering a blacklisted maintainer is refused
    clm = w.clms[b"clog.org"]
    from logpki.maplog import NewClm, clm_state_payload

    sig0 = clm.key.sign(clm_state_payload(0, EMPTY_DIGEST, 400))
    with pytest.raises(BlacklistedError):
        w.mlm.apply(NewClm(clm.cert, sig0), 400)


def test_del_mapping_mirrors_add():
    w = _world_with_clog()
    w.map_add(".*\\.org", b"clog.org", t=200)
    rec, _ = w.mlm.apply(DelMapping(regexset.parse(".*\\.org").key(), b"clog.org"), 300)
    w.mlm.apply(EndUpdate(), 300)
    assert len(list(w.mlm.maps.r.entries())) == 0
    assert w.mlm.maps.i.get(b"clog.org") == EMPTY_DIGEST
    assert check_mlm_coherence(w.mlm)
    with pytest.raises(NoMappingError):
        w.mlm.apply(DelMapping(regexset.parse(".*\\.org").key(), b"clog.org"), 400)


def test_state_record_consistency_along_history():
    w = MiniWorld(seed=10)
    w.add_clm(b"clog.org", t=100)
    w.map_add(".*\\.org", b"clog.org", t=200)
    w.add_clm(b"certs.com", t=300)
    w.map_add("[a-h].*\\.com", b"certs.com", t=400)
    for k, rec in enumerate(w.mlm.records):
        maps = w.mlm.history[k]
        assert maps.digests() == (rec.dg_s, rec.dg_bl, rec.dg_r, rec.dg_i)
        assert w.mlm.leaf(k) == record_leaf(rec)
    assert w.mlm.chrono.digest() == w.mlm.chrono.digest_at(len(w.mlm.records))


def test_mod_rotates_maintainer_certificate():
    from logpki.maplog import ModClm
    from logpki.primitives import SigningKey

    w = _world_with_clog()
    w.map_add(".*\\.org", b"clog.org", t=200)
    clm = w.clms[b"clog.org"]
    old_cert = clm.cert
    new_key = SigningKey.generate(w.rng)
    new_cert = w.issue(b"clog.org", new_key.public.bytes, old_cert.kind, 300)
    endorse = clm.key.sign(encode(new_cert))
    pair = clm.pair()
    state_sig = new_key.sign(encode((pair[1], pair[0], 300)))
    prev = w.mlm.records[-1]
    rec, bundle = w.mlm.apply(ModClm(old_cert, new_cert, endorse, pair[1], pair[0], state_sig), 300)
    w.mlm.apply(EndUpdate(), 300)
    w.publish(300)
    assert rec.dg_s != prev.dg_s
    assert (rec.dg_bl, rec.dg_r, rec.dg_i) == (prev.dg_bl, prev.dg_r, prev.dg_i)
    entry = decode(w.mlm.maps.s.get(b"clog.org"))
    assert entry.cert == new_cert and entry.n == pair[1] and entry.dg == pair[0]
    assert check_mlm_coherence(w.mlm)
    # a stranger's endorsement is refused
    other = SigningKey.generate(w.rng)
    bad_endorse = other.sign(encode(new_cert))
    from logpki.errors import RequestRejected

    newer = w.issue(b"clog.org", SigningKey.generate(w.rng).public.bytes, old_cert.kind, 400)
    with pytest.raises(RequestRejected):
        w.mlm.apply(ModClm(old_cert, newer, bad_endorse, 0, EMPTY_DIGEST, state_sig), 400)
