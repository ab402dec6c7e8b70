import random

import pytest

from logpki import certs, regexset
from logpki.actors import Browser, CertificateAuthority, DomainOwner, Mirror, Transcript
from logpki.certlog import CertificateLog, reg_payload
from logpki.maplog import AddMapping, EndUpdate, MappingLog, NewClm, clm_state_payload
from logpki.primitives import EMPTY_DIGEST, SigningKey, encode
from logpki.sizes import PAPER_PARAMS, SizeParams, estimate_sizes, with_params

# the published evaluation's approximate totals
TARGETS = {"publish": 4 * 1024, "request-mapping": 3 * 1024, "verify": 5 * 1024}


def test_paper_preset_within_half_of_published_totals():
    est = estimate_sizes(PAPER_PARAMS)
    for proto, target in TARGETS.items():
        ratio = est[proto] / target
        assert 0.5 <= ratio <= 1.5, (proto, est[proto], target)


def test_all_ones_has_no_path_hashes():
    ones = with_params(clog_size=1, mlog_size=1, rgx_count=1, clm_count=1,
                       dg_rgx_size=1, dg_id_size=1, dg_a_size=1, dg_rv_size=1)
    base = estimate_sizes(ones)
    # adding one level to every structure must grow totals by exactly
    # digest-size per affected proof, so the all-ones case is the fixed floor
    twos = with_params(clog_size=2, mlog_size=2, rgx_count=2, clm_count=2,
                       dg_rgx_size=2, dg_id_size=2, dg_a_size=2, dg_rv_size=2)
    grown = estimate_sizes(twos)
    d = PAPER_PARAMS.digest
    # mapping: record PoP, dg_r PoP, dg_s PoP, extension = 4 affected proofs
    assert grown["request-mapping"] - base["request-mapping"] == 4 * d
    # publish: P1, P2, P3, extension
    assert grown["publish"] - base["publish"] == 4 * d
    # verify: P1, P2, P3, P4, extension
    assert grown["verify"] - base["verify"] == 5 * d


def test_doubling_one_tree_adds_digest_per_affected_proof():
    d = PAPER_PARAMS.digest
    base = estimate_sizes(with_params(clog_size=4))
    dbl = estimate_sizes(with_params(clog_size=8))
    assert dbl["request-mapping"] == base["request-mapping"]
    assert dbl["publish"] - base["publish"] == 2 * d  # P1 + extension
    assert dbl["verify"] - base["verify"] == 2 * d


def test_rejects_empty_structures():
    with pytest.raises(ValueError):
        estimate_sizes(with_params(mlog_size=0))


def _steady_state_world():
    rng = random.Random(71)
    mlm = MappingLog(SigningKey.generate(rng))
    ca = CertificateAuthority(b"ca1", SigningKey.generate(rng))
    clm = CertificateLog(b"clog.org", SigningKey.generate(rng))
    clm.cert = ca.issue(b"clog.org", clm.public_key.bytes, certs.KIND_LOG, 100)
    mlm.apply(NewClm(clm.cert, clm.key.sign(clm_state_payload(0, EMPTY_DIGEST, 100))), 100)
    mlm.apply(EndUpdate(), 100)
    rgx = regexset.parse(".*\\.org")
    clm.grant_rgx(rgx)
    mlm.apply(AddMapping(rgx.key(), b"clog.org"), 150)
    mlm.apply(EndUpdate(), 150)
    ts = mlm.issue_timestamp(150)
    clm.observe_mlog(ts, mlm.serving().prove_extension((clm.mlog_dg, clm.mlog_n)),
                     mlm.public_key, 150)
    mirror = Mirror("m1", mlm)
    owner = DomainOwner("bob", b"example.org", mlm.public_key)
    owner.master_key = SigningKey.generate(rng)
    owner.master_cert = ca.issue(b"example.org", owner.master_key.public.bytes,
                                 certs.KIND_MASTER, 200)
    tr = Transcript()
    assert owner.request_mapping(mirror, 200, tr).ok
    assert owner.publish(clm, owner.master_cert, 210, tr).ok
    tls_key = SigningKey.generate(rng)
    tls_cert = ca.issue(b"example.org", tls_key.public.bytes, certs.KIND_TLS, 220)
    assert owner.publish(clm, tls_cert, 220, tr).ok
    return rng, mlm, ca, clm, mirror, owner, rgx, tls_cert


def _grow_mlog(mlm, clm, mirror, rgx_text, t):
    rgx = regexset.parse(rgx_text)
    clm.grant_rgx(rgx)
    mlm.apply(AddMapping(rgx.key(), b"clog.org"), t)
    mlm.apply(EndUpdate(), t)
    ts = mlm.issue_timestamp(t)
    clm.observe_mlog(ts, mlm.serving().prove_extension((clm.mlog_dg, clm.mlog_n)),
                     mlm.public_key, t)
    mirror.refresh(mlm)


def _desk_params(mlm, clm, rgx, cert, req_echo):
    dom = clm.domains[b"example.org"]
    return SizeParams(
        clog_size=max(clm.record_count(), 1),
        mlog_size=max(mlm.serving_index, 1),
        rgx_count=max(len(mlm.maps.r), 1),
        clm_count=max(len(mlm.maps.s), 1),
        dg_rgx_size=max(len(clm.s_rgx), 1),
        dg_id_size=max(len(clm.rgx_maps[rgx.key()]), 1),
        dg_a_size=max(len(dom.active), 1),
        dg_rv_size=max(len(dom.revoked), 1),
        cert=len(encode(cert)) - 5,
        sig=64,
        rgx=len(rgx.key()),
        ident=len(b"clog.org"),
        digest=32,
        integer=2,
        req_echo=len(encode(req_echo)),
    )


def test_model_matches_desk_scale_transcripts_within_ten_percent():
    """Steady-state runs (returning clients, grown logs) vs the model."""
    rng, mlm, ca, clm, mirror, owner, rgx, tls_cert = _steady_state_world()

    # a browser that has verified once, so its caches are warm
    browser = Browser("alice", mlm.public_key)
    warm = Transcript()
    sig = owner.master_key.sign(reg_payload(tls_cert, 220, "reg"))
    assert browser.verify(mirror, lambda cid: clm, "example.org", owner.master_cert,
                          tls_cert, 220, sig, 300, warm).ok

    # the mapping log grows; the returning owner's run needs a real extension
    _grow_mlog(mlm, clm, mirror, "[a-h].*\\.org", 400)
    tr_map = Transcript()
    assert owner.request_mapping(mirror, 450, tr_map).ok
    mapping_actual = tr_map.bytes_by_protocol()["request-mapping"]
    params_map = _desk_params(mlm, clm, rgx, tls_cert, clm.records[-1].req)

    # a publish by the returning owner (its certificate-log cache is warm)
    tls_key2 = SigningKey.generate(rng)
    tls_cert2 = ca.issue(b"example.org", tls_key2.public.bytes, certs.KIND_TLS, 500)
    params_pub = _desk_params(mlm, clm, rgx, tls_cert2, clm.records[-1].req)
    tr_pub = Transcript()
    assert owner.publish(clm, tls_cert2, 500, tr_pub).ok
    publish_actual = tr_pub.bytes_by_protocol()["publish"]

    # the warm browser verifies the new certificate
    sig2 = owner.master_key.sign(reg_payload(tls_cert2, 500, "reg"))
    params_ver = _desk_params(mlm, clm, rgx, tls_cert2, clm.records[-1].req)
    tr_ver = Transcript()
    assert browser.verify(mirror, lambda cid: clm, "example.org", owner.master_cert,
                          tls_cert2, 500, sig2, 600, tr_ver).ok
    verify_actual = tr_ver.bytes_by_protocol()["verify"]

    for name, actual, params in (
        ("request-mapping", mapping_actual, params_map),
        ("publish", publish_actual, params_pub),
        ("verify", verify_actual, params_ver),
    ):
        est = estimate_sizes(params)[name]
        err = abs(est - actual) / actual
        assert err <= 0.10, (name, actual, est, err)
