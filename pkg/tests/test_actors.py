from conftest import MiniWorld

from logpki import certs
from logpki.actors import (
    Browser,
    CertificateAuthority,
    DomainOwner,
    Mirror,
    Transcript,
)
from logpki.primitives import SigningKey


def _actor_world(seed=61):
    w = MiniWorld(seed=seed)
    w.add_clm(b"clog.org", t=100)
    w.map_add(".*\\.org", b"clog.org", t=150)
    mirror = Mirror("m1", w.mlm)
    ca = CertificateAuthority(b"ca1", SigningKey.generate(w.rng))
    tr = Transcript()
    return w, mirror, ca, tr


def _make_owner(w, ca, name, domain, t):
    owner = DomainOwner(name, domain, w.mlm.public_key)
    owner.master_key = SigningKey.generate(w.rng)
    owner.master_cert = ca.issue(domain, owner.master_key.public.bytes, certs.KIND_MASTER, t)
    return owner


def _router(w):
    return lambda clm_id: w.clms[clm_id]


def test_owner_request_mapping_advances_cache():
    w, mirror, ca, tr = _actor_world()
    owner = _make_owner(w, ca, "bob", b"example.org", 200)
    assert owner.cache.pair("mlog") == (owner.cache.get("mlog").dg, 0)
    out = owner.request_mapping(mirror, 200, tr)
    assert out.ok, out
    assert owner.mapping.clm_id == b"clog.org"
    assert owner.cache.pair("mlog")[1] == len(w.mlm.records)
    # a second run extends the first
    w.map_add("[a-h].*\\.org", b"clog.org", t=300)
    mirror.refresh()
    out2 = owner.request_mapping(mirror, 300, tr)
    assert out2.ok
    history = owner.cache.history["mlog"]
    assert history[-1][1] > history[0][1]


def test_owner_rejects_stale_timestamp():
    w, mirror, ca, tr = _actor_world()
    owner = _make_owner(w, ca, "bob", b"example.org", 200)
    mirror.frozen = True  # never refreshes; its time-stamp ages out
    far = 150 + owner.window + 10
    out = owner.request_mapping(mirror, far, tr)
    assert not out.ok and out.step == "ts-stale"


def test_owner_detects_forked_mirror():
    w, mirror, ca, tr = _actor_world()
    owner = _make_owner(w, ca, "bob", b"example.org", 200)
    assert owner.request_mapping(mirror, 200, tr).ok

    # the mirror now serves a *different* history of the same length:
    # rebuild a fake serving state with a forged chronolog
    import copy as _copy

    from logpki.chronolog import ChronoLog

    fake = w.mlm.serving()
    items = list(fake.chrono.items)
    items[0] = b"forged-record-leaf-000000000000"
    forged_chrono = ChronoLog(items)
    fake = _copy.copy(fake)
    fake.chrono = forged_chrono
    # the forger controls no MLM key, so it must reuse the honest ts; the
    # record-presence check or the extension to the cache must then fail
    mirror.copy = fake
    out = owner.request_mapping(mirror, 250, tr)
    assert not out.ok
    assert out.step in ("record-presence", "fork-alarm")


def test_publish_master_and_tls_then_browser_accepts():
    w, mirror, ca, tr = _actor_world()
    clm = w.clms[b"clog.org"]
    owner = _make_owner(w, ca, "bob", b"example.org", 200)
    assert owner.request_mapping(mirror, 200, tr).ok
    assert owner.publish(clm, owner.master_cert, 210, tr).ok

    tls_key = SigningKey.generate(w.rng)
    tls_cert = ca.issue(b"example.org", tls_key.public.bytes, certs.KIND_TLS, 220)
    owner.tls_creds[tls_cert.serial] = (tls_key, tls_cert)
    assert owner.publish(clm, tls_cert, 220, tr).ok
    assert owner.cache.pair("clog.org")[1] == 2

    browser = Browser("alice", w.mlm.public_key)
    cert_m, served, t_reg, sig = owner.serve()
    out = browser.verify(mirror, _router(w), "example.org", cert_m, served, t_reg, sig, 400, tr)
    assert out.ok, out
    assert browser.accepted == [(b"example.org", tls_cert.public_key, 400)]
    # cache monotonicity: verified extensions only, sizes never decrease
    for peer, pairs in browser.cache.history.items():
        sizes = [n for _, n in pairs]
        assert sizes == sorted(sizes)


def test_order_of_reveal_in_transcript():
    w, mirror, ca, tr = _actor_world()
    clm = w.clms[b"clog.org"]
    owner = _make_owner(w, ca, "bob", b"example.org", 200)
    owner.request_mapping(mirror, 200, tr)
    owner.publish(clm, owner.master_cert, 210, tr)
    # within every protocol run, the actor's cached pair appears only after
    # the peer's fresh response
    runs = {}
    for i, e in enumerate(tr.entries):
        runs.setdefault(e.protocol, []).append((i, e.label))
    for proto, events in runs.items():
        labels = [l for _, l in events]
        if "cached-pair" in labels:
            first_reveal = labels.index("cached-pair")
            assert any(
                l in ("mapping-response", "register-response", "verify-response")
                for l in labels[:first_reveal]
            ), proto


def test_browser_rejects_bad_master_signature():
    w, mirror, ca, tr = _actor_world()
    clm = w.clms[b"clog.org"]
    owner = _make_owner(w, ca, "bob", b"example.org", 200)
    owner.request_mapping(mirror, 200, tr)
    owner.publish(clm, owner.master_cert, 210, tr)
    tls_key = SigningKey.generate(w.rng)
    tls_cert = ca.issue(b"example.org", tls_key.public.bytes, certs.KIND_TLS, 220)
    owner.publish(clm, tls_cert, 220, tr)
    cert_m, served, t_reg, sig = owner.serve()
    bad_sig = bytes([sig[0] ^ 1]) + sig[1:]
    browser = Browser("alice", w.mlm.public_key)
    out = browser.verify(mirror, _router(w), "example.org", cert_m, served, t_reg, bad_sig, 300, tr)
    assert not out.ok and out.step == "bad-master-sig"
    assert browser.accepted == []


def test_browser_rejects_unlogged_certificate():
    # a colluding CA mints certificates that were never registered anywhere
    w, mirror, ca, tr = _actor_world()
    attacker_master_key = SigningKey.generate(w.rng)
    fake_master = ca.issue(b"example.org", attacker_master_key.public.bytes, certs.KIND_MASTER, 200)
    attacker_tls_key = SigningKey.generate(w.rng)
    fake_tls = ca.issue(b"example.org", attacker_tls_key.public.bytes, certs.KIND_TLS, 200)
    from logpki.certlog import reg_payload

    sig = attacker_master_key.sign(reg_payload(fake_tls, 200, "reg"))
    browser = Browser("alice", w.mlm.public_key)
    out = browser.verify(mirror, _router(w), "example.org", fake_master, fake_tls, 200, sig, 250, tr)
    assert not out.ok and out.step == "cert-not-active"


def test_browser_rejects_clm_with_stale_mlog_view():
    w, mirror, ca, tr = _actor_world()
    clm = w.clms[b"clog.org"]
    owner = _make_owner(w, ca, "bob", b"example.org", 200)
    owner.request_mapping(mirror, 200, tr)
    owner.publish(clm, owner.master_cert, 210, tr)
    tls_key = SigningKey.generate(w.rng)
    tls_cert = ca.issue(b"example.org", tls_key.public.bytes, certs.KIND_TLS, 220)
    owner.publish(clm, tls_cert, 220, tr)
    # the mapping log grows, but the maintainer never appends another record,
    # so its latest record now cites an older mapping-log size
    w.map_add("[a-h].*\\.org", b"clog.org", t=300)
    mirror.refresh()
    browser = Browser("alice", w.mlm.public_key)
    cert_m, served, t_reg, sig = owner.serve()
    out = browser.verify(mirror, _router(w), "example.org", cert_m, served, t_reg, sig, 400, tr)
    assert not out.ok and out.step == "clm-stale-mlog"


def test_browser_absence_check():
    w, mirror, ca, tr = _actor_world()
    clm = w.clms[b"clog.org"]
    browser = Browser("alice", w.mlm.public_key)
    out = browser.check_absence(mirror, _router(w), "nothing.org", 200, tr)
    assert out.ok and out.step == "absent"

    owner = _make_owner(w, ca, "bob", b"example.org", 200)
    owner.request_mapping(mirror, 200, tr)
    owner.publish(clm, owner.master_cert, 210, tr)
    # master only, no TLS certs: still provably no *active* certificate
    out2 = browser.check_absence(mirror, _router(w), "example.org", 300, tr)
    assert out2.ok and out2.step == "absent"

    tls_key = SigningKey.generate(w.rng)
    tls_cert = ca.issue(b"example.org", tls_key.public.bytes, certs.KIND_TLS, 310)
    owner.publish(clm, tls_cert, 310, tr)
    out3 = browser.check_absence(mirror, _router(w), "example.org", 400, tr)
    assert not out3.ok and out3.step == "present"

    out4 = browser.check_absence(mirror, _router(w), "else.where.net", 400, tr)
    assert not out4.ok and out4.step == "no-mapping"


def test_revocation_flow_with_browser():
    w, mirror, ca, tr = _actor_world()
    clm = w.clms[b"clog.org"]
    owner = _make_owner(w, ca, "bob", b"example.org", 200)
    owner.request_mapping(mirror, 200, tr)
    owner.publish(clm, owner.master_cert, 210, tr)
    tls_key = SigningKey.generate(w.rng)
    tls_cert = ca.issue(b"example.org", tls_key.public.bytes, certs.KIND_TLS, 220)
    owner.publish(clm, tls_cert, 220, tr)
    cert_m, served, t_reg, sig = owner.serve()
    browser = Browser("alice", w.mlm.public_key)

    assert browser.verify(mirror, _router(w), "example.org", cert_m, served, t_reg, sig, 300, tr).ok
    assert owner.revoke(clm, tls_cert, 400, tr).ok
    out = browser.verify(mirror, _router(w), "example.org", cert_m, served, t_reg, sig, 500, tr)
    assert not out.ok and out.step == "cert-not-active"
    # revoking an unknown certificate is refused
    stranger = ca.issue(b"example.org", SigningKey.generate(w.rng).public.bytes, certs.KIND_TLS, 400)
    out2 = owner.revoke(clm, stranger, 450, tr)
    assert not out2.ok and out2.step == "no-prior-registration"


def test_owner_blacklist_check_detects_swapped_master():
    w = MiniWorld(seed=62)
    w.add_clm(b"clog.org", t=100)
    w.add_clm(b"backup.org", t=110)
    w.map_add("[a-k].*\\.org", b"clog.org", t=150)
    mirror = Mirror("m1", w.mlm)
    ca = CertificateAuthority(b"ca1", SigningKey.generate(w.rng))
    tr = Transcript()
    clm = w.clms[b"clog.org"]
    owner = _make_owner(w, ca, "bob", b"example.org", 200)
    owner.request_mapping(mirror, 200, tr)
    owner.publish(clm, owner.master_cert, 210, tr)

    # the maintainer is terminated; its groups move to the successor
    w.map_move("[a-k].*\\.org", b"clog.org", b"backup.org", t=300)
    from logpki.maplog import BlacklistClm, EndUpdate

    w.mlm.apply(BlacklistClm(b"clog.org"), 310)
    w.mlm.apply(EndUpdate(), 310)
    w.publish(310)
    mirror.refresh()

    out = owner.check_after_blacklist(mirror, _router(w), 400, tr)
    assert out.ok, out

    # now the same story, but the successor swapped the master certificate
    successor = w.clms[b"backup.org"]
    dom = successor.domains[b"example.org"]
    attacker_key = SigningKey.generate(w.rng)
    dom.master = ca.issue(b"example.org", attacker_key.public.bytes, certs.KIND_MASTER, 400)
    value, _ = dom.value()
    id_map = successor.rgx_maps[dom.rgx_key]
    from logpki.primitives import hash_data

    id_map, _p = id_map.modify(hash_data(b"example.org"), value)
    successor.rgx_maps[dom.rgx_key] = id_map
    successor.s_rgx, _p2 = successor.s_rgx.modify(dom.rgx_key, id_map.digest())
    successor._append(successor.records[-1].req, ())  # colluder appends a cover record
    out2 = owner.check_after_blacklist(mirror, _router(w), 500, tr)
    assert not out2.ok and out2.step == "master-swapped"
    assert any(kind == "master-swapped" for _, kind, _ in owner.alarms)


def test_transcript_accounting():
    w, mirror, ca, tr = _actor_world()
    clm = w.clms[b"clog.org"]
    owner = _make_owner(w, ca, "bob", b"example.org", 200)
    owner.request_mapping(mirror, 200, tr)
    owner.publish(clm, owner.master_cert, 210, tr)
    by_proto = tr.bytes_by_protocol()
    assert by_proto["request-mapping"] > 0
    assert by_proto["publish"] > 0
    assert all(e.nbytes > 0 for e in tr.entries)
    assert tr.runs_of("request-mapping") == 1


def test_privacy_redirect_affects_routing_only():
    w, mirror, ca, tr = _actor_world(seed=63)
    clm = w.clms[b"clog.org"]
    owner = _make_owner(w, ca, "bob", b"example.org", 200)
    owner.request_mapping(mirror, 200, tr)
    owner.publish(clm, owner.master_cert, 210, tr)
    tls_key = SigningKey.generate(w.rng)
    tls_cert = ca.issue(b"example.org", tls_key.public.bytes, certs.KIND_TLS, 220)
    owner.publish(clm, tls_cert, 220, tr)
    cert_m, served, t_reg, sig = owner.serve()

    direct_tr = Transcript()
    direct = Browser("alice", w.mlm.public_key)
    out1 = direct.verify(mirror, _router(w), "example.org", cert_m, served, t_reg, sig, 300,
                         direct_tr)
    redirected_tr = Transcript()
    private = Browser("ann", w.mlm.public_key)
    out2 = private.verify(mirror, _router(w), "example.org", cert_m, served, t_reg, sig, 300,
                          redirected_tr, redirect_via="bob")
    assert out1.ok and out2.ok
    # same checks, same accept; the maintainer only ever talks to the relay
    clm_legs = [e for e in redirected_tr.entries if "clog.org" in (e.sender, e.receiver)]
    assert clm_legs and all("bob" in (e.sender, e.receiver) for e in clm_legs)
    direct_legs = [e for e in direct_tr.entries if "clog.org" in (e.sender, e.receiver)]
    assert any("alice" in (e.sender, e.receiver) for e in direct_legs)
