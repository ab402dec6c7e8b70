import random

from logpki import certs
from logpki.primitives import SigningKey


def _ca(seed=1):
    rng = random.Random(seed)
    return b"test-ca", SigningKey.generate(rng), rng


def test_issue_and_verify_master():
    name, key, rng = _ca()
    subject_key = SigningKey.generate(rng)
    cert = certs.issue(name, key, b"example.org", subject_key.public.bytes,
                       certs.KIND_MASTER, 7, 100, 5000)
    assert cert.kind_name() == "master"
    assert certs.issuer_sig_valid(cert)
    assert certs.in_validity(cert, 100) and certs.in_validity(cert, 5000)
    assert not certs.in_validity(cert, 99)
    assert not certs.in_validity(cert, 5001)


def test_issue_tls_and_tamper():
    name, key, rng = _ca(2)
    cert = certs.issue(name, key, b"example.org", SigningKey.generate(rng).public.bytes,
                       certs.KIND_TLS, 8, 0, 10)
    assert cert.kind_name() == "tls"
    assert certs.issuer_sig_valid(cert)
    from dataclasses import replace

    forged = replace(cert, subject=b"evil.org")
    assert not certs.issuer_sig_valid(forged)


def test_cert_key_breaks_ties_by_serial():
    name, key, rng = _ca(3)
    pk = SigningKey.generate(rng).public.bytes
    a = certs.issue(name, key, b"example.org", pk, certs.KIND_TLS, 1, 0, 10)
    b = certs.issue(name, key, b"example.org", pk, certs.KIND_TLS, 2, 0, 10)
    assert certs.cert_key(a) != certs.cert_key(b)
    c = certs.issue(name, key, b"other.org", pk, certs.KIND_TLS, 1, 0, 10)
    assert certs.cert_key(a) != certs.cert_key(c)
