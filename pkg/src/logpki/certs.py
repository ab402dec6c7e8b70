"""Certificates as self-contained signed records (no X.509).

A certificate binds a subject domain to a public key for one of three roles:
the long-term master key a domain owner uses only to endorse registrations and
revocations, an everyday TLS key, or a log maintainer's signing key.  The
issuer's verification key travels inside the certificate, so checking the one
issuer signature needs no out-of-band registry.
"""

from __future__ import annotations

from dataclasses import dataclass

from .primitives import SigningKey, VerifyKey, encode, tlv_record

KIND_MASTER = 1
KIND_TLS = 2
KIND_LOG = 3

_KIND_NAMES = {KIND_MASTER: "master", KIND_TLS: "tls", KIND_LOG: "log"}


@tlv_record(0x18)
@dataclass(frozen=True)
class Certificate:
    subject: bytes
    public_key: bytes
    kind: int
    serial: int
    not_before: int
    not_after: int
    issuer: bytes
    issuer_key: bytes
    issuer_sig: bytes

    def tbs(self) -> bytes:
        """The to-be-signed portion: everything except the issuer signature."""
        return encode(
            (
                self.subject,
                self.public_key,
                self.kind,
                self.serial,
                self.not_before,
                self.not_after,
                self.issuer,
                self.issuer_key,
            )
        )

    def kind_name(self) -> str:
        return _KIND_NAMES.get(self.kind, "unknown")


def issue(
    ca_name: bytes,
    ca_key: SigningKey,
    subject: bytes,
    public_key: bytes,
    kind: int,
    serial: int,
    not_before: int,
    not_after: int,
) -> Certificate:
    cert = Certificate(
        subject, public_key, kind, serial, not_before, not_after,
        ca_name, ca_key.public.bytes, b"",
    )
    sig = ca_key.sign(cert.tbs())
    return Certificate(
        subject, public_key, kind, serial, not_before, not_after,
        ca_name, ca_key.public.bytes, sig,
    )


def issuer_sig_valid(cert: Certificate) -> bool:
    try:
        return VerifyKey(cert.issuer_key).verify(cert.tbs(), cert.issuer_sig)
    except Exception:
        return False


def in_validity(cert: Certificate, t: int) -> bool:
    return cert.not_before <= t <= cert.not_after


def cert_key(cert: Certificate) -> bytes:
    """Ordered-map key: subject with the serial as tie-break."""
    return encode((cert.subject, cert.serial))
