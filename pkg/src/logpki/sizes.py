"""Transmitted-size model for the three client protocols.

The model mirrors each protocol's message sequence field by field: every field
costs a fixed header plus its payload, certificates and signatures cost their
parameterized sizes, and proofs cost a per-proof base plus exactly ``digest``
bytes per tree level, with ceil(log2 n) levels for a structure of n entries —
so doubling a structure adds one digest to each affected proof.

Two conventions matter when reconciling against other numbers: signature size
is a parameter (the classic public-log arithmetic assumes 256-byte signatures,
the wire here carries 64-byte ones), and the verify response's latest-record
request echo defaults to one signature term, the symbolic-crypto convention
where a sign(cert, t, 'reg') value counts once at signature size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

FIELD = 5  # tag-length-value header per field


@dataclass(frozen=True)
class SizeParams:
    # structure sizes
    clog_size: int = 10**8  # records in a certificate log
    mlog_size: int = 1000  # records in the mapping log
    rgx_count: int = 1000  # mappings in dg_r
    clm_count: int = 1000  # maintainers in dg_s
    dg_rgx_size: int = 10  # groups per certificate log
    dg_id_size: int = 10**5  # domains per group
    dg_a_size: int = 10  # active certificates per domain
    dg_rv_size: int = 100  # revoked certificates per domain
    # primitive sizes (bytes)
    cert: int = 1536
    sig: int = 256
    rgx: int = 20
    ident: int = 20
    digest: int = 32
    integer: int = 8
    # size of the latest-record request echoed inside a verify response;
    # None prices it at one signature term
    req_echo: int | None = None


#: The published evaluation assumptions.
PAPER_PARAMS = SizeParams()


def _levels(n: int) -> int:
    return math.ceil(math.log2(n)) if n > 1 else 0


def _chrono_proof(p: SizeParams, n: int) -> int:
    # proof header, index, size, path
    return 4 * FIELD + 2 * p.integer + p.digest * _levels(n)


def _ods_proof(p: SizeParams, n: int) -> int:
    # proof header, steps, terminal child digests; one digest per path level
    return 2 * FIELD + 2 * (FIELD + p.digest) + p.digest * _levels(n)


def _ext_proof(p: SizeParams, n: int) -> int:
    return 4 * FIELD + 2 * p.integer + p.digest * _levels(n)


def _signed_timestamp(p: SizeParams) -> int:
    return 5 * FIELD + 2 * p.integer + p.digest + p.sig


def _cert(p: SizeParams) -> int:
    return FIELD + p.cert


def _cached_pair(p: SizeParams) -> int:
    return 3 * FIELD + p.digest + p.integer


def _map_record(p: SizeParams) -> int:
    # the served record closes an update batch, so its request is the
    # constant end marker
    return 7 * FIELD + p.integer + 4 * p.digest


def _s_entry(p: SizeParams) -> int:
    # maintainer cert plus its signed (n, dg, t)
    return 6 * FIELD + p.cert + 2 * p.integer + p.digest + p.sig


def estimate_sizes(params: SizeParams | None = None) -> dict:
    """Per-protocol transmitted byte totals: request-mapping, publish, verify."""
    p = params or PAPER_PARAMS
    if min(
        p.clog_size, p.mlog_size, p.rgx_count, p.clm_count, p.dg_rgx_size,
        p.dg_id_size, p.dg_a_size, p.dg_rv_size,
    ) < 1:
        raise ValueError("structure sizes must be positive")

    mapping = sum(
        (
            2 * FIELD + p.ident,  # the domain-name request
            _map_record(p),  # latest record preimage
            _chrono_proof(p, p.mlog_size),  # its presence in dg_mlog
            FIELD + p.rgx,
            FIELD + p.ident,
            _ods_proof(p, p.rgx_count),  # (rgx, id) in dg_r
            _s_entry(p),
            _ods_proof(p, p.clm_count),  # (id, (cert, sig)) in dg_s
            _signed_timestamp(p),
            2 * FIELD,  # response envelope
            _cached_pair(p),
            _ext_proof(p, p.mlog_size),
        )
    )

    publish = sum(
        (
            2 * FIELD + _cert(p) + p.integer + p.sig,  # AddReq(cert, t, sig)
            # response: n_mlog, dg_rgx, dg_clog, n, rgx, dg_id, dg_a, dg_rv, sig
            10 * FIELD + 2 * p.integer + 5 * p.digest + p.rgx + p.sig,
            _chrono_proof(p, p.clog_size),  # P1
            _ods_proof(p, p.dg_rgx_size),  # P2
            _ods_proof(p, p.dg_id_size),  # P3
            _cached_pair(p),
            _ext_proof(p, p.clog_size),
        )
    )

    req_echo = p.req_echo if p.req_echo is not None else FIELD + p.sig
    verify = sum(
        (
            2 * FIELD + p.integer + 2 * _cert(p),  # VerifReq(t_a, cert, cert_m)
            req_echo,  # the latest record's request, replayed inside m
            11 * FIELD + 2 * p.integer + 5 * p.digest + p.rgx + p.sig,
            _chrono_proof(p, p.clog_size),  # P1
            _ods_proof(p, p.dg_rgx_size),  # P2
            _ods_proof(p, p.dg_id_size),  # P3
            _ods_proof(p, p.dg_a_size),  # P4
            _cached_pair(p),
            _ext_proof(p, p.clog_size),
        )
    )

    return {"request-mapping": mapping, "publish": publish, "verify": verify}


def paper_preset() -> dict:
    return estimate_sizes(PAPER_PARAMS)


def with_params(**overrides) -> SizeParams:
    return replace(PAPER_PARAMS, **overrides)
