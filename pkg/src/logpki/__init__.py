"""Transparent log-backed PKI: authenticated logs, maintainers, clients, audits.

The usual entry points:

* data structures: :class:`logpki.chronolog.ChronoLog`,
  :class:`logpki.ordmap.OrderedMap`
* maintainers: :class:`logpki.maplog.MappingLog`,
  :class:`logpki.certlog.CertificateLog`
* clients: :class:`logpki.actors.DomainOwner`, :class:`logpki.actors.Browser`
* verification: :mod:`logpki.audit`
* simulation: :func:`logpki.scenario.run_scenario_file`, ``logpki`` CLI
"""

from .actors import Browser, CertificateAuthority, DomainOwner, Mirror, Transcript
from .audit import KeyOracle, audit_all, gossip_compare, random_check
from .certlog import CertificateLog
from .chronolog import ChronoLog
from .maplog import MappingLog
from .ordmap import OrderedMap
from .scenario import run_scenario, run_scenario_file
from .sizes import PAPER_PARAMS, SizeParams, estimate_sizes

__version__ = "0.1.0"

__all__ = [
    "Browser",
    "CertificateAuthority",
    "CertificateLog",
    "ChronoLog",
    "DomainOwner",
    "KeyOracle",
    "MappingLog",
    "Mirror",
    "OrderedMap",
    "PAPER_PARAMS",
    "SizeParams",
    "Transcript",
    "audit_all",
    "estimate_sizes",
    "gossip_compare",
    "random_check",
    "run_scenario",
    "run_scenario_file",
]
