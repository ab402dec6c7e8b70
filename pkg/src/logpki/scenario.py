"""Scenario-driven simulation: a declarative script drives the whole world.

A scenario file is line-oriented text: actor declarations, time-ordered
actions (mapping changes, issuance, publication, verification, attacks), and
final assertions over audits, alarms, and the ground-truth key oracle.  Runs
are bit-reproducible for a given (file, seed): all key material derives from
the seeded generator and the virtual clock comes from the ``at`` values.

Attack actions model the adversary of the threat analysis: a compromised CA,
a colluding maintainer willing to rewrite its own structures, forked logs
served selectively to victims, maintainers that skip mapping synchronisation,
and frozen mirrors.  Expected rejections and expected detections are
assertions like any other, so an attack scenario exits 0 exactly when the
defence behaves as documented.
"""

from __future__ import annotations

import copy
import random
from dataclasses import dataclass

from . import audit as audit_mod
from . import certs, regexset
from .actors import (
    Browser,
    CertificateAuthority,
    DomainOwner,
    Mirror,
    Transcript,
)
from .audit import FAIL, PASS, KeyOracle, audit_all, gossip_compare
from .certlog import CertificateLog, UpAdd, reg_payload
from .errors import RequestRejected
from .maplog import (
    AddMapping,
    BlacklistClm,
    DelMapping,
    EndUpdate,
    MappingLog,
    NewClm,
    clm_state_payload,
)
from .primitives import EMPTY_DIGEST, SigningKey, hash_data
from .statefile import save_state


class ScenarioError(Exception):
    """Parse error or unresolved reference in a scenario file."""


@dataclass
class Action:
    t: int
    verb: str
    args: list
    expect: str | None
    line_no: int


@dataclass
class Scenario:
    seed: int
    mirrors: list
    cas: list
    clms: list
    owners: list  # (name, domain)
    browsers: list
    actions: list
    asserts: list  # (kind, args, line_no)


def parse_scenario(text: str) -> Scenario:
    seed = 0
    mirrors, cas, clms, owners, browsers = [], [], [], [], []
    actions, asserts = [], []
    last_t = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        head = tok[0]
        try:
            if head == "seed":
                seed = int(tok[1])
            elif head == "mirror":
                mirrors.append(tok[1])
            elif head == "ca":
                cas.append(tok[1])
            elif head == "clm":
                clms.append(tok[1])
            elif head == "owner":
                owners.append((tok[1], tok[2]))
            elif head == "browser":
                browsers.append(tok[1])
            elif head == "at":
                t = int(tok[1])
                if last_t is not None and t < last_t:
                    raise ScenarioError("line %d: actions must be time-ordered" % line_no)
                last_t = t
                rest = tok[2:]
                expect = None
                if "expect" in rest:
                    cut = rest.index("expect")
                    expect = " ".join(rest[cut + 1 :])
                    rest = rest[:cut]
                actions.append(Action(t, rest[0], rest[1:], expect, line_no))
            elif head == "assert":
                asserts.append((tok[1], tok[2:], line_no))
            else:
                raise ScenarioError("line %d: unknown directive %r" % (line_no, head))
        except (IndexError, ValueError) as exc:
            raise ScenarioError("line %d: %s" % (line_no, raw.strip())) from exc
    return Scenario(seed, mirrors, cas, clms, owners, browsers, actions, asserts)


@dataclass
class AssertionResult:
    where: str
    expected: str
    actual: str
    ok: bool

    def line(self) -> str:
        return "%s,%s,expected=%s,actual=%s" % (
            "ok" if self.ok else "FAILED", self.where, self.expected, self.actual
        )


@dataclass
class RunResult:
    exit_code: int
    assertions: list
    transcript: Transcript
    report_lines: list
    world: "World"


class World:
    """Everything a scenario run wires together."""

    def __init__(self, scenario: Scenario, seed: int | None = None):
        self.rng = random.Random(scenario.seed if seed is None else seed)
        self.mlm = MappingLog(SigningKey.generate(self.rng))
        self.transcript = Transcript()
        self.oracle = KeyOracle()
        self.mirrors = {name: Mirror(name, self.mlm) for name in scenario.mirrors}
        self.cas = {
            name: CertificateAuthority(name.encode(), SigningKey.generate(self.rng))
            for name in scenario.cas
        }
        self.clms: dict[bytes, CertificateLog] = {}
        for ident in scenario.clms:
            self.clms[ident.encode()] = CertificateLog(ident.encode(), SigningKey.generate(self.rng))
        self.owners = {}
        for name, domain in scenario.owners:
            self.owners[name] = DomainOwner(name, domain.encode(), self.mlm.public_key)
        self.browsers = {name: Browser(name, self.mlm.public_key) for name in scenario.browsers}
        self.domain_owner = {domain.encode(): name for name, domain in scenario.owners}
        # adversary state
        self.twins: dict[tuple, CertificateLog] = {}  # (victim, clm id) -> fork
        self.skip_sync: set = set()
        self.swap_master: dict = {}  # (successor id, domain) -> attacker CA name
        self.fake_chains: dict = {}  # domain -> (cert_m, tls, t_reg, sig)
        self.oracle_violations: list = []
        self.assertions: list = []

    # -- plumbing ---------------------------------------------------------------

    def router_for(self, actor_name: str):
        def route(clm_id: bytes) -> CertificateLog:
            twin = self.twins.get((actor_name, clm_id))
            if twin is not None:
                return twin
            clm = self.clms.get(clm_id)
            if clm is None:
                raise ScenarioError("no maintainer %r" % clm_id)
            return clm

        return route

    def default_mirror(self) -> Mirror:
        if not self.mirrors:
            raise ScenarioError("scenario declares no mirror")
        return next(iter(self.mirrors.values()))

    def refresh(self, t: int):
        """Fresh signed time-stamp; honest mirrors and maintainers catch up."""
        ts = self.mlm.issue_timestamp(t)
        for mirror in self.mirrors.values():
            mirror.refresh(self.mlm)
        for clm in self.clms.values():
            if (clm.mlog_dg, clm.mlog_n) != (ts.dg, ts.n):
                proof = self.mlm.serving().prove_extension((clm.mlog_dg, clm.mlog_n))
                clm.observe_mlog(ts, proof, self.mlm.public_key, t)

    def clm_of(self, token: str) -> CertificateLog:
        clm = self.clms.get(token.encode())
        if clm is None:
            raise ScenarioError("unknown maintainer %r" % token)
        return clm

    def owner_of(self, name: str) -> DomainOwner:
        owner = self.owners.get(name)
        if owner is None:
            raise ScenarioError("unknown owner %r" % name)
        return owner

    def browser_of(self, name: str) -> Browser:
        browser = self.browsers.get(name)
        if browser is None:
            raise ScenarioError("unknown browser %r" % name)
        return browser

    def ca_of(self, name: str) -> CertificateAuthority:
        ca = self.cas.get(name)
        if ca is None:
            raise ScenarioError("unknown certificate authority %r" % name)
        return ca

    def actor_cache(self, name: str):
        if name in self.browsers:
            return self.browsers[name].cache
        if name in self.owners:
            return self.owners[name].cache
        raise ScenarioError("unknown actor %r" % name)

    def check_accept_against_oracle(self, browser: Browser):
        domain, pk, t_a = browser.accepted[-1]
        status = self.oracle.status(domain, pk, t_a)
        if status != audit_mod.ORACLE_ACTIVE:
            self.oracle_violations.append(
                "%s accepted %s key for %s at t=%d but ground truth says %s"
                % (browser.name, pk.hex()[:12], domain.decode(), t_a, status)
            )


class Runner:
    def __init__(self, scenario: Scenario, seed: int | None = None):
        self.scenario = scenario
        self.world = World(scenario, seed)

    # -- mapping-side orchestration -----------------------------------------------

    def _register_clm(self, w: World, t: int, clm: CertificateLog, ca: CertificateAuthority):
        clm.cert = ca.issue(clm.identity, clm.public_key.bytes, certs.KIND_LOG, t)
        sig0 = clm.key.sign(clm_state_payload(0, EMPTY_DIGEST, t))
        w.mlm.apply(NewClm(clm.cert, sig0), t)
        w.mlm.apply(EndUpdate(), t)

    def _transfer_domain(self, w: World, src: CertificateLog, dst: CertificateLog,
                         domain: bytes, t: int, sync_refs: list):
        _, export, h = src.sync_updel(domain)
        sync_refs.append((src, src.record_count() - 1, "out"))
        swap_ca = w.swap_master.get((dst.identity, domain))
        if swap_ca is not None:
            # colluding successor: swap the master certificate in the import
            # and recompute the announced hash so the integrity check passes
            from .certlog import DomainImport, domain_value
            from .ordmap import OrderedMap

            attacker_key = SigningKey.generate(w.rng)
            fake_master = w.cas[swap_ca].issue(domain, attacker_key.public.bytes,
                                               certs.KIND_MASTER, t)
            export = DomainImport(domain, fake_master, export.active_entries,
                                  export.revoked_entries)
            active = OrderedMap.from_entries(export.active_entries)
            revoked = OrderedMap.from_entries(export.revoked_entries)
            h, _ = domain_value(fake_master, active.digest(), revoked.digest())
        dst.sync_upadd(export, h)
        sync_refs.append((dst, dst.record_count() - 1, "in"))

    def _attach_sync_refs(self, sync_refs, out_index: int, in_index: int):
        for clm, rec_index, direction in sync_refs:
            clm.attach_bundle_item(rec_index, "mlog_ref",
                                   out_index if direction == "out" else in_index)

    def _domains_under(self, clm: CertificateLog, rgx: regexset.Rgx):
        return [d for d, dom in clm.domains.items() if dom.rgx_key == rgx.key()]

    # -- actions ----------------------------------------------------------------------

    def run(self, out_dir: str | None = None) -> RunResult:
        w = self.world
        for action in self.scenario.actions:
            self._dispatch(w, action)
        self._final_asserts(w)

        report = self._report(w)
        exit_code = 0 if all(a.ok for a in w.assertions) else 1
        if out_dir is not None:
            save_state(out_dir, w.mlm, list(w.clms.values()))
            import os

            with open(os.path.join(out_dir, "transcript.txt"), "w") as fh:
                fh.write("\n".join(w.transcript.lines()) + "\n")
            with open(os.path.join(out_dir, "report.txt"), "w") as fh:
                fh.write("\n".join(report) + "\n")
        return RunResult(exit_code, w.assertions, w.transcript, report, w)

    def _expect(self, w: World, action: Action, actual: str):
        if action.expect is None:
            if actual not in ("ok", "accept", "absent", "consistent", "done"):
                raise ScenarioError(
                    "line %d: %s failed with %r and no expectation given"
                    % (action.line_no, action.verb, actual)
                )
            return
        ok = actual == action.expect
        w.assertions.append(
            AssertionResult("line-%d:%s@%d" % (action.line_no, action.verb, action.t),
                            action.expect, actual, ok)
        )

    def _dispatch(self, w: World, action: Action):
        w.refresh(action.t)
        handler = getattr(self, "_do_" + action.verb.replace("-", "_"), None)
        if handler is None:
            raise ScenarioError("line %d: unknown action %r" % (action.line_no, action.verb))
        handler(w, action)

    # mapping administration

    def _do_clm_register(self, w, action):
        clm = w.clm_of(action.args[0])
        ca = w.ca_of(action.args[2]) if len(action.args) > 2 else next(iter(w.cas.values()))
        self._register_clm(w, action.t, clm, ca)
        w.refresh(action.t)
        self._expect(w, action, "done")

    def _do_map_add(self, w, action):
        rgx = regexset.parse(action.args[0])
        clm = w.clm_of(action.args[1])
        clm.grant_rgx(rgx)
        try:
            w.mlm.apply(AddMapping(rgx.key(), clm.identity), action.t)
            w.mlm.apply(EndUpdate(), action.t)
            actual = "done"
        except RequestRejected as exc:
            clm.withdraw_rgx(rgx)
            actual = exc.label
        w.refresh(action.t)
        self._expect(w, action, actual)

    def _do_map_del(self, w, action):
        rgx = regexset.parse(action.args[0])
        clm = w.clm_of(action.args[1])
        sync_refs = []
        if clm.identity not in w.skip_sync:
            for domain in self._domains_under(clm, rgx):
                _, export, h = clm.sync_updel(domain)
                sync_refs.append((clm, clm.record_count() - 1, "out"))
            clm.withdraw_rgx(rgx)
        w.mlm.apply(DelMapping(rgx.key(), clm.identity), action.t)
        del_index = w.mlm.record_count() - 1
        w.mlm.apply(EndUpdate(), action.t)
        self._attach_sync_refs(sync_refs, del_index, del_index)
        w.refresh(action.t)
        self._expect(w, action, "done")

    def _do_map_move(self, w, action):
        rgx = regexset.parse(action.args[0])
        src, dst = w.clm_of(action.args[1]), w.clm_of(action.args[2])
        sync_refs = []
        dst.grant_rgx(rgx)
        if src.identity not in w.skip_sync:
            for domain in self._domains_under(src, rgx):
                self._transfer_domain(w, src, dst, domain, action.t, sync_refs)
            src.withdraw_rgx(rgx)
        w.mlm.apply(DelMapping(rgx.key(), src.identity), action.t)
        del_index = w.mlm.record_count() - 1
        w.mlm.apply(AddMapping(rgx.key(), dst.identity), action.t)
        add_index = w.mlm.record_count() - 1
        w.mlm.apply(EndUpdate(), action.t)
        self._attach_sync_refs(sync_refs, del_index, add_index)
        w.refresh(action.t)
        self._expect(w, action, "done")

    def _do_blacklist(self, w, action):
        bad = w.clm_of(action.args[0])
        successor = w.clm_of(action.args[1]) if len(action.args) > 1 else None
        sync_refs = []
        moved_groups = [k for k, v in w.mlm.maps.r.entries() if v == bad.identity]
        if successor is not None:
            for rgx_key in moved_groups:
                rgx = regexset.parse(rgx_key.decode("ascii"))
                successor.grant_rgx(rgx)
                if bad.identity not in w.skip_sync:
                    for domain in self._domains_under(bad, rgx):
                        self._transfer_domain(w, bad, successor, domain, action.t, sync_refs)
                    bad.withdraw_rgx(rgx)
        w.mlm.apply(BlacklistClm(bad.identity), action.t)
        bl_index = w.mlm.record_count() - 1
        add_indexes = {}
        if successor is not None:
            for rgx_key in moved_groups:
                w.mlm.apply(AddMapping(rgx_key, successor.identity), action.t)
                add_indexes[rgx_key] = w.mlm.record_count() - 1
        w.mlm.apply(EndUpdate(), action.t)
        for clm, rec_index, direction in sync_refs:
            if direction == "out":
                clm.attach_bundle_item(rec_index, "mlog_ref", bl_index)
            else:
                rgx_key = dict(clm.bundle(rec_index))["rgx"]
                clm.attach_bundle_item(rec_index, "mlog_ref", add_indexes[rgx_key])
        w.refresh(action.t)
        self._expect(w, action, "done")

    # issuance

    def _do_issue_master(self, w, action):
        owner = w.owner_of(action.args[0])
        ca = w.ca_of(action.args[2])
        owner.master_key = SigningKey.generate(w.rng)
        owner.master_cert = ca.issue(owner.domain, owner.master_key.public.bytes,
                                     certs.KIND_MASTER, action.t)
        self._expect(w, action, "done")

    def _do_issue_tls(self, w, action):
        owner = w.owner_of(action.args[0])
        ca = w.ca_of(action.args[2])
        key = SigningKey.generate(w.rng)
        cert = ca.issue(owner.domain, key.public.bytes, certs.KIND_TLS, action.t)
        owner.tls_creds[cert.serial] = (key, cert)
        self._expect(w, action, "done")

    # client protocols

    def _do_request_mapping(self, w, action):
        name = action.args[0]
        actor = w.owners.get(name) or w.browsers.get(name)
        if isinstance(actor, DomainOwner):
            out = actor.request_mapping(w.default_mirror(), action.t, w.transcript)
            self._expect(w, action, "ok" if out.ok else out.step)
        else:
            raise ScenarioError("request-mapping expects an owner")

    def _publish(self, w, action, cert):
        owner = w.owner_of(action.args[0])
        out = owner.request_mapping(w.default_mirror(), action.t, w.transcript)
        if not out.ok:
            self._expect(w, action, out.step)
            return
        clm = w.router_for(owner.name)(owner.mapping.clm_id)
        out = owner.publish(clm, cert, action.t, w.transcript)
        if out.ok:
            w.oracle.record_registration(owner.domain, cert.public_key, action.t)
        self._expect(w, action, "ok" if out.ok else out.step)

    def _do_publish_master(self, w, action):
        owner = w.owner_of(action.args[0])
        if owner.master_cert is None:
            raise ScenarioError("line %d: no master certificate issued" % action.line_no)
        self._publish(w, action, owner.master_cert)

    def _latest_tls(self, owner, args):
        if len(args) > 1:
            serial = int(args[1])
        elif owner.tls_creds:
            serial = max(owner.tls_creds)
        else:
            raise ScenarioError("no tls certificate issued for %s" % owner.name)
        return owner.tls_creds[serial][1]

    def _do_publish_tls(self, w, action):
        owner = w.owner_of(action.args[0])
        self._publish(w, action, self._latest_tls(owner, action.args))

    def _do_revoke_tls(self, w, action):
        owner = w.owner_of(action.args[0])
        cert = self._latest_tls(owner, action.args)
        out = owner.request_mapping(w.default_mirror(), action.t, w.transcript)
        if out.ok:
            clm = w.router_for(owner.name)(owner.mapping.clm_id)
            out = owner.revoke(clm, cert, action.t, w.transcript)
            if out.ok:
                w.oracle.record_revocation(owner.domain, cert.public_key, action.t)
        self._expect(w, action, "ok" if out.ok else out.step)

    def _do_revoke_master(self, w, action):
        owner = w.owner_of(action.args[0])
        out = owner.request_mapping(w.default_mirror(), action.t, w.transcript)
        if out.ok:
            clm = w.router_for(owner.name)(owner.mapping.clm_id)
            out = owner.revoke(clm, owner.master_cert, action.t, w.transcript)
            if out.ok:
                w.oracle.record_revocation(owner.domain, owner.master_cert.public_key, action.t)
        self._expect(w, action, "ok" if out.ok else out.step)

    def _do_verify(self, w, action):
        browser = w.browser_of(action.args[0])
        domain = action.args[1]
        owner_name = w.domain_owner.get(domain.encode())
        if owner_name is None:
            raise ScenarioError("no owner declared for %s" % domain)
        owner = w.owner_of(owner_name)
        cert_m, tls_cert, t_reg, sig = owner.serve()
        out = browser.verify(w.default_mirror(), w.router_for(browser.name), domain,
                             cert_m, tls_cert, t_reg, sig, action.t, w.transcript)
        if out.ok:
            w.check_accept_against_oracle(browser)
        self._expect(w, action, "accept" if out.ok else "reject:%s" % out.step)

    def _do_check_absence(self, w, action):
        browser = w.browser_of(action.args[0])
        out = browser.check_absence(w.default_mirror(), w.router_for(browser.name),
                                    action.args[1], action.t, w.transcript)
        self._expect(w, action, out.step)

    def _do_owner_check(self, w, action):
        owner = w.owner_of(action.args[0])
        out = owner.check_after_blacklist(w.default_mirror(), w.router_for(owner.name),
                                          action.t, w.transcript)
        self._expect(w, action, "ok" if out.ok else out.step)

    def _do_gossip(self, w, action):
        a, b, log_token = action.args[0], action.args[1], action.args[2]
        pair_a = w.actor_cache(a).pair(log_token)
        pair_b = w.actor_cache(b).pair(log_token)
        prover = w.mlm if log_token == "mlog" else w.clm_of(log_token)
        verdict = gossip_compare(pair_a, pair_b, prover)
        self._expect(w, action, verdict)

    # attacks

    def _do_attack(self, w, action):
        directive = action.args[0]
        rest = action.args[1:]
        if directive == "fake-cert-no-log":
            self._attack_fake_no_log(w, action, rest)
        elif directive == "fake-cert-in-log":
            self._attack_fake_in_log(w, action, rest)
        elif directive == "fork-log":
            self._attack_fork(w, action, rest)
        elif directive == "skip-sync":
            w.skip_sync.add(w.clm_of(rest[0]).identity)
            self._expect(w, action, "done")
        elif directive == "stale-timestamp":
            mirror = w.mirrors.get(rest[0])
            if mirror is None:
                raise ScenarioError("unknown mirror %r" % rest[0])
            mirror.frozen = True
            self._expect(w, action, "done")
        elif directive == "swap-master-on-blacklist":
            successor = w.clm_of(rest[0])
            domain = rest[1].encode()
            ca_name = rest[3] if len(rest) > 3 else next(iter(w.cas))
            w.swap_master[(successor.identity, domain)] = ca_name
            self._expect(w, action, "done")
        elif directive == "rogue-register":
            self._attack_rogue_register(w, action, rest)
        else:
            raise ScenarioError("line %d: unknown attack %r" % (action.line_no, directive))

    def _attack_fake_no_log(self, w, action, rest):
        browser = w.browser_of(rest[0])
        domain = rest[1]
        ca = w.ca_of(rest[3])
        master_key = SigningKey.generate(w.rng)
        fake_master = ca.issue(domain.encode(), master_key.public.bytes, certs.KIND_MASTER, action.t)
        tls_key = SigningKey.generate(w.rng)
        fake_tls = ca.issue(domain.encode(), tls_key.public.bytes, certs.KIND_TLS, action.t)
        sig = master_key.sign(reg_payload(fake_tls, action.t, "reg"))
        w.fake_chains[domain.encode()] = (fake_master, fake_tls, action.t, sig)
        out = browser.verify(w.default_mirror(), w.router_for(browser.name), domain,
                             fake_master, fake_tls, action.t, sig, action.t, w.transcript)
        if out.ok:
            w.check_accept_against_oracle(browser)
        self._expect(w, action, "accept" if out.ok else "reject:%s" % out.step)

    def _attack_fake_in_log(self, w, action, rest):
        """Colluding CA + maintainer force a fake master into the log and
        register an attacker TLS certificate under it."""
        clm = w.clm_of(rest[0])
        domain = rest[1].encode()
        ca = w.ca_of(rest[3])
        master_key = SigningKey.generate(w.rng)
        fake_master = ca.issue(domain, master_key.public.bytes, certs.KIND_MASTER, action.t)
        sig = master_key.sign(reg_payload(fake_master, action.t, "reg"))
        self._force_master_overwrite(clm, fake_master, action.t, sig)
        tls_key = SigningKey.generate(w.rng)
        fake_tls = ca.issue(domain, tls_key.public.bytes, certs.KIND_TLS, action.t)
        tls_sig = master_key.sign(reg_payload(fake_tls, action.t, "reg"))
        clm.register(fake_tls, action.t, tls_sig, now=action.t)
        w.fake_chains[domain] = (fake_master, fake_tls, action.t, tls_sig)
        self._expect(w, action, "done")

    def _force_master_overwrite(self, clm: CertificateLog, cert, t, sig):
        """What a colluding maintainer does: replace a live master entry.

        The record and its bundle are exactly what an honest rotation would
        produce minus the justification, which is what the audit flags."""
        dom = clm.domains[cert.subject]
        bundle = [("rgx", dom.rgx_key), ("preimage_before", dom.value()[1])]
        dom.master = cert
        value, preimage = dom.value()
        bundle.append(("preimage_after", preimage))
        bundle += clm._set_id_entry(dom.rgx_key, hash_data(cert.subject), value)
        from .certlog import RegRequest

        clm._append(RegRequest(cert, t, sig), bundle)
        from .certs import cert_key

        dom.reg_info[cert_key(cert)] = (cert, t, cert.public_key, len(clm.records) - 1)

    def _attack_fork(self, w, action, rest):
        clm = w.clm_of(rest[0])
        if "after" in rest:
            # the divergence point; the simulation stages forks in the present,
            # so the index must name the log's current size
            after = int(rest[rest.index("after") + 1])
            if after != clm.record_count():
                raise ScenarioError(
                    "line %d: fork-log after %d, but the log is at %d"
                    % (action.line_no, after, clm.record_count())
                )
        victims = rest[rest.index("victims") + 1 :] if "victims" in rest else []
        twin = copy.deepcopy(clm)
        # the twin's history silently diverges by one fabricated sync record
        twin._append(UpAdd(hash_data(b"fork-cover-%d" % action.t), EMPTY_DIGEST), ())
        for victim in victims:
            w.twins[(victim, clm.identity)] = twin
        self._expect(w, action, "done")

    def _attack_rogue_register(self, w, action, rest):
        """A maintainer keeps serving a group the mapping log took away."""
        clm = w.clm_of(rest[0])
        domain = rest[1].encode()
        ca = w.ca_of(rest[3])
        master_key = SigningKey.generate(w.rng)
        cert = ca.issue(domain, master_key.public.bytes, certs.KIND_MASTER, action.t)
        sig = master_key.sign(reg_payload(cert, action.t, "reg"))
        try:
            clm.register(cert, action.t, sig, now=action.t)
            actual = "done"
        except RequestRejected as exc:
            actual = exc.label
        self._expect(w, action, actual)

    def _do_verify_attacker(self, w, action):
        """The browser receives the attacker-served chain for the domain."""
        browser = w.browser_of(action.args[0])
        domain = action.args[1]
        chain = w.fake_chains.get(domain.encode())
        if chain is None:
            raise ScenarioError("line %d: no attack staged for %s" % (action.line_no, domain))
        cert_m, tls_cert, t_reg, sig = chain
        out = browser.verify(w.default_mirror(), w.router_for(browser.name), domain,
                             cert_m, tls_cert, t_reg, sig, action.t, w.transcript)
        if out.ok:
            w.check_accept_against_oracle(browser)
        self._expect(w, action, "accept" if out.ok else "reject:%s" % out.step)

    # -- final assertions --------------------------------------------------------------

    def _final_asserts(self, w: World):
        self._verdicts = audit_all(w.mlm, list(w.clms.values()))
        for kind, args, line_no in self.scenario.asserts:
            where = "line-%d:assert-%s" % (line_no, kind)
            if kind == "audits":
                want = args[0]
                fails = sorted({(v.log_id, v.index) for v in self._verdicts if v.result != PASS})
                if want == "all-pass":
                    w.assertions.append(AssertionResult(where, "all-pass",
                                                        "all-pass" if not fails else str(fails),
                                                        not fails))
                elif want == "detect":
                    target = args[1]
                    hit = any(v.log_id == target and v.result == FAIL for v in self._verdicts)
                    w.assertions.append(AssertionResult(where, "detect:%s" % target,
                                                        "detected" if hit else "not-detected", hit))
                else:
                    raise ScenarioError("line %d: unknown audits assertion" % line_no)
            elif kind == "oracle":
                want = args[0]
                violated = bool(w.oracle_violations)
                if want == "consistent":
                    w.assertions.append(AssertionResult(
                        where, "consistent",
                        "consistent" if not violated else ";".join(w.oracle_violations),
                        not violated))
                elif want == "violated":
                    w.assertions.append(AssertionResult(
                        where, "violated", "violated" if violated else "consistent", violated))
                else:
                    raise ScenarioError("line %d: unknown oracle assertion" % line_no)
            elif kind == "alarms":
                want = args[0]
                all_alarms = []
                for actor in list(w.owners.values()) + list(w.browsers.values()):
                    for t, alarm_kind, detail in actor.alarms:
                        all_alarms.append((actor.name, alarm_kind))
                if want == "none":
                    w.assertions.append(AssertionResult(
                        where, "none", "none" if not all_alarms else str(sorted(all_alarms)),
                        not all_alarms))
                else:
                    raise ScenarioError("line %d: unknown alarms assertion" % line_no)
            elif kind == "alarm":
                alarm_kind, actor_name = args[0], args[1]
                actor = w.owners.get(actor_name) or w.browsers.get(actor_name)
                hit = actor is not None and any(k == alarm_kind for _, k, _ in actor.alarms)
                w.assertions.append(AssertionResult(where, "%s@%s" % (alarm_kind, actor_name),
                                                    "raised" if hit else "absent", hit))
            else:
                raise ScenarioError("line %d: unknown assertion %r" % (line_no, kind))

    def _report(self, w: World) -> list:
        lines = ["# audit verdicts (log,index,verdict,check)"]
        lines += [v.line() for v in self._verdicts]
        lines.append("# oracle")
        if w.oracle_violations:
            lines += ["violation: %s" % v for v in w.oracle_violations]
        else:
            lines.append("consistent")
        lines.append("# assertions")
        lines += [a.line() for a in w.assertions]
        return lines


def run_scenario(text: str, seed: int | None = None, out_dir: str | None = None) -> RunResult:
    scenario = parse_scenario(text)
    return Runner(scenario, seed).run(out_dir)


def run_scenario_file(path: str, seed: int | None = None, out_dir: str | None = None) -> RunResult:
    with open(path, "r", encoding="utf-8") as fh:
        return run_scenario(fh.read(), seed=seed, out_dir=out_dir)
