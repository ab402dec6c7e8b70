"""Log-state snapshots on disk, and the loaded views the audit CLI runs over.

One file per log: the record preimages, the chronological leaves, and the
per-record proof bundles, all in the canonical encoding.  A loaded mapping-log
view replays the requests structurally to rebuild the per-record ordered maps
(needed to generate the cross-check presence proofs for certificate-log
audits); the replay is self-checked against the stored record digests, so a
corrupted file yields failing or inconclusive verdicts rather than trust.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

from .maplog import (
    AddMapping,
    BlacklistClm,
    DelMapping,
    EndUpdate,
    MappingLog,
    MapRecord,
    ModClm,
    NewClm,
    SsEntry,
)
from .ordmap import OrderedMap
from .primitives import EMPTY_DIGEST, decode, encode, tlv_record

MLOG_FILE = "mlog.state"


@tlv_record(0x51)
@dataclass(frozen=True)
class LogStateFile:
    kind: str  # "mlog" | "clog"
    log_id: bytes
    records: tuple
    leaves: tuple
    bundles: tuple


def save_state(dirpath: str, mlm: MappingLog, clms) -> list:
    """Write one state file per log; returns the file names written."""
    os.makedirs(dirpath, exist_ok=True)
    written = []

    def _write(name, blob):
        path = os.path.join(dirpath, name)
        with open(path, "wb") as fh:
            fh.write(blob)
        written.append(name)

    state = LogStateFile(
        "mlog", b"mlog", tuple(mlm.records), tuple(mlm.chrono.items), tuple(mlm.bundles)
    )
    _write(MLOG_FILE, encode(state))
    for clm in clms:
        state = LogStateFile(
            "clog", clm.identity, tuple(clm.records), tuple(clm.chrono.items),
            tuple(clm.bundles),
        )
        _write("clog_%s.state" % clm.identity.decode("ascii", "replace"), encode(state))
    return written


class LoadedMlogView:
    """Audit view over a deserialized mapping log."""

    def __init__(self, state: LogStateFile):
        self.records = list(state.records)
        self.leaves = list(state.leaves)
        self.bundles = list(state.bundles)
        self._history, self._trusted = _replay_mlog(self.records)

    def record_count(self) -> int:
        return len(self.records)

    def record(self, k: int) -> MapRecord:
        return self.records[k]

    def leaf(self, k: int) -> bytes:
        return self.leaves[k]

    def bundle(self, k: int) -> tuple:
        return self.bundles[k]

    def digests_before(self, k: int):
        if k == 0:
            return (EMPTY_DIGEST,) * 4
        prev = self.records[k - 1]
        return (prev.dg_s, prev.dg_bl, prev.dg_r, prev.dg_i)

    def r_presence_at(self, k: int, rgx_key: bytes):
        if not (0 <= k < len(self._history)) or not self._trusted[k]:
            return None
        r = self._history[k]
        clm_id = r.get(rgx_key)
        if clm_id is None:
            return None
        return clm_id, r.prove_presence(rgx_key)


class LoadedClogView:
    """Audit view over a deserialized certificate log."""

    def __init__(self, state: LogStateFile):
        self.identity = state.log_id
        self.records = list(state.records)
        self.leaves = list(state.leaves)
        self.bundles = list(state.bundles)

    def record_count(self) -> int:
        return len(self.records)

    def record(self, k: int):
        return self.records[k]

    def leaf(self, k: int) -> bytes:
        return self.leaves[k]

    def bundle(self, k: int) -> tuple:
        return self.bundles[k]

    def dg_rgx_before(self, k: int) -> bytes:
        return self.records[k - 1].dg_rgx if k else EMPTY_DIGEST

    def n_mlog_before(self, k: int) -> int:
        return self.records[k - 1].n_mlog if k else 0


def _replay_mlog(records):
    """Rebuild the dg_r map after each record, flagging untrusted suffixes.

    The replay applies the structural meaning of each request without any
    validation.  A record whose stored digests disagree with the replay marks
    itself and everything after it untrusted; cross-check proofs are then
    refused for those indexes (the mapping-log audit flags the record itself).
    """
    history = []
    trusted = []
    s = OrderedMap.empty()
    bl = OrderedMap.empty()
    r = OrderedMap.empty()
    i = OrderedMap.empty()
    irgx = {}
    ok = True
    for rec in records:
        if ok:
            try:
                s, bl, r, i = _replay_step(rec, s, bl, r, i, irgx)
                if (s.digest(), bl.digest(), r.digest(), i.digest()) != (
                    rec.dg_s, rec.dg_bl, rec.dg_r, rec.dg_i
                ):
                    ok = False
            except Exception:
                ok = False
        history.append(r)
        trusted.append(ok)
    return history, trusted


def _replay_step(rec, s, bl, r, i, irgx):
    req = rec.req
    if isinstance(req, EndUpdate):
        return s, bl, r, i
    if isinstance(req, AddMapping):
        r, _ = r.insert(req.rgx, req.clm_id)
        sub, _ = irgx[req.clm_id].insert(req.rgx, b"")
        irgx[req.clm_id] = sub
        i, _ = i.modify(req.clm_id, sub.digest())
        return s, bl, r, i
    if isinstance(req, DelMapping):
        r, _ = r.delete(req.rgx)
        sub, _ = irgx[req.clm_id].delete(req.rgx)
        irgx[req.clm_id] = sub
        i, _ = i.modify(req.clm_id, sub.digest())
        return s, bl, r, i
    if isinstance(req, NewClm):
        entry = SsEntry(req.cert, 0, EMPTY_DIGEST, rec.t, req.initial_sig)
        s, _ = s.insert(req.cert.subject, encode(entry))
        i, _ = i.insert(req.cert.subject, EMPTY_DIGEST)
        irgx[req.cert.subject] = OrderedMap.empty()
        return s, bl, r, i
    if isinstance(req, ModClm):
        entry = SsEntry(req.new_cert, req.n, req.dg, rec.t, req.state_sig)
        s, _ = s.modify(req.new_cert.subject, encode(entry))
        return s, bl, r, i
    if isinstance(req, BlacklistClm):
        bl, _ = bl.insert(req.clm_id, b"")
        s, _ = s.delete(req.clm_id)
        for rgx_key, mapped in list(r.entries()):
            if mapped == req.clm_id:
                r, _ = r.delete(rgx_key)
        i, _ = i.delete(req.clm_id)
        irgx.pop(req.clm_id, None)
        return s, bl, r, i
    raise ValueError("unknown request in state file")


def load_state(dirpath: str):
    """(mlog view, [clog views]) from a state directory."""
    mlog_view = None
    clog_views = []
    for name in sorted(os.listdir(dirpath)):
        if not name.endswith(".state"):
            continue
        with open(os.path.join(dirpath, name), "rb") as fh:
            state = decode(fh.read())
        if not isinstance(state, LogStateFile):
            raise ValueError("%s is not a log state file" % name)
        if state.kind == "mlog":
            mlog_view = LoadedMlogView(state)
        else:
            clog_views.append(LoadedClogView(state))
    if mlog_view is None:
        raise FileNotFoundError("no mapping-log state in %s" % dirpath)
    return mlog_view, clog_views
