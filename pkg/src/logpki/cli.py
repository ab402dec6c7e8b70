"""Command-line front end: run scenarios, audit state directories, estimate sizes.

    logpki run <scenario> [--seed S] [--out DIR] [--transcript]
    logpki audit <statedir> [--sample M --seed S]
    logpki estimate --preset paper | --param key=value ...

``run`` exits 0 iff every expectation and assertion in the scenario holds.
``audit`` exits 0 iff no record fails its audit.  Scenario names without a
path separator fall back to the bundled fixtures (honest, fake_no_log,
fake_in_log, fork_log, revocation, skip_sync, stale_mirror, blacklist,
blacklist_swap).
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import fields
from importlib import resources

from .audit import FAIL, audit_all, random_check, report_lines
from .scenario import ScenarioError, run_scenario
from .sizes import PAPER_PARAMS, SizeParams, estimate_sizes
from .statefile import load_state


def _load_scenario_text(name: str) -> str:
    if os.path.exists(name):
        with open(name, "r", encoding="utf-8") as fh:
            return fh.read()
    bundled = name if name.endswith(".scn") else name + ".scn"
    ref = resources.files("logpki") / "scenarios" / bundled
    if ref.is_file():
        return ref.read_text(encoding="utf-8")
    raise FileNotFoundError("no scenario file or bundled scenario named %r" % name)


def _cmd_run(args) -> int:
    try:
        text = _load_scenario_text(args.scenario)
    except FileNotFoundError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    try:
        result = run_scenario(text, seed=args.seed, out_dir=args.out)
    except ScenarioError as exc:
        print("scenario error: %s" % exc, file=sys.stderr)
        return 2
    if args.transcript:
        for line in result.transcript.lines():
            print(line)
    for line in result.report_lines:
        print(line)
    print("exit", result.exit_code)
    return result.exit_code


def _cmd_audit(args) -> int:
    try:
        mlog_view, clog_views = load_state(args.statedir)
    except (FileNotFoundError, ValueError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    if args.sample is not None:
        verdicts = random_check(args.seed or 0, mlog_view, clog_views, args.sample)
    else:
        verdicts = audit_all(mlog_view, clog_views)
    for line in report_lines(verdicts):
        print(line)
    failures = [v for v in verdicts if v.result == FAIL]
    print("# %d audited, %d fail" % (len(verdicts), len(failures)))
    return 1 if failures else 0


def _cmd_estimate(args) -> int:
    if args.preset == "paper" or not args.param:
        params = PAPER_PARAMS
    else:
        params = None
    if args.param:
        allowed = {f.name: f for f in fields(SizeParams)}
        overrides = {}
        for item in args.param:
            key, _, value = item.partition("=")
            if key not in allowed:
                print("error: unknown parameter %r (have: %s)" % (key, ", ".join(sorted(allowed))),
                      file=sys.stderr)
                return 2
            overrides[key] = int(value)
        from dataclasses import replace

        params = replace(PAPER_PARAMS, **overrides)
    totals = estimate_sizes(params or PAPER_PARAMS)
    for proto in ("request-mapping", "publish", "verify"):
        print("%-16s %6d bytes (%.1f KB)" % (proto, totals[proto], totals[proto] / 1024))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="logpki",
        description="Transparent log-backed PKI: scenario runner, auditor, size model.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario file (or bundled scenario name)")
    p_run.add_argument("scenario")
    p_run.add_argument("--seed", type=int, default=None, help="override the scenario's seed")
    p_run.add_argument("--out", default=None, help="write state dir + transcript + report here")
    p_run.add_argument("--transcript", action="store_true", help="print the message transcript")
    p_run.set_defaults(func=_cmd_run)

    p_audit = sub.add_parser("audit", help="audit a serialized state directory")
    p_audit.add_argument("statedir")
    p_audit.add_argument("--sample", type=int, default=None, help="random picks instead of full sweep")
    p_audit.add_argument("--seed", type=int, default=0)
    p_audit.set_defaults(func=_cmd_audit)

    p_est = sub.add_parser("estimate", help="estimate per-protocol transmitted bytes")
    p_est.add_argument("--preset", choices=["paper"], default=None)
    p_est.add_argument("--param", action="append", default=[], metavar="key=value")
    p_est.set_defaults(func=_cmd_estimate)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
