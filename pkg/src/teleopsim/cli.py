"""Command-line entry points: run / matrix / replay / serve."""
from __future__ import annotations

import argparse
import json
import sys

from .harness import (DEFAULT_TIMEOUT, ReplayIntegrityError, replay,
                      run_matrix, run_session)
from .protocol import LinkConfig
from .world import SCENARIO_IDS


def _add_link_args(p: argparse.ArgumentParser):
    p.add_argument("--delay", type=float, default=0.0,
                   help="one-way link delay in seconds")
    p.add_argument("--jitter", type=float, default=0.0,
                   help="uniform jitter bound in seconds")
    p.add_argument("--drop", type=float, default=0.0,
                   help="per-envelope drop probability")
    p.add_argument("--seed", type=int, default=0, help="link RNG seed")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="teleopsim",
        description="Deterministic AV tele-assistance simulator")
    sub = ap.add_subparsers(dest="cmd", required=True)

    runp = sub.add_parser("run", help="run one scripted session")
    runp.add_argument("--scenario", required=True, choices=SCENARIO_IDS)
    runp.add_argument("--policy", required=True,
                      help="bundled policy name, policy file path, or "
                           "'direct_drive'")
    runp.add_argument("--log", help="write a JSONL session log here")
    runp.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT)
    _add_link_args(runp)

    matp = sub.add_parser("matrix", help="latency sweep over the catalog")
    matp.add_argument("--out", required=True, help="output CSV path")
    matp.add_argument("--delays", type=float, nargs="+",
                      default=[0.0, 0.1, 0.3, 0.5])
    matp.add_argument("--seed", type=int, default=0)
    matp.add_argument("--drop", type=float, default=0.0)
    matp.add_argument("--jitter", type=float, default=0.0)
    matp.add_argument("--no-direct", action="store_true",
                      help="skip the direct-drive baseline")

    repp = sub.add_parser("replay", help="re-run a session log and verify")
    repp.add_argument("--log", required=True)

    srvp = sub.add_parser("serve", help="serve the operator console")
    srvp.add_argument("--scenario", default="static_obstacle",
                      choices=SCENARIO_IDS)
    srvp.add_argument("--host", default="127.0.0.1")
    srvp.add_argument("--port", type=int, default=8000)
    srvp.add_argument("--tcp-port", type=int, default=0,
                      help="also expose the raw TCP envelope stream here")
    _add_link_args(srvp)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.cmd == "run":
        cfg = LinkConfig(one_way_delay=args.delay, jitter=args.jitter,
                         drop_rate=args.drop, seed=args.seed)
        res = run_session(args.scenario, args.policy, cfg,
                          timeout=args.timeout, log_path=args.log)
        print(json.dumps(res.row(), indent=2))
        return 0 if (res.resolved and res.collisions == 0) else 1
    if args.cmd == "matrix":
        results = run_matrix(args.out, delays=args.delays, seed=args.seed,
                             drop_rate=args.drop, jitter=args.jitter,
                             include_direct=not args.no_direct)
        ok = all(r.resolved and r.collisions == 0 for r in results
                 if r.policy != "direct_drive")
        print(f"wrote {args.out}: {len(results)} sessions")
        return 0 if ok else 1
    if args.cmd == "replay":
        try:
            rep = replay(args.log)
        except ReplayIntegrityError as e:
            print(f"integrity error: {e}", file=sys.stderr)
            return 2
        print(f"compared {rep.ticks_compared} ticks, "
              f"mismatches {rep.mismatches}"
              + (f" ({rep.detail})" if rep.partial else ""))
        return 0 if rep.ok else 1
    if args.cmd == "serve":
        from .server import serve
        cfg = LinkConfig(one_way_delay=args.delay, jitter=args.jitter,
                         drop_rate=args.drop, seed=args.seed)
        serve(args.scenario, cfg, host=args.host, port=args.port,
              tcp_port=args.tcp_port)
        return 0
    return 2


if __name__ == "__main__":
    raise SystemExit(main())
