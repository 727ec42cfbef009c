"""Command-line front end: rate tables/curves, code building, sessions.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import socket
import sys

import numpy as np

from . import rates as R
from .errors import CvqkdError
from .mlc.ldpc import audit_code, build_ldpc, load_code, save_code
from .session import SessionAborted, SessionConfig, load_config, run_alice, run_bob

CSV_VERSION = "qkd-rates-csv v1"
CSV_COLUMNS = ("distance_km", "i_ab_bits", "i_be_bits", "chi_be_bits",
               "d_shannon_raw", "d_holevo_raw", "d_shannon_eff", "d_holevo_eff")


def _rates_row(x, rep: R.RateReport):
    return (x, rep.i_ab, rep.i_be, rep.chi_be, rep.delta_shannon_raw,
            rep.delta_holevo_raw, rep.delta_shannon_eff, rep.delta_holevo_eff)


def cmd_rates(args) -> int:
    mod = R.Modulation(args.va)
    det = R.DetectorModel(args.eta, args.vel)
    if args.curve is None:
        ch = R.ChannelModel(args.T, args.eps)
        rep = R.secret_rates(mod, ch, det, args.rep, args.beta, args.pfail)
        kb = args.rep / 1e3
        print(f"operating point: T={args.T} eps={args.eps} eta={args.eta} "
              f"vel={args.vel} V_A={args.va} rep={args.rep:.0f} Hz "
              f"beta={args.beta} p_fail={args.pfail} seed={args.seed}")
        print(f"{'quantity':<22}{'bits/symbol':>14}{'kb/s':>12}")
        for name, v in (("I_AB", rep.i_ab), ("I_BE", rep.i_be),
                        ("chi_BE", rep.chi_be),
                        ("dI_shannon_raw", rep.delta_shannon_raw),
                        ("dI_holevo_raw", rep.delta_holevo_raw),
                        ("dI_shannon_eff", rep.delta_shannon_eff),
                        ("dI_holevo_eff", rep.delta_holevo_eff)):
            print(f"{name:<22}{v:>14.5f}{v * kb:>12.2f}")
        rows = [_rates_row(args.T, rep)]
    elif args.curve == "distance":
        grid = np.arange(args.start, args.stop + 1e-12, args.step)
        table = R.sweep_distance(grid, mod, det, args.eps, args.loss_db_km,
                                 args.rep, args.beta, args.pfail)
        rows = [_rates_row(d, rep) for d, rep in table]
        print(f"distance sweep: {len(rows)} points, seed={args.seed}")
    else:
        grid = np.arange(args.start, args.stop + 1e-12, args.step)
        ch = R.ChannelModel(args.T, args.eps)
        table = R.sweep_modulation(grid, ch, det, args.rep, args.beta,
                                   args.pfail, eps_linear_in_va=args.eps_linear)
        rows = [_rates_row(va, rep) for va, rep in table]
        print(f"modulation sweep: {len(rows)} points, seed={args.seed}")
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(f"# {CSV_VERSION}, seed={args.seed}\n")
            fh.write(",".join(CSV_COLUMNS) + "\n")
            for row in rows:
                fh.write(",".join(f"{v:.10g}" for v in row) + "\n")
        print(f"wrote {args.csv}")
    return 0


def cmd_codes(args) -> int:
    if args.action == "build":
        code = build_ldpc(args.n, args.rate, args.seed)
        save_code(code, args.out)
        print(f"built n={code.n} m={code.m} rate={code.rate} seed={code.seed} "
              f"edges={code.num_edges} -> {args.out}")
        return 0
    code = load_code(args.file)
    report = audit_code(code)
    print(json.dumps(report, indent=2))
    if not report["ok"]:
        print("AUDIT FAILED", file=sys.stderr)
        return 1
    return 0


def cmd_session(args) -> int:
    overrides = {}
    if args.blocks is not None:
        overrides["num_blocks"] = args.blocks
    if args.attack is not None:
        overrides["attack"] = args.attack.replace("-", "_")
    if args.seed is not None:
        overrides["session_seed"] = args.seed
    if args.config:
        config = load_config(args.config, overrides)
    else:
        config = SessionConfig(**{k: v for k, v in overrides.items()})

    host, port = args.address.rsplit(":", 1)
    key_path = args.key_out or f"{args.role}.key"
    sidecar = key_path + ".jsonl"
    if args.role == "bob":
        srv = socket.create_server((host, int(port)))
        conn, _ = srv.accept()
        try:
            report = run_bob(conn, config, key_path, sidecar)
        finally:
            conn.close()
            srv.close()
    else:
        conn = socket.create_connection((host, int(port)), timeout=60)
        try:
            report = run_alice(conn, config, key_path, sidecar)
        finally:
            conn.close()
    if args.report:
        with open(args.report, "w") as fh:
            fh.write(report.to_json())
    print(report.to_json())
    return 0 if report.blocks_confirmed >= 1 else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qkd",
                                 description="CV-QKD key-distillation toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rates", help="secret-rate tables and sweep curves")
    p.add_argument("--T", type=float, default=0.302)
    p.add_argument("--eps", type=float, default=0.005)
    p.add_argument("--eta", type=float, default=0.606)
    p.add_argument("--vel", type=float, default=0.041)
    p.add_argument("--va", type=float, default=18.5)
    p.add_argument("--rep", type=float, default=350e3)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--pfail", type=float, default=0.0)
    p.add_argument("--curve", choices=("distance", "va"))
    p.add_argument("--from", dest="start", type=float, default=0.0)
    p.add_argument("--to", dest="stop", type=float, default=100.0)
    p.add_argument("--step", type=float, default=1.0)
    p.add_argument("--loss-db-km", type=float, default=0.2)
    p.add_argument("--eps-linear", action="store_true",
                   help="scale eps linearly with V_A on va curves")
    p.add_argument("--csv", help="write the table as CSV")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_rates)

    p = sub.add_parser("codes", help="build or audit LDPC code files")
    p.add_argument("action", choices=("build", "audit"))
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--rate", type=float, default=0.42)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", default="code.txt")
    p.add_argument("--file", help="code file to audit")
    p.set_defaults(func=cmd_codes)

    p = sub.add_parser("session", help="run one end of a key-distillation session")
    p.add_argument("role", choices=("alice", "bob"))
    p.add_argument("address", help="host:port (bob listens, alice connects)")
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--blocks", type=int)
    p.add_argument("--attack", choices=("none", "intercept-resend"))
    p.add_argument("--seed", type=int)
    p.add_argument("--key-out")
    p.add_argument("--report")
    p.set_defaults(func=cmd_session)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CvqkdError, SessionAborted, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
