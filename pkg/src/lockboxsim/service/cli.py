"""Command line: deterministic scenario runs and the live server.

    lockboxsim run --scenario lock-sequence --seed 7 --out-dir out/
    lockboxsim serve --config bench.yml --tcp-port 2222 --http-port 8080
    lockboxsim scenarios
"""

from __future__ import annotations

import argparse
import os
import sys


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lockboxsim",
                                description="software-defined lockbox")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a built-in scenario deterministically")
    run.add_argument("--scenario", required=True,
                     help="one of the built-in scenario names")
    run.add_argument("--seed", type=int, default=1)
    run.add_argument("--out-dir", default=".",
                     help="directory for CSV/report artifacts")
    run.add_argument("--ticks", type=int, default=0,
                     help="extra settling ticks to run before the scenario")
    run.add_argument("--config", default=None,
                     help="optional YAML config (reserved for custom plants)")

    serve = sub.add_parser("serve", help="serve the register protocol and API")
    serve.add_argument("--config", default=None, help="YAML configuration file")
    serve.add_argument("--seed", type=int, default=1)
    serve.add_argument("--tcp-port", type=int, default=2222)
    serve.add_argument("--http-port", type=int, default=8080)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--bench", choices=["cavity"], default=None,
                       help="boot a ready-made bench (plant + calibrated "
                            "lockbox) behind the API")

    sub.add_parser("scenarios", help="list built-in scenarios")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "scenarios":
        from lockboxsim.service.runners import SCENARIOS
        for name in SCENARIOS:
            print(name)
        return 0
    if args.command == "run":
        from lockboxsim.service.runners import RUNNERS
        if args.scenario not in RUNNERS:
            print(f"unknown scenario {args.scenario!r}; "
                  f"try: {', '.join(RUNNERS)}", file=sys.stderr)
            return 2
        os.makedirs(args.out_dir, exist_ok=True)
        try:
            RUNNERS[args.scenario](seed=args.seed, out_dir=args.out_dir)
        except Exception as exc:
            print(f"scenario {args.scenario} failed: {exc}", file=sys.stderr)
            return 1
        return 0
    if args.command == "serve":
        return _serve(args)
    return 2


def _serve(args) -> int:
    import uvicorn

    from lockboxsim.engine import Engine
    from lockboxsim.service.api import create_app
    from lockboxsim.service.configio import load_config
    from lockboxsim.service.server import EngineServer
    from lockboxsim.service.tcpserver import RegmapTcpServer

    lockbox = None
    if args.bench == "cavity":
        import numpy as np

        from lockboxsim.scenarios import build_cavity_lock
        rng = np.random.default_rng(args.seed)
        theta0 = float(rng.uniform(-20, 20))
        print(f"building cavity bench (seed {args.seed}, "
              f"initial detuning {theta0:+.1f} bandwidths)...")
        engine, lockbox = build_cavity_lock(seed=args.seed, theta0=theta0)
    elif args.config:
        with open(args.config) as f:
            engine, lockbox_cfg = load_config(f.read())
        if lockbox_cfg is not None:
            from lockboxsim.lockbox.sequence import Lockbox
            lockbox = Lockbox(engine, lockbox_cfg)
    else:
        engine = Engine(seed=args.seed)
    server = EngineServer(engine)
    if lockbox is not None:
        lockbox.pump = server.pump
    server.start()
    tcp = RegmapTcpServer(server, port=args.tcp_port, host=args.host)
    tcp.start_background()
    app = create_app(server, lockbox)
    print(f"regmap TCP on {args.host}:{args.tcp_port}, "
          f"HTTP API on {args.host}:{args.http_port}")
    uvicorn.run(app, host=args.host, port=args.http_port, log_level="warning")
    server.stop()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
