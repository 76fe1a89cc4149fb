"""patvcm-bridge command line: serve task models over TCP or stdio."""

from __future__ import annotations

import argparse
import logging
import sys

from patvcm_bridge.server import MODEL_SETS, BridgeServer, self_test, serve_stream


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="patvcm-bridge")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("serve", help="answer capability requests")
    p.add_argument("--models", choices=sorted(MODEL_SETS), default="toy")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8761)
    p.add_argument("--stdio", action="store_true", help="serve one stdio connection")
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO, stream=sys.stderr)
    models = MODEL_SETS[args.models]()
    if args.stdio:
        if not self_test(models):
            logging.getLogger(__name__).warning(
                "model set failed the determinism self-test"
            )
        serve_stream(models, sys.stdin.buffer, sys.stdout.buffer)
        return 0
    server = BridgeServer(args.host, args.port, models)
    if not server.deterministic:
        logging.getLogger(__name__).warning(
            "model set failed the determinism self-test"
        )
    host, port = server.endpoint
    print(f"serving {args.models} models on {host}:{port}", file=sys.stderr)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


if __name__ == "__main__":
    sys.exit(main())
