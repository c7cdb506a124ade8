"""Run the sidecar: `mpve-sidecar [--config FILE] [--listen HOST:PORT]`."""

import argparse
import sys

import uvicorn

from mpve_sidecar.app import create_app
from mpve_sidecar.config import SidecarConfig


def main():
    ap = argparse.ArgumentParser(prog="mpve-sidecar")
    ap.add_argument("--config", default=None, help="JSON config file")
    ap.add_argument("--listen", default=None, help="host:port (overrides config)")
    args = ap.parse_args()

    cfg = SidecarConfig.load(args.config)
    listen = args.listen or cfg.listen_addr
    host, _, port = listen.rpartition(":")
    try:
        app = create_app(cfg)
    except RuntimeError as exc:
        print(f"fatal: {exc}", file=sys.stderr)
        sys.exit(1)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port), log_level="warning")


if __name__ == "__main__":
    main()
