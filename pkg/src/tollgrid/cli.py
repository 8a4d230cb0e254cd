"""Command-line entry points.

`tollgrid` runs the long-lived processes (broker, the three services, the
traffic simulator, the HTTP gateway), `tollgrid-gen` writes deterministic
road-network and zone fixtures, and `tollgrid-bench` drives the latency
benchmark. Every long-running command accepts `--run-seconds` for bounded
smoke runs; without it they serve until interrupted.

Exit codes: 0 success, 2 bad arguments/unreachable broker/unreadable files,
and for the bench additionally 1 (invariant check failed) or 3 (timed out).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import threading
import time

logger = logging.getLogger(__name__)

DEFAULT_BROKER = "127.0.0.1:4333"
DEFAULT_HTTP_BIND = "127.0.0.1:8080"


def parse_address(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not host:
        raise argparse.ArgumentTypeError("expected HOST:PORT, got %r" % text)
    try:
        number = int(port)
    except ValueError:
        raise argparse.ArgumentTypeError("port must be an integer, got %r" % port) from None
    if not 0 <= number <= 65535:
        raise argparse.ArgumentTypeError("port out of range: %d" % number)
    return host, number


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--log-level", default="INFO",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="log verbosity")
    parser.add_argument("--run-seconds", type=float, default=None, metavar="S",
                        help="stop after S seconds (default: run until interrupted)")


def _setup_logging(args) -> None:
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def _serve(stoppables, run_seconds: float | None, done=None) -> int:
    """Block until interrupt, the deadline, or ``done()``; then stop everything in order."""
    stop = threading.Event()
    try:
        if done is None:
            stop.wait(run_seconds)
        else:
            deadline = None if run_seconds is None else time.monotonic() + run_seconds
            while not done():
                if deadline is not None and time.monotonic() >= deadline:
                    break
                stop.wait(0.05)
    except KeyboardInterrupt:
        logger.info("interrupted, shutting down")
    for item in stoppables:
        item.stop()
    return 0


# --------------------------------------------------------------------- tollgrid


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="tollgrid", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("broker", help="run the embedded pub/sub broker")
    p.add_argument("--bind", type=parse_address, default=DEFAULT_BROKER, help="listen address (HOST:PORT)")
    _add_common(p)

    for kind, extra in (("matcher", "network"), ("pollution", "zones"), ("toll", "rates")):
        p = sub.add_parser(kind, help="run the %s service" % kind)
        p.add_argument("--broker", type=parse_address, default=DEFAULT_BROKER, help="broker address")
        required = extra != "rates"  # the toll service falls back to the default rate table
        p.add_argument("--" + extra, required=required, metavar="PATH",
                       help="%s file%s" % (extra, "" if required else " (default: built-in table)"))
        p.add_argument("--health-port", type=int, default=0, help="health endpoint port (0 = ephemeral)")
        _add_common(p)

    p = sub.add_parser("sim", help="run the traffic simulator")
    p.add_argument("--broker", type=parse_address, default=DEFAULT_BROKER, help="broker address")
    p.add_argument("--network", required=True, metavar="PATH", help="road network file")
    p.add_argument("--vehicles", type=int, default=10, help="vehicle count")
    p.add_argument("--interval-ms", type=int, default=5_000, help="update interval per vehicle")
    p.add_argument("--noise-m", type=float, default=3.0, help="GPS noise sigma in metres")
    p.add_argument("--seed", type=int, default=None, help="RNG seed (default: 0-seeded stream)")
    p.add_argument("--max-messages", type=int, default=None, help="stop after N updates")
    _add_common(p)

    p = sub.add_parser("gateway", help="run the HTTP gateway")
    p.add_argument("--broker", type=parse_address, default=DEFAULT_BROKER, help="broker address")
    p.add_argument("--http-bind", type=parse_address, default=DEFAULT_HTTP_BIND, help="HTTP listen address")
    p.add_argument("--zones", default=None, metavar="PATH", help="zone file served on /zones")
    _add_common(p)

    args = parser.parse_args(argv)
    _setup_logging(args)
    try:
        return _dispatch_main(args)
    except _StartupError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2


class _StartupError(Exception):
    pass


def _load_or_fail(loader, path, what: str):
    try:
        return loader(path)
    except Exception as exc:  # loader errors carry the useful message
        raise _StartupError("cannot load %s from %s: %s" % (what, path, exc)) from exc


def _dispatch_main(args) -> int:
    from tollgrid.msgbus import Broker, BusError

    if args.command == "broker":
        host, port = args.bind
        broker = Broker(host=host, port=port)
        try:
            broker.start()
        except OSError as exc:
            raise _StartupError("cannot bind %s:%d: %s" % (host, port, exc)) from exc
        return _serve([broker], args.run_seconds)

    if args.command in ("matcher", "pollution", "toll"):
        from tollgrid.geo import load_zones
        from tollgrid.roadnet import load_network
        from tollgrid.services import RateTable, run_service

        kind = {"matcher": "mapmatcher", "pollution": "pollution", "toll": "tollcalc"}[args.command]
        kwargs = {}
        if args.command == "matcher":
            kwargs["network"] = _load_or_fail(load_network, args.network, "road network")
        elif args.command == "pollution":
            kwargs["zones"] = _load_or_fail(load_zones, args.zones, "zones")
        elif args.rates is not None:
            kwargs["rates"] = _load_or_fail(RateTable.from_file, args.rates, "rate table")
        host, port = args.broker
        try:
            service = run_service(kind, host, port, health_port=args.health_port, **kwargs)
        except BusError as exc:
            raise _StartupError("broker unreachable at %s:%d: %s" % (host, port, exc)) from exc
        return _serve([service], args.run_seconds)

    if args.command == "sim":
        from tollgrid.roadnet import load_network
        from tollgrid.simulator import SimConfig, SimConfigError, SimulatorService

        net = _load_or_fail(load_network, args.network, "road network")
        try:
            config = SimConfig(
                vehicle_count=args.vehicles,
                update_interval_ms=args.interval_ms,
                gps_noise_m=args.noise_m,
                seed=args.seed,
            )
        except SimConfigError as exc:
            raise _StartupError(str(exc)) from exc
        host, port = args.broker
        try:
            service = SimulatorService(net, config, host, port, max_messages=args.max_messages)
        except BusError as exc:
            raise _StartupError("broker unreachable at %s:%d: %s" % (host, port, exc)) from exc
        # The publisher thread ends on its own once --max-messages is reached
        # (or the broker goes away); exit the process with it.
        return _serve([service], args.run_seconds, done=lambda: service.finished)

    if args.command == "gateway":
        from tollgrid.geo import load_zones
        from tollgrid.gateway import Gateway

        zones = _load_or_fail(load_zones, args.zones, "zones") if args.zones else None
        broker_host, broker_port = args.broker
        http_host, http_port = args.http_bind
        gateway = Gateway(broker_host, broker_port, http_host=http_host, http_port=http_port, zones=zones)
        try:
            gateway.start()
        except OSError as exc:
            raise _StartupError("cannot bind %s:%d: %s" % (http_host, http_port, exc)) from exc
        return _serve([gateway], args.run_seconds)

    raise AssertionError("unhandled command %r" % args.command)


# ----------------------------------------------------------------- tollgrid-gen


def gen_main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="tollgrid-gen", description="Generate deterministic fixtures.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("grid", help="street-grid road network")
    p.add_argument("--rows", type=int, default=10)
    p.add_argument("--cols", type=int, default=10)
    p.add_argument("--spacing-deg", type=float, default=0.001)
    p.add_argument("--origin-lat", type=float, default=52.5)
    p.add_argument("--origin-lon", type=float, default=13.4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jitter", type=float, default=0.0, help="node displacement, fraction of spacing")
    p.add_argument("--out", default=None, metavar="PATH", help="output file (default: stdout)")

    p = sub.add_parser("zones", help="non-overlapping rectangular pollution zones")
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--origin-lat", type=float, default=52.5)
    p.add_argument("--origin-lon", type=float, default=13.4)
    p.add_argument("--extent-deg", type=float, default=0.01)
    p.add_argument("--out", default=None, metavar="PATH", help="output file (default: stdout)")

    args = parser.parse_args(argv)
    try:
        if args.command == "grid":
            from tollgrid.roadnet import grid_network_records

            records = grid_network_records(
                args.rows, args.cols, spacing_deg=args.spacing_deg,
                origin_lat=args.origin_lat, origin_lon=args.origin_lon,
                seed=args.seed, jitter=args.jitter,
            )
        else:
            from tollgrid.geo.zonegen import random_rect_zones, zones_to_records

            records = zones_to_records(random_rect_zones(
                args.count, args.seed, origin_lat=args.origin_lat,
                origin_lon=args.origin_lon, extent_deg=args.extent_deg,
            ))
    except ValueError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    text = json.dumps(records, indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


# --------------------------------------------------------------- tollgrid-bench


def bench_main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="tollgrid-bench", description="Run the latency benchmark.")
    parser.add_argument("--scenario", required=True, metavar="PATH", help="scenario JSON file")
    parser.add_argument("--out", required=True, metavar="DIR", help="output directory for reports")
    parser.add_argument("--log-level", default="INFO",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="log verbosity")
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    from tollgrid.bench import ScenarioError, load_scenario, run_bench
    from tollgrid.msgbus import BusError

    try:
        scenario = load_scenario(args.scenario)
    except ScenarioError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    try:
        return run_bench(scenario, args.out)
    except (BusError, OSError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
