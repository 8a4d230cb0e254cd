"""End-to-end benchmark orchestration.

Runs the whole pipeline in one process: embedded broker, the three services,
the traffic simulator, and a collector subscribed to `route` and `toll`.
After the run it applies the warm-up policy, verifies the pipeline
invariants (monotonic tolls, distance conservation, trace completeness) and
writes `latency.csv` plus `report.json` into the output directory.

Exit codes: 0 all checks pass, 1 a check failed, 3 timed out before the
expected message count arrived (a partial report is still written).
"""

from __future__ import annotations

import csv
import json
import logging
import threading
import time
from dataclasses import dataclass
from pathlib import Path

from tollgrid.geo import load_zones
from tollgrid.geo.zonegen import random_rect_zones
from tollgrid.msgbus import Broker, BusClient
from tollgrid.roadnet import grid_network_records, load_network, network_from_records
from tollgrid.services import (
    MessageError,
    RateTable,
    RouteMsg,
    TollMsg,
    decode_json,
    eur_str,
    route_length_m,
    run_service,
)
from tollgrid.simulator import SimConfig, SimulatorService
from tollgrid.bench.stats import (
    WarmupPolicy,
    build_report,
    collect,
    write_latency_csv,
    write_report_json,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_BAD_SCENARIO = 2
EXIT_TIMEOUT = 3

CONSERVATION_REL_TOL = 1e-6
FLUSH_SECONDS = 2.0

_SCENARIO_KEYS = {
    "vehicles", "interval_ms", "noise_m", "seed", "skip",
    "max_messages", "max_seconds", "network", "zones", "rates", "resources",
}


class ScenarioError(ValueError):
    """The scenario file is malformed."""


@dataclass(frozen=True)
class Scenario:
    vehicles: int = 10
    interval_ms: int = 100
    noise_m: float = 0.0
    seed: int = 42
    skip: int = 50
    max_messages: int | None = None
    max_seconds: float = 30.0
    network: str | None = None
    zones: str | None = None
    rates: str | None = None
    resources: bool = False


def parse_scenario(data) -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a JSON object")
    unknown = set(data) - _SCENARIO_KEYS
    if unknown:
        raise ScenarioError("unknown scenario keys: %s" % ", ".join(sorted(unknown)))
    merged = Scenario(**data)
    if not isinstance(merged.vehicles, int) or merged.vehicles < 1:
        raise ScenarioError("vehicles must be a positive integer")
    if not isinstance(merged.skip, int) or merged.skip < 0:
        raise ScenarioError("skip must be a non-negative integer")
    if merged.max_messages is not None and (not isinstance(merged.max_messages, int) or merged.max_messages < 1):
        raise ScenarioError("max_messages must be a positive integer or null")
    if not isinstance(merged.max_seconds, (int, float)) or merged.max_seconds < 0:
        raise ScenarioError("max_seconds must be >= 0")
    return merged


def load_scenario(path) -> Scenario:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ScenarioError("cannot read scenario %s: %s" % (path, exc)) from exc
    return parse_scenario(data)


def _default_network():
    return network_from_records(grid_network_records(8, 8, spacing_deg=0.001))


def _default_zones():
    # Covers the default 8x8 grid footprint (0.007 deg on a side, anchored at
    # the grid generator's default origin).
    return random_rect_zones(10, seed=20, origin_lat=52.5, origin_lon=13.4, extent_deg=0.008)


class _ResourceSampler:
    """Optional CPU/RSS sampling of this process, written to resources.csv."""

    def __init__(self, interval_s: float = 0.2):
        self._interval_s = interval_s
        self._rows: list[tuple[int, float, int]] = []
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self._proc = None

    def start(self) -> bool:
        try:
            import psutil
        except ImportError:
            logger.warning("resource sampling requested but psutil is not installed; skipping")
            return False
        self._proc = psutil.Process()
        self._proc.cpu_percent(None)  # prime the delta-based meter
        self._thread = threading.Thread(target=self._run, name="resource-sampler", daemon=True)
        self._thread.start()
        return True

    def _run(self):
        while not self._stop.wait(self._interval_s):
            cpu = self._proc.cpu_percent(None)
            rss = self._proc.memory_info().rss
            self._rows.append((int(time.time() * 1000), cpu, rss))

    def stop_and_write(self, path) -> None:
        if self._thread is None:
            return
        self._stop.set()
        self._thread.join(timeout=2)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(("ts_ms", "cpu_percent", "rss_bytes"))
            writer.writerows(self._rows)


def _run_checks(tolls: list[TollMsg], route_lengths: dict[str, float]) -> dict:
    """Invariant checks over everything the collector saw."""
    monotonic = True
    per_vehicle_sum: dict[str, int] = {}
    per_vehicle_cum: dict[str, int] = {}
    for msg in tolls:
        prev = per_vehicle_cum.get(msg.vehicle_id, 0)
        if msg.cumulative_micro < prev:
            monotonic = False
        per_vehicle_cum[msg.vehicle_id] = msg.cumulative_micro
        per_vehicle_sum[msg.vehicle_id] = per_vehicle_sum.get(msg.vehicle_id, 0) + msg.increment_micro
        if per_vehicle_sum[msg.vehicle_id] != msg.cumulative_micro:
            monotonic = False

    tolled_m = 0.0
    matched_m = 0.0
    unmatched = 0
    for msg in tolls:
        length = route_lengths.get(msg.trace.trace_id)
        if length is None:
            unmatched += 1
            continue
        tolled_m += msg.distance_m_total
        matched_m += length
    rel_error = abs(tolled_m - matched_m) / max(matched_m, 1e-12) if tolls else 0.0
    conservation = unmatched == 0 and rel_error <= CONSERVATION_REL_TOL
    return {
        "monotonic_tolls": monotonic,
        "conservation": conservation,
        "conservation_rel_error": rel_error,
        "tolled_distance_m": tolled_m,
        "matched_distance_m": matched_m,
        "tolls_without_route": unmatched,
    }


def run_bench(scenario: Scenario, out_dir) -> int:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    net = load_network(scenario.network) if scenario.network else _default_network()
    zones = load_zones(scenario.zones) if scenario.zones else _default_zones()
    rates = RateTable.from_file(scenario.rates) if scenario.rates else RateTable.default()
    sim_config = SimConfig(
        vehicle_count=scenario.vehicles,
        update_interval_ms=scenario.interval_ms,
        gps_noise_m=scenario.noise_m,
        seed=scenario.seed,
    )

    sampler = _ResourceSampler() if scenario.resources else None
    sampling = sampler.start() if sampler else False

    broker = Broker(port=0)
    port = broker.start()
    services = []
    collector = None
    simsvc = None
    tolls: list[TollMsg] = []
    route_lengths: dict[str, float] = {}
    try:
        for kind in ("mapmatcher", "pollution", "tollcalc"):
            services.append(run_service(kind, "127.0.0.1", port, network=net, zones=zones, rates=rates))
        collector = BusClient("127.0.0.1", port, name="bench-collector")
        toll_sub = collector.subscribe("toll")
        route_sub = collector.subscribe("route")
        simsvc = SimulatorService(net, sim_config, "127.0.0.1", port, max_messages=scenario.max_messages)

        # Every vehicle's first update only opens its matching window, so a
        # capped run of M messages over V vehicles yields exactly M-V tolls.
        expected = None
        if scenario.max_messages is not None:
            expected = max(0, scenario.max_messages - scenario.vehicles)

        def drain_routes():
            for payload in route_sub.drain():
                try:
                    route = decode_json(RouteMsg, payload)
                except MessageError:
                    continue
                route_lengths[route.trace.trace_id] = route_length_m(route)

        deadline = time.monotonic() + scenario.max_seconds
        while time.monotonic() < deadline:
            drain_routes()
            if expected is not None and len(tolls) >= expected:
                break
            payload = toll_sub.get(timeout_s=0.1)
            if payload is None:
                continue
            try:
                tolls.append(decode_json(TollMsg, payload))
            except MessageError:
                logger.warning("collector: undecodable toll message")

        simsvc.stop()
        if expected is None and tolls and scenario.max_seconds > 0:
            # Uncapped run: give in-flight messages a moment to finish.
            flush_until = time.monotonic() + FLUSH_SECONDS
            while time.monotonic() < flush_until:
                payload = toll_sub.get(timeout_s=0.1)
                if payload is None:
                    break
                try:
                    tolls.append(decode_json(TollMsg, payload))
                except MessageError:
                    pass
        drain_routes()
        published = simsvc.published
        service_counts = {svc.kind: svc.step.processed for svc in services}
        service_errors = {svc.kind: svc.step.errors + svc.decode_errors for svc in services}
    finally:
        if simsvc is not None:
            simsvc.stop()
        for svc in services:
            svc.stop()
        if collector is not None:
            collector.close()
        broker.stop()

    timed_out = len(tolls) == 0 or (expected is not None and len(tolls) < expected)

    result = collect(tolls, WarmupPolicy(scenario.skip))
    checks = _run_checks(tolls, route_lengths)
    checks["completeness"] = result.dropped == 0

    per_vehicle_cum: dict[str, int] = {}
    for msg in tolls:
        per_vehicle_cum[msg.vehicle_id] = msg.cumulative_micro
    counts = {
        "published": published,
        "routes": len(route_lengths),
        "tolls": len(tolls),
        "expected_tolls": expected,
        "service_processed": service_counts,
        "service_errors": service_errors,
    }
    report = build_report(
        result,
        config={
            "vehicles": scenario.vehicles,
            "interval_ms": scenario.interval_ms,
            "noise_m": scenario.noise_m,
            "seed": scenario.seed,
            "skip": scenario.skip,
            "max_messages": scenario.max_messages,
            "max_seconds": scenario.max_seconds,
        },
        counts=counts,
        checks=checks,
        partial=timed_out,
    )
    report["toll_total_eur"] = eur_str(sum(per_vehicle_cum.values()))
    report["per_vehicle_toll_eur"] = {vid: eur_str(m) for vid, m in sorted(per_vehicle_cum.items())}

    write_latency_csv(out / "latency.csv", result.samples)
    write_report_json(out / "report.json", report)
    if sampling:
        sampler.stop_and_write(out / "resources.csv")

    if timed_out:
        logger.error("bench: timed out with %d tolls (expected %s)", len(tolls), expected)
        return EXIT_TIMEOUT
    failed = [name for name in ("monotonic_tolls", "conservation", "completeness") if not checks[name]]
    if failed:
        logger.error("bench: invariant checks failed: %s", ", ".join(failed))
        return EXIT_CHECK_FAILED
    logger.info(
        "bench: %d samples (skipped %d, dropped %d), toll total %s",
        len(result.samples), result.skipped, result.dropped, report["toll_total_eur"],
    )
    return EXIT_OK
