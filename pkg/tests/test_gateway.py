"""Gateway HTTP endpoints, event stream, and broker-loss behaviour."""

import json
import re
import socket
import time
import urllib.error
import urllib.request

import jsonschema
import pytest

from tollgrid.framekit import TraceContext, new_trace_id
from tollgrid.gateway import Gateway, eur_2dp
from tollgrid.gateway.app import _EventHub
from tollgrid.geo import GeoPoint, Polyline
from tollgrid.msgbus import Broker, BusClient
from tollgrid.roadnet import grid_network_records, network_from_records
from tollgrid.services import RouteMsg, TollMsg, encode_json
from tollgrid.simulator import SIM_ACK_TOPIC, SimConfig, SimulatorService

import random
import pathlib

SCHEMA_DIR = pathlib.Path(__file__).resolve().parent.parent / "docs" / "schemas"


def wait_until(predicate, timeout_s=5.0, interval_s=0.02, message="condition"):
    deadline = time.monotonic() + timeout_s
    while time.monotonic() < deadline:
        value = predicate()
        if value:
            return value
        time.sleep(interval_s)
    raise AssertionError("timed out waiting for " + message)


def get_json(port, path):
    try:
        with urllib.request.urlopen(f"http://127.0.0.1:{port}{path}", timeout=5) as resp:
            return resp.status, json.loads(resp.read())
    except urllib.error.HTTPError as err:
        return err.code, json.loads(err.read())


def post_json(port, path, body: dict | str):
    data = body.encode() if isinstance(body, str) else json.dumps(body).encode()
    req = urllib.request.Request(
        f"http://127.0.0.1:{port}{path}", data=data,
        headers={"Content-Type": "application/json"}, method="POST",
    )
    try:
        with urllib.request.urlopen(req, timeout=5) as resp:
            return resp.status, json.loads(resp.read())
    except urllib.error.HTTPError as err:
        return err.code, json.loads(err.read())


def make_trace(seq=0):
    return TraceContext(new_trace_id(random.Random(seq + 1)), "ignored", seq)


def route_msg(vehicle_id, lat=1.0, seq=1):
    polyline = Polyline([GeoPoint(lat, 0.0), GeoPoint(lat, 0.001)])
    return RouteMsg(vehicle_id, polyline, (seq - 1, seq), make_trace(seq))


def toll_msg(vehicle_id, increment, cumulative, distance=111.2, seq=1):
    return TollMsg(vehicle_id, increment, cumulative, distance, make_trace(seq))


@pytest.fixture()
def stack():
    broker = Broker(port=0)
    port = broker.start()
    gateway = Gateway("127.0.0.1", port, http_port=0)
    http_port = gateway.start()
    publisher = BusClient("127.0.0.1", port, name="test-pub")
    wait_until(lambda: not gateway.stale, message="gateway connect")
    yield broker, gateway, http_port, publisher
    publisher.close()
    gateway.stop()
    broker.stop()


# ---------------------------------------------------------------- units


def test_eur_2dp_rendering():
    assert eur_2dp(0) == "0.00"
    assert eur_2dp(5_560) == "0.01"
    assert eur_2dp(200_000) == "0.20"
    assert eur_2dp(994_999) == "0.99"
    assert eur_2dp(995_000) == "1.00"
    assert eur_2dp(123_456_789) == "123.46"


def test_event_hub_slow_client_disconnected():
    hub = _EventHub(cap=3)
    hub.publish("toll", {"n": -1})  # no clients: no-op
    assert hub.delivered == 0
    client = hub.register()
    for n in range(5):
        hub.publish("toll", {"n": n})
    assert client.dead.is_set()  # queue overflowed at 3
    assert hub.delivered == 3
    hub.unregister(client)
    assert len(hub) == 0


# ---------------------------------------------------------------- views


def test_vehicles_view_after_route_and_toll(stack):
    _, gateway, http_port, publisher = stack
    publisher.publish("route", encode_json(route_msg("v001", lat=2.0)))
    publisher.publish("toll", encode_json(toll_msg("v001", 5_560, 5_560)))
    wait_until(lambda: gateway.counts["toll"] >= 1, message="toll ingestion")

    status, body = get_json(http_port, "/vehicles")
    assert status == 200
    (view,) = body["vehicles"]
    assert view["vehicle_id"] == "v001"
    assert re.fullmatch(r"\d+\.\d{2}", view["cumulative_eur"])
    assert view["cumulative_eur"] == "0.01"
    assert view["cumulative_micro"] == 5_560  # full precision round-trips
    assert view["distance_m_total"] == pytest.approx(111.2)
    assert view["route"][0] == {"lat": 2.0, "lon": 0.0}

    status, detail = get_json(http_port, "/vehicles/v001")
    assert status == 200
    assert len(detail["routes"]) == 1

    status, _ = get_json(http_port, "/vehicles/v999")
    assert status == 404


def test_route_history_bounded(stack):
    _, gateway, http_port, publisher = stack
    gateway._route_history = 5  # takes effect for vehicles first seen from now on
    for seq in range(1, 9):
        publisher.publish("route", encode_json(route_msg("v002", lat=float(seq), seq=seq)))
    wait_until(lambda: gateway.counts["route"] >= 8, message="route ingestion")
    _, detail = get_json(http_port, "/vehicles/v002")
    assert detail["routes_held"] == 5
    lats = [routes[0]["lat"] for routes in detail["routes"]]
    assert lats == [4.0, 5.0, 6.0, 7.0, 8.0]  # oldest evicted first
    assert detail["route"][0]["lat"] == 8.0


def test_tolls_view_latest_per_vehicle(stack):
    _, gateway, http_port, publisher = stack
    publisher.publish("toll", encode_json(toll_msg("v001", 100_000, 100_000, seq=1)))
    publisher.publish("toll", encode_json(toll_msg("v001", 50_000, 150_000, seq=2)))
    publisher.publish("toll", encode_json(toll_msg("v002", 200_000, 200_000, seq=1)))
    wait_until(lambda: gateway.counts["toll"] >= 3, message="toll ingestion")
    _, body = get_json(http_port, "/tolls")
    assert len(body["tolls"]) == 2
    by_vehicle = {t["vehicle_id"]: t for t in body["tolls"]}
    assert by_vehicle["v001"]["cumulative_eur"] == "0.150000"
    assert body["total_eur"] == "0.350000"


def test_registry_endpoint_lists_announced_services(stack):
    _, gateway, http_port, publisher = stack
    for name in ("mapmatcher", "pollution", "tollcalc", "simulator"):
        announcement = {"name": name, "instance_id": name + "-1", "address": "127.0.0.1:0", "ttl_ms": 10_000}
        publisher.publish("registry.announce", json.dumps(announcement).encode())
    wait_until(lambda: gateway.counts["announce"] >= 4, message="announcements")
    _, body = get_json(http_port, "/registry")
    names = sorted(record["name"] for record in body["services"])
    assert names == ["mapmatcher", "pollution", "simulator", "tollcalc"]
    record = body["services"][0]
    assert {"name", "instance_id", "address", "registered_at_ms", "last_heartbeat_ms", "ttl_ms"} <= set(record)


def test_zones_endpoint():
    from tollgrid.geo.zonegen import random_rect_zones

    broker = Broker(port=0)
    port = broker.start()
    zones = random_rect_zones(4, seed=3)
    gateway = Gateway("127.0.0.1", port, zones=zones)
    http_port = gateway.start()
    try:
        _, body = get_json(http_port, "/zones")
        assert len(body["zones"]) == 4
        assert body["zones"][0]["zone_id"] == "z000"
        assert all(len(z["ring"]) == 4 for z in body["zones"])
    finally:
        gateway.stop()
        broker.stop()


def test_unknown_paths_404(stack):
    _, _, http_port, _ = stack
    assert get_json(http_port, "/nope")[0] == 404
    assert post_json(http_port, "/vehicles", {})[0] == 404


# ---------------------------------------------------------------- health


def test_healthz_degrades_on_broker_loss_then_recovers(stack):
    broker, gateway, http_port, _ = stack
    status, body = get_json(http_port, "/healthz")
    assert status == 200 and body["status"] == "ok" and body["stale"] is False

    broker_port = broker.port
    broker.stop()
    wait_until(lambda: get_json(http_port, "/healthz")[0] == 503, message="degraded health")
    _, body = get_json(http_port, "/healthz")
    assert body["status"] == "degraded" and body["stale"] is True

    replacement = Broker(port=broker_port)
    replacement.start()
    try:
        wait_until(lambda: get_json(http_port, "/healthz")[0] == 200, timeout_s=10,
                   message="gateway reconnect")
    finally:
        replacement.stop()


# ---------------------------------------------------------------- sim config


def load_cases():
    with open(SCHEMA_DIR / "sim_config_cases.json") as fh:
        return json.load(fh)


def test_post_sim_config_shared_cases(stack):
    _, _, http_port, _ = stack
    cases = load_cases()
    for body in cases["valid"]:
        status, resp = post_json(http_port, "/sim/config", body)
        assert status == 200, body
        assert resp["ok"] is True
        assert set(resp["config"]) == {"vehicle_count", "update_interval_ms", "gps_noise_m", "seed"}
    for case in cases["invalid"]:
        status, resp = post_json(http_port, "/sim/config", case["body"])
        assert status == 422, case
        assert resp["ok"] is False
        assert case["field"] in resp["error"]


def test_sim_config_schema_mirrors_cases():
    with open(SCHEMA_DIR / "sim_config.json") as fh:
        schema = json.load(fh)
    validator = jsonschema.Draft202012Validator(schema)
    cases = load_cases()
    for body in cases["valid"]:
        validator.validate(body)
    for case in cases["invalid"]:
        assert list(validator.iter_errors(case["body"])), case


def test_post_sim_config_malformed_json(stack):
    _, _, http_port, _ = stack
    status, resp = post_json(http_port, "/sim/config", "{not json")
    assert status == 400
    assert resp["ok"] is False


def test_post_sim_config_broker_down_503(stack):
    broker, gateway, http_port, _ = stack
    broker.stop()
    wait_until(lambda: gateway.stale, message="staleness flag")
    status, resp = post_json(http_port, "/sim/config", {"vehicle_count": 5})
    assert status == 503
    assert "unavailable" in resp["error"]


def test_sim_config_roundtrip_reconfigures_simulator(stack):
    broker, gateway, http_port, publisher = stack
    net = network_from_records(grid_network_records(4, 4, spacing_deg=0.001))
    ack_sub = publisher.subscribe(SIM_ACK_TOPIC)
    sim = SimulatorService(net, SimConfig(vehicle_count=3, update_interval_ms=50, gps_noise_m=0.0, seed=9),
                           "127.0.0.1", broker.port)
    try:
        status, resp = post_json(http_port, "/sim/config",
                                 {"vehicle_count": 6, "update_interval_ms": 50})
        assert status == 200 and resp["ok"] is True
        wait_until(lambda: sim.sim.config.vehicle_count == 6, message="simulator reconfig")
        ack = json.loads(wait_until(lambda: ack_sub.get(timeout_s=0.1), message="config ack"))
        assert ack["ok"] is True
        assert ack["config"]["vehicle_count"] == 6
    finally:
        sim.stop()


# ---------------------------------------------------------------- events


def open_event_stream(http_port):
    sock = socket.create_connection(("127.0.0.1", http_port), timeout=5)
    sock.sendall(b"GET /events HTTP/1.1\r\nHost: localhost\r\nAccept: application/x-ndjson\r\n\r\n")
    reader = sock.makefile("rb")
    status = reader.readline()
    assert b"200" in status
    while reader.readline() not in (b"\r\n", b"\n", b""):
        pass  # skip headers
    return sock, reader


def read_events(reader, n, timeout_s=5.0):
    events = []
    deadline = time.monotonic() + timeout_s
    while len(events) < n and time.monotonic() < deadline:
        try:
            line = reader.readline()
        except TimeoutError:
            break
        if not line:
            break
        events.append(json.loads(line))
    return events


def test_event_stream_fanout_same_sequence(stack):
    _, gateway, http_port, publisher = stack
    sock_a, reader_a = open_event_stream(http_port)
    sock_b, reader_b = open_event_stream(http_port)
    wait_until(lambda: len(gateway.hub) == 2, message="stream clients registered")

    publisher.publish("route", encode_json(route_msg("v005", lat=1.0, seq=1)))
    publisher.publish("toll", encode_json(toll_msg("v005", 1_000, 1_000, seq=1)))
    publisher.publish("sim.config", json.dumps({"vehicle_count": 2}).encode())
    publisher.publish("route", encode_json(route_msg("v005", lat=2.0, seq=2)))

    events_a = read_events(reader_a, 4)
    events_b = read_events(reader_b, 4)
    sock_a.close()
    sock_b.close()
    assert len(events_a) == 4
    assert events_a == events_b  # same order, same payloads
    types = [e["type"] for e in events_a]
    assert types.count("route") == 2
    assert "toll" in types and "config" in types
    toll_event = next(e for e in events_a if e["type"] == "toll")
    assert toll_event["payload"]["vehicle_id"] == "v005"
