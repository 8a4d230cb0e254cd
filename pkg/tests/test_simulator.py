"""SimConfig validation and TrafficSim movement/emission/reconfiguration."""

import copy
import math

import pytest

from tollgrid.framekit import FakeClock
from tollgrid.geo import GeoPoint
from tollgrid.roadnet import grid_network_records, nearest_edge, network_from_records
from tollgrid.services import encode_json
from tollgrid.simulator import SimConfig, SimConfigError, TrafficSim


@pytest.fixture(scope="module")
def grid_net():
    return network_from_records(grid_network_records(6, 6, spacing_deg=0.001))


def cfg(**kwargs):
    base = {"vehicle_count": 5, "update_interval_ms": 1_000, "gps_noise_m": 0.0, "seed": 42}
    base.update(kwargs)
    return SimConfig(**base)


# ---------------------------------------------------------------- config


def test_config_defaults():
    c = SimConfig()
    assert c.vehicle_count == 10
    assert c.update_interval_ms == 5_000
    assert c.gps_noise_m == 3.0
    assert c.seed is None


def test_config_rejections():
    with pytest.raises(SimConfigError):
        SimConfig(vehicle_count=0)
    with pytest.raises(SimConfigError):
        SimConfig(vehicle_count=3.5)
    with pytest.raises(SimConfigError):
        SimConfig(update_interval_ms=9)
    with pytest.raises(SimConfigError):
        SimConfig(gps_noise_m=-1.0)
    with pytest.raises(SimConfigError):
        SimConfig(gps_noise_m=float("nan"))
    with pytest.raises(SimConfigError):
        SimConfig(seed="abc")
    with pytest.raises(SimConfigError):
        SimConfig.from_dict({"vehicle_count": 1, "speed": 3})
    with pytest.raises(SimConfigError):
        SimConfig.from_dict([1, 2])


def test_config_from_dict_roundtrip():
    c = SimConfig.from_dict({"vehicle_count": 3, "update_interval_ms": 250, "gps_noise_m": 1.5, "seed": 7})
    assert SimConfig.from_dict(c.to_dict()) == c
    partial = SimConfig.from_dict({"vehicle_count": 2})
    assert partial.update_interval_ms == 5_000
    assert partial.seed is None


# ---------------------------------------------------------------- movement


def hundred_meter_net():
    lon = math.degrees(100.0 / 6_371_000.0)
    return network_from_records(
        {
            "nodes": [{"id": "a", "lat": 0.0, "lon": 0.0}, {"id": "b", "lat": 0.0, "lon": lon}],
            "edges": [{"id": "e1", "from": "a", "to": "b"}],
        }
    )


def test_step_zero_dt():
    sim = TrafficSim(hundred_meter_net(), cfg(vehicle_count=1), clock=FakeClock())
    state_before = copy.deepcopy(sim.state_of("v000"))
    assert sim.step(0) == []
    assert sim.state_of("v000") == state_before


def test_half_edge_in_five_seconds():
    sim = TrafficSim(hundred_meter_net(), cfg(vehicle_count=1, update_interval_ms=10_000), clock=FakeClock())
    v = sim.state_of("v000")
    v.edge_id, v.t, v.toward = "e1", 0.0, "b"  # pin the spawn for the hand case
    updates = sim.step(5_000)
    assert updates == []  # interval not yet elapsed
    assert v.t == pytest.approx(0.5, rel=1e-9)


def test_emission_cadence_and_contents(grid_net):
    clock = FakeClock()
    sim = TrafficSim(grid_net, cfg(vehicle_count=3, update_interval_ms=1_000), clock=clock)
    clock.advance_ms(1_000)
    updates = sim.step(1_000)
    assert [u.vehicle_id for u in updates] == ["v000", "v001", "v002"]
    for u in updates:
        assert u.seq == 0
        assert u.ts_ms == 1_000
        assert u.trace.stage_us("emit") == 1_000_000
        assert len(u.trace.trace_id) == 32
    assert sim.step(400) == []  # interval not yet elapsed again
    clock.advance_ms(600)
    second = sim.step(600)
    assert [u.seq for u in second] == [1, 1, 1]


def test_determinism_same_seed_byte_identical(grid_net):
    def run():
        clock = FakeClock()
        sim = TrafficSim(grid_net, cfg(gps_noise_m=3.0), clock=clock)
        frames = []
        for _ in range(40):
            clock.advance_ms(500)
            frames.extend(encode_json(u) for u in sim.step(500))
        return frames

    assert run() == run()


def test_different_seed_differs(grid_net):
    def run(seed):
        clock = FakeClock()
        sim = TrafficSim(grid_net, cfg(seed=seed, gps_noise_m=3.0), clock=clock)
        frames = []
        for _ in range(20):
            clock.advance_ms(500)
            frames.extend(encode_json(u) for u in sim.step(500))
        return frames

    assert run(1) != run(2)


def test_noiseless_positions_on_network(grid_net):
    clock = FakeClock()
    sim = TrafficSim(grid_net, cfg(vehicle_count=4, update_interval_ms=500), clock=clock)
    for _ in range(50):
        clock.advance_ms(500)
        for u in sim.step(500):
            assert nearest_edge(grid_net, u.point).deviation_m < 1e-6


def test_noisy_positions_near_network(grid_net):
    clock = FakeClock()
    sigma = 3.0
    sim = TrafficSim(grid_net, cfg(vehicle_count=4, update_interval_ms=500, gps_noise_m=sigma), clock=clock)
    for _ in range(50):
        clock.advance_ms(500)
        for u in sim.step(500):
            assert nearest_edge(grid_net, u.point).deviation_m <= 6 * sigma


def test_no_uturn_at_junctions(grid_net):
    clock = FakeClock()
    sim = TrafficSim(grid_net, cfg(vehicle_count=6, update_interval_ms=100_000), clock=clock)
    prev_edges = {vid: sim.state_of(vid).edge_id for vid in sim.vehicle_ids}
    # ~8.9 m per 890 ms step on 111 m edges: every node crossing is observed
    for _ in range(2_000):
        sim.step(890)
        for vid in sim.vehicle_ids:
            v = sim.state_of(vid)
            if v.edge_id != prev_edges[vid]:
                old = grid_net.edges[prev_edges[vid]]
                new = grid_net.edges[v.edge_id]
                junction = ({old.from_node, old.to_node} & {new.from_node, new.to_node}).pop()
                if len(grid_net.adjacency[junction]) > 1:
                    assert v.edge_id != prev_edges[vid]
                    assert prev_edges[vid] not in (None, v.edge_id)
                prev_edges[vid] = v.edge_id


def test_dead_end_uturn_allowed():
    net = hundred_meter_net()
    sim = TrafficSim(net, cfg(vehicle_count=1, update_interval_ms=100_000), clock=FakeClock())
    v = sim.state_of("v000")
    v.edge_id, v.t, v.toward = "e1", 0.9, "b"
    sim.step(2_000)  # 20 m: crosses node b, the only option is back along e1
    assert v.edge_id == "e1"
    assert v.toward == "a"


# ---------------------------------------------------------------- reconfig


def test_grow_spawns_new_ids(grid_net):
    clock = FakeClock()
    sim = TrafficSim(grid_net, cfg(vehicle_count=10), clock=clock)
    before = {vid: copy.deepcopy(sim.state_of(vid)) for vid in sim.vehicle_ids}
    sim.apply_config(cfg(vehicle_count=15))
    assert sim.vehicle_ids == ["v%03d" % i for i in range(15)]
    for vid, old_state in before.items():
        assert sim.state_of(vid) == old_state


def test_shrink_retires_highest_then_seq_continues(grid_net):
    clock = FakeClock()
    sim = TrafficSim(grid_net, cfg(vehicle_count=3, update_interval_ms=500), clock=clock)
    clock.advance_ms(500)
    sim.step(500)  # everyone emits seq 0
    sim.apply_config(cfg(vehicle_count=1, update_interval_ms=500))
    assert sim.vehicle_ids == ["v000"]
    sim.apply_config(cfg(vehicle_count=3, update_interval_ms=500))
    clock.advance_ms(500)
    updates = sim.step(500)
    by_vehicle = {u.vehicle_id: u.seq for u in updates}
    assert by_vehicle["v002"] == 1  # respawned id continues, never repeats seq 0


def test_interval_change_multiplies_rate(grid_net):
    clock = FakeClock()
    sim = TrafficSim(grid_net, cfg(vehicle_count=2, update_interval_ms=5_000), clock=clock)

    def run_window(ms):
        count = 0
        for _ in range(ms // 100):
            clock.advance_ms(100)
            count += len(sim.step(100))
        return count

    slow = run_window(10_000)
    assert slow == 2 * 2  # 2 vehicles x 2 emissions in 10 s at 5 s cadence
    sim.apply_config(cfg(vehicle_count=2, update_interval_ms=500))
    fast = run_window(10_000)
    assert fast == 2 * 20


def test_seq_monotonic_across_reconfigurations(grid_net):
    clock = FakeClock()
    sim = TrafficSim(grid_net, cfg(vehicle_count=4, update_interval_ms=200), clock=clock)
    seen: dict[str, int] = {}
    plan = [4, 2, 6, 1, 5, 5, 3]
    for count in plan:
        sim.apply_config(cfg(vehicle_count=count, update_interval_ms=200))
        for _ in range(10):
            clock.advance_ms(200)
            for u in sim.step(200):
                if u.vehicle_id in seen:
                    assert u.seq > seen[u.vehicle_id]
                seen[u.vehicle_id] = u.seq


def test_reseed_only_when_seed_given(grid_net):
    clock = FakeClock()
    sim = TrafficSim(grid_net, cfg(seed=5, gps_noise_m=2.0, update_interval_ms=200), clock=clock)
    sim.apply_config(SimConfig(vehicle_count=5, update_interval_ms=200, gps_noise_m=2.0, seed=None))
    clock.advance_ms(200)
    first = [encode_json(u) for u in sim.step(200)]

    clock2 = FakeClock()
    sim2 = TrafficSim(grid_net, cfg(seed=5, gps_noise_m=2.0, update_interval_ms=200), clock=clock2)
    sim2.apply_config(SimConfig(vehicle_count=5, update_interval_ms=200, gps_noise_m=2.0, seed=5))
    clock2.advance_ms(200)
    second = [encode_json(u) for u in sim2.step(200)]
    # keeping the stream vs. reseeding produce different draws
    assert first != second
