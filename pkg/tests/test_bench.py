"""Latency statistics and the end-to-end benchmark harness."""

import csv
import json
import random
from types import SimpleNamespace

import pytest

from tollgrid.bench import (
    CSV_HEADER,
    EXIT_OK,
    EXIT_TIMEOUT,
    IncompleteTraceError,
    Scenario,
    ScenarioError,
    StageLatency,
    WarmupPolicy,
    build_report,
    collect,
    distribution,
    load_scenario,
    parse_scenario,
    percentile,
    run_bench,
    write_latency_csv,
)
from tollgrid.framekit import STAGES, TraceContext

US = {"emit": 1_000, "matcher_in": 1_100, "matcher_out": 1_350, "pollution_in": 1_400,
      "pollution_out": 1_900, "toll_in": 2_000, "toll_out": 2_100}


def full_trace(trace_id="ab" * 16, vehicle_id="v001", seq=0, skip_stage=None, base_us=0):
    ctx = TraceContext(trace_id, vehicle_id, seq)
    for stage in STAGES:
        if stage != skip_stage:
            ctx.stamp(stage, base_us + US[stage])
    return ctx


def toll_stub(index, skip_stage=None):
    trace = full_trace(trace_id="%032x" % index, seq=index, skip_stage=skip_stage)
    return SimpleNamespace(trace=trace, vehicle_id="v001")


# ---------------------------------------------------------------- samples


def test_stage_latency_from_known_stamps():
    s = StageLatency.from_trace(full_trace(), "v001")
    assert (s.matcher_us, s.pollution_us, s.toll_us) == (250, 500, 100)
    assert s.e2e_us == 1_100
    assert s.transport_us == 250
    assert s.e2e_us == s.matcher_us + s.pollution_us + s.toll_us + s.transport_us


def test_incomplete_trace_rejected():
    with pytest.raises(IncompleteTraceError):
        StageLatency.from_trace(full_trace(skip_stage="pollution_out"), "v001")


def test_out_of_order_stamps_rejected():
    ctx = TraceContext("cd" * 16, "v001", 0)
    for stage in STAGES:
        ctx.stamp(stage, US[stage] if stage != "toll_out" else 500)  # before emit
    with pytest.raises(IncompleteTraceError):
        StageLatency.from_trace(ctx, "v001")


def test_warmup_policy_validation():
    assert WarmupPolicy().skip_messages == 50
    with pytest.raises(ValueError):
        WarmupPolicy(-1)
    with pytest.raises(ValueError):
        WarmupPolicy(True)


def test_collect_skips_first_fifty():
    result = collect([toll_stub(i) for i in range(60)], WarmupPolicy(50))
    assert len(result.samples) == 10
    assert result.skipped == 50
    assert result.dropped == 0
    assert result.total == 60
    # no sample comes from the warm-up window
    assert {int(s.trace_id, 16) for s in result.samples} == set(range(50, 60))


def test_collect_skip_zero_keeps_all():
    result = collect([toll_stub(i) for i in range(7)], WarmupPolicy(0))
    assert len(result.samples) == 7


def test_collect_drops_incomplete_after_warmup():
    stream = [toll_stub(0), toll_stub(1, skip_stage="pollution_out"), toll_stub(2)]
    result = collect(stream, WarmupPolicy(0))
    assert len(result.samples) == 2
    assert result.dropped == 1
    assert {int(s.trace_id, 16) for s in result.samples} == {0, 2}


def test_collect_incomplete_inside_warmup_counts_as_skipped():
    stream = [toll_stub(0, skip_stage="emit"), toll_stub(1)]
    result = collect(stream, WarmupPolicy(1))
    assert result.skipped == 1
    assert result.dropped == 0
    assert len(result.samples) == 1


# ---------------------------------------------------------------- percentile


def test_percentile_hand_cases():
    assert percentile([1, 2, 3], 50) == 2
    assert percentile([10], 0) == 10
    assert percentile([10], 99) == 10
    assert percentile([1, 2, 3, 4], 0) == 1
    assert percentile([1, 2, 3, 4], 100) == 4


def test_percentile_rejections():
    with pytest.raises(ValueError):
        percentile([], 50)
    with pytest.raises(ValueError):
        percentile([1], 101)
    with pytest.raises(ValueError):
        percentile([1], -1)


def oracle_nearest_rank(values, q):
    """Smallest value v such that at least q% of the sample is <= v."""
    ordered = sorted(values)
    n = len(ordered)
    if q == 0:
        return ordered[0]
    for v in ordered:
        if sum(1 for x in values if x <= v) >= q / 100.0 * n:
            return v
    return ordered[-1]


def test_percentile_matches_counting_oracle():
    rng = random.Random(1234)
    values = [rng.randint(0, 500) for _ in range(1_000)]  # duplicates on purpose
    ordered = sorted(values)
    for q in [0, 1, 10, 25, 50, 75, 90, 95, 99, 99.9, 100]:
        assert percentile(ordered, q) == oracle_nearest_rank(values, q), q


def test_quantile_monotonicity_property():
    for seed in range(50):
        rng = random.Random(seed)
        ordered = sorted(rng.randint(0, 10_000) for _ in range(rng.randint(1, 200)))
        p50, p90, p95, p99 = (percentile(ordered, q) for q in (50, 90, 95, 99))
        assert p50 <= p90 <= p95 <= p99 <= ordered[-1]


# ---------------------------------------------------------------- report


def degenerate_sample(n=5):
    return [StageLatency("%032x" % i, "v001", 100, 200, 50, 150, 500) for i in range(n)]


def test_degenerate_distribution():
    stats = distribution([s.e2e_us for s in degenerate_sample()])
    assert stats["mean"] == stats["min"] == stats["max"] == 500
    assert stats["p50"] == stats["p90"] == stats["p95"] == stats["p99"] == 500
    assert stats["count"] == 5


def test_pollution_dominated_share():
    # pollution is nine times all other stages combined -> 90% share
    samples = [StageLatency("%032x" % i, "v001", 50, 900, 30, 20, 1_000) for i in range(20)]
    report = build_report(
        CollectResult_like(samples),
    )
    assert report["shares_pct"]["pollution"] == pytest.approx(90.0, abs=0.01)


def CollectResult_like(samples):
    from tollgrid.bench import CollectResult

    return CollectResult(samples=samples, skipped=0, dropped=0, total=len(samples))


def test_shares_sum_to_hundred_property():
    for seed in range(30):
        rng = random.Random(seed)
        samples = []
        for i in range(rng.randint(1, 100)):
            m, p, t, tr = (rng.randint(0, 10_000) for _ in range(4))
            samples.append(StageLatency("%032x" % i, "v001", m, p, t, tr, m + p + t + tr))
        report = build_report(CollectResult_like(samples))
        total = sum(report["shares_pct"].values())
        assert total == pytest.approx(100.0, abs=0.01)
        assert total == pytest.approx(100.0, abs=1e-9)  # remainder definition makes it exact


def test_report_quantile_ordering_random():
    rng = random.Random(77)
    samples = []
    for i in range(300):
        m, p, t, tr = (rng.randint(0, 5_000) for _ in range(4))
        samples.append(StageLatency("%032x" % i, "v%03d" % (i % 7), m, p, t, tr, m + p + t + tr))
    report = build_report(CollectResult_like(samples))
    for stats in report["stages"].values():
        assert stats["p50"] <= stats["p90"] <= stats["p95"] <= stats["p99"] <= stats["max"]
        assert stats["min"] <= stats["mean"] <= stats["max"]


def test_empty_report_has_no_stats():
    from tollgrid.bench import CollectResult

    report = build_report(CollectResult(), partial=True)
    assert report["partial"] is True
    assert "stages" not in report and "shares_pct" not in report
    assert report["counts"]["samples"] == 0


def test_csv_roundtrip(tmp_path):
    samples = degenerate_sample(3)
    path = tmp_path / "latency.csv"
    write_latency_csv(path, samples)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == CSV_HEADER
    assert rows[0] == ["trace_id", "vehicle_id", "matcher_us", "pollution_us", "toll_us", "transport_us", "e2e_us"]
    assert len(rows) == 4
    assert rows[1][2:] == ["100", "200", "50", "150", "500"]


# ---------------------------------------------------------------- scenario


def test_scenario_defaults_and_rejections():
    s = parse_scenario({})
    assert (s.vehicles, s.interval_ms, s.noise_m, s.skip) == (10, 100, 0.0, 50)
    assert s.max_messages is None
    with pytest.raises(ScenarioError):
        parse_scenario({"vehicle_count": 3})  # unknown key
    with pytest.raises(ScenarioError):
        parse_scenario({"vehicles": 0})
    with pytest.raises(ScenarioError):
        parse_scenario({"skip": -1})
    with pytest.raises(ScenarioError):
        parse_scenario({"max_messages": 0})
    with pytest.raises(ScenarioError):
        parse_scenario({"max_seconds": -1})
    with pytest.raises(ScenarioError):
        parse_scenario([])


def test_load_scenario_file(tmp_path):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps({"vehicles": 3, "interval_ms": 20, "max_messages": 9}))
    s = load_scenario(path)
    assert s.vehicles == 3 and s.max_messages == 9
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    with pytest.raises(ScenarioError):
        load_scenario(bad)
    with pytest.raises(ScenarioError):
        load_scenario(tmp_path / "absent.json")


# ---------------------------------------------------------------- run_bench


SMALL = dict(vehicles=4, interval_ms=20, noise_m=0.0, seed=11, skip=10, max_messages=84, max_seconds=30)


def read_report(out_dir):
    with open(out_dir / "report.json") as fh:
        return json.load(fh)


@pytest.mark.slow
def test_run_bench_capped_scenario(tmp_path):
    out = tmp_path / "out"
    code = run_bench(Scenario(**SMALL), out)
    report = read_report(out)
    assert code == EXIT_OK
    assert report["partial"] is False
    # 84 updates over 4 vehicles: the first update per vehicle opens the
    # window, every later one produces exactly one toll
    assert report["counts"]["tolls"] == 80
    assert report["counts"]["published"] == 84
    assert report["counts"]["samples"] == 70
    assert report["counts"]["dropped"] == 0
    assert report["checks"]["monotonic_tolls"] is True
    assert report["checks"]["conservation"] is True
    assert report["checks"]["completeness"] is True
    assert report["checks"]["conservation_rel_error"] <= 1e-6
    assert sum(report["shares_pct"].values()) == pytest.approx(100.0, abs=0.01)
    with open(out / "latency.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == CSV_HEADER
    assert len(rows) - 1 == report["counts"]["samples"]


@pytest.mark.slow
def test_run_bench_deterministic_tolls(tmp_path):
    first = tmp_path / "a"
    second = tmp_path / "b"
    assert run_bench(Scenario(**SMALL), first) == EXIT_OK
    assert run_bench(Scenario(**SMALL), second) == EXIT_OK
    ra, rb = read_report(first), read_report(second)
    assert ra["counts"]["tolls"] == rb["counts"]["tolls"]
    assert ra["toll_total_eur"] == rb["toll_total_eur"]
    assert ra["per_vehicle_toll_eur"] == rb["per_vehicle_toll_eur"]


@pytest.mark.slow
def test_run_bench_zero_duration_times_out(tmp_path):
    out = tmp_path / "out"
    scenario = Scenario(**{**SMALL, "max_seconds": 0})
    assert run_bench(scenario, out) == EXIT_TIMEOUT
    report = read_report(out)
    assert report["partial"] is True
    assert report["counts"]["tolls"] == 0
    with open(out / "latency.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows == [list(CSV_HEADER)]
