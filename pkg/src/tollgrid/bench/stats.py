"""Per-stage latency samples, warm-up policy, and distribution statistics.

Every duration is derived from the trace stamps a TollMsg carries at the end
of the pipeline.  Transport time is defined as the closing remainder
(end-to-end minus the in-service durations), so the stage shares of a report
always sum to 100%.
"""

from __future__ import annotations

import csv
import json
import math
import statistics
from dataclasses import dataclass, field

STAGE_COLUMNS = ("matcher_us", "pollution_us", "toll_us", "transport_us", "e2e_us")
CSV_HEADER = ("trace_id", "vehicle_id") + STAGE_COLUMNS
DEFAULT_SKIP_MESSAGES = 50


class IncompleteTraceError(ValueError):
    """The trace is missing stamps (or violates clock order) and cannot be scored."""


@dataclass(frozen=True)
class StageLatency:
    """Stage durations, in microseconds, for one message through the pipeline."""

    trace_id: str
    vehicle_id: str
    matcher_us: int
    pollution_us: int
    toll_us: int
    transport_us: int
    e2e_us: int

    @classmethod
    def from_trace(cls, trace, vehicle_id: str) -> "StageLatency":
        stamps = {stage: trace.stage_us(stage) for stage in (
            "emit", "matcher_in", "matcher_out", "pollution_in", "pollution_out", "toll_in", "toll_out",
        )}
        missing = [stage for stage, us in stamps.items() if us is None]
        if missing:
            raise IncompleteTraceError("trace %s missing stamps: %s" % (trace.trace_id, ", ".join(missing)))
        matcher = stamps["matcher_out"] - stamps["matcher_in"]
        pollution = stamps["pollution_out"] - stamps["pollution_in"]
        toll = stamps["toll_out"] - stamps["toll_in"]
        e2e = stamps["toll_out"] - stamps["emit"]
        transport = e2e - (matcher + pollution + toll)
        if min(matcher, pollution, toll, transport) < 0:
            raise IncompleteTraceError("trace %s has out-of-order stamps" % trace.trace_id)
        return cls(trace.trace_id, vehicle_id, matcher, pollution, toll, transport, e2e)


@dataclass(frozen=True)
class WarmupPolicy:
    """How many leading messages (global arrival order) to exclude."""

    skip_messages: int = DEFAULT_SKIP_MESSAGES

    def __post_init__(self):
        if not isinstance(self.skip_messages, int) or isinstance(self.skip_messages, bool):
            raise ValueError("skip_messages must be an integer")
        if self.skip_messages < 0:
            raise ValueError("skip_messages must be >= 0")


@dataclass
class CollectResult:
    samples: list[StageLatency] = field(default_factory=list)
    skipped: int = 0
    dropped: int = 0
    total: int = 0
    skip_messages: int = 0  # the policy that produced this result


def collect(toll_stream, policy: WarmupPolicy | None = None) -> CollectResult:
    """Convert a toll-message stream into latency samples.

    The first ``policy.skip_messages`` messages (by arrival order) are
    excluded outright; of the rest, messages with incomplete traces are
    counted as dropped instead of sampled.
    """
    policy = policy if policy is not None else WarmupPolicy()
    result = CollectResult(skip_messages=policy.skip_messages)
    for index, msg in enumerate(toll_stream):
        result.total += 1
        if index < policy.skip_messages:
            result.skipped += 1
            continue
        try:
            result.samples.append(StageLatency.from_trace(msg.trace, msg.vehicle_id))
        except IncompleteTraceError:
            result.dropped += 1
    return result


def percentile(sorted_samples, q) -> float:
    """Nearest-rank percentile: the value at 1-based index ceil(q/100 * n)."""
    if not sorted_samples:
        raise ValueError("percentile of empty sample set")
    if not 0 <= q <= 100:
        raise ValueError("q must be in [0, 100], got %r" % (q,))
    rank = max(1, math.ceil(q / 100.0 * len(sorted_samples)))
    return sorted_samples[rank - 1]


def distribution(values) -> dict:
    """count/mean/min/max and the standard percentiles for one metric."""
    ordered = sorted(values)
    return {
        "count": len(ordered),
        "mean": statistics.fmean(ordered),
        "min": ordered[0],
        "max": ordered[-1],
        "p50": percentile(ordered, 50),
        "p90": percentile(ordered, 90),
        "p95": percentile(ordered, 95),
        "p99": percentile(ordered, 99),
    }


def build_report(result: CollectResult, config: dict | None = None, counts: dict | None = None,
                 checks: dict | None = None, partial: bool = False) -> dict:
    """Assemble the machine-readable report dict.

    Stage shares are computed from the integer duration sums, so they add up
    to 100% exactly up to float rounding of the four divisions.
    """
    report = {
        "config": dict(config) if config else {},
        "warmup": {
            "skip_messages": result.skip_messages,
            "note": "warm-up skips a global message count, so the per-vehicle "
                    "warm-up depth depends on how many vehicles share the stream",
        },
        "counts": {
            "collected": result.total,
            "skipped": result.skipped,
            "dropped": result.dropped,
            "samples": len(result.samples),
        },
        "partial": partial,
    }
    if counts:
        report["counts"].update(counts)
    if checks is not None:
        report["checks"] = checks
    if result.samples:
        report["stages"] = {
            column: distribution([getattr(s, column) for s in result.samples])
            for column in STAGE_COLUMNS
        }
        sums = {column: sum(getattr(s, column) for s in result.samples) for column in STAGE_COLUMNS}
        report["shares_pct"] = {
            column[: -len("_us")]: 100.0 * sums[column] / sums["e2e_us"]
            for column in STAGE_COLUMNS[:-1]
        }
    return report


def write_latency_csv(path, samples) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for s in samples:
            writer.writerow([getattr(s, column) for column in CSV_HEADER])


def write_report_json(path, report: dict) -> None:
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
