"""Latency benchmark: collection, statistics, and pipeline orchestration."""

from tollgrid.bench.harness import (
    EXIT_BAD_SCENARIO,
    EXIT_CHECK_FAILED,
    EXIT_OK,
    EXIT_TIMEOUT,
    Scenario,
    ScenarioError,
    load_scenario,
    parse_scenario,
    run_bench,
)
from tollgrid.bench.stats import (
    CSV_HEADER,
    DEFAULT_SKIP_MESSAGES,
    STAGE_COLUMNS,
    CollectResult,
    IncompleteTraceError,
    StageLatency,
    WarmupPolicy,
    build_report,
    collect,
    distribution,
    percentile,
    write_latency_csv,
    write_report_json,
)

__all__ = [
    "CSV_HEADER",
    "DEFAULT_SKIP_MESSAGES",
    "EXIT_BAD_SCENARIO",
    "EXIT_CHECK_FAILED",
    "EXIT_OK",
    "EXIT_TIMEOUT",
    "STAGE_COLUMNS",
    "CollectResult",
    "IncompleteTraceError",
    "Scenario",
    "ScenarioError",
    "StageLatency",
    "WarmupPolicy",
    "build_report",
    "collect",
    "distribution",
    "load_scenario",
    "parse_scenario",
    "percentile",
    "run_bench",
    "write_latency_csv",
    "write_report_json",
]
