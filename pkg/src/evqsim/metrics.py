"""Per-replication metrics, cross-replication aggregation, CSV/JSON export.

The CSV schema (column order is a stable contract):

    replication,seed,arrivals,balked_forced,balked_voluntary,reneged,served,
    in_system,balking_pct,reneging_pct,service_pct,throughput_per_min,avg_wait_min

Numbers are written in shortest round-trip decimal form, so re-parsing a
file reproduces the in-memory values exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

CSV_COLUMNS = (
    "replication", "seed", "arrivals", "balked_forced", "balked_voluntary",
    "reneged", "served", "in_system", "balking_pct", "reneging_pct",
    "service_pct", "throughput_per_min", "avg_wait_min",
)

# metric fields that aggregate across replications
AGGREGATED_METRICS = (
    "arrivals", "balked_forced", "balked_voluntary", "reneged", "served",
    "in_system", "balking_pct", "reneging_pct", "service_pct",
    "throughput_per_min", "avg_wait_min",
)


@dataclass
class MetricsReport:
    replication: int
    seed: int
    scenario: str
    arrivals: int
    balked_forced: int
    balked_voluntary: int
    reneged: int
    served: int
    in_system: int
    balking_pct: float
    reneging_pct: float
    service_pct: float
    throughput_per_min: float
    avg_wait_min: float
    degenerate: bool = False            # no arrivals at all
    config_digest: str = ""
    awt_trace: list = field(default_factory=list)
    ewt_trace: list = field(default_factory=list)

    def row(self) -> list:
        return [getattr(self, name) for name in CSV_COLUMNS]


def compute_report(station, horizon: float, *, replication: int, seed: int,
                   config_digest: str = "",
                   include_reneged_waits: bool = True) -> MetricsReport:
    """Summarize a finished replication.

    Percentages follow the station's conservation identity: balking and
    reneging are shares of all arrivals, service is the share of agents
    that joined the queue (served + reneged + still in system at the end).
    A run with zero arrivals reports zeros and is flagged degenerate.
    """
    arrivals = station.arrivals
    queued = station.served + station.reneged + station.in_system_at_end
    expected = (station.balked_forced + station.balked_voluntary + queued)
    if arrivals != expected:
        raise RuntimeError(
            f"conservation broken: {arrivals} arrivals vs {expected} dispositions")

    if arrivals > 0:
        balking_pct = 100.0 * (station.balked_forced + station.balked_voluntary) / arrivals
        reneging_pct = 100.0 * station.reneged / arrivals
    else:
        balking_pct = reneging_pct = 0.0
    service_pct = 100.0 * station.served / queued if queued > 0 else 0.0

    wait_sum = station.serve_wait_sum
    wait_count = station.serve_wait_count
    if include_reneged_waits:
        wait_sum += station.renege_wait_sum
        wait_count += station.renege_wait_count
    avg_wait = wait_sum / wait_count if wait_count > 0 else 0.0

    return MetricsReport(
        replication=replication,
        seed=seed,
        scenario=station.scenario.value,
        arrivals=arrivals,
        balked_forced=station.balked_forced,
        balked_voluntary=station.balked_voluntary,
        reneged=station.reneged,
        served=station.served,
        in_system=station.in_system_at_end,
        balking_pct=balking_pct,
        reneging_pct=reneging_pct,
        service_pct=service_pct,
        throughput_per_min=station.served / horizon if horizon > 0 else 0.0,
        avg_wait_min=avg_wait,
        degenerate=(arrivals == 0),
        config_digest=config_digest,
        awt_trace=list(station.awt_trace),
        ewt_trace=list(station.ewt_trace),
    )


@dataclass(frozen=True)
class MetricStats:
    mean: float
    sd: float
    ci95_half_width: float


@dataclass
class AggregateReport:
    rounds: int
    scenario: str
    config_digest: str
    stats: dict  # metric name -> MetricStats


def _stats(values: list) -> MetricStats:
    # Sorting first makes the reduction independent of replication order,
    # so permuted report lists aggregate to bit-identical results.
    xs = sorted(float(v) for v in values)
    n = len(xs)
    mean = math.fsum(xs) / n
    if n > 1:
        var = math.fsum((x - mean) ** 2 for x in xs) / (n - 1)
        sd = math.sqrt(var)
    else:
        sd = 0.0
    return MetricStats(mean=mean, sd=sd, ci95_half_width=1.96 * sd / math.sqrt(n))


def aggregate(reports: Iterable[MetricsReport]) -> AggregateReport:
    """Mean / sd / 95% normal CI per metric across replications."""
    reports = list(reports)
    if not reports:
        raise ValueError("aggregate() needs at least one report")
    digests = {r.config_digest for r in reports}
    scenarios = {r.scenario for r in reports}
    if len(digests) > 1 or len(scenarios) > 1:
        raise ValueError(
            f"cannot aggregate reports from different configurations: "
            f"scenarios={sorted(scenarios)}, digests={sorted(digests)}")
    stats = {name: _stats([getattr(r, name) for r in reports])
             for name in AGGREGATED_METRICS}
    return AggregateReport(rounds=len(reports), scenario=reports[0].scenario,
                           config_digest=reports[0].config_digest, stats=stats)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return repr(value)
    return str(value)


def export_csv(reports: Iterable[MetricsReport], path, provenance: Optional[dict] = None) -> None:
    """One row per replication; a leading comment embeds the provenance."""
    lines = []
    if provenance is not None:
        lines.append("# " + json.dumps(provenance, sort_keys=True))
    lines.append(",".join(CSV_COLUMNS))
    for report in reports:
        lines.append(",".join(_fmt(v) for v in report.row()))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_report_csv(path) -> list[dict]:
    """Parse a file written by export_csv back into per-row dicts."""
    rows = []
    with open(path) as fh:
        header = None
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if header is None:
                header = line.split(",")
                if tuple(header) != CSV_COLUMNS:
                    raise ValueError(f"unexpected CSV columns: {header}")
                continue
            parts = line.split(",")
            row = {}
            for name, text in zip(header, parts):
                row[name] = float(text) if ("." in text or "e" in text or "inf" in text) else int(text)
            rows.append(row)
    return rows


def export_json(path, aggregate_report: AggregateReport,
                provenance: Optional[dict] = None,
                reports: Optional[list[MetricsReport]] = None,
                include_wait_traces: bool = False) -> None:
    """Aggregate results as JSON; optionally per-replication wait traces."""
    payload = {
        "provenance": provenance or {},
        "scenario": aggregate_report.scenario,
        "rounds": aggregate_report.rounds,
        "config_digest": aggregate_report.config_digest,
        "metrics": {
            name: {"mean": s.mean, "sd": s.sd, "ci95_half_width": s.ci95_half_width}
            for name, s in aggregate_report.stats.items()
        },
    }
    if include_wait_traces and reports is not None:
        payload["replications"] = [
            {
                "replication": r.replication,
                "seed": r.seed,
                "awt_trace": [[t, v] for t, v in r.awt_trace],
                "ewt_trace": [[t, v] for t, v in r.ewt_trace],
            }
            for r in reports
        ]
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
