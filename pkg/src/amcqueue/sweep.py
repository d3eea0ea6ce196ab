"""Parameter sweeps over traffic intensity, rate ID or bandwidth, and CSV output."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, replace

from amcqueue.bmap import mean_arrival_rate, scale_intensity
from amcqueue.channel import ChannelModel
from amcqueue.config import ExperimentConfig
from amcqueue.errors import AmcQueueError, ConfigError
from amcqueue.metrics import Analysis, analyze, departure_throughput
from amcqueue.simulator import ComparisonReport, ModeMismatchError, SimConfig, SimResult, compare, run

RESIDUAL_TOL = 1e-10
FLOW_BALANCE_TOL = 1e-9

ANALYTIC_COLUMNS = ("avg_queue_len", "drop_prob", "throughput", "avg_delay_frames", "lambda_frame")
_REPORT_FIELDS = ("avg_queue_length", "drop_probability", "throughput", "avg_delay_frames")
_SIM_FIELDS = _REPORT_FIELDS + ("arrival_rate",)


@dataclass(frozen=True)
class SweepPoint:
    value: object
    analysis: Analysis | None = None
    simulation: SimResult | None = None
    comparison: ComparisonReport | None = None
    status: str = "ok"

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass(frozen=True)
class SweepResult:
    axis: str
    points: tuple
    metadata: dict

    @property
    def ok(self) -> bool:
        return all(p.ok for p in self.points)


def point_model(config: ExperimentConfig, value):
    """The (bmap, transmission, channel) triple at one sweep value."""
    bmap, tx, channel = config.bmap, config.transmission, config.channel
    if config.sweep_axis == "traffic_intensity":
        bmap = scale_intensity(bmap, value)
    elif config.sweep_axis == "rate_id":
        channel = ChannelModel.fixed(value)
    else:
        tx = replace(tx, bandwidth_b=value)
    return bmap, tx, channel


def _sort_key(v):
    return -1 if v is None else v


def check_invariants(an: Analysis) -> str:
    r = an.report
    if an.dist.residual > RESIDUAL_TOL:
        return "invariant:stationary_residual"
    dep = departure_throughput(an.dist, an.matrix.spec)
    if abs(dep - r.throughput) > FLOW_BALANCE_TOL:
        return "invariant:flow_balance"
    if not 0.0 <= r.avg_queue_length <= an.matrix.X:
        return "invariant:queue_bounds"
    return "ok"


def _metadata(config: ExperimentConfig) -> dict:
    meta = {
        "axis": config.sweep_axis,
        "preset": config.preset,
        "X": config.X,
        "er": config.er,
        "frame_duration": config.frame_duration,
        "bandwidth_b": config.transmission.bandwidth_b,
        "p_success": config.transmission.p_success,
        "transmission_mode": config.transmission.mode.value,
        "channel": [[r, p] for r, p in config.channel.rate_probs],
        "delay_unit": "frames",
        "lambda_frame": "mean Poisson arrivals per frame offered to the chain",
    }
    if config.sweep_axis == "traffic_intensity":
        caps = config.channel.capacities(config.transmission, config.table)
        mean_cap = sum(d * p for d, p in caps)
        lam = mean_arrival_rate(config.bmap) * config.frame_duration
        meta["intensity_definition"] = "rho * lambda_bmap * T / mean capacity"
        meta["intensity"] = [
            (rho * lam / mean_cap if mean_cap > 0 else None) for rho in config.sweep_values
        ]
    return meta


def run_sweep(config: ExperimentConfig, simulate: bool = False, seed: int | None = None) -> SweepResult:
    """Evaluate every sweep point in ascending axis order.

    A point that fails numerically is kept with an error status; the other
    points still run.
    """
    points = []
    for value in sorted(config.sweep_values, key=_sort_key):
        bmap, tx, channel = point_model(config, value)
        try:
            an = analyze(bmap, config.X, tx, channel, config.er, config.table)
            status = check_invariants(an)
        except AmcQueueError as exc:
            points.append(SweepPoint(value, status=f"error:{type(exc).__name__}"))
            continue
        sim = comp = None
        if simulate:
            settings = config.simulation
            sim = run(SimConfig(
                spec=bmap, X=config.X, transmission=tx, channel=channel, table=config.table,
                arrival_mode=settings.arrival_mode, frames=settings.frames, warmup=settings.warmup,
                seed=settings.seed if seed is None else seed, replications=settings.replications,
            ))
            if settings.arrival_mode.value == "poisson_per_phase":
                comp = compare(an.report, sim)
        points.append(SweepPoint(value, an, sim, comp, status))
    return SweepResult(config.sweep_axis, tuple(points), _metadata(config))


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, int):
        return str(v)
    return format(float(v), ".17g")


def analytic_csv(result: SweepResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("axis", "value") + ANALYTIC_COLUMNS + ("status",))
    for p in result.points:
        if p.analysis is None:
            cells = ["nan"] * len(ANALYTIC_COLUMNS)
        else:
            r = p.analysis.report
            cells = [_fmt(getattr(r, f)) for f in _REPORT_FIELDS + ("lambda_frame",)]
        w.writerow([result.axis, _fmt(p.value), *cells, p.status])
    return buf.getvalue()


def simulated_csv(result: SweepResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    se_cols = tuple("se_" + c for c in ANALYTIC_COLUMNS)
    w.writerow(("axis", "value") + ANALYTIC_COLUMNS + se_cols + ("replications", "se_method", "status"))
    for p in result.points:
        s = p.simulation
        if s is None:
            w.writerow([result.axis, _fmt(p.value)] + ["nan"] * 10 + ["0", "none", p.status])
            continue
        means = [_fmt(s.mean[f]) for f in _SIM_FIELDS]
        ses = [_fmt(s.se[f]) for f in _SIM_FIELDS]
        w.writerow([result.axis, _fmt(p.value), *means, *ses, s.replications, s.se_method, p.status])
    return buf.getvalue()


def verification_csv(result: SweepResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    names = ANALYTIC_COLUMNS[:4]
    header = ["axis", "value", *ANALYTIC_COLUMNS]
    header += [f"sim_{c}" for c in names] + [f"se_{c}" for c in names] + [f"z_{c}" for c in names]
    header += ["flagged", "status"]
    w.writerow(header)
    for p in result.points:
        if p.analysis is None or p.comparison is None:
            w.writerow([result.axis, _fmt(p.value)] + ["nan"] * (len(header) - 4) + ["", p.status])
            continue
        r = p.analysis.report
        rows = p.comparison.rows
        cells = [_fmt(getattr(r, f)) for f in _REPORT_FIELDS + ("lambda_frame",)]
        cells += [_fmt(c.simulated) for c in rows] + [_fmt(c.se) for c in rows] + [_fmt(c.z) for c in rows]
        w.writerow([result.axis, _fmt(p.value), *cells, ";".join(p.comparison.flagged), p.status])
    return buf.getvalue()


def metadata_json(result: SweepResult) -> str:
    return json.dumps(result.metadata, indent=2, sort_keys=True) + "\n"


def verify(config: ExperimentConfig, seed: int | None = None) -> SweepResult:
    """Analytic vs simulated comparison over the sweep (Poisson-per-phase arrivals)."""
    if config.simulation is None:
        raise ConfigError("simulation: verification needs a simulation block", field="simulation")
    if config.simulation.arrival_mode.value != "poisson_per_phase":
        raise ModeMismatchError("verification compares against the analytical model; "
                                "use arrival_mode: poisson_per_phase")
    return run_sweep(config, simulate=True, seed=seed)
