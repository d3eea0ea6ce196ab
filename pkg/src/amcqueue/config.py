"""Experiment configuration: YAML ingestion, defaults and presets."""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, replace

import yaml

from amcqueue.bmap import BmapSpec, paper_bmap, validate
from amcqueue.channel import ChannelModel, RateRow, RateTable, TransmissionMode, TransmissionModel, rate_id_for_snr
from amcqueue.errors import ConfigError, StructuralError
from amcqueue.simulator import ArrivalMode

SWEEP_AXES = ("traffic_intensity", "rate_id", "bandwidth_b")


def _tolerated(v) -> bool:
    # A zero-traffic process (no batches, zero sojourn rate) is degenerate but
    # still analyzable.
    if v.check == "arrivals_occur":
        return True
    return v.check == "d0_diagonal_negative" and v.magnitude == 0.0


@dataclass(frozen=True)
class SimulationSettings:
    frames: int = 1_100_000
    warmup: int = 100_000
    seed: int = 20121
    replications: int = 1
    arrival_mode: ArrivalMode = ArrivalMode.POISSON_PER_PHASE


@dataclass(frozen=True)
class ExperimentConfig:
    bmap: BmapSpec
    transmission: TransmissionModel
    channel: ChannelModel
    table: RateTable
    X: int
    er: float
    sweep_axis: str
    sweep_values: tuple
    simulation: SimulationSettings | None = None
    output: str | None = None
    preset: str = "paper-7.1"

    @property
    def frame_duration(self) -> float:
        return self.bmap.frame_duration


def _paper_preset() -> dict:
    return {
        "bmap": {"D": [m.tolist() for m in paper_bmap().D]},
        "transmission": {"bandwidth_b": 150, "p_success": 0.9, "mode": "paper_literal"},
        "channel": {"rate_id": 0},
        "queue": {"X": 150, "er": 1e-9, "T": 1.0},
        "sweep": {"traffic_intensity": [0.25 * i for i in range(1, 13)]},
    }


def _desk_preset() -> dict:
    base = _paper_preset()
    base["transmission"]["bandwidth_b"] = 2
    base["queue"]["X"] = 50
    return base


PRESETS = {"paper-7.1": _paper_preset, "desk": _desk_preset}


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if key == "sweep" and isinstance(value, dict):
            out["sweep"] = copy.deepcopy(value)  # the sweep axis is replaced, never merged
        elif isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _number(raw, path, *, integer=False, minimum=None, strict_min=False, maximum=None):
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {raw!r}", field=path)
    if integer and (isinstance(raw, float) and not raw.is_integer()):
        raise ConfigError(f"{path}: expected an integer, got {raw!r}", field=path)
    if not math.isfinite(raw):
        raise ConfigError(f"{path}: must be finite", field=path)
    if minimum is not None and (raw <= minimum if strict_min else raw < minimum):
        op = ">" if strict_min else ">="
        raise ConfigError(f"{path}: must be {op} {minimum}, got {raw!r}", field=path)
    if maximum is not None and raw > maximum:
        raise ConfigError(f"{path}: must be <= {maximum}, got {raw!r}", field=path)
    return int(raw) if integer else float(raw)


def _rate_id(raw, path, table):
    if raw is None or raw == "none":
        return None
    rid = _number(raw, path, integer=True, minimum=0)
    if rid >= len(table):
        raise ConfigError(f"{path}: rate id {rid} outside 0..{len(table) - 1}", field=path)
    return rid


def _section(doc, name):
    sec = doc.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"{name}: expected a mapping", field=name)
    return sec


def _check_keys(sec, name, allowed):
    for key in sec:
        if key not in allowed:
            raise ConfigError(f"{name}.{key}: unknown field", field=f"{name}.{key}")


def build_config(doc: dict, preset: str | None = None) -> ExperimentConfig:
    """Validate a parsed document on top of a preset (default ``paper-7.1``)."""
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError("top level: expected a mapping", field="")
    _check_keys(doc, "config", {"preset", "bmap", "rate_table", "transmission", "channel",
                                 "queue", "sweep", "simulation", "output"})
    preset = preset or doc.get("preset", "paper-7.1")
    if preset not in PRESETS:
        raise ConfigError(f"preset: unknown preset {preset!r}; choose from {sorted(PRESETS)}",
                          field="preset")
    merged = _merge(PRESETS[preset](), doc)

    queue = _section(merged, "queue")
    _check_keys(queue, "queue", {"X", "er", "T"})
    X = _number(queue.get("X"), "queue.X", integer=True, minimum=1)
    er = _number(queue.get("er"), "queue.er", minimum=0.0, strict_min=True, maximum=0.999999)
    T = _number(queue.get("T"), "queue.T", minimum=0.0)

    bsec = _section(merged, "bmap")
    _check_keys(bsec, "bmap", {"D"})
    try:
        bmap = BmapSpec(tuple(bsec.get("D", ())), T)
    except (StructuralError, TypeError, ValueError) as exc:
        raise ConfigError(f"bmap.D: {exc}", field="bmap.D") from None
    fatal = [v for v in validate(bmap).violations if not _tolerated(v)]
    if fatal:
        v = fatal[0]
        raise ConfigError(f"bmap.D: {v.check} violated, {v.message}", field="bmap.D")

    table = RateTable.default()
    if merged.get("rate_table") is not None:
        rows = merged["rate_table"]
        if not isinstance(rows, list) or not rows:
            raise ConfigError("rate_table: expected a nonempty list of rows", field="rate_table")
        parsed = []
        for i, row in enumerate(rows):
            path = f"rate_table[{i}]"
            if not isinstance(row, dict):
                raise ConfigError(f"{path}: expected a mapping", field=path)
            parsed.append(RateRow(
                i,
                str(row.get("modulation", f"rate {i}")),
                _number(row.get("bits_per_symbol"), f"{path}.bits_per_symbol", minimum=0.0, strict_min=True),
                _number(row.get("snr_threshold_db"), f"{path}.snr_threshold_db"),
            ))
        try:
            table = RateTable(tuple(parsed))
        except StructuralError as exc:
            raise ConfigError(f"rate_table: {exc}", field="rate_table") from None

    tsec = _section(merged, "transmission")
    _check_keys(tsec, "transmission", {"bandwidth_b", "p_success", "mode"})
    b = _number(tsec.get("bandwidth_b"), "transmission.bandwidth_b", integer=True, minimum=1)
    p = _number(tsec.get("p_success"), "transmission.p_success", minimum=0.0, strict_min=True, maximum=1.0)
    try:
        mode = TransmissionMode(tsec.get("mode"))
    except ValueError:
        raise ConfigError(
            f"transmission.mode: expected one of {[m.value for m in TransmissionMode]}",
            field="transmission.mode",
        ) from None
    transmission = TransmissionModel(b, p, mode)

    # an explicit channel replaces the preset one instead of merging keys
    csec = _section(doc if doc.get("channel") else merged, "channel")
    _check_keys(csec, "channel", {"rate_id", "snr_db", "distribution"})
    given = [k for k in ("rate_id", "snr_db", "distribution") if k in csec]
    if len(given) != 1:
        raise ConfigError("channel: give exactly one of rate_id, snr_db, distribution", field="channel")
    if given[0] == "rate_id":
        channel = ChannelModel.fixed(_rate_id(csec["rate_id"], "channel.rate_id", table))
    elif given[0] == "snr_db":
        channel = ChannelModel.fixed(rate_id_for_snr(_number(csec["snr_db"], "channel.snr_db"), table))
    else:
        dist = csec["distribution"]
        if not isinstance(dist, dict) or not dist:
            raise ConfigError("channel.distribution: expected a mapping rate_id -> probability",
                              field="channel.distribution")
        probs = {}
        for key, val in dist.items():
            path = f"channel.distribution.{key}"
            if key is None or key == "none":
                rid = None
            else:
                try:
                    rid = _rate_id(int(key), path, table)
                except ValueError:
                    raise ConfigError(f"{path}: rate ids are integers or 'none'", field=path) from None
            probs[rid] = _number(val, path, minimum=0.0, maximum=1.0)
        try:
            channel = ChannelModel(probs)
        except StructuralError as exc:
            raise ConfigError(f"channel.distribution: {exc}", field="channel.distribution") from None

    ssec = _section(merged, "sweep")
    axes = [a for a in SWEEP_AXES if a in ssec]
    _check_keys(ssec, "sweep", set(SWEEP_AXES))
    if len(axes) != 1:
        raise ConfigError(f"sweep: exactly one axis required, got {axes or 'none'}", field="sweep")
    axis = axes[0]
    raw_values = ssec[axis]
    if not isinstance(raw_values, list) or not raw_values:
        raise ConfigError(f"sweep.{axis}: expected a nonempty list", field=f"sweep.{axis}")
    values = []
    for i, v in enumerate(raw_values):
        path = f"sweep.{axis}[{i}]"
        if axis == "traffic_intensity":
            values.append(_number(v, path, minimum=0.0, strict_min=True))
        elif axis == "rate_id":
            values.append(_rate_id(v, path, table))
        else:
            values.append(_number(v, path, integer=True, minimum=1))

    simulation = None
    if merged.get("simulation") is not None:
        sim = _section(merged, "simulation")
        _check_keys(sim, "simulation", {"frames", "warmup", "seed", "replications", "arrival_mode"})
        defaults = SimulationSettings()
        frames = _number(sim.get("frames", defaults.frames), "simulation.frames", integer=True, minimum=2)
        warmup = _number(sim.get("warmup", frames // 10), "simulation.warmup", integer=True, minimum=0)
        if warmup >= frames:
            raise ConfigError("simulation.warmup: must be smaller than simulation.frames",
                              field="simulation.warmup")
        seed = _number(sim.get("seed", defaults.seed), "simulation.seed", integer=True, minimum=0,
                       maximum=2**64 - 1)
        reps = _number(sim.get("replications", defaults.replications), "simulation.replications",
                       integer=True, minimum=1)
        try:
            arrival_mode = ArrivalMode(sim.get("arrival_mode", defaults.arrival_mode.value))
        except ValueError:
            raise ConfigError("simulation.arrival_mode: expected poisson_per_phase or exact_bmap",
                              field="simulation.arrival_mode") from None
        simulation = SimulationSettings(frames, warmup, seed, reps, arrival_mode)

    output = merged.get("output")
    if output is not None and not isinstance(output, str):
        raise ConfigError("output: expected a path string", field="output")

    return ExperimentConfig(
        bmap=bmap, transmission=transmission, channel=channel, table=table, X=X, er=er,
        sweep_axis=axis, sweep_values=tuple(values), simulation=simulation, output=output,
        preset=preset,
    )


def load_config(path, preset: str | None = None) -> ExperimentConfig:
    """Read a YAML experiment file; omitted fields come from the preset."""
    with open(path) as fh:
        text = fh.read()
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark else None
        col = mark.column + 1 if mark else None
        where = f" at line {line}, column {col}" if mark else ""
        raise ConfigError(f"cannot parse {path}{where}: {getattr(exc, 'problem', exc)}",
                          line=line, column=col) from None
    return build_config(doc, preset)


def with_simulation(config: ExperimentConfig, **overrides) -> ExperimentConfig:
    sim = config.simulation or SimulationSettings()
    return replace(config, simulation=replace(sim, **overrides))
