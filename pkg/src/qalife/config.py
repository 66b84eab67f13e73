"""Simulation configuration: YAML parsing, validation, canned scenarios.

Every key is optional except ``founders``. Unknown keys are rejected so that
typos fail loudly. The README lists every key.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, fields

import numpy as np
import yaml

from .ecosystem import MOVE_NAMES, Dynamics, ForcedEvent, GridSpec, RegionParams
from .measure import DEFAULT_BIN_COUNT, DEFAULT_PEAK_THRESHOLD
from .qcore import DEFAULT_QUBIT_CAP


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class Founder:
    a: float
    b: float = 0.0
    c: float = 0.0
    position: tuple[int, int] = (0, 0)
    age: float = 0.0


@dataclass(frozen=True)
class RegionOverride:
    """Region parameters replacing the defaults on ``rows[0]:rows[1], cols[0]:cols[1]``."""

    rows: tuple[int, int]
    cols: tuple[int, int]
    overrides: tuple[tuple[str, float], ...]


@dataclass(frozen=True)
class SimConfig:
    founders: tuple[Founder, ...]
    rows: int = 8
    cols: int = 8
    region: RegionParams = RegionParams()
    regions: tuple[RegionOverride, ...] = ()
    dt: float = 0.1
    total_time: float = 10.0
    epsilon: float = 0.01
    qubit_cap: int = DEFAULT_QUBIT_CAP
    realizations: int = 1
    seed: int = 0
    move_probs: tuple[float, ...] = (0.2, 0.2, 0.2, 0.2, 0.2)
    interaction_prob: float = 1.0
    recycle: bool = False
    trace_out_dead: bool = False
    include_dead_in_histograms: bool = True
    track_coherence: bool = True
    write_histograms: bool = True
    write_timeseries: bool = True
    write_events: bool = True
    bin_count: int = DEFAULT_BIN_COUNT
    peak_threshold: float = DEFAULT_PEAK_THRESHOLD
    forced_events: tuple[ForcedEvent, ...] = ()

    def grid(self) -> GridSpec:
        table = [self.region]
        index = np.zeros((self.rows, self.cols), dtype=int)
        for ov in self.regions:
            params = RegionParams(**{**_region_dict(self.region), **dict(ov.overrides)})
            if params not in table:
                table.append(params)
            index[ov.rows[0]:ov.rows[1], ov.cols[0]:ov.cols[1]] = table.index(params)
        return GridSpec(self.rows, self.cols, table, index)

    def dynamics(self, log_moves: bool = True) -> Dynamics:
        return Dynamics(
            dt=self.dt, epsilon=self.epsilon, qubit_cap=self.qubit_cap,
            move_probs=self.move_probs, interaction_prob=self.interaction_prob,
            recycle=self.recycle, trace_out_dead=self.trace_out_dead, log_moves=log_moves,
        )

    @property
    def n_steps(self) -> int:
        return int(round(self.total_time / self.dt))

    def to_yaml(self) -> str:
        return dump_config(self)

    def hash(self) -> str:
        canonical = json.dumps(to_dict(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()


REGION_KEYS = tuple(f.name for f in fields(RegionParams))


def _region_dict(p: RegionParams) -> dict:
    return {k: getattr(p, k) for k in REGION_KEYS}


# -- parsing -------------------------------------------------------------

def _reject_unknown(section: dict, allowed, where: str) -> None:
    if not isinstance(section, dict):
        raise ConfigError(where or "<root>", "expected a mapping")
    for key in section:
        if key not in allowed:
            path = f"{where}.{key}" if where else str(key)
            raise ConfigError(path, f"unknown key (allowed: {', '.join(sorted(allowed))})")


def _number(value, key: str, lo=None, hi=None, integer=False, lo_open=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(key, f"expected a number, got {value!r}")
    if integer:
        if int(value) != value:
            raise ConfigError(key, f"expected an integer, got {value!r}")
        value = int(value)
    else:
        value = float(value)
    if lo is not None and (value <= lo if lo_open else value < lo):
        raise ConfigError(key, f"must be {'>' if lo_open else '>='} {lo}, got {value}")
    if hi is not None and value > hi:
        raise ConfigError(key, f"must be <= {hi}, got {value}")
    return value


def _probability(value, key: str) -> float:
    return _number(value, key, 0.0, 1.0)


def _flag(value, key: str) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(key, f"expected true/false, got {value!r}")
    return value


def _cell(value, key: str, rows: int, cols: int) -> tuple[int, int]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(key, "expected [row, col]")
    r = _number(value[0], key, 0, rows - 1, integer=True)
    c = _number(value[1], key, 0, cols - 1, integer=True)
    return (r, c)


def _span(value, key: str, size: int) -> tuple[int, int]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(key, "expected [start, stop) as a two-element list")
    start = _number(value[0], key, 0, size, integer=True)
    stop = _number(value[1], key, 0, size, integer=True)
    if stop <= start:
        raise ConfigError(key, f"empty span [{start}, {stop})")
    return (start, stop)


def _parse_region(section: dict, where: str, base: dict) -> dict:
    out = dict(base)
    for k in REGION_KEYS:
        if k in section:
            key = f"{where}.{k}"
            out[k] = _number(section[k], key, 0.0) if k == "gamma" else _probability(section[k], key)
    return out


def _parse_founder(raw, key: str, rows: int, cols: int) -> Founder:
    _reject_unknown(raw, {"a", "b", "c", "position", "age"}, key)
    if "a" not in raw:
        raise ConfigError(f"{key}.a", "required")
    a = _number(raw["a"], f"{key}.a", 0.0, 1.0)
    b = _number(raw.get("b", 0.0), f"{key}.b")
    c = _number(raw.get("c", 0.0), f"{key}.c")
    if b * b + c * c > a * (1.0 - a) + 1e-12:
        raise ConfigError(key, f"genotype violates positivity b^2 + c^2 <= a(1-a) (a={a}, b={b}, c={c})")
    position = _cell(raw.get("position", [0, 0]), f"{key}.position", rows, cols)
    age = _number(raw.get("age", 0.0), f"{key}.age", 0.0)
    return Founder(a, b, c, position, age)


def _parse_forced(raw, key: str) -> ForcedEvent:
    _reject_unknown(raw, {"time", "type", "ids", "theta"}, key)
    for req in ("time", "type", "ids"):
        if req not in raw:
            raise ConfigError(f"{key}.{req}", "required")
    ids = raw["ids"]
    if not isinstance(ids, (list, tuple)):
        raise ConfigError(f"{key}.ids", "expected a list of individual ids")
    ids = tuple(_number(i, f"{key}.ids", 0, integer=True) for i in ids)
    theta = raw.get("theta")
    if theta is not None:
        theta = _number(theta, f"{key}.theta")
    try:
        return ForcedEvent(_number(raw["time"], f"{key}.time", 0.0), str(raw["type"]), ids, theta)
    except ValueError as exc:
        raise ConfigError(key, str(exc)) from None


SECTIONS = {
    "grid": {"rows", "cols", "regions"},
    "region": set(REGION_KEYS),
    "founders": None,
    "time": {"dt", "total"},
    "epsilon": None,
    "qubit_cap": None,
    "realizations": None,
    "seed": None,
    "motion": set(MOVE_NAMES),
    "interaction_prob": None,
    "toggles": {"recycle", "trace_out_dead", "include_dead_in_histograms", "track_coherence"},
    "outputs": {"histograms", "timeseries", "events"},
    "histogram": {"bins", "peak_threshold"},
    "forced_events": None,
}


def parse_dict(raw: dict) -> SimConfig:
    if raw is None:
        raw = {}
    _reject_unknown(raw, SECTIONS, "")
    for name, allowed in SECTIONS.items():
        if allowed is not None and name in raw:
            _reject_unknown(raw[name], allowed, name)

    grid = raw.get("grid", {})
    rows = _number(grid.get("rows", 8), "grid.rows", 1, integer=True)
    cols = _number(grid.get("cols", 8), "grid.cols", 1, integer=True)
    region = RegionParams(**_parse_region(raw.get("region", {}), "region", _region_dict(RegionParams())))

    overrides = []
    for i, ov in enumerate(grid.get("regions", []) or []):
        key = f"grid.regions[{i}]"
        _reject_unknown(ov, {"rows", "cols", *REGION_KEYS}, key)
        span_r = _span(ov.get("rows", [0, rows]), f"{key}.rows", rows)
        span_c = _span(ov.get("cols", [0, cols]), f"{key}.cols", cols)
        values = _parse_region(ov, key, {})
        overrides.append(RegionOverride(span_r, span_c, tuple(sorted(values.items()))))

    founders_raw = raw.get("founders")
    if not founders_raw or not isinstance(founders_raw, list):
        raise ConfigError("founders", "at least one founder is required")
    founders = tuple(_parse_founder(f, f"founders[{i}]", rows, cols) for i, f in enumerate(founders_raw))

    time = raw.get("time", {})
    dt = _number(time.get("dt", 0.1), "time.dt", 0.0, lo_open=True)
    total = _number(time.get("total", 10.0), "time.total", 0.0, lo_open=True)
    epsilon = _number(raw.get("epsilon", 0.01), "epsilon", 0.0, 2.0, lo_open=True)
    qubit_cap = _number(raw.get("qubit_cap", DEFAULT_QUBIT_CAP), "qubit_cap", 2, integer=True)
    if 2 * len(founders) > qubit_cap:
        raise ConfigError("qubit_cap", f"{len(founders)} founders need {2 * len(founders)} qubits, cap is {qubit_cap}")
    realizations = _number(raw.get("realizations", 1), "realizations", 1, integer=True)
    seed = _number(raw.get("seed", 0), "seed", 0, integer=True)

    motion = raw.get("motion", {})
    move_probs = tuple(_probability(motion.get(k, 0.2), f"motion.{k}") for k in MOVE_NAMES)
    if abs(sum(move_probs) - 1.0) > 1e-9:
        raise ConfigError("motion", f"move probabilities must sum to 1, got {sum(move_probs)}")
    interaction_prob = _probability(raw.get("interaction_prob", 1.0), "interaction_prob")

    toggles = raw.get("toggles", {})
    outputs = raw.get("outputs", {})
    hist = raw.get("histogram", {})
    bins = _number(hist.get("bins", DEFAULT_BIN_COUNT), "histogram.bins", 3, integer=True)
    if bins % 2 == 0:
        raise ConfigError("histogram.bins", f"must be odd so that -1, 0 and +1 are bin centres, got {bins}")

    forced_raw = raw.get("forced_events", []) or []
    if not isinstance(forced_raw, list):
        raise ConfigError("forced_events", "expected a list")
    forced = tuple(_parse_forced(ev, f"forced_events[{i}]") for i, ev in enumerate(forced_raw))

    return SimConfig(
        founders=founders, rows=rows, cols=cols, region=region, regions=tuple(overrides),
        dt=dt, total_time=total, epsilon=epsilon, qubit_cap=qubit_cap,
        realizations=realizations, seed=seed, move_probs=move_probs,
        interaction_prob=interaction_prob,
        recycle=_flag(toggles.get("recycle", False), "toggles.recycle"),
        trace_out_dead=_flag(toggles.get("trace_out_dead", False), "toggles.trace_out_dead"),
        include_dead_in_histograms=_flag(toggles.get("include_dead_in_histograms", True),
                                         "toggles.include_dead_in_histograms"),
        track_coherence=_flag(toggles.get("track_coherence", True), "toggles.track_coherence"),
        write_histograms=_flag(outputs.get("histograms", True), "outputs.histograms"),
        write_timeseries=_flag(outputs.get("timeseries", True), "outputs.timeseries"),
        write_events=_flag(outputs.get("events", True), "outputs.events"),
        bin_count=bins,
        peak_threshold=_probability(hist.get("peak_threshold", DEFAULT_PEAK_THRESHOLD), "histogram.peak_threshold"),
        forced_events=forced,
    )


def parse_config(text: str) -> SimConfig:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("<document>", f"not valid YAML: {exc}") from None
    return parse_dict(raw)


def load_config(path) -> SimConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


# -- serialization -------------------------------------------------------

def to_dict(cfg: SimConfig) -> dict:
    regions = []
    for ov in cfg.regions:
        regions.append({"rows": list(ov.rows), "cols": list(ov.cols), **dict(ov.overrides)})
    forced = []
    for ev in cfg.forced_events:
        item = {"time": ev.time, "type": ev.kind, "ids": list(ev.ids)}
        if ev.theta is not None:
            item["theta"] = ev.theta
        forced.append(item)
    return {
        "grid": {"rows": cfg.rows, "cols": cfg.cols, "regions": regions},
        "region": _region_dict(cfg.region),
        "founders": [
            {"a": f.a, "b": f.b, "c": f.c, "position": list(f.position), "age": f.age} for f in cfg.founders
        ],
        "time": {"dt": cfg.dt, "total": cfg.total_time},
        "epsilon": cfg.epsilon,
        "qubit_cap": cfg.qubit_cap,
        "realizations": cfg.realizations,
        "seed": cfg.seed,
        "motion": dict(zip(MOVE_NAMES, cfg.move_probs)),
        "interaction_prob": cfg.interaction_prob,
        "toggles": {
            "recycle": cfg.recycle,
            "trace_out_dead": cfg.trace_out_dead,
            "include_dead_in_histograms": cfg.include_dead_in_histograms,
            "track_coherence": cfg.track_coherence,
        },
        "outputs": {
            "histograms": cfg.write_histograms,
            "timeseries": cfg.write_timeseries,
            "events": cfg.write_events,
        },
        "histogram": {"bins": cfg.bin_count, "peak_threshold": cfg.peak_threshold},
        "forced_events": forced,
    }


def dump_config(cfg: SimConfig) -> str:
    return yaml.safe_dump(to_dict(cfg), sort_keys=False, default_flow_style=None)


# flat keyword -> (section, key) accepted by with_changes
_FLAT = {
    "rows": ("grid", "rows"), "cols": ("grid", "cols"),
    "dt": ("time", "dt"), "total_time": ("time", "total"),
    "recycle": ("toggles", "recycle"), "trace_out_dead": ("toggles", "trace_out_dead"),
    "include_dead_in_histograms": ("toggles", "include_dead_in_histograms"),
    "track_coherence": ("toggles", "track_coherence"),
    "write_histograms": ("outputs", "histograms"), "write_timeseries": ("outputs", "timeseries"),
    "write_events": ("outputs", "events"),
    "bin_count": ("histogram", "bins"), "peak_threshold": ("histogram", "peak_threshold"),
}


def _as_sections(changes: dict) -> dict:
    out: dict = {}
    for key, value in changes.items():
        if key in _FLAT:
            section, sub = _FLAT[key]
            out.setdefault(section, {})[sub] = value
        elif key in REGION_KEYS:
            out.setdefault("region", {})[key] = value
        else:
            out[key] = value
    return out


def _merge_sections(base: dict, changes: dict) -> dict:
    merged = copy.deepcopy(base)
    for key, value in changes.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key].update(value)
        else:
            merged[key] = value
    return merged


def with_changes(cfg: SimConfig, **changes) -> SimConfig:
    """Copy of ``cfg`` with flat or sectioned keys replaced, revalidated."""
    return parse_dict(_merge_sections(to_dict(cfg), _as_sections(changes)))


# -- canned scenarios ----------------------------------------------------

QUIET = {"mutation_rate": 0.0, "replication_prob": 0.0, "copy_error_prob": 0.0, "gamma": 1.0}


def _scenario_dicts() -> dict:
    fig4_founder = [{"a": 0.3, "b": 0.2, "c": 0.1, "position": [4, 4]}]
    fig5_common = {
        "grid": {"rows": 16, "cols": 16},
        "region": dict(QUIET),
        # coarse steps: few moves per lifetime, so only close founders meet
        "time": {"dt": 0.25, "total": 10.0},
        "qubit_cap": 8,
        "realizations": 500,
        "toggles": {"track_coherence": False},
        "outputs": {"timeseries": False},
    }
    fig5_genotypes = [(0.95, 0.0, 0.0), (0.85, 0.0, 0.0), (0.75, 0.0, 0.0), (0.65, 0.0, 0.0)]

    def founders(cells):
        return [{"a": a, "b": b, "c": c, "position": list(p)} for (a, b, c), p in zip(fig5_genotypes, cells)]

    return {
        "fig3-dissipation": {
            "grid": {"rows": 1, "cols": 1},
            "region": dict(QUIET),
            "founders": [{"a": 0.9}],
            "interaction_prob": 0.0,
        },
        "fig3-mutation": {
            "grid": {"rows": 1, "cols": 1},
            "region": dict(QUIET),
            "founders": [{"a": 0.7}],
            "interaction_prob": 0.0,
            "forced_events": [{"time": 1.0, "type": "mutate", "ids": [0], "theta": 1.2}],
        },
        "fig3-interaction": {
            "grid": {"rows": 1, "cols": 1},
            "region": dict(QUIET),
            "founders": [{"a": 0.8, "age": 1.0}, {"a": 0.2}],
            "interaction_prob": 0.0,
            "forced_events": [{"time": 1.0, "type": "interact", "ids": [0, 1]}],
        },
        "fig4a": {
            "region": dict(QUIET),
            "founders": fig4_founder,
            "qubit_cap": 8,
            "realizations": 1000,
            "outputs": {"timeseries": False},
        },
        "fig4b": {
            "region": {"mutation_rate": 0.0, "replication_prob": 0.05, "copy_error_prob": 0.25, "gamma": 1.0},
            "founders": fig4_founder,
            "qubit_cap": 8,
            "realizations": 1000,
            "outputs": {"timeseries": False},
        },
        "fig5a": {**fig5_common, "founders": founders([(7, 7), (7, 8), (8, 7), (8, 8)])},
        "fig5b": {**fig5_common, "founders": founders([(0, 0), (0, 8), (8, 0), (8, 8)])},
        "fig6": {
            "region": {"mutation_rate": 0.01, "replication_prob": 0.05, "copy_error_prob": 0.01, "gamma": 1.0},
            "founders": [
                {"a": 0.5, "b": 0.5, "c": 0.0, "position": [2, 2]},
                {"a": 0.3, "b": 0.3, "c": 0.2, "position": [5, 5]},
            ],
            "qubit_cap": 8,
            "realizations": 100,
            "toggles": {"track_coherence": True},
        },
    }


SCENARIOS = tuple(_scenario_dicts())


def scenario(name: str) -> SimConfig:
    table = _scenario_dicts()
    if name not in table:
        raise KeyError(f"unknown scenario {name!r}; valid names: {', '.join(SCENARIOS)}")
    return parse_dict(table[name])
