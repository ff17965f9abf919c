"""Scenario files: parsing, validation, presets and one-call execution."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from importlib import resources
from typing import Any

import numpy as np

from .baselines import CoDld, CoDldModify, GreedyIsl, GreedyNoIsl
from .constellation import (
    SHELL_PRESETS,
    STATION_PRESETS,
    BandwidthProfile,
    ContactTable,
    GroundStation,
    ShellConfig,
    build_contact_table,
    generate_walker_delta,
)
from .flowgraph import GenerationSchedule
from .planner import ADAPTIVE, PlannerConfig, adaptive_horizon
from .simulator import FaultModel, HurryScheduler, MetricsLog, StopCondition, run

SCHEDULERS = ("hurry", "codld", "codld_modify", "greedy_isl", "greedy_no_isl")
MB_PER_GB = 8000  # gigabytes to megabits


class ConfigError(ValueError):
    """Malformed scenario; the message names the offending field or line."""


@dataclass
class FixedVolume:
    per_sat_gb: float
    window_s: float
    kind: str = "fixed_volume"


@dataclass
class Continuous:
    rate_mbps: float
    duration_s: float
    kind: str = "continuous"


@dataclass
class ScenarioConfig:
    name: str = "custom"
    shell: str | dict = "desk"
    stations: str | list = "single"
    slot_seconds: float = 1.0
    gsl_bandwidth_gbps: float = 1.0
    isl_bandwidth_gbps: float = 1.0
    station_uplink_gbps: float = 100.0
    generation: FixedVolume | Continuous = field(default_factory=lambda: FixedVolume(0.25, 10.0))
    scheduler: str = "hurry"
    planner: dict = field(default_factory=dict)
    faults: dict = field(default_factory=dict)
    seed: int = 0
    slot_cap: int | None = None
    completion_fraction: float = 1.0
    require_completion: bool = False

    # -- resolution -------------------------------------------------------
    def shell_config(self) -> ShellConfig:
        if isinstance(self.shell, str):
            if self.shell not in SHELL_PRESETS:
                raise ConfigError(f"field shell: unknown preset {self.shell!r} (have {sorted(SHELL_PRESETS)})")
            return SHELL_PRESETS[self.shell]
        try:
            cfg = ShellConfig(**self.shell)
            cfg.validate()
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"field shell: {exc}") from None
        return cfg

    def station_list(self) -> list[GroundStation]:
        if isinstance(self.stations, str):
            if self.stations not in STATION_PRESETS:
                raise ConfigError(f"field stations: unknown preset {self.stations!r} (have {sorted(STATION_PRESETS)})")
            return list(STATION_PRESETS[self.stations])
        out = []
        for k, s in enumerate(self.stations):
            try:
                out.append(GroundStation(k, float(s["lat"]), float(s["lon"]), str(s.get("name", ""))))
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"field stations[{k}]: {exc}") from None
        return out

    def bandwidth(self) -> BandwidthProfile:
        return BandwidthProfile.from_gbps(
            self.gsl_bandwidth_gbps, self.isl_bandwidth_gbps, self.station_uplink_gbps, self.slot_seconds
        )

    def generation_schedule(self, n: int) -> GenerationSchedule:
        g = self.generation
        if isinstance(g, FixedVolume):
            slots = max(1, math.ceil(g.window_s / self.slot_seconds))
            units = int(round(g.per_sat_gb * MB_PER_GB))
            return GenerationSchedule.uniform(n, units, slots)
        slots = max(1, math.ceil(g.duration_s / self.slot_seconds))
        per_slot = int(round(g.rate_mbps * self.slot_seconds))
        return GenerationSchedule.constant_rate(n, per_slot, slots)

    def planner_config(self) -> PlannerConfig:
        try:
            return PlannerConfig(**self.planner)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"field planner: {exc}") from None

    def fault_model(self) -> FaultModel | None:
        if not self.faults:
            return None
        try:
            return FaultModel(rng_seed=self.seed, **self.faults)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"field faults: {exc}") from None

    def validate(self) -> None:
        for name in ("slot_seconds", "gsl_bandwidth_gbps", "isl_bandwidth_gbps", "station_uplink_gbps"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"field {name}: must be > 0")
        g = self.generation
        values = (g.per_sat_gb, g.window_s) if isinstance(g, FixedVolume) else (g.rate_mbps, g.duration_s)
        if not all(v > 0 for v in values):
            raise ConfigError("field generation: parameters must be > 0")
        if self.scheduler not in SCHEDULERS:
            raise ConfigError(f"field scheduler: {self.scheduler!r} not one of {SCHEDULERS}")
        if not 0 < self.completion_fraction <= 1:
            raise ConfigError("field completion_fraction: must be in (0, 1]")
        if self.slot_cap is not None and self.slot_cap < 1:
            raise ConfigError("field slot_cap: must be >= 1")
        self.shell_config()
        self.station_list()
        self.planner_config()
        self.fault_model()

    # -- (de)serialisation ------------------------------------------------
    def to_dict(self) -> dict:
        d = asdict(self)
        d["generation"] = asdict(self.generation)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_dict(cls, doc: Any) -> "ScenarioConfig":
        if not isinstance(doc, dict):
            raise ConfigError("top level: expected an object")
        known = {f for f in cls.__dataclass_fields__}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(f"field {unknown[0]}: unknown key")
        doc = dict(doc)
        gen = doc.pop("generation", None)
        cfg = cls(**doc)
        if gen is not None:
            cfg.generation = _parse_generation(gen)
        for name, typ in (("slot_seconds", float), ("gsl_bandwidth_gbps", float), ("isl_bandwidth_gbps", float),
                          ("station_uplink_gbps", float), ("seed", int), ("completion_fraction", float)):
            value = getattr(cfg, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"field {name}: expected a number, got {value!r}")
            setattr(cfg, name, typ(value))
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, text: str) -> "ScenarioConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
        return cls.from_dict(doc)

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        with open(path) as fh:
            return cls.from_json(fh.read())


def _parse_generation(gen: Any) -> FixedVolume | Continuous:
    if not isinstance(gen, dict) or "kind" not in gen:
        raise ConfigError("field generation: expected an object with a 'kind'")
    kinds = {"fixed_volume": FixedVolume, "continuous": Continuous}
    if gen["kind"] not in kinds:
        raise ConfigError(f"field generation.kind: {gen['kind']!r} not one of {sorted(kinds)}")
    try:
        return kinds[gen["kind"]](**gen)
    except TypeError as exc:
        raise ConfigError(f"field generation: {exc}") from None


def preset_names() -> list[str]:
    files = resources.files("leodl.presets").iterdir()
    return sorted(p.name[:-5] for p in files if p.name.endswith(".json"))


def load_preset(name: str) -> ScenarioConfig:
    if name not in preset_names():
        raise ConfigError(f"unknown preset {name!r} (have {preset_names()})")
    return ScenarioConfig.from_json(resources.files("leodl.presets").joinpath(f"{name}.json").read_text())


def make_scheduler(name: str, planner: PlannerConfig | None = None):
    if name == "hurry":
        return HurryScheduler(planner or PlannerConfig())
    table = {"codld": CoDld, "codld_modify": CoDldModify, "greedy_isl": GreedyIsl, "greedy_no_isl": GreedyNoIsl}
    if name not in table:
        raise ConfigError(f"unknown scheduler {name!r}")
    return table[name]()


@dataclass
class PreparedScenario:
    """Geometry and generation computed once; schedulers run against it."""

    config: ScenarioConfig
    contacts: ContactTable
    gen: GenerationSchedule
    max_slots: int


def prepare(cfg: ScenarioConfig) -> PreparedScenario:
    cfg.validate()
    topo = generate_walker_delta(cfg.shell_config())
    stations = cfg.station_list()
    bw = cfg.bandwidth()
    gen = cfg.generation_schedule(topo.n)
    window = gen.last_slot + 1
    if cfg.slot_cap is not None:
        cap = cfg.slot_cap
        contacts = build_contact_table(topo, stations, cap, cfg.slot_seconds, bw)
    else:
        # default cap: 10x the adaptive horizon, probed on a 16x-window table
        probe = max(256, 16 * window)
        contacts = build_contact_table(topo, stations, probe, cfg.slot_seconds, bw)
        h = adaptive_horizon(contacts, gen, np.zeros(topo.n, dtype=np.int64), 0, cfg.planner_config())
        cap = 10 * h.horizon if h.deliverable else probe
        if cap > probe:
            contacts = build_contact_table(topo, stations, cap, cfg.slot_seconds, bw)
    return PreparedScenario(cfg, contacts, gen, cap)


def execute(prep: PreparedScenario, scheduler: str | None = None, bandwidth: BandwidthProfile | None = None) -> MetricsLog:
    cfg = prep.config
    contacts = prep.contacts if bandwidth is None else prep.contacts.with_bandwidth(bandwidth)
    sched = make_scheduler(scheduler or cfg.scheduler, cfg.planner_config())
    return run(
        contacts,
        prep.gen,
        sched,
        faults=cfg.fault_model(),
        stop=StopCondition(max_slots=prep.max_slots),
        slot_seconds=cfg.slot_seconds,
        completion_fraction=cfg.completion_fraction,
    )


__all__ = [
    "ADAPTIVE", "ConfigError", "Continuous", "FixedVolume", "PreparedScenario", "SCHEDULERS",
    "ScenarioConfig", "execute", "load_preset", "make_scheduler", "prepare", "preset_names",
]
