"""Discrete-time execution of transfer schedules, with faults, monitoring and metrics."""
from __future__ import annotations

import csv
import json
import logging
import math
from bisect import bisect_right
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .constellation import ContactTable
from .flowgraph import GenerationSchedule, TransmissionPlan, Transfer
from .planner import NEVER, PlannerConfig, QueueSnapshot, adaptive_horizon, compute_sqdi, make_plan, replan

log = logging.getLogger(__name__)

SUMMARY_SCHEMA = 1
_HEATMAP_ROWS = 1000


class FifoQueue:
    """Data units bucketed by generation slot, drained oldest-first."""

    __slots__ = ("_buckets", "total")

    def __init__(self) -> None:
        self._buckets: dict[int, int] = {}
        self.total = 0

    def push(self, gen_slot: int, units: int) -> None:
        if units <= 0:
            return
        self._buckets[gen_slot] = self._buckets.get(gen_slot, 0) + units
        self.total += units

    def pop(self, units: int) -> list[tuple[int, int]]:
        out = []
        units = min(units, self.total)
        self.total -= units
        for g in sorted(self._buckets):
            if units == 0:
                break
            have = self._buckets[g]
            take = min(have, units)
            out.append((g, take))
            units -= take
            if take == have:
                del self._buckets[g]
            else:
                self._buckets[g] = have - take
        return out

    def buckets(self) -> dict[int, int]:
        return dict(sorted(self._buckets.items()))


@dataclass
class SimulationState:
    slot: int
    queues: list[FifoQueue]
    station_buffer: np.ndarray
    ground_received: np.ndarray
    generated: int = 0
    delivered: int = 0
    dropped: int = 0
    uplinked: int = 0

    @classmethod
    def initial(cls, n: int, m: int, gen: GenerationSchedule, slot: int = 0) -> "SimulationState":
        state = cls(slot, [FifoQueue() for _ in range(n)], np.zeros(m, np.int64), np.zeros(m, np.int64))
        state._generate(gen, slot)
        return state

    @property
    def q(self) -> np.ndarray:
        return np.fromiter((x.total for x in self.queues), dtype=np.int64, count=len(self.queues))

    @property
    def queued(self) -> int:
        return sum(x.total for x in self.queues)

    def _generate(self, gen: GenerationSchedule, slot: int) -> None:
        p = gen.at(slot)
        for i in np.flatnonzero(p):
            self.queues[i].push(slot, int(p[i]))
        self.generated += int(p.sum())

    def conserved(self) -> bool:
        return self.generated == self.queued + self.delivered + self.dropped


@dataclass(frozen=True)
class FaultModel:
    packet_loss_rate: float = 0.0
    link_failure_rate: float = 0.0
    rng_seed: int = 0
    retransmit: bool = True

    def __post_init__(self) -> None:
        for name in ("packet_loss_rate", "link_failure_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")

    @property
    def active(self) -> bool:
        return self.packet_loss_rate > 0 or self.link_failure_rate > 0

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.rng_seed)


@dataclass
class StepReport:
    slot: int
    realized: list[Transfer]
    delivered: int = 0
    lost: int = 0
    dropped: int = 0
    voided: int = 0
    rejected: int = 0
    latency: dict[int, int] = field(default_factory=dict)


def _clamp(state: SimulationState, actions: list[Transfer], contacts: ContactTable, slot: int) -> tuple[list[Transfer], int]:
    """Drop actions on absent links, then clamp to link capacity and sender backlog."""
    bw = contacts.bandwidth
    row = contacts._row(slot)
    links = set(contacts.isl_links(slot))
    merged: dict[tuple[str, int, int], int] = {}
    rejected = 0
    for a in actions:
        if a.units <= 0:
            continue
        if a.kind == "gsl":
            ok = 0 <= a.dst < contacts.n_stations and contacts.gsl[row, a.dst] == a.src
        elif a.kind == "isl":
            ok = (a.src, a.dst) in links
        else:
            ok = False
        if not ok:
            rejected += 1
            log.debug("slot %d: rejected action on nonexistent link %s", slot, a)
            continue
        key = (a.kind, a.src, a.dst)
        merged[key] = merged.get(key, 0) + int(a.units)
    left = state.q
    out = []
    for (kind, src, dst), units in sorted(merged.items()):
        units = min(units, bw.gsl if kind == "gsl" else bw.isl, int(left[src]))
        if units > 0:
            left[src] -= units
            out.append(Transfer(slot, kind, src, dst, units))
    return out, rejected


def step(
    state: SimulationState,
    actions: list[Transfer],
    contacts: ContactTable,
    gen: GenerationSchedule,
    faults: FaultModel | None = None,
    rng: np.random.Generator | None = None,
) -> StepReport:
    """Advance ``state`` by one slot in place.

    Station buffers first uplink what arrived earlier, then every transfer
    happens simultaneously: senders draw on their start-of-slot queues and
    receivers can forward the new data from the next slot on.
    """
    t = state.slot
    up = np.minimum(state.station_buffer, contacts.bandwidth.uplink)
    state.station_buffer -= up
    state.uplinked += int(up.sum())

    clamped, rejected = _clamp(state, actions, contacts, t)
    report = StepReport(t, [], rejected=rejected)
    inbound: list[tuple[int, list[tuple[int, int]]]] = []
    use_faults = faults is not None and faults.active
    for a in clamped:
        sent = a.units
        lost = 0
        if use_faults:
            if faults.link_failure_rate > 0 and rng.random() < faults.link_failure_rate:
                report.voided += a.units
                continue
            if faults.packet_loss_rate > 0:
                lost = int(rng.binomial(a.units, faults.packet_loss_rate))
            sent = a.units - lost
        report.lost += lost
        if lost and not faults.retransmit:
            chunks = state.queues[a.src].pop(sent + lost)
            state.dropped += lost
            report.dropped += lost
            chunks = _take(chunks, sent)
        else:
            chunks = state.queues[a.src].pop(sent)
        if sent == 0:
            continue
        report.realized.append(a._replace(units=sent))
        if a.kind == "isl":
            inbound.append((a.dst, chunks))
        else:
            state.station_buffer[a.dst] += sent
            state.ground_received[a.dst] += sent
            report.delivered += sent
            for g, u in chunks:
                lat = t + 1 - g
                report.latency[lat] = report.latency.get(lat, 0) + u
    for dst, chunks in inbound:
        for g, u in chunks:
            state.queues[dst].push(g, u)
    state.delivered += report.delivered
    state.slot = t + 1
    state._generate(gen, t + 1)
    return report


def _take(chunks: list[tuple[int, int]], units: int) -> list[tuple[int, int]]:
    out = []
    for g, u in chunks:
        if units <= 0:
            break
        out.append((g, min(u, units)))
        units -= u
    return out


def idle_advance(state: SimulationState, target: int, contacts: ContactTable, gen: GenerationSchedule) -> None:
    """Jump to ``target`` across slots where nothing is sent and nothing is generated."""
    k = target - state.slot
    if k <= 0:
        return
    up = np.minimum(state.station_buffer, k * contacts.bandwidth.uplink)
    state.station_buffer -= up
    state.uplinked += int(up.sum())
    state.slot = target
    state._generate(gen, target)


@dataclass
class RunContext:
    contacts: ContactTable
    gen: GenerationSchedule
    max_slots: int


class MetricsLog:
    """Per-run measurements; sparse internally, expanded on export."""

    def __init__(self, scheduler: str, n_sats: int, slot_seconds: float, total: int, fraction: float = 1.0):
        self.scheduler = scheduler
        self.n_sats = n_sats
        self.slot_seconds = slot_seconds
        self.total_generated = total
        self.completion_fraction = fraction
        self.deliveries: dict[int, int] = {}
        self.latency_hist: dict[int, int] = {}
        self.queue_samples: list[tuple[int, np.ndarray]] = []
        self.sqdi: list[tuple[int, float]] = []
        self.t_download: int | None = None
        self.final_slot = 0
        self.replans = 0
        self.plan_refreshes = 0
        self.lost = 0
        self.dropped = 0
        self.voided = 0
        self.rejected = 0
        self.delivered = 0
        self.generation_end = 0

    def record(self, report: StepReport) -> None:
        if report.delivered:
            self.deliveries[report.slot] = report.delivered
            self.delivered += report.delivered
        for lat, u in report.latency.items():
            self.latency_hist[lat] = self.latency_hist.get(lat, 0) + u
        self.lost += report.lost
        self.dropped += report.dropped
        self.voided += report.voided
        self.rejected += report.rejected

    def sample_queues(self, slot: int, q: np.ndarray) -> None:
        if not self.queue_samples or not np.array_equal(self.queue_samples[-1][1], q):
            self.queue_samples.append((slot, q.copy()))

    @property
    def completed(self) -> bool:
        return self.t_download is not None

    @property
    def progress(self) -> float:
        return self.delivered / self.total_generated if self.total_generated else 1.0

    def throughput(self) -> np.ndarray:
        """Units delivered during each slot ``0 .. final_slot - 1``."""
        out = np.zeros(self.final_slot, dtype=np.int64)
        for s, u in self.deliveries.items():
            out[s] = u
        return out

    def progress_series(self) -> np.ndarray:
        """Delivered fraction at the start of each slot ``0 .. final_slot``."""
        cum = np.concatenate([[0], np.cumsum(self.throughput())])
        return cum / self.total_generated if self.total_generated else np.ones_like(cum, dtype=float)

    def queues_at(self, slot: int) -> np.ndarray:
        k = bisect_right([s for s, _ in self.queue_samples], slot) - 1
        return self.queue_samples[k][1] if k >= 0 else np.zeros(self.n_sats, dtype=np.int64)

    def crossing_slot(self, fraction: float) -> int | None:
        """First slot by whose start at least ``fraction`` of the data has landed."""
        need = math.ceil(fraction * self.total_generated - 1e-9)
        if need <= 0:
            return 0
        acc = 0
        for s in sorted(self.deliveries):
            acc += self.deliveries[s]
            if acc >= need:
                return s + 1
        return None

    def steady_throughput(self, warmup: float = 0.5) -> float:
        """Mean units per slot over the later part of the generation window."""
        end = max(self.generation_end, 1)
        lo = int(end * warmup)
        hi = min(end, self.final_slot)
        if hi <= lo:
            return 0.0
        return float(self.throughput()[lo:hi].sum()) / (hi - lo)

    def summary(self) -> dict:
        s = self.slot_seconds
        q = quartile_times(self)
        lat = latency_percentiles(self, (50, 95))
        t_dl = None if self.t_download is None else self.t_download * s
        return {
            "schema_version": SUMMARY_SCHEMA,
            "scheduler": self.scheduler,
            "slot_seconds": s,
            "completion_fraction_target": self.completion_fraction,
            "completed": self.completed,
            "t_download_slots": self.t_download,
            "t_download_s": t_dl,
            "final_slot": self.final_slot,
            "progress": round(self.progress, 9),
            "generated_mb": self.total_generated,
            "delivered_mb": self.delivered,
            "lost_mb": self.lost,
            "dropped_mb": self.dropped,
            "voided_mb": self.voided,
            "rejected_actions": self.rejected,
            "throughput_mean_mbps": round(self.delivered / max(self.final_slot, 1) / s, 6),
            "steady_throughput_mbps": round(self.steady_throughput() / s, 6),
            "latency_p50_s": None if lat[0] is None else lat[0] * s,
            "latency_p95_s": None if lat[1] is None else lat[1] * s,
            "quartile_times_s": [None if x is None else x * s for x in q],
            "replans": self.replans,
            "plan_refreshes": self.plan_refreshes,
        }

    def export(self, out_dir: str | Path, prefix: str = "") -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        s = self.slot_seconds
        paths = []

        def write(name: str, header: list[str], rows) -> None:
            p = out / f"{prefix}{name}"
            with p.open("w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(header)
                w.writerows(rows)
            paths.append(p)

        cum = 0
        rows = []
        for slot in sorted(self.deliveries):
            u = self.deliveries[slot]
            cum += u
            rows.append([slot, _num(slot * s), u, _num(u / s), _num(cum / self.total_generated)])
        write("throughput.csv", ["slot", "time_s", "delivered_mb", "throughput_mbps", "progress"], rows)
        prog = self.progress_series()
        keep = _stride_index(len(prog), _HEATMAP_ROWS)
        write("progress.csv", ["slot", "time_s", "progress"], [[int(i), _num(i * s), _num(prog[i])] for i in keep])
        keep = _stride_index(self.final_slot + 1, _HEATMAP_ROWS)
        write(
            "queues.csv",
            ["slot", "time_s"] + [f"sat{i}_mb" for i in range(self.n_sats)],
            [[int(i), _num(i * s)] + self.queues_at(int(i)).tolist() for i in keep],
        )
        write("latency.csv", ["latency_s", "units_mb", "cdf"], [[_num(l * s), u, _num(c)] for l, u, c in _cdf_rows(self)])
        p = out / f"{prefix}summary.json"
        p.write_text(json.dumps(self.summary(), sort_keys=True, indent=2) + "\n")
        paths.append(p)
        return paths


def _num(x: float) -> str:
    return f"{x:.6g}"


def _stride_index(length: int, rows: int) -> np.ndarray:
    if length <= rows:
        return np.arange(length)
    idx = np.unique(np.linspace(0, length - 1, rows).round().astype(int))
    return idx


def _cdf_rows(log: MetricsLog):
    total = sum(log.latency_hist.values())
    acc = 0
    for lat in sorted(log.latency_hist):
        u = log.latency_hist[lat]
        acc += u
        yield lat, u, acc / total


def latency_cdf(log: MetricsLog) -> list[tuple[int, float]]:
    """Empirical CDF of per-unit latency in slots."""
    return [(lat, c) for lat, _, c in _cdf_rows(log)]


def latency_quantile(log: MetricsLog, q: float) -> int | None:
    total = sum(log.latency_hist.values())
    if total == 0:
        return None
    need = max(1, math.ceil(q * total - 1e-9))
    acc = 0
    for lat in sorted(log.latency_hist):
        acc += log.latency_hist[lat]
        if acc >= need:
            return lat
    return max(log.latency_hist)


def latency_percentiles(log: MetricsLog, ps) -> list[int | None]:
    return [latency_quantile(log, p / 100) for p in ps]


def quartile_times(log: MetricsLog) -> list[int | None]:
    """Slots spent moving progress through each quarter; ``None`` where not reached."""
    marks = [0] + [log.crossing_slot(f) for f in (0.25, 0.5, 0.75, 1.0)]
    out = []
    for a, b in zip(marks, marks[1:]):
        out.append(None if a is None or b is None else b - a)
    return out


class HurryScheduler:
    """Executes min-cost flow plans and replans when queues drift from them."""

    name = "hurry"
    skip_idle = False

    def __init__(self, config: PlannerConfig = PlannerConfig()):
        self.config = config

    def reset(self, ctx: RunContext) -> None:
        self.contacts = ctx.contacts
        self.gen = ctx.gen
        cfg = self.config
        if cfg.horizon_cap is None:
            window = max(1, ctx.gen.last_slot - ctx.contacts.start + 1)
            cfg = replace(cfg, horizon_cap=cfg.cap_factor * window)
        self.cfg = cfg
        self.threshold = cfg.threshold_for(ctx.gen.total)
        self.replans = 0
        self.plan_refreshes = 0
        self.sqdi_trace: list[tuple[int, float]] = []
        zeros = np.zeros(ctx.contacts.n_sats, dtype=np.int64)
        future = ctx.gen.after(ctx.contacts.start - 1)
        plan = make_plan(ctx.contacts, future, zeros, cfg, ctx.contacts.start)
        self._install(plan, plan.predicted_queues(zeros, future))

    def _install(self, plan: TransmissionPlan, predicted: np.ndarray) -> None:
        self.plan = plan
        self.predicted = predicted

    def _replan(self, slot: int, q: np.ndarray) -> None:
        plan = replan(slot, q, self.gen, self.contacts, self.cfg)
        self._install(plan, plan.predicted_queues(q, self.gen.after(slot)))

    def _plan_over(self, slot: int) -> bool:
        if slot >= self.plan.end:
            return True
        commit = self.cfg.commit_slots
        return commit is not None and slot >= self.plan.start + commit

    def actions(self, slot: int, state: SimulationState) -> list[Transfer]:
        if self._plan_over(slot) and slot < self.contacts.end:
            if state.queued > 0 or self.gen.after(slot).total > 0:
                self.plan_refreshes += 1
                self._replan(slot, state.q)
        return self.plan.transfers(slot)

    def observe(self, slot: int, state: SimulationState, realized) -> None:
        t = slot - self.plan.start
        if not 0 < t <= self.plan.horizon:
            return
        value = compute_sqdi(QueueSnapshot(slot, self.predicted[t], state.q))
        self.sqdi_trace.append((slot, value))
        if self.cfg.replan_policy != NEVER and value > self.threshold and slot < self.contacts.end:
            self.replans += 1
            log.info("slot %d: SQDI %.1f above %.1f, replanning", slot, value, self.threshold)
            self._replan(slot, state.q)

    def idle_until(self, slot: int, state) -> int:
        return slot


@dataclass(frozen=True)
class StopCondition:
    max_slots: int | None = None
    horizon_multiple: int = 10


def default_max_slots(contacts: ContactTable, gen: GenerationSchedule, multiple: int = 10) -> int:
    """``multiple`` x the adaptive horizon, bounded by the contact table."""
    h = adaptive_horizon(contacts, gen, np.zeros(gen.n, dtype=np.int64), contacts.start)
    return min(contacts.end, contacts.start + multiple * h.horizon)


def run(
    contacts: ContactTable,
    gen: GenerationSchedule,
    scheduler,
    faults: FaultModel | None = None,
    stop: StopCondition = StopCondition(),
    slot_seconds: float = 1.0,
    completion_fraction: float = 1.0,
) -> MetricsLog:
    """Drive ``scheduler`` slot by slot until the download completes or the cap is hit.

    Completion at fraction 1.0 means every satellite queue is empty at or after
    the last generation slot. Lower fractions stop once that share has landed.
    """
    if not 0 < completion_fraction <= 1:
        raise ValueError("completion_fraction must be in (0, 1]")
    start = contacts.start
    max_slots = stop.max_slots
    if max_slots is None:
        max_slots = default_max_slots(contacts, gen, stop.horizon_multiple)
    max_slots = min(max_slots, contacts.end)
    rng = faults.rng() if faults is not None else None
    state = SimulationState.initial(contacts.n_sats, contacts.n_stations, gen, start)
    metrics = MetricsLog(scheduler.name, contacts.n_sats, slot_seconds, gen.total, completion_fraction)
    metrics.generation_end = gen.last_slot + 1 if gen.total else 0
    scheduler.reset(RunContext(contacts, gen, max_slots))
    last_gen = gen.last_slot
    need = math.ceil(completion_fraction * gen.total - 1e-9)
    gen_slots = [int(s) for s in np.flatnonzero(gen.volumes.sum(axis=1)) + gen.start]
    metrics.sample_queues(state.slot, state.q)
    while True:
        t = state.slot
        if t >= last_gen and (state.queued == 0 if completion_fraction >= 1 else state.delivered >= need):
            metrics.t_download = t
            break
        if t >= max_slots:
            log.warning("%s: slot cap %d reached at progress %.4f", scheduler.name, max_slots, metrics.progress)
            break
        acts = scheduler.actions(t, state)
        if not acts and scheduler.skip_idle:
            # nothing moves until the links or the generation change
            k = bisect_right(gen_slots, t)
            nxt = min(scheduler.idle_until(t + 1, state), max_slots)
            if k < len(gen_slots):
                nxt = min(nxt, gen_slots[k])
            if nxt > t + 1:
                idle_advance(state, nxt, contacts, gen)
                metrics.sample_queues(state.slot, state.q)
                continue
        report = step(state, acts, contacts, gen, faults, rng)
        metrics.record(report)
        metrics.sample_queues(state.slot, state.q)
        scheduler.observe(state.slot, state, report.realized)
    metrics.final_slot = state.slot
    metrics.replans = getattr(scheduler, "replans", 0)
    metrics.plan_refreshes = getattr(scheduler, "plan_refreshes", 0)
    metrics.sqdi = list(getattr(scheduler, "sqdi_trace", []))
    return metrics
