"""Flow planning control loop: horizon search, queue-deviation monitoring, replanning."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .constellation import ContactTable
from .flowgraph import (
    SINK,
    SOURCE,
    GenerationSchedule,
    TransmissionPlan,
    build_time_expanded_graph,
    extract_plan,
    solve,
)
from .mcmf import max_flow

log = logging.getLogger(__name__)

ON_THRESHOLD = "on_threshold"
NEVER = "never"
ADAPTIVE = "adaptive_doubling"


@dataclass(frozen=True)
class PlannerConfig:
    """``horizon_search`` is ``"adaptive_doubling"`` or a fixed slot count.

    ``sqdi_threshold=None`` means 1% of the data the current plan must move.
    ``horizon_cap=None`` means 16x the generation window.
    ``commit_slots`` executes only that many slots of each plan before a fresh
    one is computed (receding horizon); ``None`` executes plans to their end.
    """

    sqdi_threshold: float | None = None
    replan_policy: str = ON_THRESHOLD
    horizon_search: str | int = ADAPTIVE
    horizon_cap: int | None = None
    cap_factor: int = 16
    commit_slots: int | None = None

    def __post_init__(self) -> None:
        if self.commit_slots is not None and self.commit_slots < 1:
            raise ValueError("commit_slots must be >= 1")
        if self.sqdi_threshold is not None and self.sqdi_threshold < 0:
            raise ValueError("sqdi_threshold must be >= 0")
        if self.replan_policy not in (ON_THRESHOLD, NEVER):
            raise ValueError(f"unknown replan_policy {self.replan_policy!r}")
        if self.horizon_search != ADAPTIVE and not (
            isinstance(self.horizon_search, int) and self.horizon_search >= 1
        ):
            raise ValueError("horizon_search must be 'adaptive_doubling' or a positive int")

    def threshold_for(self, volume: int) -> float:
        return 0.01 * volume if self.sqdi_threshold is None else float(self.sqdi_threshold)


@dataclass
class QueueSnapshot:
    slot: int
    predicted: np.ndarray
    observed: np.ndarray

    def __post_init__(self) -> None:
        self.predicted = np.asarray(self.predicted, dtype=np.int64)
        self.observed = np.asarray(self.observed, dtype=np.int64)


def compute_sqdi(snapshot: QueueSnapshot) -> float:
    """Mean plus maximum absolute gap between observed and predicted queues."""
    pred, obs = snapshot.predicted, snapshot.observed
    if pred.shape != obs.shape or pred.ndim != 1 or len(pred) == 0:
        raise ValueError("predicted and observed must be equal-length non-empty vectors")
    dev = np.abs(obs - pred)
    return float(dev.mean() + dev.max())


@dataclass(frozen=True)
class HorizonResult:
    horizon: int
    flow: int
    deliverable: bool


def deliverable_volume(contacts: ContactTable, gen: GenerationSchedule, initial_queues, start: int, horizon: int) -> int:
    graph = build_time_expanded_graph(contacts, gen, initial_queues, horizon, start)
    return max_flow(graph.network(), SOURCE, SINK).max_flow_value


def _horizon_cap(contacts: ContactTable, gen: GenerationSchedule, start: int, config: PlannerConfig) -> int:
    room = contacts.end - start
    if config.horizon_cap is not None:
        return max(1, min(room, config.horizon_cap))
    window = max(1, gen.last_slot - start + 1)
    return max(1, min(room, config.cap_factor * window))


def adaptive_horizon(
    contacts: ContactTable,
    gen: GenerationSchedule,
    initial_queues,
    start: int | None = None,
    config: PlannerConfig = PlannerConfig(),
) -> HorizonResult:
    """Smallest horizon whose layered graph carries every queued and generated unit.

    Trial lengths double until the full volume fits, then a binary search over
    (last failure, first success] pins the exact minimum. Relies on the
    deliverable volume being monotone in the horizon.
    """
    start = contacts.start if start is None else start
    q0 = np.asarray(initial_queues, dtype=np.int64)
    gen = gen.after(start - 1)
    total = int(q0.sum()) + gen.total
    if total == 0:
        return HorizonResult(1, 0, True)
    cap = _horizon_cap(contacts, gen, start, config)

    def flow(h: int) -> int:
        return deliverable_volume(contacts, gen, q0, start, h)

    lo, hi, best = 0, None, 0
    trial = 1
    while True:
        trial = min(trial, cap)
        got = flow(trial)
        if got == total:
            hi = trial
            break
        lo, best = trial, got
        if trial == cap:
            log.info("horizon cap %d reached with %d of %d units deliverable", cap, got, total)
            return HorizonResult(cap, got, False)
        trial *= 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if flow(mid) == total:
            hi = mid
        else:
            lo = mid
    return HorizonResult(hi, total, True)


def _plan(contacts, gen, initial_queues, start, horizon) -> TransmissionPlan:
    graph = build_time_expanded_graph(contacts, gen, initial_queues, horizon, start)
    return extract_plan(graph, solve(graph))


def make_plan(
    contacts: ContactTable,
    gen: GenerationSchedule,
    initial_queues,
    config: PlannerConfig = PlannerConfig(),
    start: int | None = None,
) -> TransmissionPlan:
    start = contacts.start if start is None else start
    q0 = np.asarray(initial_queues, dtype=np.int64)
    future = gen.after(start - 1)
    if config.horizon_search == ADAPTIVE:
        if int(q0.sum()) + future.total == 0:
            return TransmissionPlan.empty(start, 1, contacts.n_sats, contacts.n_stations)
        horizon = adaptive_horizon(contacts, future, q0, start, config).horizon
    else:
        horizon = min(int(config.horizon_search), contacts.end - start)
        if horizon < 1:
            raise ValueError("no contact data left to plan over")
    return _plan(contacts, future, q0, start, horizon)


def replan(
    current_slot: int,
    observed_queues,
    remaining_gen: GenerationSchedule,
    contacts: ContactTable,
    config: PlannerConfig = PlannerConfig(),
) -> TransmissionPlan:
    """Fresh plan whose first layer is ``current_slot``, seeded with observed queues.

    ``observed_queues`` already include data generated at ``current_slot``;
    only generation after it is taken from ``remaining_gen``.
    """
    q = np.asarray(observed_queues, dtype=np.int64)
    if (q < 0).any():
        raise ValueError("observed queues must be non-negative")
    return make_plan(contacts, remaining_gen.after(current_slot), q, config, start=current_slot)
