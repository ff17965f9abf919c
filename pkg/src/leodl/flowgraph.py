"""Layered time-expanded flow network and transmission plans.

Layer ``t`` holds one node per satellite and per station for absolute slot
``start + t``. Transmissions during a slot run from layer ``t`` to ``t + 1``;
storage edges carry data that waits a slot. Every edge costs one unit, so the
cheapest maximum flow delivers everything as early as the links allow.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np

from .constellation import ContactTable
from .mcmf import FlowNetwork, FlowResult, max_flow, min_cost_max_flow

SOURCE = 0
SINK = 1
EDGE_COST = 1


class GraphBuildError(ValueError):
    pass


class PlanConsistencyError(RuntimeError):
    pass


class Transfer(NamedTuple):
    """``units`` sent during ``slot``: sat -> sat (isl) or sat -> station (gsl)."""

    slot: int
    kind: str
    src: int
    dst: int
    units: int


@dataclass
class GenerationSchedule:
    """``volumes[t, i]`` units appear on satellite ``i`` at the start of slot ``start + t``."""

    volumes: np.ndarray
    start: int = 0

    def __post_init__(self) -> None:
        self.volumes = np.asarray(self.volumes, dtype=np.int64)
        if self.volumes.ndim != 2:
            raise ValueError("volumes must be 2-D (slots x satellites)")
        if (self.volumes < 0).any():
            raise ValueError("generated volumes must be non-negative")

    @classmethod
    def empty(cls, n: int) -> "GenerationSchedule":
        return cls(np.zeros((0, n), dtype=np.int64))

    @classmethod
    def uniform(cls, n: int, per_sat_units: int, window_slots: int, start: int = 0) -> "GenerationSchedule":
        """Spread ``per_sat_units`` evenly over ``window_slots`` (remainder front-loaded)."""
        base, extra = divmod(per_sat_units, window_slots)
        col = np.full(window_slots, base, dtype=np.int64)
        col[:extra] += 1
        return cls(np.repeat(col[:, None], n, axis=1), start)

    @classmethod
    def constant_rate(cls, n: int, units_per_slot: int, slots: int, start: int = 0) -> "GenerationSchedule":
        return cls(np.full((slots, n), units_per_slot, dtype=np.int64), start)

    @property
    def n(self) -> int:
        return self.volumes.shape[1]

    @property
    def total(self) -> int:
        return int(self.volumes.sum())

    @property
    def last_slot(self) -> int:
        """Last slot with any generation (0 when nothing is ever generated)."""
        rows = np.flatnonzero(self.volumes.sum(axis=1) > 0)
        return int(rows[-1]) + self.start if len(rows) else 0

    def at(self, slot: int) -> np.ndarray:
        t = slot - self.start
        if 0 <= t < len(self.volumes):
            return self.volumes[t]
        return np.zeros(self.n, dtype=np.int64)

    def after(self, slot: int) -> "GenerationSchedule":
        """Generation strictly after ``slot``."""
        a = max(0, slot + 1 - self.start)
        return GenerationSchedule(self.volumes[a:], max(self.start, slot + 1))

    def total_between(self, lo: int, hi: int) -> int:
        a, b = max(0, lo - self.start), max(0, hi - self.start)
        return int(self.volumes[a:b].sum())


@dataclass
class TimeExpandedGraph:
    n_sats: int
    n_stations: int
    horizon: int
    start: int
    tails: list[int] = field(default_factory=list)
    heads: list[int] = field(default_factory=list)
    caps: list[int] = field(default_factory=list)
    costs: list[int] = field(default_factory=list)
    tags: list[str] = field(default_factory=list)

    @property
    def layer_size(self) -> int:
        return self.n_sats + self.n_stations

    @property
    def node_count(self) -> int:
        return 2 + (self.horizon + 1) * self.layer_size

    def sat_node(self, sat: int, t: int) -> int:
        return 2 + t * self.layer_size + sat

    def station_node(self, station: int, t: int) -> int:
        return 2 + t * self.layer_size + self.n_sats + station

    def describe(self, node: int) -> tuple[str, int, int]:
        """("source"|"sink"|"sat"|"station", entity, layer)."""
        if node == SOURCE:
            return ("source", -1, -1)
        if node == SINK:
            return ("sink", -1, -1)
        t, k = divmod(node - 2, self.layer_size)
        if k < self.n_sats:
            return ("sat", k, t)
        return ("station", k - self.n_sats, t)

    def add(self, u: int, v: int, cap: int, tag: str) -> None:
        self.tails.append(u)
        self.heads.append(v)
        self.caps.append(int(cap))
        self.costs.append(EDGE_COST)
        self.tags.append(tag)

    def network(self) -> FlowNetwork:
        net = FlowNetwork(self.node_count)
        for u, v, c, w in zip(self.tails, self.heads, self.caps, self.costs):
            net.add_edge(u, v, c, w)
        return net

    def dump(self) -> str:
        """Plain-text edge list: ``from to capacity cost tag`` per line."""
        def name(node: int) -> str:
            kind, ent, t = self.describe(node)
            if kind in ("source", "sink"):
                return kind
            return f"{'S' if kind == 'sat' else 'G'}{ent}@{t + self.start}"

        lines = [f"# nodes={self.node_count} edges={len(self.tails)} start={self.start} horizon={self.horizon}"]
        for u, v, c, w, tag in zip(self.tails, self.heads, self.caps, self.costs, self.tags):
            lines.append(f"{name(u)} {name(v)} {c} {w} {tag}")
        return "\n".join(lines) + "\n"


def build_time_expanded_graph(
    contacts: ContactTable,
    gen: GenerationSchedule,
    initial_queues,
    horizon: int,
    start: int | None = None,
    storage_cap: int | None = None,
) -> TimeExpandedGraph:
    """Layered network for slots ``start .. start + horizon - 1``.

    ``initial_queues`` seed the source edges of layer 0; generation inside the
    window adds source edges at the layer where it appears.
    """
    if horizon < 1:
        raise GraphBuildError("horizon must be >= 1")
    start = contacts.start if start is None else start
    if start < contacts.start or start + horizon > contacts.end:
        raise GraphBuildError(
            f"window [{start}, {start + horizon}) not covered by contacts [{contacts.start}, {contacts.end})"
        )
    n, m = contacts.n_sats, contacts.n_stations
    q0 = np.asarray(initial_queues, dtype=np.int64).reshape(-1)
    if len(q0) != n or gen.n != n:
        raise GraphBuildError("satellite count mismatch")
    if (q0 < 0).any():
        raise GraphBuildError("initial queues must be non-negative")
    if storage_cap is None:
        storage_cap = int(q0.sum()) + gen.total_between(start, start + horizon)
    g = TimeExpandedGraph(n, m, horizon, start)
    bw = contacts.bandwidth
    for t in range(horizon):
        slot = start + t
        seed = gen.at(slot) + (q0 if t == 0 else 0)
        for i in np.flatnonzero(seed > 0):
            g.add(SOURCE, g.sat_node(int(i), t), int(seed[i]), "generation")
        row = contacts._row(slot)
        for j, i in enumerate(contacts.gsl[row]):
            if i >= 0 and bw.gsl > 0:
                g.add(g.sat_node(int(i), t), g.station_node(j, t + 1), bw.gsl, "gsl")
        if bw.isl > 0:
            for a, b in contacts.isl_pairs[contacts.isl_up[row]]:
                g.add(g.sat_node(int(a), t), g.sat_node(int(b), t + 1), bw.isl, "isl")
        if storage_cap > 0:
            for i in range(n):
                g.add(g.sat_node(i, t), g.sat_node(i, t + 1), storage_cap, "storage")
            for j in range(m):
                g.add(g.station_node(j, t), g.station_node(j, t + 1), storage_cap, "storage")
    if bw.uplink > 0:
        for t in range(1, horizon + 1):
            for j in range(m):
                g.add(g.station_node(j, t), SINK, bw.uplink, "uplink")
    return g


def solve(graph: TimeExpandedGraph) -> FlowResult:
    return min_cost_max_flow(graph.network(), SOURCE, SINK)


@dataclass
class TransmissionPlan:
    """Per-slot transfer volumes over ``start .. start + horizon - 1``.

    ``d_isl[t][(i, j)]`` is sat ``i`` -> sat ``j`` during slot ``start + t``;
    ``d_gsl[t][(i, j)]`` is sat ``i`` -> station ``j``.
    """

    start: int
    horizon: int
    n_sats: int
    n_stations: int
    d_isl: list[dict[tuple[int, int], int]]
    d_gsl: list[dict[tuple[int, int], int]]
    delivered: int = 0

    @classmethod
    def empty(cls, start: int, horizon: int, n: int, m: int) -> "TransmissionPlan":
        return cls(start, horizon, n, m, [{} for _ in range(horizon)], [{} for _ in range(horizon)])

    @property
    def end(self) -> int:
        return self.start + self.horizon

    def transfers(self, slot: int) -> list[Transfer]:
        t = slot - self.start
        if not 0 <= t < self.horizon:
            return []
        out = [Transfer(slot, "gsl", i, j, u) for (i, j), u in sorted(self.d_gsl[t].items()) if u > 0]
        out += [Transfer(slot, "isl", i, j, u) for (i, j), u in sorted(self.d_isl[t].items()) if u > 0]
        return out

    def __iter__(self) -> Iterator[Transfer]:
        for slot in range(self.start, self.end):
            yield from self.transfers(slot)

    def outflow(self, t: int) -> np.ndarray:
        out = np.zeros(self.n_sats, dtype=np.int64)
        for (i, _), u in self.d_isl[t].items():
            out[i] += u
        for (i, _), u in self.d_gsl[t].items():
            out[i] += u
        return out

    def inflow(self, t: int) -> np.ndarray:
        inc = np.zeros(self.n_sats, dtype=np.int64)
        for (_, j), u in self.d_isl[t].items():
            inc[j] += u
        return inc

    def predicted_queues(self, initial_queues, gen: GenerationSchedule) -> np.ndarray:
        """Queue at the start of each slot ``start .. end`` (generation of that slot included).

        Row ``t`` is Q at slot ``start + t``; the recurrence is
        ``Q[t+1] = Q[t] - out[t] + in[t] + P[start + t + 1]``.
        """
        q = np.zeros((self.horizon + 1, self.n_sats), dtype=np.int64)
        q[0] = np.asarray(initial_queues, dtype=np.int64) + gen.at(self.start)
        for t in range(self.horizon):
            q[t + 1] = q[t] - self.outflow(t) + self.inflow(t) + gen.at(self.start + t + 1)
        return q

    def to_json(self) -> str:
        slots = []
        for slot in range(self.start, self.end):
            rows = [[f"S{x.src}", f"{'G' if x.kind == 'gsl' else 'S'}{x.dst}", x.units] for x in self.transfers(slot)]
            if rows:
                slots.append({"slot": slot, "transfers": rows})
        doc = {
            "start": self.start, "horizon": self.horizon, "n_sats": self.n_sats,
            "n_stations": self.n_stations, "delivered": self.delivered, "slots": slots,
        }
        return json.dumps(doc, sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "TransmissionPlan":
        doc = json.loads(text)
        plan = cls.empty(doc["start"], doc["horizon"], doc["n_sats"], doc["n_stations"])
        plan.delivered = doc["delivered"]
        for entry in doc["slots"]:
            t = entry["slot"] - plan.start
            for src, dst, units in entry["transfers"]:
                key = (int(src[1:]), int(dst[1:]))
                target = plan.d_gsl if dst[0] == "G" else plan.d_isl
                target[t][key] = int(units)
        return plan


def check_flow(graph: TimeExpandedGraph, flow: FlowResult) -> None:
    """Raise PlanConsistencyError unless ``flow`` is feasible for ``graph``."""
    if len(flow.edge_flows) != len(graph.tails):
        raise PlanConsistencyError("flow does not match graph edges")
    balance = np.zeros(graph.node_count, dtype=np.int64)
    for u, v, c, f in zip(graph.tails, graph.heads, graph.caps, flow.edge_flows):
        if not 0 <= f <= c:
            raise PlanConsistencyError(f"edge {u}->{v}: flow {f} outside [0, {c}]")
        balance[u] -= f
        balance[v] += f
    inner = balance[2:]
    if inner.any():
        raise PlanConsistencyError("flow conservation violated")
    if balance[SINK] != flow.max_flow_value or -balance[SOURCE] != flow.max_flow_value:
        raise PlanConsistencyError("flow value disagrees with source/sink balance")


def extract_plan(graph: TimeExpandedGraph, flow: FlowResult) -> TransmissionPlan:
    check_flow(graph, flow)
    plan = TransmissionPlan.empty(graph.start, graph.horizon, graph.n_sats, graph.n_stations)
    plan.delivered = flow.max_flow_value
    for u, v, f, tag in zip(graph.tails, graph.heads, flow.edge_flows, graph.tags):
        if f == 0 or tag not in ("isl", "gsl"):
            continue
        _, a, t = graph.describe(u)
        _, b, _ = graph.describe(v)
        target = plan.d_isl if tag == "isl" else plan.d_gsl
        target[t][(a, b)] = target[t].get((a, b), 0) + f
    return plan


def plan_violations(
    plan: TransmissionPlan,
    contacts: ContactTable,
    initial_queues,
    gen: GenerationSchedule,
) -> list[str]:
    """Every breach of the per-slot link, matching and storage constraints."""
    problems: list[str] = []
    q = plan.predicted_queues(initial_queues, gen)
    bw = contacts.bandwidth
    for t in range(plan.horizon):
        slot = plan.start + t
        per_sat: dict[int, set[int]] = {}
        per_station: dict[int, set[int]] = {}
        for (i, j), u in plan.d_gsl[t].items():
            if u <= 0:
                continue
            per_sat.setdefault(i, set()).add(j)
            per_station.setdefault(j, set()).add(i)
            if u > contacts.gsl_capacity(slot, i, j):
                problems.append(f"slot {slot}: gsl S{i}->G{j} {u} exceeds bandwidth")
        problems += [f"slot {slot}: S{i} talks to stations {sorted(s)}" for i, s in per_sat.items() if len(s) > 1]
        problems += [f"slot {slot}: G{j} talks to satellites {sorted(s)}" for j, s in per_station.items() if len(s) > 1]
        links = set(contacts.isl_links(slot))
        for (i, j), u in plan.d_isl[t].items():
            if u > 0 and (i == j or (i, j) not in links or u > bw.isl):
                problems.append(f"slot {slot}: isl S{i}->S{j} {u} exceeds bandwidth")
        out = plan.outflow(t)
        for i in np.flatnonzero(out > q[t]):
            problems.append(f"slot {slot}: S{i} sends {out[i]} but stores {q[t][i]}")
    if (q < 0).any():
        problems.append("predicted queue went negative")
    return problems
