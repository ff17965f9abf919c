"""Comparison schedulers: CoDld, CoDld Modify, greedy with and without ISLs.

All of them share the simulator's scheduler interface: ``reset(ctx)`` once,
then ``actions(slot, state)`` and ``observe(slot, state, realized)`` per slot.
"""
from __future__ import annotations

from bisect import bisect_right
from collections import deque
from dataclasses import dataclass

import numpy as np

from .constellation import ContactTable
from .flowgraph import GenerationSchedule, Transfer

HOP_INF = 1_000_000_000


def hopcroft_karp(left: list[int], adj: dict[int, list[int]]) -> dict[int, int]:
    """Maximum bipartite matching ``left -> right``.

    Vertices are visited in the order given (and neighbours in list order), so
    the returned matching is deterministic.
    """
    match_l: dict[int, int] = {}
    match_r: dict[int, int] = {}
    while True:
        dist: dict[int, int] = {}
        queue = deque()
        for u in left:
            if u not in match_l:
                dist[u] = 0
                queue.append(u)
        found = False
        while queue:
            u = queue.popleft()
            for v in adj.get(u, ()):
                w = match_r.get(v)
                if w is None:
                    found = True
                elif w not in dist:
                    dist[w] = dist[u] + 1
                    queue.append(w)
        if not found:
            return match_l

        def augment(u: int) -> bool:
            for v in adj.get(u, ()):
                w = match_r.get(v)
                if w is None or (dist.get(w) == dist[u] + 1 and augment(w)):
                    match_l[u] = v
                    match_r[v] = u
                    return True
            dist[u] = -1
            return False

        for u in left:
            if u not in match_l:
                augment(u)


def all_pairs_hops(adjacency: np.ndarray) -> np.ndarray:
    """Floyd-Warshall hop counts over a boolean adjacency matrix."""
    n = len(adjacency)
    d = np.where(adjacency, 1, HOP_INF).astype(np.int64)
    np.fill_diagonal(d, 0)
    for k in range(n):
        np.minimum(d, d[:, k : k + 1] + d[k : k + 1, :], out=d)
    return np.minimum(d, HOP_INF)


@dataclass
class HopDistanceMap:
    """Hops from each satellite to the nearest one with a ground contact."""

    distance: np.ndarray
    next_hop: np.ndarray


def floyd_hop_distances(isl_adjacency: np.ndarray, contact_sats, all_pairs: np.ndarray | None = None) -> HopDistanceMap:
    adjacency = np.asarray(isl_adjacency, dtype=bool)
    n = len(adjacency)
    d = all_pairs_hops(adjacency) if all_pairs is None else all_pairs
    targets = sorted(set(int(c) for c in contact_sats))
    if targets:
        dist = d[:, targets].min(axis=1)
    else:
        dist = np.full(n, HOP_INF, dtype=np.int64)
    nxt = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        if 0 < dist[i] < HOP_INF:
            cands = np.flatnonzero(adjacency[i] & (dist == dist[i] - 1))
            nxt[i] = cands[0]
    return HopDistanceMap(dist, nxt)


def isl_adjacency(contacts: ContactTable, slot: int) -> np.ndarray:
    adj = np.zeros((contacts.n_sats, contacts.n_sats), dtype=bool)
    for a, b in contacts.isl_links(slot):
        adj[a, b] = True
    return adj


def greedy_no_isl_step(queues: np.ndarray, contacts: ContactTable, slot: int) -> list[Transfer]:
    """Satellites in contact download their own queue; nothing else moves."""
    g = contacts.bandwidth.gsl
    out = []
    for j, i in sorted(contacts.gsl_assignment(slot).items()):
        units = int(min(queues[i], g))
        if units > 0:
            out.append(Transfer(slot, "gsl", i, j, units))
    return out


def greedy_isl_step(queues: np.ndarray, contacts: ContactTable, slot: int, hop_map: HopDistanceMap) -> list[Transfer]:
    """Everyone pushes toward the hop-nearest contact satellite at full link rate."""
    bw = contacts.bandwidth
    station_of = contacts.sat_station(slot)
    out = []
    for i in np.flatnonzero(queues > 0):
        i = int(i)
        if hop_map.distance[i] == 0 and station_of[i] >= 0:
            out.append(Transfer(slot, "gsl", i, int(station_of[i]), int(min(queues[i], bw.gsl))))
        elif hop_map.next_hop[i] >= 0 and bw.isl > 0:
            out.append(Transfer(slot, "isl", i, int(hop_map.next_hop[i]), int(min(queues[i], bw.isl))))
    return out


@dataclass
class CoDldState:
    """Per-satellite bookkeeping of one CoDld round (all in slots)."""

    remaining_download_time: np.ndarray
    remaining_contact_time: np.ndarray
    done: np.ndarray


def codld_state(queues: np.ndarray, foreign: np.ndarray, contacts: ContactTable, slot: int) -> CoDldState:
    g = max(contacts.bandwidth.gsl, 1)
    own = np.maximum(np.asarray(queues) - np.asarray(foreign), 0)
    download = -(-own // g)
    contact = np.array([contacts.remaining_contact(slot, i) for i in range(contacts.n_sats)], dtype=np.int64)
    return CoDldState(download, contact, own == 0)


def codld_step(queues: np.ndarray, foreign: np.ndarray, contacts: ContactTable, slot: int) -> list[Transfer]:
    """One slot of cooperative downloading.

    Satellites in contact download (own data first). A satellite whose own
    data will be gone after this slot lends the rest of its contact time as a
    relay. Satellites whose own data needs more download time than their
    contact offers are offloaders. Offloaders and one-hop relays are paired by
    repeated maximum matchings; each pair uses its ISL once per slot and the
    relay never takes more than its remaining contact can download.
    """
    g, b = contacts.bandwidth.gsl, contacts.bandwidth.isl
    queues = np.asarray(queues, dtype=np.int64)
    own = np.maximum(queues - np.asarray(foreign, dtype=np.int64), 0)
    station_of = contacts.sat_station(slot)
    out: list[Transfer] = []
    spare: dict[int, int] = {}
    need: dict[int, int] = {}
    budget = queues.copy()
    for i in np.flatnonzero(station_of >= 0):
        i = int(i)
        send = int(min(queues[i], g))
        if send:
            out.append(Transfer(slot, "gsl", i, int(station_of[i]), send))
            budget[i] -= send
        later = (contacts.remaining_contact(slot, i) - 1) * g
        own_left = int(max(own[i] - g, 0))
        if own_left == 0:
            room = later - int(queues[i] - send)
            if room > 0:
                spare[i] = room
        elif own_left > later:
            need[i] = own_left - later
    for i in np.flatnonzero((station_of < 0) & (own > 0)):
        need[int(i)] = int(own[i])
    if not spare or not need or b <= 0:
        return out
    for i in list(need):
        need[i] = int(min(need[i], budget[i]))
    neighbours: dict[int, list[int]] = {}
    for a, c in contacts.isl_links(slot):
        if a in need and c in spare:
            neighbours.setdefault(a, []).append(c)
    used: set[tuple[int, int]] = set()
    while True:
        left = sorted(i for i, v in need.items() if v > 0 and i in neighbours)
        adj = {
            i: sorted(r for r in neighbours[i] if spare[r] > 0 and (i, r) not in used)
            for i in left
        }
        pairs = hopcroft_karp(left, adj)
        if not pairs:
            break
        for i, r in sorted(pairs.items()):
            units = min(need[i], b, spare[r])
            out.append(Transfer(slot, "isl", i, r, units))
            need[i] -= units
            spare[r] -= units
            used.add((i, r))
    return out


def update_foreign(foreign: np.ndarray, queues_before: np.ndarray, realized: list[Transfer]) -> np.ndarray:
    """Track relayed (foreign) volume per satellite; outflows spend own data first."""
    foreign = np.asarray(foreign, dtype=np.int64).copy()
    own = np.maximum(np.asarray(queues_before, dtype=np.int64) - foreign, 0)
    incoming = np.zeros_like(foreign)
    for x in realized:
        spent_own = min(x.units, own[x.src])
        own[x.src] -= spent_own
        foreign[x.src] -= x.units - spent_own
        if x.kind == "isl":
            incoming[x.dst] += x.units
    return np.maximum(foreign, 0) + incoming


def _apply(queues: np.ndarray, transfers: list[Transfer]) -> np.ndarray:
    q = queues.copy()
    for x in transfers:
        q[x.src] -= x.units
    for x in transfers:
        if x.kind == "isl":
            q[x.dst] += x.units
    return q


def codld_schedule(
    contacts: ContactTable, gen: GenerationSchedule, max_slot: int | None = None
) -> dict[int, list[Transfer]]:
    """Offline CoDld plan, computed once all data has been generated.

    Replays the matching rounds forward on a fault-free fluid model until the
    constellation is drained, contact time runs out or ``max_slot`` is hit.
    """
    end = contacts.end if max_slot is None else min(contacts.end, max_slot)
    first = gen.last_slot
    q = np.zeros(gen.n, dtype=np.int64)
    for s in range(gen.start, first + 1):
        q += gen.at(s)
    foreign = np.zeros_like(q)
    changes = contacts.change_points()
    plan: dict[int, list[Transfer]] = {}
    slot = max(first, contacts.start)
    while slot < end and q.sum() > 0:
        acts = codld_step(q, foreign, contacts, slot)
        if acts:
            plan[slot] = acts
            foreign = update_foreign(foreign, q, acts)
            q = _apply(q, acts)
            slot += 1
        else:
            k = bisect_right(changes, slot)
            slot = int(changes[k]) if k < len(changes) else end
    return plan


class _Base:
    name = "base"
    skip_idle = True

    def reset(self, ctx) -> None:
        self.contacts: ContactTable = ctx.contacts
        self.gen: GenerationSchedule = ctx.gen
        self._changes = self.contacts.change_points()

    def observe(self, slot, state, realized) -> None:
        pass

    def idle_until(self, slot: int, state) -> int:
        k = bisect_right(self._changes, slot - 1)
        return int(self._changes[k]) if k < len(self._changes) else self.contacts.end


class GreedyNoIsl(_Base):
    name = "greedy_no_isl"

    def actions(self, slot, state):
        return greedy_no_isl_step(state.q, self.contacts, slot)


class GreedyIsl(_Base):
    name = "greedy_isl"

    def reset(self, ctx) -> None:
        super().reset(ctx)
        self._key = None
        self._adj_key = None
        self._pairs = None
        self.hop_map: HopDistanceMap | None = None
        self.recomputes = 0

    def _refresh(self, slot: int) -> None:
        row = self.contacts._row(slot)
        adj_key = self.contacts.isl_up[row].tobytes()
        key = (self.contacts.gsl[row].tobytes(), adj_key)
        if key == self._key:
            return
        adj = isl_adjacency(self.contacts, slot)
        if adj_key != self._adj_key:
            self._pairs = all_pairs_hops(adj)
            self._adj_key = adj_key
        contact_sats = [i for i in self.contacts.gsl[row] if i >= 0]
        self.hop_map = floyd_hop_distances(adj, contact_sats, self._pairs)
        self._key = key
        self.recomputes += 1

    def actions(self, slot, state):
        self._refresh(slot)
        return greedy_isl_step(state.q, self.contacts, slot, self.hop_map)


class CoDldModify(_Base):
    """Matching rounds re-run every slot on the observed queues."""

    name = "codld_modify"

    def reset(self, ctx) -> None:
        super().reset(ctx)
        self.foreign = np.zeros(ctx.contacts.n_sats, dtype=np.int64)

    def actions(self, slot, state):
        self._before = state.q.copy()
        self.foreign = np.minimum(self.foreign, state.q)
        return codld_step(state.q, self.foreign, self.contacts, slot)

    def observe(self, slot, state, realized) -> None:
        self.foreign = np.minimum(update_foreign(self.foreign, self._before, realized), state.q)


class CoDld(_Base):
    """Original CoDld: waits for all data, plans once, then executes open-loop."""

    name = "codld"

    def reset(self, ctx) -> None:
        super().reset(ctx)
        self.plan = codld_schedule(ctx.contacts, ctx.gen, ctx.max_slots)
        self._slots = sorted(self.plan)

    def actions(self, slot, state):
        return list(self.plan.get(slot, []))

    def idle_until(self, slot: int, state) -> int:
        k = bisect_right(self._slots, slot - 1)
        return self._slots[k] if k < len(self._slots) else self.contacts.end
