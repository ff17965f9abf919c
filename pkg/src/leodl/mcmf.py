"""Integer min-cost max-flow by successive shortest paths with potentials.

Initial potentials come from one Bellman-Ford pass. Each phase then runs
Dijkstra on reduced costs, lifts the potentials, and pushes a blocking flow
(Dinic) through every residual edge whose reduced cost became zero, so a single
phase saturates all augmenting paths of the current shortest length.

The kernels are compiled with numba and work on a CSR view of the residual
network (edge ``e ^ 1`` is the reverse of edge ``e``).
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass

import numba
import numpy as np

INF = 1 << 60
_LIMIT = 1 << 62


class FlowNetwork:
    def __init__(self, n: int):
        self.n = n
        self._tails: list[int] = []
        self._heads: list[int] = []
        self._caps: list[int] = []
        self._costs: list[int] = []

    def add_edge(self, u: int, v: int, cap: int, cost: int = 0) -> int:
        if cap < 0:
            raise ValueError("capacity must be non-negative")
        if not (0 <= u < self.n and 0 <= v < self.n):
            raise ValueError("node out of range")
        self._tails.append(u)
        self._heads.append(v)
        self._caps.append(cap)
        self._costs.append(cost)
        return len(self._tails) - 1

    @property
    def edge_count(self) -> int:
        return len(self._tails)

    def _residual(self):
        m = len(self._tails)
        tails = np.asarray(self._tails, dtype=np.int64)
        heads = np.asarray(self._heads, dtype=np.int64)
        to = np.empty(2 * m, dtype=np.int64)
        to[0::2], to[1::2] = heads, tails
        frm = np.empty(2 * m, dtype=np.int64)
        frm[0::2], frm[1::2] = tails, heads
        cap = np.zeros(2 * m, dtype=np.int64)
        cap[0::2] = np.asarray(self._caps, dtype=np.int64)
        cost = np.empty(2 * m, dtype=np.int64)
        c = np.asarray(self._costs, dtype=np.int64)
        cost[0::2], cost[1::2] = c, -c
        order = np.argsort(frm, kind="stable")
        ptr = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(np.bincount(frm, minlength=self.n), out=ptr[1:])
        return to, cap, cost, ptr, order.astype(np.int64)


@dataclass
class FlowResult:
    max_flow_value: int
    total_cost: int
    edge_flows: list[int]


@numba.njit(cache=True)
def _bellman_ford(n, s, to, cap, cost, ptr, idx):
    dist = np.full(n, INF, dtype=np.int64)
    dist[s] = 0
    queued = np.zeros(n, dtype=np.bool_)
    queue = np.empty(n + 1, dtype=np.int64)
    head, tail, size = 0, 0, 0
    queue[tail] = s
    tail = (tail + 1) % (n + 1)
    size += 1
    queued[s] = True
    relax, limit = 0, n * max(len(to), 1)
    while size > 0:
        u = queue[head]
        head = (head + 1) % (n + 1)
        size -= 1
        queued[u] = False
        for k in range(ptr[u], ptr[u + 1]):
            e = idx[k]
            if cap[e] > 0:
                v = to[e]
                nd = dist[u] + cost[e]
                if nd < dist[v]:
                    dist[v] = nd
                    relax += 1
                    if relax > limit:
                        return dist, False
                    if not queued[v]:
                        queued[v] = True
                        queue[tail] = v
                        tail = (tail + 1) % (n + 1)
                        size += 1
    return dist, True


@numba.njit(cache=True)
def _dijkstra(n, s, t, to, cap, cost, ptr, idx, pot):
    dist = np.full(n, INF, dtype=np.int64)
    done = np.zeros(n, dtype=np.bool_)
    dist[s] = 0
    heap = [(np.int64(0), np.int64(s))]
    reached = -1
    while len(heap) > 0:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        if u == t:
            reached = d
            break
        base = pot[u] + d
        for k in range(ptr[u], ptr[u + 1]):
            e = idx[k]
            if cap[e] > 0:
                v = to[e]
                if done[v]:
                    continue
                nd = base + cost[e] - pot[v]
                if nd < dist[v]:
                    dist[v] = nd
                    heapq.heappush(heap, (nd, v))
    if reached < 0:
        return dist, False
    for v in range(n):
        if not done[v]:
            dist[v] = reached
    return dist, True


@numba.njit(cache=True)
def _blocking_flow(n, s, t, to, cap, cost, ptr, idx, pot, use_cost, limit):
    """Dinic restricted to residual edges with zero reduced cost (if ``use_cost``)."""
    total = 0
    level = np.empty(n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    it = np.empty(n, dtype=np.int64)
    path = np.empty(n, dtype=np.int64)
    while total < limit:
        level[:] = -1
        level[s] = 0
        qh, qt = 0, 1
        queue[0] = s
        while qh < qt:
            u = queue[qh]
            qh += 1
            for k in range(ptr[u], ptr[u + 1]):
                e = idx[k]
                v = to[e]
                if cap[e] > 0 and level[v] < 0:
                    if use_cost and cost[e] + pot[u] - pot[v] != 0:
                        continue
                    level[v] = level[u] + 1
                    queue[qt] = v
                    qt += 1
        if level[t] < 0:
            break
        for u in range(n):
            it[u] = ptr[u]
        while total < limit:
            depth = 0
            u = s
            while u != t:
                k = it[u]
                end = ptr[u + 1]
                while k < end:
                    e = idx[k]
                    v = to[e]
                    if cap[e] > 0 and level[v] == level[u] + 1:
                        if not use_cost or cost[e] + pot[u] - pot[v] == 0:
                            break
                    k += 1
                it[u] = k
                if k == end:
                    if u == s:
                        break
                    level[u] = -1
                    depth -= 1
                    u = to[path[depth] ^ 1]
                    it[u] += 1
                    continue
                path[depth] = idx[k]
                depth += 1
                u = to[idx[k]]
            if u != t:
                break
            push = limit - total
            for d in range(depth):
                if cap[path[d]] < push:
                    push = cap[path[d]]
            for d in range(depth):
                cap[path[d]] -= push
                cap[path[d] ^ 1] += push
            total += push
    return total


@numba.njit(cache=True)
def _mcmf(n, s, t, to, cap, cost, ptr, idx, pot):
    while True:
        dist, ok = _dijkstra(n, s, t, to, cap, cost, ptr, idx, pot)
        if not ok:
            break
        for v in range(n):
            pot[v] += dist[v]
        if _blocking_flow(n, s, t, to, cap, cost, ptr, idx, pot, True, _LIMIT) == 0:
            break


def _result(net: FlowNetwork, cap: np.ndarray, s: int) -> FlowResult:
    original = np.asarray(net._caps, dtype=np.int64)
    flows = original - cap[0::2]
    tails = np.asarray(net._tails, dtype=np.int64)
    heads = np.asarray(net._heads, dtype=np.int64)
    costs = np.asarray(net._costs, dtype=np.int64)
    value = int(flows[tails == s].sum() - flows[heads == s].sum()) if len(flows) else 0
    return FlowResult(value, int((flows * costs).sum()), flows.tolist())


def max_flow(net: FlowNetwork, s: int, t: int) -> FlowResult:
    """Maximum flow (Dinic), ignoring costs; ``total_cost`` is that of the flow found."""
    if net.edge_count == 0 or s == t:
        return FlowResult(0, 0, [0] * net.edge_count)
    to, cap, cost, ptr, idx = net._residual()
    pot = np.zeros(net.n, dtype=np.int64)
    _blocking_flow(net.n, s, t, to, cap, cost, ptr, idx, pot, False, _LIMIT)
    return _result(net, cap, s)


def min_cost_max_flow(net: FlowNetwork, s: int, t: int) -> FlowResult:
    """Maximum flow of minimum total cost.

    Costs may be negative as long as no negative cycle is reachable from ``s``.
    """
    if net.edge_count == 0 or s == t:
        return FlowResult(0, 0, [0] * net.edge_count)
    to, cap, cost, ptr, idx = net._residual()
    pot, ok = _bellman_ford(net.n, s, to, cap, cost, ptr, idx)
    if not ok:
        raise ValueError("negative-cost cycle reachable from source")
    reachable = pot < INF
    pot[~reachable] = pot[reachable].max()
    _mcmf(net.n, s, t, to, cap, cost, ptr, idx, pot)
    return _result(net, cap, s)
