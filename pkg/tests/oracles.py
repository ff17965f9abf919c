"""Independent brute-force references used by the tests."""
from __future__ import annotations

import math
import random
from collections import deque

import numpy as np


def random_graph(rng: random.Random, max_nodes: int = 10, max_cap: int = 10, max_cost: int = 5):
    n = rng.randint(2, max_nodes)
    m = rng.randint(1, min(14, n * (n - 1)))
    edges = []
    for _ in range(m):
        u, v = rng.sample(range(n), 2)
        edges.append((u, v, rng.randint(0, max_cap), rng.randint(0, max_cost)))
    return n, edges


def edmonds_karp(n: int, edges, s: int, t: int) -> int:
    cap = [[0] * n for _ in range(n)]
    for u, v, c, _ in edges:
        cap[u][v] += c
    flow = 0
    while True:
        prev = [-1] * n
        prev[s] = s
        q = deque([s])
        while q and prev[t] < 0:
            u = q.popleft()
            for v in range(n):
                if prev[v] < 0 and cap[u][v] > 0:
                    prev[v] = u
                    q.append(v)
        if prev[t] < 0:
            return flow
        push, v = math.inf, t
        while v != s:
            push = min(push, cap[prev[v]][v])
            v = prev[v]
        v = t
        while v != s:
            cap[prev[v]][v] -= push
            cap[v][prev[v]] += push
            v = prev[v]
        flow += push


def exhaustive_min_cost(n: int, edges, s: int, t: int, value: int) -> int | None:
    """Cheapest integral flow of exactly ``value`` by enumerating every edge's flow.

    Branches are cut only when the remaining edges provably cannot restore
    conservation, or when the partial cost already exceeds the best found
    (costs are non-negative).
    """
    m = len(edges)
    target = [0] * n
    target[s] -= value
    target[t] += value
    rem_in = np.zeros((m + 1, n), dtype=np.int64)
    rem_out = np.zeros((m + 1, n), dtype=np.int64)
    for k in range(m - 1, -1, -1):
        u, v, c, _ = edges[k]
        rem_in[k], rem_out[k] = rem_in[k + 1], rem_out[k + 1]
        rem_in[k, v] += c
        rem_out[k, u] += c
    rem_in, rem_out = rem_in.tolist(), rem_out.tolist()
    bal = [0] * n
    best = [math.inf]

    def feasible(x: int, k: int) -> bool:
        need = target[x] - bal[x]
        return -rem_out[k][x] <= need <= rem_in[k][x]

    def rec(k: int, cost: int) -> None:
        if cost >= best[0]:
            return
        if k == m:
            best[0] = cost
            return
        u, v, c, w = edges[k]
        for f in range(c + 1):
            bal[u] -= f
            bal[v] += f
            if feasible(u, k + 1) and feasible(v, k + 1):
                rec(k + 1, cost + f * w)
            bal[u] += f
            bal[v] -= f

    if all(feasible(x, 0) for x in range(n)):
        rec(0, 0)
    return None if best[0] == math.inf else int(best[0])


def bfs_hops(adj: np.ndarray, sources) -> np.ndarray:
    n = len(adj)
    dist = np.full(n, -1, dtype=np.int64)
    q = deque()
    for s in sources:
        dist[s] = 0
        q.append(s)
    while q:
        u = q.popleft()
        for v in np.flatnonzero(adj[u]):
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                q.append(v)
    return dist


def linear_scan_horizon(flow_at, total: int, cap: int) -> int | None:
    for h in range(1, cap + 1):
        if flow_at(h) == total:
            return h
    return None
