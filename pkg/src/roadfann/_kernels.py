"""Numba kernels: Dijkstra SSSP, pruned-landmark label build, label queries.

All graph inputs are the CSR arrays produced by RoadNetwork.csr(). Distances
are int64 throughout; INF64 is the shared unreachable sentinel. Heaps are
array-backed binary heaps with lazy deletion, preallocated to the relaxation
bound (one push per successful relaxation, at most the directed edge count).
"""

from __future__ import annotations

import numpy as np
from numba import njit

INF64 = np.int64(1) << np.int64(62)


@njit(cache=True)
def sssp(indptr, adj, w, src):
    """Full single-source Dijkstra. Returns (dist int64[n], parent int32[n])."""
    n = indptr.shape[0] - 1
    dist = np.full(n, INF64, dtype=np.int64)
    parent = np.full(n, -1, dtype=np.int32)
    cap = adj.shape[0] + 16
    heap_d = np.empty(cap, dtype=np.int64)
    heap_v = np.empty(cap, dtype=np.int64)
    size = 0
    dist[src] = 0
    heap_d[0] = 0
    heap_v[0] = src
    size = 1
    while size > 0:
        d = heap_d[0]
        u = heap_v[0]
        size -= 1
        heap_d[0] = heap_d[size]
        heap_v[0] = heap_v[size]
        i = 0
        while True:
            l = 2 * i + 1
            r = l + 1
            m = i
            if l < size and heap_d[l] < heap_d[m]:
                m = l
            if r < size and heap_d[r] < heap_d[m]:
                m = r
            if m == i:
                break
            heap_d[i], heap_d[m] = heap_d[m], heap_d[i]
            heap_v[i], heap_v[m] = heap_v[m], heap_v[i]
            i = m
        if d != dist[u]:
            continue
        for ei in range(indptr[u], indptr[u + 1]):
            v = adj[ei]
            nd = d + w[ei]
            if nd < dist[v]:
                dist[v] = nd
                parent[v] = u
                j = size
                heap_d[j] = nd
                heap_v[j] = v
                size += 1
                while j > 0:
                    p = (j - 1) // 2
                    if heap_d[p] <= heap_d[j]:
                        break
                    heap_d[p], heap_d[j] = heap_d[j], heap_d[p]
                    heap_v[p], heap_v[j] = heap_v[j], heap_v[p]
                    j = p
    return dist, parent


@njit(cache=True)
def build_pll(indptr, adj, w, order, entry_budget):
    """Pruned Dijkstra from every vertex in `order`; returns label CSR.

    Per-vertex labels live in contiguous pool blocks with capacity doubling
    (the prune-test walk is the hot loop and must stream, not chase links);
    the final CSR is emitted sorted by hub id. Returns (lab_indptr, lab_hubs,
    lab_dists, ok); ok is False when the entry budget was exceeded.
    """
    n = indptr.shape[0] - 1
    pool_cap = 16 * n + 1024
    hub_pool = np.empty(pool_cap, dtype=np.int32)
    dist_pool = np.empty(pool_cap, dtype=np.int64)
    pool_used = 0
    v_start = np.zeros(n, dtype=np.int64)
    v_size = np.zeros(n, dtype=np.int32)
    v_cap = np.zeros(n, dtype=np.int32)
    total_entries = 0

    T = np.full(n, INF64, dtype=np.int64)
    dist = np.full(n, INF64, dtype=np.int64)
    visited = np.empty(n, dtype=np.int64)
    cap = adj.shape[0] + 16
    heap_d = np.empty(cap, dtype=np.int64)
    heap_v = np.empty(cap, dtype=np.int64)

    for oi in range(order.shape[0]):
        h = order[oi]
        hs = v_start[h]
        for i in range(v_size[h]):
            T[hub_pool[hs + i]] = dist_pool[hs + i]

        size = 1
        heap_d[0] = 0
        heap_v[0] = h
        dist[h] = 0
        nvis = 1
        visited[0] = h
        while size > 0:
            d = heap_d[0]
            u = heap_v[0]
            size -= 1
            heap_d[0] = heap_d[size]
            heap_v[0] = heap_v[size]
            i = 0
            while True:
                l = 2 * i + 1
                r = l + 1
                m = i
                if l < size and heap_d[l] < heap_d[m]:
                    m = l
                if r < size and heap_d[r] < heap_d[m]:
                    m = r
                if m == i:
                    break
                heap_d[i], heap_d[m] = heap_d[m], heap_d[i]
                heap_v[i], heap_v[m] = heap_v[m], heap_v[i]
                i = m
            if d != dist[u]:
                continue
            # prune when an earlier hub already covers (h, u) at this distance
            q = INF64
            us = v_start[u]
            for i in range(v_size[u]):
                t = T[hub_pool[us + i]]
                if t < INF64:
                    s = t + dist_pool[us + i]
                    if s < q:
                        q = s
            if q <= d:
                continue
            if v_size[u] == v_cap[u]:
                newcap = 8 if v_cap[u] == 0 else v_cap[u] * 2
                while pool_used + newcap > pool_cap:
                    grown = pool_cap + pool_cap // 2 + 1024
                    nh = np.empty(grown, dtype=np.int32)
                    nd2 = np.empty(grown, dtype=np.int64)
                    nh[:pool_used] = hub_pool[:pool_used]
                    nd2[:pool_used] = dist_pool[:pool_used]
                    hub_pool = nh
                    dist_pool = nd2
                    pool_cap = grown
                ns = pool_used
                os = v_start[u]
                for i in range(v_size[u]):
                    hub_pool[ns + i] = hub_pool[os + i]
                    dist_pool[ns + i] = dist_pool[os + i]
                v_start[u] = ns
                v_cap[u] = newcap
                pool_used += newcap
                us = ns
            slot = us + v_size[u]
            hub_pool[slot] = h
            dist_pool[slot] = d
            v_size[u] += 1
            total_entries += 1
            if total_entries > entry_budget:
                empty32 = np.empty(0, dtype=np.int32)
                empty64 = np.empty(0, dtype=np.int64)
                return np.zeros(n + 1, dtype=np.int64), empty32, empty64, False
            for ei in range(indptr[u], indptr[u + 1]):
                v = adj[ei]
                nd = d + w[ei]
                if nd < dist[v]:
                    if dist[v] == INF64:
                        visited[nvis] = v
                        nvis += 1
                    dist[v] = nd
                    j = size
                    heap_d[j] = nd
                    heap_v[j] = v
                    size += 1
                    while j > 0:
                        p = (j - 1) // 2
                        if heap_d[p] <= heap_d[j]:
                            break
                        heap_d[p], heap_d[j] = heap_d[j], heap_d[p]
                        heap_v[p], heap_v[j] = heap_v[j], heap_v[p]
                        j = p
        for i in range(nvis):
            dist[visited[i]] = INF64
        hs = v_start[h]
        for i in range(v_size[h]):
            T[hub_pool[hs + i]] = INF64

    lab_indptr = np.zeros(n + 1, dtype=np.int64)
    for v in range(n):
        lab_indptr[v + 1] = lab_indptr[v] + v_size[v]
    total = lab_indptr[n]
    lab_hubs = np.empty(total, dtype=np.int32)
    lab_dists = np.empty(total, dtype=np.int64)
    for v in range(n):
        lo = lab_indptr[v]
        vs = v_start[v]
        seg = np.argsort(hub_pool[vs : vs + v_size[v]])
        for i in range(v_size[v]):
            lab_hubs[lo + i] = hub_pool[vs + seg[i]]
            lab_dists[lo + i] = dist_pool[vs + seg[i]]
    return lab_indptr, lab_hubs, lab_dists, True


@njit(cache=True)
def hl_query(lab_indptr, lab_hubs, lab_dists, u, v):
    """Distance via sorted-merge over common hubs; INF64 when none."""
    if u == v:
        return np.int64(0)
    i = lab_indptr[u]
    iend = lab_indptr[u + 1]
    j = lab_indptr[v]
    jend = lab_indptr[v + 1]
    best = INF64
    while i < iend and j < jend:
        hi = lab_hubs[i]
        hj = lab_hubs[j]
        if hi == hj:
            s = lab_dists[i] + lab_dists[j]
            if s < best:
                best = s
            i += 1
            j += 1
        elif hi < hj:
            i += 1
        else:
            j += 1
    return best


@njit(cache=True)
def hl_one_to_many(lab_indptr, lab_hubs, lab_dists, u, targets, T, out):
    """Distances u -> targets[i] using a dense scatter of u's label into T.

    T must be an INF64-filled int64[n] scratch; it is restored before return.
    """
    for e in range(lab_indptr[u], lab_indptr[u + 1]):
        T[lab_hubs[e]] = lab_dists[e]
    for k in range(targets.shape[0]):
        t = targets[k]
        if t == u:
            out[k] = 0
            continue
        best = INF64
        for e in range(lab_indptr[t], lab_indptr[t + 1]):
            td = T[lab_hubs[e]]
            if td < INF64:
                s = td + lab_dists[e]
                if s < best:
                    best = s
        out[k] = best
    for e in range(lab_indptr[u], lab_indptr[u + 1]):
        T[lab_hubs[e]] = INF64


@njit(cache=True)
def hl_many_to_many(lab_indptr, lab_hubs, lab_dists, us, targets, T, out):
    for i in range(us.shape[0]):
        hl_one_to_many(lab_indptr, lab_hubs, lab_dists, us[i], targets, T, out[i])


@njit(cache=True)
def hl_query_context_dists(
    lab_indptr, lab_hubs, lab_dists, inv_indptr, inv_q, inv_d, us, q_ids, out
):
    """Distances from each u to a fixed query set via its inverted hub index.

    inv_* map hub id -> (query position, query-hub distance) pairs built from
    the query labels; each row costs only the hub intersections of label(u)
    with the query set instead of a full scan of every query label.
    """
    m = out.shape[1]
    for i in range(us.shape[0]):
        u = us[i]
        row = out[i]
        for j in range(m):
            row[j] = INF64
        for e in range(lab_indptr[u], lab_indptr[u + 1]):
            h = lab_hubs[e]
            du = lab_dists[e]
            for k in range(inv_indptr[h], inv_indptr[h + 1]):
                s = du + inv_d[k]
                j = inv_q[k]
                if s < row[j]:
                    row[j] = s
        for j in range(m):
            if q_ids[j] == u:
                row[j] = 0


@njit(cache=True)
def hl_pairwise(lab_indptr, lab_hubs, lab_dists, ids, T):
    k = ids.shape[0]
    out = np.empty((k, k), dtype=np.int64)
    for i in range(k):
        hl_one_to_many(lab_indptr, lab_hubs, lab_dists, ids[i], ids, T, out[i])
    return out


@njit(cache=True)
def tree_score(indptr, adj, w, sources):
    """Shortest-path-tree membership score for hub ordering.

    For each sampled source, vertices accumulate the size of their subtree in
    the SSSP tree; vertices lying on many shortest paths score high.
    """
    n = indptr.shape[0] - 1
    score = np.zeros(n, dtype=np.float64)
    for si in range(sources.shape[0]):
        dist, parent = sssp(indptr, adj, w, sources[si])
        order = np.argsort(dist)
        sub = np.ones(n, dtype=np.int64)
        for k in range(n - 1, -1, -1):
            v = order[k]
            if dist[v] >= INF64:
                continue
            p = parent[v]
            if p >= 0:
                sub[p] += sub[v]
        for v in range(n):
            if dist[v] < INF64:
                score[v] += np.sqrt(float(sub[v]))
    return score
