"""Compiled kernels for boundary-matrix reduction over Z/2.

Two reductions live here:

* `reduce_h1`: persistent cohomology of the degree-1 part of a Vietoris-Rips
  filtration. Columns are indexed by cycle-creating edges (clearing via a
  union-find pass over the filtration removes the spanning-forest edges) and
  processed in reverse filtration order; column entries are cofacet triangles
  enumerated on the fly. Most columns settle on their first pivot without
  being materialised. The few that collide are reduced with the working
  column held as a lazy binary heap: entries carry multiplicity and cancel
  mod 2 on extraction, so adding a column costs only that column's length
  instead of re-merging everything accumulated so far.

* `find_representative`: homology-mode reduction of the triangle boundary
  matrix, processed in filtration order, which stops as soon as it registers
  the (edge, triangle) pair matching a requested (birth, death). The reduced
  column at that moment is a Z/2 cycle made of edges no later than the birth
  edge; it represents the class of the pair.

Simplices are ordered by (filtration value, dimension, lexicographic vertex
tuple). Triangles are encoded as (a*n + b)*n + c with a < b < c, so comparing
codes compares vertex tuples.
"""

from __future__ import annotations

import numpy as np
from numba import njit, types
from numba.typed import Dict, List


@njit(cache=True)
def _uf_find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@njit(cache=True)
def _tree_edges(n, eu, ev):
    # edges arrive in filtration order; marks the spanning-forest (H0) edges
    parent = np.arange(n, dtype=np.int64)
    E = eu.shape[0]
    is_tree = np.zeros(E, dtype=np.bool_)
    for i in range(E):
        ru = _uf_find(parent, eu[i])
        rv = _uf_find(parent, ev[i])
        if ru != rv:
            parent[ru] = rv
            is_tree[i] = True
    return is_tree


@njit(cache=True, inline="always")
def _tri_code(u, v, w, n):
    a = u
    b = v
    if b < a:
        a, b = b, a
    c = w
    if c < b:
        b, c = c, b
        if b < a:
            a, b = b, a
    return (a * n + b) * n + c


@njit(cache=True)
def _min_cofacet(dist, u, v, threshold, n):
    """Pivot candidate of an edge column: cofacet minimal in (value, code).

    Returns (code, value, count); count == 0 means the column is empty.
    """
    duv = dist[u, v]
    best_code = np.int64(-1)
    best_val = np.float64(0.0)
    cnt = 0
    for w in range(n):
        if w == u or w == v:
            continue
        val = duv
        d1 = dist[u, w]
        if d1 > val:
            val = d1
        d2 = dist[v, w]
        if d2 > val:
            val = d2
        if val <= threshold:
            code = _tri_code(u, v, w, n)
            if cnt == 0 or val < best_val or (val == best_val and code < best_code):
                best_val = val
                best_code = code
            cnt += 1
    return best_code, best_val, cnt


# ---------------------------------------------------------------------------
# lazy working column: min-heap on (value, code) with mod-2 cancellation
# ---------------------------------------------------------------------------

@njit(cache=True, inline="always")
def _hless(v1, c1, v2, c2):
    return v1 < v2 or (v1 == v2 and c1 < c2)


@njit(cache=True)
def _heap_push(hv, hc, hn, v, c):
    if hn >= hv.shape[0]:
        nv = np.empty(hv.shape[0] * 2, dtype=np.float64)
        nc = np.empty(hc.shape[0] * 2, dtype=np.int64)
        nv[:hn] = hv[:hn]
        nc[:hn] = hc[:hn]
        hv = nv
        hc = nc
    hv[hn] = v
    hc[hn] = c
    i = hn
    while i > 0:
        p = (i - 1) >> 1
        if _hless(hv[i], hc[i], hv[p], hc[p]):
            hv[i], hv[p] = hv[p], hv[i]
            hc[i], hc[p] = hc[p], hc[i]
            i = p
        else:
            break
    return hv, hc, hn + 1


@njit(cache=True)
def _heap_pop(hv, hc, hn):
    """Remove the min element (caller reads hv[0]/hc[0] first)."""
    hn -= 1
    hv[0] = hv[hn]
    hc[0] = hc[hn]
    i = 0
    while True:
        l = 2 * i + 1
        if l >= hn:
            break
        m = l
        r = l + 1
        if r < hn and _hless(hv[r], hc[r], hv[l], hc[l]):
            m = r
        if _hless(hv[m], hc[m], hv[i], hc[i]):
            hv[i], hv[m] = hv[m], hv[i]
            hc[i], hc[m] = hc[m], hc[i]
            i = m
        else:
            break
    return hn


@njit(cache=True)
def _heap_pivot(hv, hc, hn):
    """Pop entries until one survives mod 2. Returns (val, code, hn, found)."""
    while hn > 0:
        pv = hv[0]
        pc = hc[0]
        cnt = 0
        while hn > 0 and hv[0] == pv and hc[0] == pc:
            hn = _heap_pop(hv, hc, hn)
            cnt += 1
        if cnt & 1:
            return pv, pc, hn, True
    return 0.0, np.int64(0), hn, False


@njit(cache=True)
def _push_cofacets(dist, u, v, threshold, n, hv, hc, hn):
    duv = dist[u, v]
    for w in range(n):
        if w == u or w == v:
            continue
        val = duv
        d1 = dist[u, w]
        if d1 > val:
            val = d1
        d2 = dist[v, w]
        if d2 > val:
            val = d2
        if val <= threshold:
            hv, hc, hn = _heap_push(hv, hc, hn, val, _tri_code(u, v, w, n))
    return hv, hc, hn


@njit(cache=True)
def _drain_sorted(hv, hc, hn):
    """Surviving entries of the heap in (value, code) order, cancelled mod 2."""
    vals = hv[:hn].copy()
    codes = hc[:hn].copy()
    o1 = np.argsort(codes, kind="mergesort")
    v1 = vals[o1]
    c1 = codes[o1]
    o2 = np.argsort(v1, kind="mergesort")
    v2 = v1[o2]
    c2 = c1[o2]
    outv = np.empty(hn, dtype=np.float64)
    outc = np.empty(hn, dtype=np.int64)
    m = 0
    i = 0
    while i < hn:
        j = i
        while j < hn and c2[j] == c2[i] and v2[j] == v2[i]:
            j += 1
        if (j - i) & 1:
            outv[m] = v2[i]
            outc[m] = c2[i]
            m += 1
        i = j
    return outv[:m].copy(), outc[:m].copy()


@njit(cache=True)
def reduce_h1(dist, eu, ev, evals, threshold):
    """Degree-1 persistence pairs of the VR filtration capped at threshold.

    Edges must be sorted ascending by (value, u, v). Returns (births, deaths,
    essential_births); zero-persistence pairs are still included here and are
    filtered by the caller.
    """
    n = dist.shape[0]
    E = eu.shape[0]
    is_tree = _tree_edges(n, eu, ev)
    ncand = 0
    for i in range(E):
        if not is_tree[i]:
            ncand += 1
    births = np.empty(ncand, dtype=np.float64)
    deaths = np.empty(ncand, dtype=np.float64)
    npairs = 0
    ess = np.empty(ncand, dtype=np.float64)
    ness = 0

    # pivot triangle code -> column ref; ref >= 0 is "raw cofacets of edge
    # ref", ref < 0 is stored (already reduced) column -(ref+1)
    pivot_ref = Dict.empty(types.int64, types.int64)
    stored_c = List.empty_list(types.int64[::1])
    stored_v = List.empty_list(types.float64[::1])

    for ei in range(E - 1, -1, -1):
        if is_tree[ei]:
            continue
        u = eu[ei]
        v = ev[ei]
        b = evals[ei]
        pc, pv, cnt = _min_cofacet(dist, u, v, threshold, n)
        if cnt == 0:
            ess[ness] = b
            ness += 1
            continue
        if pc not in pivot_ref:
            pivot_ref[pc] = ei
            births[npairs] = b
            deaths[npairs] = pv
            npairs += 1
            continue
        # pivot collision: reduce with a lazy heap column
        hv = np.empty(1024, dtype=np.float64)
        hc = np.empty(1024, dtype=np.int64)
        hn = 0
        hv, hc, hn = _push_cofacets(dist, u, v, threshold, n, hv, hc, hn)
        while True:
            pv, pc, hn, found = _heap_pivot(hv, hc, hn)
            if not found:
                ess[ness] = b
                ness += 1
                break
            if pc in pivot_ref:
                ref = pivot_ref[pc]
                hv, hc, hn = _heap_push(hv, hc, hn, pv, pc)  # pivot stays in column
                if ref >= 0:
                    hv, hc, hn = _push_cofacets(dist, eu[ref], ev[ref], threshold, n, hv, hc, hn)
                else:
                    sid = -(ref + 1)
                    oc = stored_c[sid]
                    ov = stored_v[sid]
                    for q in range(oc.shape[0]):
                        hv, hc, hn = _heap_push(hv, hc, hn, ov[q], oc[q])
            else:
                restv, restc = _drain_sorted(hv, hc, hn)
                outv = np.empty(restv.shape[0] + 1, dtype=np.float64)
                outc = np.empty(restc.shape[0] + 1, dtype=np.int64)
                outv[0] = pv
                outc[0] = pc
                outv[1:] = restv
                outc[1:] = restc
                stored_c.append(outc)
                stored_v.append(outv)
                pivot_ref[pc] = -len(stored_c)
                births[npairs] = b
                deaths[npairs] = pv
                npairs += 1
                break
    return births[:npairs].copy(), deaths[:npairs].copy(), ess[:ness].copy()


# ---------------------------------------------------------------------------
# homology-mode reduction for cycle representatives
# ---------------------------------------------------------------------------

@njit(cache=True)
def triangle_list(dist, n, dmax):
    """All triangles with diameter <= dmax, sorted by (value, vertex code)."""
    cnt = 0
    for a in range(n):
        for b in range(a + 1, n):
            dab = dist[a, b]
            if dab > dmax:
                continue
            for c in range(b + 1, n):
                val = dab
                d1 = dist[a, c]
                if d1 > val:
                    val = d1
                d2 = dist[b, c]
                if d2 > val:
                    val = d2
                if val <= dmax:
                    cnt += 1
    ta = np.empty(cnt, dtype=np.int32)
    tb = np.empty(cnt, dtype=np.int32)
    tc = np.empty(cnt, dtype=np.int32)
    tv = np.empty(cnt, dtype=np.float64)
    m = 0
    for a in range(n):
        for b in range(a + 1, n):
            dab = dist[a, b]
            if dab > dmax:
                continue
            for c in range(b + 1, n):
                val = dab
                d1 = dist[a, c]
                if d1 > val:
                    val = d1
                d2 = dist[b, c]
                if d2 > val:
                    val = d2
                if val <= dmax:
                    ta[m] = a
                    tb[m] = b
                    tc[m] = c
                    tv[m] = val
                    m += 1
    codes = (ta.astype(np.int64) * n + tb) * n + tc
    o1 = np.argsort(codes)
    o2 = np.argsort(tv[o1], kind="mergesort")
    order = o1[o2]
    return ta[order].copy(), tb[order].copy(), tc[order].copy(), tv[order].copy()


@njit(cache=True)
def _xor_sorted_int(a, b):
    na = a.shape[0]
    nb = b.shape[0]
    out = np.empty(na + nb, dtype=np.int64)
    i = 0
    j = 0
    m = 0
    while i < na and j < nb:
        if a[i] == b[j]:
            i += 1
            j += 1
        elif a[i] < b[j]:
            out[m] = a[i]
            i += 1
            m += 1
        else:
            out[m] = b[j]
            j += 1
            m += 1
    while i < na:
        out[m] = a[i]
        i += 1
        m += 1
    while j < nb:
        out[m] = b[j]
        j += 1
        m += 1
    return out[:m].copy()


@njit(cache=True)
def find_representative(eu, ev, evals, edge_id, n, ta, tb, tc, tv, target_b, target_d):
    """Reduce triangle columns in filtration order until the (birth, death)
    pair shows up; return the reduced column (edge indices) at that moment.

    Returns an empty array when no registered pair matches the target.
    """
    E = eu.shape[0]
    pivot_col = np.full(E, -1, dtype=np.int64)
    columns = List.empty_list(types.int64[::1])
    T = ta.shape[0]
    for t in range(T):
        a = np.int64(ta[t])
        b = np.int64(tb[t])
        c = np.int64(tc[t])
        val = tv[t]
        e1 = edge_id[a * n + b]
        e2 = edge_id[a * n + c]
        e3 = edge_id[b * n + c]
        col = np.empty(3, dtype=np.int64)
        # ascending edge indices
        if e1 > e2:
            e1, e2 = e2, e1
        if e2 > e3:
            e2, e3 = e3, e2
            if e1 > e2:
                e1, e2 = e2, e1
        col[0] = e1
        col[1] = e2
        col[2] = e3
        while col.shape[0] > 0:
            low = col[col.shape[0] - 1]
            ref = pivot_col[low]
            if ref == -1:
                pivot_col[low] = len(columns)
                columns.append(col)
                if evals[low] == target_b and val == target_d:
                    return col
                break
            col = _xor_sorted_int(col, columns[ref])
    return np.empty(0, dtype=np.int64)
