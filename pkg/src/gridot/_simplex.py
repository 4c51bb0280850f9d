"""Primal network simplex for dense transportation problems.

The problem is a complete bipartite graph: every (source, sink) pair is an
arc with cost ``C[i, j]`` and flat arc index ``i * n_sink + j``.  A basis is
a spanning tree over the ``n_src + n_dst`` nodes, stored as an array of
``n_src + n_dst - 1`` cells with their flows.

Dual variables are kept exact: whenever a pivot detaches a subtree, every
potential in it is recomputed by propagating costs along the new tree edges,
so each basic arc always has an exactly zero reduced cost in floating point
and rounding never accumulates across pivots.

Pivoting uses block search: arcs are scanned in fixed-size blocks starting
from a rolling pointer, and the most negative reduced cost within the first
block that contains any negative arc enters (ties break toward the lowest
arc index).  After ``degen_limit`` consecutive degenerate pivots the rule
switches to Bland's rule (first negative arc from index 0), which guarantees
termination; a non-degenerate pivot switches back.
"""

from __future__ import annotations

import numpy as np
from numba import njit

STATUS_OPTIMAL = 0
STATUS_PIVOT_LIMIT = 1
STATUS_DISCONNECTED = 2


@njit(cache=True)
def _northwest_corner(sup, dem, bi, bj, bf):
    """Fill (bi, bj, bf) with a spanning northwest-corner starting basis."""
    ns = sup.shape[0]
    nt = dem.shape[0]
    rs = sup.copy()
    rd = dem.copy()
    r = 0
    c = 0
    for k in range(ns + nt - 1):
        x = rs[r] if rs[r] < rd[c] else rd[c]
        bi[k] = r
        bj[k] = c
        bf[k] = x
        rs[r] -= x
        rd[c] -= x
        if rs[r] == 0.0 and r < ns - 1:
            r += 1
        elif rd[c] == 0.0 and c < nt - 1:
            c += 1
        elif r < ns - 1:
            r += 1
        elif c < nt - 1:
            c += 1


@njit(cache=True)
def _solve(C, sup, dem, block_size, max_pivots, degen_limit, tol):
    ns = C.shape[0]
    nt = C.shape[1]
    nbasis = ns + nt - 1
    n_arcs = ns * nt
    n_nodes = ns + nt

    bi = np.empty(nbasis, np.int64)
    bj = np.empty(nbasis, np.int64)
    bf = np.empty(nbasis, np.float64)
    _northwest_corner(sup, dem, bi, bj, bf)

    # basis adjacency: doubly linked lists of slots per row and per column
    row_head = np.full(ns, -1, np.int64)
    col_head = np.full(nt, -1, np.int64)
    row_next = np.empty(nbasis, np.int64)
    row_prev = np.empty(nbasis, np.int64)
    col_next = np.empty(nbasis, np.int64)
    col_prev = np.empty(nbasis, np.int64)
    for k in range(nbasis):
        s = bi[k]
        row_next[k] = row_head[s]
        row_prev[k] = -1
        if row_head[s] != -1:
            row_prev[row_head[s]] = k
        row_head[s] = k
        t = bj[k]
        col_next[k] = col_head[t]
        col_prev[k] = -1
        if col_head[t] != -1:
            col_prev[col_head[t]] = k
        col_head[t] = k

    # tree arrays; node ids: sources 0..ns-1, sinks ns..ns+nt-1
    u = np.empty(ns, np.float64)
    v = np.empty(nt, np.float64)
    parent = np.full(n_nodes, -2, np.int64)
    parent_slot = np.empty(n_nodes, np.int64)
    depth = np.empty(n_nodes, np.int64)
    stack = np.empty(n_nodes, np.int64)

    # cycle path buffers: slots and flow-change signs along both tree paths
    path_a = np.empty(n_nodes, np.int64)
    path_b = np.empty(n_nodes, np.int64)
    sign_a = np.empty(n_nodes, np.int64)
    sign_b = np.empty(n_nodes, np.int64)

    # full relabel from source 0 (u[0] = 0): duals, parents, depths
    parent[0] = -1
    parent_slot[0] = -1
    depth[0] = 0
    u[0] = 0.0
    sp = 0
    stack[sp] = 0
    sp = 1
    while sp > 0:
        sp -= 1
        node = stack[sp]
        if node < ns:
            s = node
            k = row_head[s]
            while k != -1:
                t = bj[k]
                if parent[ns + t] == -2:
                    v[t] = C[s, t] - u[s]
                    parent[ns + t] = node
                    parent_slot[ns + t] = k
                    depth[ns + t] = depth[node] + 1
                    stack[sp] = ns + t
                    sp += 1
                k = row_next[k]
        else:
            t = node - ns
            k = col_head[t]
            while k != -1:
                s = bi[k]
                if parent[s] == -2:
                    u[s] = C[s, t] - v[t]
                    parent[s] = node
                    parent_slot[s] = k
                    depth[s] = depth[node] + 1
                    stack[sp] = s
                    sp += 1
                k = col_next[k]
    for w in range(n_nodes):
        if parent[w] == -2:
            return STATUS_DISCONNECTED, bi, bj, bf, u, v, 0

    next_arc = 0
    degen_run = 0
    pivots = 0
    status = STATUS_OPTIMAL

    while True:
        # entering arc
        enter_arc = -1
        if degen_run >= degen_limit:
            for arc in range(n_arcs):
                i = arc // nt
                j = arc - i * nt
                if C[i, j] - u[i] - v[j] < -tol:
                    enter_arc = arc
                    break
        else:
            best = -tol
            scanned = 0
            a = next_arc
            while scanned < n_arcs:
                hi = a + block_size
                if hi > n_arcs:
                    hi = n_arcs
                for arc in range(a, hi):
                    i = arc // nt
                    j = arc - i * nt
                    red = C[i, j] - u[i] - v[j]
                    if red < best:
                        best = red
                        enter_arc = arc
                scanned += hi - a
                a = hi
                if a >= n_arcs:
                    a = 0
                if enter_arc != -1:
                    break
            if enter_arc != -1:
                next_arc = enter_arc + 1
                if next_arc >= n_arcs:
                    next_arc = 0
        if enter_arc == -1:
            break
        if pivots >= max_pivots:
            status = STATUS_PIVOT_LIMIT
            break
        pivots += 1

        # unique tree path between the entering arc's endpoints
        ei = enter_arc // nt
        ej = enter_arc - ei * nt
        ca = 0
        cb = 0
        pa = ns + ej
        pb = ei
        while depth[pa] > depth[pb]:
            path_a[ca] = parent_slot[pa]
            sign_a[ca] = -1 if pa >= ns else 1
            ca += 1
            pa = parent[pa]
        while depth[pb] > depth[pa]:
            path_b[cb] = parent_slot[pb]
            sign_b[cb] = -1 if pb < ns else 1
            cb += 1
            pb = parent[pb]
        while pa != pb:
            path_a[ca] = parent_slot[pa]
            sign_a[ca] = -1 if pa >= ns else 1
            ca += 1
            pa = parent[pa]
            path_b[cb] = parent_slot[pb]
            sign_b[cb] = -1 if pb < ns else 1
            cb += 1
            pb = parent[pb]

        # leaving arc: minimum flow among decreasing slots, lowest arc index on ties
        t_push = np.inf
        leave_slot = -1
        leave_arc = np.int64(9223372036854775807)
        leave_on_a = True
        for q in range(ca):
            if sign_a[q] < 0:
                k = path_a[q]
                fl = bf[k]
                ak = bi[k] * nt + bj[k]
                if fl < t_push or (fl == t_push and ak < leave_arc):
                    t_push = fl
                    leave_slot = k
                    leave_arc = ak
                    leave_on_a = True
        for q in range(cb):
            if sign_b[q] < 0:
                k = path_b[q]
                fl = bf[k]
                ak = bi[k] * nt + bj[k]
                if fl < t_push or (fl == t_push and ak < leave_arc):
                    t_push = fl
                    leave_slot = k
                    leave_arc = ak
                    leave_on_a = False

        if t_push > 0.0:
            degen_run = 0
        else:
            degen_run += 1

        for q in range(ca):
            bf[path_a[q]] += sign_a[q] * t_push
        for q in range(cb):
            bf[path_b[q]] += sign_b[q] * t_push

        # swap leaving cell out of the adjacency lists, entering cell in
        k = leave_slot
        if row_prev[k] != -1:
            row_next[row_prev[k]] = row_next[k]
        else:
            row_head[bi[k]] = row_next[k]
        if row_next[k] != -1:
            row_prev[row_next[k]] = row_prev[k]
        if col_prev[k] != -1:
            col_next[col_prev[k]] = col_next[k]
        else:
            col_head[bj[k]] = col_next[k]
        if col_next[k] != -1:
            col_prev[col_next[k]] = col_prev[k]
        bi[k] = ei
        bj[k] = ej
        bf[k] = t_push
        row_next[k] = row_head[ei]
        row_prev[k] = -1
        if row_head[ei] != -1:
            row_prev[row_head[ei]] = k
        row_head[ei] = k
        col_next[k] = col_head[ej]
        col_prev[k] = -1
        if col_head[ej] != -1:
            col_prev[col_head[ej]] = k
        col_head[ej] = k

        # relabel the detached subtree: it hangs off the entering arc at the
        # endpoint whose old root path crossed the leaving arc
        if leave_on_a:
            q_root = ns + ej
            p_root = ei
        else:
            q_root = ei
            p_root = ns + ej
        parent[q_root] = p_root
        parent_slot[q_root] = leave_slot
        depth[q_root] = depth[p_root] + 1
        if q_root < ns:
            u[q_root] = C[q_root, p_root - ns] - v[p_root - ns]
        else:
            v[q_root - ns] = C[p_root, q_root - ns] - u[p_root]
        sp = 0
        stack[sp] = q_root
        sp = 1
        while sp > 0:
            sp -= 1
            node = stack[sp]
            if node < ns:
                s = node
                k = row_head[s]
                while k != -1:
                    if k != parent_slot[node]:
                        t = bj[k]
                        v[t] = C[s, t] - u[s]
                        parent[ns + t] = node
                        parent_slot[ns + t] = k
                        depth[ns + t] = depth[node] + 1
                        stack[sp] = ns + t
                        sp += 1
                    k = row_next[k]
            else:
                t = node - ns
                k = col_head[t]
                while k != -1:
                    if k != parent_slot[node]:
                        s = bi[k]
                        u[s] = C[s, t] - v[t]
                        parent[s] = node
                        parent_slot[s] = k
                        depth[s] = depth[node] + 1
                        stack[sp] = s
                        sp += 1
                    k = col_next[k]

    return status, bi, bj, bf, u, v, pivots


def transport_simplex(C, sup, dem, block_size=None, max_pivots=None, tol=1e-10):
    """Solve min <pi, C> over couplings of (sup, dem).

    Parameters
    ----------
    C : (ns, nt) float64 array of arc costs.
    sup, dem : positive mass vectors with equal totals (up to rounding).
    block_size : arcs scanned per pricing block; default ~sqrt(ns * nt).
    max_pivots : pivot cap; default 50 * (ns + nt)**2.
    tol : entering threshold; final duals satisfy C - u - v >= -tol.

    Returns
    -------
    status, bi, bj, bf, u, v, pivots
        Basis cells (bi, bj) with flows bf (may include zero flows), duals
        (u, v) normalized to u[0] = 0, and the pivot count.
    """
    C = np.ascontiguousarray(C, dtype=np.float64)
    sup = np.ascontiguousarray(sup, dtype=np.float64)
    dem = np.ascontiguousarray(dem, dtype=np.float64)
    ns, nt = C.shape
    if block_size is None:
        block_size = max(64, int(np.sqrt(ns * nt)) + 1)
    if max_pivots is None:
        max_pivots = 50 * (ns + nt) ** 2
    degen_limit = 10 * (ns + nt)
    return _solve(C, sup, dem, block_size, max_pivots, degen_limit, tol)
