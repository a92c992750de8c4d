"""s-t max-flow / min-cut by shortest augmenting paths (Dinic's algorithm).

Used by the alpha-expansion solver; usable on its own for small graph-cut
problems.  Edges are collected in numpy buffers and the search itself runs
in a numba kernel over a CSR adjacency.
"""

import numpy as np
from numba import njit

EPS = 1e-12


@njit(cache=True)
def _bfs(n_nodes, s, t, start, adj, to, cap, level, queue, eps):
    for i in range(n_nodes):
        level[i] = -1
    level[s] = 0
    head = 0
    tail = 0
    queue[tail] = s
    tail += 1
    while head < tail:
        u = queue[head]
        head += 1
        for k in range(start[u], start[u + 1]):
            e = adj[k]
            v = to[e]
            if level[v] < 0 and cap[e] > eps:
                level[v] = level[u] + 1
                queue[tail] = v
                tail += 1
    return level[t] >= 0


@njit(cache=True)
def _dinic(n_nodes, s, t, start, adj, to, cap, eps):
    level = np.empty(n_nodes, np.int64)
    queue = np.empty(n_nodes, np.int64)
    it = np.empty(n_nodes, np.int64)
    stack = np.empty(n_nodes + 1, np.int64)
    path = np.empty(n_nodes + 1, np.int64)
    flow = 0.0
    while _bfs(n_nodes, s, t, start, adj, to, cap, level, queue, eps):
        for i in range(n_nodes):
            it[i] = start[i]
        depth = 0  # number of edges on the current path
        stack[0] = s
        while depth >= 0:
            u = stack[depth]
            if u == t:
                f = cap[path[0]]
                for i in range(1, depth):
                    if cap[path[i]] < f:
                        f = cap[path[i]]
                first = -1
                for i in range(depth):
                    e = path[i]
                    cap[e] -= f
                    cap[e ^ 1] += f
                    if first < 0 and cap[e] <= eps:
                        first = i
                flow += f
                # resume from the tail of the first saturated edge
                depth = first
                continue
            lu = level[u] + 1
            k = it[u]
            end = start[u + 1]
            while k < end:
                e = adj[k]
                if cap[e] > eps and level[to[e]] == lu:
                    break
                k += 1
            it[u] = k
            if k < end:
                e = adj[k]
                path[depth] = e
                depth += 1
                stack[depth] = to[e]
            else:
                level[u] = -1
                depth -= 1
                if depth >= 0:
                    it[stack[depth]] += 1
    # source side of the minimum cut
    _bfs(n_nodes, s, t, start, adj, to, cap, level, queue, eps)
    return flow, level >= 0


class FlowGraph:
    """Directed graph with real capacities between ``n`` nodes plus terminals.

    Nodes are ``0..n-1``.  After :meth:`maxflow`, :meth:`segment` gives 0
    for nodes on the source side of the minimum cut and 1 for the sink side.
    """

    def __init__(self, n):
        self.n = int(n)
        self.source = self.n
        self.sink = self.n + 1
        self._tails = []
        self._heads = []
        self._caps = []
        self._revs = []
        self._reach = None
        self.flow = 0.0

    def _push(self, u, v, cap, rev):
        self._tails.append(np.asarray(u, dtype=np.int64).ravel())
        self._heads.append(np.asarray(v, dtype=np.int64).ravel())
        self._caps.append(np.asarray(cap, dtype=np.float64).ravel())
        self._revs.append(np.asarray(rev, dtype=np.float64).ravel())

    def add_edge(self, u, v, cap, rev_cap=0.0):
        if cap < 0 or rev_cap < 0:
            raise ValueError("capacities must be nonnegative")
        if not (0 <= u < self.n and 0 <= v < self.n):
            raise IndexError(f"edge ({u}, {v}) out of range for {self.n} nodes")
        self._push(u, v, cap, rev_cap)

    def add_edges(self, us, vs, caps, rev_caps=None):
        """Vectorised :meth:`add_edge`; zero-capacity pairs are skipped."""
        us = np.asarray(us, dtype=np.int64)
        vs = np.asarray(vs, dtype=np.int64)
        caps = np.asarray(caps, dtype=np.float64)
        rev = np.zeros_like(caps) if rev_caps is None else np.asarray(rev_caps, dtype=np.float64)
        if np.any(caps < 0) or np.any(rev < 0):
            raise ValueError("capacities must be nonnegative")
        if us.size and (min(us.min(), vs.min()) < 0 or max(us.max(), vs.max()) >= self.n):
            raise IndexError("edge endpoint out of range")
        keep = (caps > 0) | (rev > 0)
        self._push(us[keep], vs[keep], caps[keep], rev[keep])

    def add_tedge(self, i, cap_source, cap_sink):
        """Add terminal capacities ``source -> i`` and ``i -> sink``."""
        self.add_tedges([i], [cap_source], [cap_sink])

    def add_tedges(self, idx, caps_source, caps_sink):
        idx = np.asarray(idx, dtype=np.int64)
        cs = np.asarray(caps_source, dtype=np.float64)
        ct = np.asarray(caps_sink, dtype=np.float64)
        if np.any(cs < 0) or np.any(ct < 0):
            raise ValueError("capacities must be nonnegative")
        if idx.size and (idx.min() < 0 or idx.max() >= self.n):
            raise IndexError("terminal edge node out of range")
        # the common part is always saturated
        common = np.minimum(cs, ct)
        self.flow += float(common.sum())
        cs = cs - common
        ct = ct - common
        src = cs > 0
        snk = ct > 0
        self._push(np.full(src.sum(), self.source), idx[src], cs[src], np.zeros(src.sum()))
        self._push(idx[snk], np.full(snk.sum(), self.sink), ct[snk], np.zeros(snk.sum()))

    def maxflow(self):
        """Run the solver and return the total flow (= minimum cut value)."""
        n_nodes = self.n + 2
        tails = np.concatenate(self._tails) if self._tails else np.zeros(0, np.int64)
        heads = np.concatenate(self._heads) if self._heads else np.zeros(0, np.int64)
        caps = np.concatenate(self._caps) if self._caps else np.zeros(0)
        revs = np.concatenate(self._revs) if self._revs else np.zeros(0)
        m = tails.size
        # edge 2k is forward, 2k + 1 its residual twin
        to = np.empty(2 * m, np.int64)
        frm = np.empty(2 * m, np.int64)
        cap = np.empty(2 * m)
        to[0::2], to[1::2] = heads, tails
        frm[0::2], frm[1::2] = tails, heads
        cap[0::2], cap[1::2] = caps, revs
        adj = np.argsort(frm, kind="stable").astype(np.int64)
        start = np.zeros(n_nodes + 1, np.int64)
        np.cumsum(np.bincount(frm, minlength=n_nodes), out=start[1:])
        flow, reach = _dinic(n_nodes, self.source, self.sink, start, adj, to, cap, EPS)
        self.flow += flow
        self._reach = reach
        return self.flow

    def segment(self, i=None):
        """Terminal label after :meth:`maxflow`: 0 = source side, 1 = sink side."""
        if self._reach is None:
            raise RuntimeError("call maxflow() first")
        labels = (~self._reach[: self.n]).astype(np.int8)
        return labels if i is None else int(labels[i])
