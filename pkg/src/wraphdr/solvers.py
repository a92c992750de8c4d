"""Winding-number recovery from a single wrapped sensor image.

Three pieces: a threshold wrap-edge detector, a breadth-first flood fill
that integrates the detected wraps, and a multi-label MRF solved by
alpha-expansion with exact min-cut moves.  Channels are solved
independently.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import breadth_first_order

from ._validation import as_hwc
from .codec import SensorImage, reconstruct
from .maxflow import FlowGraph

__all__ = [
    "WrapEdgeMask",
    "MrfConfig",
    "FloodFillReport",
    "MrfReport",
    "Solver",
    "detect_wrap_edges",
    "edges_from_winding",
    "unwrap_floodfill",
    "unwrap_mrf",
    "mrf_energy",
    "decode",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class WrapEdgeMask:
    """Signed wrap edges of an (H, W, C) image.

    ``horizontal[r, c, ch]`` describes the boundary between columns ``c`` and
    ``c + 1``; ``vertical[r, c, ch]`` the boundary between rows ``r`` and
    ``r + 1``.  Entries are +1 (winding increases in the +x / +y direction),
    -1 (decreases) or 0 (no wrap).
    """

    horizontal: np.ndarray
    vertical: np.ndarray

    @property
    def shape(self):
        h, w1, c = self.horizontal.shape
        return h, w1 + 1, c

    @property
    def marked_horizontal(self):
        return self.horizontal != 0

    @property
    def marked_vertical(self):
        return self.vertical != 0

    @property
    def n_marked(self):
        return int(np.count_nonzero(self.horizontal) + np.count_nonzero(self.vertical))


@dataclass(frozen=True)
class MrfConfig:
    max_label: int = 16
    lam: float = 1.0
    trunc: float = 2.0
    max_sweeps: int = 5

    def __post_init__(self):
        if int(self.max_label) != self.max_label or self.max_label < 1:
            raise ValueError(f"max_label must be an integer >= 1, got {self.max_label}")
        if not self.lam > 0:
            raise ValueError(f"lam must be > 0, got {self.lam}")
        if not self.trunc > 0:
            raise ValueError(f"trunc must be > 0, got {self.trunc}")
        if int(self.max_sweeps) != self.max_sweeps or self.max_sweeps < 1:
            raise ValueError(f"max_sweeps must be an integer >= 1, got {self.max_sweeps}")


@dataclass
class FloodFillReport:
    conflicts: int = 0
    components: int = 0
    shifted: int = 0


@dataclass
class MrfReport:
    initial_energy: float = 0.0
    energy: float = 0.0
    energies: list = field(default_factory=list)
    sweeps: int = 0
    clipped: int = 0
    at_ceiling: int = 0
    residual_edges: int = 0
    floodfill: FloodFillReport = None

    @property
    def capacity_exceeded(self):
        return self.clipped > 0 or (self.at_ceiling > 0 and self.residual_edges > 0)


class Solver(str, Enum):
    FLOODFILL = "floodfill"
    MRF = "mrf"


def _sensor_hwc(sensor):
    if not isinstance(sensor, SensorImage):
        raise TypeError("expected a SensorImage")
    return as_hwc(sensor.data)


def detect_wrap_edges(sensor, tau=None):
    """Mark boundaries where the wrapped value jumps by more than ``tau``.

    A large negative jump ``m[n+1] - m[n] < -tau`` means the signal wrapped
    upwards, so the edge gets sign +1; a large positive jump gets -1.
    ``tau`` defaults to ``i_max / 2``.
    """
    m, _ = _sensor_hwc(sensor)
    i_max = sensor.params.i_max
    tau = i_max / 2 if tau is None else float(tau)
    if not 0 < tau < i_max:
        raise ValueError(f"tau must lie in (0, {i_max}), got {tau}")
    dh = np.diff(m, axis=1)
    dv = np.diff(m, axis=0)
    hor = np.where(np.abs(dh) > tau, -np.sign(dh), 0).astype(np.int8)
    ver = np.where(np.abs(dv) > tau, -np.sign(dv), 0).astype(np.int8)
    return WrapEdgeMask(hor, ver)


def edges_from_winding(winding):
    """Ground-truth wrap edges: signed winding differences across boundaries."""
    w, _ = as_hwc(np.asarray(winding, dtype=np.int64))
    dh = np.diff(w, axis=1)
    dv = np.diff(w, axis=0)
    return WrapEdgeMask(np.clip(dh, -1, 1).astype(np.int8), np.clip(dv, -1, 1).astype(np.int8))


def _grid_pairs(h, w):
    idx = np.arange(h * w).reshape(h, w)
    return (idx[:, :-1].ravel(), idx[:, 1:].ravel()), (idx[:-1, :].ravel(), idx[1:, :].ravel())


def _floodfill_channel(m, hor, ver):
    h, w = m.shape
    n = h * w
    (ha, hb), (va, vb) = _grid_pairs(h, w)
    a = np.concatenate([ha, va])
    b = np.concatenate([hb, vb])
    graph = coo_matrix((np.ones(2 * a.size), (np.concatenate([a, b]), np.concatenate([b, a]))),
                       shape=(n, n)).tocsr()
    hor_f = hor.ravel().astype(np.int64)
    ver_f = ver.ravel().astype(np.int64)

    def increment(parent, child):
        # label change when stepping parent -> child across one boundary
        pr, pc = np.divmod(parent, w)
        cr, cc = np.divmod(child, w)
        out = np.empty(parent.size, dtype=np.int64)
        right = cc > pc
        left = cc < pc
        down = cr > pr
        up = cr < pr
        out[right] = hor_f[pr[right] * (w - 1) + pc[right]]
        out[left] = -hor_f[cr[left] * (w - 1) + cc[left]]
        out[down] = ver_f[pr[down] * w + pc[down]]
        out[up] = -ver_f[cr[up] * w + cc[up]]
        return out

    labels = np.zeros(n, dtype=np.int64)
    visited = np.zeros(n, dtype=bool)
    flat = m.ravel()
    components = 0
    shifted = 0
    while not visited.all():
        # seed: smallest wrapped value, ties by row-major index
        cand = np.where(visited, np.inf, flat)
        seed = int(np.argmin(cand))
        order, pred = breadth_first_order(graph, seed, directed=False, return_predecessors=True)
        components += 1
        inc = np.zeros(n, dtype=np.int64)
        child = order[1:]
        parent = pred[child]
        inc[child] = increment(parent, child)
        # pointer jumping: accumulate increments along the BFS tree
        acc = inc.copy()
        ptr = np.full(n, -1, dtype=np.int64)
        ptr[child] = parent
        while True:
            live = ptr >= 0
            if not live.any():
                break
            acc[live] += acc[ptr[live]]
            ptr[live] = ptr[ptr[live]]
        comp = order
        lab = acc[comp]
        lo = lab.min()
        if lo < 0:
            shifted += int(np.count_nonzero(lab < 0))
        labels[comp] = lab - lo
        visited[comp] = True

    lab2 = labels.reshape(h, w)
    conflicts = int(np.count_nonzero(np.diff(lab2, axis=1) != hor) + np.count_nonzero(np.diff(lab2, axis=0) != ver))
    return lab2, FloodFillReport(conflicts=conflicts, components=components, shifted=shifted)


def unwrap_floodfill(sensor, edges=None, return_report=False):
    """Integrate signed wrap edges into a winding map by breadth-first growth.

    Growth starts at the smallest wrapped value (ties by row-major index)
    and visits the 4-neighbourhood in index order.  Crossing a marked edge
    adds its sign, crossing an unmarked one copies the label.  Each
    connected component is shifted so that its smallest winding is 0.
    Boundaries whose final label difference disagrees with the edge mask
    are counted as conflicts; the first-visit label is kept.
    """
    m, restore = _sensor_hwc(sensor)
    if edges is None:
        edges = detect_wrap_edges(sensor)
    if edges.shape != m.shape:
        raise ValueError(f"edge mask shape {edges.shape} does not match sensor {m.shape}")
    out = np.zeros(m.shape, dtype=np.int64)
    report = FloodFillReport()
    for ch in range(m.shape[2]):
        lab, rep = _floodfill_channel(m[:, :, ch], edges.horizontal[:, :, ch], edges.vertical[:, :, ch])
        out[:, :, ch] = lab
        report.conflicts += rep.conflicts
        report.components += rep.components
        report.shifted += rep.shifted
    if report.conflicts:
        log.info("flood fill: %d inconsistent boundaries", report.conflicts)
    winding = restore(out)
    return (winding, report) if return_report else winding


def _pair_cost(du, lam, trunc):
    return lam * np.minimum(np.abs(du), trunc)


def mrf_energy(sensor, winding, config=None):
    """Energy of ``winding`` under the truncated-linear smoothness prior.

    The prior acts on the in-domain unwrapped value ``m + W * i_max``.
    """
    config = config or MrfConfig(trunc=2.0 * sensor.params.i_max)
    m, _ = _sensor_hwc(sensor)
    w, _ = as_hwc(np.asarray(winding))
    u = m + w * sensor.params.i_max
    return float(_pair_cost(np.diff(u, axis=1), config.lam, config.trunc).sum()
                 + _pair_cost(np.diff(u, axis=0), config.lam, config.trunc).sum())


def _expand(m, w, alpha, i_max, lam, trunc, pa, pb):
    """One alpha-expansion move on a single channel.  Returns the proposal."""
    n = m.size
    mf = m.ravel()
    wf = w.ravel()
    d = mf[pa] - mf[pb]
    wa, wb = wf[pa], wf[pb]
    e00 = _pair_cost(d + (wa - wb) * i_max, lam, trunc)
    e01 = _pair_cost(d + (wa - alpha) * i_max, lam, trunc)
    e10 = _pair_cost(d + (alpha - wb) * i_max, lam, trunc)
    e11 = _pair_cost(d, lam, trunc)
    # non-submodular pairs are made tight; the caller verifies the true energy
    e10 = np.maximum(e10, e00 + e11 - e01)
    unary = np.zeros(n)
    np.add.at(unary, pa, e10 - e00)
    np.add.at(unary, pb, e11 - e10)
    g = FlowGraph(n)
    pos = unary > 0
    g.add_tedges(np.flatnonzero(pos), unary[pos], np.zeros(pos.sum()))
    neg = unary < 0
    g.add_tedges(np.flatnonzero(neg), np.zeros(neg.sum()), -unary[neg])
    g.add_edges(pa, pb, np.maximum(e01 + e10 - e00 - e11, 0.0))
    g.maxflow()
    switch = g.segment().astype(bool)
    return np.where(switch, alpha, wf).reshape(w.shape)


def _mrf_channel(m, w0, i_max, config):
    h, wd = m.shape
    (ha, hb), (va, vb) = _grid_pairs(h, wd)
    pa = np.concatenate([ha, va])
    pb = np.concatenate([hb, vb])

    def energy(w):
        u = (m + w * i_max).ravel()
        return float(_pair_cost(u[pa] - u[pb], config.lam, config.trunc).sum())

    w = w0.copy()
    e = energy(w)
    energies = [e]
    sweeps = 0
    for _ in range(config.max_sweeps):
        sweeps += 1
        improved = False
        for alpha in range(config.max_label + 1):
            prop = _expand(m, w, alpha, i_max, config.lam, config.trunc, pa, pb)
            ep = energy(prop)
            if ep < e - 1e-12 * max(1.0, abs(e)):
                w, e = prop, ep
                improved = True
        energies.append(e)
        if not improved:
            break
    return w, energies, sweeps


def unwrap_mrf(sensor, config=None, init=None, return_report=False):
    """Winding map minimising a truncated-linear MRF by alpha-expansion.

    Labels range over ``0..config.max_label``.  The smoothness term is
    ``lam * min(|u_p - u_q|, trunc)`` on the in-domain unwrapped value
    ``u = m + W * i_max``; the data term is uniform.  Every expansion move
    is solved by a min-cut and only accepted if it lowers the energy, so
    the energy never increases.  ``init`` defaults to the flood-fill result.
    """
    i_max = sensor.params.i_max
    config = config or MrfConfig(trunc=2.0 * i_max)
    m, restore = _sensor_hwc(sensor)
    ff_report = None
    if init is None:
        init, ff_report = unwrap_floodfill(sensor, return_report=True)
    w0, _ = as_hwc(np.asarray(init, dtype=np.int64))
    if w0.shape != m.shape:
        raise ValueError(f"init shape {w0.shape} does not match sensor {m.shape}")
    report = MrfReport(floodfill=ff_report)
    report.clipped = int(np.count_nonzero((w0 > config.max_label) | (w0 < 0)))
    if report.clipped:
        log.warning("%d initial labels outside 0..%d were clipped", report.clipped, config.max_label)
    w0 = np.clip(w0, 0, config.max_label)

    out = np.zeros(m.shape, dtype=np.int64)
    energies = None
    for ch in range(m.shape[2]):
        w, en, sweeps = _mrf_channel(m[:, :, ch], w0[:, :, ch], i_max, config)
        out[:, :, ch] = w
        report.sweeps = max(report.sweeps, sweeps)
        en = np.asarray(en)
        if energies is None:
            energies = en
        else:
            # channels may stop after different numbers of sweeps
            k = max(len(energies), len(en))
            energies = np.pad(energies, (0, k - len(energies)), mode="edge") + np.pad(en, (0, k - len(en)), mode="edge")
    report.energies = [float(x) for x in energies]
    report.initial_energy = report.energies[0]
    report.energy = report.energies[-1]

    lo = out.min(axis=(0, 1), keepdims=True)
    out = out - lo  # the prior is shift invariant; anchor the darkest layer at 0
    u = m + out * i_max
    res_h = np.abs(np.diff(u, axis=1)) > i_max / 2
    res_v = np.abs(np.diff(u, axis=0)) > i_max / 2
    report.residual_edges = int(res_h.sum() + res_v.sum())
    report.at_ceiling = int(np.count_nonzero(out == config.max_label))
    if report.capacity_exceeded:
        log.warning("winding ceiling %d reached with %d residual edges", config.max_label, report.residual_edges)
    winding = restore(out)
    return (winding, report) if return_report else winding


def decode(sensor, solver=Solver.FLOODFILL, config=None, tau=None, return_report=False):
    """Recover irradiance: solve for the winding map, then invert the encoding."""
    solver = Solver(solver)
    if solver is Solver.FLOODFILL:
        edges = detect_wrap_edges(sensor, tau)
        winding, report = unwrap_floodfill(sensor, edges, return_report=True)
    else:
        winding, report = unwrap_mrf(sensor, config, return_report=True)
    img = reconstruct(sensor, winding)
    return (img, winding, report) if return_report else img
