"""Epsilon-fattened transition graphs over box grids and everything
chain-recurrent that lives on them: recurrent boxes, chain components,
point-to-point chains, chain transitivity, nonwandering probes and
variable-threshold (Hurley-style) chain searches.

Construction is an outer approximation: the image of each box center is
fattened per axis by the entrywise Jacobian bound applied to the box
radii plus eps, and all boxes meeting that half-open rectangle become
out-neighbors.  Points leaving a non-periodic window feed a single
absorbing sink node, which is excluded from every recurrence statement.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .phase_space import BoxSet, Grid
from .system import MapSpec, evaluate

__all__ = [
    "TransitionGraph", "ChainComponent", "EpsChain",
    "ConstantEps", "RadialEps",
    "build_graph", "strongly_connected_components",
    "chain_recurrent_boxes", "chain_components", "find_eps_chain",
    "is_chain_transitive", "nonwandering_probe", "strong_chain_search",
    "NonwanderingResult",
]


@dataclass
class TransitionGraph:
    """CSR digraph on BoxIds plus a virtual sink at index grid.nboxes.

    Out-edges are sorted ascending per source; the sink carries a self
    loop, so every node has at least one out-edge.
    """

    grid: Grid
    map_spec: MapSpec
    eps: float
    offsets: np.ndarray
    targets: np.ndarray
    lipschitz_used: float
    _reverse: Optional[tuple] = field(default=None, repr=False)
    _self_loops: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def nboxes(self) -> int:
        return self.grid.nboxes

    @property
    def sink(self) -> int:
        return self.grid.nboxes

    @property
    def n_nodes(self) -> int:
        return self.grid.nboxes + 1

    @property
    def n_edges(self) -> int:
        return int(self.targets.size)

    def out(self, node: int) -> np.ndarray:
        return self.targets[self.offsets[node]:self.offsets[node + 1]]

    def out_degrees(self) -> np.ndarray:
        return np.diff(self.offsets)

    def has_sink_edges(self) -> bool:
        # only the sink self-loop means nothing escapes
        return bool(np.count_nonzero(self.targets == self.sink) > 1)

    def self_loop_mask(self) -> np.ndarray:
        """Boolean per box: the box is its own out-neighbor."""
        if self._self_loops is None:
            src = np.repeat(np.arange(self.n_nodes), self.out_degrees())
            hits = src == self.targets
            mask = np.zeros(self.n_nodes, dtype=bool)
            np.maximum.at(mask, src[hits], True)
            self._self_loops = mask[:self.nboxes]
        return self._self_loops

    def image_boxes(self, boxset: BoxSet) -> BoxSet:
        """One application of the multivalued box map (sink dropped)."""
        members = boxset.indices()
        if members.size == 0:
            return BoxSet.empty(self.grid)
        chunks = [self.targets[self.offsets[b]:self.offsets[b + 1]] for b in members]
        tgt = np.concatenate(chunks)
        bits = np.zeros(self.grid.nboxes, dtype=bool)
        tgt = tgt[tgt < self.nboxes]
        bits[tgt] = True
        return BoxSet(self.grid, bits)

    def set_escapes(self, boxset: BoxSet) -> bool:
        """True iff some member has an edge to the sink."""
        for b in boxset.indices():
            if self.out(int(b))[-1] == self.sink:
                return True
        return False

    def reverse(self) -> tuple:
        """(offsets, targets) of the transposed graph, cached."""
        if self._reverse is None:
            src = np.repeat(np.arange(self.n_nodes), self.out_degrees())
            order = np.lexsort((src, self.targets))
            rtarg = src[order]
            rsrc = self.targets[order]
            roff = np.zeros(self.n_nodes + 1, dtype=np.int64)
            np.add.at(roff, rsrc + 1, 1)
            roff = np.cumsum(roff)
            self._reverse = (roff, rtarg)
        return self._reverse


@dataclass
class ChainComponent:
    """One chain component at fixed resolution: a nontrivial SCC."""

    id: int
    boxes: BoxSet
    is_trivial: bool


@dataclass
class EpsChain:
    """Finite chain x_0..x_n with per-step jump bounds, revalidated on build."""

    points: np.ndarray
    eps: float
    thresholds: np.ndarray
    defects: np.ndarray

    def __len__(self):
        return self.points.shape[0] - 1


class ConstantEps:
    """Constant threshold function eps(x) = c."""

    def __init__(self, c: float):
        if c <= 0:
            raise ValueError("threshold must be positive")
        self.c = float(c)

    def __call__(self, points):
        p = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.full(p.shape[0], self.c)
        return out if np.asarray(points).ndim > 1 else float(out[0])

    def min_over_rects(self, lo, hi):
        lo = np.atleast_2d(lo)
        return np.full(lo.shape[0], self.c)


class RadialEps:
    """Threshold eps(x) = c / (1 + |x|), decaying away from the origin."""

    def __init__(self, c: float):
        if c <= 0:
            raise ValueError("threshold must be positive")
        self.c = float(c)

    def __call__(self, points):
        p = np.atleast_2d(np.asarray(points, dtype=float))
        out = self.c / (1.0 + np.linalg.norm(p, axis=-1))
        return out if np.asarray(points).ndim > 1 else float(out[0])

    def min_over_rects(self, lo, hi):
        # smallest value sits at the rectangle corner farthest from 0
        lo = np.atleast_2d(np.asarray(lo, dtype=float))
        hi = np.atleast_2d(np.asarray(hi, dtype=float))
        far = np.maximum(np.abs(lo), np.abs(hi))
        return self.c / (1.0 + np.linalg.norm(far, axis=-1))


# ---------------------------------------------------------------------------
# graph construction
# ---------------------------------------------------------------------------

def _box_spreads(grid: Grid, map_spec: MapSpec):
    """(spread, lipschitz): per-box per-axis image half-widths from entrywise
    Jacobian bounds, plus a scalar Lipschitz bound for slack formulas.

    Sound: |f(x)_a - f(c)_a| <= sum_b |J_ab|_max r_b over the box.  Maps
    without entrywise bounds fall back to the isotropic L * |r| spread.
    """
    if map_spec.jac_abs_bound is not None:
        centers = grid.centers()
        B = np.asarray(map_spec.jac_abs_bound(centers - grid.radius,
                                              centers + grid.radius))
        spread = np.einsum("nab,b->na", B, grid.radius)
        lip = float(np.max(np.linalg.norm(B, ord=2, axis=(1, 2))))
        if map_spec.lipschitz is not None:
            lip = min(lip, float(map_spec.lipschitz))
        return spread, lip
    if map_spec.lipschitz is None:
        raise ValueError(f"map {map_spec.name!r} has no Lipschitz bound")
    L = float(map_spec.lipschitz)
    spread = np.full((grid.nboxes, grid.dim), L * grid.box_norm_radius)
    return spread, L


def _cover_ranges(grid: Grid, lo_f: np.ndarray, hi_f: np.ndarray):
    """Integer index ranges of boxes meeting the half-open rects [lo_f, hi_f).

    Returns (ilo, ihi, escapes) with per-axis inclusive index ranges; the
    top index excludes rectangles whose upper face only touches a box
    boundary.  For non-periodic axes the ranges are clamped and `escapes`
    marks rows whose rectangle leaves the window.
    """
    n = lo_f.shape[0]
    dim = grid.dim
    dlo = np.asarray(grid.domain.lower)
    ilo = np.empty((n, dim), dtype=np.int64)
    ihi = np.empty((n, dim), dtype=np.int64)
    escapes = np.zeros(n, dtype=bool)
    empty = np.zeros(n, dtype=bool)
    for ax in range(dim):
        a = (lo_f[:, ax] - dlo[ax]) / grid.h[ax]
        b = (hi_f[:, ax] - dlo[ax]) / grid.h[ax]
        lo_idx = np.floor(a).astype(np.int64)
        hi_idx = (np.ceil(b) - 1).astype(np.int64)  # half-open top face
        hi_idx = np.maximum(hi_idx, lo_idx)
        size = grid.shape[ax]
        if grid.domain.periodic[ax]:
            full = (hi_idx - lo_idx) >= size - 1
            lo_idx = np.where(full, 0, lo_idx)
            hi_idx = np.where(full, size - 1, hi_idx)
        else:
            out_low = hi_idx < 0
            out_high = lo_idx >= size
            crosses = (lo_idx < 0) | (hi_idx >= size)
            escapes |= crosses | out_low | out_high
            empty |= out_low | out_high
            lo_idx = np.clip(lo_idx, 0, size - 1)
            hi_idx = np.clip(hi_idx, 0, size - 1)
        ilo[:, ax] = lo_idx
        ihi[:, ax] = hi_idx
    return ilo, ihi, escapes, empty


def _materialize_edges(grid: Grid, ilo, ihi, escapes, empty, sink: int):
    """Expand index ranges into a deduplicated, sorted edge list."""
    n = ilo.shape[0]
    dim = grid.dim
    counts = (ihi - ilo + 1)
    shape = np.asarray(grid.shape)
    strides = np.ones(dim, dtype=np.int64)
    for ax in range(dim - 2, -1, -1):
        strides[ax] = strides[ax + 1] * shape[ax + 1]

    srcs = []
    tgts = []
    cmax = counts.max(axis=0)
    # iterate over the (small) per-axis offset lattice, vectorized over boxes
    offsets = np.indices(tuple(int(c) for c in cmax)).reshape(dim, -1).T
    src_ids = np.arange(n, dtype=np.int64)
    for off in offsets:
        mask = np.all(off[None, :] < counts, axis=1) & ~empty
        if not mask.any():
            continue
        idx = ilo[mask] + off[None, :]
        for ax in range(dim):
            if grid.domain.periodic[ax]:
                idx[:, ax] = np.mod(idx[:, ax], shape[ax])
        tgt = (idx * strides[None, :]).sum(axis=1)
        srcs.append(src_ids[mask])
        tgts.append(tgt)
    if escapes.any():
        srcs.append(src_ids[escapes])
        tgts.append(np.full(int(escapes.sum()), sink, dtype=np.int64))
    # sink self-loop
    srcs.append(np.array([sink], dtype=np.int64))
    tgts.append(np.array([sink], dtype=np.int64))

    src = np.concatenate(srcs)
    tgt = np.concatenate(tgts)
    key = src * np.int64(sink + 1) + tgt
    key = np.unique(key)
    src = key // np.int64(sink + 1)
    tgt = key % np.int64(sink + 1)
    off = np.zeros(sink + 2, dtype=np.int64)
    np.add.at(off, src + 1, 1)
    off = np.cumsum(off)
    return off, tgt


def build_graph(grid: Grid, map_spec: MapSpec, eps: float,
                eps_fn=None) -> TransitionGraph:
    """Outer approximation of the eps-fattened map on the grid's boxes.

    With `eps_fn` set, the per-box fattening uses the minimum of the
    threshold function over the (Lipschitz-fattened) image rectangle
    instead of the constant eps, a sound under-approximation of Hurley
    eps(x)-jumps.
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if map_spec.dim != grid.dim:
        raise ValueError("map dimension does not match the grid")
    if grid.nboxes > 1 << 26:
        # edge keys are packed as src*(n+1)+tgt in int64
        raise ValueError("grid too fine for the dense graph representation")
    centers = grid.centers()
    images = evaluate(map_spec, centers)
    if map_spec.periods is not None:
        # keep images in the grid window's coordinates
        images = grid.domain.wrap(images)
    spread, lip_used = _box_spreads(grid, map_spec)
    if eps_fn is not None:
        eps_local = np.asarray(eps_fn.min_over_rects(images - spread,
                                                     images + spread))
        w = spread + eps_local[:, None]
    else:
        w = spread + eps
    lo_f = images - w
    hi_f = images + w
    ilo, ihi, escapes, empty = _cover_ranges(grid, lo_f, hi_f)
    offsets, targets = _materialize_edges(grid, ilo, ihi, escapes, empty,
                                          sink=grid.nboxes)
    return TransitionGraph(grid, map_spec, float(eps), offsets, targets, lip_used)


# ---------------------------------------------------------------------------
# strongly connected components (iterative Tarjan)
# ---------------------------------------------------------------------------

def strongly_connected_components(offsets: np.ndarray, targets: np.ndarray,
                                  n: int, mask: np.ndarray | None = None):
    """Iterative Tarjan over a CSR digraph.

    Returns (n_components, labels); labels follow reverse topological
    order of the condensation (sources get the largest labels).  Nodes
    excluded by `mask` keep label -1.
    """
    UNSEEN = -1
    index = np.full(n, UNSEEN, dtype=np.int64)
    lowlink = np.zeros(n, dtype=np.int64)
    on_stack = np.zeros(n, dtype=bool)
    labels = np.full(n, -1, dtype=np.int64)
    stack: list[int] = []
    counter = 0
    n_comp = 0

    allowed = mask if mask is not None else np.ones(n, dtype=bool)

    for root in range(n):
        if not allowed[root] or index[root] != UNSEEN:
            continue
        # work stack entries: (node, next edge position)
        work = [(root, offsets[root])]
        index[root] = lowlink[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, ptr = work[-1]
            if ptr < offsets[v + 1]:
                work[-1] = (v, ptr + 1)
                w = int(targets[ptr])
                if not allowed[w]:
                    continue
                if index[w] == UNSEEN:
                    index[w] = lowlink[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, offsets[w]))
                elif on_stack[w]:
                    if index[w] < lowlink[v]:
                        lowlink[v] = index[w]
            else:
                work.pop()
                if work:
                    u = work[-1][0]
                    if lowlink[v] < lowlink[u]:
                        lowlink[u] = lowlink[v]
                if lowlink[v] == index[v]:
                    while True:
                        w = stack.pop()
                        on_stack[w] = False
                        labels[w] = n_comp
                        if w == v:
                            break
                    n_comp += 1
    return n_comp, labels


def _scc_of_graph(g: TransitionGraph, include_sink: bool = True):
    mask = None
    if not include_sink:
        mask = np.ones(g.n_nodes, dtype=bool)
        mask[g.sink] = False
    return strongly_connected_components(g.offsets, g.targets, g.n_nodes, mask)


def nontrivial_scc_sets(g: TransitionGraph) -> list[BoxSet]:
    """Box sets of the nontrivial SCCs (size > 1, or a self-looped box),
    ordered by smallest member BoxId.  The sink never appears."""
    n_comp, labels = _scc_of_graph(g)
    box_labels = labels[:g.nboxes]
    sizes = np.bincount(labels[labels >= 0], minlength=n_comp)
    # sink contributes to its own component; sizes of box components only
    sink_label = labels[g.sink]
    selfloop = g.self_loop_mask()
    keep = []
    for comp in range(n_comp):
        if comp == sink_label and sizes[comp] == 1:
            continue
        members = np.nonzero(box_labels == comp)[0]
        if members.size == 0:
            continue
        if members.size > 1 or selfloop[members[0]]:
            keep.append(members)
    keep.sort(key=lambda m: int(m[0]))
    return [BoxSet.from_indices(g.grid, m) for m in keep]


def chain_recurrent_boxes(g: TransitionGraph) -> BoxSet:
    """Boxes on a directed cycle at this resolution (sink excluded)."""
    out = BoxSet.empty(g.grid)
    for comp in nontrivial_scc_sets(g):
        out = out | comp
    return out


def chain_components(g: TransitionGraph) -> list[ChainComponent]:
    """SCC partition of the chain recurrent boxes, ordered by smallest member."""
    comps = []
    for i, boxes in enumerate(nontrivial_scc_sets(g)):
        comps.append(ChainComponent(i, boxes, is_trivial=False))
    return comps


def is_chain_transitive(g: TransitionGraph) -> bool:
    """True iff the graph restricted to the boxes is strongly connected."""
    n_comp, labels = _scc_of_graph(g, include_sink=False)
    return n_comp == 1 and bool(np.all(labels[:g.nboxes] == labels[0]))


# ---------------------------------------------------------------------------
# chains between points
# ---------------------------------------------------------------------------

def _bfs_path(g: TransitionGraph, sources, target: int,
              max_len: int | None = None):
    """Deterministic BFS (BoxId order); returns node path source..target."""
    prev = np.full(g.n_nodes, -2, dtype=np.int64)
    queue = sorted(int(s) for s in sources)
    for s in queue:
        prev[s] = -1
    depth = {s: 1 for s in queue}
    qi = 0
    while qi < len(queue):
        v = queue[qi]
        qi += 1
        if v == target:
            path = [v]
            while prev[v] != -1:
                v = int(prev[v])
                path.append(v)
            return path[::-1]
        if max_len is not None and depth[v] >= max_len:
            continue
        for w in g.out(v):
            w = int(w)
            if w == g.sink or prev[w] != -2:
                continue
            prev[w] = v
            depth[w] = depth[v] + 1
            queue.append(w)
    return None


def chain_slack(g: TransitionGraph) -> float:
    """Sound per-step slack for chains realized through box centers.

    Bounds d(f(x_i), x_{i+1}) when consecutive points sit anywhere in
    adjacent graph boxes: Lipschitz spread around the center image plus
    the rectangle-cover geometry.
    """
    r = g.grid.box_norm_radius
    L = g.lipschitz_used
    d = np.sqrt(g.grid.dim)
    return L * r + d * (L * r + g.eps) + 2.0 * r


def _realize_chain(g: TransitionGraph, path, p, q, thresholds) -> EpsChain | None:
    pts = [np.asarray(p, dtype=float)]
    for b in path[1:-1]:
        pts.append(g.grid.box_geometry(int(b))[0])
    pts.append(np.asarray(q, dtype=float))
    pts = np.asarray(pts)
    imgs = np.asarray([evaluate(g.map_spec, x) for x in pts[:-1]])
    defects = np.asarray([g.map_spec.distance(img, nxt)
                          for img, nxt in zip(imgs, pts[1:])])
    if np.any(defects >= thresholds):
        return None
    return EpsChain(pts, float(np.max(thresholds)), np.asarray(thresholds), defects)


def find_eps_chain(g: TransitionGraph, p, q) -> EpsChain | None:
    """Chain from p to q realized through box centers, or None.

    The revalidation threshold is eps plus the resolution slack of
    chain_slack(); every returned chain satisfies its inequality by direct
    evaluation of the map.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    bp = g.grid.box_of_point(p)
    bq = g.grid.box_of_point(q)
    if bp is None or bq is None:
        return None
    tau = g.eps + chain_slack(g)
    # direct step first
    direct = _realize_chain(g, [bp, bq], p, q, np.array([tau]))
    if direct is not None:
        return direct
    starts = [int(w) for w in g.out(bp) if w != g.sink]
    path = _bfs_path(g, starts, bq)
    if path is None:
        return None
    full = [bp] + path
    return _realize_chain(g, full, p, q, np.full(len(full) - 1, tau))


@dataclass
class NonwanderingResult:
    returned: bool
    steps: Optional[int]


def nonwandering_probe(map_spec: MapSpec, grid: Grid, b: int, n_max: int,
                       graph: TransitionGraph | None = None) -> NonwanderingResult:
    """Iterate the box's outer image; report the first N <= n_max with
    image^N({b}) meeting {b} again.

    A prebuilt eps=0 graph may be passed to amortize across many probes.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    g = graph if graph is not None else build_graph(grid, map_spec, 0.0)
    frontier = BoxSet.from_indices(grid, [int(b)])
    for n in range(1, n_max + 1):
        frontier = g.image_boxes(frontier)
        if int(b) in frontier:
            return NonwanderingResult(True, n)
        if not frontier:
            break
    return NonwanderingResult(False, None)


def strong_chain_search(map_spec: MapSpec, p, eps_fn, grid: Grid,
                        max_len: int | None = None) -> EpsChain | None:
    """Search for an eps(x)-chain of length >= 1 from p back to p.

    Builds a variable-threshold graph whose per-box jump budget is the
    minimum of eps_fn over the fattened image rectangle, then looks for a
    cycle through box(p).  Returned chains satisfy the Hurley jump rule
    with the grid's resolution slack added; None is a resolution-stamped
    no-cycle certificate, not a proof.
    """
    p = np.asarray(p, dtype=float)
    fp = evaluate(map_spec, p)
    # a fixed point within its own threshold is a length-1 chain
    if float(map_spec.distance(fp, p)) < float(eps_fn(fp)):
        return EpsChain(np.asarray([p, p]), float(eps_fn(fp)),
                        np.asarray([float(eps_fn(fp))]),
                        np.asarray([float(map_spec.distance(fp, p))]))
    g = build_graph(grid, map_spec, 0.0, eps_fn=eps_fn)
    bp = g.grid.box_of_point(p)
    if bp is None:
        return None
    starts = [int(w) for w in g.out(bp) if w != g.sink]
    if not starts:
        return None
    path = _bfs_path(g, starts, bp, max_len=max_len)
    if path is None:
        return None
    full = [bp] + path
    pts = [p] + [g.grid.box_geometry(int(b))[0] for b in full[1:-1]] + [p]
    pts = np.asarray(pts)
    slack = chain_slack(g)
    imgs = np.asarray([evaluate(map_spec, x) for x in pts[:-1]])
    thresholds = np.asarray([float(eps_fn(img)) + slack for img in imgs])
    defects = np.asarray([map_spec.distance(img, nxt)
                          for img, nxt in zip(imgs, pts[1:])])
    if np.any(defects >= thresholds):
        return None
    return EpsChain(pts, float(np.max(thresholds)), thresholds, defects)
