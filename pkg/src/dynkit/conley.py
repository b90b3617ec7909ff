"""Attractor blocks, weak attractors, basins, decomposition checks and
the measure-escape experiment near attractors.

A block at box resolution is a forward-closed box set, disjoint from the
sink, whose one-step image avoids its own inner boundary layer (the
discrete stand-in for mapping uniformly into the interior).  Attractors
are image-iteration fixpoints of blocks; basins are backward reachable
sets.  The decomposition identity is checked against absorbed basins
(boxes all of whose forward paths are eventually trapped), the graph
analogue of omega-limit containment for the multivalued box map.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .phase_space import BoxSet
from .system import MapSpec, evaluate
from .chain_graph import TransitionGraph, chain_recurrent_boxes, nontrivial_scc_sets

__all__ = [
    "NotABlockError", "AttractorFlags", "AttractorRecord", "ConleyReport",
    "find_attractor_blocks", "attractor_from_block", "basin",
    "absorbed_basin", "verify_conley_decomposition",
    "attractor_invariance_check", "build_attractor_records",
    "escape_fraction",
]


class NotABlockError(ValueError):
    """The candidate set is not forward-closed in the graph."""


@dataclass
class AttractorFlags:
    invariant: bool
    orbit_disjoint: bool
    boundary_forward_invariant: bool
    orbit_violations: int = 0
    boundary_violations: int = 0


@dataclass
class AttractorRecord:
    block: BoxSet
    attractor: BoxSet
    basin: BoxSet
    iterations_to_fixpoint: int
    flags: Optional[AttractorFlags] = None


@dataclass
class ConleyReport:
    n_blocks: int
    lhs_count: int
    rhs_count: int
    symmetric_difference: int
    lhs_only: BoxSet
    rhs_only: BoxSet

    @property
    def identity_holds(self) -> bool:
        return self.symmetric_difference == 0


# ---------------------------------------------------------------------------
# reachability helpers
# ---------------------------------------------------------------------------

def _forward_closure(g: TransitionGraph, seed: BoxSet):
    """(closure, hit_sink): all boxes reachable from seed, seed included."""
    bits = seed.bits.copy()
    frontier = seed.indices()
    hit_sink = False
    while frontier.size:
        chunks = [g.targets[g.offsets[b]:g.offsets[b + 1]] for b in frontier]
        tgt = np.concatenate(chunks)
        if np.any(tgt == g.sink):
            hit_sink = True
            tgt = tgt[tgt != g.sink]
        new = np.unique(tgt[~bits[tgt]])
        bits[new] = True
        frontier = new
    return BoxSet(g.grid, bits), hit_sink


def _backward_closure(g: TransitionGraph, seed_nodes: np.ndarray) -> np.ndarray:
    """Nodes (boxes and sink) with a directed path into seed_nodes."""
    roff, rtarg = g.reverse()
    bits = np.zeros(g.n_nodes, dtype=bool)
    bits[seed_nodes] = True
    frontier = np.asarray(seed_nodes, dtype=np.int64)
    while frontier.size:
        chunks = [rtarg[roff[b]:roff[b + 1]] for b in frontier]
        if not chunks:
            break
        tgt = np.concatenate(chunks) if chunks else np.empty(0, dtype=np.int64)
        new = np.unique(tgt[~bits[tgt]])
        bits[new] = True
        frontier = new
    return bits


def _is_block(g: TransitionGraph, U: BoxSet) -> bool:
    """Forward-closed, proper, sink-free, image clear of the boundary layer."""
    count = len(U)
    if count == 0 or count == g.nboxes:
        return False
    if g.set_escapes(U):
        return False
    image = g.image_boxes(U)
    if image - U:
        return False
    margin = U - U.erode(1)
    return not (image & margin)


# ---------------------------------------------------------------------------
# block enumeration
# ---------------------------------------------------------------------------

def find_attractor_blocks(g: TransitionGraph, candidates=None,
                          extra_dilations: int = 2, max_dilation: int = 16,
                          max_downset_comps: int = 12) -> list[BoxSet]:
    """Enumerate attractor blocks at box resolution.

    Candidate cores are down-closed unions of nontrivial SCCs (in the
    reachability order of the condensation); each core is dilated layer by
    layer and forward-closed until the block test passes, which yields the
    familiar nested families of blocks around each attracting region.
    User-supplied candidate box sets are tested as-is.

    Requires a graph built with eps > 0 so the fattening provides the
    uniform margin.
    """
    if g.eps <= 0:
        raise ValueError("attractor blocks need a graph built with eps > 0")
    sccs = nontrivial_scc_sets(g)
    m = len(sccs)
    blocks: list[BoxSet] = []
    seen: set[bytes] = set()

    def consider(U: BoxSet):
        key = np.packbits(U.bits).tobytes()
        if key not in seen and _is_block(g, U):
            seen.add(key)
            blocks.append(U)

    # reachability order between SCCs
    closures = []
    for s in sccs:
        clo, _ = _forward_closure(g, s)
        closures.append(clo)
    reach = np.zeros((m, m), dtype=bool)
    for i in range(m):
        for j in range(m):
            if i != j and (closures[i] & sccs[j]):
                reach[i, j] = True

    if m <= max_downset_comps:
        families = []
        for mask in range(1, 1 << m):
            members = [i for i in range(m) if mask >> i & 1]
            closed = all(not reach[i, j] or (mask >> j & 1)
                         for i in members for j in range(m))
            if closed:
                families.append(members)
    else:
        # fall back to principal down-sets plus the full union
        families = []
        for i in range(m):
            fam = {i} | {j for j in range(m) if reach[i, j]}
            families.append(sorted(fam))
        families.append(list(range(m)))

    for members in families:
        base = BoxSet.empty(g.grid)
        for i in members:
            base = base | sccs[i]
        passes = 0
        for k in range(1, max_dilation + 1):
            cand, hit_sink = _forward_closure(g, base.dilate(k))
            if hit_sink or len(cand) == g.nboxes:
                break
            if _is_block(g, cand):
                consider(cand)
                passes += 1
                if passes > extra_dilations:
                    break

    if candidates is not None:
        for U in candidates:
            consider(U)

    blocks.sort(key=lambda b: (len(b), int(b.indices()[0]) if len(b) else -1))
    return blocks


def attractor_from_block(g: TransitionGraph, U: BoxSet,
                         include_sink: bool = False):
    """Fixpoint of the box-image operator on U and its iteration count.

    `include_sink` treats the sink as part of U (window truncations of
    unbounded blocks route their tail there); otherwise an escaping U is
    rejected.
    """
    if not include_sink and g.set_escapes(U):
        raise NotABlockError("image not contained in U (escapes the window)")
    image = g.image_boxes(U)
    if image - U:
        raise NotABlockError("image not contained in U")
    current = U.copy()
    iterations = 0
    while True:
        nxt = g.image_boxes(current)
        iterations += 1
        if nxt == current:
            return current, iterations
        current = nxt
        if iterations > g.nboxes + 1:
            raise RuntimeError("image iteration failed to reach a fixpoint")


def basin(g: TransitionGraph, U: BoxSet) -> BoxSet:
    """Boxes with a directed path into U (U included)."""
    bits = _backward_closure(g, U.indices())
    return BoxSet(g.grid, bits[:g.nboxes])


def absorbed_basin(g: TransitionGraph, A: BoxSet) -> BoxSet:
    """Boxes every forward path from which is eventually trapped in A.

    Complement of the backward closure of the bad nodes: cycle boxes
    outside A, plus the sink.
    """
    bad = chain_recurrent_boxes(g) - A
    seed = list(bad.indices()) + [g.sink]
    reached = _backward_closure(g, np.asarray(seed, dtype=np.int64))
    return BoxSet(g.grid, ~reached[:g.nboxes])


def verify_conley_decomposition(g: TransitionGraph, blocks=None) -> ConleyReport:
    """Compare complement-of-recurrence with the union of basin minus
    attractor over the enumerated blocks.

    Basins enter as absorbed basins; backward-reachability basins count
    boxes that merely straddle basin boundaries and would break the exact
    identity at any finite resolution.
    """
    if blocks is None:
        blocks = find_attractor_blocks(g)
    lhs = chain_recurrent_boxes(g).complement()
    rhs = BoxSet.empty(g.grid)
    for U in blocks:
        A, _ = attractor_from_block(g, U)
        rhs = rhs | (absorbed_basin(g, A) - A)
    lhs_only = lhs - rhs
    rhs_only = rhs - lhs
    return ConleyReport(len(blocks), len(lhs), len(rhs),
                        len(lhs_only) + len(rhs_only), lhs_only, rhs_only)


# ---------------------------------------------------------------------------
# invariance and escape diagnostics
# ---------------------------------------------------------------------------

def _iterate_points(map_spec: MapSpec, pts: np.ndarray, n: int):
    """Yield f(pts), f^2(pts), ... up to n applications."""
    x = pts
    for _ in range(n):
        x = evaluate(map_spec, x)
        yield x


def attractor_invariance_check(g: TransitionGraph, map_spec: MapSpec,
                               block: BoxSet, attractor: BoxSet,
                               n_samples: int = 1000, n_iter: int = 50,
                               rng_seed: int = 0) -> AttractorFlags:
    """Sampled invariance flags for an attractor record.

    (i) the box image of A equals A; (ii) true orbits started in U - A
    never land in the strict interior of A (interior minus a one-box
    collar); (iii) points started in boundary boxes of A stay out of that
    strict interior after one step.
    """
    rng = np.random.default_rng(rng_seed)
    invariant = g.image_boxes(attractor) == attractor

    forbidden = attractor.erode(2)
    forbidden_bits = forbidden.bits

    def count_violations(region: BoxSet, steps: int) -> int:
        if not region or not forbidden:
            return 0
        pts = region.sample_points(n_samples, rng)
        bad = 0
        for img in _iterate_points(map_spec, pts, steps):
            boxes = g.grid.boxes_of_points(img)
            inside = boxes >= 0
            bad += int(np.count_nonzero(forbidden_bits[boxes[inside]]))
        return bad

    shell = block - attractor
    orbit_bad = count_violations(shell, n_iter)
    boundary_bad = count_violations(attractor.boundary(), 1)
    return AttractorFlags(
        invariant=bool(invariant),
        orbit_disjoint=orbit_bad == 0,
        boundary_forward_invariant=boundary_bad == 0,
        orbit_violations=orbit_bad,
        boundary_violations=boundary_bad,
    )


def build_attractor_records(g: TransitionGraph, map_spec: MapSpec,
                            blocks=None, n_samples: int = 1000,
                            n_iter: int = 50, rng_seed: int = 0,
                            include_sink: bool = False) -> list[AttractorRecord]:
    if blocks is None:
        blocks = find_attractor_blocks(g)
    records = []
    for U in blocks:
        A, iters = attractor_from_block(g, U, include_sink=include_sink)
        B = basin(g, U)
        flags = attractor_invariance_check(g, map_spec, U, A,
                                           n_samples=n_samples, n_iter=n_iter,
                                           rng_seed=rng_seed)
        records.append(AttractorRecord(U, A, B, iters, flags))
    return records


def escape_fraction(map_spec: MapSpec, K: BoxSet, radius: float, n_max: int,
                    samples: int, rng_seed: int = 0) -> float:
    """Fraction of points of K whose orbit stays in the radius-ball of the
    origin for all n <= n_max (Monte Carlo rendering of m(K - K_R)/m(K))."""
    if samples < 1:
        raise ValueError("need samples >= 1")
    rng = np.random.default_rng(rng_seed)
    pts = K.sample_points(samples, rng)
    bounded = np.ones(samples, dtype=bool)
    x = pts
    for _ in range(n_max):
        x = evaluate(map_spec, x)
        bounded &= np.linalg.norm(x, axis=-1) <= radius
        if not bounded.any():
            break
    return float(np.count_nonzero(bounded) / samples)
