"""Hyperbolic periodic points, stable/unstable manifold polylines,
homoclinic intersections, omega-limit clouds and the homoclinic
accumulation experiment.

Manifolds grow by iterating a fundamental segment of the local
eigendirection, inserting midpoints wherever images stretch past the
segment cap or turn too sharply.  Polylines store wrapped vertices plus a
continuous lift (universal-cover coordinates reconstructed by min-image
continuation), which is what arclengths and straight-line oracles use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .phase_space import Grid
from .system import MapSpec, evaluate, jacobian

__all__ = [
    "HyperbolicPoint", "ManifoldPolyline", "HomoclinicHit",
    "RecurrenceResult", "AccumulationRow", "NoRealEigendirectionError",
    "find_periodic_points", "grow_manifold", "homoclinic_points",
    "omega_limit_cloud", "is_recurrent", "accumulation_check",
    "point_to_polyline_distance",
]


class NoRealEigendirectionError(RuntimeError):
    """No real eigendirection on the requested side."""


@dataclass
class HyperbolicPoint:
    point: np.ndarray
    period: int
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    is_hyperbolic: bool
    residual: float


@dataclass
class ManifoldPolyline:
    side: str
    anchor: HyperbolicPoint
    vertices: np.ndarray
    lift: np.ndarray
    arclength: np.ndarray
    eigenvalue: float
    branch: int

    @property
    def total_arclength(self) -> float:
        return float(self.arclength[-1])

    def truncated(self, arclength: float) -> "ManifoldPolyline":
        n = int(np.searchsorted(self.arclength, arclength, side="right"))
        n = max(2, n)
        return ManifoldPolyline(self.side, self.anchor, self.vertices[:n],
                                self.lift[:n], self.arclength[:n],
                                self.eigenvalue, self.branch)


@dataclass
class HomoclinicHit:
    point: np.ndarray
    param_unstable: float
    param_stable: float
    angle: float
    transverse: bool
    distance_from_anchor: float


@dataclass
class RecurrenceResult:
    recurrent: bool
    first_return: Optional[int]
    min_distance: float


@dataclass
class AccumulationRow:
    radius: float
    found: bool
    arclength_used: Optional[float]
    hit: Optional[HomoclinicHit]


# ---------------------------------------------------------------------------
# periodic points
# ---------------------------------------------------------------------------

def _orbit_jacobian(map_spec: MapSpec, pts: np.ndarray, period: int):
    """f^period(pts) and the chain-rule Jacobian D(f^period), batched."""
    x = np.atleast_2d(pts).astype(float)
    J = np.broadcast_to(np.eye(map_spec.dim), (x.shape[0],) + (map_spec.dim,) * 2).copy()
    for _ in range(period):
        Jx = map_spec.jac(x) if map_spec.jac is not None else \
            np.stack([jacobian(map_spec, p) for p in x])
        J = Jx @ J
        x = evaluate(map_spec, x)
    return x, J


def find_periodic_points(map_spec: MapSpec, period: int, grid: Grid,
                         tol_fix: float = 1e-10, tol_hyp: float = 1e-6,
                         max_iter: int = 40) -> list[HyperbolicPoint]:
    """Newton on f^period(x) - x seeded from every box center.

    Converged roots are merged within 10*tol_fix and classified by the
    eigen-decomposition of D(f^period).  Degenerate Jacobians fall back to
    pseudo-inverse steps, so curves of neutral fixed points are picked up
    point by point.
    """
    if period < 1:
        raise ValueError("period must be >= 1")
    x = grid.centers()
    alive = np.ones(x.shape[0], dtype=bool)
    for _ in range(max_iter):
        fp, J = _orbit_jacobian(map_spec, x, period)
        g = map_spec.delta(x, fp)
        J = J - np.eye(map_spec.dim)
        res = np.linalg.norm(g, axis=1)
        move = alive & (res > 1e-14)
        if not move.any():
            break
        step = np.linalg.pinv(J[move], rcond=1e-12) @ g[move][..., None]
        xn = x[move] - step[..., 0]
        xn = map_spec.wrap(xn)
        bad = ~np.all(np.isfinite(xn), axis=1) | (np.linalg.norm(xn, axis=1) > 1e12)
        xn[bad] = x[move][bad]
        alive_idx = np.nonzero(move)[0]
        alive[alive_idx[bad]] = False
        x[move] = xn

    fp, J = _orbit_jacobian(map_spec, x, period)
    res = np.linalg.norm(map_spec.delta(x, fp), axis=1)
    ok = alive & (res <= tol_fix)
    roots = x[ok]
    residuals = res[ok]
    # keep only roots inside the window
    inside = grid.domain.contains(grid.domain.wrap(roots)) if roots.size else \
        np.zeros(0, dtype=bool)
    roots = roots[inside]
    residuals = residuals[inside]

    # deterministic greedy dedupe
    order = np.lexsort(tuple(roots[:, a] for a in range(roots.shape[1] - 1, -1, -1))) \
        if roots.size else np.empty(0, dtype=int)
    merged = []
    merged_res = []
    for i in order:
        r = roots[i]
        if any(float(map_spec.distance(r, m)) <= 10 * tol_fix for m in merged):
            continue
        merged.append(r)
        merged_res.append(residuals[i])

    points = []
    for r, rr in zip(merged, merged_res):
        _, Jp = _orbit_jacobian(map_spec, r[None, :], period)
        vals, vecs = np.linalg.eig(Jp[0])
        order2 = np.argsort(-np.abs(vals))
        vals = vals[order2]
        vecs = vecs[:, order2]
        hyper = bool(np.all(np.abs(np.abs(vals) - 1.0) > tol_hyp))
        points.append(HyperbolicPoint(np.asarray(r), period, vals, vecs,
                                      hyper, float(rr)))
    return points


# ---------------------------------------------------------------------------
# manifold growth
# ---------------------------------------------------------------------------

def _inverse_newton(map_spec: MapSpec, z: np.ndarray, tol: float = 1e-10,
                    max_iter: int = 60) -> np.ndarray:
    """Solve f(w) = z per row by Newton, seeded at z itself."""
    w = np.atleast_2d(z).astype(float).copy()
    for _ in range(max_iter):
        r = map_spec.delta(z, evaluate(map_spec, w))  # f(w) - z
        if np.max(np.linalg.norm(r, axis=1)) < tol:
            break
        J = map_spec.jac(w)
        w = map_spec.wrap(w - np.linalg.solve(J, r[..., None])[..., 0])
    return w


def _apply_steps(map_spec: MapSpec, pts: np.ndarray, steps: int,
                 inverse: bool) -> np.ndarray:
    x = np.atleast_2d(pts).astype(float)
    for _ in range(steps):
        if not inverse:
            x = evaluate(map_spec, x)
        elif map_spec.has_inverse:
            x = evaluate(map_spec, x, "inverse")
        else:
            x = _inverse_newton(map_spec, x)
    return x


def _real_eigenpair(hp: HyperbolicPoint, side: str):
    vals = hp.eigenvalues
    vecs = hp.eigenvectors
    want_unstable = side == "unstable"
    for i in range(vals.shape[0]):
        lam = vals[i]
        if abs(lam.imag) > 1e-12:
            continue
        lam = float(lam.real)
        if (want_unstable and abs(lam) > 1.0) or (not want_unstable and abs(lam) < 1.0):
            v = np.real(vecs[:, i])
            v = v / np.linalg.norm(v)
            # deterministic orientation
            lead = np.nonzero(np.abs(v) > 1e-12)[0][0]
            if v[lead] < 0:
                v = -v
            return lam, v
    raise NoRealEigendirectionError(f"no real {side} eigendirection")


def grow_manifold(map_spec: MapSpec, hp: HyperbolicPoint, side: str,
                  target_arclength: float, max_seg: float,
                  tol_ref: float = 1e-9, turn_max: float = 0.2,
                  r0_scale: float = 1e-6, branch: int = +1,
                  max_vertices: int = 200000) -> ManifoldPolyline:
    """Grow one branch of W^s or W^u of a hyperbolic periodic point.

    Iterates a fundamental segment seeded r0 along the eigendirection
    under f^period (unstable) or f^{-period} (stable), bisecting parameters
    until consecutive images are closer than max_seg and turn less than
    turn_max radians.  Growth stops at target_arclength.
    """
    if side not in ("stable", "unstable"):
        raise ValueError("side must be 'stable' or 'unstable'")
    if not hp.is_hyperbolic:
        raise NoRealEigendirectionError("anchor is not hyperbolic")
    lam, v = _real_eigenpair(hp, side)
    if lam <= 0:
        raise NoRealEigendirectionError(
            "orientation-reversing eigendirections are not supported")
    stretch = lam if side == "unstable" else 1.0 / lam
    inverse = side == "stable"
    scale = 1.0
    if map_spec.periods is not None:
        scale = float(np.max(np.asarray(map_spec.periods)))
    r0 = r0_scale * scale
    p = np.asarray(hp.point, dtype=float)
    direction = branch * v

    def seed_chord(ts: np.ndarray) -> np.ndarray:
        radii = r0 * (1.0 + ts * (stretch - 1.0))
        return map_spec.wrap(p[None, :] + radii[:, None] * direction[None, :])

    vertices = [map_spec.wrap(p.copy())]
    lift = [p.copy()]
    arc = [0.0]

    def append(pt: np.ndarray) -> bool:
        d = map_spec.delta(vertices[-1], pt)
        vertices.append(pt)
        lift.append(lift[-1] + d)
        arc.append(arc[-1] + float(np.linalg.norm(d)))
        return arc[-1] >= target_arclength

    gen = 0
    done = False
    while not done:
        ts = np.linspace(0.0, 1.0, 9)
        pts = _apply_steps(map_spec, seed_chord(ts), gen * hp.period, inverse)
        # refine parameters until the image chain is tame
        for _ in range(60):
            lead = np.asarray(vertices[-1])[None, :]
            chain = np.concatenate([lead, pts], axis=0)
            deltas = map_spec.delta(chain[:-1], chain[1:])
            lens = np.linalg.norm(deltas, axis=1)
            bad = set(np.nonzero(lens[1:] > max_seg)[0])  # interval index in ts
            # turning angle at interior points
            for j in range(1, deltas.shape[0]):
                a, b = deltas[j - 1], deltas[j]
                na, nb = np.linalg.norm(a), np.linalg.norm(b)
                if na < 1e-15 or nb < 1e-15:
                    continue
                cosang = float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))
                if math.acos(cosang) > turn_max:
                    if j - 1 >= 1:
                        bad.add(j - 2)
                    if j - 1 < len(ts) - 1:
                        bad.add(j - 1)
            bad = {i for i in bad if 0 <= i < len(ts) - 1
                   and ts[i + 1] - ts[i] > 1e-12}
            if not bad or len(ts) > 4096:
                break
            new_ts = []
            for i in sorted(bad):
                new_ts.append(0.5 * (ts[i] + ts[i + 1]))
            ts = np.sort(np.concatenate([ts, np.asarray(new_ts)]))
            pts = _apply_steps(map_spec, seed_chord(ts), gen * hp.period, inverse)
        start = 1 if gen > 0 else 0  # t=0 repeats the previous generation's end
        for pt in pts[start:]:
            if append(pt):
                done = True
                break
        if len(vertices) > max_vertices:
            break
        gen += 1
        if gen > 300:
            break
    return ManifoldPolyline(side, hp, np.asarray(vertices), np.asarray(lift),
                            np.asarray(arc), lam, branch)


# ---------------------------------------------------------------------------
# homoclinic intersections
# ---------------------------------------------------------------------------

def _segments(poly: ManifoldPolyline):
    starts = poly.vertices[:-1]
    deltas = np.diff(poly.lift, axis=0)
    arcs = poly.arclength[:-1]
    return starts, deltas, arcs


def _left_eigvecs(hp: HyperbolicPoint):
    """Rows dual to the eigenvector columns (left eigenvectors)."""
    V = np.real(hp.eigenvectors)
    W = np.linalg.inv(V)
    return W  # W[i] . V[:, j] = delta_ij


def _polish_hits(map_spec: MapSpec, hp: HyperbolicPoint, pts: np.ndarray,
                 max_move: float, tol: float = 1e-12) -> Optional[np.ndarray]:
    """Newton-polish approximate homoclinic points against the dynamics.

    Solves, per point, for the zero of (unstable coordinate of f^K(x) - p,
    stable coordinate of f^{-K}(x) - p); K is sized so the hyperbolic
    amplification stays within double range.  Returns the polished batch
    with unconverged or runaway rows left at their inputs.
    """
    if not map_spec.has_inverse or map_spec.dim != 2:
        return None
    lam_u = float(np.max(np.abs(hp.eigenvalues)))
    if lam_u <= 1.0:
        return None
    K = int(min(30, max(5, math.ceil(math.log(1e10) / math.log(lam_u)))))
    W = _left_eigvecs(hp)
    wu, ws = W[0], W[1]
    p = hp.point
    x0 = np.asarray(pts, dtype=float)
    x = x0.copy()
    h = 1e-8
    active = np.ones(x.shape[0], dtype=bool)

    def residual(z):
        fK = _apply_steps(map_spec, z, K * hp.period, False)
        bK = _apply_steps(map_spec, z, K * hp.period, True)
        return np.stack([map_spec.delta(p, fK) @ wu,
                         map_spec.delta(p, bK) @ ws], axis=-1)

    for _ in range(40):
        if not active.any():
            break
        G = residual(x)
        conv = np.max(np.abs(G), axis=1) < tol
        active &= ~conv
        if not active.any():
            break
        J = np.empty((x.shape[0], 2, 2))
        for a in range(2):
            dx = np.zeros(2)
            dx[a] = h
            J[:, :, a] = (residual(x + dx) - G) / h
        ok = np.abs(np.linalg.det(J)) > 1e-30
        step = np.zeros_like(x)
        step[ok] = np.linalg.solve(J[ok], G[ok][..., None])[..., 0]
        cand = map_spec.wrap(x - np.where(active[:, None], step, 0.0))
        runaway = (~np.all(np.isfinite(cand), axis=1)) | \
            (map_spec.distance(cand, x0) > max_move) | ~ok
        keep = active & ~runaway
        x[keep] = cand[keep]
        active &= ~runaway
        # hyperbolic amplification floors G at fp noise; stop on tiny steps
        active &= np.linalg.norm(step, axis=1) >= 1e-13
    return x


def homoclinic_points(Wu: ManifoldPolyline, Ws: ManifoldPolyline,
                      tol_int: float = 1e-9, transversality_min: float = 1e-3,
                      map_spec: Optional[MapSpec] = None, polish: bool = True,
                      return_tangencies: bool = False):
    """Transverse intersections of the two polylines, anchor excluded.

    On periodic maps segments are intersected against integer-shifted
    copies.  With `map_spec` given and invertible, each raw hit is
    Newton-polished against the dynamics so the definitional membership
    test (forward and backward convergence to the anchor orbit) holds to
    hyperbolic accuracy.  Near-tangential crossings (angle below the
    transversality threshold) are reported separately.
    """
    if Wu.side != "unstable" or Ws.side != "stable":
        raise ValueError("pass the unstable polyline first, the stable second")
    anchor_gap = float(np.linalg.norm(np.asarray(Wu.anchor.point) -
                                      np.asarray(Ws.anchor.point)))
    if anchor_gap > 1e-8:
        raise ValueError("polylines must share the same anchor")
    periods = map_spec.periods if map_spec is not None else None
    exclusion = 10.0 * max(tol_int, 1e-9)

    a_starts, a_deltas, a_arcs = _segments(Wu)
    b_starts, b_deltas, b_arcs = _segments(Ws)

    def metric_delta(u, v):
        d = v - u
        if periods is not None:
            per = np.asarray(periods)
            d = (d + 0.5 * per) % per - 0.5 * per
        return d

    # bucket Ws segments by wrapped midpoint cell for candidate pruning
    dim = a_starts.shape[1]
    max_len = max(float(np.max(np.linalg.norm(a_deltas, axis=1))),
                  float(np.max(np.linalg.norm(b_deltas, axis=1))))
    cell = max(1.5 * max_len, 1e-9)
    ncells = None
    if periods is not None:
        per = np.asarray(periods, dtype=float)
        if max_len >= float(np.min(per)) / 4.0:
            raise ValueError("segments too long relative to the period; "
                             "grow with a smaller max_seg")
        ncells = np.maximum(1, np.floor(per / cell).astype(np.int64))
        cellw = per / ncells
    else:
        cellw = np.full(dim, cell)

    def cell_key(pt: np.ndarray) -> tuple:
        return tuple(np.floor(pt / cellw).astype(np.int64))

    buckets: dict[tuple, list[int]] = {}
    b_mids = b_starts + 0.5 * b_deltas
    if periods is not None:
        b_mids = np.mod(b_mids, np.asarray(periods))
    for j in range(b_starts.shape[0]):
        buckets.setdefault(cell_key(b_mids[j]), []).append(j)

    anchor = np.asarray(Wu.anchor.point, dtype=float)
    hits: list[HomoclinicHit] = []
    tangencies: list[HomoclinicHit] = []
    seen: set[tuple] = set()
    a_mids = a_starts + 0.5 * a_deltas
    if periods is not None:
        a_mids = np.mod(a_mids, np.asarray(periods))
    for i in range(a_starts.shape[0]):
        base_key = np.asarray(cell_key(a_mids[i]))
        cand: set[int] = set()
        for off in np.ndindex(*(3,) * dim):
            k = base_key + np.asarray(off) - 1
            if ncells is not None:
                k = np.mod(k, ncells)
            cand.update(buckets.get(tuple(k), ()))
        da = a_deltas[i]
        for j in sorted(cand):
            db = b_deltas[j]
            denom = da[0] * db[1] - da[1] * db[0]
            if abs(denom) < 1e-15 * max(1.0, np.linalg.norm(da) * np.linalg.norm(db)):
                continue
            # nearest-image shift of the B segment toward the A segment
            r = metric_delta(a_mids[i], b_mids[j]) + (a_mids[i] - a_starts[i]) \
                - 0.5 * db
            # r is now (shifted b_start) - a_start
            s = (r[0] * db[1] - r[1] * db[0]) / denom
            t = (r[0] * da[1] - r[1] * da[0]) / denom
            if not (-1e-9 <= s <= 1 + 1e-9 and -1e-9 <= t <= 1 + 1e-9):
                continue
            pt = a_starts[i] + s * da
            if periods is not None:
                pt = np.mod(pt, np.asarray(periods))
            dist_anchor = float(np.linalg.norm(metric_delta(anchor, pt)))
            if dist_anchor <= exclusion:
                continue
            keyp = tuple(np.round(pt / max(tol_int, 1e-12)).astype(np.int64))
            if keyp in seen:
                continue
            seen.add(keyp)
            na, nb = np.linalg.norm(da), np.linalg.norm(db)
            angle = math.asin(min(1.0, abs(denom) / (na * nb)))
            hit = HomoclinicHit(pt, float(a_arcs[i] + s * na),
                                float(b_arcs[j] + t * nb), angle,
                                angle >= transversality_min, dist_anchor)
            (hits if hit.transverse else tangencies).append(hit)

    if polish and hits and map_spec is not None and map_spec.has_inverse:
        raw = np.asarray([h.point for h in hits])
        polished = _polish_hits(map_spec, Wu.anchor, raw, max_move=3.0 * cell)
        if polished is not None:
            for hit, pt in zip(hits, polished):
                hit.point = pt
                hit.distance_from_anchor = float(
                    np.linalg.norm(metric_delta(anchor, pt)))

    hits.sort(key=lambda h: (h.distance_from_anchor, h.param_unstable))
    tangencies.sort(key=lambda h: (h.distance_from_anchor, h.param_unstable))
    if return_tangencies:
        return hits, tangencies
    return hits


# ---------------------------------------------------------------------------
# recurrence
# ---------------------------------------------------------------------------

def omega_limit_cloud(map_spec: MapSpec, q, N: int, burn_in: int = 0) -> np.ndarray:
    """Forward orbit samples f^i(q) for burn_in < i <= N."""
    if not N > burn_in >= 0:
        raise ValueError("need N > burn_in >= 0")
    q = np.asarray(q, dtype=float)
    out = []
    x = q
    for i in range(1, N + 1):
        x = evaluate(map_spec, x)
        if i > burn_in:
            out.append(x.copy())
    return np.asarray(out)


def is_recurrent(map_spec: MapSpec, q, tol_rec: float, N: int) -> RecurrenceResult:
    """First-return probe: does the orbit re-enter the tol_rec ball of q?"""
    q = np.asarray(q, dtype=float)
    x = q
    best = math.inf
    first = None
    for i in range(1, N + 1):
        x = evaluate(map_spec, x)
        d = float(map_spec.distance(x, q))
        if d < best:
            best = d
        if first is None and d < tol_rec:
            first = i
            break
    return RecurrenceResult(first is not None, first, best)


def point_to_polyline_distance(map_spec: MapSpec, q, poly: ManifoldPolyline) -> float:
    q = np.asarray(q, dtype=float)
    starts = poly.vertices[:-1]
    deltas = np.diff(poly.lift, axis=0)
    rel = map_spec.delta(starts, np.broadcast_to(q, starts.shape))
    lens2 = np.sum(deltas * deltas, axis=1)
    lens2[lens2 == 0] = 1.0
    t = np.clip(np.sum(rel * deltas, axis=1) / lens2, 0.0, 1.0)
    nearest = starts + t[:, None] * deltas
    d = np.linalg.norm(map_spec.delta(nearest, np.broadcast_to(q, starts.shape)),
                       axis=1)
    return float(np.min(d))


def accumulation_check(map_spec: MapSpec, hp: HyperbolicPoint, q_on_Wu,
                       radii, arclength_schedule, max_seg: float = 0.01,
                       tol_on: float = 1e-5,
                       grow_kwargs: Optional[dict] = None) -> list[AccumulationRow]:
    """Search for homoclinic hits in shrinking balls around a point of W^u.

    For each radius, manifolds are grown through the arclength schedule
    until a transverse hit lands inside the ball; exhaustion of the
    schedule is reported as not found.
    """
    q = np.asarray(q_on_Wu, dtype=float)
    if float(map_spec.distance(q, hp.point)) < 1e-9:
        raise ValueError("q must differ from the anchor")
    kwargs = dict(grow_kwargs or {})
    schedule = sorted(float(L) for L in arclength_schedule)
    Lmax = schedule[-1]
    Wu_full = grow_manifold(map_spec, hp, "unstable", Lmax, max_seg, **kwargs)
    if point_to_polyline_distance(map_spec, q, Wu_full) > tol_on:
        raise ValueError("q does not lie on the unstable polyline")
    Ws_full = grow_manifold(map_spec, hp, "stable", Lmax, max_seg, **kwargs)

    hits_by_L = {}
    for L in schedule:
        hits_by_L[L] = homoclinic_points(Wu_full.truncated(L), Ws_full.truncated(L),
                                         map_spec=map_spec)
    rows = []
    for r in sorted((float(r) for r in radii), reverse=True):
        found = None
        used = None
        for L in schedule:
            close = [h for h in hits_by_L[L]
                     if float(map_spec.distance(h.point, q)) <= r]
            if close:
                found = close[0]
                used = L
                break
        rows.append(AccumulationRow(r, found is not None, used, found))
    return rows
