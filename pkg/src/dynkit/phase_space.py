"""Discretized phase space: rectangular (optionally toroidal) windows,
uniform dyadic grids and dense box-set algebra.

Boxes are half-open, [lo, hi) along every axis, so box membership is a
partition of the window.  On a periodic axis the upper face wraps onto
the lower one.  Dimension is capped at 3.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["Domain", "Grid", "BoxSet", "GridMismatchError"]

MAX_DIM = 3
MAX_DEPTH = 12


class GridMismatchError(ValueError):
    """Raised when combining box sets that live on different grids."""


@dataclass(frozen=True)
class Domain:
    """Rectangular window in R^n with per-axis periodicity flags."""

    lower: tuple
    upper: tuple
    periodic: tuple

    def __post_init__(self):
        lo = tuple(float(x) for x in self.lower)
        hi = tuple(float(x) for x in self.upper)
        per = tuple(bool(x) for x in self.periodic)
        if not (len(lo) == len(hi) == len(per)):
            raise ValueError("lower, upper, periodic must have equal length")
        if not 1 <= len(lo) <= MAX_DIM:
            raise ValueError(f"dimension must be in [1, {MAX_DIM}]")
        if any(a >= b for a, b in zip(lo, hi)):
            raise ValueError("need lower[i] < upper[i] on every axis")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "periodic", per)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def widths(self) -> np.ndarray:
        return np.asarray(self.upper) - np.asarray(self.lower)

    def wrap(self, points):
        """Wrap points into the window along periodic axes."""
        p = np.atleast_2d(np.asarray(points, dtype=float)).copy()
        lo = np.asarray(self.lower)
        w = self.widths
        for i in range(self.dim):
            if self.periodic[i]:
                p[..., i] = lo[i] + np.mod(p[..., i] - lo[i], w[i])
        return p if np.asarray(points).ndim > 1 else p[0]

    def delta(self, a, b):
        """Shortest displacement b - a, min-image on periodic axes."""
        d = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
        w = self.widths
        for i in range(self.dim):
            if self.periodic[i]:
                d[..., i] = (d[..., i] + 0.5 * w[i]) % w[i] - 0.5 * w[i]
        return d

    def distance(self, a, b):
        return np.linalg.norm(self.delta(a, b), axis=-1)

    def contains(self, points):
        p = np.atleast_2d(np.asarray(points, dtype=float))
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        ok = np.ones(p.shape[0], dtype=bool)
        for i in range(self.dim):
            if self.periodic[i]:
                continue
            ok &= (p[:, i] >= lo[i]) & (p[:, i] < hi[i])
        return ok if np.asarray(points).ndim > 1 else bool(ok[0])


@dataclass(frozen=True)
class Grid:
    """Uniform dyadic subdivision of a Domain: 2**depth[i] boxes per axis."""

    domain: Domain
    depth: tuple
    shape: tuple = field(init=False)
    h: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        depth = tuple(int(d) for d in self.depth)
        if len(depth) != self.domain.dim:
            raise ValueError("depth must have one entry per axis")
        if any(d < 0 or d > MAX_DEPTH for d in depth):
            raise ValueError(f"depth must be in [0, {MAX_DEPTH}]")
        object.__setattr__(self, "depth", depth)
        shape = tuple(1 << d for d in depth)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "h", self.domain.widths / np.asarray(shape))

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def nboxes(self) -> int:
        return int(np.prod(self.shape))

    @property
    def radius(self) -> np.ndarray:
        """Per-axis half-widths of a box."""
        return self.h / 2.0

    @property
    def box_norm_radius(self) -> float:
        """Euclidean radius of a box (half the diameter)."""
        return float(np.linalg.norm(self.radius))

    @property
    def box_diameter(self) -> float:
        return 2.0 * self.box_norm_radius

    # -- index arithmetic ------------------------------------------------

    def box_id(self, multi) -> int:
        return int(np.ravel_multi_index(tuple(int(m) for m in multi), self.shape))

    def multi_index(self, b) -> tuple:
        return tuple(int(i) for i in np.unravel_index(int(b), self.shape))

    def boxes_of_points(self, points) -> np.ndarray:
        """Vectorized point location; -1 marks points outside the window."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        lo = np.asarray(self.domain.lower)
        idx = np.empty((p.shape[0], self.dim), dtype=np.int64)
        outside = np.zeros(p.shape[0], dtype=bool)
        for i in range(self.dim):
            k = np.floor((p[:, i] - lo[i]) / self.h[i]).astype(np.int64)
            if self.domain.periodic[i]:
                k = np.mod(k, self.shape[i])
            else:
                outside |= (k < 0) | (k >= self.shape[i])
                k = np.clip(k, 0, self.shape[i] - 1)
            idx[:, i] = k
        out = np.ravel_multi_index(tuple(idx[:, i] for i in range(self.dim)), self.shape)
        out = out.astype(np.int64)
        out[outside] = -1
        return out

    def box_of_point(self, p):
        """BoxId containing p after periodic wrapping, or None if outside."""
        b = self.boxes_of_points(np.asarray(p, dtype=float)[None, :])[0]
        return None if b < 0 else int(b)

    def box_geometry(self, b):
        """(center, per-axis radius) of box b."""
        if not 0 <= int(b) < self.nboxes:
            raise IndexError(f"invalid box id {b}")
        m = np.asarray(self.multi_index(b), dtype=float)
        center = np.asarray(self.domain.lower) + (m + 0.5) * self.h
        return center, self.radius.copy()

    def centers(self) -> np.ndarray:
        """Centers of all boxes, shape (nboxes, dim), in BoxId order."""
        axes = [np.asarray(self.domain.lower[i]) + (np.arange(self.shape[i]) + 0.5) * self.h[i]
                for i in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def box_lower(self, b) -> np.ndarray:
        m = np.asarray(self.multi_index(b), dtype=float)
        return np.asarray(self.domain.lower) + m * self.h


class BoxSet:
    """Dense bit vector over the boxes of one grid.

    Mutating methods write in place (single-writer contract); the
    algebra operators return fresh sets.
    """

    __slots__ = ("grid", "bits")

    def __init__(self, grid: Grid, bits: np.ndarray | None = None):
        self.grid = grid
        if bits is None:
            bits = np.zeros(grid.nboxes, dtype=bool)
        else:
            bits = np.asarray(bits, dtype=bool)
            if bits.shape != (grid.nboxes,):
                raise ValueError("bit vector length must equal the box count")
        self.bits = bits

    # -- constructors ----------------------------------------------------

    @classmethod
    def empty(cls, grid: Grid) -> "BoxSet":
        return cls(grid)

    @classmethod
    def full(cls, grid: Grid) -> "BoxSet":
        return cls(grid, np.ones(grid.nboxes, dtype=bool))

    @classmethod
    def from_indices(cls, grid: Grid, indices) -> "BoxSet":
        bits = np.zeros(grid.nboxes, dtype=bool)
        idx = np.asarray(list(indices), dtype=np.int64)
        if idx.size:
            if idx.min() < 0 or idx.max() >= grid.nboxes:
                raise IndexError("box index out of range")
            bits[idx] = True
        return cls(grid, bits)

    @classmethod
    def from_rle(cls, grid: Grid, runs) -> "BoxSet":
        bits = np.zeros(grid.nboxes, dtype=bool)
        for start, length in runs:
            bits[start:start + length] = True
        return cls(grid, bits)

    # -- set algebra -----------------------------------------------------

    def _check(self, other: "BoxSet"):
        if other.grid is not self.grid and (
                other.grid.shape != self.grid.shape or other.grid.domain != self.grid.domain):
            raise GridMismatchError("box sets live on different grids")

    def __or__(self, other):
        self._check(other)
        return BoxSet(self.grid, self.bits | other.bits)

    def __and__(self, other):
        self._check(other)
        return BoxSet(self.grid, self.bits & other.bits)

    def __sub__(self, other):
        self._check(other)
        return BoxSet(self.grid, self.bits & ~other.bits)

    def __xor__(self, other):
        self._check(other)
        return BoxSet(self.grid, self.bits ^ other.bits)

    def complement(self):
        return BoxSet(self.grid, ~self.bits)

    def __eq__(self, other):
        if not isinstance(other, BoxSet):
            return NotImplemented
        self._check(other)
        return bool(np.array_equal(self.bits, other.bits))

    def __len__(self):
        return int(np.count_nonzero(self.bits))

    def __contains__(self, b):
        return bool(self.bits[int(b)])

    def __bool__(self):
        return bool(self.bits.any())

    def indices(self) -> np.ndarray:
        return np.nonzero(self.bits)[0]

    def copy(self) -> "BoxSet":
        return BoxSet(self.grid, self.bits.copy())

    def add(self, b):
        self.bits[int(b)] = True

    def __repr__(self):
        return f"BoxSet({len(self)}/{self.grid.nboxes} boxes)"

    # -- grid-topology morphology ----------------------------------------

    def _shifted(self, axis: int, step: int) -> np.ndarray:
        """Bits shifted one box along an axis; non-periodic edges fall off."""
        a = self.bits.reshape(self.grid.shape)
        if self.grid.domain.periodic[axis]:
            return np.roll(a, step, axis=axis).ravel()
        out = np.zeros_like(a)
        src = [slice(None)] * self.grid.dim
        dst = [slice(None)] * self.grid.dim
        if step > 0:
            dst[axis] = slice(step, None)
            src[axis] = slice(None, -step)
        else:
            dst[axis] = slice(None, step)
            src[axis] = slice(-step, None)
        out[tuple(dst)] = a[tuple(src)]
        return out.ravel()

    def dilate(self, layers: int = 1) -> "BoxSet":
        """Grow by face-adjacent boxes, `layers` times."""
        bits = self.bits.copy()
        for _ in range(layers):
            grown = bits.copy()
            cur = BoxSet(self.grid, bits)
            for ax in range(self.grid.dim):
                grown |= cur._shifted(ax, +1)
                grown |= cur._shifted(ax, -1)
            bits = grown
        return BoxSet(self.grid, bits)

    def erode(self, layers: int = 1) -> "BoxSet":
        """Drop members face-adjacent to the complement, `layers` times.

        On a non-periodic axis the window edge counts as complement.
        """
        bits = self.bits.copy()
        for _ in range(layers):
            kept = bits.copy()
            cur = BoxSet(self.grid, bits)
            for ax in range(self.grid.dim):
                kept &= cur._shifted(ax, +1)
                kept &= cur._shifted(ax, -1)
            bits = kept
        return BoxSet(self.grid, bits)

    def boundary(self) -> "BoxSet":
        """Member boxes adjacent to non-member boxes."""
        return self - self.erode(1)

    def coarsen(self, coarse: Grid) -> "BoxSet":
        """Project onto a coarser grid: a coarse box is set iff any of its
        fine children is set.  Depths must dominate axis-wise."""
        if any(cd > fd for cd, fd in zip(coarse.depth, self.grid.depth)):
            raise ValueError("target grid must be coarser on every axis")
        a = self.bits.reshape(self.grid.shape)
        for ax in range(self.grid.dim):
            factor = self.grid.shape[ax] // coarse.shape[ax]
            if factor > 1:
                newshape = a.shape[:ax] + (coarse.shape[ax], factor) + a.shape[ax + 1:]
                a = a.reshape(newshape).any(axis=ax + 1)
        return BoxSet(coarse, a.ravel())

    # -- sampling and serialization ---------------------------------------

    def sample_points(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """n points uniform over the region covered by the member boxes."""
        idx = self.indices()
        if idx.size == 0:
            raise ValueError("cannot sample from an empty box set")
        pick = idx[rng.integers(0, idx.size, size=n)]
        multi = np.stack(np.unravel_index(pick, self.grid.shape), axis=-1).astype(float)
        u = rng.random((n, self.grid.dim))
        return np.asarray(self.grid.domain.lower) + (multi + u) * self.grid.h

    def rle(self) -> list:
        """Run-length encoding [[start, length], ...] of the sorted indices."""
        idx = self.indices()
        if idx.size == 0:
            return []
        breaks = np.nonzero(np.diff(idx) > 1)[0]
        starts = np.concatenate([[0], breaks + 1])
        ends = np.concatenate([breaks, [idx.size - 1]])
        return [[int(idx[s]), int(idx[e] - idx[s] + 1)] for s, e in zip(starts, ends)]
