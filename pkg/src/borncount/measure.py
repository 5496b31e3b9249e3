"""Discretized measure spaces.

A configuration space is approximated by finitely many cells, each with a
center and a positive weight (its measure). Every integral becomes a finite
weighted sum, so additivity and monotonicity hold to rounding error.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import BornCountError, GridMismatchError, MonotonicityError

__all__ = [
    "SampleGrid",
    "DensityField",
    "MeasurableSubset",
    "MonotoneMap",
    "CumulativeTable",
    "uniform_grid",
    "integrate",
    "cumulative_order",
    "pushforward_density",
    "linear_map",
    "cubic_map",
    "check_same_grid",
]

DEFAULT_RESOLUTION = 2**16


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class SampleGrid:
    """Finite set of cells with centers of shape ``(N, dim)`` and weights."""

    centers: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        centers = np.array(self.centers, dtype=float)
        if centers.ndim == 1:
            centers = centers[:, None]
        weights = np.array(self.weights, dtype=float).reshape(-1)
        if centers.ndim != 2 or centers.shape[1] < 1:
            raise BornCountError("centers must have shape (cells, dim)")
        if len(weights) < 1:
            raise BornCountError("a grid needs at least one cell")
        if len(weights) != len(centers):
            raise BornCountError(
                f"{len(centers)} centers but {len(weights)} weights")
        if not np.all(np.isfinite(centers)):
            raise BornCountError("cell centers must be finite")
        if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
            raise BornCountError("cell weights must be finite and > 0")
        object.__setattr__(self, "centers", _frozen(centers))
        object.__setattr__(self, "weights", _frozen(weights))

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    @property
    def size(self) -> int:
        return len(self.weights)

    def __len__(self):
        return self.size

    @cached_property
    def total_measure(self) -> float:
        return float(np.sum(self.weights))

    @cached_property
    def grid_id(self) -> str:
        """Content hash; two grids with identical cells share an id."""
        h = hashlib.sha1()
        h.update(str(self.centers.shape).encode())
        h.update(np.ascontiguousarray(self.centers).tobytes())
        h.update(np.ascontiguousarray(self.weights).tobytes())
        return h.hexdigest()[:16]

    @property
    def coordinates(self) -> np.ndarray:
        """First coordinate of every cell center (the 1-D coordinate)."""
        return self.centers[:, 0]

    def cell_edges(self) -> np.ndarray:
        """Cell boundaries of a 1-D grid, assuming cells abut."""
        if self.dim != 1:
            raise BornCountError("cell edges are defined for 1-D grids only")
        x = self.coordinates
        half = self.weights / 2.0
        return np.concatenate([[x[0] - half[0]], x + half])

    def full(self) -> "MeasurableSubset":
        return MeasurableSubset(self, np.arange(self.size))

    def where(self, mask) -> "MeasurableSubset":
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (self.size,):
            raise BornCountError("mask length must equal the cell count")
        return MeasurableSubset(self, np.flatnonzero(mask))

    def __repr__(self):
        return (f"SampleGrid(dim={self.dim}, cells={self.size}, "
                f"total_measure={self.total_measure:.6g})")


def uniform_grid(lo: float, hi: float, n: int = DEFAULT_RESOLUTION) -> SampleGrid:
    """1-D grid of ``n`` equal cells covering ``[lo, hi]``."""
    if not hi > lo:
        raise BornCountError(f"empty interval [{lo}, {hi}]")
    if n < 1:
        raise BornCountError("need at least one cell")
    h = (hi - lo) / n
    centers = lo + (np.arange(n) + 0.5) * h
    return SampleGrid(centers, np.full(n, h))


def check_same_grid(a: SampleGrid, b: SampleGrid) -> None:
    if a is b:
        return
    if a.size != b.size or a.grid_id != b.grid_id:
        raise GridMismatchError(
            f"objects live on different grids ({a.grid_id} vs {b.grid_id})")


@dataclass(frozen=True, eq=False)
class DensityField:
    """Non-negative density with respect to the grid measure."""

    grid: SampleGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(-1)
        if len(values) != self.grid.size:
            raise BornCountError(
                f"density has {len(values)} values for {self.grid.size} cells")
        if np.any(np.isnan(values)):
            raise BornCountError("density contains NaN")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise BornCountError("density values must be finite and >= 0")
        object.__setattr__(self, "values", _frozen(values))

    @property
    def masses(self) -> np.ndarray:
        """Per-cell mass ``values * weights``."""
        return self.values * self.grid.weights


@dataclass(frozen=True, eq=False)
class MeasurableSubset:
    """A set of cell indices; stored sorted and without duplicates."""

    grid: SampleGrid
    members: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.intp))

    def __post_init__(self):
        members = np.unique(np.asarray(self.members, dtype=np.intp).reshape(-1))
        if len(members) and (members[0] < 0 or members[-1] >= self.grid.size):
            raise BornCountError("subset members must be valid cell indices")
        object.__setattr__(self, "members", _frozen(members))

    def __len__(self):
        return len(self.members)

    def __contains__(self, index):
        i = np.searchsorted(self.members, index)
        return i < len(self.members) and self.members[i] == index

    @property
    def mask(self) -> np.ndarray:
        m = np.zeros(self.grid.size, dtype=bool)
        m[self.members] = True
        return m

    def union(self, other: "MeasurableSubset") -> "MeasurableSubset":
        check_same_grid(self.grid, other.grid)
        return MeasurableSubset(self.grid, np.union1d(self.members, other.members))

    def intersection(self, other: "MeasurableSubset") -> "MeasurableSubset":
        check_same_grid(self.grid, other.grid)
        return MeasurableSubset(self.grid, np.intersect1d(self.members, other.members))

    def complement(self) -> "MeasurableSubset":
        return self.grid.where(~self.mask)


def integrate(density: DensityField, subset: MeasurableSubset) -> float:
    """Integral of ``density`` over ``subset`` with respect to the grid measure."""
    check_same_grid(density.grid, subset.grid)
    if len(subset) == 0:
        return 0.0
    idx = subset.members
    return float(np.sum(density.values[idx] * density.grid.weights[idx]))


@dataclass(frozen=True)
class CumulativeTable:
    """Positive-mass cells in a chosen order with normalized running mass.

    ``cumulative[i]`` is the fraction of total mass carried by cells
    ``order[:i + 1]``; the last entry is exactly 1.
    """

    order: np.ndarray
    masses: np.ndarray
    cumulative: np.ndarray
    total: float

    @property
    def midpoints(self) -> np.ndarray:
        """Normalized cumulative mass at the middle of each cell."""
        return self.cumulative - 0.5 * self.masses / self.total

    def crossing(self, u: float) -> int:
        """Cell index (into the grid) where the running mass first reaches ``u``."""
        i = int(np.searchsorted(self.cumulative, u, side="left"))
        return int(self.order[min(i, len(self.order) - 1)])


OrderingKey = Union[None, Sequence[int], np.ndarray, Callable[[SampleGrid], np.ndarray]]


def _resolve_order(grid: SampleGrid, ordering_key: OrderingKey) -> np.ndarray:
    if ordering_key is None:
        return np.arange(grid.size)
    if callable(ordering_key):
        ordering_key = ordering_key(grid)
    order = np.asarray(ordering_key, dtype=np.intp).reshape(-1)
    if len(order) != grid.size or not np.array_equal(np.sort(order), np.arange(grid.size)):
        raise BornCountError("ordering must be a permutation of the cell indices")
    return order


def cumulative_order(density: DensityField, ordering_key: OrderingKey = None) -> CumulativeTable:
    """Normalized cumulative mass of ``density`` along a cell ordering.

    ``ordering_key`` is a permutation of cell indices, a callable producing
    one from the grid, or ``None`` for the natural cell order. Zero-mass
    cells are dropped, so the running mass is strictly increasing.
    """
    order = _resolve_order(density.grid, ordering_key)
    masses = density.masses[order]
    keep = masses > 0
    order, masses = order[keep], masses[keep]
    if len(order) == 0:
        raise BornCountError("density has zero total mass")
    running = np.cumsum(masses)
    total = float(running[-1])
    cumulative = running / total
    cumulative[-1] = 1.0
    return CumulativeTable(_frozen(order), _frozen(masses), _frozen(cumulative), total)


@dataclass(frozen=True)
class MonotoneMap:
    """A strictly monotone map of the real line.

    ``derivative`` may be omitted, in which case a central finite difference
    with step ``fd_step`` is used.
    """

    forward: Callable[[np.ndarray], np.ndarray]
    derivative: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "f"
    fd_step: float = 1e-5

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.derivative is not None:
            return np.broadcast_to(np.asarray(self.derivative(x), dtype=float), x.shape)
        h = self.fd_step
        return (self.forward(x + h) - self.forward(x - h)) / (2 * h)


def linear_map(a: float) -> MonotoneMap:
    """``x -> a x``; the Dirac scaling case."""
    if a == 0:
        raise MonotonicityError("a linear map with a = 0 is not invertible")
    return MonotoneMap(lambda x: a * np.asarray(x, dtype=float),
                       lambda x: np.full(np.shape(x), float(a)),
                       name=f"scale({a:g})")


def cubic_map() -> MonotoneMap:
    """``x -> x**3 + x``, strictly increasing with Jacobian ``3 x**2 + 1``."""
    return MonotoneMap(lambda x: np.asarray(x, dtype=float) ** 3 + x,
                       lambda x: 3.0 * np.asarray(x, dtype=float) ** 2 + 1.0,
                       name="cubic")


def pushforward_density(grid: SampleGrid, fmap: MonotoneMap) -> DensityField:
    """Density ``|f'(x)|`` of the pulled-back measure ``d f(x)`` w.r.t. ``dx``.

    Integrating the result over an interval reproduces the length of the
    interval's image under ``f``, which is the discrete form of the scaling
    rule for the Dirac delta under a change of variables.
    """
    if grid.dim != 1:
        raise BornCountError("pushforward_density supports 1-D grids only")
    x = grid.coordinates
    if grid.size > 1:
        steps = np.diff(fmap.forward(x))
        if not (np.all(steps > 0) or np.all(steps < 0)):
            raise MonotonicityError(
                f"map {fmap.name} is not strictly monotone on the grid")
    r = np.abs(fmap.jacobian(x))
    if not np.all(np.isfinite(r)):
        raise BornCountError(f"map {fmap.name} has a non-finite Jacobian")
    return DensityField(grid, r)
