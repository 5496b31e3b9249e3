"""Equal-mass dyadic refinements of a state's support and branch counting.

The support ``D`` of a unit ket carries the probability measure
``mu' = |psi|^2 mu``. Cells of ``D`` are laid out along one ordering and
the running ``mu'`` mass is cut at ``k / 2**n``; a cell belongs to the member
containing its mass midpoint. Because ``floor(2 u 2**n) // 2 == floor(u 2**n)``,
level ``n + 1`` refines level ``n`` exactly.

Counting the members that carry no mass outside a macrostate, times
``2**-n``, converges to the Born weight of that macrostate.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Hashable, List, Optional, Sequence

import numpy as np

from .errors import BornCountError, DepthGuardError, EmptySupportError
from .measure import DensityField, MeasurableSubset, check_same_grid
from .state import Ket, MacrostatePartition, born_probability

__all__ = [
    "support",
    "mu_prime",
    "max_safe_depth",
    "RefinementSequence",
    "BranchVector",
    "ConsistencyIndex",
    "ConvergenceRow",
    "ConvergenceReport",
    "build_refinement",
    "branch_vector",
    "reconstruct",
    "consistency_index",
    "counting_probability",
    "convergence_study",
]

DEFAULT_TAU = 1e-9
SUPPORT_REL_THRESHOLD = 1e-15
DEPTH_GUARD = 0.5
ORDERINGS = ("macro", "coordinate")


def support(psi: Ket, threshold: Optional[float] = None) -> MeasurableSubset:
    """Cells whose probability mass ``|psi_c|^2 w_c`` exceeds ``threshold``.

    The default threshold is ``1e-15`` times the largest cell mass.
    """
    masses = psi.cell_masses
    if threshold is None:
        threshold = SUPPORT_REL_THRESHOLD * float(masses.max())
    if threshold < 0:
        raise BornCountError("support threshold must be >= 0")
    return MeasurableSubset(psi.grid, np.flatnonzero(masses > threshold))


def mu_prime(psi: Ket) -> DensityField:
    """The state-induced probability density ``|psi|^2``."""
    psi.require_unit()
    return DensityField(psi.grid, np.abs(psi.amplitudes) ** 2)


def max_safe_depth(eps_grid: float) -> int:
    """Largest ``n`` with ``2**n * eps_grid <= 0.5``."""
    if eps_grid <= 0:
        raise BornCountError("eps_grid must be positive")
    n = int(math.floor(math.log2(DEPTH_GUARD / eps_grid)))
    # guard against log2 rounding at exact powers of two
    while n >= 0 and 2.0**n * eps_grid > DEPTH_GUARD:
        n -= 1
    while 2.0 ** (n + 1) * eps_grid <= DEPTH_GUARD:
        n += 1
    return n


@dataclass(frozen=True)
class BranchVector:
    n: int
    k: int
    ket: Ket
    cells: np.ndarray


@dataclass(frozen=True)
class ConsistencyIndex:
    n: int
    alpha: Hashable
    members: frozenset
    tau: float

    def __len__(self):
        return len(self.members)


class RefinementSequence:
    """Nested equal-``mu'``-mass partitions of the support, levels ``0..n_max``.

    Member indices ``k`` run from 1 to ``2**n``. Internally each level is an
    array assigning every ordered support cell its 0-based member; members
    are contiguous runs of the ordering.
    """

    def __init__(self, psi: Ket, partition: MacrostatePartition, n_max: int,
                 order: np.ndarray, ordering: str):
        self.psi = psi
        self.partition = partition
        self.n_max = n_max
        self.ordering = ordering
        self.order = order
        raw = psi.cell_masses[order]
        self.total_mass = float(np.sum(raw))
        self.masses = raw / self.total_mass
        running = np.cumsum(self.masses)
        running[-1] = 1.0
        self.cumulative = running
        self.midpoints = running - 0.5 * self.masses
        self.eps_grid = float(self.masses.max())
        self.ordered_codes = partition.codes[order]

        self._assign: List[np.ndarray] = []
        self._starts: List[np.ndarray] = []
        for n in range(n_max + 1):
            count = 2**n
            assign = np.minimum(np.floor(self.midpoints * count).astype(np.intp), count - 1)
            self._assign.append(assign)
            self._starts.append(np.searchsorted(assign, np.arange(count + 1), side="left"))
        for a in (self.order, self.masses, self.cumulative, self.midpoints, self.ordered_codes):
            a.setflags(write=False)

    @property
    def grid(self):
        return self.psi.grid

    @property
    def support(self) -> MeasurableSubset:
        return MeasurableSubset(self.grid, self.order)

    def _check_level(self, n: int) -> None:
        if not 0 <= n <= self.n_max:
            raise BornCountError(f"level {n} outside 0..{self.n_max}")

    def _check_member(self, n: int, k: int) -> None:
        self._check_level(n)
        if not 1 <= k <= 2**n:
            raise BornCountError(f"member index {k} outside 1..{2**n} at level {n}")

    def assignment(self, n: int) -> np.ndarray:
        """0-based member of every ordered support cell at level ``n``."""
        self._check_level(n)
        return self._assign[n]

    def member_positions(self, n: int, k: int) -> slice:
        """Slice into the ordered support for member ``k``."""
        self._check_member(n, k)
        starts = self._starts[n]
        return slice(int(starts[k - 1]), int(starts[k]))

    def member_cells(self, n: int, k: int) -> np.ndarray:
        """Grid cell indices of ``D_{n,k}``."""
        return self.order[self.member_positions(n, k)]

    def member_masses(self, n: int) -> np.ndarray:
        self._check_level(n)
        return np.bincount(self._assign[n], weights=self.masses, minlength=2**n)

    def parents(self, n: int) -> np.ndarray:
        """1-based parent index at level ``n - 1`` of each level-``n`` member."""
        self._check_level(n)
        if n == 0:
            raise BornCountError("level 0 has no parent level")
        return (np.arange(1, 2**n + 1) + 1) // 2

    def label_blocks(self, alpha: Hashable) -> int:
        """Number of maximal runs of ``alpha`` along the ordering."""
        hit = self.ordered_codes == self.partition.code(alpha)
        if not hit.any():
            return 0
        return int(hit[0]) + int(np.count_nonzero(hit[1:] & ~hit[:-1]))

    def member_table(self, n: int) -> List[dict]:
        """Member boundaries at level ``n`` in the cumulative-mass coordinate."""
        self._check_level(n)
        starts = self._starts[n]
        coords = self.grid.coordinates
        rows = []
        for k in range(1, 2**n + 1):
            lo, hi = int(starts[k - 1]), int(starts[k])
            first, last = int(self.order[lo]), int(self.order[hi - 1])
            rows.append({
                "n": n,
                "k": k,
                "u_lo": float(self.cumulative[lo - 1]) if lo > 0 else 0.0,
                "u_hi": float(self.cumulative[hi - 1]),
                "mass": float(np.sum(self.masses[lo:hi])),
                "cells": hi - lo,
                "first_cell": first,
                "last_cell": last,
                "x_first": float(coords[first]),
                "x_last": float(coords[last]),
            })
        return rows

    def coordinate_cuts(self, n: int) -> np.ndarray:
        """First coordinate of the first cell of members ``2..2**n``."""
        self._check_level(n)
        starts = self._starts[n][1:-1]
        return self.grid.coordinates[self.order[starts]]

    def __repr__(self):
        return (f"RefinementSequence(n_max={self.n_max}, support_cells={len(self.order)}, "
                f"ordering={self.ordering!r}, eps_grid={self.eps_grid:.3g})")


def _ordering(partition: MacrostatePartition, cells: np.ndarray, ordering: str) -> np.ndarray:
    if ordering == "macro":
        return cells[np.argsort(partition.codes[cells], kind="stable")]
    if ordering == "coordinate":
        return cells
    raise BornCountError(f"unknown ordering {ordering!r}; expected one of {ORDERINGS}")


def build_refinement(psi: Ket, partition: MacrostatePartition, n_max: int,
                     ordering: str = "macro",
                     threshold: Optional[float] = None) -> RefinementSequence:
    """Build dyadic equal-mass partitions ``D_0 .. D_{n_max}`` of the support.

    ``ordering="macro"`` lays cells out label by label (in the partition's
    label order), then by cell index, so each ``C_alpha ∩ D`` is a single
    block of cumulative mass. ``"coordinate"`` keeps the grid order.
    """
    check_same_grid(psi.grid, partition.grid)
    psi.require_unit()
    if n_max < 0:
        raise BornCountError("n_max must be >= 0")
    cells = support(psi, threshold).members
    if len(cells) == 0 or float(np.sum(psi.cell_masses[cells])) <= 0:
        raise EmptySupportError("state has zero mass on its support")
    order = _ordering(partition, cells, ordering)
    masses = psi.cell_masses[order]
    eps = float(masses.max() / masses.sum())
    if 2.0**n_max * eps > DEPTH_GUARD:
        raise DepthGuardError(
            f"grid too coarse for depth {n_max}: largest cell carries mu' mass "
            f"{eps:.3g}; maximum safe n is {max_safe_depth(eps)}")
    return RefinementSequence(psi, partition, n_max, order, ordering)


def branch_vector(seq: RefinementSequence, n: int, k: int) -> BranchVector:
    """``|n,k> = sqrt(2**n)`` times ``psi`` restricted to ``D_{n,k}``."""
    cells = seq.member_cells(n, k)
    amps = np.zeros(seq.grid.size, dtype=complex)
    amps[cells] = math.sqrt(2.0**n) * seq.psi.amplitudes[cells]
    return BranchVector(n, k, Ket(seq.grid, amps), cells)


def reconstruct(seq: RefinementSequence, n: int) -> Ket:
    """``2**(-n/2) * sum_k |n,k>``, which equals ``psi`` on the support."""
    seq._check_level(n)
    total = np.zeros(seq.grid.size, dtype=complex)
    for k in range(1, 2**n + 1):
        total += branch_vector(seq, n, k).ket.amplitudes
    return Ket(seq.grid, total / math.sqrt(2.0**n))


def consistency_index(seq: RefinementSequence, n: int, alpha: Hashable,
                      tau: float = DEFAULT_TAU) -> ConsistencyIndex:
    """Members of level ``n`` whose ``mu'`` mass outside ``C_alpha`` is at most ``tau 2**-n``."""
    code = seq.partition.code(alpha)
    seq._check_level(n)
    if tau < 0 or math.isnan(tau):
        raise BornCountError("tau must be >= 0")
    outside = np.where(seq.ordered_codes != code, seq.masses, 0.0)
    outside_per_member = np.bincount(seq.assignment(n), weights=outside, minlength=2**n)
    ks = np.flatnonzero(outside_per_member <= tau * 2.0**-n) + 1
    return ConsistencyIndex(n, alpha, frozenset(int(k) for k in ks), tau)


def counting_probability(seq: RefinementSequence, n: int, alpha: Hashable,
                         tau: float = DEFAULT_TAU) -> float:
    """Fraction ``|M_{n,alpha}| / 2**n`` of equal-mass members consistent with ``alpha``."""
    return len(consistency_index(seq, n, alpha, tau)) / 2.0**n


@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    alpha: Hashable
    count_prob: float
    born_prob: float
    abs_error: float
    deficit: float
    bound: float

    @property
    def within_bound(self) -> bool:
        return self.abs_error <= self.bound


CSV_COLUMNS = ("n", "alpha", "count_prob", "born_prob", "abs_error", "deficit")


@dataclass
class ConvergenceReport:
    ordering: str
    eps_grid: float
    tau: float
    blocks: dict
    rows: List[ConvergenceRow] = field(default_factory=list)

    def level(self, n: int) -> List[ConvergenceRow]:
        return [r for r in self.rows if r.n == n]

    def row(self, n: int, alpha: Hashable) -> ConvergenceRow:
        for r in self.rows:
            if r.n == n and r.alpha == alpha:
                return r
        raise KeyError((n, alpha))

    @property
    def all_within_bound(self) -> bool:
        return all(r.within_bound for r in self.rows)

    def violations(self) -> List[ConvergenceRow]:
        return [r for r in self.rows if not r.within_bound]

    def to_dict(self) -> dict:
        return {
            "ordering": self.ordering,
            "eps_grid": self.eps_grid,
            "tau": self.tau,
            "blocks": {str(a): b for a, b in self.blocks.items()},
            "rows": [dict(asdict(r), alpha=str(r.alpha)) for r in self.rows],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in self.rows:
            writer.writerow([r.n, r.alpha, repr(r.count_prob), repr(r.born_prob),
                             repr(r.abs_error), repr(r.deficit)])
        return buf.getvalue()


def convergence_study(seq: RefinementSequence, labels: Optional[Sequence[Hashable]] = None,
                      tau: float = DEFAULT_TAU) -> ConvergenceReport:
    """Counting probability against Born weight for every level and label.

    The per-row ``bound`` is ``max(2 B, B + 1) 2**-n + 2**n eps_grid`` with
    ``B`` the number of blocks the label forms along the ordering: each block
    can lose a partly covered member at either end. Under macro ordering
    ``B = 1`` and the bound is ``2 * 2**-n + 2**n eps_grid``.
    """
    if labels is None:
        labels = seq.partition.label_set
    for a in labels:
        seq.partition.code(a)
    born = {a: born_probability(seq.psi, seq.partition, a) for a in labels}
    blocks = {a: seq.label_blocks(a) for a in labels}
    report = ConvergenceReport(seq.ordering, seq.eps_grid, tau, blocks)
    all_labels = seq.partition.label_set
    for n in range(seq.n_max + 1):
        counts = {a: counting_probability(seq, n, a, tau) for a in all_labels}
        deficit = 1.0 - sum(counts.values())
        for a in labels:
            bound = max(2 * blocks[a], blocks[a] + 1) * 2.0**-n + 2.0**n * seq.eps_grid
            report.rows.append(ConvergenceRow(
                n, a, counts[a], born[a], abs(counts[a] - born[a]), deficit, bound))
    return report
