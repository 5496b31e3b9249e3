"""Wavefunctions on a sample grid, macrostate projectors and Born weights.

Kets use the continuum-normalized convention: ``<a|b> = sum(conj(a) b w)``,
so a basis ket is the cell indicator divided by the cell weight and the
reproducing property holds cell by cell. Basis kets are never built.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Hashable, Iterable, NamedTuple, Optional, Sequence

import numpy as np

from .errors import BornCountError, NormalizationError, UnknownLabelError
from .measure import (DensityField, MeasurableSubset, SampleGrid,
                      check_same_grid, integrate)

__all__ = [
    "Ket",
    "MacrostatePartition",
    "PolarForm",
    "GaugeRecord",
    "inner_product",
    "born_probability",
    "born_probabilities",
    "project",
    "polar_decompose",
    "gauge_absorb",
    "uniformized_identity_check",
]

UNIT_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class Ket:
    grid: SampleGrid
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if len(amps) != self.grid.size:
            raise BornCountError(
                f"ket has {len(amps)} amplitudes for {self.grid.size} cells")
        if not np.all(np.isfinite(amps)):
            raise BornCountError("ket amplitudes must be finite")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def cell_masses(self) -> np.ndarray:
        """``|psi_c|**2 * w_c`` per cell."""
        return np.abs(self.amplitudes) ** 2 * self.grid.weights

    def norm_squared(self) -> float:
        return float(np.sum(self.cell_masses))

    def is_unit(self, tol: float = UNIT_TOL) -> bool:
        return abs(self.norm_squared() - 1.0) <= tol

    def normalized(self) -> "Ket":
        n2 = self.norm_squared()
        if n2 <= 0:
            raise NormalizationError("cannot normalize the zero ket")
        return Ket(self.grid, self.amplitudes / np.sqrt(n2))

    def require_unit(self, tol: float = UNIT_TOL) -> None:
        n2 = self.norm_squared()
        if abs(n2 - 1.0) > tol:
            raise NormalizationError(f"ket is not unit-normalized (<psi|psi> = {n2:.12g})")

    def __mul__(self, scalar):
        return Ket(self.grid, self.amplitudes * scalar)

    __rmul__ = __mul__

    def __add__(self, other: "Ket") -> "Ket":
        check_same_grid(self.grid, other.grid)
        return Ket(self.grid, self.amplitudes + other.amplitudes)

    def __sub__(self, other: "Ket") -> "Ket":
        check_same_grid(self.grid, other.grid)
        return Ket(self.grid, self.amplitudes - other.amplitudes)


class MacrostatePartition:
    """Exhaustive labeling of grid cells by macrostate.

    Each label ``alpha`` picks out the cell set ``C_alpha``; the induced
    projectors are diagonal in the cell basis and hence commute. Labels are
    kept in order of first appearance unless ``label_order`` is given.
    """

    def __init__(self, grid: SampleGrid, labels: Sequence[Hashable],
                 eigenvalues: Optional[Dict[Hashable, float]] = None,
                 label_order: Optional[Sequence[Hashable]] = None):
        labels = list(labels)
        if len(labels) != grid.size:
            raise BornCountError(
                f"partition has {len(labels)} labels for {grid.size} cells")
        if label_order is None:
            label_order = list(dict.fromkeys(labels))
        index = {a: i for i, a in enumerate(label_order)}
        if len(index) != len(label_order):
            raise BornCountError("label_order contains duplicates")
        try:
            codes = np.fromiter((index[a] for a in labels), dtype=np.intp, count=len(labels))
        except KeyError as exc:
            raise UnknownLabelError(f"cell label {exc.args[0]!r} missing from label_order") from None
        codes.setflags(write=False)
        self.grid = grid
        self.label_set = tuple(label_order)
        self.codes = codes
        self._index = index
        self.eigenvalues = dict(eigenvalues or {})
        for a in self.eigenvalues:
            if a not in index:
                raise UnknownLabelError(f"eigenvalue given for unknown label {a!r}")

    @classmethod
    def from_codes(cls, grid: SampleGrid, codes: Iterable[int],
                   label_set: Sequence[Hashable], eigenvalues=None) -> "MacrostatePartition":
        codes = np.asarray(codes, dtype=np.intp)
        label_set = list(label_set)
        if codes.shape != (grid.size,) or codes.min() < 0 or codes.max() >= len(label_set):
            raise BornCountError("codes must index label_set, one per cell")
        part = cls.__new__(cls)
        codes = codes.copy()
        codes.setflags(write=False)
        part.grid = grid
        part.label_set = tuple(label_set)
        part.codes = codes
        part._index = {a: i for i, a in enumerate(label_set)}
        part.eigenvalues = dict(eigenvalues or {})
        return part

    @classmethod
    def single(cls, grid: SampleGrid, label: Hashable = "all") -> "MacrostatePartition":
        return cls.from_codes(grid, np.zeros(grid.size, dtype=np.intp), [label])

    @classmethod
    def from_mask(cls, grid: SampleGrid, mask, true_label: Hashable = "A",
                  false_label: Hashable = "B") -> "MacrostatePartition":
        mask = np.asarray(mask, dtype=bool)
        return cls.from_codes(grid, np.where(mask, 0, 1), [true_label, false_label])

    @property
    def labels(self) -> list:
        return [self.label_set[c] for c in self.codes]

    def code(self, alpha: Hashable) -> int:
        try:
            return self._index[alpha]
        except (KeyError, TypeError):
            raise UnknownLabelError(f"unknown macrostate label {alpha!r}") from None

    def mask(self, alpha: Hashable) -> np.ndarray:
        return self.codes == self.code(alpha)

    def subset(self, alpha: Hashable) -> MeasurableSubset:
        return MeasurableSubset(self.grid, np.flatnonzero(self.mask(alpha)))

    def __repr__(self):
        return f"MacrostatePartition(labels={list(self.label_set)!r}, cells={self.grid.size})"


@dataclass(frozen=True, eq=False)
class PolarForm:
    r: np.ndarray
    theta: np.ndarray

    def recompose(self) -> np.ndarray:
        return self.r * np.exp(1j * self.theta)


@dataclass(frozen=True, eq=False)
class GaugeRecord:
    """Per-configuration U(1) phase moved out of the state and into the basis."""

    theta: np.ndarray

    def apply(self, ket: Ket) -> Ket:
        """Undo the absorption: multiply each amplitude by ``exp(i theta)``."""
        return Ket(ket.grid, ket.amplitudes * np.exp(1j * self.theta))


def inner_product(a: Ket, b: Ket) -> complex:
    check_same_grid(a.grid, b.grid)
    return complex(np.sum(np.conj(a.amplitudes) * b.amplitudes * a.grid.weights))


def born_probability(psi: Ket, partition: MacrostatePartition, alpha: Hashable) -> float:
    """``<psi|P_alpha|psi>`` for a unit ket."""
    check_same_grid(psi.grid, partition.grid)
    mask = partition.mask(alpha)
    psi.require_unit()
    return float(np.sum(psi.cell_masses[mask]))


def born_probabilities(psi: Ket, partition: MacrostatePartition) -> Dict[Hashable, float]:
    return {a: born_probability(psi, partition, a) for a in partition.label_set}


def project(psi: Ket, partition: MacrostatePartition, alpha: Hashable) -> Ket:
    check_same_grid(psi.grid, partition.grid)
    mask = partition.mask(alpha)
    return Ket(psi.grid, np.where(mask, psi.amplitudes, 0j))


def _canonical_phase(z: np.ndarray) -> np.ndarray:
    theta = np.angle(z)
    theta[theta <= -np.pi] = np.pi
    theta[z == 0] = 0.0
    return theta


def polar_decompose(psi: Ket) -> PolarForm:
    """Split amplitudes into modulus and phase; the phase is 0 where psi is 0."""
    z = psi.amplitudes
    return PolarForm(np.abs(z), _canonical_phase(z))


def gauge_absorb(psi: Ket) -> tuple[Ket, GaugeRecord]:
    """Rotate each basis ket by the local phase so the coefficients become ``|psi|``.

    Returns the real, non-negative ket and the recorded phases.
    """
    polar = polar_decompose(psi)
    return Ket(psi.grid, polar.r.astype(complex)), GaugeRecord(polar.theta)


class IdentityCheck(NamedTuple):
    lhs: float
    rhs: float


def uniformized_identity_check(psi: Ket, partition: MacrostatePartition,
                               alpha: Hashable) -> IdentityCheck:
    """Evaluate both sides of ``|P_alpha psi|^2 = int_{C_alpha} r^2 dmu``.

    The left side expands the state in basis kets weighted by the uniformizing
    measure ``r dmu``: the kernel applied to that measure reproduces ``r``
    in each cell, and ``r`` is then integrated against ``r dmu`` once more.
    The right side integrates the density ``r**2`` directly.
    """
    check_same_grid(psi.grid, partition.grid)
    mask = partition.mask(alpha)
    psi.require_unit()
    real_psi, _ = gauge_absorb(psi)
    r = real_psi.amplitudes.real
    w = psi.grid.weights

    # mu~ mass per cell, restricted to C_alpha
    tilde_mass = np.where(mask, r * w, 0.0)
    # <phi_c|phi_c'> = delta_cc' / w_c, so sum_c' <phi_c|phi_c'> mu~_c' = r_c
    reproduced = tilde_mass / w
    lhs = float(np.sum(reproduced * tilde_mass))

    rhs = integrate(DensityField(psi.grid, r**2), partition.subset(alpha))
    return IdentityCheck(lhs, rhs)
