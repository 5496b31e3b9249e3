"""Wavefunctionals over configuration spaces of a discretized lattice field.

A configuration assigns one of ``levels`` field values to each of ``sites``
lattice sites; the configuration space is a grid of ``levels**sites`` cells
that every other module accepts unchanged.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import BornCountError
from .measure import SampleGrid, check_same_grid
from .state import Ket, gauge_absorb, polar_decompose

__all__ = ["FieldConfigSpace", "DensityPhaseMap", "build_config_space",
           "emit_density_phase_map", "MAX_CONFIGURATIONS"]

MAX_CONFIGURATIONS = 2**24


@dataclass(frozen=True, eq=False)
class FieldConfigSpace:
    sites: int
    levels: int
    value_range: Tuple[float, float]
    grid: SampleGrid

    @property
    def values(self) -> np.ndarray:
        """The discretized field values available at each site."""
        lo, hi = self.value_range
        step = (hi - lo) / self.levels
        return lo + (np.arange(self.levels) + 0.5) * step

    def site_mask(self, site: int, predicate) -> np.ndarray:
        """Boolean mask of configurations where ``predicate(phi_site)`` holds (sites are 1-based)."""
        if not 1 <= site <= self.sites:
            raise BornCountError(f"site {site} outside 1..{self.sites}")
        return np.asarray(predicate(self.grid.centers[:, site - 1]), dtype=bool)


def build_config_space(sites: int, levels: int,
                       value_range: Tuple[float, float] = (-1.0, 1.0)) -> FieldConfigSpace:
    """Enumerate all field configurations in lexicographic site order.

    Site 1 varies slowest. Each cell's weight is the product of the per-site
    value spacings.
    """
    if sites < 1 or levels < 2:
        raise BornCountError("need sites >= 1 and levels >= 2")
    if levels**sites > MAX_CONFIGURATIONS:
        raise BornCountError(
            f"configuration space too large: levels**sites = {levels}**{sites} "
            f"exceeds 2**24 (sites={sites}, levels={levels})")
    lo, hi = map(float, value_range)
    if not hi > lo:
        raise BornCountError(f"empty value range [{lo}, {hi}]")
    step = (hi - lo) / levels
    axis = lo + (np.arange(levels) + 0.5) * step
    mesh = np.meshgrid(*([axis] * sites), indexing="ij")
    centers = np.stack([m.reshape(-1) for m in mesh], axis=1)
    weights = np.full(len(centers), step**sites)
    return FieldConfigSpace(sites, levels, (lo, hi), SampleGrid(centers, weights))


@dataclass(frozen=True, eq=False)
class DensityPhaseMap:
    """One row per configuration: field values, ``r``, ``theta``, ``r^2 w``."""

    phi: np.ndarray
    r: np.ndarray
    theta: np.ndarray
    prob_mass: np.ndarray

    @property
    def header(self):
        return [f"phi_{i + 1}" for i in range(self.phi.shape[1])] + ["r", "theta", "prob_mass"]

    def __len__(self):
        return len(self.r)

    def rows(self):
        for i in range(len(self.r)):
            yield list(self.phi[i]) + [self.r[i], self.theta[i], self.prob_mass[i]]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.header)
        for row in self.rows():
            writer.writerow([repr(float(v)) for v in row])
        return buf.getvalue()


def emit_density_phase_map(psi: Ket, space: FieldConfigSpace) -> DensityPhaseMap:
    """Tabulate modulus, phase and probability mass of a unit wavefunctional.

    The phase column is the gauge record produced by absorbing the phase
    into the configuration basis; the modulus is read from the absorbed,
    real ket.
    """
    check_same_grid(psi.grid, space.grid)
    psi.require_unit()
    real_psi, gauge = gauge_absorb(psi)
    r = polar_decompose(real_psi).r
    return DensityPhaseMap(space.grid.centers, r, gauge.theta, r**2 * space.grid.weights)
