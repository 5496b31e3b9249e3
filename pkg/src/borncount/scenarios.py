"""Concrete states: the uniform finite case, Stern-Gerlach, random kets.

Also holds the naive branch counter, which counts support cells instead of
weighing them, and so only agrees with the Born weights for uniform states.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Dict, Hashable, Optional, Sequence, Tuple

import numpy as np

from .errors import BornCountError, EmptySupportError
from .measure import SampleGrid, check_same_grid
from .refinement import support
from .state import Ket, MacrostatePartition, born_probabilities

__all__ = [
    "FiniteCaseConfig",
    "SternGerlachConfig",
    "finite_uniform_case",
    "finite_uniform_state",
    "stern_gerlach_state",
    "naive_branch_count",
    "random_ket",
    "random_partition",
    "gaussian_ket",
    "halfline_partition",
    "build_scenario",
]

SHEETS = ("up", "down")


@dataclass(frozen=True)
class FiniteCaseConfig:
    n: int
    labels: Tuple[Hashable, ...]

    def __post_init__(self):
        if self.n < 1:
            raise BornCountError("finite case needs n >= 1")
        if len(self.labels) != self.n:
            raise BornCountError(f"{len(self.labels)} labels given for n = {self.n}")
        object.__setattr__(self, "labels", tuple(self.labels))


def finite_uniform_state(config: FiniteCaseConfig) -> Tuple[Ket, MacrostatePartition]:
    """``(1/sqrt n) sum_k |phi_k>`` on ``n`` unit-weight cells."""
    grid = SampleGrid(np.arange(config.n, dtype=float), np.ones(config.n))
    psi = Ket(grid, np.full(config.n, 1.0 / math.sqrt(config.n)))
    return psi, MacrostatePartition(grid, config.labels)


def finite_uniform_case(config: FiniteCaseConfig) -> Dict[Hashable, float]:
    """Born weight per label; equals ``n_j / n`` for the uniform state."""
    psi, partition = finite_uniform_state(config)
    return born_probabilities(psi, partition)


@dataclass(frozen=True)
class SternGerlachConfig:
    """Spin amplitudes ``a, b`` and the two screen packets they end up in."""

    a: complex
    b: complex
    screen: SampleGrid
    sigma: float = 1.0
    u_center: float = 4.0
    d_center: float = -4.0

    def __post_init__(self):
        norm = abs(self.a) ** 2 + abs(self.b) ** 2
        if abs(norm - 1.0) > 1e-12:
            raise BornCountError(f"|a|^2 + |b|^2 = {norm!r}, expected 1")
        if self.sigma <= 0:
            raise BornCountError("packet width sigma must be > 0")
        if self.screen.dim != 1:
            raise BornCountError("the screen grid must be 1-D")
        if abs(self.u_center - self.d_center) < 6 * self.sigma:
            raise BornCountError(
                f"regions U and D overlap: centers {self.u_center} and {self.d_center} "
                f"are closer than 6 sigma = {6 * self.sigma}")


def _screen_packet(screen: SampleGrid, center: float, sigma: float) -> np.ndarray:
    x = screen.coordinates
    g = np.exp(-((x - center) ** 2) / (4 * sigma**2))
    return g / math.sqrt(float(np.sum(g**2 * screen.weights)))


def stern_gerlach_state(config: SternGerlachConfig) -> Tuple[Ket, MacrostatePartition]:
    """Post-measurement state ``a g_U(x)|up> + b g_D(x)|down>``.

    The spin is folded into the grid as two sheets: the first half of the
    cells is the screen with spin up, the second half with spin down. Cell
    centers are ``(x, sheet)`` with sheet 0 for up and 1 for down. Only the
    final packets are modeled; no field dynamics are simulated.
    """
    screen = config.screen
    m = screen.size
    x = screen.coordinates
    centers = np.column_stack([np.concatenate([x, x]),
                               np.concatenate([np.zeros(m), np.ones(m)])])
    grid = SampleGrid(centers, np.concatenate([screen.weights, screen.weights]))
    amps = np.concatenate([config.a * _screen_packet(screen, config.u_center, config.sigma),
                           config.b * _screen_packet(screen, config.d_center, config.sigma)])
    codes = np.repeat([0, 1], m)
    return Ket(grid, amps), MacrostatePartition.from_codes(grid, codes, SHEETS)


def naive_branch_count(psi: Ket, partition: MacrostatePartition,
                       threshold: Optional[float] = None) -> Dict[Hashable, float]:
    """Fraction of support cells per label, ignoring how much mass each carries."""
    check_same_grid(psi.grid, partition.grid)
    psi.require_unit()
    cells = support(psi, threshold).members
    if len(cells) == 0:
        raise EmptySupportError("naive count needs a non-empty support")
    counts = Counter(partition.codes[cells].tolist())
    return {a: counts.get(i, 0) / len(cells) for i, a in enumerate(partition.label_set)}


def _smooth(values: np.ndarray, smoothness: float) -> np.ndarray:
    radius = int(math.ceil(4 * smoothness))
    t = np.arange(-radius, radius + 1)
    kernel = np.exp(-0.5 * (t / smoothness) ** 2)
    kernel /= kernel.sum()
    return np.convolve(values, kernel, mode="same")


def random_ket(seed: int, grid: SampleGrid, smoothness: float = 0.0) -> Ket:
    """Seeded unit ket with i.i.d. complex Gaussian amplitudes.

    ``smoothness > 0`` applies a Gaussian low-pass filter of that width, in
    cells, along the grid order before normalizing.
    """
    if smoothness < 0:
        raise BornCountError("smoothness must be >= 0")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(grid.size) + 1j * rng.standard_normal(grid.size)
    if smoothness > 0:
        z = _smooth(z, smoothness)
    return Ket(grid, z).normalized()


def random_partition(seed: int, grid: SampleGrid, n_labels: int = 2,
                     mode: str = "cuts") -> MacrostatePartition:
    """Seeded partition into labels ``"L0" .. "L{n-1}"``.

    ``mode="cuts"`` splits the cell order into contiguous runs at random
    positions; ``mode="cells"`` labels each cell independently.
    """
    if n_labels < 1:
        raise BornCountError("need at least one label")
    rng = np.random.default_rng(seed)
    names = [f"L{i}" for i in range(n_labels)]
    if mode == "cells":
        codes = rng.integers(0, n_labels, grid.size)
    elif mode == "cuts":
        if n_labels > grid.size:
            raise BornCountError("more labels than cells")
        cuts = np.sort(rng.choice(np.arange(1, grid.size), n_labels - 1, replace=False))
        codes = np.searchsorted(cuts, np.arange(grid.size), side="right")
    else:
        raise BornCountError(f"unknown partition mode {mode!r}")
    return MacrostatePartition.from_codes(grid, codes, names)


def gaussian_ket(grid: SampleGrid, center: float = 0.0, sigma: float = 1.0) -> Ket:
    """Packet whose ``|psi|^2`` is the normal density N(center, sigma^2)."""
    x = grid.coordinates
    amps = (2 * math.pi * sigma**2) ** -0.25 * np.exp(-((x - center) ** 2) / (4 * sigma**2))
    return Ket(grid, amps)


def halfline_partition(grid: SampleGrid, cut: float = 1.0,
                       labels: Sequence[Hashable] = ("le", "gt")) -> MacrostatePartition:
    """Two macrostates ``x <= cut`` and ``x > cut`` on the first coordinate."""
    return MacrostatePartition.from_mask(grid, grid.coordinates <= cut, *labels)


def build_scenario(doc: dict, resolution: Optional[int] = None,
                   seed: Optional[int] = None) -> Tuple[Ket, MacrostatePartition]:
    """Build ``(psi, partition)`` from a scenario document.

    Supported ``type`` values: ``gaussian``, ``stern_gerlach``,
    ``finite_uniform``, ``random`` and ``wavefunctional``. ``resolution``
    overrides the cell count of a ``{lo, hi, resolution}`` grid and
    ``seed`` overrides a document seed.
    """
    from .serialize import ConfigError, grid_from_dict
    from .wavefunctional import build_config_space

    def grid_of(default):
        g = dict(doc.get("grid", default))
        if resolution is not None and "cells" not in g:
            g["resolution"] = resolution
        return grid_from_dict(g)

    kind = doc.get("type")
    try:
        if kind == "gaussian":
            grid = grid_of({"lo": -8.0, "hi": 8.0, "resolution": 2**16})
            psi = gaussian_ket(grid, float(doc.get("center", 0.0)), float(doc.get("sigma", 1.0)))
            labels = doc.get("labels", ["le", "gt"])
            return psi.normalized(), halfline_partition(grid, float(doc.get("cut", 1.0)), labels)
        if kind == "stern_gerlach":
            screen = grid_of({"lo": -10.0, "hi": 10.0, "resolution": 2**16})
            config = SternGerlachConfig(
                complex(float(doc["a_re"]), float(doc.get("a_im", 0.0))),
                complex(float(doc["b_re"]), float(doc.get("b_im", 0.0))),
                screen, float(doc.get("sigma", 1.0)),
                float(doc.get("u_center", 4.0)), float(doc.get("d_center", -4.0)))
            return stern_gerlach_state(config)
        if kind == "finite_uniform":
            labels = doc["labels"]
            if isinstance(labels, str):
                labels = labels.split(",")
            return finite_uniform_state(FiniteCaseConfig(int(doc.get("n", len(labels))), tuple(labels)))
        if kind == "random":
            grid = grid_of({"lo": 0.0, "hi": 1.0, "resolution": 2**12})
            s = int(doc.get("seed", 0) if seed is None else seed)
            psi = random_ket(s, grid, float(doc.get("smoothness", 0.0)))
            part = random_partition(s, grid, int(doc.get("n_labels", 2)), doc.get("mode", "cuts"))
            return psi, part
        if kind == "wavefunctional":
            space = build_config_space(int(doc.get("sites", 2)), int(doc.get("levels", 64)),
                                       tuple(doc.get("value_range", (-1.0, 1.0))))
            s = int(doc.get("seed", 0) if seed is None else seed)
            psi = random_ket(s, space.grid, float(doc.get("smoothness", 0.0)))
            part = MacrostatePartition.from_mask(
                space.grid, space.site_mask(1, lambda phi: phi < 0), "neg", "pos")
            return psi, part
    except KeyError as exc:
        raise ConfigError(f"scenario {kind!r} is missing field {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, BornCountError):
            raise
        raise ConfigError(f"malformed {kind!r} scenario: {exc}") from None
    raise ConfigError(f"unknown scenario type {kind!r}")
