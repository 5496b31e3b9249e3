"""JSON documents for grids, densities, subsets, kets, partitions and scenarios."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np

from .errors import BornCountError, GridMismatchError
from .measure import DensityField, MeasurableSubset, SampleGrid, uniform_grid
from .state import Ket, MacrostatePartition

__all__ = [
    "grid_to_dict", "grid_from_dict",
    "density_to_dict", "density_from_dict",
    "subset_to_dict", "subset_from_dict",
    "ket_to_dict", "ket_from_dict",
    "partition_to_dict", "partition_from_dict",
    "load_json", "ConfigError",
]


class ConfigError(BornCountError):
    """A document or scenario file is malformed."""


def load_json(path) -> Any:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None


def grid_to_dict(grid: SampleGrid) -> dict:
    return {
        "grid_id": grid.grid_id,
        "dim": grid.dim,
        "cells": [{"center": c.tolist(), "weight": float(w)}
                  for c, w in zip(grid.centers, grid.weights)],
    }


def grid_from_dict(doc: dict) -> SampleGrid:
    """Accept either an explicit cell list or ``{lo, hi, resolution}``."""
    try:
        if "cells" in doc:
            centers = [c["center"] for c in doc["cells"]]
            weights = [c["weight"] for c in doc["cells"]]
            grid = SampleGrid(np.asarray(centers, dtype=float).reshape(len(centers), -1), weights)
            if "dim" in doc and grid.dim != int(doc["dim"]):
                raise ConfigError(f"grid declares dim {doc['dim']} but cells have dim {grid.dim}")
            return grid
        return uniform_grid(float(doc["lo"]), float(doc["hi"]), int(doc["resolution"]))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, BornCountError):
            raise
        raise ConfigError(f"malformed grid document: {exc!r}") from None


def _check_ref(doc: dict, grid: SampleGrid) -> None:
    ref = doc.get("grid_id")
    if ref is not None and ref != grid.grid_id:
        raise GridMismatchError(f"document refers to grid {ref}, got {grid.grid_id}")


def density_to_dict(density: DensityField) -> dict:
    return {"grid_id": density.grid.grid_id, "values": density.values.tolist()}


def density_from_dict(doc: dict, grid: SampleGrid) -> DensityField:
    _check_ref(doc, grid)
    return DensityField(grid, doc["values"])


def subset_to_dict(subset: MeasurableSubset) -> dict:
    return {"grid_id": subset.grid.grid_id, "members": subset.members.tolist()}


def subset_from_dict(doc: dict, grid: SampleGrid) -> MeasurableSubset:
    _check_ref(doc, grid)
    return MeasurableSubset(grid, doc["members"])


def ket_to_dict(ket: Ket) -> dict:
    """Amplitudes as interleaved ``[re0, im0, re1, im1, ...]``."""
    inter = np.empty(2 * ket.grid.size)
    inter[0::2] = ket.amplitudes.real
    inter[1::2] = ket.amplitudes.imag
    return {"grid_id": ket.grid.grid_id, "amplitudes": inter.tolist()}


def ket_from_dict(doc: dict, grid: SampleGrid) -> Ket:
    _check_ref(doc, grid)
    inter = np.asarray(doc["amplitudes"], dtype=float)
    if len(inter) != 2 * grid.size:
        raise ConfigError(f"expected {2 * grid.size} interleaved values, got {len(inter)}")
    return Ket(grid, inter[0::2] + 1j * inter[1::2])


def partition_to_dict(partition: MacrostatePartition) -> dict:
    return {
        "grid_id": partition.grid.grid_id,
        "labels": partition.labels,
        "eigenvalues": {str(a): v for a, v in partition.eigenvalues.items()},
    }


def partition_from_dict(doc: dict, grid: SampleGrid) -> MacrostatePartition:
    _check_ref(doc, grid)
    return MacrostatePartition(grid, doc["labels"], doc.get("eigenvalues") or None)
