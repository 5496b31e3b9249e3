"""Command-line front end.

Each subcommand writes CSV and/or JSON files into the output directory
(``--out``, overridden by ``BORNCOUNT_OUT``). Exit status is 0 on success,
2 for a bad configuration and 3 when a numerical guard or precondition in
the library rejects the run.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .errors import BornCountError
from .measure import cubic_map, linear_map, pushforward_density, uniform_grid
from .refinement import build_refinement, convergence_study
from .scenarios import (FiniteCaseConfig, SternGerlachConfig, build_scenario,
                        finite_uniform_case, random_ket,
                        random_partition, stern_gerlach_state)
from .serialize import ConfigError, load_json
from .state import born_probabilities, gauge_absorb
from .wavefunctional import build_config_space, emit_density_phase_map

OUT_ENV = "BORNCOUNT_OUT"
EXIT_OK, EXIT_CONFIG, EXIT_GUARD = 0, 2, 3


def _pow2(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if value < 1 or value & (value - 1):
        raise argparse.ArgumentTypeError(f"resolution {value} is not a power of two")
    return value


def _nonneg_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return value


def _csv_text(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


class Output:
    """Deterministic writer for one run's artifacts."""

    def __init__(self, directory: Path, formats: str):
        self.directory = directory
        self.formats = {"csv", "json"} if formats == "both" else {formats}
        self.written: List[Path] = []

    def _write(self, name: str, text: str) -> None:
        self.directory.mkdir(parents=True, exist_ok=True)
        path = self.directory / name
        path.write_text(text)
        self.written.append(path)

    def emit(self, stem: str, csv_text: Optional[str] = None, payload=None) -> None:
        if "csv" in self.formats and csv_text is not None:
            self._write(f"{stem}.csv", csv_text)
        if "json" in self.formats and payload is not None:
            self._write(f"{stem}.json", json.dumps(payload, indent=2) + "\n")


def _scenario(args):
    if not args.scenario:
        raise ConfigError("--scenario is required for this command")
    return build_scenario(load_json(args.scenario), args.resolution, args.seed)


def cmd_converge(args, out: Output) -> None:
    psi, partition = _scenario(args)
    seq = build_refinement(psi, partition, args.n_max, ordering=args.ordering)
    report = convergence_study(seq, tau=args.tau)
    out.emit("converge", report.to_csv(), report.to_dict())
    last = report.level(args.n_max)
    for row in last:
        print(f"n={row.n} alpha={row.alpha} count={row.count_prob:.6f} "
              f"born={row.born_prob:.6f} err={row.abs_error:.2e}")


def cmd_stern_gerlach(args, out: Output) -> None:
    if args.scenario:
        psi, partition = _scenario(args)
    else:
        screen = uniform_grid(-10.0, 10.0, args.resolution or 2**16)
        config = SternGerlachConfig(complex(args.a_re, args.a_im), complex(args.b_re, args.b_im),
                                    screen, args.sigma, args.u_center, args.d_center)
        psi, partition = stern_gerlach_state(config)
    born = born_probabilities(psi, partition)
    seq = build_refinement(psi, partition, args.n_max, ordering=args.ordering)
    report = convergence_study(seq, tau=args.tau)
    payload = report.to_dict()
    payload["region_mass"] = {str(a): p for a, p in born.items()}
    out.emit("stern_gerlach", report.to_csv(), payload)
    for row in report.level(args.n_max):
        print(f"{row.alpha}: born={row.born_prob:.6f} count={row.count_prob:.6f}")


def cmd_finite(args, out: Output) -> None:
    if args.labels is not None:
        labels = tuple(s.strip() for s in args.labels.split(","))
        n = args.n if args.n is not None else len(labels)
    elif args.scenario:
        doc = load_json(args.scenario)
        labels = doc["labels"] if not isinstance(doc.get("labels"), str) else doc["labels"].split(",")
        labels = tuple(labels)
        n = int(doc.get("n", len(labels)))
    else:
        raise ConfigError("finite needs --labels or --scenario")
    probs = finite_uniform_case(FiniteCaseConfig(n, labels))
    payload = {str(a): p for a, p in probs.items()}
    rows = [(a, p, labels.count(a), n) for a, p in probs.items()]
    out.emit("finite", _csv_text(["alpha", "born_prob", "n_j", "n"], rows), payload)
    print(json.dumps(payload))


def cmd_gauge(args, out: Output) -> None:
    grid = uniform_grid(0.0, 1.0, args.resolution or 1024)
    seed = 0 if args.seed is None else args.seed
    psi = random_ket(seed, grid, args.smoothness)
    partition = random_partition(seed, grid, args.labels)
    real_psi, gauge = gauge_absorb(psi)
    before = born_probabilities(psi, partition)
    after = born_probabilities(real_psi, partition)
    deltas = {a: abs(before[a] - after[a]) for a in partition.label_set}
    max_delta = max(deltas.values())
    rows = [(a, before[a], after[a], deltas[a], max_delta) for a in partition.label_set]
    header = ["alpha", "born_before", "born_after", "abs_delta", "max_abs_delta"]
    payload = {
        "seed": seed,
        "cells": grid.size,
        "rows": [dict(zip(header, r)) for r in rows],
        "max_abs_delta": max_delta,
        "max_modulus_delta": float(np.max(np.abs(np.abs(psi.amplitudes) - real_psi.amplitudes.real))),
        "argmax_before": max(before, key=before.get),
        "argmax_after": max(after, key=after.get),
    }
    out.emit("gauge", _csv_text(header, rows), payload)
    print(f"max |dP| = {max_delta:.3e}")


def cmd_dirac(args, out: Output) -> None:
    grid = uniform_grid(args.lo, args.hi, args.resolution or 1024)
    if args.map == "scale":
        fmap = linear_map(args.a)
    else:
        fmap = cubic_map()
    r = pushforward_density(grid, fmap).values
    x = grid.coordinates
    h = 1e-5
    oracle = np.abs((fmap.forward(x + h) - fmap.forward(x - h)) / (2 * h))
    diff = np.abs(r - oracle)
    rows = [(float(x[i]), float(fmap.forward(x[i])), float(r[i]), float(oracle[i]), float(diff[i]))
            for i in range(grid.size)]
    header = ["x", "f_x", "r", "fd_jacobian", "abs_diff"]
    payload = {"map": fmap.name, "cells": grid.size, "max_abs_diff": float(diff.max()),
               "image_length": float(abs(fmap.forward(args.hi) - fmap.forward(args.lo))),
               "integral_r": float(np.sum(r * grid.weights))}
    out.emit("dirac", _csv_text(header, rows), payload)
    print(f"{fmap.name}: max |r - fd| = {diff.max():.3e}")


def cmd_wavefunctional(args, out: Output) -> None:
    space = build_config_space(args.sites, args.levels, (args.lo, args.hi))
    seed = 0 if args.seed is None else args.seed
    psi = random_ket(seed, space.grid, args.smoothness)
    table = emit_density_phase_map(psi, space)
    payload = {"sites": args.sites, "levels": args.levels, "value_range": [args.lo, args.hi],
               "seed": seed, "prob_mass_total": float(np.sum(table.prob_mass)),
               "header": table.header,
               "rows": [[float(v) for v in row] for row in table.rows()]}
    out.emit("wavefunctional", table.to_csv(), payload)
    print(f"{len(table)} configurations, total probability {payload['prob_mass_total']:.12f}")


def cmd_partition(args, out: Output) -> None:
    psi, partition = _scenario(args)
    seq = build_refinement(psi, partition, args.n_max, ordering=args.ordering)
    rows = [row for n in range(seq.n_max + 1) for row in seq.member_table(n)]
    header = list(rows[0].keys())
    out.emit("partition", _csv_text(header, [list(r.values()) for r in rows]),
             {"n_max": seq.n_max, "eps_grid": seq.eps_grid, "members": rows})
    print(f"{len(rows)} members over levels 0..{seq.n_max}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", help="scenario JSON file")
    common.add_argument("--n-max", type=_nonneg_int, default=12, dest="n_max")
    common.add_argument("--resolution", type=_pow2, default=None,
                        help="cell count (power of two)")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", default="results", help="output directory")
    common.add_argument("--format", choices=("csv", "json", "both"), default="both")
    common.add_argument("--tau", type=float, default=1e-9)
    common.add_argument("--ordering", choices=("macro", "coordinate"), default="macro")

    parser = argparse.ArgumentParser(
        prog="borncount",
        description="Branch-counting checks of the Born rule on discretized state spaces.")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("converge", parents=[common], help="counting vs Born convergence report")

    sg = sub.add_parser("stern-gerlach", parents=[common], help="two-packet spin measurement")
    sg.add_argument("--a-re", type=float, default=math.sqrt(0.3))
    sg.add_argument("--a-im", type=float, default=0.0)
    sg.add_argument("--b-re", type=float, default=math.sqrt(0.7))
    sg.add_argument("--b-im", type=float, default=0.0)
    sg.add_argument("--sigma", type=float, default=1.0)
    sg.add_argument("--u-center", type=float, default=4.0)
    sg.add_argument("--d-center", type=float, default=-4.0)

    fin = sub.add_parser("finite", parents=[common], help="uniform finite superposition")
    fin.add_argument("--n", type=int, default=None)
    fin.add_argument("--labels", help="comma-separated label per component")

    ga = sub.add_parser("gauge", parents=[common], help="phase absorption before/after table")
    ga.add_argument("--labels", type=int, default=3, help="number of macrostates")
    ga.add_argument("--smoothness", type=float, default=0.0)

    di = sub.add_parser("dirac", parents=[common], help="Jacobian density of a monotone map")
    di.add_argument("--map", choices=("scale", "cubic"), default="scale")
    di.add_argument("--a", type=float, default=2.0, help="factor for the scale map")
    di.add_argument("--lo", type=float, default=-1.0)
    di.add_argument("--hi", type=float, default=1.0)

    wf = sub.add_parser("wavefunctional", parents=[common], help="density/phase map export")
    wf.add_argument("--sites", type=int, default=2)
    wf.add_argument("--levels", type=int, default=8)
    wf.add_argument("--lo", type=float, default=-1.0)
    wf.add_argument("--hi", type=float, default=1.0)
    wf.add_argument("--smoothness", type=float, default=0.0)

    sub.add_parser("partition", parents=[common], help="member boundaries per level")
    return parser


COMMANDS = {
    "converge": cmd_converge,
    "stern-gerlach": cmd_stern_gerlach,
    "finite": cmd_finite,
    "gauge": cmd_gauge,
    "dirac": cmd_dirac,
    "wavefunctional": cmd_wavefunctional,
    "partition": cmd_partition,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    out = Output(Path(os.environ.get(OUT_ENV) or args.out), args.format)
    try:
        COMMANDS[args.command](args, out)
    except ConfigError as exc:
        print(f"borncount: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BornCountError as exc:
        print(f"borncount: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (KeyError, TypeError) as exc:
        print(f"borncount: config error: {exc!r}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
