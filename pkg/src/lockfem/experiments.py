"""Convergence studies over element pair x viscosity x mesh level, written as CSV.

A level ``L`` is the reported mesh parameter ``h = 1/L``; its mesh is the
uniform grid with ``L/2`` squares per side, Alfeld-split.  This is the
correspondence under which the reference Stokes and Chorin error tables are
reproduced (the 4x4 grid gives the ``h = 1/8`` row).
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .analysis import compute_rates, l2_error
from .mesh import alfeld_split, build_uniform_mesh
from .problems import make_problem, self_test
from .spaces import SHORT_NAMES, build_dof_map, element_pair
from .timestepper import integrate, n_steps

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["problem", "element", "nu", "n", "h", "error_l2", "rate", "solver_residual", "wall_ms", "error"]
ELEMENT_ORDER = ["TH", "SV", "MINI", "CR"]
DEFAULT_LEVELS = [8, 16, 32, 64]
DEEP_LEVEL = 128

EXIT_OK, EXIT_CELL_FAILED, EXIT_CHECK_FAILED = 0, 1, 2


@dataclass
class ExperimentConfig:
    problem: str = "stokes"
    elements: list = field(default_factory=lambda: list(ELEMENT_ORDER))
    nus: list = field(default_factory=lambda: [1.0, 1e-6])
    levels: list = field(default_factory=lambda: list(DEFAULT_LEVELS))
    dt: float = 1e-3
    t_end: float = 0.01
    init_mode: str = "nodal"
    output: str | None = None
    n_waves: int = 2
    workers: int = 1
    timing: bool = False

    def __post_init__(self):
        if self.problem not in ("stokes", "chorin"):
            raise ValueError(f"unknown problem {self.problem!r}")
        self.elements = [SHORT_NAMES[element_pair(e).name] for e in self.elements]
        n_steps(self.dt, self.t_end)
        for level in self.levels:
            if int(level) != level or level < 2 or level % 2:
                raise ValueError(f"levels must be even integers >= 2, got {level!r}")
        if self.init_mode not in ("nodal", "helmholtz"):
            raise ValueError(f"unknown init mode {self.init_mode!r}")


def grid_for_level(level: int) -> int:
    return int(level) // 2


def run_cell(problem: str, element: str, nu: float, level: int, dt: float, t_end: float,
             init_mode: str = "nodal", n_waves: int = 2) -> dict:
    """One (element, nu, level) run; failures are captured in the ``error`` field."""
    row = {"problem": problem, "element": element, "nu": nu, "n": int(level), "h": 1.0 / level,
           "error_l2": math.nan, "solver_residual": math.nan, "wall_ms": math.nan, "error": ""}
    start = time.perf_counter()
    try:
        flow = make_problem(problem, nu, n_waves)
        mesh = alfeld_split(build_uniform_mesh(grid_for_level(level)))
        dofmap = build_dof_map(mesh, element)
        run = integrate(flow, dofmap, dt, t_end, init=init_mode)
        row["error_l2"] = l2_error(run.final, flow.velocity, run.times[-1])
        row["solver_residual"] = run.max_residual
    except Exception as exc:  # recorded per cell, the study goes on
        logger.exception("cell %s/%s/nu=%g/n=%d failed", problem, element, nu, level)
        row["error"] = f"{type(exc).__name__}: {exc}".replace("\n", " ")
    row["wall_ms"] = 1000.0 * (time.perf_counter() - start)
    return row


def _cells(config: ExperimentConfig):
    for element in config.elements:
        for nu in config.nus:
            for level in sorted(config.levels):
                yield (config.problem, element, nu, level, config.dt, config.t_end, config.init_mode, config.n_waves)


def _attach_rates(rows: list[dict]) -> list[dict]:
    groups = {}
    for row in rows:
        groups.setdefault((row["element"], row["nu"]), []).append(row)
    for group in groups.values():
        group.sort(key=lambda r: r["n"])
        prev = None
        for row in group:
            row["rate"] = None
            ok = not row["error"] and row["error_l2"] > 0
            if ok and prev is not None:
                row["rate"] = compute_rates([(prev["h"], prev["error_l2"]), (row["h"], row["error_l2"])])[1].rate
            prev = row if ok else None
    return rows


def _sort_key(row):
    return (ELEMENT_ORDER.index(row["element"]), -row["nu"], row["n"])


def run_study(config: ExperimentConfig) -> list[dict]:
    """Run every cell and return rows in canonical order with rates attached."""
    self_test(make_problem(config.problem, max(config.nus), config.n_waves))
    cells = list(_cells(config))
    if config.workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            rows = list(pool.map(run_cell, *zip(*cells)))
    else:
        rows = [run_cell(*c) for c in cells]
    return sorted(_attach_rates(rows), key=_sort_key)


def _fmt(value, spec):
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    return format(value, spec)


def format_csv(rows: list[dict], timing: bool = False) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in rows:
        writer.writerow([
            r["problem"], r["element"], _fmt(r["nu"], "g"), r["n"], _fmt(r["h"], ".10g"),
            _fmt(r["error_l2"], ".6e"), _fmt(r["rate"], ".4f"), _fmt(r["solver_residual"], ".1e"),
            _fmt(r["wall_ms"], ".0f") if timing else "", r["error"],
        ])
    return buf.getvalue()


def _series(rows, element, nu):
    return [r for r in rows if r["element"] == element and r["nu"] == nu]


def _rates(rows, element, nu, min_level=0):
    return [r["rate"] for r in _series(rows, element, nu) if r["rate"] is not None and r["n"] >= min_level]


def check_tables(rows: list[dict], problem: str = "stokes") -> list[tuple[str, bool, str]]:
    """Qualitative signature of the reference error tables; returns ``(name, passed, detail)`` triples."""
    checks = []

    def add(name, values, predicate):
        ok = bool(values) and all(predicate(v) for v in values)
        checks.append((name, ok, ", ".join(f"{v:.2f}" for v in values)))

    small = min(r["nu"] for r in rows)
    large = max(r["nu"] for r in rows)
    if problem == "stokes":
        add("SV rates ~3 at nu=%g" % large, _rates(rows, "SV", large), lambda r: abs(r - 3) <= 0.2)
        add("SV rates ~3 at nu=%g" % small, _rates(rows, "SV", small), lambda r: abs(r - 3) <= 0.2)
        add("TH rates ~3 at nu=%g" % large, _rates(rows, "TH", large), lambda r: abs(r - 3) <= 0.2)
        add("TH rates ~1 at nu=%g" % small, _rates(rows, "TH", small, 16), lambda r: abs(r - 1) <= 0.2)
        add("MINI rates ~2 at nu=%g" % large, _rates(rows, "MINI", large), lambda r: abs(r - 2) <= 0.2)
        mini = _rates(rows, "MINI", small)
        add("MINI rates decay toward 1 at nu=%g" % small, mini[-1:], lambda r: r < 1.8)
        if mini:
            checks.append(("MINI rates non-increasing at nu=%g" % small,
                           all(b <= a + 0.05 for a, b in zip(mini, mini[1:])), ", ".join(f"{v:.2f}" for v in mini)))
        add("CR locks at nu=%g" % small, _rates(rows, "CR", small, 16), lambda r: abs(r) <= 0.15)
    else:
        add("SV rates >= 2.3 at nu=%g" % small, _rates(rows, "SV", small), lambda r: r >= 2.3)
        add("TH rates in [1.0, 1.3] at nu=%g" % small, _rates(rows, "TH", small, 32), lambda r: 1.0 <= r <= 1.3)
        add("MINI rates in [1.2, 1.9] at nu=%g" % small, _rates(rows, "MINI", small), lambda r: 1.2 <= r <= 1.9)
        cr = _rates(rows, "CR", small, 64)
        add("CR locks at nu=%g" % small, cr, lambda r: abs(r) <= 0.2)
    return checks


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lockfem", description=__doc__.splitlines()[0])
    p.add_argument("--problem", choices=["stokes", "chorin"], default="stokes")
    p.add_argument("--element", action="append", choices=ELEMENT_ORDER + [n.lower() for n in ELEMENT_ORDER],
                   help="element pair; repeat for several (default: all four)")
    p.add_argument("--nu", action="append", type=float, help="viscosity; repeat for several (default: 1 and 1e-6)")
    p.add_argument("--levels", type=lambda s: [int(v) for v in s.split(",")],
                   help="comma-separated levels L, reported as h = 1/L (default: 8,16,32,64)")
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--t-end", type=float, default=0.01)
    p.add_argument("--init", choices=["nodal", "helmholtz"], default="nodal")
    p.add_argument("--out", help="CSV output path (default: stdout)")
    p.add_argument("--check-tables", action="store_true", help="assert the qualitative table signature")
    p.add_argument("--deep", action="store_true", help="add the L=128 level")
    p.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    p.add_argument("--timing", action="store_true", help="fill the wall_ms column (output no longer byte-stable)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    levels = args.levels or list(DEFAULT_LEVELS)
    if args.deep and DEEP_LEVEL not in levels:
        levels.append(DEEP_LEVEL)
    config = ExperimentConfig(
        problem=args.problem,
        elements=[e.upper() for e in args.element] if args.element else list(ELEMENT_ORDER),
        nus=args.nu or [1.0, 1e-6],
        levels=levels,
        dt=args.dt,
        t_end=args.t_end,
        init_mode=args.init,
        output=args.out,
        workers=max(1, args.workers),
        timing=args.timing,
    )
    rows = run_study(config)
    text = format_csv(rows, timing=config.timing)
    if config.output:
        with open(config.output, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    failed = [r for r in rows if r["error"]]
    if failed:
        for r in failed:
            print(f"cell {r['element']} nu={r['nu']:g} n={r['n']} failed: {r['error']}", file=sys.stderr)
        return EXIT_CELL_FAILED
    if args.check_tables:
        results = check_tables(rows, config.problem)
        for name, ok, detail in results:
            print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}", file=sys.stderr)
        if not all(ok for _, ok, _ in results):
            return EXIT_CHECK_FAILED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
