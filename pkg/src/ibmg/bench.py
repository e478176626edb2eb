"""Benchmark harness: config parsing, sweeps, CSV output, field snapshots.

Configs are flat ``key = value`` text files; comma-separated values on the
sweepable keys (N, gamma, mu, rho, smoother, box, overlap) define a Cartesian
sweep.  Each sweep point runs one semi-implicit time step from rest and
appends one row per outer iteration to residuals.csv plus one summary row to
summary.csv.  A non-convergent run is a recorded outcome, not an error.
"""

from __future__ import annotations

import csv
import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .driver import Problem, StepResult, semi_implicit_step, setup_problem
from .fibers import make_suspension, make_thick_annulus, make_thin_membrane
from .smoothers import SmootherConfig

SUMMARY_COLUMNS = [
    "problem",
    "N",
    "gamma",
    "mu",
    "rho",
    "smoother",
    "box",
    "overlap",
    "nu1",
    "nu2",
    "wrap",
    "iterations",
    "converged",
    "final_relres",
    "wall_time_s",
]
RESIDUAL_COLUMNS = ["run_id", "iter", "relres"]

DEFAULT_CONFIG: dict[str, object] = {
    "problem": "thick",
    "N": [64],
    "gamma": [5.0],
    "mu": [1.0],
    "rho": [0.0],
    "smoother": ["sc"],
    "box": [8],
    "overlap": [2],
    "nu1": 1,
    "nu2": 1,
    "wrap": 2,
    "tol": 1e-12,
    "max_iters": 100,
    "seed": 2024,
    "jobs": 1,
    "out_dir": "ibmg_out",
    "record_walltime": True,
}

_LIST_KEYS = ("N", "gamma", "mu", "rho", "smoother", "box", "overlap")
_INT_KEYS = ("N", "box", "overlap", "nu1", "nu2", "wrap", "max_iters", "seed", "jobs")
_FLOAT_KEYS = ("gamma", "mu", "rho", "tol")
_BOOL_KEYS = ("record_walltime",)


def _coerce(key: str, raw: str):
    raw = raw.strip()
    if key in _BOOL_KEYS:
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"bad boolean for {key}: {raw!r}")
    if key in _INT_KEYS:
        return int(raw)
    if key in _FLOAT_KEYS:
        return float(raw)
    return raw


def parse_config(text: str) -> dict:
    """Parse flat key = value lines; '#' starts a comment."""
    cfg = dict(DEFAULT_CONFIG)
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value, got {line!r}")
        key, _, raw = line.partition("=")
        key = key.strip()
        if key not in DEFAULT_CONFIG:
            raise ValueError(f"line {lineno}: unknown config key {key!r}")
        if key in _LIST_KEYS:
            cfg[key] = [_coerce(key, item) for item in raw.split(",") if item.strip()]
        else:
            cfg[key] = _coerce(key, raw)
    return cfg


def load_config(path: str | Path) -> dict:
    return parse_config(Path(path).read_text())


def format_config(cfg: dict | None = None) -> str:
    cfg = dict(DEFAULT_CONFIG) if cfg is None else cfg
    lines = []
    for key, value in cfg.items():
        if isinstance(value, list):
            lines.append(f"{key} = {', '.join(str(v) for v in value)}")
        else:
            lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class SweepPoint:
    problem: str
    n: int
    gamma: float
    mu: float
    rho: float
    smoother: str
    box: int
    overlap: int

    def run_id(self) -> str:
        return (
            f"{self.problem}-N{self.n}-g{self.gamma:g}-mu{self.mu:g}"
            f"-rho{self.rho:g}-{self.smoother}-b{self.box}-o{self.overlap}"
        )


def sweep_points(cfg: dict) -> list[SweepPoint]:
    combos = itertools.product(
        cfg["N"], cfg["gamma"], cfg["mu"], cfg["rho"], cfg["smoother"], cfg["box"], cfg["overlap"]
    )
    return [SweepPoint(cfg["problem"], *combo) for combo in combos]


def build_meshes(problem: str, n: int, gamma: float, seed: int):
    if problem == "thick":
        return [make_thick_annulus(n, gamma)]
    if problem == "thin":
        return [make_thin_membrane(n, gamma)]
    if problem == "suspension":
        return make_suspension(n, gamma, seed)
    raise ValueError(f"unknown problem {problem!r}")


def run_point(point: SweepPoint, cfg: dict) -> tuple[StepResult, Problem]:
    """Build the problem for one sweep point and take one time step."""
    meshes = build_meshes(point.problem, point.n, point.gamma, int(cfg["seed"]))
    problem = setup_problem(meshes, point.n, mu=point.mu, rho=point.rho)
    smoother_cfg = SmootherConfig(
        kind=point.smoother,
        box_size=point.box,
        overlap=point.overlap,
        fgmres_iters=int(cfg["wrap"]),
    )
    result = semi_implicit_step(
        problem,
        problem.initial_state(),
        smoother_cfg,
        tol=float(cfg["tol"]),
        max_iters=int(cfg["max_iters"]),
        nu1=int(cfg["nu1"]),
        nu2=int(cfg["nu2"]),
    )
    return result, problem


def _summary_row(point: SweepPoint, cfg: dict, result: StepResult) -> list[str]:
    rep = result.report
    wall = rep.wall_time if cfg.get("record_walltime", True) else 0.0
    return [
        point.problem,
        str(point.n),
        f"{point.gamma:.17g}",
        f"{point.mu:.17g}",
        f"{point.rho:.17g}",
        point.smoother,
        str(point.box),
        str(point.overlap),
        str(cfg["nu1"]),
        str(cfg["nu2"]),
        str(cfg["wrap"]),
        str(rep.iterations),
        str(bool(rep.converged)).lower(),
        f"{rep.residual_history[-1]:.17g}",
        f"{wall:.6f}",
    ]


def run_experiment(config: dict | str | Path, out_dir: str | Path | None = None) -> int:
    """Run the sweep described by a config dict or file; write both CSVs."""
    cfg = load_config(config) if isinstance(config, (str, Path)) else dict(config)
    out = Path(out_dir if out_dir is not None else cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    points = sweep_points(cfg)
    jobs = max(1, int(cfg.get("jobs", 1)))
    if jobs > 1 and len(points) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(lambda pt: run_point(pt, cfg)[0], points))
    else:
        results = [run_point(pt, cfg)[0] for pt in points]

    with open(out / "summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for point, result in zip(points, results):
            writer.writerow(_summary_row(point, cfg, result))
    with open(out / "residuals.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESIDUAL_COLUMNS)
        for point, result in zip(points, results):
            rid = point.run_id()
            for it, relres in enumerate(result.report.residual_history):
                writer.writerow([rid, str(it), f"{relres:.17g}"])
    return 0


SNAPSHOT_COLUMNS = ["field", "i", "j", "x", "y", "value"]


def snapshot_fields(result: StepResult, problem: Problem, path: str | Path) -> None:
    """Write u, p and node positions as one plain-text CSV.

    Rows are (field, i, j, x, y, value) with field in {u1, u2, p, node_x,
    node_y}; node rows use i = node index, j = 0.  Values carry 17
    significant digits so a round trip reproduces the arrays bitwise.
    """
    lv = problem.grid.finest
    h = lv.h
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SNAPSHOT_COLUMNS)

        def write_grid(name, arr, x_of, y_of):
            ni, nj = arr.shape
            for i in range(ni):
                for j in range(nj):
                    writer.writerow(
                        [name, i, j, f"{x_of(i):.17g}", f"{y_of(j):.17g}", f"{arr[i, j]:.17g}"]
                    )

        write_grid("u1", result.u.u1, lambda i: i * h, lambda j: (j + 0.5) * h)
        write_grid("u2", result.u.u2, lambda i: (i + 0.5) * h, lambda j: j * h)
        write_grid("p", result.p, lambda i: (i + 0.5) * h, lambda j: (j + 0.5) * h)
        for k, (x, y) in enumerate(result.positions):
            writer.writerow(["node_x", k, 0, f"{x:.17g}", f"{y:.17g}", f"{x:.17g}"])
            writer.writerow(["node_y", k, 0, f"{x:.17g}", f"{y:.17g}", f"{y:.17g}"])


def read_snapshot(path: str | Path) -> dict[str, np.ndarray]:
    """Round-trip reader for snapshot files; returns arrays keyed by field."""
    rows: dict[str, list[tuple[int, int, float]]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != SNAPSHOT_COLUMNS:
            raise ValueError(f"unexpected snapshot header: {header}")
        for field_name, i, j, _x, _y, value in reader:
            rows.setdefault(field_name, []).append((int(i), int(j), float(value)))
    out = {}
    for name, entries in rows.items():
        ni = max(e[0] for e in entries) + 1
        nj = max(e[1] for e in entries) + 1
        arr = np.empty((ni, nj))
        for i, j, v in entries:
            arr[i, j] = v
        out[name] = arr if nj > 1 else arr[:, 0]
    return out
