"""Batch experiment runner: configs, result rows and table output."""

from __future__ import annotations

import csv
import dataclasses
import io
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ros2 import ros2_integrate, reference_solution, relative_error
from .sparse import Work, one_norm
from .wr import ConvergenceTrace, WrDivergenceError, WrParams, wr_solve_windows

log = logging.getLogger(__name__)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ReportRow",
    "RunResult",
    "parse_config_text",
    "load_config",
    "build_problem",
    "run",
    "run_batch",
    "emit",
    "parse_csv",
    "bench_suite",
]

PROBLEMS = ("burgers", "bratu", "heat")
METHODS = ("wr-ebk", "ros2", "reference")


class ConfigError(ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, field_name: str, msg: str):
        super().__init__(f"{field_name}: {msg}")
        self.field = field_name


@dataclass
class ExperimentConfig:
    problem: str = "burgers"
    method: str = "wr-ebk"
    label: str = ""
    # problem parameters
    N: int = 500
    nu: float = 3e-4
    n: int = 20
    n_x: int = 20
    n_y: int = 20
    n_z: int = 20
    T: float = 0.5
    windows: int = 1
    # WR / EBK parameters
    tol: float = 1e-3
    stop_mode: str = ""            # default per problem
    inner_stop_mode: str = ""      # default per problem
    m: int = 0                     # default per problem
    m_first: int = 1
    n_s: int = 100
    krylov_dim: int = 10
    gamma: float = 0.0             # 0 means T/10 per window
    max_outer: int = 100
    # ROS2 / reference
    steps: int = 0
    ref_accuracy: float = 1e-6
    ref_start_steps: int = 64
    # diagnostics
    seed: int = 0
    snapshot: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.problem not in PROBLEMS:
            raise ConfigError("problem", f"must be one of {', '.join(PROBLEMS)}, got {self.problem!r}")
        if self.method not in METHODS:
            raise ConfigError("method", f"must be one of {', '.join(METHODS)}, got {self.method!r}")
        if self.T <= 0:
            raise ConfigError("T", "must be positive")
        if self.windows < 1:
            raise ConfigError("windows", "must be >= 1")
        if self.problem == "burgers":
            if self.N < 3:
                raise ConfigError("N", "Burgers needs N >= 3")
            if self.nu <= 0:
                raise ConfigError("nu", "must be positive")
        if self.problem == "bratu" and self.n < 4:
            raise ConfigError("n", "Bratu needs n >= 4")
        if self.problem == "heat":
            for name in ("n_x", "n_y", "n_z"):
                if getattr(self, name) < 4:
                    raise ConfigError(name, "heat grid needs >= 4 nodes per axis")
        if self.tol <= 0:
            raise ConfigError("tol", "must be positive")
        if self.stop_mode not in ("", "absolute", "relative"):
            raise ConfigError("stop_mode", "must be absolute or relative")
        if self.inner_stop_mode not in ("", "absolute", "scaled"):
            raise ConfigError("inner_stop_mode", "must be absolute or scaled")
        if self.m < 0 or self.m > self.n_s:
            raise ConfigError("m", "must satisfy 0 <= m <= n_s (0 selects the problem default)")
        if self.m_first < 1:
            raise ConfigError("m_first", "must be >= 1")
        if self.n_s < 3:
            raise ConfigError("n_s", "needs at least 3 sample points")
        if self.krylov_dim < 1:
            raise ConfigError("krylov_dim", "must be >= 1")
        if self.gamma < 0:
            raise ConfigError("gamma", "must be >= 0")
        if self.method == "ros2" and self.steps < 1:
            raise ConfigError("steps", "ros2 needs steps >= 1")
        if self.ref_accuracy < 1e-10:
            raise ConfigError("ref_accuracy", "must be >= 1e-10")

    @property
    def display_label(self) -> str:
        if self.label:
            return self.label
        if self.method == "wr-ebk":
            return f"nonlin.EBK(m={self.wr_params().m}), {self.windows} t.s., {self.tol:.0e}"
        if self.method == "ros2":
            return f"ROS2, tau=T/{self.steps}"
        return "reference"

    def problem_key(self) -> tuple:
        if self.problem == "burgers":
            return ("burgers", self.N, self.nu, self.T)
        if self.problem == "bratu":
            return ("bratu", self.n, self.T)
        return ("heat", self.n_x, self.n_y, self.n_z, self.T)

    def wr_params(self) -> WrParams:
        # Burgers: absolute outer and inner stops, m = 7; the 3D problems
        # use the relative outer stop and the source-scaled inner stop
        one_d = self.problem == "burgers"
        return WrParams(
            tol=self.tol,
            stop_mode=self.stop_mode or ("absolute" if one_d else "relative"),
            inner_stop_mode=self.inner_stop_mode or ("absolute" if one_d else "scaled"),
            m=self.m or (7 if one_d else 5),
            m_first=self.m_first,
            n_s=self.n_s,
            krylov_dim=self.krylov_dim,
            gamma=self.gamma or None,
            max_outer=self.max_outer,
        )


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}


def _convert(key: str, raw: str):
    if key not in _FIELD_TYPES:
        raise ConfigError(key, "unknown configuration key")
    kind = _FIELD_TYPES[key]
    raw = raw.strip()
    try:
        if kind == "int":
            try:
                return int(raw)
            except ValueError:
                val = float(raw)            # accept "1e3"
                if not val.is_integer():
                    raise
                return int(val)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
    except ValueError:
        raise ConfigError(key, f"cannot parse {raw!r} as {kind}") from None
    return raw


def parse_config_text(text: str, overrides: list[str] | None = None) -> ExperimentConfig:
    """Parse ``key = value`` lines (``#`` starts a comment) and apply
    ``key=value`` overrides in order."""
    values: dict = {}
    pairs: list[tuple[str, str, str]] = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {line!r}")
        k, v = line.split("=", 1)
        pairs.append((k.strip(), v, f"line {lineno}"))
    for ov in overrides or []:
        if "=" not in ov:
            raise ConfigError("--set", f"expected key=value, got {ov!r}")
        k, v = ov.split("=", 1)
        pairs.append((k.strip(), v, "--set"))
    for k, v, _ in pairs:
        values[k] = _convert(k, v)
    return ExperimentConfig(**values)


def load_config(path: str | Path, overrides: list[str] | None = None) -> ExperimentConfig:
    return parse_config_text(Path(path).read_text(), overrides)


def build_problem(cfg: ExperimentConfig):
    if cfg.problem == "burgers":
        from .problems.burgers import burgers_build
        return burgers_build(cfg.N, cfg.nu, cfg.T)
    if cfg.problem == "bratu":
        from .problems.bratu import bratu_build
        return bratu_build(cfg.n, cfg.T)
    from .problems.heat import heat_build
    return heat_build(cfg.n_x, cfg.n_y, cfg.n_z, cfg.T)


@dataclass
class ReportRow:
    """One line of a results table."""

    method: str
    iterations: int
    lu: int
    lu_applications: int
    matvecs_fevals: int
    rel_error: float
    wall_time: float
    status: str = "ok"
    problem: str = ""

    @property
    def work_cell(self) -> str:
        return f"{self.lu} ({self.lu_applications}), {self.matvecs_fevals}"

    def deterministic(self) -> tuple:
        """Every field except the wall time."""
        return (self.method, self.iterations, self.lu, self.lu_applications,
                self.matvecs_fevals, self.rel_error, self.status, self.problem)


@dataclass
class RunResult:
    row: ReportRow
    y: np.ndarray | None = None
    trace: ConvergenceTrace | None = None
    stiffness: float | None = None      # T * ||A_k||_1 at the final state
    error: str = ""


@dataclass
class _RefCache:
    store: dict = field(default_factory=dict)

    def get(self, cfg: ExperimentConfig, problem) -> np.ndarray:
        key = cfg.problem_key() + (cfg.ref_accuracy,)
        if key not in self.store:
            ref = reference_solution(problem.rhs, problem.jac, problem.v, problem.T,
                                     target_accuracy=cfg.ref_accuracy, start_steps=cfg.ref_start_steps)
            self.store[key] = ref
        return self.store[key]


def _problem_label(cfg: ExperimentConfig) -> str:
    if cfg.problem == "burgers":
        return f"burgers N={cfg.N} nu={cfg.nu:g} T={cfg.T:g}"
    if cfg.problem == "bratu":
        return f"bratu {cfg.n}^3 T={cfg.T:g}"
    return f"heat {cfg.n_x}x{cfg.n_y}x{cfg.n_z} T={cfg.T:g}"


def run(cfg: ExperimentConfig, cache: _RefCache | None = None, y_ref: np.ndarray | None = None) -> RunResult:
    """Execute one configured run.

    Solver failures are returned as a row with ``status`` other than
    ``ok`` rather than raised.
    """
    cache = cache if cache is not None else _RefCache()
    problem = build_problem(cfg)
    plabel = _problem_label(cfg)
    label = cfg.display_label

    def failed(msg: str, status: str, trace=None, y=None, t=0.0) -> RunResult:
        log.error("%s / %s failed: %s", plabel, label, msg)
        iters = trace.iterations if trace is not None else 0
        w = trace.work if trace is not None else Work()
        err = relative_error(y, y_ref) if (y is not None and y_ref is not None) else float("nan")
        row = ReportRow(label, iters, w.lu, w.lu_applications, w.matvecs, err, t, status, plabel)
        return RunResult(row=row, y=y, trace=trace, error=msg)

    if cfg.method == "reference":
        t0 = time.perf_counter()
        try:
            ref = cache.get(cfg, problem)
        except (RuntimeError, FloatingPointError) as exc:
            return failed(str(exc), "failed", t=time.perf_counter() - t0)
        row = ReportRow(label, ref.steps, ref.work.lu, ref.work.lu_applications, ref.work.fevals,
                        0.0, time.perf_counter() - t0, "ok", plabel)
        return RunResult(row=row, y=ref.y)

    if y_ref is None:
        try:
            y_ref = cache.get(cfg, problem).y
        except (RuntimeError, FloatingPointError) as exc:
            return failed(f"reference: {exc}", "failed")

    t0 = time.perf_counter()
    if cfg.method == "ros2":
        try:
            res = ros2_integrate(problem.rhs, problem.jac, problem.v, problem.T, cfg.steps)
        except Exception as exc:  # factorization failure or blow-up
            return failed(str(exc), "failed", t=time.perf_counter() - t0)
        dt = time.perf_counter() - t0
        w = res.work
        row = ReportRow(label, res.steps, w.lu, w.lu_applications, w.fevals,
                        relative_error(res.y, y_ref), dt, "ok", plabel)
        return RunResult(row=row, y=res.y)

    try:
        sols, trace = wr_solve_windows(problem, cfg.wr_params(), cfg.windows, y_ref=y_ref)
    except WrDivergenceError as exc:
        y = exc.solution.final() if exc.solution is not None else None
        return failed(str(exc), "not converged", exc.trace, y, time.perf_counter() - t0)
    except Exception as exc:
        return failed(f"{type(exc).__name__}: {exc}", "failed", t=time.perf_counter() - t0)
    dt = time.perf_counter() - t0
    y = sols[-1].final()
    w = trace.work
    # matvecs column: one outer iteration = one product with A_k
    row = ReportRow(label, trace.iterations, w.lu, w.lu_applications, w.matvecs,
                    relative_error(y, y_ref), dt, "ok" if trace.converged else "not converged", plabel)
    A_T = problem.build_A(y)
    return RunResult(row=row, y=y, trace=trace, stiffness=problem.T * one_norm(A_T))


def run_batch(configs: list[ExperimentConfig], out_dir: str | Path | None = None,
              fmt: str = "markdown") -> tuple[list[RunResult], str]:
    """Run configs in order, sharing reference solutions, and optionally
    write the report, per-run traces and snapshots to ``out_dir``."""
    cache = _RefCache()
    results = [run(cfg, cache) for cfg in configs]
    text = emit([r.row for r in results], fmt)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / ("report.md" if fmt == "markdown" else "report.csv")).write_text(text)
        for i, (cfg, res) in enumerate(zip(configs, results)):
            stem = f"run{i:02d}_{cfg.problem}_{cfg.method}"
            if res.trace is not None:
                (out / f"{stem}_trace.csv").write_text(res.trace.to_csv())
            if cfg.snapshot and res.y is not None:
                write_snapshot(out / f"{stem}_snapshot.txt", cfg, res.y)
    return results, text


def write_snapshot(path: Path, cfg: ExperimentConfig, y: np.ndarray) -> None:
    """Plain-text grid of the final state (a mid-plane slice for 3D)."""
    if cfg.problem == "burgers":
        x = np.arange(1, cfg.N + 1) / (cfg.N + 1)
        np.savetxt(path, np.column_stack([x, y]), header="x u", fmt="%.10e")
        return
    if cfg.problem == "bratu":
        grid = y.reshape(cfg.n, cfg.n, cfg.n)
    else:
        grid = y.reshape(cfg.n_z, cfg.n_y, cfg.n_x)
    k = grid.shape[0] // 2
    np.savetxt(path, grid[k], header=f"z-slice {k} (rows: y, cols: x)", fmt="%.10e")


CSV_COLUMNS = ["problem", "method", "iterations", "lu", "lu_applications", "matvecs_fevals",
               "rel_error", "wall_time", "status"]
MD_HEADER = ["method", "iter./steps", "LUs (LUs applic.), matvecs/fevals", "relative error", "CPU time, s"]


def emit(rows: list[ReportRow], fmt: str = "markdown") -> str:
    """Render rows as ``csv`` or a five-column ``markdown`` table.

    Errors and times are printed in scientific notation with three
    significant digits.
    """
    if not rows:
        raise ValueError("emit needs at least one row")
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow([r.problem, r.method, r.iterations, r.lu, r.lu_applications, r.matvecs_fevals,
                        f"{r.rel_error:.2e}", f"{r.wall_time:.2e}", r.status])
        return buf.getvalue()
    if fmt != "markdown":
        raise ValueError(f"unknown format {fmt!r}")
    lines = ["| " + " | ".join(MD_HEADER) + " |", "|" + "---|" * len(MD_HEADER)]
    current = None
    for r in rows:
        if r.problem != current and r.problem:
            lines.append(f"| **{r.problem}** | | | | |")
            current = r.problem
        method = r.method if r.status == "ok" else f"{r.method} [{r.status}]"
        lines.append(f"| {method} | {r.iterations} | {r.work_cell} | {r.rel_error:.2e} | {r.wall_time:.2e} |")
    return "\n".join(lines) + "\n"


def parse_csv(text: str) -> list[ReportRow]:
    """Inverse of ``emit(rows, "csv")`` (values at printed precision)."""
    rows = []
    for rec in csv.DictReader(io.StringIO(text)):
        rows.append(ReportRow(
            method=rec["method"], iterations=int(rec["iterations"]), lu=int(rec["lu"]),
            lu_applications=int(rec["lu_applications"]), matvecs_fevals=int(rec["matvecs_fevals"]),
            rel_error=float(rec["rel_error"]), wall_time=float(rec["wall_time"]),
            status=rec["status"], problem=rec["problem"]))
    return rows


SUITES = ("burgers", "bratu", "heat")


def bench_suite(name: str) -> list[ExperimentConfig]:
    """Desk-scale run lists mirroring the result tables."""
    if name == "burgers":
        cfgs = []
        for T in (0.5, 1.0, 1.5):
            cfgs.append(ExperimentConfig(problem="burgers", method="wr-ebk", N=500, T=T))
            cfgs.append(ExperimentConfig(problem="burgers", method="ros2", N=500, T=T, steps=500))
        for nu in (3e-4, 3e-5):
            for T in (0.5, 1.0):
                cfgs.append(ExperimentConfig(problem="burgers", method="wr-ebk", N=1000, nu=nu, T=T))
        return cfgs
    if name == "bratu":
        cfgs = []
        for T in (2.5e-5, 5e-5, 1e-4):
            cfgs.append(ExperimentConfig(problem="bratu", method="wr-ebk", n=20, T=T, tol=1e-3,
                                         ref_accuracy=1e-5, ref_start_steps=40))
        cfgs.append(ExperimentConfig(problem="bratu", method="ros2", n=20, T=5e-5, steps=80,
                                     ref_accuracy=1e-5, ref_start_steps=40))
        return cfgs
    if name == "heat":
        return [
            ExperimentConfig(problem="heat", method="wr-ebk", T=0.005, tol=1e-3, m=8,
                             ref_accuracy=1e-4, ref_start_steps=16),
            ExperimentConfig(problem="heat", method="ros2", T=0.005, steps=50,
                             ref_accuracy=1e-4, ref_start_steps=16),
        ]
    raise ValueError(f"unknown suite {name!r}; known suites: {sorted(SUITES)}")
