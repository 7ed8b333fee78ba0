"""Monte Carlo experiments: configuration, parallel runs, aggregation, CSV."""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np

from ..errors import ContractViolation
from ..estimators import ESTIMATOR_KINDS
from ..games import GameDefinition, game_from_config
from ..learner import BatchTrajectory, Schedule, make_schedule, run_batch
from ..solvers import solve_ne

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("t", "mean_sq_dist", "stderr", "sigma", "rho", "gamma")
REFERENCE_MODES = ("auto", "closed_form", "solver")


@dataclass
class ExperimentConfig:
    game: dict = field(default_factory=lambda: {"game": "canonical_quadratic"})
    estimator: str = "two_point"
    schedule: dict = field(default_factory=lambda: {"mode": "theorem2"})
    horizon: int = 10_000
    runs: int = 10
    seed: int = 0
    checkpoints: int = 64
    init: Union[str, list] = "anchor"
    out: Optional[str] = None
    reference: str = "auto"
    workers: int = 1

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ContractViolation("experiment configuration must be a mapping")
        known = {f.name for f in fields(cls)}
        # Sections read by other subcommands are allowed alongside.
        extra = set(data) - known - {"diagnostics"}
        if extra:
            raise ContractViolation(f"unknown configuration keys: {sorted(extra)}")
        cfg = cls(**{k: v for k, v in data.items() if k in known})
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        return cls.from_dict(load_config(path))

    def validate(self) -> None:
        if self.estimator not in ESTIMATOR_KINDS:
            raise ContractViolation(f"estimator must be one of {ESTIMATOR_KINDS}, got {self.estimator!r}")
        if int(self.horizon) < 2:
            raise ContractViolation(f"horizon must be at least 2, got {self.horizon}")
        if int(self.runs) < 1:
            raise ContractViolation(f"runs must be at least 1, got {self.runs}")
        if int(self.seed) < 0:
            raise ContractViolation(f"seed must be non-negative, got {self.seed}")
        if int(self.checkpoints) < 3:
            raise ContractViolation(f"checkpoints must be at least 3, got {self.checkpoints}")
        if int(self.workers) < 1:
            raise ContractViolation(f"workers must be at least 1, got {self.workers}")
        if self.reference not in REFERENCE_MODES:
            raise ContractViolation(f"reference must be one of {REFERENCE_MODES}, got {self.reference!r}")
        if not isinstance(self.schedule, dict) or "mode" not in self.schedule:
            raise ContractViolation("schedule must be a mapping with a 'mode' key")
        # Building the sub-objects runs their own validation.
        game = self.build_game()
        self.build_schedule(game)

    def build_game(self) -> GameDefinition:
        return game_from_config(self.game)

    def build_schedule(self, game: GameDefinition) -> Schedule:
        params = dict(self.schedule)
        mode = params.pop("mode")
        nu = params.pop("nu_override", None)
        return make_schedule(mode, game.nu if nu is None else float(nu), **params)

    def to_dict(self) -> dict:
        return asdict(self)


def load_config(path) -> dict:
    """Read a JSON configuration file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise OSError(f"cannot read configuration {path}: {exc.strerror or exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ContractViolation(f"configuration {path} is not valid JSON: {exc}") from None


def resolve_reference(game: GameDefinition, mode: str = "auto"):
    """Equilibrium used as the distance reference and how it was obtained."""
    if mode in ("auto", "closed_form"):
        point = game.closed_form_equilibrium()
        if point is not None:
            return point, "closed_form"
        if mode == "closed_form":
            raise ContractViolation("no feasible closed-form equilibrium for this game; use reference='solver'")
    result = solve_ne(game, tol=1e-10)
    if not result.converged:
        raise ContractViolation(f"equilibrium solver did not converge (residual {result.residual:.3g})")
    return result.point, "solver"


@dataclass
class RateTable:
    """Per-checkpoint aggregate over runs."""

    t: np.ndarray
    mean_sq_dist: np.ndarray
    stderr: np.ndarray
    sigma: np.ndarray
    rho: np.ndarray
    gamma: np.ndarray

    def __len__(self) -> int:
        return len(self.t)

    @classmethod
    def empty(cls) -> "RateTable":
        return cls(*(np.empty(0) for _ in CSV_COLUMNS))

    def rows(self):
        for i in range(len(self)):
            yield tuple(getattr(self, c)[i] for c in CSV_COLUMNS)


@dataclass
class ExperimentResult:
    table: RateTable
    per_run: np.ndarray      # (runs, checkpoints) squared distances, sorted by run index
    run_indices: np.ndarray
    metadata: dict


def streaming_moments(values: np.ndarray):
    """Welford mean and standard error along axis 0, rows taken in order."""
    n = 0
    mean = np.zeros(values.shape[1:])
    m2 = np.zeros(values.shape[1:])
    for row in values:
        n += 1
        delta = row - mean
        mean = mean + delta / n
        m2 = m2 + delta * (row - mean)
    if n < 2:
        return mean, np.full_like(mean, np.nan)
    return mean, np.sqrt(m2 / (n - 1) / n)


def _run_chunk(args):
    game, schedule, kind, horizon, reference, seed, runs, init, checkpoints = args
    return run_batch(game, schedule, kind, horizon, reference, seed, runs, init, checkpoints)


def _chunks(items: Sequence[int], n_chunks: int) -> List[List[int]]:
    n_chunks = max(1, min(n_chunks, len(items)))
    size = math.ceil(len(items) / n_chunks)
    return [list(items[i:i + size]) for i in range(0, len(items), size)]


def run_experiment(config: ExperimentConfig, run_indices: Optional[Sequence[int]] = None,
                   workers: Optional[int] = None) -> ExperimentResult:
    """Execute all runs and aggregate squared distances per checkpoint.

    Run ``r`` draws its noise from keys derived from ``(seed, r)``, and
    aggregation happens in increasing run-index order, so neither the order
    of ``run_indices`` nor the worker count affects the output.
    """
    game = config.build_game()
    schedule = config.build_schedule(game)
    reference, ref_mode = resolve_reference(game, config.reference)
    indices = sorted(int(r) for r in (range(config.runs) if run_indices is None else run_indices))
    if len(set(indices)) != len(indices):
        raise ContractViolation("run indices must be distinct")
    n_workers = config.workers if workers is None else workers
    jobs = [(game, schedule, config.estimator, int(config.horizon), reference, int(config.seed), chunk,
             config.init, int(config.checkpoints)) for chunk in _chunks(indices, n_workers)]
    logger.info("running %d runs of %d iterations on %d worker(s)", len(indices), config.horizon, len(jobs))
    if len(jobs) == 1:
        batches = [_run_chunk(jobs[0])]
    else:
        with ProcessPoolExecutor(max_workers=len(jobs)) as pool:
            batches = list(pool.map(_run_chunk, jobs))
    per_run = np.concatenate([b.sq_dist for b in batches], axis=0)
    order = np.argsort(np.concatenate([b.run_indices for b in batches]), kind="stable")
    per_run = per_run[order]
    first: BatchTrajectory = batches[0]
    mean, stderr = streaming_moments(per_run)
    table = RateTable(first.t.copy(), mean, stderr, first.sigma, first.rho, first.gamma)
    metadata = {
        "game": game.describe(),
        "estimator": config.estimator,
        "schedule": schedule.to_dict(),
        "horizon": int(config.horizon),
        "runs": len(indices),
        "seed": int(config.seed),
        "reference_mode": ref_mode,
        "reference": np.asarray(reference).tolist(),
    }
    return ExperimentResult(table, per_run, np.asarray(indices), metadata)


def _fmt(value) -> str:
    return format(float(value), ".17g")


def export_csv(table: RateTable, path) -> Path:
    """Write ``t,mean_sq_dist,stderr,sigma,rho,gamma`` with 17 significant digits."""
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for row in table.rows():
                writer.writerow([str(int(row[0]))] + [_fmt(v) for v in row[1:]])
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc.strerror or exc}") from exc
    return path


def read_csv(path) -> RateTable:
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            rows = list(reader)
    except OSError as exc:
        raise OSError(f"cannot read CSV {path}: {exc.strerror or exc}") from exc
    if header is None or tuple(header) != CSV_COLUMNS:
        raise ContractViolation(f"{path} does not have header {','.join(CSV_COLUMNS)}")
    if not rows:
        return RateTable.empty()
    if any(len(r) != len(CSV_COLUMNS) for r in rows):
        raise ContractViolation(f"{path} has rows with the wrong number of fields")
    cols = list(zip(*rows))
    try:
        return RateTable(np.array(cols[0], dtype=np.int64), *(np.array(c, dtype=float) for c in cols[1:]))
    except ValueError as exc:
        raise ContractViolation(f"{path} has a malformed value: {exc}") from None


def write_metadata(metadata: dict, path) -> Path:
    path = Path(path)
    try:
        path.write_text(json.dumps(metadata, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write metadata to {path}: {exc.strerror or exc}") from exc
    return path
