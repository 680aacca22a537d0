"""Training protocol: single runs, restart experiments, and grid search.

A single run trains on the train folds only, early-stops on the change of
validation RMSE between consecutive iterations, and scores the test folds
once at the end.  Restart experiments repeat the run with derived seeds
(see ``restart_seed``) and optionally rotate the fold roles, then aggregate
RMSE and wall-clock over the restarts.

Wall-clock numbers cover the update sweeps only and are excluded from the
determinism guarantees: two runs from the same seeds agree on everything
except elapsed-time fields.
"""

from __future__ import annotations

import csv
import itertools
import time
from dataclasses import dataclass, field

import numpy as np

from . import jsonio

from .baseline import nlf_update_sweep
from .config import TrainConfig
from .errors import DivergenceError, SearchError
from .matrix import ShdiMatrix
from .metrics import rmse
from .split import SplitPlan, make_split
from .state import init_nlf_state, init_state
from .trainer import run_iteration, train_rmse_of

MODEL_KINDS = ("msnl", "nlf")

TERMINATION_ITERATION_CAP = "iteration-cap"
TERMINATION_RMSE_DELTA = "rmse-delta"
TERMINATION_DIVERGENCE = "divergence"


@dataclass
class IterationRecord:
    iteration: int
    train_rmse: float
    validation_rmse: float
    residual_qp: float | None
    residual_yx: float | None
    residual_px: float | None
    elapsed_s: float

    def to_dict(self, include_timing=True):
        data = {
            "iteration": self.iteration,
            "train_rmse": self.train_rmse,
            "validation_rmse": self.validation_rmse,
            "residual_qp": self.residual_qp,
            "residual_yx": self.residual_yx,
            "residual_px": self.residual_px,
        }
        if include_timing:
            data["elapsed_s"] = self.elapsed_s
        return data


@dataclass
class TrainReport:
    """Record of one training run."""

    model: str
    per_iteration: list[IterationRecord]
    termination: str
    final_test_rmse: float
    initial_validation_rmse: float
    config_echo: dict
    rotation: int
    fold_sizes: dict

    @property
    def final_validation_rmse(self) -> float:
        if not self.per_iteration:
            return self.initial_validation_rmse
        return self.per_iteration[-1].validation_rmse

    @property
    def total_time_s(self) -> float:
        return sum(rec.elapsed_s for rec in self.per_iteration)

    def to_dict(self, include_timing=True) -> dict:
        return {
            "model": self.model,
            "termination": self.termination,
            "final_test_rmse": self.final_test_rmse,
            "initial_validation_rmse": self.initial_validation_rmse,
            "config": self.config_echo,
            "rotation": self.rotation,
            "fold_sizes": self.fold_sizes,
            "per_iteration": [
                rec.to_dict(include_timing=include_timing)
                for rec in self.per_iteration
            ],
        }

    def write_json(self, path, include_timing=False):
        jsonio.dump(self.to_dict(include_timing=include_timing), path)

    def write_trace_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([
                "iteration", "train_rmse", "validation_rmse",
                "residual_qp", "residual_yx", "residual_px", "elapsed_s",
            ])
            for rec in self.per_iteration:
                writer.writerow([
                    rec.iteration,
                    repr(rec.train_rmse),
                    repr(rec.validation_rmse),
                    "" if rec.residual_qp is None else repr(rec.residual_qp),
                    "" if rec.residual_yx is None else repr(rec.residual_yx),
                    "" if rec.residual_px is None else repr(rec.residual_px),
                    repr(rec.elapsed_s),
                ])


@dataclass
class ExperimentSummary:
    """Aggregate over restarts of the same experiment."""

    per_restart: list[TrainReport]
    diverged_restarts: list[int]
    mean_rmse: float
    std_rmse: float
    mean_time_s: float
    std_time_s: float
    rotation_policy: str
    master_seed: int

    def to_dict(self, include_timing=True) -> dict:
        data = {
            "restarts": len(self.per_restart),
            "diverged_restarts": self.diverged_restarts,
            "mean_rmse": self.mean_rmse,
            "std_rmse": self.std_rmse,
            "rotation_policy": self.rotation_policy,
            "master_seed": self.master_seed,
            "per_restart": [
                r.to_dict(include_timing=include_timing) for r in self.per_restart
            ],
        }
        if include_timing:
            data["mean_time_s"] = self.mean_time_s
            data["std_time_s"] = self.std_time_s
        return data

    def write_json(self, path, include_timing=True):
        jsonio.dump(self.to_dict(include_timing=include_timing), path)


class AccessRecorder:
    """Collects the canonical entry ids the update rules read."""

    def __init__(self):
        self.entry_ids: set[int] = set()

    def update(self, ids):
        self.entry_ids.update(int(i) for i in np.asarray(ids).ravel())


def _entry_values(matrix: ShdiMatrix, positions) -> np.ndarray:
    return matrix.ent_weights[positions]


def _predict_entries(state, matrix: ShdiMatrix, positions) -> np.ndarray:
    return state.predict_pairs(matrix.ent_rows[positions], matrix.ent_cols[positions])


def evaluate_rmse(state, matrix: ShdiMatrix, positions) -> float:
    """RMSE of the state's predictions over the given canonical entries."""
    positions = np.asarray(positions, dtype=np.int64)
    return rmse(_entry_values(matrix, positions), _predict_entries(state, matrix, positions))


def train_once(matrix: ShdiMatrix, split: SplitPlan, config: TrainConfig,
               model: str = "msnl", recorder: AccessRecorder | None = None) -> TrainReport:
    """Run one training run under the cross-validation protocol.

    The trainer sees a matrix restricted to the train folds (penalty weights
    included), so validation and test entries never enter an update rule.
    Terminates at the iteration cap or as soon as the validation RMSE moves
    by less than ``config.tol`` between consecutive iterations (the
    pre-training validation RMSE seeds the comparison).  On divergence the
    raised error carries the partial report.

    Returns ``(report, trained_state)``.
    """
    if model not in MODEL_KINDS:
        raise ValueError(f"model must be one of {MODEL_KINDS}, got {model!r}")
    if split.entry_count != matrix.entry_count:
        raise ValueError(
            f"split covers {split.entry_count} entries but matrix has "
            f"{matrix.entry_count}"
        )

    train_idx = split.train_entries()
    val_idx = split.validation_entries()
    test_idx = split.test_entries()
    train_matrix = matrix.restricted_to(train_idx)

    if model == "msnl":
        state = init_state(train_matrix, config)
        step = lambda it: run_iteration(state, train_matrix, config,
                                        iteration=it, recorder=recorder)
    else:
        state = init_nlf_state(train_matrix, config)

        def step(it):
            nlf_update_sweep(state, train_matrix, config, iteration=it,
                             recorder=recorder)
            return None

    records: list[IterationRecord] = []
    fold_sizes = {
        "train": int(len(train_idx)),
        "validation": int(len(val_idx)),
        "test": int(len(test_idx)),
    }
    initial_val = evaluate_rmse(state, matrix, val_idx)
    previous_val = initial_val

    def report_so_far(termination):
        return TrainReport(
            model=model,
            per_iteration=records,
            termination=termination,
            final_test_rmse=float("nan"),
            initial_validation_rmse=initial_val,
            config_echo=config.to_dict(),
            rotation=split.rotation,
            fold_sizes=fold_sizes,
        )

    termination = TERMINATION_ITERATION_CAP
    for it in range(1, config.max_iters + 1):
        started = time.perf_counter()
        try:
            diag = step(it)
        except DivergenceError as err:
            err.report = report_so_far(TERMINATION_DIVERGENCE)
            raise
        elapsed = time.perf_counter() - started
        if diag is None:
            train_err = train_rmse_of(state, train_matrix)
            res_qp = res_yx = res_px = None
        else:
            train_err = diag.train_rmse
            res_qp, res_yx, res_px = (
                diag.residual_qp, diag.residual_yx, diag.residual_px
            )
        val_err = evaluate_rmse(state, matrix, val_idx)
        records.append(IterationRecord(
            iteration=it,
            train_rmse=train_err,
            validation_rmse=val_err,
            residual_qp=res_qp,
            residual_yx=res_yx,
            residual_px=res_px,
            elapsed_s=elapsed,
        ))
        if abs(val_err - previous_val) < config.tol:
            termination = TERMINATION_RMSE_DELTA
            break
        previous_val = val_err

    report = report_so_far(termination)
    report.final_test_rmse = evaluate_rmse(state, matrix, test_idx)
    return report, state


def restart_seed(master_seed: int, restart: int) -> int:
    """Seed for restart ``restart``: master_seed + 1 + restart."""
    return master_seed + 1 + restart


def run_experiment(matrix: ShdiMatrix, config: TrainConfig, restarts: int = 10,
                   rotation_policy: str = "rotate", model: str = "msnl",
                   split: SplitPlan | None = None) -> ExperimentSummary:
    """Repeat training over ``restarts`` random initializations.

    The tenfold assignment always comes from ``config.seed``; restart i
    trains with ``restart_seed(config.seed, i)`` and, under the "rotate"
    policy, fold roles rotated by i mod 10.  The "fixed" policy keeps
    roles constant so restarts differ only in initialization.  Diverged
    restarts are excluded from the aggregates and flagged.
    """
    if restarts < 1:
        raise ValueError("restarts must be at least 1")
    if rotation_policy not in ("rotate", "fixed"):
        raise ValueError("rotation_policy must be 'rotate' or 'fixed'")
    base_split = split if split is not None else make_split(matrix, config.seed)

    reports: list[TrainReport] = []
    diverged: list[int] = []
    for restart in range(restarts):
        rotation = restart % 10 if rotation_policy == "rotate" else base_split.rotation
        run_split = base_split.with_rotation(rotation)
        run_config = config.replace(seed=restart_seed(config.seed, restart))
        try:
            report, _ = train_once(matrix, run_split, run_config, model=model)
        except DivergenceError as err:
            diverged.append(restart)
            if err.report is not None:
                reports.append(err.report)
            continue
        reports.append(report)

    scored = [r for r in reports if r.termination != TERMINATION_DIVERGENCE]
    rmses = np.array([r.final_test_rmse for r in scored])
    times = np.array([r.total_time_s for r in scored])
    return ExperimentSummary(
        per_restart=reports,
        diverged_restarts=diverged,
        mean_rmse=float(rmses.mean()) if len(rmses) else float("nan"),
        std_rmse=float(rmses.std()) if len(rmses) else float("nan"),
        mean_time_s=float(times.mean()) if len(times) else float("nan"),
        std_time_s=float(times.std()) if len(times) else float("nan"),
        rotation_policy=rotation_policy,
        master_seed=config.seed,
    )


DEFAULT_SEARCH_GRID = {
    "lam": [0.005, 0.01, 0.05, 0.1, 0.5],
    "beta": [0.005, 0.01, 0.05, 0.1, 0.5],
}


@dataclass
class SearchResult:
    best_config: TrainConfig
    best_validation_rmse: float
    trace: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "best_config": self.best_config.to_dict(),
            "best_validation_rmse": self.best_validation_rmse,
            "trace": self.trace,
        }


def expand_grid(base: TrainConfig, grid: dict) -> list[TrainConfig]:
    """Cartesian product of grid values over config fields, in lexicographic
    order (fields alphabetical, values ascending).  The shorthand key
    "beta" sets beta1 and beta2 together."""
    if not grid:
        raise SearchError("empty hyperparameter grid")
    keys = sorted(grid)
    value_lists = [sorted(grid[k]) for k in keys]
    configs = []
    for combo in itertools.product(*value_lists):
        changes = {}
        for key, value in zip(keys, combo):
            if key == "beta":
                changes["beta1"] = value
                changes["beta2"] = value
            else:
                changes[key] = value
        configs.append(base.replace(**changes))
    return configs


def hyperparameter_search(matrix: ShdiMatrix, split: SplitPlan,
                          base_config: TrainConfig, grid: dict,
                          model: str = "msnl", budget: int | None = None) -> SearchResult:
    """Grid evaluation by final validation RMSE.

    ``budget`` truncates the (lexicographically ordered) enumeration.
    Diverged configurations are flagged in the trace and skipped; equal
    validation RMSEs resolve to the lexicographically smaller config.
    """
    candidates = expand_grid(base_config, grid)
    if budget is not None:
        candidates = candidates[:budget]

    trace: list[dict] = []
    best: tuple[float, tuple, TrainConfig] | None = None
    for candidate in candidates:
        entry = {"config": candidate.to_dict()}
        try:
            report, _ = train_once(matrix, split, candidate, model=model)
        except DivergenceError as err:
            entry["diverged"] = True
            entry["error"] = str(err)
            trace.append(entry)
            continue
        val = report.final_validation_rmse
        entry["diverged"] = False
        entry["validation_rmse"] = val
        entry["termination"] = report.termination
        trace.append(entry)
        key = (val, candidate.sort_key())
        if best is None or key < (best[0], best[1]):
            best = (val, candidate.sort_key(), candidate)
    if best is None:
        raise SearchError("every configuration in the grid diverged", trace=trace)
    return SearchResult(best_config=best[2], best_validation_rmse=best[0], trace=trace)
