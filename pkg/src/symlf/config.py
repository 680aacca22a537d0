"""Training configuration shared by both trainers."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters and run settings for a single training run.

    ``lam`` is the L2 regularization coefficient, ``beta1``/``beta2`` scale
    the per-row penalty weights, ``eta`` is the dual ascent step.  ``tol``
    is the early-stop threshold on the change of validation RMSE between
    consecutive iterations.
    """

    dim: int = 20
    lam: float = 0.05
    beta1: float = 0.05
    beta2: float = 0.05
    eta: float = 1.0
    max_iters: int = 1000
    tol: float = 1e-5
    seed: int = 0
    init_scale: float = 0.04

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be at least 1")
        for name in ("lam", "beta1", "beta2", "eta", "init_scale"):
            value = getattr(self, name)
            if not value > 0 or not math.isfinite(value):
                raise ValueError(f"{name} must be strictly positive, got {value!r}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.tol < 0 or math.isnan(self.tol):
            raise ValueError("tol must be nonnegative")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")

    def replace(self, **changes) -> "TrainConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)

    def sort_key(self):
        """Lexicographic ordering key (field order) used for tie-breaks."""
        return tuple(getattr(self, f.name) for f in fields(self))
