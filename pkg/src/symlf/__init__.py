"""Symmetric nonnegative latent-factor learning for incomplete undirected weighted networks."""

__version__ = "0.1.0"

from .config import TrainConfig
from .errors import (
    DataFormatError,
    DivergenceError,
    SearchError,
    ShapeMismatchError,
    SymlfError,
)
from .matrix import ShdiMatrix, ingest_edge_list, ingest_matrix_market
from .metrics import rmse
from .split import SplitPlan, make_split
from .state import FactorState, NlfState, init_nlf_state, init_state

__all__ = [
    "DataFormatError",
    "DivergenceError",
    "FactorState",
    "NlfState",
    "SearchError",
    "ShapeMismatchError",
    "ShdiMatrix",
    "SplitPlan",
    "SymlfError",
    "TrainConfig",
    "__version__",
    "ingest_edge_list",
    "ingest_matrix_market",
    "init_nlf_state",
    "init_state",
    "make_split",
    "rmse",
]
