"""Trainable factor states and their on-disk container.

The constrained trainer owns seven matrices: unconstrained factors Q and Y
entering the loss, nonnegative factors P and X carrying the nonnegativity
and symmetry constraints, and duals U, V, W for the couplings Q=P, Y=X and
P=X.  The plain baseline keeps only P and X.

Factor files use a small versioned binary container (magic, JSON header,
raw float64 blocks) chosen so that save/load round-trips bit-exactly and
identical states serialize to identical bytes.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .config import TrainConfig
from .errors import DataFormatError
from .matrix import ShdiMatrix

_MAGIC = b"SYMLF1\n"


def _check_pair(node_count, m, n):
    if not (0 <= m < node_count and 0 <= n < node_count):
        raise IndexError(
            f"node index out of range: ({m}, {n}) with {node_count} nodes"
        )


@dataclass
class FactorState:
    """State of the multi-constrained trainer. All matrices are |N| x D."""

    Q: np.ndarray
    Y: np.ndarray
    P: np.ndarray
    X: np.ndarray
    U: np.ndarray
    V: np.ndarray
    W: np.ndarray
    theta1: np.ndarray
    theta2: np.ndarray

    MODEL = "msnl"
    ARRAY_NAMES = ("Q", "Y", "P", "X", "U", "V", "W", "theta1", "theta2")

    @property
    def node_count(self) -> int:
        return self.Q.shape[0]

    @property
    def dim(self) -> int:
        return self.Q.shape[1]

    def predict(self, m: int, n: int) -> float:
        """Estimated weight for pair (m, n): the symmetric form X[m] . X[n]."""
        _check_pair(self.node_count, m, n)
        return float(self.X[m] @ self.X[n])

    def predict_pairs(self, ms, ns) -> np.ndarray:
        ms = np.asarray(ms, dtype=np.int64)
        ns = np.asarray(ns, dtype=np.int64)
        if len(ms) and (min(ms.min(), ns.min()) < 0
                        or max(ms.max(), ns.max()) >= self.node_count):
            raise IndexError("node index out of range")
        return np.einsum("ij,ij->i", self.X[ms], self.X[ns])

    def diagnostic_qy(self, m: int, n: int) -> float:
        """The unconstrained-factor product Q[m] . Y[n] (diagnostic only)."""
        _check_pair(self.node_count, m, n)
        return float(self.Q[m] @ self.Y[n])

    def copy(self) -> "FactorState":
        return FactorState(*(getattr(self, name).copy() for name in self.ARRAY_NAMES))


@dataclass
class NlfState:
    """State of the plain nonnegative baseline: factors P and X only."""

    P: np.ndarray
    X: np.ndarray

    MODEL = "nlf"
    ARRAY_NAMES = ("P", "X")

    @property
    def node_count(self) -> int:
        return self.P.shape[0]

    @property
    def dim(self) -> int:
        return self.P.shape[1]

    def predict(self, m: int, n: int) -> float:
        """Estimated weight P[m] . X[n]; not symmetric in general."""
        _check_pair(self.node_count, m, n)
        return float(self.P[m] @ self.X[n])

    def predict_pairs(self, ms, ns) -> np.ndarray:
        ms = np.asarray(ms, dtype=np.int64)
        ns = np.asarray(ns, dtype=np.int64)
        if len(ms) and (min(ms.min(), ns.min()) < 0
                        or max(ms.max(), ns.max()) >= self.node_count):
            raise IndexError("node index out of range")
        return np.einsum("ij,ij->i", self.P[ms], self.X[ns])

    def copy(self) -> "NlfState":
        return NlfState(self.P.copy(), self.X.copy())


def penalty_weights(matrix: ShdiMatrix, config: TrainConfig):
    """Per-row penalty weights beta * |observed entries at row|.

    Rows with no observed entries get a floor of beta * 1 so the update
    denominators never vanish.
    """
    deg = np.maximum(1, matrix.degrees).astype(np.float64)
    return config.beta1 * deg, config.beta2 * deg


def init_state(matrix: ShdiMatrix, config: TrainConfig) -> FactorState:
    """Fresh constrained-trainer state.

    Q and Y are i.i.d. uniform on [0, init_scale]; P and X start equal to
    them so every coupling constraint holds exactly at iteration zero; all
    duals start at zero.  Deterministic for a fixed seed.
    """
    n, d = matrix.node_count, config.dim
    rng = np.random.default_rng(config.seed)
    Q = rng.uniform(0.0, config.init_scale, size=(n, d))
    Y = rng.uniform(0.0, config.init_scale, size=(n, d))
    theta1, theta2 = penalty_weights(matrix, config)
    return FactorState(
        Q=Q, Y=Y, P=Q.copy(), X=Y.copy(),
        U=np.zeros((n, d)), V=np.zeros((n, d)), W=np.zeros((n, d)),
        theta1=theta1, theta2=theta2,
    )


def init_nlf_state(matrix: ShdiMatrix, config: TrainConfig) -> NlfState:
    """Fresh baseline state; same draw order as :func:`init_state` so equal
    seeds give both models the same starting factors."""
    n, d = matrix.node_count, config.dim
    rng = np.random.default_rng(config.seed)
    P = rng.uniform(0.0, config.init_scale, size=(n, d))
    X = rng.uniform(0.0, config.init_scale, size=(n, d))
    return NlfState(P=P, X=X)


# -- factor container --------------------------------------------------------


def save_factors(path, state, config: TrainConfig, dataset_ref=None, id_map_ref=None):
    """Write a factor state with its config echo to a versioned container."""
    header = {
        "format_version": 1,
        "model": state.MODEL,
        "node_count": state.node_count,
        "dim": state.dim,
        "arrays": [
            {"name": name, "shape": list(getattr(state, name).shape)}
            for name in state.ARRAY_NAMES
        ],
        "config": config.to_dict(),
        "dataset_ref": dataset_ref,
        "id_map_ref": id_map_ref,
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for name in state.ARRAY_NAMES:
            arr = np.ascontiguousarray(getattr(state, name), dtype=np.float64)
            fh.write(arr.tobytes())


def load_factors(path):
    """Read a factor container back. Returns (state, config, header dict)."""
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise DataFormatError(f"{path}: not a factor container")
        (hlen,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        if header.get("format_version") != 1:
            raise DataFormatError(
                f"unsupported factor container version {header.get('format_version')!r}"
            )
        arrays = {}
        for spec in header["arrays"]:
            shape = tuple(spec["shape"])
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(count * 8)
            if len(buf) != count * 8:
                raise DataFormatError("truncated factor container")
            arrays[spec["name"]] = np.frombuffer(buf, dtype=np.float64).reshape(shape).copy()
    config = TrainConfig.from_dict(header["config"])
    model = header["model"]
    if model == FactorState.MODEL:
        state = FactorState(**{name: arrays[name] for name in FactorState.ARRAY_NAMES})
    elif model == NlfState.MODEL:
        state = NlfState(**{name: arrays[name] for name in NlfState.ARRAY_NAMES})
    else:
        raise DataFormatError(f"unknown model kind {model!r} in factor container")
    return state, config, header
