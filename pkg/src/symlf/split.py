"""Tenfold partitioning of the observed entries for cross-validation.

Each canonical entry is assigned to one of ten folds of near-equal size
(sizes differ by at most one).  For a rotation r, folds r..r+6 (mod 10)
train, fold r+7 validates, folds r+8 and r+9 test, so rotating r through
0..9 cycles every fold through every role.
"""

from __future__ import annotations

import numpy as np

from .errors import DataFormatError
from .matrix import ShdiMatrix

FOLD_COUNT = 10
TRAIN_FOLDS = 7
VALIDATION_FOLDS = 1
TEST_FOLDS = 2


class SplitPlan:
    """Immutable fold assignment plus the role rotation currently in force."""

    def __init__(self, fold_of_entry, seed, rotation=0):
        fold_of_entry = np.ascontiguousarray(fold_of_entry, dtype=np.int8)
        if len(fold_of_entry) < FOLD_COUNT:
            raise DataFormatError(
                f"need at least {FOLD_COUNT} observed entries, got {len(fold_of_entry)}"
            )
        if fold_of_entry.min() < 0 or fold_of_entry.max() >= FOLD_COUNT:
            raise DataFormatError("fold indices must lie in 0..9")
        counts = np.bincount(fold_of_entry, minlength=FOLD_COUNT)
        if counts.max() - counts.min() > 1:
            raise DataFormatError("fold sizes may differ by at most 1")
        fold_of_entry.setflags(write=False)
        self.fold_of_entry = fold_of_entry
        self.seed = int(seed)
        self.rotation = int(rotation) % FOLD_COUNT

    @property
    def entry_count(self) -> int:
        return len(self.fold_of_entry)

    @property
    def train_folds(self) -> frozenset:
        return frozenset((self.rotation + k) % FOLD_COUNT for k in range(TRAIN_FOLDS))

    @property
    def validation_folds(self) -> frozenset:
        return frozenset({(self.rotation + TRAIN_FOLDS) % FOLD_COUNT})

    @property
    def test_folds(self) -> frozenset:
        return frozenset(
            (self.rotation + TRAIN_FOLDS + VALIDATION_FOLDS + k) % FOLD_COUNT
            for k in range(TEST_FOLDS)
        )

    def role_of_fold(self, fold: int) -> str:
        if fold in self.train_folds:
            return "train"
        if fold in self.validation_folds:
            return "validation"
        return "test"

    def with_rotation(self, rotation: int) -> "SplitPlan":
        return SplitPlan(self.fold_of_entry, self.seed, rotation=rotation)

    def _entries_in(self, folds) -> np.ndarray:
        mask = np.isin(self.fold_of_entry, list(folds))
        return np.nonzero(mask)[0]

    def train_entries(self) -> np.ndarray:
        return self._entries_in(self.train_folds)

    def validation_entries(self) -> np.ndarray:
        return self._entries_in(self.validation_folds)

    def test_entries(self) -> np.ndarray:
        return self._entries_in(self.test_folds)

    def __eq__(self, other):
        return (
            isinstance(other, SplitPlan)
            and self.seed == other.seed
            and self.rotation == other.rotation
            and np.array_equal(self.fold_of_entry, other.fold_of_entry)
        )


def make_split(matrix: ShdiMatrix, seed: int, rotation: int = 0) -> SplitPlan:
    """Uniform random fold assignment over the canonical entries.

    Deterministic for a fixed (matrix, seed): the assignment depends only on
    the entry count and the seed.
    """
    count = matrix.entry_count
    if count < FOLD_COUNT:
        raise DataFormatError(
            f"need at least {FOLD_COUNT} observed entries to split, got {count}"
        )
    base, extra = divmod(count, FOLD_COUNT)
    sizes = np.full(FOLD_COUNT, base, dtype=np.int64)
    sizes[:extra] += 1
    labels = np.repeat(np.arange(FOLD_COUNT, dtype=np.int8), sizes)
    rng = np.random.default_rng(seed)
    rng.shuffle(labels)
    return SplitPlan(labels, seed, rotation=rotation)


def save_split(plan: SplitPlan, path):
    """Write `entry_index fold` pairs with the seed and rotation up front."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# symlf split v1\n")
        fh.write(f"# seed: {plan.seed}\n")
        fh.write(f"# rotation: {plan.rotation}\n")
        for idx, fold in enumerate(plan.fold_of_entry):
            fh.write(f"{idx} {fold}\n")


def load_split(path) -> SplitPlan:
    seed = 0
    rotation = 0
    pairs: list[tuple[int, int]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            stripped = line.strip()
            if not stripped:
                continue
            if stripped.startswith("#"):
                if stripped.startswith("# seed:"):
                    seed = int(stripped.split(":", 1)[1])
                elif stripped.startswith("# rotation:"):
                    rotation = int(stripped.split(":", 1)[1])
                continue
            parts = stripped.split()
            if len(parts) != 2:
                raise DataFormatError(
                    "split line must be 'entry_index fold'", line_no=line_no
                )
            pairs.append((int(parts[0]), int(parts[1])))
    if not pairs:
        raise DataFormatError("split file holds no assignments")
    folds = np.empty(len(pairs), dtype=np.int8)
    seen = np.zeros(len(pairs), dtype=bool)
    for idx, fold in pairs:
        if not 0 <= idx < len(pairs):
            raise DataFormatError(f"entry index {idx} out of range")
        if seen[idx]:
            raise DataFormatError(f"duplicate assignment for entry {idx}")
        seen[idx] = True
        folds[idx] = fold
    return SplitPlan(folds, seed, rotation=rotation)
