"""Sparse storage for symmetric, incomplete, nonnegative weighted networks.

A dataset is a set of observed entries of a symmetric nonnegative matrix,
each undirected entry stored exactly once in canonical upper-triangular
form (row <= col).  Observation status is structural: an explicit zero is
an observed entry, a pair absent from the input is unknown.

Supported input formats:

* edge-list text: ``i j w`` per line, whitespace- or comma-separated,
  ``#`` comments and blank lines ignored;
* MatrixMarket coordinate files, ``real`` or ``integer`` field,
  ``symmetric`` or ``general`` qualifier, 1-based indices.
"""

from __future__ import annotations

import json
import math
import re
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import DataFormatError

_TOKEN_SPLIT = re.compile(r"[,\s]+")
_NONNEG_INT = re.compile(r"^\d+$")

# Tolerance for accepting a `general` MatrixMarket file as symmetric.
_SYMMETRY_REL_TOL = 1e-12

_DEDUPE_POLICIES = ("error", "last", "mean")


def _as_line_iter(lines) -> Iterator[str]:
    if isinstance(lines, str):
        return iter(lines.splitlines())
    return iter(lines)


class ShdiMatrix:
    """Canonical store of an undirected weighted network.

    Immutable after construction.  Holds the canonical entry list plus a
    CSR-style adjacency covering both orientations of every entry, so
    ``neighbors(j)`` enumerates the observed entries incident to node j
    (the diagonal, when observed, appears exactly once).
    """

    def __init__(self, node_count, ent_rows, ent_cols, ent_weights,
                 entry_ids=None, id_map=None, _validated=False):
        ent_rows = np.ascontiguousarray(ent_rows, dtype=np.int64)
        ent_cols = np.ascontiguousarray(ent_cols, dtype=np.int64)
        ent_weights = np.ascontiguousarray(ent_weights, dtype=np.float64)
        if entry_ids is None:
            entry_ids = np.arange(len(ent_rows), dtype=np.int64)
        else:
            entry_ids = np.ascontiguousarray(entry_ids, dtype=np.int64)

        if not _validated:
            self._validate(node_count, ent_rows, ent_cols, ent_weights)

        self.node_count = int(node_count)
        self.ent_rows = ent_rows
        self.ent_cols = ent_cols
        self.ent_weights = ent_weights
        self.entry_ids = entry_ids
        self.id_map = list(id_map) if id_map is not None else None

        self._build_adjacency()
        for arr in (self.ent_rows, self.ent_cols, self.ent_weights,
                    self.entry_ids, self.adj_indptr, self.adj_rows,
                    self.adj_cols, self.adj_weights, self.adj_mirror,
                    self.adj_entry_ids):
            arr.setflags(write=False)

    @staticmethod
    def _validate(node_count, rows, cols, weights):
        if node_count < 0:
            raise DataFormatError("node count must be nonnegative")
        if len(rows) != len(cols) or len(rows) != len(weights):
            raise DataFormatError("entry arrays must have equal length")
        if len(rows) and (rows.min() < 0 or cols.max() >= node_count):
            raise DataFormatError("entry index out of range")
        if np.any(rows > cols):
            raise DataFormatError("entries must be canonical (row <= col)")
        if not np.all(np.isfinite(weights)):
            raise DataFormatError("weights must be finite")
        if len(weights) and weights.min() < 0:
            raise DataFormatError("negative weights violate nonnegativity")
        keys = rows * np.int64(node_count) + cols
        if np.any(np.diff(keys) <= 0):
            raise DataFormatError("entries must be sorted and unique")

    def _build_adjacency(self):
        n = self.node_count
        off = self.ent_rows != self.ent_cols
        rows = np.concatenate([self.ent_rows, self.ent_cols[off]])
        cols = np.concatenate([self.ent_cols, self.ent_rows[off]])
        vals = np.concatenate([self.ent_weights, self.ent_weights[off]])
        eids = np.concatenate([self.entry_ids, self.entry_ids[off]])

        order = np.lexsort((cols, rows))
        self.adj_rows = np.ascontiguousarray(rows[order])
        self.adj_cols = np.ascontiguousarray(cols[order])
        self.adj_weights = np.ascontiguousarray(vals[order])
        self.adj_entry_ids = np.ascontiguousarray(eids[order])

        counts = np.bincount(self.adj_rows, minlength=n) if n else np.zeros(0, np.int64)
        self.adj_indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(counts, out=self.adj_indptr[1:])

        # slot index of the opposite orientation (diagonal mirrors itself)
        keys = self.adj_rows * np.int64(max(n, 1)) + self.adj_cols
        mkeys = self.adj_cols * np.int64(max(n, 1)) + self.adj_rows
        self.adj_mirror = np.searchsorted(keys, mkeys).astype(np.int64)

        self._entry_keys = self.ent_rows * np.int64(max(n, 1)) + self.ent_cols
        self._entry_keys.setflags(write=False)

    # -- constructors --------------------------------------------------

    @classmethod
    def from_entries(cls, entries, node_count=None, dedupe="error", id_map=None):
        """Build a matrix from (row, col, weight) triples in any orientation.

        ``dedupe`` controls what happens when the same unordered pair occurs
        with different weights: ``"error"`` rejects, ``"last"`` keeps the
        final occurrence, ``"mean"`` averages all occurrences.  Equal-weight
        repeats always collapse silently.
        """
        if dedupe not in _DEDUPE_POLICIES:
            raise ValueError(f"dedupe must be one of {_DEDUPE_POLICIES}")
        entries = list(entries)
        if entries:
            ms = np.asarray([e[0] for e in entries], dtype=np.int64)
            ns = np.asarray([e[1] for e in entries], dtype=np.int64)
            ws = np.asarray([e[2] for e in entries], dtype=np.float64)
        else:
            ms = np.zeros(0, np.int64)
            ns = np.zeros(0, np.int64)
            ws = np.zeros(0, np.float64)

        if node_count is None:
            node_count = int(max(ms.max(), ns.max()) + 1) if len(ms) else 0
        elif len(ms) and max(ms.max(), ns.max()) >= node_count:
            raise DataFormatError(
                f"entry references node {int(max(ms.max(), ns.max()))} "
                f"but node count is {node_count}"
            )

        lo = np.minimum(ms, ns)
        hi = np.maximum(ms, ns)
        rows, cols, weights = _dedupe(lo, hi, ws, node_count, dedupe)
        return cls(node_count, rows, cols, weights, id_map=id_map)

    # -- views ----------------------------------------------------------

    @property
    def entry_count(self) -> int:
        return len(self.ent_rows)

    @property
    def degrees(self) -> np.ndarray:
        """Observed-entry count per node, diagonal counted once."""
        return np.diff(self.adj_indptr)

    @property
    def density(self) -> float:
        cap = self.node_count * (self.node_count + 1) / 2
        return self.entry_count / cap if cap else 0.0

    def neighbors(self, j):
        """(neighbor indices, weights) of the observed entries at node j."""
        lo, hi = self.adj_indptr[j], self.adj_indptr[j + 1]
        return self.adj_cols[lo:hi], self.adj_weights[lo:hi]

    def entry_index(self, m, n):
        """Position of canonical entry (m, n) in the entry arrays, or None."""
        if not (0 <= m < self.node_count and 0 <= n < self.node_count):
            raise IndexError(f"node index out of range: ({m}, {n})")
        lo, hi = min(m, n), max(m, n)
        key = lo * max(self.node_count, 1) + hi
        pos = int(np.searchsorted(self._entry_keys, key))
        if pos < len(self._entry_keys) and self._entry_keys[pos] == key:
            return pos
        return None

    def is_observed(self, m, n) -> bool:
        return self.entry_index(m, n) is not None

    def restricted_to(self, entry_positions) -> "ShdiMatrix":
        """Matrix holding only the given canonical entries (same node set).

        ``entry_ids`` of the result keep the parent's canonical ids so
        downstream bookkeeping (fold membership, access recording) stays in
        the parent's index space.
        """
        idx = np.unique(np.asarray(entry_positions, dtype=np.int64))
        if len(idx) and (idx[0] < 0 or idx[-1] >= self.entry_count):
            raise IndexError("entry position out of range")
        return ShdiMatrix(
            self.node_count,
            self.ent_rows[idx],
            self.ent_cols[idx],
            self.ent_weights[idx],
            entry_ids=self.entry_ids[idx],
            id_map=self.id_map,
            _validated=True,
        )

    # -- export ----------------------------------------------------------

    def to_edge_list_lines(self) -> Iterator[str]:
        for m, n, w in zip(self.ent_rows, self.ent_cols, self.ent_weights):
            yield f"{m} {n} {w!r}"


def _dedupe(lo, hi, ws, node_count, policy):
    keys = lo * np.int64(max(node_count, 1)) + hi
    uniq, inverse, counts = np.unique(keys, return_inverse=True, return_counts=True)

    if np.any(counts > 1):
        wmin = np.full(len(uniq), np.inf)
        wmax = np.full(len(uniq), -np.inf)
        np.minimum.at(wmin, inverse, ws)
        np.maximum.at(wmax, inverse, ws)
        conflicting = wmin != wmax
        if policy == "error" and np.any(conflicting):
            g = int(np.nonzero(conflicting)[0][0])
            m = int(uniq[g] // max(node_count, 1))
            n = int(uniq[g] % max(node_count, 1))
            raise DataFormatError(
                f"conflicting duplicate entries for pair ({m}, {n}): "
                f"weights range from {wmin[g]!r} to {wmax[g]!r}"
            )

    if policy == "mean":
        sums = np.zeros(len(uniq))
        np.add.at(sums, inverse, ws)
        weights = sums / counts
    else:
        # keep the last occurrence per group ("last"; equal anyway for "error")
        order = np.argsort(keys, kind="stable")
        group_ends = np.cumsum(counts) - 1
        weights = ws[order][group_ends]

    rows = (uniq // max(node_count, 1)).astype(np.int64)
    cols = (uniq % max(node_count, 1)).astype(np.int64)
    return rows, cols, weights


# -- edge-list ingestion ---------------------------------------------------


def ingest_edge_list(lines, dedupe="error", node_count=None) -> ShdiMatrix:
    """Parse edge-list text into a canonical matrix.

    Node ids may be nonnegative integers or arbitrary strings.  Integer ids
    are kept in numeric order (identity mapping when already dense from 0,
    or always when ``node_count`` is given); otherwise ids are re-indexed
    densely and the original ids retained in ``id_map``.
    """
    raw = []
    for line_no, line in enumerate(_as_line_iter(lines), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        tokens = [t for t in _TOKEN_SPLIT.split(stripped) if t]
        if len(tokens) != 3:
            raise DataFormatError(
                f"expected 'i j w', got {len(tokens)} fields", line_no=line_no
            )
        w = _parse_weight(tokens[2], line_no)
        raw.append((tokens[0], tokens[1], w, line_no))

    numeric = all(
        _NONNEG_INT.match(si) and _NONNEG_INT.match(sj) for si, sj, _, _ in raw
    )
    if numeric:
        ids = sorted({int(s) for si, sj, _, _ in raw for s in (si, sj)})
        if node_count is not None:
            if ids and ids[-1] >= node_count:
                raise DataFormatError(
                    f"node id {ids[-1]} exceeds declared node count {node_count}"
                )
            index_of = None  # identity within the declared range
            id_map = None
            total = node_count
        elif ids == list(range(len(ids))):
            index_of = None
            id_map = None
            total = len(ids)
        else:
            index_of = {v: k for k, v in enumerate(ids)}
            id_map = ids
            total = len(ids)
        entries = [
            (int(si) if index_of is None else index_of[int(si)],
             int(sj) if index_of is None else index_of[int(sj)],
             w)
            for si, sj, w, _ in raw
        ]
    else:
        ids = sorted({s for si, sj, _, _ in raw for s in (si, sj)})
        index_of = {v: k for k, v in enumerate(ids)}
        id_map = ids
        total = len(ids)
        if node_count is not None:
            if node_count < total:
                raise DataFormatError(
                    f"declared node count {node_count} below distinct id count {total}"
                )
            total = node_count
        entries = [(index_of[si], index_of[sj], w) for si, sj, w, _ in raw]

    return ShdiMatrix.from_entries(
        entries, node_count=total, dedupe=dedupe, id_map=id_map
    )


def _parse_weight(token, line_no):
    try:
        w = float(token)
    except ValueError:
        raise DataFormatError(f"cannot parse weight {token!r}", line_no=line_no)
    if not math.isfinite(w):
        raise DataFormatError(f"weight {token!r} is not finite", line_no=line_no)
    if w < 0:
        raise DataFormatError(
            f"negative weight {token!r} (weights must be nonnegative)",
            line_no=line_no,
        )
    return w


# -- MatrixMarket ingestion -------------------------------------------------


def ingest_matrix_market(lines) -> ShdiMatrix:
    """Parse a MatrixMarket coordinate file into a canonical matrix.

    ``symmetric`` files keep the stored triangle.  ``general`` files must be
    numerically symmetric (both orientations present and equal within
    1e-12 relative) and are collapsed to canonical form.
    """
    it = _as_line_iter(lines)
    try:
        banner = next(it)
    except StopIteration:
        raise DataFormatError("empty MatrixMarket input")
    fields = banner.strip().split()
    if len(fields) != 5 or fields[0].lower() != "%%matrixmarket":
        raise DataFormatError("missing '%%MatrixMarket' banner", line_no=1)
    _, obj, fmt, field, symmetry = (f.lower() for f in fields)
    if obj != "matrix":
        raise DataFormatError(f"unsupported object {obj!r}", line_no=1)
    if fmt != "coordinate":
        raise DataFormatError(
            f"unsupported format {fmt!r} (coordinate required)", line_no=1
        )
    if field == "pattern":
        raise DataFormatError(
            "pattern files carry no weights; a weighted network requires values",
            line_no=1,
        )
    if field not in ("real", "integer"):
        raise DataFormatError(f"unsupported field {field!r}", line_no=1)
    if symmetry not in ("symmetric", "general"):
        raise DataFormatError(f"unsupported symmetry {symmetry!r}", line_no=1)

    line_no = 1
    size = None
    for line in it:
        line_no += 1
        stripped = line.strip()
        if not stripped or stripped.startswith("%"):
            continue
        parts = stripped.split()
        if len(parts) != 3:
            raise DataFormatError("size line must be 'rows cols nnz'", line_no=line_no)
        try:
            size = tuple(int(p) for p in parts)
        except ValueError:
            raise DataFormatError("size line must be 'rows cols nnz'", line_no=line_no)
        break
    if size is None:
        raise DataFormatError("missing size line")
    n_rows, n_cols, nnz = size
    if n_rows != n_cols:
        raise DataFormatError(
            f"matrix must be square, got {n_rows} x {n_cols}", line_no=line_no
        )

    seen: dict[tuple[int, int], float] = {}
    read = 0
    for line in it:
        line_no += 1
        stripped = line.strip()
        if not stripped or stripped.startswith("%"):
            continue
        if read == nnz:
            raise DataFormatError("more entries than declared", line_no=line_no)
        parts = stripped.split()
        if len(parts) != 3:
            raise DataFormatError("entry line must be 'i j w'", line_no=line_no)
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError:
            raise DataFormatError("indices must be integers", line_no=line_no)
        if not (1 <= i <= n_rows and 1 <= j <= n_cols):
            raise DataFormatError(f"index ({i}, {j}) out of range", line_no=line_no)
        w = _parse_weight(parts[2], line_no)
        key = (i - 1, j - 1)
        if key in seen and seen[key] != w:
            raise DataFormatError(
                f"conflicting duplicate entry for ({i}, {j})", line_no=line_no
            )
        seen[key] = w
        read += 1
    if read != nnz:
        raise DataFormatError(f"declared {nnz} entries but found {read}")

    if symmetry == "symmetric":
        entries = [(i, j, w) for (i, j), w in seen.items()]
        return ShdiMatrix.from_entries(entries, node_count=n_rows, dedupe="error")

    # general: verify numeric symmetry, then collapse
    entries = []
    for (i, j) in sorted(seen):
        if i > j:
            if (j, i) not in seen:
                raise DataFormatError(
                    f"asymmetric general file: entry ({i + 1}, {j + 1}) has no "
                    f"({j + 1}, {i + 1}) counterpart"
                )
            continue
        w = seen[(i, j)]
        if i == j:
            entries.append((i, j, w))
            continue
        wt = seen.get((j, i))
        if wt is None:
            raise DataFormatError(
                f"asymmetric general file: entry ({i + 1}, {j + 1}) has no "
                f"({j + 1}, {i + 1}) counterpart"
            )
        if not math.isclose(w, wt, rel_tol=_SYMMETRY_REL_TOL, abs_tol=0.0):
            raise DataFormatError(
                f"asymmetric general file: a[{i + 1},{j + 1}]={w!r} vs "
                f"a[{j + 1},{i + 1}]={wt!r}"
            )
        entries.append((i, j, (w + wt) / 2.0))
    return ShdiMatrix.from_entries(entries, node_count=n_rows, dedupe="error")


# -- canonical dataset files -------------------------------------------------

_DATASET_HEADER = "# symlf canonical dataset v1"


def save_dataset(matrix: ShdiMatrix, path):
    """Write the canonical dataset text file (edge list plus header)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{_DATASET_HEADER}\n")
        fh.write(f"# nodes: {matrix.node_count}\n")
        fh.write(f"# entries: {matrix.entry_count}\n")
        for line in matrix.to_edge_list_lines():
            fh.write(line + "\n")


def load_dataset(path) -> ShdiMatrix:
    """Read a dataset written by :func:`save_dataset`.

    Plain edge-list files (no header) load too; the node count is then
    inferred from the ids present.
    """
    node_count = None
    body: list[str] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            stripped = line.strip()
            if stripped.startswith("# nodes:"):
                node_count = int(stripped.split(":", 1)[1])
            body.append(line)
    return ingest_edge_list(body, node_count=node_count)


def save_id_map(matrix: ShdiMatrix, path):
    """Persist the original-id mapping next to a canonical dataset."""
    payload = {
        "version": 1,
        "node_count": matrix.node_count,
        "identity": matrix.id_map is None,
        "ids": matrix.id_map,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")
