"""Partition agreement metrics."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ContingencyTable:
    """Counts of co-occurring label pairs.

    ``rows`` and ``cols`` hold the distinct labels of each side in sorted
    order; ``counts[k, l]`` is the number of items labelled ``rows[k]`` by
    the first partition and ``cols[l]`` by the second.
    """

    rows: tuple
    cols: tuple
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def col_sums(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    def expected(self) -> np.ndarray:
        """Counts expected if the two partitions were independent."""
        return np.outer(self.row_sums, self.col_sums) / max(self.total, 1)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([""] + [str(c) for c in self.cols])
        for r, line in zip(self.rows, self.counts):
            w.writerow([str(r)] + [str(int(v)) for v in line])
        return buf.getvalue()


def _pair(p, q):
    p = np.asarray(p)
    q = np.asarray(q)
    if p.ndim != 1 or q.ndim != 1:
        raise ValueError("labelings must be one-dimensional")
    if len(p) != len(q):
        raise ValueError(f"labelings have different lengths ({len(p)} and {len(q)})")
    return p, q


def cross_tabulate(p, q) -> ContingencyTable:
    p, q = _pair(p, q)
    rows, pi = np.unique(p, return_inverse=True)
    cols, qi = np.unique(q, return_inverse=True)
    counts = np.zeros((len(rows), len(cols)), dtype=np.int64)
    np.add.at(counts, (pi, qi), 1)
    return ContingencyTable(tuple(rows.tolist()), tuple(cols.tolist()), counts)


def _comb2(x) -> int:
    return sum(int(v) * (int(v) - 1) // 2 for v in np.asarray(x).ravel())


def adjusted_rand_index(p, q) -> float:
    """Adjusted Rand index between two labelings of the same items.

    Computed with integer pair counts, so equal inputs give bit-identical
    results regardless of label values. When both sides are a single
    cluster (or there are fewer than two items) the index is 1.
    """
    table = cross_tabulate(p, q)
    n = table.total
    N = n * (n - 1) // 2
    S = _comb2(table.counts)
    A = _comb2(table.row_sums)
    B = _comb2(table.col_sums)
    # ARI = (S - AB/N) / ((A+B)/2 - AB/N), scaled by 2N to stay in integers
    num = 2 * N * S - 2 * A * B
    den = N * (A + B) - 2 * A * B
    if den == 0:
        return 1.0
    return num / den


def block_recovery_ari(omega_true, omega_est) -> float:
    """ARI between two variable-to-block maps; block labels are ignored."""
    return adjusted_rand_index(omega_true, omega_est)
