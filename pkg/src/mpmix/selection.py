"""Model grids, ranked results and the shared candidate runner."""

from __future__ import annotations

import itertools
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .data import DataSet, ModelSpec


@dataclass
class SearchConfig:
    bmax: int = 3
    gmax: int = 3
    restarts: int = 20
    max_iter: int = 500
    tol: float = 1e-6
    seed: int = 0
    threads: int = 1
    sweeps: int = 5
    max_outer: int = 100
    warmup: int = 20

    def __post_init__(self):
        if self.bmax < 1 or self.gmax < 1:
            raise ValueError("bmax and gmax must be at least 1")
        if self.restarts < 1 or self.max_iter < 1:
            raise ValueError("restarts and max_iter must be at least 1")


def candidate_grid(bmax: int, gmax: int) -> list[tuple[int, ...]]:
    """Non-increasing component vectors (G_1 >= ... >= G_B), B = 1..bmax."""
    out = []
    for B in range(1, bmax + 1):
        for G in itertools.combinations_with_replacement(range(gmax, 0, -1), B):
            out.append(tuple(G))
    return out


def candidate_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def resolve_threads(threads: int | None) -> int:
    if threads:
        return max(1, int(threads))
    env = os.environ.get("MPMIX_THREADS")
    return max(1, int(env)) if env else 1


def run_candidates(fn: Callable, jobs: list, threads: int) -> list:
    """Apply ``fn`` to every job, in a process pool when threads > 1."""
    if threads <= 1 or len(jobs) <= 1:
        return [fn(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, *zip(*jobs)))


@dataclass
class RankedEntry:
    spec: ModelSpec
    value: float
    fit: object = field(repr=False)


@dataclass
class RankedModels:
    criterion: str
    entries: list

    @property
    def best(self) -> RankedEntry:
        return self.entries[0]

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, k):
        return self.entries[k]

    def to_dict(self, data: DataSet) -> dict:
        models = []
        for rank, e in enumerate(self.entries, 1):
            item = {
                "rank": rank,
                "criterion": self.criterion,
                "value": e.value,
                "spec": e.spec.to_dict(),
                "blocks": [[data.names[j] for j in e.spec.members(b)] for b in range(e.spec.B)],
            }
            item.update(e.fit.summary(data) if hasattr(e.fit, "summary") else {})
            models.append(item)
        return {"criterion": self.criterion, "names": list(data.names), "models": models}

    def to_json(self, data: DataSet) -> str:
        return json.dumps(self.to_dict(data), indent=2)

    def table(self, data: DataSet, top: int | None = None) -> str:
        """Aligned text table: block of each variable, G per block, criterion."""
        entries = self.entries[:top] if top else self.entries
        width = max((e.spec.B for e in entries), default=1)
        header = list(data.names) + [f"G{b + 1}" for b in range(width)] + [self.criterion.upper()]
        rows = []
        for e in entries:
            gs = [str(g) for g in e.spec.G] + ["."] * (width - e.spec.B)
            rows.append([str(w + 1) for w in e.spec.omega] + gs + [f"{e.value:.2f}"])
        widths = [max(len(h), *(len(r[k]) for r in rows)) if rows else len(h) for k, h in enumerate(header)]
        sep = "  "
        lines = [sep.join(h.rjust(w) for h, w in zip(header, widths))]
        lines.append("-" * len(lines[0]))
        lines += [sep.join(c.rjust(w) for c, w in zip(r, widths)) for r in rows]
        return "\n".join(lines)


def rank(criterion: str, results: list) -> RankedModels:
    """Deduplicate (spec, value, fit) triples by spec and sort descending.

    Among duplicates the larger value wins; the sort is stable so equal
    values keep enumeration order.
    """
    best = {}
    order = []
    for spec, value, fit in results:
        if spec not in best:
            order.append(spec)
            best[spec] = (value, fit)
        elif value > best[spec][0]:
            best[spec] = (value, fit)
    entries = [RankedEntry(s, best[s][0], best[s][1]) for s in order]
    entries.sort(key=lambda e: -e.value)
    return RankedModels(criterion, entries)
