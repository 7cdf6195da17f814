"""Data generators and the simulation benchmark."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.stats import norm, poisson

from .data import (
    CONTINUOUS,
    COUNT,
    CONTINUOUS_FAMILY,
    COUNT_FAMILY,
    DataSet,
    ModelError,
    ModelSpec,
    MultiPartition,
    Theta,
)
from .evaluation import adjusted_rand_index, block_recovery_ari
from .selection import SearchConfig

log = logging.getLogger(__name__)

DIFFICULTY = {"easy": 4.5, "interm": 3.0, "hard": 1.5}
SCENARIO_SPEC = ModelSpec((2, 2, 1), (0, 0, 1, 1, 2, 2))
SCENARIO_NAMES = ("cont1", "count1", "cont2", "count2", "cont3", "count3")
_UNIT_CLIP = 1e-12


@dataclass(frozen=True)
class SimScenario:
    n: int
    delta: float
    rho: float = 0.0
    replicates: int = 25
    tag: str = ""

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be at least 1, got {self.n}")
        if not abs(self.rho) < 1:
            raise ValueError(f"rho must lie strictly inside (-1, 1), got {self.rho}")
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")

    @classmethod
    def named(cls, difficulty: str, n: int, rho: float = 0.0, replicates: int = 25) -> SimScenario:
        key = difficulty.rstrip(".")
        if key not in DIFFICULTY:
            raise ValueError(f"unknown difficulty {difficulty!r}; choose from {sorted(DIFFICULTY)}")
        return cls(n, DIFFICULTY[key], rho, replicates, key)


@dataclass
class LabeledSample:
    data: DataSet
    true_spec: ModelSpec
    true_z: MultiPartition

    @property
    def true_omega(self) -> tuple:
        return self.true_spec.omega


def two_block_model() -> tuple[ModelSpec, Theta]:
    """Four Gaussian variables in two blocks of two-component mixtures at means +-4."""
    spec = ModelSpec((2, 2), (0, 0, 1, 1))
    comp = np.array([[-4.0, 1.0], [4.0, 1.0]])
    return spec, Theta((np.array([0.5, 0.5]),) * 2, (comp,) * 4)


def sample_mpm(spec: ModelSpec, theta: Theta, n: int, seed, kinds=None, names=None) -> LabeledSample:
    """Draw n rows from a multiple-partition mixture.

    ``kinds`` defaults to all continuous. Each block draws its labels from
    its proportions, then every variable is drawn from the margin of its
    block's component.
    """
    kinds = tuple(kinds) if kinds is not None else (CONTINUOUS,) * spec.d
    names = tuple(names) if names is not None else tuple(f"X{j + 1}" for j in range(spec.d))
    if len(theta.pi) != spec.B or len(theta.alpha) != spec.d or len(kinds) != spec.d:
        raise ModelError("theta does not match the spec")
    for b, p in enumerate(theta.pi):
        p = np.asarray(p, dtype=float)
        if len(p) != spec.G[b] or np.any(p < 0) or abs(p.sum() - 1) > 1e-9:
            raise ModelError(f"block {b + 1}: proportions must be a simplex of length {spec.G[b]}")
    rng = np.random.default_rng(seed)
    labels = [rng.choice(spec.G[b], size=n, p=np.asarray(theta.pi[b], dtype=float)) for b in range(spec.B)]
    cols = []
    for j, kind in enumerate(kinds):
        a = np.asarray(theta.alpha[j], dtype=float)[labels[spec.omega[j]]]
        if kind.family == CONTINUOUS_FAMILY:
            if np.any(a[:, 1] <= 0):
                raise ModelError(f"variable {names[j]}: variances must be positive")
            cols.append(rng.normal(a[:, 0], np.sqrt(a[:, 1])))
        elif kind.family == COUNT_FAMILY:
            cols.append(rng.poisson(a[:, 0]))
        else:
            u = rng.random(n)[:, None]
            cols.append((u > np.cumsum(a, axis=1)[:, :-1]).sum(axis=1))
    data = DataSet(tuple(cols), kinds, names)
    return LabeledSample(data, spec, MultiPartition(tuple(labels), spec.G))


def sample_scenario(scenario: SimScenario, seed) -> LabeledSample:
    """Three blocks of one continuous and one count variable each.

    Blocks 1 and 2 are balanced two-component mixtures whose component g
    (g = 1, 2) has margins N(g delta, 1) and Poisson(g delta). Block 3 has a
    single component with margins N(0, 1) and Poisson(delta). Within a
    component the two variables are coupled by a Gaussian copula with
    correlation rho; rho = 0 gives independent margins.
    """
    n, delta, rho = scenario.n, scenario.delta, scenario.rho
    rng = np.random.default_rng(seed)
    cols, labels = [], []
    for b in range(3):
        if b < 2:
            z = rng.integers(0, 2, size=n)
            level = (z + 1) * delta
            mean, rate = level, level
        else:
            z = np.zeros(n, dtype=np.int64)
            mean, rate = np.zeros(n), np.full(n, delta)
        e1 = rng.standard_normal(n)
        e2 = rho * e1 + np.sqrt(1.0 - rho * rho) * rng.standard_normal(n)
        u = np.clip(norm.cdf(e2), _UNIT_CLIP, 1.0 - _UNIT_CLIP)
        cols += [mean + e1, poisson.ppf(u, rate).astype(np.int64)]
        labels.append(z)
    data = DataSet(tuple(cols), (CONTINUOUS, COUNT) * 3, SCENARIO_NAMES)
    return LabeledSample(data, SCENARIO_SPEC, MultiPartition(tuple(labels), SCENARIO_SPEC.G))


# ---------------------------------------------------------------------------
# benchmark


@dataclass
class BenchmarkConfig:
    bmax: int = 3
    gmax: int = 3
    bic_restarts: int = 20
    micl_restarts: int = 50
    max_iter: int = 500
    tol: float = 1e-6
    seed: int = 0
    threads: int = 1


@dataclass
class Replicate:
    tag: str
    delta: float
    rho: float
    n: int
    replicate: int
    seed: int
    criterion: str
    omega_ari: float
    g_correct: bool
    z_ari: float
    G: tuple = field(default=())
    omega: tuple = field(default=())


def replicate_seed(base: int, r: int) -> int:
    """Seed of replicate r (1-based): the base seed XOR the replicate index."""
    return int(base) ^ int(r)


def matched_partition_ari(true_z: MultiPartition, est_z: MultiPartition, blocks) -> float:
    """Mean over ``blocks`` of the ARI with the estimated block assigned to it.

    True and estimated blocks are paired one-to-one to maximize the total
    ARI; a true block left without a partner scores 0.
    """
    S = np.array([[adjusted_rand_index(true_z.labels[t], e) for e in est_z.labels] for t in blocks])
    rows, cols = linear_sum_assignment(S, maximize=True)
    score = np.zeros(len(blocks))
    score[rows] = S[rows, cols]
    return float(score.mean())


def _g_correct(spec: ModelSpec, truth: ModelSpec) -> bool:
    return spec.B == truth.B and sorted(spec.G) == sorted(truth.G)


def evaluate(sample: LabeledSample, spec: ModelSpec, z: MultiPartition) -> tuple[float, bool, float]:
    """(omega ARI, G correct, partition ARI) of an estimate against the truth."""
    informative = [b for b in range(sample.true_spec.B) if sample.true_spec.G[b] > 1]
    return (
        block_recovery_ari(sample.true_omega, spec.omega),
        _g_correct(spec, sample.true_spec),
        matched_partition_ari(sample.true_z, z, informative),
    )


def run_replicate(scenario: SimScenario, r: int, criteria, config: BenchmarkConfig) -> list[Replicate]:
    from .bic import search_bic
    from .micl import search_micl

    seed = replicate_seed(config.seed, r)
    sample = sample_scenario(scenario, seed)
    out = []
    for criterion in criteria:
        if criterion == "bic":
            sc = SearchConfig(config.bmax, config.gmax, config.bic_restarts, config.max_iter, config.tol, seed)
            best = search_bic(sample.data, sc).best
            z = best.fit.map_z
        elif criterion == "micl":
            sc = SearchConfig(config.bmax, config.gmax, config.micl_restarts, seed=seed)
            best = search_micl(sample.data, sc).best
            z = best.fit.z_star
        else:
            raise ValueError(f"unknown criterion {criterion!r}")
        w, g, zr = evaluate(sample, best.spec, z)
        out.append(Replicate(scenario.tag, scenario.delta, scenario.rho, scenario.n, r, seed, criterion,
                             w, g, zr, best.spec.G, best.spec.omega))
    return out


@dataclass
class BenchmarkCell:
    tag: str
    delta: float
    rho: float
    n: int
    criterion: str
    replicates: int
    omega_ari: float
    g_correct: float
    z_ari: float


def aggregate(reps: list[Replicate]) -> list[BenchmarkCell]:
    cells = {}
    for rep in reps:
        cells.setdefault((rep.tag, rep.delta, rep.rho, rep.n, rep.criterion), []).append(rep)
    out = []
    for key, group in cells.items():
        out.append(BenchmarkCell(
            *key, len(group),
            float(np.mean([g.omega_ari for g in group])),
            float(np.mean([g.g_correct for g in group])),
            float(np.mean([g.z_ari for g in group])),
        ))
    return out


def run_benchmark(scenarios, criteria=("bic", "micl"), config: BenchmarkConfig | None = None):
    """Run every (scenario, replicate, criterion) and return (cells, replicates).

    Replicates of a scenario use seeds ``config.seed ^ r`` for r = 1..R.
    """
    from .selection import resolve_threads, run_candidates

    config = config or BenchmarkConfig()
    jobs = [(sc, r, tuple(criteria), config) for sc in scenarios for r in range(1, sc.replicates + 1)]
    reps = [rep for group in run_candidates(run_replicate, jobs, resolve_threads(config.threads)) for rep in group]
    return aggregate(reps), reps


CELL_FIELDS = ("tag", "delta", "rho", "n", "criterion", "replicates", "omega_ari", "g_correct", "z_ari")


def cells_to_csv(cells: list[BenchmarkCell]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CELL_FIELDS)
    for c in cells:
        row = asdict(c)
        w.writerow([f"{row[k]:.4f}" if isinstance(row[k], float) and k not in ("delta", "rho") else row[k]
                    for k in CELL_FIELDS])
    return buf.getvalue()
