"""BIC model selection with the penalized EM that also moves variables between blocks."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .data import DataSet, ModelSpec, reduce_spec
from .em import (
    DegenerateFitError,
    EMConfig,
    FitResult,
    KernelData,
    block_seed,
    map_partition,
    random_responsibilities,
    run_kernel,
    theta_from_kernel,
)
from .selection import (
    RankedModels,
    SearchConfig,
    candidate_grid,
    candidate_seed,
    rank,
    resolve_threads,
    run_candidates,
)

log = logging.getLogger(__name__)


def param_count(spec: ModelSpec, data: DataSet) -> int:
    """Free parameters: sum_b (G_b - 1) + sum_j nu_j G_{omega_j}."""
    return sum(g - 1 for g in spec.G) + sum(data.kinds[j].n_params * spec.G[w] for j, w in enumerate(spec.omega))


def bic_value(fit: FitResult, data: DataSet) -> float:
    return fit.loglik - 0.5 * param_count(fit.spec, data) * math.log(data.n)


@dataclass
class PenalizedFit(FitResult):
    """Penalized-EM outcome, reported under its effective (reduced) spec.

    ``raw_spec`` is the structure the run ended in before single-component
    blocks were merged and empty blocks dropped; ``value`` is the BIC of
    the reduced spec and ``nu_trace`` the parameter count at each trace
    entry of the raw run.
    """

    value: float = float("nan")
    raw_spec: ModelSpec = None
    nu_trace: np.ndarray = None

    def penalized_trace(self, n: int) -> np.ndarray:
        return self.trace - 0.5 * math.log(n) * self.nu_trace

    def summary(self, data: DataSet) -> dict:
        return {
            "loglik": self.loglik,
            "n_params": param_count(self.spec, data),
            "iterations": self.iterations,
            "converged": self.converged,
            "theta": self.theta.to_dict(self.spec, data),
            "partitions": self.map_z.to_lists(),
        }


def _reduced_fit(run, G, data: DataSet, iterations: int) -> PenalizedFit:
    raw = ModelSpec(tuple(int(g) for g in G), tuple(int(w) for w in run.omega))
    spec, order = reduce_spec(raw)
    # merged single-component blocks keep their own (identical) margins per variable
    theta = theta_from_kernel(run.P, run.pi[order], spec.G, spec.omega, data)
    resp = [run.T[b, :, : raw.G[b]].copy() for b in order]
    loglik = run.loglik
    fit = PenalizedFit(
        spec=spec,
        theta=theta,
        loglik=loglik,
        resp=resp,
        map_z=map_partition(resp, spec.G),
        iterations=iterations,
        converged=run.converged,
        trace=run.loglik_trace,
        raw_spec=raw,
        nu_trace=run.nu_trace,
    )
    fit.value = bic_value(fit, data)
    return fit


def fit_penalized_em(data: DataSet, B: int, G, config: EMConfig | None = None) -> PenalizedFit:
    """Jointly fit parameters and the variable-to-block map for fixed (B, G).

    Each restart draws a uniform random block map and Dirichlet(1)
    responsibilities. The best restart by BIC of the reduced spec is kept.
    """
    config = config or EMConfig()
    G = np.asarray(G, dtype=np.int64)
    if B < 1 or len(G) != B or np.any(G < 1):
        raise ValueError(f"invalid block structure B={B}, G={G.tolist()}")
    kd = KernelData.of(data)
    best = None
    for r in range(config.restarts):
        rng = block_seed(config.seed, 0, r)
        T0 = random_responsibilities(rng, data.n, G)
        omega0 = rng.integers(0, B, size=data.d) if B > 1 else np.zeros(data.d, dtype=np.int64)
        run = run_kernel(kd, G, omega0, T0, config, free_omega=True)
        if run.degenerate:
            continue
        fit = _reduced_fit(run, G, data, len(run.loglik_trace))
        if best is None or fit.value > best.value:
            best = fit
    if best is None:
        raise DegenerateFitError(f"every restart degenerated for G={G.tolist()}")
    return best


def _search_one(data: DataSet, G: tuple, config: EMConfig):
    try:
        fit = fit_penalized_em(data, len(G), G, config)
    except DegenerateFitError as exc:
        log.warning("skipping G=%s: %s", G, exc)
        return None
    return fit.spec, fit.value, fit


def search_bic(data: DataSet, config: SearchConfig | None = None) -> RankedModels:
    """Run the penalized EM over every (B, G) of the grid and rank by BIC."""
    config = config or SearchConfig()
    jobs = []
    for k, G in enumerate(candidate_grid(config.bmax, config.gmax)):
        em_config = EMConfig(config.restarts, config.max_iter, config.tol, candidate_seed(config.seed, k), config.warmup)
        jobs.append((data, G, em_config))
    results = run_candidates(_search_one, jobs, resolve_threads(config.threads))
    return rank("bic", [r for r in results if r is not None])
