"""Maximum-likelihood EM for a fixed block structure."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, logsumexp

from . import _kernels
from .data import DataSet, ModelSpec, MultiPartition, Theta, validate_model
from .distributions import log_density_matrix, weighted_fit

log = logging.getLogger(__name__)

DEGENERATE_WEIGHT = 1e-8


class DegenerateFitError(RuntimeError):
    """Raised when a component loses all of its weight or every restart fails."""


@dataclass
class EMConfig:
    restarts: int = 20
    max_iter: int = 500
    tol: float = 1e-6
    seed: int = 0
    warmup: int = 20


@dataclass
class FitResult:
    spec: ModelSpec
    theta: Theta
    loglik: float
    resp: list
    map_z: MultiPartition
    iterations: int
    converged: bool
    trace: np.ndarray = field(default=None, repr=False)

    def to_dict(self, data: DataSet) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "variables": {name: b + 1 for name, b in zip(data.names, self.spec.omega)},
            "loglik": self.loglik,
            "iterations": self.iterations,
            "converged": self.converged,
            "theta": self.theta.to_dict(self.spec, data),
            "partitions": self.map_z.to_lists(),
        }

    def to_json(self, data: DataSet) -> str:
        return json.dumps(self.to_dict(data), indent=2)


# ---------------------------------------------------------------------------
# reference steps


def _block_logdens(theta: Theta, spec: ModelSpec, data: DataSet, b: int) -> np.ndarray:
    with np.errstate(divide="ignore"):
        out = np.tile(np.log(theta.pi[b]), (data.n, 1))
    for j in spec.members(b):
        out = out + log_density_matrix(data.kinds[j], data.columns[j], theta.alpha[j])
    return out


def observed_loglik(theta: Theta, spec: ModelSpec, data: DataSet) -> float:
    total = 0.0
    for b in range(spec.B):
        lp = _block_logdens(theta, spec, data, b)
        row = logsumexp(lp, axis=1)
        bad = ~np.isfinite(row)
        if bad.any():
            i = int(np.argmax(bad))
            names = [data.names[j] for j in spec.members(b)]
            raise FloatingPointError(f"row {i + 1}: non-finite density for block {b + 1} variables {names}")
        total += row.sum()
    return float(total)


def e_step(theta: Theta, spec: ModelSpec, data: DataSet) -> list:
    """Responsibilities per block, each an (n, G_b) row-stochastic array."""
    resp = []
    for b in range(spec.B):
        lp = _block_logdens(theta, spec, data, b)
        norm = logsumexp(lp, axis=1, keepdims=True)
        if not np.all(np.isfinite(norm)):
            i = int(np.argmax(~np.isfinite(norm[:, 0])))
            raise FloatingPointError(f"row {i + 1} has zero density under every component of block {b + 1}")
        resp.append(np.exp(lp - norm))
    return resp


def m_step(resp, spec: ModelSpec, data: DataSet) -> Theta:
    pi = []
    for b, t in enumerate(resp):
        w = t.sum(axis=0)
        if np.any(w < DEGENERATE_WEIGHT):
            raise DegenerateFitError(f"block {b + 1}: a component has total weight below {DEGENERATE_WEIGHT}")
        pi.append(w / data.n)
    alpha = []
    for j in range(data.d):
        t = resp[spec.omega[j]]
        alpha.append(np.array([weighted_fit(data.columns[j], t[:, g], data.kinds[j]) for g in range(t.shape[1])]))
    return Theta(tuple(pi), tuple(alpha))


def map_partition(resp, G=None) -> MultiPartition:
    """Hard partition per block; ties go to the smallest component index."""
    labels = [np.argmax(np.asarray(t), axis=1) for t in resp]
    G = tuple(np.asarray(t).shape[1] for t in resp) if G is None else G
    return MultiPartition(tuple(labels), G)


# ---------------------------------------------------------------------------
# compiled runs


@dataclass
class KernelData:
    """Arrays shared by every compiled run over one dataset."""

    X: np.ndarray
    kinds: np.ndarray
    mlev: np.ndarray
    lgx: np.ndarray
    nu: np.ndarray

    @classmethod
    def of(cls, data: DataSet) -> KernelData:
        X = np.ascontiguousarray(data.matrix)
        kinds = data.kind_codes
        lgx = np.where(kinds == 1, gammaln(X + 1.0), 0.0)
        nu = np.array([k.n_params for k in data.kinds], dtype=np.float64)
        return cls(X, kinds, data.level_counts, np.ascontiguousarray(lgx), nu)


@dataclass
class RunResult:
    omega: np.ndarray
    P: np.ndarray
    pi: np.ndarray
    T: np.ndarray
    loglik_trace: np.ndarray
    nu_trace: np.ndarray
    converged: bool
    degenerate: bool

    @property
    def loglik(self) -> float:
        return float(self.loglik_trace[-1])


def random_responsibilities(rng: np.random.Generator, n: int, G) -> np.ndarray:
    """Rows drawn from a symmetric Dirichlet(1), packed as (B, n, Gmax)."""
    G = np.asarray(G)
    T = np.zeros((len(G), n, int(G.max())))
    for b, g in enumerate(G):
        T[b, :, :g] = rng.dirichlet(np.ones(g), size=n)
    return T


def run_kernel(kd: KernelData, G, omega0, T0, config: EMConfig, free_omega: bool = False) -> RunResult:
    G = np.asarray(G, dtype=np.int64)
    n = kd.X.shape[0]
    pen = 0.5 * np.log(n)
    out = _kernels.em_run(
        kd.X, kd.kinds, kd.mlev, kd.lgx, G, np.asarray(omega0, dtype=np.int64), T0,
        free_omega, pen, kd.nu, int(config.max_iter), float(config.tol), int(config.warmup),
    )
    omega, P, pi, T, ll, nu, k, converged, degenerate = out
    return RunResult(omega, P, pi, T, ll[:k].copy(), nu[:k].copy(), bool(converged), bool(degenerate or k == 0))


def theta_from_kernel(P: np.ndarray, pi: np.ndarray, G, omega, data: DataSet) -> Theta:
    alpha = []
    for j, kind in enumerate(data.kinds):
        g = G[omega[j]]
        if kind.code == 0:
            alpha.append(P[j, :g, :2].copy())
        elif kind.code == 1:
            alpha.append(P[j, :g, :1].copy())
        else:
            alpha.append(P[j, :g, : kind.levels].copy())
    return Theta(tuple(pi[b, : G[b]].copy() for b in range(len(G))), tuple(alpha))


def block_seed(seed: int, b: int, r: int) -> np.random.Generator:
    return np.random.default_rng([seed, b, r])


def fit_em(data: DataSet, spec: ModelSpec, config: EMConfig | None = None) -> FitResult:
    """Best-of-restarts maximum likelihood fit of a fixed spec.

    Blocks are independent, so each block is fitted on its own and the
    best restart is kept per block; the result concatenates them.
    """
    config = config or EMConfig()
    spec, _ = validate_model(spec, data)
    kd = KernelData.of(data)
    G = np.array(spec.G, dtype=np.int64)
    omega = np.array(spec.omega, dtype=np.int64)
    Gmax = int(G.max())
    Pmax = max(2, int(kd.mlev.max()))
    P = np.zeros((data.d, Gmax, Pmax))
    pi = np.zeros((spec.B, Gmax))
    resp, traces = [], []
    loglik, iterations, converged = 0.0, 0, True
    for b in range(spec.B):
        members = spec.members(b)
        sub = KernelData(
            np.ascontiguousarray(kd.X[:, members]), kd.kinds[members], kd.mlev[members],
            np.ascontiguousarray(kd.lgx[:, members]), kd.nu[members],
        )
        best = None
        for r in range(config.restarts):
            T0 = random_responsibilities(block_seed(config.seed, b, r), data.n, [G[b]])
            run = run_kernel(sub, [G[b]], np.zeros(len(members), dtype=np.int64), T0, config)
            if run.degenerate:
                continue
            if best is None or run.loglik > best.loglik:
                best = run
        if best is None:
            raise DegenerateFitError(f"block {b + 1}: every restart degenerated")
        for q, j in enumerate(members):
            P[j, : G[b], : best.P.shape[2]] = best.P[q, : G[b]]
        pi[b, : G[b]] = best.pi[0, : G[b]]
        resp.append(best.T[0, :, : G[b]].copy())
        traces.append(best.loglik_trace)
        loglik += best.loglik
        iterations = max(iterations, len(best.loglik_trace))
        converged = converged and best.converged
    theta = theta_from_kernel(P, pi, G, omega, data)
    return FitResult(spec, theta, float(loglik), resp, map_partition(resp, spec.G), iterations, converged, traces)
