"""Component margins, weighted M-step fits and conjugate evidences.

Conjugate priors per variable kind:

* continuous: sigma^2 ~ InvGamma(dof/2, scale^2/2), mu | sigma^2 ~ N(center, sigma^2/strength)
* count:      lambda ~ Gamma(shape, rate)
* categorical/binary: level probabilities ~ Dirichlet(concentration, ...)
* proportions of every block: Dirichlet(u, ..., u)
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.special import gammaln, xlogy

from .data import (
    BINARY_FAMILY,
    CATEGORICAL_FAMILY,
    CONTINUOUS_FAMILY,
    COUNT_FAMILY,
    DataSet,
    VariableKind,
)

log = logging.getLogger(__name__)

VARIANCE_FLOOR = 1e-8
SCALE_FLOOR = 1e-6
LOG_PI = math.log(math.pi)
LOG_2PI = math.log(2.0 * math.pi)

HYPER_NAMES = {
    CONTINUOUS_FAMILY: ("dof", "scale", "center", "strength"),
    COUNT_FAMILY: ("shape", "rate"),
    BINARY_FAMILY: ("concentration",),
    CATEGORICAL_FAMILY: ("concentration",),
}


class InvalidParameterError(ValueError):
    pass


# ---------------------------------------------------------------------------
# densities and weighted maximum likelihood


def _check_params(kind: VariableKind, params) -> np.ndarray:
    p = np.atleast_1d(np.asarray(params, dtype=np.float64))
    if kind.family == CONTINUOUS_FAMILY:
        if p.shape != (2,) or not np.isfinite(p[0]) or not p[1] > 0:
            raise InvalidParameterError(f"gaussian needs (mean, variance > 0), got {params!r}")
    elif kind.family == COUNT_FAMILY:
        if p.shape != (1,) or not p[0] > 0:
            raise InvalidParameterError(f"poisson rate must be positive, got {params!r}")
    else:
        if kind.family == BINARY_FAMILY and p.shape == (1,):
            p = np.array([1.0 - p[0], p[0]])
        if p.shape != (kind.levels,) or np.any(p <= 0) or np.any(p >= 1) or abs(p.sum() - 1) > 1e-9:
            raise InvalidParameterError(f"{kind} needs a simplex strictly inside (0, 1), got {params!r}")
    return p


def log_density(kind: VariableKind, value, params) -> float:
    """Log density (or mass) of one value under one component margin.

    Discrete values are 0-based level codes. Binary parameters may be given
    as the success probability alone.
    """
    p = _check_params(kind, params)
    if kind.family == CONTINUOUS_FAMILY:
        mu, var = p
        return -0.5 * (LOG_2PI + math.log(var) + (float(value) - mu) ** 2 / var)
    if kind.family == COUNT_FAMILY:
        x = int(value)
        if x < 0 or x != value:
            raise ValueError(f"count value must be a non-negative integer, got {value!r}")
        return x * math.log(p[0]) - p[0] - math.lgamma(x + 1)
    h = int(value)
    if not 0 <= h < kind.levels:
        raise ValueError(f"level {value!r} outside 0..{kind.levels - 1}")
    return math.log(p[h])


def log_density_matrix(kind: VariableKind, column: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """(n, G) log densities of a column under the G rows of ``alpha``.

    Boundary parameters (zero rates or probabilities) give -inf, not errors.
    """
    x = np.asarray(column)
    if kind.family == CONTINUOUS_FAMILY:
        mu, var = alpha[:, 0], alpha[:, 1]
        return -0.5 * (LOG_2PI + np.log(var) + (x[:, None] - mu) ** 2 / var)
    if kind.family == COUNT_FAMILY:
        lam = alpha[:, 0]
        xf = x.astype(np.float64)[:, None]
        with np.errstate(divide="ignore"):
            return xlogy(xf, lam) - lam - gammaln(xf + 1.0)
    with np.errstate(divide="ignore"):
        return np.log(alpha.T[x])


def weighted_fit(column, weights, kind: VariableKind) -> np.ndarray:
    """Weighted MLE of one component margin.

    Returns (mean, variance) for continuous columns (variance floored at
    1e-8), (rate,) for counts and the level probabilities otherwise.
    """
    x = np.asarray(column)
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != x.shape:
        raise ValueError("weights and column differ in length")
    if np.any(w < 0):
        raise ValueError("weights must be non-negative")
    total = w.sum()
    if not total > 0:
        raise ValueError("weights sum to zero")
    if kind.family == CONTINUOUS_FAMILY:
        mu = w @ x / total
        var = w @ (x - mu) ** 2 / total
        return np.array([mu, max(var, VARIANCE_FLOOR)])
    if kind.family == COUNT_FAMILY:
        return np.array([w @ x / total])
    return np.bincount(x, weights=w, minlength=kind.levels) / total


def max_expected_loglik(column, weights, kind: VariableKind) -> float:
    """max over the margin parameters of sum_i w_i log p(x_i | alpha)."""
    x = np.asarray(column)
    w = np.asarray(weights, dtype=np.float64)
    total = w.sum()
    if kind.family == CONTINUOUS_FAMILY:
        mu, var = weighted_fit(x, w, kind)
        ss = w @ (x - mu) ** 2
        return -0.5 * (total * (LOG_2PI + math.log(var)) + ss / var)
    if kind.family == COUNT_FAMILY:
        sx = float(w @ x)
        lam = sx / total
        return float(xlogy(sx, lam) - lam * total - w @ gammaln(x + 1.0))
    counts = np.bincount(x, weights=w, minlength=kind.levels)
    return float(xlogy(counts, counts / total).sum())


# ---------------------------------------------------------------------------
# priors


@dataclass(frozen=True)
class PriorHyper:
    """Conjugate hyperparameters.

    ``proportions`` is the Dirichlet concentration shared by every block's
    proportions. ``variables[j]`` is a tuple ordered as ``HYPER_NAMES`` for
    the kind of variable j.
    """

    proportions: float
    variables: tuple

    def __post_init__(self):
        if not self.proportions > 0:
            raise InvalidParameterError("proportion concentration must be positive")
        for j, h in enumerate(self.variables):
            if any(not v > 0 for i, v in enumerate(h) if not (len(h) == 4 and i == 2)):
                raise InvalidParameterError(f"variable {j}: hyperparameters must be positive, got {h}")

    def packed(self) -> np.ndarray:
        out = np.zeros((len(self.variables), 4))
        for j, h in enumerate(self.variables):
            out[j, : len(h)] = h
        return out

    def to_dict(self, data: DataSet) -> dict:
        return {
            "proportions": self.proportions,
            "variables": {
                name: dict(zip(HYPER_NAMES[kind.family], h))
                for name, kind, h in zip(data.names, data.kinds, self.variables)
            },
        }

    def with_overrides(self, overrides: Mapping, data: DataSet) -> PriorHyper:
        """Replace hyperparameters named in a ``to_dict``-shaped mapping."""
        u = float(overrides.get("proportions", self.proportions))
        variables = list(self.variables)
        for name, values in (overrides.get("variables") or {}).items():
            j = data.index(name)
            keys = HYPER_NAMES[data.kinds[j].family]
            unknown = set(values) - set(keys)
            if unknown:
                raise InvalidParameterError(f"{name}: unknown hyperparameters {sorted(unknown)}")
            current = dict(zip(keys, variables[j]))
            current.update({k: float(v) for k, v in values.items()})
            variables[j] = tuple(current[k] for k in keys)
        return PriorHyper(u, tuple(variables))


def default_priors(data: DataSet) -> PriorHyper:
    variables = []
    for j, kind in enumerate(data.kinds):
        x = data.columns[j]
        if kind.family == CONTINUOUS_FAMILY:
            sd = float(np.std(x))
            if sd < SCALE_FLOOR:
                log.warning("column %r has zero variance; prior scale floored at %g", data.names[j], SCALE_FLOOR)
                sd = SCALE_FLOOR
            variables.append((1.0, sd, float(np.mean(x)), 1.0))
        elif kind.family == COUNT_FAMILY:
            variables.append((1.0, 1.0))
        else:
            variables.append((0.5,))
    return PriorHyper(0.5, tuple(variables))


def load_priors(path, data: DataSet) -> PriorHyper:
    with open(path, encoding="utf-8") as fh:
        return default_priors(data).with_overrides(json.load(fh), data)


# ---------------------------------------------------------------------------
# closed-form evidences


@dataclass
class ClusterStats:
    """Per-cluster sufficient statistics of one column under a hard partition."""

    counts: np.ndarray
    sums: np.ndarray | None = None
    centered_ss: np.ndarray | None = None
    level_counts: np.ndarray | None = None

    @property
    def means(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.counts > 0, self.sums / np.maximum(self.counts, 1), 0.0)


def cluster_stats(column, labels, G: int, kind: VariableKind) -> ClusterStats:
    x = np.asarray(column)
    z = np.asarray(labels, dtype=np.int64)
    counts = np.bincount(z, minlength=G).astype(np.float64)
    if kind.family == CONTINUOUS_FAMILY:
        sums = np.bincount(z, weights=x, minlength=G)
        means = np.where(counts > 0, sums / np.maximum(counts, 1), 0.0)
        ss = np.bincount(z, weights=(x - means[z]) ** 2, minlength=G)
        return ClusterStats(counts, sums, ss)
    if kind.family == COUNT_FAMILY:
        return ClusterStats(counts, np.bincount(z, weights=x, minlength=G))
    table = np.zeros((G, kind.levels))
    np.add.at(table, (z, x), 1.0)
    return ClusterStats(counts, level_counts=table)


def log_marginal_proportions(labels, G: int, u: float = 0.5) -> float:
    """log p(z | G) with the proportions integrated against Dirichlet(u)."""
    z = np.asarray(labels, dtype=np.int64)
    counts = np.bincount(z, minlength=G)
    if len(counts) > G:
        raise ValueError(f"labels outside 0..{G - 1}")
    n = len(z)
    return float(gammaln(G * u) - G * gammaln(u) + gammaln(counts + u).sum() - gammaln(n + G * u))


def log_marginal_variable(column, labels, G: int, kind: VariableKind, hyper: Sequence[float]) -> float:
    """log p(x_j | z) with the component parameters integrated out."""
    x = np.asarray(column)
    z = np.asarray(labels, dtype=np.int64)
    if x.shape != z.shape:
        raise ValueError("column and labels differ in length")
    st = cluster_stats(x, z, G, kind)
    n_g = st.counts
    if kind.family == CONTINUOUS_FAMILY:
        a, b, c, d = hyper
        if not (a > 0 and b > 0 and d > 0):
            raise InvalidParameterError(f"invalid normal-inverse-gamma hyperparameters {hyper}")
        shrink = np.where(n_g > 0, n_g * d / np.maximum(n_g + d, 1e-300), 0.0)
        post_scale2 = b * b + st.centered_ss + shrink * (st.means - c) ** 2
        post_dof = a + n_g
        terms = (
            a * math.log(b)
            + 0.5 * math.log(d)
            - gammaln(a / 2)
            + gammaln(post_dof / 2)
            - 0.5 * post_dof * np.log(post_scale2)
            - 0.5 * np.log(n_g + d)
        )
        return float(-0.5 * len(x) * LOG_PI + terms.sum())
    if kind.family == COUNT_FAMILY:
        a, rate = hyper
        if not (a > 0 and rate > 0):
            raise InvalidParameterError(f"invalid gamma hyperparameters {hyper}")
        post_shape = a + st.sums
        terms = a * math.log(rate) - gammaln(a) + gammaln(post_shape) - post_shape * np.log(rate + n_g)
        return float(terms.sum() - gammaln(x + 1.0).sum())
    (a,) = hyper
    if not a > 0:
        raise InvalidParameterError(f"invalid dirichlet concentration {hyper}")
    m = kind.levels
    terms = gammaln(m * a) - m * gammaln(a) + gammaln(st.level_counts + a).sum(axis=1) - gammaln(n_g + m * a)
    return float(terms.sum())
