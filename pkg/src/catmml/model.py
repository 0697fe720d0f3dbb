"""Multinomial mixture model: likelihood, classical E/M steps and EM fitting."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from .data import CategoricalDataset
from .exceptions import DegenerateLikelihoodError, EmptyComponentError

logger = logging.getLogger(__name__)

__all__ = [
    "MixtureModel", "FitReport", "init_model", "component_log_densities",
    "log_likelihood", "e_step", "m_step_ml", "fit_em", "relative_change",
]

SIMPLEX_TOL = 1e-9


@dataclass(eq=False)
class MixtureModel:
    """Finite mixture of products of multinomials.

    ``theta`` is a ``(K, sum(n_categories))`` array; row ``k`` holds the
    category probabilities of every variable for component ``k`` in the same
    block layout as :attr:`CategoricalDataset.counts`.
    """

    alpha: np.ndarray
    theta: np.ndarray
    n_categories: tuple
    trials: tuple

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=float).reshape(-1)
        self.theta = np.atleast_2d(np.asarray(self.theta, dtype=float))
        self.n_categories = tuple(int(c) for c in self.n_categories)
        self.trials = tuple(int(t) for t in self.trials)
        if self.theta.shape != (self.alpha.size, sum(self.n_categories)):
            raise ValueError(
                f"theta has shape {self.theta.shape}, expected "
                f"({self.alpha.size}, {sum(self.n_categories)})")
        if len(self.trials) != len(self.n_categories):
            raise ValueError("one trial count per variable is required")
        if np.any(self.alpha < 0) or abs(self.alpha.sum() - 1.0) > SIMPLEX_TOL:
            raise ValueError("alpha must be a probability vector")
        if np.any(self.theta < 0):
            raise ValueError("theta entries must be non-negative")
        sums = np.add.reduceat(self.theta, self.offsets[:-1], axis=1)
        if np.any(np.abs(sums - 1.0) > SIMPLEX_TOL):
            raise ValueError("every theta block must sum to 1")

    @property
    def K(self) -> int:
        return self.alpha.size

    @property
    def L(self) -> int:
        return len(self.n_categories)

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.n_categories)]).astype(int)

    @property
    def M(self) -> int:
        """Free parameters per component, sum_l (C_l - 1)."""
        return sum(self.n_categories) - self.L

    @property
    def n_params(self) -> int:
        """Total free parameters (K - 1) + K * M."""
        return (self.K - 1) + self.K * self.M

    @property
    def k_nz(self) -> int:
        return int(np.count_nonzero(self.alpha > 0))

    def theta_blocks(self) -> list:
        """Per-variable ``(K, C_l)`` probability arrays."""
        o = self.offsets
        return [self.theta[:, o[l]:o[l + 1]] for l in range(self.L)]

    def permute(self, order) -> "MixtureModel":
        order = np.asarray(order)
        return MixtureModel(self.alpha[order], self.theta[order], self.n_categories, self.trials)

    def drop_empty(self) -> "MixtureModel":
        """Return the model restricted to components with positive weight."""
        keep = self.alpha > 0
        return MixtureModel(self.alpha[keep], self.theta[keep], self.n_categories, self.trials)

    def copy(self) -> "MixtureModel":
        return MixtureModel(self.alpha.copy(), self.theta.copy(), self.n_categories, self.trials)

    def check_compatible(self, data: CategoricalDataset) -> None:
        if self.n_categories != data.n_categories or self.trials != data.trials:
            raise ValueError(
                f"model layout (C={self.n_categories}, n_l={self.trials}) does not match "
                f"dataset (C={data.n_categories}, n_l={data.trials})")


@dataclass
class FitReport:
    """Result of a single EM run."""

    model: MixtureModel
    objective_trace: list
    iterations: int
    converged: bool
    responsibilities: np.ndarray = field(repr=False)
    hard_assignment: np.ndarray = field(repr=False)

    @property
    def log_likelihood(self) -> float:
        return self.objective_trace[-1]


def relative_change(new: float, old: float) -> float:
    return abs(new - old) / (abs(old) + 1e-10)


def _as_rng(random_state):
    if isinstance(random_state, np.random.Generator):
        return random_state
    return np.random.default_rng(random_state)


def empirical_theta(data: CategoricalDataset, weights=None) -> np.ndarray:
    """Pooled category frequencies, one block per variable."""
    w = data.obs_weights if weights is None else weights
    totals = w @ data.counts_f
    denom = np.repeat(np.asarray(data.trials, float), data.n_categories) * w.sum()
    return totals / denom


def init_model(data: CategoricalDataset, K: int, random_state=None,
               low: float = 0.5, high: float = 1.5) -> MixtureModel:
    """Perturbed empirical-distribution initialization with equal weights.

    Each component's category probabilities are the pooled empirical
    frequencies multiplied by independent ``Uniform(low, high)`` factors and
    renormalized within every variable block.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    rng = _as_rng(random_state)
    base = empirical_theta(data)
    theta = base[None, :] * rng.uniform(low, high, size=(K, base.size))
    o = data.offsets
    for l in range(data.L):
        theta[:, o[l]:o[l + 1]] /= theta[:, o[l]:o[l + 1]].sum(axis=1, keepdims=True)
    return MixtureModel(np.full(K, 1.0 / K), theta, data.n_categories, data.trials)


def component_log_densities(data: CategoricalDataset, theta: np.ndarray) -> np.ndarray:
    """``(n, K)`` log multinomial-product densities, coefficient included.

    A zero probability contributes ``-inf`` only where the observation has a
    positive count in that category.
    """
    theta = np.atleast_2d(theta)
    with np.errstate(divide="ignore"):
        log_theta = np.log(theta)
    finite = np.isfinite(log_theta)
    out = data.counts_f @ np.where(finite, log_theta, 0.0).T
    if not finite.all():
        hits = data.counts_f @ (~finite).T.astype(float)
        out[hits > 0] = -np.inf
    return out + data.log_coef[:, None]


def _log_joint(data, model):
    with np.errstate(divide="ignore"):
        log_alpha = np.log(model.alpha)
    return component_log_densities(data, model.theta) + log_alpha[None, :]


def _normalize(log_joint, weights):
    """Row-normalize in log space; return (weighted log-likelihood, responsibilities)."""
    row_max = log_joint.max(axis=1)
    bad = np.flatnonzero(~np.isfinite(row_max))
    if bad.size:
        raise DegenerateLikelihoodError(
            f"observation {bad[0]} has zero density under every component", index=int(bad[0]))
    shifted = np.exp(log_joint - row_max[:, None])
    row_sum = shifted.sum(axis=1)
    resp = shifted / row_sum[:, None]
    row_ll = row_max + np.log(row_sum)
    return float(row_ll @ weights), resp


def log_likelihood(data: CategoricalDataset, model: MixtureModel) -> float:
    """Observed-data log-likelihood in nats (weighted by observation weights)."""
    model.check_compatible(data)
    row_ll = logsumexp(_log_joint(data, model), axis=1)
    bad = np.flatnonzero(~np.isfinite(row_ll))
    if bad.size:
        raise DegenerateLikelihoodError(
            f"observation {bad[0]} has zero density under every component", index=int(bad[0]))
    return float(row_ll @ data.obs_weights)


def e_step(data: CategoricalDataset, model: MixtureModel) -> np.ndarray:
    """Posterior component memberships, an ``(n, K)`` row-stochastic matrix."""
    model.check_compatible(data)
    return _normalize(_log_joint(data, model), data.obs_weights)[1]


def weighted_theta(data, resp_cols, smoothing=0.0):
    """Weighted ML category probabilities for the given responsibility columns.

    ``resp_cols`` is ``(n, K)``; returns ``(K, sum C_l)``.  ``smoothing``
    adds a pseudo-count to every category before normalizing.
    """
    wz = resp_cols * data.obs_weights[:, None]
    mass = wz.sum(axis=0)
    num = wz.T @ data.counts_f
    trials = np.repeat(np.asarray(data.trials, float), data.n_categories)
    C = np.repeat(np.asarray(data.n_categories, float), data.n_categories)
    return (num + smoothing) / (trials[None, :] * mass[:, None] + C[None, :] * smoothing)


def m_step_ml(data: CategoricalDataset, resp: np.ndarray, smoothing: float = 0.0) -> MixtureModel:
    """Maximum-likelihood M-step for mixing weights and category probabilities."""
    resp = np.asarray(resp, dtype=float)
    if resp.ndim != 2 or resp.shape[0] != data.n:
        raise ValueError(f"responsibilities must have {data.n} rows")
    w = data.obs_weights
    mass = w @ resp
    empty = np.flatnonzero(mass <= 0)
    if empty.size:
        raise EmptyComponentError(f"component {empty[0]} received no mass", int(empty[0]))
    alpha = mass / mass.sum()
    return MixtureModel(alpha, weighted_theta(data, resp, smoothing),
                        data.n_categories, data.trials)


def fit_em(data: CategoricalDataset, K: int, init: Optional[MixtureModel] = None,
           delta: float = 1e-6, max_iter: int = 500, random_state=None,
           smoothing: float = 0.0) -> FitReport:
    """Fit a K-component mixture by classical (maximum-likelihood) EM.

    Iterates until the relative log-likelihood change drops below ``delta``
    or ``max_iter`` M-steps have run.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    if delta <= 0:
        raise ValueError("delta must be > 0")
    model = init if init is not None else init_model(data, K, random_state)
    model.check_compatible(data)
    weights = data.obs_weights
    ll, resp = _normalize(_log_joint(data, model), weights)
    trace = [ll]
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        model = m_step_ml(data, resp, smoothing)
        ll, resp = _normalize(_log_joint(data, model), weights)
        trace.append(ll)
        if relative_change(ll, trace[-2]) < delta:
            converged = True
            break
    if not converged:
        logger.info("EM with K=%d stopped after %d iterations without converging", K, it)
    return FitReport(model, trace, it, converged, resp, resp.argmax(axis=1))
