"""Planted multinomial mixtures with controlled cluster separation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import xlogy

from .data import CategoricalDataset
from .exceptions import GenerationError, InfiniteDivergenceError, UndefinedSeparationError
from .model import MixtureModel

__all__ = ["GenSpec", "PlantedMixture", "separation", "kl_matrix", "generate",
           "empirical_check"]

THETA_FLOOR = 1e-6


def kl_matrix(theta: np.ndarray, n_categories) -> np.ndarray:
    """``D[k, j]`` = summed per-variable KL divergence of component k from j."""
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    support = theta > 0
    for k in range(theta.shape[0]):
        lost = support[k][None, :] & ~support
        if lost.any():
            j = int(np.argwhere(lost.any(axis=1))[0, 0])
            raise InfiniteDivergenceError(
                f"component {j} has zero probability where component {k} does not")
    with np.errstate(divide="ignore"):
        log_theta = np.where(support, np.log(np.where(support, theta, 1.0)), 0.0)
    self_term = xlogy(theta, theta).sum(axis=1)
    return self_term[:, None] - theta @ log_theta.T


def separation(model: MixtureModel) -> float:
    """Average symmetrized KL divergence over all pairs of components (nats)."""
    K = model.K
    if K < 2:
        raise UndefinedSeparationError("separation needs at least two components")
    D = kl_matrix(model.theta, model.n_categories)
    return float(2.0 / (K * (K - 1)) * (D.sum() - np.trace(D)))


@dataclass
class GenSpec:
    """Parameters of a synthetic scenario.

    ``n_categories`` and ``trials`` accept a scalar (shared by all
    variables) or one value per variable.  ``pair_balance`` is the smallest
    allowed ratio between the closest pair's symmetrized divergence and the
    mean over pairs (only binding for three or more components).
    """

    k_true: int = 2
    n_vars: int = 7
    n_categories: object = 2
    trials: object = 1
    n: int = 500
    target_separation: tuple = (0.04, 0.06)
    alpha_true: Optional[tuple] = None
    seed: Optional[int] = None
    max_draws: int = 10_000
    pair_balance: float = 0.5

    def __post_init__(self):
        lo, hi = self.target_separation
        if lo < 0 or lo > hi:
            raise ValueError(f"invalid separation interval [{lo}, {hi}]")
        if not 0 <= self.pair_balance <= 1:
            raise ValueError("pair_balance must lie in [0, 1]")
        if self.k_true < 1:
            raise ValueError("k_true must be >= 1")
        if self.alpha_true is not None:
            a = np.asarray(self.alpha_true, dtype=float)
            if a.size != self.k_true or np.any(a < 0) or abs(a.sum() - 1) > 1e-9:
                raise ValueError("alpha_true must be a probability vector of length k_true")

    @property
    def categories(self) -> tuple:
        return _per_var(self.n_categories, self.n_vars)

    @property
    def trial_counts(self) -> tuple:
        return _per_var(self.trials, self.n_vars)

    @property
    def alpha(self) -> np.ndarray:
        if self.alpha_true is None:
            return np.full(self.k_true, 1.0 / self.k_true)
        return np.asarray(self.alpha_true, dtype=float)


def _per_var(value, L):
    if np.ndim(value) == 0:
        return (int(value),) * L
    value = tuple(int(v) for v in value)
    if len(value) != L:
        raise ValueError(f"expected {L} per-variable values, got {len(value)}")
    return value


@dataclass
class PlantedMixture:
    """Ground-truth model with its separation and (0-based) sampled labels."""

    model: MixtureModel
    separation: float
    labels: Optional[np.ndarray] = field(default=None, repr=False)


def _dirichlet_theta(rng, K, cats):
    return np.hstack([rng.dirichlet(np.ones(C), size=K) for C in cats])


def _floor(theta, offsets):
    theta = np.maximum(theta, THETA_FLOOR)
    for l in range(len(offsets) - 1):
        theta[:, offsets[l]:offsets[l + 1]] /= theta[:, offsets[l]:offsets[l + 1]].sum(
            axis=1, keepdims=True)
    return theta


def _draw_theta(spec: GenSpec, rng):
    """Draw component parameters whose separation lands in the target interval.

    Components are ``(1 - t) * base + t * d_k`` with ``base`` and every
    ``d_k`` uniform Dirichlet draws.  Separation is convex and increasing in
    ``t``, so bisection on ``t`` reaches a target drawn uniformly from the
    interval.  A draw is rejected when the interval is out of reach or its
    pairwise divergences are too unbalanced.
    """
    cats = spec.categories
    offsets = np.concatenate([[0], np.cumsum(cats)]).astype(int)
    lo, hi = spec.target_separation
    K = spec.k_true
    if K == 1:
        return _floor(_dirichlet_theta(rng, 1, cats), offsets), 0.0

    iu = np.triu_indices(K, 1)

    def sep_at(t, base, dirs):
        theta = _floor((1 - t) * base + t * dirs, offsets)
        D = kl_matrix(theta, cats)
        return 2.0 / (K * (K - 1)) * (D.sum() - np.trace(D)), theta

    def balanced(theta):
        D = kl_matrix(theta, cats)
        pair = (D + D.T)[iu]
        return pair.min() >= spec.pair_balance * pair.mean()

    achieved = []
    unbalanced = 0
    for _ in range(spec.max_draws):
        base = _dirichlet_theta(rng, 1, cats)
        dirs = _dirichlet_theta(rng, K, cats)
        s_max, theta = sep_at(1.0, base, dirs)
        achieved.append(s_max)
        if s_max < lo or hi <= 0:
            continue
        if not balanced(theta):
            unbalanced += 1
            continue
        if s_max <= hi:
            return theta, s_max
        target = rng.uniform(lo, hi)
        t_lo, t_hi = 0.0, 1.0
        for _ in range(100):
            t = 0.5 * (t_lo + t_hi)
            s, theta = sep_at(t, base, dirs)
            if abs(s - target) <= 1e-4 * max(hi - lo, 1e-12) and lo <= s <= hi:
                break
            if s < target:
                t_lo = t
            else:
                t_hi = t
        if lo <= s <= hi and s > 0:
            if balanced(theta):
                return theta, s
            unbalanced += 1
    hint = "widen the target interval"
    if unbalanced > spec.max_draws // 2:
        hint = (f"{unbalanced} draws failed the pair_balance={spec.pair_balance} check; "
                "lower pair_balance or add variables")
    raise GenerationError(
        f"no planted mixture with separation in [{lo}, {hi}] after {spec.max_draws} "
        f"draws (reachable maxima ranged {min(achieved):.4g}..{max(achieved):.4g}); {hint}")


def generate(spec: GenSpec):
    """Sample a dataset from a planted mixture; returns ``(dataset, planted)``."""
    rng = np.random.default_rng(spec.seed)
    cats = spec.categories
    trials = spec.trial_counts
    theta, sep = _draw_theta(spec, rng)
    alpha = spec.alpha
    model = MixtureModel(alpha, theta, cats, trials)
    labels = rng.choice(spec.k_true, size=spec.n, p=alpha)
    offsets = model.offsets
    blocks = []
    for l, (C, T) in enumerate(zip(cats, trials)):
        pvals = theta[labels, offsets[l]:offsets[l + 1]]
        blocks.append(rng.multinomial(T, pvals))
    counts = np.hstack(blocks) if blocks else np.zeros((spec.n, 0), dtype=np.int64)
    data = CategoricalDataset(counts, cats, trials, labels=labels)
    return data, PlantedMixture(model, float(sep), labels)


def empirical_check(data: CategoricalDataset, planted: PlantedMixture) -> dict:
    """Compare per-component empirical category frequencies with planted theta.

    Components without observations get a ``nan`` deviation and are listed
    under ``"empty"``.
    """
    labels = planted.labels if planted.labels is not None else data.labels
    if labels is None:
        raise ValueError("planted labels are required")
    model = planted.model
    trials = np.repeat(np.asarray(data.trials, float), data.n_categories)
    deviations, sizes, empty = [], [], []
    for k in range(model.K):
        mask = labels == k
        sizes.append(int(mask.sum()))
        if not mask.any():
            deviations.append(float("nan"))
            empty.append(k)
            continue
        freq = data.counts_f[mask].sum(axis=0) / (trials * mask.sum())
        deviations.append(float(np.max(np.abs(freq - model.theta[k]))))
    finite = [d for d in deviations if np.isfinite(d)]
    return {
        "component_sizes": sizes,
        "max_deviation_per_component": deviations,
        "max_deviation": max(finite) if finite else float("nan"),
        "empty": empty,
    }
