"""Information criteria and sequential selection of the number of components."""

from __future__ import annotations

import enum
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import xlogy

from .data import CategoricalDataset
from .exceptions import CatmmlError, DegenerateLikelihoodError, EmptyComponentError
from .model import MixtureModel, fit_em, log_likelihood

logger = logging.getLogger(__name__)

__all__ = [
    "Criterion", "CriterionScore", "SelectionResult", "score", "fit_candidates",
    "select_from_fits", "select_by_criterion", "assignment_entropy",
]


class Criterion(str, enum.Enum):
    BIC = "BIC"
    AIC = "AIC"
    CAIC = "CAIC"
    MAIC = "MAIC"
    ICL = "ICL"

    @classmethod
    def parse(cls, value) -> "Criterion":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise ValueError(
                f"unknown criterion {value!r}; choose from {', '.join(c.value for c in cls)}"
            ) from None


@dataclass
class CriterionScore:
    criterion: Criterion
    K: int
    value: float
    log_likelihood: float
    n_params: int


@dataclass
class SelectionResult:
    criterion: Criterion
    best_K: int
    per_K_scores: list
    per_K_models: dict = field(repr=False)
    restarts_used: int = 1
    per_K_fits: dict = field(default_factory=dict, repr=False)

    @property
    def best_model(self) -> MixtureModel:
        return self.per_K_models[self.best_K]


def assignment_entropy(resp, weights=None) -> float:
    """Entropy of the soft assignment, -sum_i sum_k z_ik log z_ik (nats)."""
    ent = -xlogy(resp, resp).sum(axis=1)
    return float(ent.sum() if weights is None else ent @ weights)


def _penalized(criterion, ll, n_params, n, entropy=None):
    if criterion is Criterion.BIC:
        return -2.0 * ll + n_params * np.log(n)
    if criterion is Criterion.AIC:
        return -2.0 * ll + 2.0 * n_params
    if criterion is Criterion.CAIC:
        return -2.0 * ll + n_params * (np.log(n) + 1.0)
    if criterion is Criterion.MAIC:
        # AIC-3 reading of the modified AIC.
        return -2.0 * ll + 3.0 * n_params
    return -2.0 * ll + n_params * np.log(n) + 2.0 * entropy


def score(criterion, data: CategoricalDataset, model: MixtureModel,
          resp=None) -> CriterionScore:
    """Score a fitted model; ``resp`` is required for ICL only."""
    criterion = Criterion.parse(criterion)
    ll = log_likelihood(data, model)
    if not np.isfinite(ll):
        raise DegenerateLikelihoodError("log-likelihood is not finite")
    entropy = None
    if criterion is Criterion.ICL:
        if resp is None:
            raise ValueError("ICL needs the responsibilities of the fitted model")
        entropy = assignment_entropy(resp, data.weights)
    value = _penalized(criterion, ll, model.n_params, data.total_weight, entropy)
    return CriterionScore(criterion, model.K, float(value), ll, model.n_params)


def fit_candidates(data: CategoricalDataset, k_range, restarts: int = 5,
                   delta: float = 1e-6, seed=0, max_iter: int = 500,
                   smoothing: float = 0.0) -> dict:
    """Best-of-``restarts`` classical EM fit for every K in ``k_range``.

    Restart ``r`` for ``K`` is seeded with ``(seed, K, r)``.  Values of K for
    which every restart fails are left out with a warning.
    """
    k_range = sorted(set(int(k) for k in k_range))
    if not k_range:
        raise ValueError("k_range must not be empty")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    fits = {}
    for K in k_range:
        best = None
        for r in range(restarts):
            rng = np.random.default_rng([int(seed), K, r])
            try:
                rep = fit_em(data, K, delta=delta, max_iter=max_iter, random_state=rng,
                             smoothing=smoothing)
            except (EmptyComponentError, DegenerateLikelihoodError) as exc:
                logger.debug("K=%d restart %d failed: %s", K, r, exc)
                continue
            if best is None or rep.log_likelihood > best.log_likelihood:
                best = rep
        if best is None:
            warnings.warn(f"every restart failed for K={K}; skipping it", RuntimeWarning,
                          stacklevel=2)
            continue
        fits[K] = best
    if not fits:
        raise CatmmlError("every restart failed for every K in the range")
    return fits


def select_from_fits(criterion, data: CategoricalDataset, fits: dict,
                     restarts: int = 1) -> SelectionResult:
    """Pick the K whose fit minimizes ``criterion``; ties go to the smaller K."""
    criterion = Criterion.parse(criterion)
    scores = [score(criterion, data, fits[K].model, fits[K].responsibilities)
              for K in sorted(fits)]
    best = min(scores, key=lambda s: (s.value, s.K))
    return SelectionResult(criterion, best.K, scores,
                           {K: f.model for K, f in sorted(fits.items())}, restarts,
                           dict(sorted(fits.items())))


def select_by_criterion(criterion, data: CategoricalDataset, k_range, restarts: int = 5,
                        delta: float = 1e-6, seed=0, max_iter: int = 500,
                        smoothing: float = 0.0) -> SelectionResult:
    """Fit classical EM for each K in ``k_range`` and select K by ``criterion``."""
    criterion = Criterion.parse(criterion)
    fits = fit_candidates(data, k_range, restarts, delta, seed, max_iter, smoothing)
    return select_from_fits(criterion, data, fits, restarts)
