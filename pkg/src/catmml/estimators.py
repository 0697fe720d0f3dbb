"""scikit-learn style estimators for multinomial mixture clustering.

All three accept either a :class:`~catmml.data.CategoricalDataset` or a 2-d
integer array (category codes, or count blocks when ``n_categories`` is
given) and expose ``fit``, ``predict``, ``predict_proba``, ``score`` and the
usual ``get_params``/``set_params``.
"""

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_is_fitted

from .criteria import Criterion, fit_candidates, score, select_from_fits
from .model import component_log_densities, e_step, fit_em
from .mml import MmlConfig, fit_em_mml
from .validation import check_categorical

__all__ = ["MultinomialMixture", "MMLMultinomialMixture", "CriterionMultinomialMixture"]


def _seed(random_state):
    return int(check_random_state(random_state).randint(np.iinfo(np.int32).max))


class _MixtureBase(ClusterMixin, BaseEstimator):

    def _check_fit_data(self, X, sample_weight=None):
        data = check_categorical(X, self.n_categories, sample_weight=sample_weight)
        self.n_categories_ = data.n_categories
        self.trials_ = data.trials
        return data

    def _check_data(self, X):
        check_is_fitted(self, "model_")
        return check_categorical(X, self.n_categories_, self.trials_)

    def _set_model(self, model, resp):
        self.model_ = model
        self.n_components_ = model.K
        self.weights_ = model.alpha.copy()
        self.theta_ = [b.copy() for b in model.theta_blocks()]
        self.labels_ = resp.argmax(axis=1)

    def predict_proba(self, X):
        return e_step(self._check_data(X), self.model_)

    def predict(self, X):
        return self.predict_proba(X).argmax(axis=1)

    def score_samples(self, X):
        """Per-observation log-likelihood (nats)."""
        data = self._check_data(X)
        logf = component_log_densities(data, self.model_.theta)
        with np.errstate(divide="ignore"):
            return np.logaddexp.reduce(logf + np.log(self.model_.alpha), axis=1)

    def score(self, X, y=None):
        """Mean per-observation log-likelihood."""
        return float(np.mean(self.score_samples(X)))

    def criterion_score(self, X, name="BIC"):
        """Information criterion of the fitted model on ``X`` (lower is better)."""
        data = self._check_data(X)
        resp = e_step(data, self.model_)
        return score(name, data, self.model_, resp).value

    def bic(self, X):
        return self.criterion_score(X, "BIC")

    def aic(self, X):
        return self.criterion_score(X, "AIC")


class MultinomialMixture(_MixtureBase):
    """Fixed-K mixture of multinomials fitted by maximum-likelihood EM.

    The best of ``n_init`` perturbed-empirical initializations (highest
    log-likelihood) is kept.
    """

    def __init__(self, n_components=2, n_init=1, delta=1e-6, max_iter=500,
                 smoothing=0.0, random_state=None, n_categories=None):
        self.n_components = n_components
        self.n_init = n_init
        self.delta = delta
        self.max_iter = max_iter
        self.smoothing = smoothing
        self.random_state = random_state
        self.n_categories = n_categories

    def fit(self, X, y=None, sample_weight=None):
        data = self._check_fit_data(X, sample_weight)
        rs = check_random_state(self.random_state)
        best = None
        for _ in range(self.n_init):
            rep = fit_em(data, self.n_components, delta=self.delta, max_iter=self.max_iter,
                         random_state=_seed(rs), smoothing=self.smoothing)
            if best is None or rep.log_likelihood > best.log_likelihood:
                best = rep
        self._set_model(best.model, best.responsibilities)
        self.log_likelihood_ = best.log_likelihood
        self.n_iter_ = best.iterations
        self.converged_ = best.converged
        self.objective_trace_ = list(best.objective_trace)
        return self


class MMLMultinomialMixture(_MixtureBase):
    """Mixture of multinomials whose number of components is chosen by EM-MML.

    After ``fit``, ``n_components_`` holds the selected count and
    ``message_length_`` the minimum message length (nats).
    """

    def __init__(self, k_min=1, k_max=25, delta=1e-6, max_inner_iter=500,
                 smoothing=0.0, random_state=None, n_categories=None):
        self.k_min = k_min
        self.k_max = k_max
        self.delta = delta
        self.max_inner_iter = max_inner_iter
        self.smoothing = smoothing
        self.random_state = random_state
        self.n_categories = n_categories

    def fit(self, X, y=None, sample_weight=None):
        data = self._check_fit_data(X, sample_weight)
        config = MmlConfig(k_min=self.k_min, k_max=self.k_max, delta=self.delta,
                           max_inner_iter=self.max_inner_iter,
                           seed=_seed(self.random_state), smoothing=self.smoothing)
        res = fit_em_mml(data, config)
        self._set_model(res.best_model, res.responsibilities)
        self.message_length_ = res.best_message_length
        self.trace_ = res.trace
        self.candidate_models_ = res.candidate_models
        return self


class CriterionMultinomialMixture(_MixtureBase):
    """Classical EM for each K in ``[k_min, k_max]``, K chosen by an information criterion."""

    def __init__(self, criterion="BIC", k_min=1, k_max=10, restarts=5, delta=1e-6,
                 max_iter=500, smoothing=0.0, random_state=None, n_categories=None):
        self.criterion = criterion
        self.k_min = k_min
        self.k_max = k_max
        self.restarts = restarts
        self.delta = delta
        self.max_iter = max_iter
        self.smoothing = smoothing
        self.random_state = random_state
        self.n_categories = n_categories

    def fit(self, X, y=None, sample_weight=None):
        crit = Criterion.parse(self.criterion)
        if self.k_min > self.k_max:
            raise ValueError("k_min must be <= k_max")
        data = self._check_fit_data(X, sample_weight)
        fits = fit_candidates(data, range(self.k_min, self.k_max + 1), self.restarts,
                              self.delta, _seed(self.random_state), self.max_iter,
                              self.smoothing)
        sel = select_from_fits(crit, data, fits, self.restarts)
        best = fits[sel.best_K]
        self._set_model(best.model, best.responsibilities)
        self.scores_ = {s.K: s.value for s in sel.per_K_scores}
        self.log_likelihood_ = best.log_likelihood
        return self
