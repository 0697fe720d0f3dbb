"""EM with minimum-message-length model selection for multinomial mixtures.

The mixing weights get a penalized update that can drive a component's
weight to exactly zero, removing it.  Once the penalized EM settles, the
weakest surviving component is removed by force and the process restarts
from the reduced model, down to ``k_min`` components.  The state with the
smallest message length over the whole path is returned.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .data import CategoricalDataset
from .exceptions import AnnihilationError, DegenerateLikelihoodError
from .model import (
    MixtureModel, _normalize, component_log_densities, init_model, log_likelihood,
    relative_change, weighted_theta,
)

logger = logging.getLogger(__name__)

__all__ = [
    "MmlConfig", "MmlTraceEntry", "MmlResult", "message_length", "penalized_alpha",
    "m_step_mml_alpha", "component_annihilation_sweep", "fit_em_mml",
]

INITIAL = "initial"
INNER = "inner-iteration"
ANNIHILATION = "annihilation"
FORCED_REMOVAL = "forced-removal"


@dataclass
class MmlConfig:
    k_min: int = 1
    k_max: int = 25
    delta: float = 1e-6
    max_inner_iter: int = 500
    seed: Optional[int] = None
    smoothing: float = 0.0
    keep_candidates: bool = True

    def __post_init__(self):
        if self.k_min < 1:
            raise ValueError("k_min must be >= 1")
        if self.k_max < self.k_min:
            raise ValueError(f"k_max ({self.k_max}) must be >= k_min ({self.k_min})")
        if self.delta <= 0:
            raise ValueError("delta must be > 0")
        if self.max_inner_iter < 1:
            raise ValueError("max_inner_iter must be >= 1")


@dataclass
class MmlTraceEntry:
    """One recorded state of an EM-MML run.

    ``candidate`` marks states reached at the end of a middle loop; only
    those compete for the minimum message length.  ``converged`` tells
    whether that loop met the ``delta`` threshold before ``max_inner_iter``.
    """

    k_nz: int
    log_likelihood: float
    message_length: float
    event: str
    sweep: int = 0
    candidate: bool = False
    converged: bool = False
    component: Optional[int] = None


@dataclass
class MmlResult:
    best_model: MixtureModel
    best_message_length: float
    trace: list
    candidate_models: dict = field(default_factory=dict)
    responsibilities: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def k_nz(self) -> int:
        return self.best_model.K


def message_length(data: CategoricalDataset, model: MixtureModel) -> float:
    """Message length in nats; zero-weight components contribute nothing."""
    return _message_length(log_likelihood(data, model), model.alpha, model.M,
                           data.total_weight)


def _message_length(ll, alpha, M, n):
    a = alpha[alpha > 0]
    k_nz = a.size
    return (M / 2.0 * np.log(n * a / 12.0).sum()
            + k_nz / 2.0 * np.log(n / 12.0)
            + k_nz * (M + 1) / 2.0
            - ll)


def penalized_alpha(col_sums, penalty):
    """Shrink every column sum by ``penalty``, clip at zero and renormalize.

    Raises :class:`AnnihilationError` when nothing survives.
    """
    num = np.maximum(0.0, np.asarray(col_sums, dtype=float) - penalty)
    total = num.sum()
    if total <= 0:
        raise AnnihilationError(
            f"every component was annihilated (largest column sum "
            f"{np.max(col_sums):.4g} <= penalty {penalty:.4g}); the dataset is too "
            "small for this many parameters, lower k_max")
    return num / total


def m_step_mml_alpha(resp: np.ndarray, n_params: int, K: int, weights=None):
    """Penalized mixing-weight update.

    The penalty per component is ``(n_params - K + 1) / (2K)``, which equals
    half the per-component parameter dimension.  Returns the new weights and
    the indices of annihilated components.
    """
    resp = np.asarray(resp, dtype=float)
    if resp.shape[1] != K:
        raise ValueError(f"responsibilities have {resp.shape[1]} columns, K={K}")
    col_sums = resp.sum(axis=0) if weights is None else weights @ resp
    alpha = penalized_alpha(col_sums, (n_params - K + 1) / (2.0 * K))
    return alpha, np.flatnonzero(alpha == 0)


class _State:
    """Mutable EM-MML state with cached per-component log densities."""

    def __init__(self, data, model, smoothing=0.0):
        self.data = data
        self.w = data.obs_weights
        self.n = data.total_weight
        self.M = model.M
        self.smoothing = smoothing
        self.alpha = model.alpha.copy()
        self.theta = model.theta.copy()
        self.logf = component_log_densities(data, self.theta)
        self.refresh()

    @property
    def K(self):
        return self.alpha.size

    def refresh(self):
        with np.errstate(divide="ignore"):
            log_joint = self.logf + np.log(self.alpha)[None, :]
        self.ll, self.resp = _normalize(log_joint, self.w)

    def message_length(self):
        return _message_length(self.ll, self.alpha, self.M, self.n)

    def remove(self, k):
        """Delete component ``k``; the state is left untouched if that would make
        some observation impossible (DegenerateLikelihoodError)."""
        alpha = np.delete(self.alpha, k)
        alpha /= alpha.sum()
        logf = np.delete(self.logf, k, axis=1)
        with np.errstate(divide="ignore"):
            ll, resp = _normalize(logf + np.log(alpha)[None, :], self.w)
        self.alpha, self.logf, self.ll, self.resp = alpha, logf, ll, resp
        self.theta = np.delete(self.theta, k, axis=0)

    def update_component(self, k, a_k):
        self.alpha[k] = a_k
        self.alpha /= self.alpha.sum()
        if self.w @ self.resp[:, k] > 0:
            self.theta[k] = weighted_theta(self.data, self.resp[:, [k]], self.smoothing)[0]
            self.logf[:, k] = component_log_densities(self.data, self.theta[k])[:, 0]
        self.refresh()

    def model(self):
        return MixtureModel(self.alpha.copy(), self.theta.copy(),
                            self.data.n_categories, self.data.trials)

    def sweep(self, k_min=1, on_annihilate=None):
        """One descending component-wise pass; returns annihilated original indices."""
        removed = []
        for k in range(self.K - 1, -1, -1):
            col_sums = self.w @ self.resp
            # (C - K + 1) / (2K) with C recomputed for the current K is M / 2.
            a_k = penalized_alpha(col_sums, self.M / 2.0)[k]
            if a_k == 0 and self.K > k_min:
                try:
                    self.remove(k)
                except DegenerateLikelihoodError as exc:
                    logger.warning("keeping component %d, its removal is degenerate: %s",
                                   k, exc)
                else:
                    removed.append(k)
                    if on_annihilate is not None:
                        on_annihilate(k)
                    continue
            if a_k == 0:
                # Removal would go below k_min or leave an observation with zero
                # density: fall back to the unpenalized share.
                a_k = col_sums[k] / col_sums.sum()
            self.update_component(k, a_k)
        return removed


def component_annihilation_sweep(model: MixtureModel, resp: np.ndarray,
                                 data: CategoricalDataset, k_min: int = 1,
                                 smoothing: float = 0.0):
    """Run one component-wise EM-MML sweep from the last component down to the first.

    ``resp`` must be the responsibilities of ``model`` on ``data``; they are
    recomputed internally after every update.  Returns the updated model,
    its responsibilities and the (pre-sweep) indices of annihilated
    components.
    """
    state = _State(data, model, smoothing)
    if resp is not None and np.asarray(resp).shape != state.resp.shape:
        raise ValueError("responsibilities do not match the model")
    removed = state.sweep(k_min)
    return state.model(), state.resp, removed


def fit_em_mml(data: CategoricalDataset, config: Optional[MmlConfig] = None,
               init: Optional[MixtureModel] = None) -> MmlResult:
    """Estimate a multinomial mixture and its number of components in one run.

    Starts from ``config.k_max`` components (or ``init``).  Each middle loop
    repeats component-wise sweeps until the relative log-likelihood change is
    below ``config.delta``; the resulting state is a candidate.  Then the
    component with the smallest weight (lowest index on ties) is removed
    and the loop repeats while more than ``config.k_min`` components remain.
    """
    config = config or MmlConfig()
    if init is None:
        init = init_model(data, config.k_max, config.seed)
    init.check_compatible(data)
    state = _State(data, init, config.smoothing)
    if state.K < config.k_min:
        raise ValueError(f"initial model has {state.K} components, fewer than k_min")

    trace = [MmlTraceEntry(state.K, state.ll, state.message_length(), INITIAL)]
    best_ml = np.inf
    best = None
    best_resp = None
    candidates = {}
    sweep_no = 0

    def _log_annihilation(k):
        trace.append(MmlTraceEntry(state.K, state.ll, state.message_length(),
                                   ANNIHILATION, sweep_no, component=k))

    while True:
        prev = state.ll
        converged = False
        for _ in range(config.max_inner_iter):
            sweep_no += 1
            state.sweep(config.k_min, _log_annihilation)
            entry = MmlTraceEntry(state.K, state.ll, state.message_length(), INNER, sweep_no)
            trace.append(entry)
            if relative_change(state.ll, prev) < config.delta:
                converged = True
                break
            prev = state.ll
        if not converged:
            logger.warning("middle loop at k_nz=%d hit max_inner_iter=%d",
                           state.K, config.max_inner_iter)
        entry.candidate = True
        entry.converged = converged
        ml = entry.message_length
        if ml < best_ml:
            best_ml, best, best_resp = ml, state.model(), state.resp.copy()
        if config.keep_candidates and ml < candidates.get(state.K, (np.inf,))[0]:
            candidates[state.K] = (ml, state.model())
        if state.K <= config.k_min:
            break
        k_remove = int(np.argmin(state.alpha))
        try:
            state.remove(k_remove)
        except DegenerateLikelihoodError as exc:
            warnings.warn(
                f"stopping at {state.K} components, removing component {k_remove} is "
                f"degenerate ({exc}); set smoothing > 0 to explore smaller models",
                RuntimeWarning, stacklevel=2)
            break
        trace.append(MmlTraceEntry(state.K, state.ll, state.message_length(),
                                   FORCED_REMOVAL, sweep_no, component=k_remove))

    logger.debug("EM-MML selected %d components (message length %.6g)", best.K, best_ml)
    return MmlResult(best, float(best_ml), trace,
                     {k: m for k, (_, m) in sorted(candidates.items())}, best_resp)
