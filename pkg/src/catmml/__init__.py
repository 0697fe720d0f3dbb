"""Mixtures of multinomials for categorical data, with EM-MML model selection."""

__version__ = "0.1.0"

from .criteria import Criterion, fit_candidates, score, select_by_criterion, select_from_fits
from .data import CategoricalDataset, from_codes, validate_dataset
from .estimators import CriterionMultinomialMixture, MMLMultinomialMixture, MultinomialMixture
from .evaluation import (
    association_profile, cramers_v, hard_assign, paired_timing, selection_rate_experiment,
    selection_rates,
)
from .io import load_dataset, load_model, save_dataset, save_model
from .mml import MmlConfig, fit_em_mml, message_length
from .model import MixtureModel, e_step, fit_em, log_likelihood
from .synth import GenSpec, generate, separation

__all__ = [
    "CategoricalDataset", "Criterion", "CriterionMultinomialMixture", "GenSpec",
    "MMLMultinomialMixture", "MixtureModel", "MmlConfig", "MultinomialMixture",
    "association_profile", "cramers_v", "e_step", "fit_candidates", "fit_em", "fit_em_mml",
    "from_codes", "generate", "hard_assign", "load_dataset", "load_model", "log_likelihood",
    "message_length", "paired_timing", "save_dataset", "save_model", "score",
    "select_by_criterion", "select_from_fits", "selection_rate_experiment",
    "selection_rates", "separation", "validate_dataset",
]
