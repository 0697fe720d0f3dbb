"""Clustering evaluation: hard assignment, association profiles and benchmarks."""

from __future__ import annotations

import dataclasses
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.stats import chi2_contingency

from .criteria import Criterion, fit_candidates, select_from_fits
from .data import CategoricalDataset
from .exceptions import CatmmlError, UndefinedAssociationError
from .mml import MmlConfig, fit_em_mml
from .synth import GenSpec, generate

logger = logging.getLogger(__name__)

__all__ = [
    "METHODS", "ExperimentResult", "AssociationProfile", "TimingPair", "TimingSummary",
    "hard_assign", "cramers_v", "cramers_v_table", "association_profile",
    "segment_profile", "derive_seed", "selection_rate_experiment", "selection_rates",
    "paired_timing",
]

EM_MML = "EM_MML"
METHODS = (EM_MML,) + tuple(c.value for c in Criterion)


def hard_assign(resp) -> np.ndarray:
    """0-based argmax component per row; ties go to the lowest index."""
    return np.asarray(resp).argmax(axis=1)


def cramers_v_table(table) -> float:
    """Cramér's V of a contingency table (Pearson chi-square, no continuity correction)."""
    table = np.asarray(table, dtype=float)
    table = table[table.sum(axis=1) > 0][:, table.sum(axis=0) > 0]
    r, c = table.shape
    if r < 2 or c < 2:
        raise UndefinedAssociationError(
            f"association is undefined for a {r}x{c} table (need at least 2x2)")
    chi2 = chi2_contingency(table, correction=False)[0]
    v = np.sqrt(chi2 / (table.sum() * min(r - 1, c - 1)))
    return float(min(v, 1.0))


def cramers_v(labels, values, weights=None) -> float:
    """Cramér's V between cluster labels and one categorical variable."""
    labels = np.asarray(labels)
    values = np.asarray(values)
    if labels.shape != values.shape:
        raise ValueError("labels and values must have the same length")
    _, li = np.unique(labels, return_inverse=True)
    _, vi = np.unique(values, return_inverse=True)
    table = np.zeros((li.max(initial=-1) + 1, vi.max(initial=-1) + 1))
    np.add.at(table, (li, vi), 1.0 if weights is None else np.asarray(weights, float))
    return cramers_v_table(table)


@dataclass
class AssociationProfile:
    variables: tuple
    values: np.ndarray
    sum_V: float

    def rows(self):
        return list(zip(self.variables, self.values.tolist()))


def association_profile(data: CategoricalDataset, labels) -> AssociationProfile:
    """Cramér's V of every variable against the cluster labels.

    Multi-trial variables contribute every trial outcome to the
    label-by-category table; observation weights scale their rows.
    """
    labels = np.asarray(labels)
    _, li = np.unique(labels, return_inverse=True)
    w = data.obs_weights
    values = []
    for block in data.variable_counts():
        table = np.zeros((li.max(initial=-1) + 1, block.shape[1]))
        np.add.at(table, li, block * w[:, None])
        values.append(cramers_v_table(table))
    values = np.asarray(values)
    return AssociationProfile(data.variables, values, float(values.sum()))


def segment_profile(model, variables, categories):
    """Per-segment category percentages: one row per (variable, category)."""
    rows = []
    o = model.offsets
    for l, var in enumerate(variables):
        for c, cat in enumerate(categories[l]):
            rows.append((var, cat, (100.0 * model.theta[:, o[l] + c]).tolist()))
    return rows


def derive_seed(*keys) -> int:
    """Deterministic 32-bit seed from a tuple of non-negative integers."""
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


@dataclass
class ExperimentResult:
    method: str
    selected_K: Optional[int]
    true_K: int
    separation: float
    wall_time_ms: float
    seed: int
    scenario: int = 0
    run: int = 0
    error: Optional[str] = None

    @property
    def correct(self) -> bool:
        return self.error is None and self.selected_K == self.true_K


def _run_one(task):
    (s_idx, run, spec, methods, k_min, k_max, restarts, delta, max_iter, seed) = task
    spec = dataclasses.replace(spec, seed=seed)
    out = []
    try:
        data, planted = generate(spec)
    except CatmmlError as exc:
        return [ExperimentResult(m, None, spec.k_true, float("nan"), float("nan"), seed,
                                 s_idx, run, f"generation: {exc}") for m in methods]
    sep = planted.separation
    if EM_MML in methods:
        t0 = time.perf_counter()
        try:
            res = fit_em_mml(data, MmlConfig(k_min=k_min, k_max=k_max, delta=delta,
                                             max_inner_iter=max_iter, seed=seed))
            k, err = res.k_nz, None
        except CatmmlError as exc:
            k, err = None, f"fit: {exc}"
        ms = 1000.0 * (time.perf_counter() - t0)
        out.append(ExperimentResult(EM_MML, k, spec.k_true, sep, ms, seed, s_idx, run, err))
    crits = [m for m in methods if m != EM_MML]
    if crits:
        t0 = time.perf_counter()
        try:
            fits = fit_candidates(data, range(k_min, k_max + 1), restarts, delta, seed,
                                  max_iter)
        except CatmmlError as exc:
            fits, fit_err = None, f"fit: {exc}"
        fit_ms = 1000.0 * (time.perf_counter() - t0)
        for m in crits:
            if fits is None:
                out.append(ExperimentResult(m, None, spec.k_true, sep, fit_ms, seed, s_idx,
                                            run, fit_err))
                continue
            t1 = time.perf_counter()
            best = select_from_fits(m, data, fits, restarts).best_K
            ms = fit_ms + 1000.0 * (time.perf_counter() - t1)
            out.append(ExperimentResult(m, best, spec.k_true, sep, ms, seed, s_idx, run))
    order = {m: i for i, m in enumerate(methods)}
    return sorted(out, key=lambda r: order[r.method])


def selection_rate_experiment(scenarios: Sequence[GenSpec], methods=METHODS,
                              runs_per_cell: int = 30, master_seed: int = 0,
                              k_min: int = 1, k_max: int = 10, restarts: int = 5,
                              delta: float = 1e-6, max_iter: int = 500,
                              jobs: int = 1) -> list:
    """Generate data for every scenario and run, and record each method's choice of K.

    Run ``r`` of scenario ``s`` uses seed ``derive_seed(master_seed, s, r)``
    both for generation and for every fit.  The information criteria share
    one set of sequential EM fits per run; their wall time is that shared
    fitting time plus their own scoring.  Results come back in
    (scenario, run, method) order regardless of ``jobs``.
    """
    if runs_per_cell < 1:
        raise ValueError("runs_per_cell must be >= 1")
    methods = tuple(m if m == EM_MML else Criterion.parse(m).value for m in methods)
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise ValueError(f"unknown methods: {sorted(unknown)}")
    tasks = [(s, r, spec, methods, k_min, k_max, restarts, delta, max_iter,
              derive_seed(master_seed, s, r))
             for s, spec in enumerate(scenarios) for r in range(runs_per_cell)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_run_one, tasks))
    else:
        chunks = [_run_one(t) for t in tasks]
    return [r for chunk in chunks for r in chunk]


def selection_rates(results, scenarios: Optional[Sequence[GenSpec]] = None) -> list:
    """Correct-selection rate per (scenario, method); errored runs are excluded."""
    cells = {}
    for r in results:
        cells.setdefault((r.scenario, r.method), []).append(r)
    order = {m: i for i, m in enumerate(METHODS)}
    rows = []
    for (s, m), rs in sorted(cells.items(), key=lambda kv: (kv[0][0], order[kv[0][1]])):
        ok = [r for r in rs if r.error is None]
        row = {
            "scenario": s,
            "method": m,
            "true_K": rs[0].true_K,
            "runs": len(ok),
            "errors": len(rs) - len(ok),
            "correct": sum(r.correct for r in ok),
            "rate": (sum(r.correct for r in ok) / len(ok)) if ok else float("nan"),
            "mean_separation": float(np.mean([r.separation for r in ok])) if ok else float("nan"),
        }
        if scenarios is not None:
            row["sep_lo"], row["sep_hi"] = scenarios[s].target_separation
        rows.append(row)
    return rows


@dataclass
class TimingPair:
    run: int
    seed: int
    separation: float
    mml_seconds: float
    bic_seconds: float
    mml_K: int
    bic_K: int

    @property
    def ratio(self) -> float:
        return self.mml_seconds / self.bic_seconds


@dataclass
class TimingSummary:
    pairs: list = field(default_factory=list)

    @property
    def mean_mml(self) -> float:
        return float(np.mean([p.mml_seconds for p in self.pairs]))

    @property
    def mean_bic(self) -> float:
        return float(np.mean([p.bic_seconds for p in self.pairs]))

    @property
    def mean_ratio(self) -> float:
        """Mean of the per-pair EM-MML / BIC time ratios."""
        return float(np.mean([p.ratio for p in self.pairs]))

    @property
    def ratio_of_means(self) -> float:
        return self.mean_mml / self.mean_bic

    def as_dict(self) -> dict:
        return {"runs": len(self.pairs), "mean_mml_seconds": self.mean_mml,
                "mean_bic_seconds": self.mean_bic, "mean_ratio": self.mean_ratio,
                "ratio_of_means": self.ratio_of_means}


def paired_timing(spec: GenSpec, runs: int = 30, k_min: int = 1, k_max: int = 10,
                  restarts: int = 5, master_seed: int = 0, delta: float = 1e-6,
                  max_iter: int = 500) -> TimingSummary:
    """Time EM-MML against sequential BIC selection on the same datasets.

    Both methods of a pair run back to back on one dataset with the same
    seed.
    """
    if runs < 2:
        raise ValueError("runs must be >= 2")
    summary = TimingSummary()
    for r in range(runs):
        seed = derive_seed(master_seed, r)
        data, planted = generate(dataclasses.replace(spec, seed=seed))
        t0 = time.perf_counter()
        mml = fit_em_mml(data, MmlConfig(k_min=k_min, k_max=k_max, delta=delta,
                                         max_inner_iter=max_iter, seed=seed))
        t1 = time.perf_counter()
        fits = fit_candidates(data, range(k_min, k_max + 1), restarts, delta, seed, max_iter)
        bic = select_from_fits(Criterion.BIC, data, fits, restarts)
        t2 = time.perf_counter()
        summary.pairs.append(TimingPair(r, seed, planted.separation, t1 - t0, t2 - t1,
                                        mml.k_nz, bic.best_K))
    return summary
