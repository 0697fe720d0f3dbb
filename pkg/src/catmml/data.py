"""Categorical datasets stored as per-variable category-count blocks."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np
from scipy.special import gammaln

from .exceptions import DatasetValidationError, IdentifiabilityWarning

__all__ = ["CategoricalDataset", "validate_dataset", "from_codes", "check_identifiability"]


@dataclass(eq=False)
class CategoricalDataset:
    """n observations of L categorical (multinomial) variables.

    ``counts`` is an ``(n, sum(n_categories))`` integer array holding, for
    each observation, the category counts of every variable laid out in
    consecutive blocks.  Variable ``l`` occupies columns
    ``offsets[l]:offsets[l + 1]`` and each block row sums to ``trials[l]``.

    ``weights`` is ``None`` for unweighted data; otherwise one positive
    weight per observation that multiplies its contribution to every sum
    over observations.
    """

    counts: np.ndarray
    n_categories: tuple
    trials: tuple
    weights: Optional[np.ndarray] = None
    variables: Optional[tuple] = None
    categories: Optional[tuple] = None
    labels: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        self.n_categories = tuple(int(c) for c in self.n_categories)
        self.trials = tuple(int(t) for t in self.trials)
        if self.weights is not None:
            self.weights = np.asarray(self.weights, dtype=float)
        if self.variables is None:
            self.variables = tuple(f"V{l + 1}" for l in range(self.L))
        else:
            self.variables = tuple(str(v) for v in self.variables)
        if self.categories is None:
            self.categories = tuple(
                tuple(str(c + 1) for c in range(C)) for C in self.n_categories)
        else:
            self.categories = tuple(tuple(str(c) for c in cats) for cats in self.categories)
        _check_invariants(self)

    @property
    def n(self) -> int:
        return self.counts.shape[0]

    @property
    def L(self) -> int:
        return len(self.n_categories)

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.n_categories)])

    @property
    def total_weight(self) -> float:
        """Effective sample size: n, or the sum of weights."""
        if self.weights is None:
            return float(self.n)
        return float(self.weights.sum())

    @property
    def obs_weights(self) -> np.ndarray:
        if self.weights is None:
            return np.ones(self.n)
        return self.weights

    @cached_property
    def log_coef(self) -> np.ndarray:
        """Per-observation log multinomial coefficient sum_l log(n_l! / prod_c y_ilc!)."""
        trials = np.asarray(self.trials, dtype=float)
        return gammaln(trials + 1.0).sum() - gammaln(self.counts + 1.0).sum(axis=1)

    @cached_property
    def counts_f(self) -> np.ndarray:
        return self.counts.astype(float)

    def block(self, l: int) -> np.ndarray:
        o = self.offsets
        return self.counts[:, o[l]:o[l + 1]]

    def variable_counts(self) -> list:
        """Per-variable ``(n, C_l)`` count arrays."""
        return [self.block(l) for l in range(self.L)]

    def subset(self, index) -> "CategoricalDataset":
        index = np.asarray(index)
        return CategoricalDataset(
            self.counts[index], self.n_categories, self.trials,
            weights=None if self.weights is None else self.weights[index],
            variables=self.variables, categories=self.categories,
            labels=None if self.labels is None else self.labels[index])

    def replicate(self) -> "CategoricalDataset":
        """Expand integer weights into repeated rows."""
        if self.weights is None:
            return self
        reps = np.rint(self.weights).astype(np.int64)
        if not np.allclose(reps, self.weights):
            raise DatasetValidationError("replicate mode needs integer weights")
        index = np.repeat(np.arange(self.n), reps)
        out = self.subset(index)
        out.weights = None
        return out

    def codes(self) -> np.ndarray:
        """Category index of each cell, only defined when every n_l is 1."""
        if any(t != 1 for t in self.trials):
            raise ValueError("category codes are only defined for single-trial variables")
        return np.column_stack([b.argmax(axis=1) for b in self.variable_counts()])


def _check_invariants(data: CategoricalDataset) -> None:
    counts = data.counts
    if counts.ndim != 2:
        raise DatasetValidationError("counts must be a 2-d array")
    if counts.shape[1] != sum(data.n_categories):
        raise DatasetValidationError(
            f"counts has {counts.shape[1]} columns, expected {sum(data.n_categories)}")
    if len(data.trials) != data.L:
        raise DatasetValidationError("one trial count per variable is required")
    for l, (C, T) in enumerate(zip(data.n_categories, data.trials)):
        if C < 2:
            raise DatasetValidationError(
                f"variable {data.variables[l]!r} has {C} categories, at least 2 required",
                variable=l)
        if T < 1:
            raise DatasetValidationError(
                f"variable {data.variables[l]!r} has trial count {T}, at least 1 required",
                variable=l)
    if len(data.variables) != data.L or len(data.categories) != data.L:
        raise DatasetValidationError("variable names and category dictionaries must match L")
    for l, cats in enumerate(data.categories):
        if len(cats) != data.n_categories[l]:
            raise DatasetValidationError(
                f"dictionary for {data.variables[l]!r} has {len(cats)} entries, "
                f"expected {data.n_categories[l]}", variable=l)
    neg = np.argwhere(counts < 0)
    if neg.size:
        i, col = neg[0]
        l = int(np.searchsorted(data.offsets, col, side="right") - 1)
        raise DatasetValidationError(
            f"negative count at observation {i}, variable {l}", row=int(i), variable=l)
    o = data.offsets
    for l in range(data.L):
        sums = counts[:, o[l]:o[l + 1]].sum(axis=1)
        bad = np.flatnonzero(sums != data.trials[l])
        if bad.size:
            i = int(bad[0])
            raise DatasetValidationError(
                f"observation {i}, variable {l}: counts sum to {sums[i]}, "
                f"expected {data.trials[l]}", row=i, variable=l)
    if data.weights is not None:
        if data.weights.shape != (data.n,):
            raise DatasetValidationError("one weight per observation is required")
        if not np.all(np.isfinite(data.weights)) or np.any(data.weights <= 0):
            raise DatasetValidationError("weights must be finite and > 0")


def check_identifiability(trials: Sequence[int], k_max: int) -> bool:
    """Warn when ``min(trials) < 2 * k_max - 1``; return whether the condition holds."""
    t = min(trials)
    if t < 2 * k_max - 1:
        warnings.warn(
            f"minimum trial count {t} is below 2*K-1 = {2 * k_max - 1}; "
            "the mixture may not be identifiable",
            IdentifiabilityWarning, stacklevel=3)
        return False
    return True


def validate_dataset(raw, n_categories=None, trials=None, k_max=None, weights=None,
                     variables=None, categories=None) -> CategoricalDataset:
    """Build a validated :class:`CategoricalDataset` from an observation table.

    ``raw`` is either a sequence of rows, each row holding L per-variable
    count vectors, or a 2-d array of concatenated count blocks (in which case
    ``n_categories`` is required).  Trial counts are taken from ``trials`` or
    from the first row.  When ``k_max`` is given a non-fatal
    :class:`IdentifiabilityWarning` is emitted if ``min(trials) < 2*k_max - 1``.
    """
    if isinstance(raw, np.ndarray) and raw.ndim == 2 and n_categories is not None:
        counts = raw
    else:
        rows = list(raw)
        if not rows:
            raise DatasetValidationError("empty observation table")
        arity = [len(v) for v in rows[0]]
        for i, row in enumerate(rows):
            if len(row) != len(arity):
                raise DatasetValidationError(
                    f"observation {i} has {len(row)} variables, expected {len(arity)}", row=i)
            for l, v in enumerate(row):
                if len(v) != arity[l]:
                    raise DatasetValidationError(
                        f"observation {i}, variable {l}: {len(v)} categories, "
                        f"expected {arity[l]}", row=i, variable=l)
        if n_categories is None:
            n_categories = arity
        counts = np.array([np.concatenate([np.asarray(v) for v in row]) for row in rows])
    counts = np.asarray(counts)
    if not np.issubdtype(counts.dtype, np.integer):
        if not np.all(np.isfinite(counts)) or np.any(counts != np.round(counts)):
            raise DatasetValidationError("counts must be integers")
    counts = counts.astype(np.int64)
    n_categories = tuple(int(c) for c in n_categories)
    if trials is None:
        if counts.shape[0] == 0:
            raise DatasetValidationError("empty observation table")
        o = np.concatenate([[0], np.cumsum(n_categories)])
        trials = tuple(int(counts[0, o[l]:o[l + 1]].sum()) for l in range(len(n_categories)))
    data = CategoricalDataset(counts, n_categories, trials, weights=weights,
                              variables=variables, categories=categories)
    if k_max is not None:
        check_identifiability(data.trials, k_max)
    return data


def from_codes(codes, n_categories=None, weights=None, variables=None,
               categories=None) -> CategoricalDataset:
    """One-hot encode an ``(n, L)`` array of 0-based category codes (n_l = 1)."""
    codes = np.asarray(codes)
    if codes.ndim != 2:
        raise DatasetValidationError("codes must be a 2-d array")
    if codes.size and (np.any(codes < 0) or np.any(codes != np.round(codes))):
        raise DatasetValidationError("category codes must be non-negative integers")
    codes = codes.astype(np.int64)
    if n_categories is None:
        n_categories = tuple(int(codes[:, l].max()) + 1 for l in range(codes.shape[1]))
    n_categories = tuple(int(c) for c in n_categories)
    if len(n_categories) != codes.shape[1]:
        raise DatasetValidationError("n_categories must have one entry per column")
    blocks = []
    for l, C in enumerate(n_categories):
        bad = np.flatnonzero(codes[:, l] >= C)
        if bad.size:
            raise DatasetValidationError(
                f"observation {bad[0]}, variable {l}: code {codes[bad[0], l]} >= {C}",
                row=int(bad[0]), variable=l)
        blocks.append(np.eye(C, dtype=np.int64)[codes[:, l]])
    counts = np.hstack(blocks) if blocks else np.zeros((codes.shape[0], 0), np.int64)
    return CategoricalDataset(counts, n_categories, (1,) * len(n_categories),
                              weights=weights, variables=variables, categories=categories)
