"""Input validation shared by the estimators."""

import numpy as np
from sklearn.utils.validation import check_array

from .data import CategoricalDataset, from_codes, validate_dataset

__all__ = ["check_categorical", "check_sample_weight"]


def check_sample_weight(sample_weight, n):
    if sample_weight is None:
        return None
    w = np.asarray(sample_weight, dtype=float).reshape(-1)
    if w.shape != (n,):
        raise ValueError(f"sample_weight has {w.size} entries, expected {n}")
    return w


def check_categorical(X, n_categories=None, trials=None, sample_weight=None):
    """Coerce estimator input to a :class:`CategoricalDataset`.

    ``X`` may already be a dataset.  Otherwise it is a 2-d integer array
    holding either 0-based category codes (one column per variable) or
    concatenated count blocks (``sum(n_categories)`` columns).  Without
    ``n_categories``, codes are assumed and each variable's category count
    is inferred as its largest code plus one.
    """
    if isinstance(X, CategoricalDataset):
        if n_categories is not None and tuple(X.n_categories) != tuple(n_categories):
            raise ValueError(
                f"dataset has n_categories={X.n_categories}, expected {tuple(n_categories)}")
        if sample_weight is not None:
            X = CategoricalDataset(X.counts, X.n_categories, X.trials,
                                   check_sample_weight(sample_weight, X.n),
                                   X.variables, X.categories, X.labels)
        return X
    arr = check_array(X, dtype=None, ensure_all_finite=True)
    if not (np.issubdtype(arr.dtype, np.integer) or np.issubdtype(arr.dtype, np.bool_)):
        arr = np.asarray(arr, dtype=float)
        if np.any(arr != np.round(arr)):
            raise ValueError("categorical input must contain integers")
    arr = arr.astype(np.int64)
    w = check_sample_weight(sample_weight, arr.shape[0])
    if n_categories is None:
        return from_codes(arr, weights=w)
    n_categories = tuple(int(c) for c in n_categories)
    # Every C_l >= 2, so the two layouts never have the same width.
    if arr.shape[1] == len(n_categories):
        if trials is not None and any(t != 1 for t in trials):
            raise ValueError("category codes need single-trial variables; pass counts")
        return from_codes(arr, n_categories, weights=w)
    if arr.shape[1] == sum(n_categories):
        return validate_dataset(arr, n_categories=n_categories, trials=trials, weights=w)
    raise ValueError(
        f"X has {arr.shape[1]} columns; expected {len(n_categories)} category codes "
        f"or {sum(n_categories)} count columns")
