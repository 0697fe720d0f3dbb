"""Dataset CSV files, JSON model files and CSV reports.

Two dataset layouts are supported:

* categorical: one column per variable holding category names (every
  variable has a single trial);
* counts: one column per (variable, category) pair named
  ``variable:category`` holding category counts.

Reserved columns ``label`` (planted 1-based component ids) and ``weight``
(positive observation weights) are read into the dataset's side fields and
never clustered.  Lines starting with ``#`` are comments; a comment of the
form ``# catmml-dictionary: {...}`` fixes the category dictionaries.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .data import CategoricalDataset
from .exceptions import DatasetValidationError, ModelFileError
from .model import MixtureModel

__all__ = [
    "LABEL_COLUMN", "WEIGHT_COLUMN", "MODEL_FORMAT", "MODEL_VERSION", "ModelFile",
    "load_dataset", "save_dataset", "save_model", "load_model", "load_dictionary",
    "write_csv", "fmt",
]

LABEL_COLUMN = "label"
WEIGHT_COLUMN = "weight"
DICT_PREFIX = "# catmml-dictionary:"
MODEL_FORMAT = "catmml-model"
MODEL_VERSION = 1
COUNT_SEP = ":"


def fmt(x) -> str:
    """Six significant digits for reals; other values via ``str``."""
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.6g}"
    if x is None:
        return ""
    return str(x)


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def load_dictionary(path) -> dict:
    """Read ``{"variable": ["cat1", "cat2", ...], ...}`` from a JSON file."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict) or not all(isinstance(v, list) for v in raw.values()):
        raise DatasetValidationError(f"{path}: dictionary must map variables to lists")
    return {str(k): [str(c) for c in v] for k, v in raw.items()}


def _read_rows(path):
    header, rows, dictionary = None, [], None
    with open(path, newline="", encoding="utf-8") as fh:
        lines = []
        for lineno, line in enumerate(fh, start=1):
            if line.startswith("#"):
                if line.startswith(DICT_PREFIX):
                    try:
                        dictionary = json.loads(line[len(DICT_PREFIX):])
                    except json.JSONDecodeError as exc:
                        raise DatasetValidationError(
                            f"{path}:{lineno}: malformed dictionary comment: {exc}") from None
                continue
            if line.strip():
                lines.append((lineno, line))
    reader = csv.reader([l for _, l in lines])
    for (lineno, _), row in zip(lines, reader):
        row = [c.strip() for c in row]
        if header is None:
            header = row
            continue
        if len(row) != len(header):
            raise DatasetValidationError(
                f"{path}:{lineno}: {len(row)} fields, expected {len(header)}",
                row=len(rows))
        rows.append((lineno, row))
    if header is None:
        raise DatasetValidationError(f"{path}: no header row")
    return header, rows, dictionary


def _parse_labels(values):
    try:
        ints = np.array([int(v) for v in values])
        return ints - 1
    except ValueError:
        _, first = np.unique(values, return_index=True)
        order = {values[i]: j for j, i in enumerate(sorted(first))}
        return np.array([order[v] for v in values])


def load_dataset(path, dictionary: Optional[dict] = None, label_column: str = LABEL_COLUMN,
                 weight_column: str = WEIGHT_COLUMN, weights_mode: str = "fractional",
                 exclude=()) -> CategoricalDataset:
    """Load a dataset CSV.

    Categories are numbered by first appearance unless a dictionary is given
    (argument or embedded comment); with a dictionary, unknown values are
    errors.  ``weights_mode`` is ``"fractional"`` (weights kept on the
    dataset) or ``"replicate"`` (integer weights expanded into repeated rows).
    """
    path = Path(path)
    if weights_mode not in ("fractional", "replicate"):
        raise ValueError(f"unknown weights mode {weights_mode!r}")
    header, rows, embedded = _read_rows(path)
    if not rows:
        raise DatasetValidationError(f"{path}: no observations")
    if len(set(header)) != len(header):
        raise DatasetValidationError(f"{path}: duplicate column names")
    side = {label_column, weight_column} | set(exclude)
    data_cols = [j for j, h in enumerate(header) if h not in side]
    if not data_cols:
        raise DatasetValidationError(f"{path}: no variable columns")
    fixed = dictionary
    if fixed is None and embedded is not None:
        fixed = dict(zip(embedded["variables"], embedded["categories"]))

    counts_layout = all(COUNT_SEP in header[j] for j in data_cols)
    if counts_layout:
        variables, categories, col_index = [], [], []
        for j in data_cols:
            var, cat = header[j].rsplit(COUNT_SEP, 1)
            if var not in variables:
                variables.append(var)
                categories.append([])
            categories[variables.index(var)].append(cat)
            col_index.append(j)
        try:
            counts = np.array([[int(row[j]) for j in col_index] for _, row in rows])
        except ValueError as exc:
            raise DatasetValidationError(f"{path}: non-integer count ({exc})") from None
        # Reorder columns so each variable's categories are contiguous.
        order = []
        for v, cats in zip(variables, categories):
            order += [col_index.index(header.index(f"{v}{COUNT_SEP}{c}")) for c in cats]
        counts = counts[:, order]
        n_cat = [len(c) for c in categories]
        o = np.concatenate([[0], np.cumsum(n_cat)])
        trials = [int(counts[0, o[l]:o[l + 1]].sum()) for l in range(len(n_cat))]
    else:
        variables = [header[j] for j in data_cols]
        categories, blocks = [], []
        for l, j in enumerate(data_cols):
            values = [row[j] for _, row in rows]
            var = header[j]
            if fixed is not None and var in fixed:
                cats = list(fixed[var])
                lookup = {c: i for i, c in enumerate(cats)}
                codes = []
                for (lineno, _), v in zip(rows, values):
                    if v not in lookup:
                        raise DatasetValidationError(
                            f"{path}:{lineno}: unknown category {v!r} in column {var!r}",
                            row=len(codes), variable=l)
                    codes.append(lookup[v])
            else:
                cats, lookup, codes = [], {}, []
                for (lineno, _), v in zip(rows, values):
                    if v == "":
                        raise DatasetValidationError(
                            f"{path}:{lineno}: missing value in column {var!r}",
                            row=len(codes), variable=l)
                    if v not in lookup:
                        lookup[v] = len(cats)
                        cats.append(v)
                    codes.append(lookup[v])
            if len(cats) < 2:
                raise DatasetValidationError(
                    f"{path}: column {var!r} has a single category {cats!r}", variable=l)
            categories.append(cats)
            blocks.append(np.eye(len(cats), dtype=np.int64)[codes])
        counts = np.hstack(blocks)
        trials = [1] * len(variables)

    weights = None
    if weight_column in header:
        j = header.index(weight_column)
        try:
            weights = np.array([float(row[j]) for _, row in rows])
        except ValueError as exc:
            raise DatasetValidationError(f"{path}: bad weight ({exc})") from None
    labels = None
    if label_column in header:
        j = header.index(label_column)
        labels = _parse_labels([row[j] for _, row in rows])

    data = CategoricalDataset(counts, [len(c) for c in categories], trials, weights=weights,
                              variables=variables, categories=categories, labels=labels)
    if weights_mode == "replicate":
        data = data.replicate()
    return data


def save_dataset(data: CategoricalDataset, path) -> None:
    """Write a dataset in the layout :func:`load_dataset` reads back identically."""
    single = all(t == 1 for t in data.trials)
    meta = {"variables": list(data.variables),
            "categories": [list(c) for c in data.categories]}
    if single:
        header = list(data.variables)
        codes = data.codes()
        body = [[data.categories[l][c] for l, c in enumerate(row)] for row in codes]
    else:
        header = [f"{v}{COUNT_SEP}{c}" for v, cats in zip(data.variables, data.categories)
                  for c in cats]
        body = [[str(x) for x in row] for row in data.counts]
    if data.labels is not None:
        header.append(LABEL_COLUMN)
        body = [row + [str(int(k) + 1)] for row, k in zip(body, data.labels)]
    if data.weights is not None:
        header.append(WEIGHT_COLUMN)
        body = [row + [repr(float(w))] for row, w in zip(body, data.weights)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"{DICT_PREFIX} {json.dumps(meta, separators=(',', ':'))}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(body)


@dataclass
class ModelFile:
    model: MixtureModel
    variables: tuple
    categories: tuple
    metadata: dict = field(default_factory=dict)


def save_model(path, model: MixtureModel, variables=None, categories=None,
               metadata: Optional[dict] = None) -> None:
    """Serialize a model to versioned JSON; zero-weight components are dropped."""
    model = model.drop_empty()
    if variables is None:
        variables = [f"V{l + 1}" for l in range(model.L)]
    if categories is None:
        categories = [[str(c + 1) for c in range(C)] for C in model.n_categories]
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "K": model.K,
        "L": model.L,
        "n_categories": list(model.n_categories),
        "trials": list(model.trials),
        "variables": list(variables),
        "categories": [list(c) for c in categories],
        "alpha": [float(a) for a in model.alpha],
        "theta": [[[float(x) for x in block[k]] for block in model.theta_blocks()]
                  for k in range(model.K)],
        "metadata": _jsonable(metadata or {}),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def load_model(path) -> ModelFile:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise ModelFileError(f"{path}: not a {MODEL_FORMAT} file")
    if doc.get("version") != MODEL_VERSION:
        raise ModelFileError(
            f"{path}: unsupported model file version {doc.get('version')!r}, "
            f"expected {MODEL_VERSION}")
    try:
        K, n_cat = int(doc["K"]), [int(c) for c in doc["n_categories"]]
        theta = np.array([np.concatenate([np.asarray(b, float) for b in comp])
                          for comp in doc["theta"]])
        model = MixtureModel(np.asarray(doc["alpha"], float), theta, n_cat, doc["trials"])
        if model.K != K or model.L != int(doc["L"]):
            raise ValueError("K or L does not match the stored parameters")
        variables = tuple(doc["variables"])
        categories = tuple(tuple(c) for c in doc["categories"])
        if len(variables) != model.L or [len(c) for c in categories] != n_cat:
            raise ValueError("variable or category dictionaries do not match the layout")
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFileError(f"{path}: malformed model file ({exc})") from None
    return ModelFile(model, variables, categories, doc.get("metadata", {}))
