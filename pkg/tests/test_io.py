import json

import numpy as np
import pytest

from catmml.data import CategoricalDataset
from catmml.exceptions import DatasetValidationError, ModelFileError
from catmml.io import fmt, load_dataset, load_model, save_dataset, save_model
from catmml.model import MixtureModel, log_likelihood
from catmml.synth import GenSpec, generate

TRUST = ["parliament", "legal_system", "police", "politicians", "political_parties",
         "european_parliament", "united_nations"]


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_trust_style_binary_columns(tmp_path):
    rng = np.random.default_rng(0)
    vals = np.where(rng.random((40, 7)) < 0.5, "distrust", "trust")
    lines = [",".join(TRUST)] + [",".join(r) for r in vals]
    data = load_dataset(_write(tmp_path / "t.csv", "\n".join(lines) + "\n"))
    assert data.L == 7
    assert data.n_categories == (2,) * 7 and data.trials == (1,) * 7
    assert data.variables == tuple(TRUST)
    first = vals[0, 0]
    assert data.categories[0][0] == first


def test_constant_column_rejected(tmp_path):
    path = _write(tmp_path / "c.csv", "a,b\nx,y\nz,y\n")
    with pytest.raises(DatasetValidationError, match="single category"):
        load_dataset(path)


def test_label_column_is_side_data(tmp_path):
    path = _write(tmp_path / "l.csv", "a,b,label\nx,y,1\nz,w,2\nx,w,2\n")
    data = load_dataset(path)
    assert data.variables == ("a", "b")
    assert data.labels.tolist() == [0, 1, 1]


def test_unknown_category_with_dictionary(tmp_path):
    path = _write(tmp_path / "d.csv", "a\nx\ny\nq\n")
    with pytest.raises(DatasetValidationError, match=r"d.csv:4.*'q'") as info:
        load_dataset(path, dictionary={"a": ["x", "y"]})
    assert info.value.row == 2 and info.value.variable == 0


def test_dictionary_fixes_category_order(tmp_path):
    path = _write(tmp_path / "d.csv", "a\ny\nx\n")
    data = load_dataset(path, dictionary={"a": ["x", "y"]})
    assert data.codes()[:, 0].tolist() == [1, 0]


def test_comments_skipped_and_weights_read(tmp_path):
    path = _write(tmp_path / "w.csv", "# survey extract\na,weight\nx,2\ny,3\n")
    frac = load_dataset(path)
    np.testing.assert_allclose(frac.weights, [2, 3])
    rep = load_dataset(path, weights_mode="replicate")
    assert rep.n == 5 and rep.weights is None


def test_bad_weight_rejected(tmp_path):
    path = _write(tmp_path / "w.csv", "a,weight\nx,2\ny,-1\n")
    with pytest.raises(DatasetValidationError):
        load_dataset(path)


def test_ragged_row_rejected(tmp_path):
    path = _write(tmp_path / "r.csv", "a,b\nx,y\nz\n")
    with pytest.raises(DatasetValidationError, match="r.csv:3"):
        load_dataset(path)


def _same(a, b):
    np.testing.assert_array_equal(a.counts, b.counts)
    assert a.n_categories == b.n_categories and a.trials == b.trials
    assert a.variables == b.variables and a.categories == b.categories
    for x, y in ((a.weights, b.weights), (a.labels, b.labels)):
        assert (x is None) == (y is None)
        if x is not None:
            np.testing.assert_array_equal(x, y)


@pytest.mark.parametrize("trials", [1, 3])
def test_dataset_save_load_idempotent(tmp_path, trials):
    data, _ = generate(GenSpec(k_true=2, trials=trials, n=50, n_categories=3,
                               target_separation=(0.1, 0.3), seed=1))
    data = CategoricalDataset(data.counts, data.n_categories, data.trials,
                              weights=np.linspace(0.5, 2, data.n), labels=data.labels)
    save_dataset(data, tmp_path / "a.csv")
    once = load_dataset(tmp_path / "a.csv")
    save_dataset(once, tmp_path / "b.csv")
    twice = load_dataset(tmp_path / "b.csv")
    _same(data, once)
    _same(once, twice)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_model_round_trip(tmp_path):
    data, planted = generate(GenSpec(k_true=3, trials=4, target_separation=(0.2, 0.5),
                                     seed=2))
    save_model(tmp_path / "m.json", planted.model, data.variables, data.categories,
               {"seed": 2, "objective": float("inf")})
    mf = load_model(tmp_path / "m.json")
    np.testing.assert_array_equal(mf.model.theta, planted.model.theta)
    np.testing.assert_array_equal(mf.model.alpha, planted.model.alpha)
    assert abs(log_likelihood(data, mf.model) - log_likelihood(data, planted.model)) <= 1e-12
    assert mf.metadata["seed"] == 2


def test_absent_component_not_serialized(tmp_path):
    model = MixtureModel([0.6, 0.0, 0.4], [[0.1, 0.9], [0.5, 0.5], [0.8, 0.2]], (2,), (1,))
    save_model(tmp_path / "m.json", model)
    mf = load_model(tmp_path / "m.json")
    assert mf.model.K == 2
    np.testing.assert_array_equal(mf.model.theta, [[0.1, 0.9], [0.8, 0.2]])


@pytest.mark.parametrize("text, match", [
    ("{not json", "not valid JSON"),
    ('{"format": "other"}', "not a catmml-model"),
    ('{"format": "catmml-model", "version": 99}', "version 99"),
    ('{"format": "catmml-model", "version": 1, "K": 1}', "malformed"),
])
def test_corrupt_model_files(tmp_path, text, match):
    path = _write(tmp_path / "m.json", text)
    with pytest.raises(ModelFileError, match=match):
        load_model(path)


def test_model_file_schema(tmp_path):
    model = MixtureModel([1.0], [[0.25, 0.75, 0.2, 0.3, 0.5]], (2, 3), (1, 2))
    save_model(tmp_path / "m.json", model, metadata={"algorithm": "EM-MML"})
    doc = json.loads((tmp_path / "m.json").read_text())
    assert doc["format"] == "catmml-model" and doc["version"] == 1
    assert doc["theta"] == [[[0.25, 0.75], [0.2, 0.3, 0.5]]]
    assert doc["n_categories"] == [2, 3] and doc["trials"] == [1, 2]


def test_six_significant_digits():
    assert fmt(59.2123456) == "59.2123"
    assert fmt(np.float64(1 / 3)) == "0.333333"
    assert fmt(7) == "7" and fmt(None) == ""
