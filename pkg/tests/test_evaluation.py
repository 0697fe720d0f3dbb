import numpy as np
import pytest

import oracles
from catmml.data import from_codes
from catmml.evaluation import (
    METHODS, TimingPair, TimingSummary, association_profile, cramers_v, cramers_v_table,
    derive_seed, hard_assign, paired_timing, segment_profile, selection_rate_experiment,
    selection_rates,
)
from catmml.exceptions import UndefinedAssociationError
from catmml.model import MixtureModel
from catmml.synth import GenSpec


def test_hard_assign_examples():
    assert hard_assign([[0.9, 0.1]]).tolist() == [0]
    assert hard_assign([[0.5, 0.5]]).tolist() == [0]
    assert hard_assign(np.eye(4)).tolist() == [0, 1, 2, 3]


def test_cramers_v_reference_tables():
    assert cramers_v_table([[10, 0], [0, 10]]) == pytest.approx(1.0)
    assert cramers_v_table([[5, 5], [5, 5]]) == pytest.approx(0.0, abs=1e-15)
    chi2, N = oracles.pearson_chi2([[8, 2], [3, 7]])
    assert chi2 == pytest.approx(5.05, abs=1e-2)
    v = cramers_v_table([[8, 2], [3, 7]])
    assert v == pytest.approx(0.5025, abs=1e-3)
    assert v == pytest.approx(np.sqrt(chi2 / N), rel=1e-12)


def test_cramers_v_matches_oracle_on_rectangular_tables():
    rng = np.random.default_rng(0)
    for _ in range(50):
        table = rng.integers(1, 30, size=(int(rng.integers(2, 5)), int(rng.integers(2, 6))))
        assert cramers_v_table(table) == pytest.approx(
            oracles.cramers_v_oracle(table.tolist()), rel=1e-10)


def test_cramers_v_from_labels():
    labels = [0] * 10 + [1] * 10
    values = ["a"] * 8 + ["b"] * 2 + ["a"] * 3 + ["b"] * 7
    assert cramers_v(labels, values) == pytest.approx(cramers_v_table([[8, 2], [3, 7]]))


def test_degenerate_table_is_undefined():
    with pytest.raises(UndefinedAssociationError):
        cramers_v_table([[3, 4]])
    with pytest.raises(UndefinedAssociationError):
        cramers_v([0, 0, 0], [0, 1, 1])


def test_association_profile_sums_per_variable_values():
    rng = np.random.default_rng(1)
    codes = rng.integers(0, 3, size=(200, 4))
    labels = (codes[:, 0] > 0).astype(int)
    prof = association_profile(from_codes(codes, (3, 3, 3, 3)), labels)
    assert prof.values[0] == pytest.approx(1.0)
    for l in range(4):
        assert prof.values[l] == pytest.approx(cramers_v(labels, codes[:, l]))
    assert prof.sum_V == pytest.approx(prof.values.sum())
    assert [v for v, _ in prof.rows()] == ["V1", "V2", "V3", "V4"]


def test_weighted_profile_scales_rows():
    codes = np.array([[0], [1], [0], [1]])
    labels = np.array([0, 1, 1, 0])
    data = from_codes(codes, (2,), weights=[8.0, 7.0, 3.0, 2.0])
    # weighted table: label 0 -> (8, 2), label 1 -> (3, 7)
    prof = association_profile(data, labels)
    assert prof.values[0] == pytest.approx(cramers_v_table([[8, 2], [3, 7]]))


def test_segment_profile_equals_theta_percentages():
    model = MixtureModel([0.4, 0.6], [[0.592, 0.408, 0.1, 0.2, 0.7],
                                      [0.3, 0.7, 0.5, 0.25, 0.25]], (2, 3), (1, 1))
    rows = segment_profile(model, ["parliament", "x"], [["trust", "distrust"], "abc"])
    assert rows[0] == ("parliament", "trust", [pytest.approx(59.2), pytest.approx(30.0)])
    assert len(rows) == 5
    assert rows[4][:2] == ("x", "c")


def test_derive_seed_is_stable_and_distinct():
    assert derive_seed(0, 1, 2) == derive_seed(0, 1, 2)
    assert len({derive_seed(0, s, r) for s in range(5) for r in range(5)}) == 25


def _small_scenarios():
    return [GenSpec(k_true=2, trials=50, n=200, target_separation=(0.1, 0.2)),
            GenSpec(k_true=1, trials=50, n=200, target_separation=(0.0, 0.0))]


def test_selection_experiment_reproducible_and_ordered():
    kw = dict(runs_per_cell=2, master_seed=3, k_max=4, restarts=1)
    a = selection_rate_experiment(_small_scenarios(), **kw)
    b = selection_rate_experiment(_small_scenarios(), **kw)
    key = [(r.scenario, r.run, r.method, r.selected_K, r.seed, r.separation) for r in a]
    assert key == [(r.scenario, r.run, r.method, r.selected_K, r.seed, r.separation)
                   for r in b]
    assert len(a) == 2 * 2 * len(METHODS)
    assert [r.method for r in a[:len(METHODS)]] == list(METHODS)
    rates = selection_rates(a, _small_scenarios())
    assert len(rates) == 2 * len(METHODS)
    assert all(0.0 <= r["rate"] <= 1.0 for r in rates)
    assert rates[0]["sep_lo"] == 0.1


def test_parallel_matches_sequential():
    kw = dict(runs_per_cell=2, master_seed=5, k_max=3, restarts=1,
              methods=("EM_MML", "bic"))
    seq = selection_rate_experiment(_small_scenarios(), jobs=1, **kw)
    par = selection_rate_experiment(_small_scenarios(), jobs=2, **kw)
    assert [(r.method, r.selected_K, r.seed) for r in seq] == \
        [(r.method, r.selected_K, r.seed) for r in par]


def test_unknown_method_rejected():
    with pytest.raises(ValueError):
        selection_rate_experiment(_small_scenarios(), methods=("EM_MML", "HQC"))


def test_timing_summary_statistics():
    s = TimingSummary([TimingPair(0, 1, 0.1, 1.0, 2.0, 2, 2),
                       TimingPair(1, 2, 0.1, 3.0, 3.0, 2, 2)])
    assert s.mean_mml == 2.0 and s.mean_bic == 2.5
    assert s.mean_ratio == pytest.approx(0.75)
    assert s.ratio_of_means == pytest.approx(0.8)
    assert s.as_dict()["runs"] == 2


def test_paired_timing_runs_both_methods():
    spec = GenSpec(k_true=2, trials=50, n=200, target_separation=(0.1, 0.2))
    s = paired_timing(spec, runs=2, k_max=3, restarts=1, master_seed=1)
    assert len(s.pairs) == 2
    assert all(p.mml_seconds > 0 and p.bic_seconds > 0 for p in s.pairs)
    with pytest.raises(ValueError):
        paired_timing(spec, runs=1)
