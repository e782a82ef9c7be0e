"""
Tests for leave-one-patient-out cross-validation
"""
import time

import numpy as np
import pytest

from conftest import make_synth, spot_dataset
from errors import SinglePatient
from evaluation.cv import (
    FoldResult,
    GeneFoldStat,
    P_THRESHOLD,
    cross_validate,
    lopo_split,
    run_cv,
    summarize,
)
from evaluation.report import format_report
from models.configs import TrainConfig

FAST = TrainConfig(learning_rate=0.01, batch_size=16, epochs=250)


def _patients(n_patients, per_patient):
    return [f"P{p}" for p in range(n_patients) for _ in range(per_patient)]


def test_lopo_split_one_fold_per_patient(rng):
    patients = _patients(8, 4)
    dataset = spot_dataset(patients, rng.normal(size=(32, 1)), ["g"])
    folds = lopo_split(dataset)
    assert len(folds) == 8
    for fold in folds:
        held_out = {dataset.spots[i].patient_id for i in fold.test_indices}
        trained = {dataset.spots[i].patient_id for i in fold.train_indices}
        assert held_out == {fold.held_out_patient}
        assert fold.held_out_patient not in trained
        assert len(fold.test_indices) + len(fold.train_indices) == 32


def test_lopo_split_single_patient(rng):
    dataset = spot_dataset(["P"] * 4, rng.normal(size=(4, 1)), ["g"])
    with pytest.raises(SinglePatient):
        lopo_split(dataset)


def test_lopo_split_keeps_first_seen_patient_order(rng):
    patients = ["P9", "P2", "P9", "P5", "P2", "P5"]
    dataset = spot_dataset(patients, rng.normal(size=(6, 1)), ["g"])
    folds = lopo_split(dataset)
    assert [f.held_out_patient for f in folds] == ["P9", "P2", "P5"]
    assert folds[0].test_indices == (0, 2)
    assert folds[1].train_indices == (0, 2, 3, 5)


def test_summarize_single_valid_fold():
    stat = GeneFoldStat(0.8, 0.004, 12)
    report = summarize(["g"], [FoldResult("P1", {"g": stat})])
    assert report.per_gene["g"].median_r == 0.8
    assert report.per_gene["g"].combined_p == pytest.approx(0.008)


def test_cross_validate_with_oracle_predictor(rng):
    dataset = spot_dataset(_patients(4, 6), rng.normal(size=(24, 2)), ["a", "b"])

    def oracle(train, test, genes):
        observed = test.expression_matrix()
        return {"a": observed[:, 0] * 2.0 + 1.0, "b": "NumericFailure: did not converge"}

    report = cross_validate(dataset, ["a", "b"], oracle)
    assert report.per_gene["a"].median_r == pytest.approx(1.0)
    assert report.per_gene["a"].n_folds == 4
    assert report.per_gene["b"].median_r is None
    assert report.per_gene["b"].n_skipped == 4
    assert report.unevaluable == ["b"]
    assert report.count_r_gt_half == 1
    assert report.count_p_significant == 1
    assert len(report.out_of_fold("a")) == 24


def test_cross_validate_skips_constant_folds(rng):
    values = rng.normal(size=(12, 1))
    dataset = spot_dataset(_patients(3, 4), values, ["g"])

    def flat_for_first(train, test, genes):
        if test.spots[0].patient_id == "P0":
            return {"g": np.zeros(len(test))}
        return {"g": test.expression_matrix()[:, 0]}

    report = cross_validate(dataset, ["g"], flat_for_first)
    summary = report.per_gene["g"]
    assert (summary.n_folds, summary.n_skipped) == (2, 1)
    assert report.folds[0].per_gene["g"].skipped_reason.startswith("ZeroVariance")
    assert summary.median_r == pytest.approx(1.0)
    valid_p = [f.per_gene["g"].p for f in report.folds[1:]]
    assert summary.combined_p == pytest.approx(min(1.0, 2 * float(np.median(valid_p))))


def test_run_cv_recovers_synthetic_genes():
    dataset = make_synth(patients=4, spots=50, genes=3, side=8)
    report = run_cv(dataset, list(dataset.gene_names), FAST)
    for summary in report.per_gene.values():
        assert summary.median_r >= 0.9
        assert summary.combined_p < P_THRESHOLD
    assert report.count_r_gt_half == 3
    assert report.count_p_significant == 3


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_run_cv_noise_targets_are_not_significant(seed):
    dataset = make_synth(patients=3, spots=30, genes=2, side=4, seed=seed)
    noise = np.random.default_rng(100 + seed).normal(size=(len(dataset), 2))
    null = dataset.with_expression_matrix(noise, dataset.gene_names)
    report = run_cv(null, list(null.gene_names), TrainConfig(learning_rate=0.01, batch_size=32, epochs=20))
    assert report.count_p_significant == 0


def test_run_cv_is_independent_of_workers():
    dataset = make_synth(patients=3, spots=20, genes=2, side=4)
    config = TrainConfig(learning_rate=0.01, batch_size=32, epochs=10)
    serial = run_cv(dataset, list(dataset.gene_names), config, workers=1)
    pooled = run_cv(dataset, list(dataset.gene_names), config, workers=8)
    assert format_report(serial) == format_report(pooled)


@pytest.mark.slow
def test_run_cv_acceptance_scale():
    dataset = make_synth(patients=6, spots=200, genes=3, side=32)
    started = time.perf_counter()
    report = run_cv(dataset, list(dataset.gene_names), TrainConfig(learning_rate=0.01, batch_size=16, epochs=50))
    elapsed = time.perf_counter() - started
    assert all(s.median_r >= 0.9 and s.combined_p < P_THRESHOLD for s in report.per_gene.values())
    assert elapsed < 120.0


@pytest.mark.slow
def test_run_cv_null_control_over_seeds():
    clean = 0
    for seed in range(20):
        dataset = make_synth(patients=6, spots=50, genes=3, side=8, seed=seed)
        noise = np.random.default_rng(seed).normal(size=(len(dataset), 3))
        null = dataset.with_expression_matrix(noise, dataset.gene_names)
        report = run_cv(null, list(null.gene_names), TrainConfig(epochs=50))
        clean += report.count_p_significant == 0
    assert clean >= 19
