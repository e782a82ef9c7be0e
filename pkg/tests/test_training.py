"""
Tests for the optimizer, per-gene training and model bundles
"""
import numpy as np
import pytest
from pydantic import ValidationError

from conftest import make_synth
from errors import DataError, EmptyDataset
from models.bundle import BundleDocument, bundle_from_result, census_of
from models.configs import TrainConfig
from models.params import Gradients, NslParams
from stain.core import PixelBank
from stain.optim import AdamState, adam_step
from stain.trainer import GeneFailure, fit_gene, train_all, train_gene

FAST = dict(learning_rate=0.01, batch_size=32, epochs=40)


def test_adam_zero_gradient_keeps_params():
    params = NslParams.create(np.eye(3), (0.1, 0.2, 0.3), 0.5, -0.5)
    updated, state = adam_step(params, Gradients.zeros(), AdamState(), TrainConfig())
    assert state.step == 1
    assert np.array_equal(updated.to_vector(), params.to_vector())
    assert np.array_equal(state.m, np.zeros(14))


def test_adam_first_step_magnitude():
    params = NslParams.create(np.eye(3), (0.0, 0.0, 0.0), 0.0, 0.0)
    grads = Gradients(np.zeros((3, 3)), np.zeros(3), 0.5, 0.0)
    updated, _ = adam_step(params, grads, AdamState(), TrainConfig())
    assert updated.w == pytest.approx(-0.001 * 0.5 / (0.5 + 1e-8), rel=1e-12)
    assert updated.b == 0.0


def test_adam_renormalizes_stain_rows():
    params = NslParams.create(np.eye(3))
    grads = Gradients(np.full((3, 3), 0.3), np.zeros(3), 0.0, 0.0)
    updated, _ = adam_step(params, grads, AdamState(), TrainConfig(learning_rate=0.1))
    assert np.allclose(np.linalg.norm(updated.stain.raw, axis=1), 1.0, atol=1e-15)


def test_adam_freezes_stain_bias_when_disabled():
    params = NslParams.create(np.eye(3))
    grads = Gradients(np.zeros((3, 3)), np.ones(3), 0.0, 0.0)
    updated, _ = adam_step(params, grads, AdamState(), TrainConfig(use_stain_bias=False))
    assert np.array_equal(updated.c, np.zeros(3))


@pytest.mark.parametrize(
    "field, value",
    [("learning_rate", 0.0), ("batch_size", 0), ("epochs", 0), ("beta1", 1.0), ("beta2", 0.0), ("epsilon", 1.0)],
)
def test_train_config_validation(field, value):
    with pytest.raises(ValidationError):
        TrainConfig(**{field: value})


def test_train_config_defaults():
    config = TrainConfig()
    assert (config.learning_rate, config.batch_size, config.epochs) == (0.001, 128, 250)
    assert (config.beta1, config.beta2, config.adam_eps, config.epsilon) == (0.9, 0.999, 1e-8, 1e-6)


def test_train_config_yaml_overrides(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("training:\n  learning_rate: 0.05\n  epochs: 7\n")
    config = TrainConfig.from_yaml(path, epochs=3, batch_size=None)
    assert (config.learning_rate, config.epochs, config.batch_size) == (0.05, 3, 128)


def test_train_gene_is_deterministic(synth_dataset):
    config = TrainConfig(**FAST, seed=3)
    first = train_gene(synth_dataset, 0, config)
    second = train_gene(synth_dataset, 0, config)
    assert np.array_equal(first.params.to_vector(), second.params.to_vector())
    assert first.loss_trace == second.loss_trace
    assert len(first.loss_trace) == config.epochs


def test_train_gene_seed_changes_result(synth_dataset):
    a = train_gene(synth_dataset, 0, TrainConfig(**FAST, seed=1))
    b = train_gene(synth_dataset, 0, TrainConfig(**FAST, seed=2))
    assert not np.array_equal(a.params.to_vector(), b.params.to_vector())


def test_train_gene_without_spots():
    with pytest.raises(EmptyDataset):
        train_gene([], 0, TrainConfig())


def test_fit_gene_needs_two_spots(synth_dataset):
    bank = PixelBank.from_patches(synth_dataset.patches()[:1], 1e-6)
    with pytest.raises(EmptyDataset):
        fit_gene(bank, np.array([0.5]), 0, TrainConfig())


def test_loss_trace_drops_on_recoverable_data():
    dataset = make_synth(patients=4, spots=100, genes=1, side=4, seed=5)
    model = train_gene(dataset, 0, TrainConfig(learning_rate=0.01, batch_size=32, epochs=100))
    assert model.final_loss < 0.25 * model.loss_trace[0]
    assert model.final_loss < model.loss_trace[0]


def test_trained_stain_rows_are_unit_norm(synth_dataset):
    model = train_gene(synth_dataset, 1, TrainConfig(**FAST))
    assert np.allclose(np.linalg.norm(model.params.stain.raw, axis=1), 1.0, atol=1e-12)


def test_train_all_single_gene_matches_train_gene(synth_dataset):
    config = TrainConfig(**FAST)
    result = train_all(synth_dataset, ["SYN2"], config)
    assert len(result.models) == 1
    direct = train_gene(synth_dataset, 1, config, "SYN2")
    assert np.array_equal(result.models[0].params.to_vector(), direct.params.to_vector())


def test_train_all_worker_count_does_not_change_models(synth_dataset):
    config = TrainConfig(**FAST, seed=11)
    serial = train_all(synth_dataset, list(synth_dataset.gene_names), config, workers=1)
    pooled = train_all(synth_dataset, list(synth_dataset.gene_names), config, workers=3)
    assert bundle_from_result(serial).dumps() == bundle_from_result(pooled).dumps()


def test_train_all_records_unknown_genes(synth_dataset):
    genes = list(synth_dataset.gene_names) + [f"GENE{i}" for i in range(4, 251)]
    result = train_all(synth_dataset, genes, TrainConfig(learning_rate=0.01, batch_size=64, epochs=2))
    assert len(result.outcomes) == 250
    assert len(result.models) == 3
    assert all(isinstance(f, GeneFailure) and f.error_type == "UnknownGene" for f in result.failures)
    assert [f.gene_name for f in result.failures][:2] == ["GENE4", "GENE5"]


def test_bundle_census_and_round_trip(synth_dataset, tmp_path):
    result = train_all(synth_dataset, ["SYN1", "MISSING"], TrainConfig(**FAST))
    bundle = bundle_from_result(result)
    path = bundle.write(tmp_path / "model_bundle.json")
    loaded = BundleDocument.read(path)

    assert loaded.dumps() == bundle.dumps()
    record = loaded.genes[0]
    total, groups = census_of(record)
    assert total == 11 == record.learnable_scalars
    assert groups == {"stain_matrix": 6, "stain_bias": 3, "weight": 1, "bias": 1}
    assert np.array_equal(record.to_params().to_vector(), result.models[0].params.to_vector())
    assert [f.gene_name for f in loaded.failures] == ["MISSING"]


def test_bundle_census_without_stain_bias(synth_dataset):
    result = train_all(synth_dataset, ["SYN1"], TrainConfig(**FAST, use_stain_bias=False))
    record = bundle_from_result(result).genes[0]
    assert census_of(record)[0] == 8
    assert np.array_equal(result.models[0].params.c, np.zeros(3))


def test_bundle_read_errors(tmp_path):
    with pytest.raises(DataError):
        BundleDocument.read(tmp_path / "missing.json")
    broken = tmp_path / "broken.json"
    broken.write_text('{"format_version": "other", "config": {}, "genes": []}')
    with pytest.raises(DataError):
        BundleDocument.read(broken)
