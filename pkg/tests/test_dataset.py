"""
Tests for ingestion, preprocessing, patch extraction and synthetic data
"""
import math

import numpy as np
import pytest
from pydantic import ValidationError

from conftest import make_synth, spot_dataset, write_table
from errors import (
    DataError,
    DecodeError,
    DuplicateSpotId,
    MalformedRow,
    MissingColumn,
    NegativeExpression,
    NoOverlap,
    RaggedRow,
    ValidationFailure,
)
from models.configs import SynthConfig
from models.records import Patch
from spots.loaders import MANIFEST_COLUMNS, load_expression, load_manifest
from spots.patches import attach_patches, decode_image, extract_patch, write_png
from spots.preprocess import log_transform, restrict_genes, select_top_genes, transform_targets
from spots.synth import default_true_params, synth_generate
from stain.core import forward


@pytest.fixture
def manifest(tmp_path):
    return write_table(
        tmp_path / "manifest.csv",
        MANIFEST_COLUMNS,
        [["A", "A1", "a_1", 10, 20, "a1.png"], ["B", "B1", "b_1", 30.5, 40, ""], ["B", "B1", "b_2", 31, 41, ""]],
    )


def test_load_manifest_rows(manifest, tmp_path):
    dataset = load_manifest(manifest)
    assert len(dataset) == 3
    assert dataset.patients == ("A", "B")
    first = dataset.spots[0]
    assert first.center_xy == (10.0, 20.0)
    assert first.patch_path == tmp_path / "a1.png"
    assert dataset.spots[1].patch_path is None


def test_load_manifest_two_rows(tmp_path):
    path = write_table(tmp_path / "m.csv", MANIFEST_COLUMNS, [["P1", "S1", "x", 1, 1, ""], ["P2", "S2", "y", 2, 2, ""]])
    dataset = load_manifest(path)
    assert len(dataset) == 2
    assert len(dataset.patients) == 2


def test_load_manifest_duplicate_spot(tmp_path):
    path = write_table(tmp_path / "m.csv", MANIFEST_COLUMNS, [["P1", "S1", "x", 1, 1, ""], ["P2", "S2", "x", 2, 2, ""]])
    with pytest.raises(DuplicateSpotId):
        load_manifest(path)


def test_load_manifest_missing_column(tmp_path):
    path = write_table(tmp_path / "m.csv", MANIFEST_COLUMNS[1:], [["S1", "x", 1, 1, ""]])
    with pytest.raises(MissingColumn):
        load_manifest(path)


def test_load_manifest_reports_row_number(tmp_path):
    path = write_table(
        tmp_path / "m.csv", MANIFEST_COLUMNS, [["P1", "S1", "x", 1, 1, ""], ["P1", "S1", "y", "left", 1, ""]]
    )
    with pytest.raises(MalformedRow) as info:
        load_manifest(path)
    assert info.value.row == 3
    assert ":3:" in str(info.value)


def test_load_manifest_missing_file(tmp_path):
    with pytest.raises(DataError):
        load_manifest(tmp_path / "absent.csv")


def test_load_expression_attaches_in_column_order(manifest, tmp_path):
    path = write_table(
        tmp_path / "expr.tsv", ["spot_id", "G1", "G2"], [["b_2", 5, 6], ["a_1", 1, 2], ["b_1", 3, 4]], sep="\t"
    )
    dataset = load_expression(path, load_manifest(manifest))
    assert dataset.gene_names == ("G1", "G2")
    assert np.array_equal(dataset.expression_matrix(), [[1, 2], [3, 4], [5, 6]])


def test_load_expression_comma_separated_and_dropped_spots(manifest, tmp_path):
    path = write_table(tmp_path / "expr.csv", ["spot_id", "G1"], [["a_1", 1], ["b_1", 2], ["zz", 9]])
    dataset = load_expression(path, load_manifest(manifest))
    assert [s.spot_id for s in dataset.spots] == ["a_1", "b_1"]
    assert dataset.dropped_spots == 1


def test_load_expression_no_overlap(manifest, tmp_path):
    path = write_table(tmp_path / "expr.tsv", ["spot_id", "G1"], [["zz", 1]], sep="\t")
    with pytest.raises(NoOverlap):
        load_expression(path, load_manifest(manifest))


def test_load_expression_bad_rows(manifest, tmp_path):
    ragged = tmp_path / "ragged.tsv"
    ragged.write_text("spot_id\tG1\tG2\na_1\t1\t2\nb_1\t3\n")
    with pytest.raises(RaggedRow):
        load_expression(ragged, load_manifest(manifest))
    words = write_table(tmp_path / "words.tsv", ["spot_id", "G1"], [["a_1", "many"]], sep="\t")
    with pytest.raises(MalformedRow) as info:
        load_expression(words, load_manifest(manifest))
    assert info.value.row == 2


def test_load_expression_is_deterministic(manifest, tmp_path):
    path = write_table(tmp_path / "expr.tsv", ["spot_id", "G1"], [["a_1", 1.25], ["b_2", 3]], sep="\t")
    first = load_expression(path, load_manifest(manifest))
    second = load_expression(path, load_manifest(manifest))
    assert [s.spot_id for s in first.spots] == [s.spot_id for s in second.spots]
    assert np.array_equal(first.expression_matrix(), second.expression_matrix())


def _genes_dataset(columns):
    names = list(columns)
    values = np.column_stack([columns[n] for n in names])
    return spot_dataset(["P"] * values.shape[0], values, names)


def test_select_top_genes_by_median():
    dataset = _genes_dataset({"g1": [1, 1, 1], "g2": [5, 5, 5], "g3": [2, 2, 2]})
    assert select_top_genes(dataset, 2) == ["g2", "g3"]
    assert select_top_genes(dataset, 10) == ["g2", "g3", "g1"]


def test_select_top_genes_tie_by_name():
    dataset = _genes_dataset({"zeta": [3, 3, 3], "alpha": [3, 3, 3], "mid": [1, 2, 3]})
    assert select_top_genes(dataset, 3) == ["alpha", "zeta", "mid"]


def test_select_top_genes_is_prefix_closed(rng):
    values = rng.integers(0, 5, size=(6, 9)).astype(float)
    dataset = _genes_dataset({f"g{i}": values[:, i] for i in range(9)})
    ranked = select_top_genes(dataset, 9)
    for n in range(1, 10):
        assert select_top_genes(dataset, n) == ranked[:n]


def test_log_transform_examples():
    assert log_transform(0.0, 1.0) == 0.0
    assert log_transform(math.e - 1, 1.0) == pytest.approx(1.0, abs=1e-15)
    assert np.allclose(log_transform(np.array([0.0, 9.0]), 1.0), [0.0, math.log(10)])


def test_log_transform_rejects_negative():
    with pytest.raises(NegativeExpression):
        log_transform(np.array([1.0, -0.5]))


def test_transform_and_restrict():
    dataset = _genes_dataset({"a": [0.0, 1.0, 3.0], "b": [7.0, 7.0, 7.0]})
    restricted = restrict_genes(dataset, ["b", "a"])
    assert restricted.gene_names == ("b", "a")
    transformed = transform_targets(restricted, 1.0)
    assert np.allclose(transformed.expression_matrix()[:, 1], np.log([1.0, 2.0, 4.0]))
    assert transformed.zero_variance_genes() == ["b"]


def test_extract_patch_whole_image(rng):
    image = rng.integers(0, 256, size=(256, 256, 3), dtype=np.uint8)
    patch = extract_patch(image, (128, 128), 256)
    assert patch.padded_fraction == 0.0
    assert np.array_equal(patch.pixels, image)


def test_extract_patch_corner_padding(rng):
    image = rng.integers(0, 256, size=(256, 256, 3), dtype=np.uint8)
    patch = extract_patch(image, (0, 0), 256)
    assert patch.padded_fraction == pytest.approx(0.75)
    assert np.all(patch.pixels[:128, :, :] == 255)
    assert np.array_equal(patch.pixels[128:, 128:], image[:128, :128])


def test_extract_patch_shape_anywhere(rng):
    image = rng.integers(0, 255, size=(20, 30, 3), dtype=np.uint8)
    for _ in range(200):
        side = int(rng.integers(1, 40))
        center = (float(rng.uniform(-50, 80)), float(rng.uniform(-50, 70)))
        patch = extract_patch(image, center, side)
        assert patch.pixels.shape == (side, side, 3)
        assert 0.0 <= patch.padded_fraction <= 1.0
        # 255 never occurs in the image, so it counts the padding exactly
        white = np.all(patch.pixels == 255, axis=2).mean()
        assert patch.padded_fraction == pytest.approx(white, abs=1e-12)


def test_extract_patch_checkerboard():
    board = (np.indices((4, 4)).sum(axis=0) % 2 * 255).astype(np.uint8)
    image = np.repeat(board[:, :, None], 3, axis=2)
    image[1, 2] = (10, 20, 30)
    patch = extract_patch(image, (2, 2), 2)
    assert np.array_equal(patch.pixels, image[1:3, 1:3])
    assert patch.padded_fraction == 0.0


def test_patch_files_round_trip(tmp_path, rng):
    pixels = rng.integers(0, 256, size=(6, 5, 3), dtype=np.uint8)
    path = write_png(tmp_path / "p.png", pixels)
    assert np.array_equal(decode_image(path), pixels)


def test_decode_errors(tmp_path):
    bad = tmp_path / "bad.png"
    bad.write_bytes(b"not an image")
    with pytest.raises(DecodeError):
        decode_image(bad)
    with pytest.raises(DecodeError):
        decode_image(tmp_path / "absent.png")


def test_attach_patches_from_slide_and_files(manifest, tmp_path, rng):
    write_png(tmp_path / "a1.png", rng.integers(0, 256, size=(8, 8, 3), dtype=np.uint8))
    slide = rng.integers(0, 256, size=(64, 64, 3), dtype=np.uint8)
    dataset = attach_patches(load_manifest(manifest), 8, {"B1": slide})
    assert [s.patch.height for s in dataset.spots] == [8, 8, 8]
    assert np.array_equal(dataset.spots[1].patch.pixels, slide[36:44, 27:35])


def test_attach_patches_padding_limit(manifest, tmp_path, rng):
    write_png(tmp_path / "a1.png", rng.integers(0, 256, size=(8, 8, 3), dtype=np.uint8))
    slide = rng.integers(0, 256, size=(40, 40, 3), dtype=np.uint8)
    # b_1 and b_2 sit near the bottom edge and lose pixels to padding
    dataset = attach_patches(load_manifest(manifest), 8, {"B1": slide}, max_padding=0.0)
    assert [s.spot_id for s in dataset.spots] == ["a_1"]


def test_attach_patches_without_raster(manifest):
    with pytest.raises(DataError):
        attach_patches(load_manifest(manifest), 8, {})


def test_synth_shape_and_ids():
    dataset = make_synth(patients=6, spots=200, genes=3, side=2)
    assert len(dataset) == 1200
    assert len(dataset.patients) == 6
    assert dataset.gene_names == ("SYN1", "SYN2", "SYN3")
    assert dataset.spots[0].spot_id == "P1_0000"


def test_synth_is_deterministic():
    a = make_synth(patients=2, spots=5, side=4, seed=9)
    b = make_synth(patients=2, spots=5, side=4, seed=9)
    assert np.array_equal(a.expression_matrix(), b.expression_matrix())
    assert all(np.array_equal(x.patch.pixels, y.patch.pixels) for x, y in zip(a.spots, b.spots))


def test_synth_noise_free_targets_equal_true_model():
    params = default_true_params(2)
    dataset = synth_generate(
        SynthConfig(true_params=tuple(params), patients=2, spots_per_patient=4, patch_side=3, noise_sigma=0.0)
    )
    for spot in dataset.spots:
        assert spot.expression[1] == pytest.approx(forward(spot.patch, params[1], 1e-6), abs=1e-15)


def test_synth_config_validation():
    with pytest.raises(ValidationError):
        SynthConfig(true_params=tuple(default_true_params(1)), noise_sigma=-1.0)
    with pytest.raises(ValidationError):
        SynthConfig(true_params=())


def test_patch_rejects_out_of_range_floats():
    with pytest.raises(ValidationFailure):
        Patch(np.full((2, 2, 3), 1.5))
