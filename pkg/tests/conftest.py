"""
Shared fixtures
"""
import logging
from pathlib import Path
from typing import Dict, List, Sequence

import numpy as np
import pytest

from models.configs import SynthConfig
from models.records import Patch, SpotDataset, SpotRecord
from spots.synth import default_true_params, synth_generate


@pytest.fixture(autouse=True)
def _restore_logging():
    """CLI runs install a handler on the runner's temporary stderr"""
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield
    root.handlers = handlers
    root.setLevel(level)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_synth(patients=3, spots=40, genes=3, side=8, noise=0.05, seed=0, quantize=False) -> SpotDataset:
    config = SynthConfig(
        true_params=tuple(default_true_params(genes, seed)),
        patients=patients,
        spots_per_patient=spots,
        patch_side=side,
        noise_sigma=noise,
        seed=seed,
        quantize=quantize,
    )
    return synth_generate(config)


@pytest.fixture
def synth_dataset() -> SpotDataset:
    return make_synth()


def random_patch(rng: np.random.Generator, side: int = 4, low: float = 0.05) -> Patch:
    return Patch(rng.uniform(low, 1.0, size=(side, side, 3)))


def spot_dataset(
    patients: Sequence[str], values: np.ndarray, gene_names: Sequence[str], patches: Sequence[Patch] = None
) -> SpotDataset:
    """Dataset with one spot per entry of `patients`, laid out on a line"""
    spots: List[SpotRecord] = []
    for i, patient in enumerate(patients):
        spots.append(
            SpotRecord(
                patient_id=patient,
                slide_id=f"{patient}_S1",
                spot_id=f"s{i:03d}",
                center_xy=(10.0 * i, 5.0),
                patch=None if patches is None else patches[i],
                expression=values[i],
            )
        )
    return SpotDataset(tuple(spots), tuple(gene_names))


def write_table(path: Path, header: Sequence[str], rows: Sequence[Sequence[object]], sep: str = ",") -> Path:
    lines = [sep.join(header)] + [sep.join(str(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture
def table_files(tmp_path) -> Dict[str, Path]:
    """Manifest (no patches) and expression matrix for 3 patients x 5 spots x 2 genes"""
    rng = np.random.default_rng(7)
    manifest_rows, expression_rows, feature_rows = [], [], []
    for p in range(3):
        for s in range(5):
            spot_id = f"P{p + 1}_{s}"
            values = rng.uniform(0.0, 20.0, size=2)
            manifest_rows.append([f"P{p + 1}", f"P{p + 1}_S1", spot_id, 10 * s, 10 * p, ""])
            expression_rows.append([spot_id, *(repr(float(v)) for v in values)])
            logged = np.log(values + 1.0)
            feature_rows.append([spot_id, *(repr(float(v)) for v in logged)])
    return {
        "manifest": write_table(
            tmp_path / "manifest.csv", ["patient_id", "slide_id", "spot_id", "x", "y", "patch_path"], manifest_rows
        ),
        "expression": write_table(tmp_path / "expression.tsv", ["spot_id", "GNAS", "FASN"], expression_rows, sep="\t"),
        "features": write_table(tmp_path / "features.csv", ["spot_id", "f_gnas", "f_fasn"], feature_rows),
    }
