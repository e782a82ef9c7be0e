"""
Synthetic spot datasets generated by a known stain model
"""
import math
from typing import List

import numpy as np
import structlog

from models.configs import SynthConfig
from models.params import NslParams
from models.records import Patch, SpotDataset, SpotRecord
from stain.core import forward

logger = structlog.get_logger(__name__)

# Stain-aligned ground truth for the first three synthetic genes
REFERENCE_GENES = (
    NslParams.create([[0.65, 0.70, 0.29], [0.07, 0.99, 0.11], [0.27, 0.57, 0.78]], (0.0, 0.0, 0.0), 2.0, -1.5),
    NslParams.create([[0.90, 0.10, 0.40], [0.20, 0.30, 0.90], [0.50, 0.80, 0.10]], (0.1, -0.1, 0.0), -1.5, 1.1),
    NslParams.create([[0.30, 0.90, 0.30], [0.80, 0.20, 0.20], [0.10, 0.40, 0.90]], (0.0, 0.2, -0.2), 1.8, -1.3),
)


def default_true_params(n_genes: int, seed: int = 0) -> List[NslParams]:
    """Ground-truth parameters for `n_genes` synthetic genes"""
    params = list(REFERENCE_GENES[:n_genes])
    rng = np.random.default_rng(seed)
    while len(params) < n_genes:
        raw = rng.uniform(0.05, 1.0, size=(3, 3))
        w = rng.choice([-1.0, 1.0]) * rng.uniform(1.0, 2.0)
        params.append(NslParams.create(raw, rng.uniform(-0.2, 0.2, size=3), w, -0.75 * w))
    return params


def _grid_position(index: int, columns: int, spacing: float) -> tuple:
    row, column = divmod(index, columns)
    return ((column + 0.5) * spacing, (row + 0.5) * spacing)


def synth_generate(config: SynthConfig) -> SpotDataset:
    """Sample patches from latent stain concentrations and label them with the true model.

    Per spot: concentrations q ~ U(0, 1)^3; per pixel optical density
    clip(mixing q + jitter, 0, 1); colour eps ** od. Targets are the true
    model's output plus Gaussian noise.
    """
    rng = np.random.default_rng(config.seed)
    mixing = np.asarray(config.mixing, dtype=np.float64)
    gene_names = config.resolved_gene_names()
    true_params = list(config.true_params)
    side = config.patch_side
    columns = int(math.ceil(math.sqrt(config.spots_per_patient)))

    spots = []
    for p in range(config.patients):
        patient_id = f"P{p + 1}"
        for s in range(config.spots_per_patient):
            q = rng.uniform(0.0, 1.0, size=3)
            od = mixing @ q + config.jitter * rng.standard_normal((side, side, 3))
            pixels = config.epsilon ** np.clip(od, 0.0, 1.0)
            if config.quantize:
                pixels = np.clip(np.rint(pixels * 255.0), 0, 255).astype(np.uint8)
            patch = Patch(pixels)
            noise = rng.normal(0.0, config.noise_sigma, size=len(true_params)) if config.noise_sigma > 0 else 0.0
            targets = np.array([forward(patch, params, config.epsilon) for params in true_params]) + noise
            spots.append(
                SpotRecord(
                    patient_id=patient_id,
                    slide_id=f"{patient_id}_S1",
                    spot_id=f"{patient_id}_{s:04d}",
                    center_xy=_grid_position(s, columns, float(side)),
                    patch=patch,
                    expression=targets,
                )
            )

    dataset = SpotDataset(tuple(spots), tuple(gene_names))
    logger.info("synthetic_dataset", spots=len(dataset), patients=config.patients, genes=len(gene_names))
    return dataset
