"""
predict: apply a model bundle to spot patches
"""
from pathlib import Path
from typing import Dict, List

import click
import numpy as np
import pandas as pd
import structlog

from cli.options import (
    dataset_inputs,
    dataset_options,
    output_option,
    parse_slides,
    patch_options,
    prepare_dataset,
    resolve_out_dir,
    split_names,
    write_run_manifest,
)
from errors import ValidationFailure
from models.bundle import BundleDocument
from models.manifest import RunTimer
from models.params import NslParams
from models.records import SpotDataset
from spots.patches import write_png
from stain.core import PixelBank, activation_map

logger = structlog.get_logger(__name__)

PREDICTION_COLUMNS = ["spot_id", "patient_id", "slide_id", "x", "y"]


def prediction_frame(dataset: SpotDataset, predictions: Dict[str, np.ndarray]) -> pd.DataFrame:
    frame = pd.DataFrame(
        {
            "spot_id": [s.spot_id for s in dataset.spots],
            "patient_id": [s.patient_id for s in dataset.spots],
            "slide_id": [s.slide_id for s in dataset.spots],
            "x": [s.center_xy[0] for s in dataset.spots],
            "y": [s.center_xy[1] for s in dataset.spots],
        }
    )
    for gene, values in predictions.items():
        frame[gene] = values
    return frame


def write_stain_maps(out_dir: Path, dataset: SpotDataset, params: Dict[str, NslParams], epsilon: float) -> List[Path]:
    """One grayscale PNG per gene, spot and stain; activations in [-1, 1] map to [0, 255]"""
    written = []
    for gene, gene_params in params.items():
        for spot in dataset.spots:
            activations = activation_map(spot.patch, gene_params, epsilon)
            scaled = np.clip(np.rint((activations + 1.0) * 127.5), 0, 255).astype(np.uint8)
            for stain in range(3):
                path = out_dir / gene / f"{spot.spot_id}_stain{stain + 1}.png"
                written.append(write_png(path, scaled[:, :, stain]))
    logger.info("stain_maps_written", genes=len(params), files=len(written))
    return written


@click.command("predict")
@click.option("--bundle", "bundle_path", type=click.Path(path_type=Path), required=True,
              help="model_bundle.json written by train")
@dataset_options(expression=False)
@patch_options
@click.option("--genes", "gene_names", multiple=True, help="Restrict to these bundle genes")
@click.option("--stain-maps", is_flag=True, help="Also write per-spot activated stain channels as PNG")
@output_option("predict")
@click.pass_context
def predict(ctx, bundle_path, manifest, slides, patch_side, max_padding, gene_names, stain_maps, out_dir):
    """Predict expression for every spot and write predictions.csv."""
    with RunTimer() as timer:
        bundle = BundleDocument.read(bundle_path)
        params = bundle.params_by_gene()
        requested = split_names(gene_names)
        if requested:
            unknown = [g for g in requested if g not in params]
            if unknown:
                raise ValidationFailure(
                    f"genes not in the bundle: {', '.join(unknown)}; known genes: {', '.join(params)}"
                )
            params = {g: params[g] for g in requested}
        if not params:
            raise ValidationFailure(f"{bundle_path}: bundle holds no trained genes")

        epsilon = bundle.config.epsilon
        dataset, _ = prepare_dataset(manifest, slides=slides, patch_side=patch_side, max_padding=max_padding)
        out_dir = resolve_out_dir(out_dir, "predict")

        bank = PixelBank.from_patches(dataset.patches(), epsilon)
        predictions = {gene: bank.predict(gene_params) for gene, gene_params in params.items()}
        predictions_path = out_dir / "predictions.csv"
        prediction_frame(dataset, predictions).to_csv(
            predictions_path, index=False, float_format="%.10g", lineterminator="\n"
        )
        outputs = [predictions_path]
        if stain_maps:
            write_stain_maps(out_dir / "stain_maps", dataset, params, epsilon)
            outputs.append(out_dir / "stain_maps")

    write_run_manifest(
        ctx,
        out_dir,
        {"epsilon": epsilon, "genes": list(params), "bundle_config": bundle.config.model_dump(mode="json")},
        inputs=dataset_inputs(manifest, dataset, bundle_path, *parse_slides(slides).values()),
        outputs=outputs,
        timer=timer,
    )
    click.echo(f"Wrote predictions for {len(dataset)} spots x {len(params)} genes to {predictions_path}")
