"""
synth: write a synthetic dataset generated by a known stain model
"""
import json
from pathlib import Path

import click
import numpy as np
import pandas as pd
import structlog

from cli.options import output_option, resolve_out_dir, write_run_manifest
from config import settings
from models.bundle import format_exact
from models.configs import SynthConfig, mixing_matrix
from models.manifest import RunTimer
from spots.patches import write_png
from spots.synth import default_true_params, synth_generate

logger = structlog.get_logger(__name__)


def _coordinate(value: float) -> str:
    return format(value, ".10g")


@click.command("synth")
@click.option("--patients", type=click.IntRange(min=1), default=6, show_default=True)
@click.option("--spots", "spots_per_patient", type=click.IntRange(min=1), default=200, show_default=True,
              help="Spots per patient")
@click.option("--genes", type=click.IntRange(min=1), default=3, show_default=True, help="Synthetic genes")
@click.option("--patch-side", type=click.IntRange(min=1), default=32, show_default=True)
@click.option("--noise", "noise_sigma", type=click.FloatRange(min=0), default=0.05, show_default=True,
              help="Gaussian label noise sigma")
@click.option("--jitter", type=click.FloatRange(min=0), default=0.02, show_default=True,
              help="Per-pixel optical density noise")
@click.option("--mixing-scale", type=click.FloatRange(min=0, min_open=True), default=0.45, show_default=True,
              help="Scale of the stain-to-optical-density mixing matrix")
@click.option("--epsilon", type=click.FloatRange(0, 1, min_open=True, max_open=True), default=None,
              help="Optical density floor  [default: 1e-6]")
@click.option("--seed", type=click.IntRange(min=0), default=None, help="Generator seed  [default: 0]")
@output_option("synth")
@click.pass_context
def synth(ctx, patients, spots_per_patient, genes, patch_side, noise_sigma, jitter, mixing_scale, epsilon, seed,
          out_dir):
    """Generate patches, a manifest and an expression matrix from known models.

    Patches are stored as 8-bit PNG and the labels are computed on the stored
    pixels. Expression values are written as exp(target) so the default log
    transform of `train` and `eval` sees a monotone image of the target.
    """
    with RunTimer() as timer:
        seed = settings.seed if seed is None else seed
        config = SynthConfig(
            true_params=tuple(default_true_params(genes, seed)),
            mixing=mixing_matrix(mixing_scale),
            patients=patients,
            spots_per_patient=spots_per_patient,
            patch_side=patch_side,
            noise_sigma=noise_sigma,
            jitter=jitter,
            epsilon=settings.epsilon if epsilon is None else epsilon,
            seed=seed,
            quantize=True,
        )
        dataset = synth_generate(config)
        out_dir = resolve_out_dir(out_dir, "synth")

        rows = []
        for spot in dataset.spots:
            relative = Path("patches") / f"{spot.spot_id}.png"
            write_png(out_dir / relative, spot.patch.pixels)
            rows.append(
                {
                    "patient_id": spot.patient_id,
                    "slide_id": spot.slide_id,
                    "spot_id": spot.spot_id,
                    "x": _coordinate(spot.center_xy[0]),
                    "y": _coordinate(spot.center_xy[1]),
                    "patch_path": relative.as_posix(),
                }
            )
        manifest_path = out_dir / "manifest.csv"
        pd.DataFrame(rows).to_csv(manifest_path, index=False, lineterminator="\n")

        expression = pd.DataFrame(
            np.exp(dataset.expression_matrix()), columns=list(dataset.gene_names)
        ).map(format_exact)
        expression.insert(0, "spot_id", [spot.spot_id for spot in dataset.spots])
        expression_path = out_dir / "expression.tsv"
        expression.to_csv(expression_path, sep="\t", index=False, lineterminator="\n")

        truth = {
            "config": config.model_dump(mode="json", exclude={"true_params"}),
            "expression_encoding": "exp(target)",
            "genes": {
                name: [format_exact(v) for v in params.to_vector()]
                for name, params in zip(dataset.gene_names, config.true_params)
            },
        }
        truth_path = out_dir / "truth.json"
        truth_path.write_text(json.dumps(truth, sort_keys=True, indent=2) + "\n")

    write_run_manifest(
        ctx,
        out_dir,
        truth["config"],
        inputs=[],
        outputs=[manifest_path, expression_path, truth_path, out_dir / "patches"],
        timer=timer,
    )
    logger.info("synthetic_dataset_written", out=str(out_dir), spots=len(dataset), genes=len(dataset.gene_names))
    click.echo(f"Wrote {len(dataset)} spots x {len(dataset.gene_names)} genes to {out_dir}")
