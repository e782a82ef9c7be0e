"""
train: fit one stain model per gene on the whole dataset
"""
from typing import Optional

import click
import structlog
from rich.console import Console
from rich.table import Table

from cli.options import (
    build_train_config,
    dataset_inputs,
    dataset_options,
    output_option,
    patch_options,
    parse_slides,
    prepare_dataset,
    resolve_out_dir,
    training_options,
    write_run_manifest,
)
from config import settings
from errors import NumericFailure
from models.bundle import bundle_from_result
from models.manifest import RunTimer
from stain.trainer import TrainedGeneModel, TrainingResult, train_all

logger = structlog.get_logger(__name__)


def print_training_summary(result: TrainingResult, console: Optional[Console] = None) -> None:
    console = console or Console(stderr=True)
    table = Table(title=f"Trained {len(result.models)} of {len(result.outcomes)} genes")
    table.add_column("Gene")
    table.add_column("Epoch 1 loss", justify="right")
    table.add_column("Final loss", justify="right")
    table.add_column("Status")
    for outcome in result.outcomes:
        if isinstance(outcome, TrainedGeneModel):
            table.add_row(outcome.gene_name, f"{outcome.loss_trace[0]:.4g}", f"{outcome.final_loss:.4g}", "ok")
        else:
            table.add_row(outcome.gene_name, "-", "-", outcome.error_type)
    console.print(table)


@click.command("train")
@dataset_options()
@patch_options
@training_options
@output_option("train")
@click.pass_context
def train(ctx, manifest, expression, top_genes, gene_names, pseudo_count, slides, patch_side, max_padding,
          config_path, lr, batch, epochs, epsilon, seed, init_range, stain_bias, workers, out_dir):
    """Train per-gene models and write model_bundle.json."""
    with RunTimer() as timer:
        config = build_train_config(config_path, lr, batch, epochs, epsilon, seed, init_range, stain_bias)
        dataset, genes = prepare_dataset(
            manifest, expression, top_genes, gene_names, pseudo_count, slides, patch_side, max_padding
        )
        out_dir = resolve_out_dir(out_dir, "train")
        result = train_all(dataset, genes, config, workers or settings.workers)
        bundle_path = bundle_from_result(result).write(out_dir / "model_bundle.json")

    print_training_summary(result)
    write_run_manifest(
        ctx,
        out_dir,
        {**config.model_dump(mode="json"), "genes": genes, "pseudo_count": pseudo_count},
        inputs=dataset_inputs(manifest, dataset, expression, config_path, *parse_slides(slides).values()),
        outputs=[bundle_path],
        timer=timer,
    )
    click.echo(f"Wrote {bundle_path}")
    if not result.models:
        raise NumericFailure("no gene could be trained; see the failures in the bundle")
