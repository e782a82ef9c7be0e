"""
Option groups and data preparation shared by the subcommands
"""
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import click
import structlog

from config import create_directories, settings
from errors import ValidationFailure
from models.configs import TrainConfig
from models.manifest import RunManifest, RunTimer, digest_files
from models.records import SpotDataset
from spots.loaders import load_expression, load_manifest
from spots.patches import attach_patches
from spots.preprocess import restrict_genes, select_top_genes, transform_targets

logger = structlog.get_logger(__name__)


def split_names(values: Sequence[str]) -> List[str]:
    """Flatten repeated and comma-separated name options, keeping order"""
    names: List[str] = []
    for value in values or ():
        names.extend(part.strip() for part in value.split(",") if part.strip())
    return list(dict.fromkeys(names))


def parse_slides(values: Sequence[str]) -> Dict[str, Path]:
    slides: Dict[str, Path] = {}
    for value in values or ():
        slide_id, sep, path = value.partition("=")
        if not sep or not slide_id.strip() or not path.strip():
            raise click.BadParameter(f"expected SLIDE_ID=PATH, got {value!r}", param_hint="--slide")
        slides[slide_id.strip()] = Path(path.strip())
    return slides


def _apply(command, options):
    for option in reversed(options):
        command = option(command)
    return command


def dataset_options(expression: bool = True):
    """Decorator adding the spot dataset flags; `expression` adds the target flags"""

    def decorate(command):
        options = [
            click.option("--manifest", type=click.Path(path_type=Path), required=True,
                         help="CSV: patient_id,slide_id,spot_id,x,y,patch_path"),
        ]
        if expression:
            options += [
                click.option("--expression", type=click.Path(path_type=Path), required=True,
                             help="Expression matrix (tab or comma separated), first column spot_id"),
                click.option("--top-genes", type=click.IntRange(min=1), default=250, show_default=True,
                             help="Genes kept by median expression"),
                click.option("--genes", "gene_names", multiple=True,
                             help="Explicit gene list (comma separated or repeated); overrides --top-genes"),
                click.option("--pseudo-count", type=click.FloatRange(min=0, min_open=True), default=1.0,
                             show_default=True, help="Added before the natural log transform"),
            ]
        return _apply(command, options)

    return decorate


def patch_options(command):
    """Decorator adding the patch loading flags"""
    return _apply(
        command,
        [
            click.option("--slide", "slides", multiple=True, metavar="SLIDE_ID=PATH",
                         help="Raster image to crop patches from for spots without patch_path"),
            click.option("--patch-side", type=click.IntRange(min=1), default=256, show_default=True,
                         help="Side of patches cropped from slide rasters"),
            click.option("--max-padding", type=click.FloatRange(0.0, 1.0), default=1.0, show_default=True,
                         help="Drop spots whose patch has a larger padded fraction"),
        ],
    )


def training_options(command):
    """Decorator adding hyperparameter flags; unset flags fall back to --config, then defaults"""
    return _apply(
        command,
        [
            click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False, path_type=Path),
                         help="YAML file with training options"),
            click.option("--lr", type=click.FloatRange(min=0, min_open=True), default=None,
                         help="Adam learning rate  [default: 0.001]"),
            click.option("--batch", type=click.IntRange(min=1), default=None, help="Minibatch size  [default: 128]"),
            click.option("--epochs", type=click.IntRange(min=1), default=None, help="Training epochs  [default: 250]"),
            click.option("--epsilon", type=click.FloatRange(0, 1, min_open=True, max_open=True), default=None,
                         help="Optical density floor  [default: 1e-6]"),
            click.option("--seed", type=click.IntRange(min=0, max=2**64 - 1), default=None,
                         help="Seed for every random stream  [default: 0]"),
            click.option("--init-range", type=click.FloatRange(min=0), default=None,
                         help="Head weight/bias initialization range  [default: 0.1]"),
            click.option("--stain-bias/--no-stain-bias", default=None, help="Learn the stain-wise biases  [default: on]"),
            click.option("--workers", type=click.IntRange(min=1), default=None,
                         help="Parallel training processes  [default: physical cores]"),
        ],
    )


def output_option(default_name: str):
    return click.option(
        "--out",
        "out_dir",
        type=click.Path(file_okay=False, path_type=Path),
        default=None,
        help=f"Output directory  [default: <output_dir>/{default_name}]",
    )


def resolve_out_dir(out_dir: Optional[Path], default_name: str) -> Path:
    out_dir = out_dir if out_dir is not None else settings.output_dir / default_name
    create_directories(out_dir)
    return out_dir


def build_train_config(
    config_path: Optional[Path] = None,
    lr: Optional[float] = None,
    batch: Optional[int] = None,
    epochs: Optional[int] = None,
    epsilon: Optional[float] = None,
    seed: Optional[int] = None,
    init_range: Optional[float] = None,
    stain_bias: Optional[bool] = None,
) -> TrainConfig:
    overrides = {
        "learning_rate": lr,
        "batch_size": batch,
        "epochs": epochs,
        "epsilon": epsilon,
        "seed": seed,
        "init_range": init_range,
        "use_stain_bias": stain_bias,
    }
    if config_path is not None:
        return TrainConfig.from_yaml(config_path, **overrides)
    # environment settings fill what the command line leaves open
    overrides["epsilon"] = epsilon if epsilon is not None else settings.epsilon
    overrides["seed"] = seed if seed is not None else settings.seed
    return TrainConfig(**{k: v for k, v in overrides.items() if v is not None})


def prepare_dataset(
    manifest: Path,
    expression: Optional[Path] = None,
    top_genes: int = 250,
    gene_names: Sequence[str] = (),
    pseudo_count: float = 1.0,
    slides: Sequence[str] = (),
    patch_side: int = 256,
    max_padding: float = 1.0,
    with_patches: bool = True,
) -> Tuple[SpotDataset, List[str]]:
    """Load, select genes, log-transform targets and load patches.

    Returns the dataset restricted to the known requested genes and the full
    requested gene list (unknown names included, so they surface as failures).
    """
    dataset = load_manifest(manifest)
    genes: List[str] = []
    if expression is not None:
        dataset = load_expression(expression, dataset)
        genes = split_names(gene_names) or select_top_genes(dataset, top_genes)
        known = [g for g in genes if g in dataset.gene_names]
        if not known:
            raise ValidationFailure(
                f"none of the requested genes are in {expression}; known genes: {', '.join(dataset.gene_names)}"
            )
        unknown = [g for g in genes if g not in dataset.gene_names]
        if unknown:
            logger.warning("unknown_genes_requested", genes=unknown)
        dataset = transform_targets(restrict_genes(dataset, known), pseudo_count)
    if with_patches:
        dataset = attach_patches(dataset, patch_side, parse_slides(slides), max_padding)
    logger.info("dataset_ready", spots=len(dataset), patients=len(dataset.patients), genes=len(genes))
    return dataset, genes


def _render(value: Any) -> Any:
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, (list, tuple)):
        return [_render(v) for v in value]
    return value


def command_echo(ctx: click.Context) -> List[str]:
    """Command path followed by every flag that was set"""
    echo = ctx.command_path.split()
    for name, value in sorted(ctx.params.items()):
        if value is None or value == () or value is False:
            continue
        flag = "--" + name.replace("_", "-")
        if value is True:
            echo.append(flag)
        elif isinstance(value, (list, tuple)):
            echo.extend(f"{flag}={_render(v)}" for v in value)
        else:
            echo.append(f"{flag}={_render(value)}")
    return echo


def write_run_manifest(
    ctx: click.Context,
    out_dir: Path,
    config: Dict[str, Any],
    inputs: Iterable[Path],
    outputs: Iterable[Path],
    timer: RunTimer,
) -> Path:
    manifest = RunManifest(
        command=command_echo(ctx),
        config={k: _render(v) for k, v in config.items()},
        input_digests=digest_files(p for p in inputs if p is not None),
        output_digests=digest_files(outputs),
        duration_seconds=round(timer.elapsed, 3),
    )
    path = manifest.write(Path(out_dir) / "run_manifest.json")
    logger.info("run_manifest_written", path=str(path))
    return path


def dataset_inputs(manifest: Path, dataset: SpotDataset, *others: Optional[Path]) -> List[Path]:
    """Every file a dataset was read from, for digesting"""
    paths = [manifest, *(p for p in others if p is not None)]
    paths += sorted({spot.patch_path for spot in dataset.spots if spot.patch_path is not None})
    return paths
