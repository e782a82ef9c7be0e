"""
eval: leave-one-patient-out evaluation of the stain model
"""
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import click
import structlog

from cli.options import (
    build_train_config,
    dataset_inputs,
    dataset_options,
    output_option,
    parse_slides,
    patch_options,
    prepare_dataset,
    resolve_out_dir,
    split_names,
    training_options,
    write_run_manifest,
)
from config import settings
from errors import DataError, ValidationFailure
from evaluation.cv import EvalReport, run_cv
from evaluation.overlay import spot_overlay, write_svg
from evaluation.report import write_report
from models.manifest import RunTimer
from models.records import SpotDataset

logger = structlog.get_logger(__name__)


def _safe(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in name)


def _fold_correlations(report: EvalReport, gene: str) -> Dict[str, Optional[float]]:
    """Held-out patient -> that fold's Pearson r for `gene`"""
    return {f.held_out_patient: f.per_gene[gene].r for f in report.folds if gene in f.per_gene}


def overlay_title(gene: str, slide: str, r: Optional[float]) -> str:
    score = f"r = {r:.2f}" if r is not None else "r n/a"
    return f"{gene} predicted, {slide} ({score})"


def write_overlays(
    out_dir: Path, dataset: SpotDataset, report: EvalReport, genes: Sequence[str], with_truth: bool = False
) -> List[Path]:
    """One SVG per slide and gene from out-of-fold predictions; `_true` variants show the targets"""
    written = []
    for gene in genes:
        predicted = report.out_of_fold(gene)
        fold_r = _fold_correlations(report, gene)
        column = dataset.gene_index(gene)
        for slide in dataset.slides:
            spots = [s for s in dataset.spots if s.slide_id == slide and s.spot_id in predicted]
            if not spots:
                logger.warning("overlay_skipped", gene=gene, slide=slide, reason="no out-of-fold predictions")
                continue
            coordinates = [s.center_xy for s in spots]
            title = overlay_title(gene, slide, fold_r.get(spots[0].patient_id))
            stem = f"overlay_{_safe(slide)}_{_safe(gene)}"
            written.append(
                write_svg(
                    out_dir / f"{stem}.svg",
                    spot_overlay(coordinates, [predicted[s.spot_id] for s in spots], title=title),
                )
            )
            if with_truth:
                written.append(
                    write_svg(
                        out_dir / f"{stem}_true.svg",
                        spot_overlay(coordinates, [s.expression[column] for s in spots], title=f"{gene} observed, {slide}"),
                    )
                )
    logger.info("overlays_written", files=len(written))
    return written


@click.command("eval")
@dataset_options()
@patch_options
@training_options
@click.option("--overlay-genes", multiple=True, help="Genes to draw per-slide spot overlays for")
@click.option("--with-truth", is_flag=True, help="Also draw overlays of the observed expression")
@click.option("--allow-skips", is_flag=True, help="Exit 0 even when some gene is unevaluable")
@output_option("eval")
@click.pass_context
def evaluate(ctx, manifest, expression, top_genes, gene_names, pseudo_count, slides, patch_side, max_padding,
             config_path, lr, batch, epochs, epsilon, seed, init_range, stain_bias, workers, overlay_genes,
             with_truth, allow_skips, out_dir):
    """Cross-validate per gene, leaving one patient out, and write report.csv."""
    with RunTimer() as timer:
        config = build_train_config(config_path, lr, batch, epochs, epsilon, seed, init_range, stain_bias)
        dataset, genes = prepare_dataset(
            manifest, expression, top_genes, gene_names, pseudo_count, slides, patch_side, max_padding
        )
        known = list(dataset.gene_names)
        for option, names in (("--genes", genes), ("--overlay-genes", split_names(overlay_genes))):
            unknown = [g for g in names if g not in known]
            if unknown:
                raise ValidationFailure(f"{option}: unknown gene(s) {', '.join(unknown)}; known genes: {', '.join(known)}")

        out_dir = resolve_out_dir(out_dir, "eval")
        report = run_cv(dataset, genes, config, workers or settings.workers)
        report_path = write_report(out_dir / "report.csv", report)
        outputs = [report_path]
        if overlay_genes:
            overlay_dir = out_dir / "overlays"
            write_overlays(overlay_dir, dataset, report, split_names(overlay_genes), with_truth)
            outputs.append(overlay_dir)

    write_run_manifest(
        ctx,
        out_dir,
        {**config.model_dump(mode="json"), "genes": genes, "pseudo_count": pseudo_count},
        inputs=dataset_inputs(manifest, dataset, expression, config_path, *parse_slides(slides).values()),
        outputs=outputs,
        timer=timer,
    )
    click.echo(
        f"{report.count_r_gt_half} of {len(genes)} genes with median r > {report.r_threshold:g}; "
        f"{report.count_p_significant} with combined p < {report.p_threshold:g}. Report: {report_path}"
    )
    if report.unevaluable and not allow_skips:
        raise DataError(f"unevaluable gene(s): {', '.join(report.unevaluable)} (pass --allow-skips to accept)")
