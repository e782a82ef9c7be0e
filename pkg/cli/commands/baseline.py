"""
baseline: ordinary least squares on precomputed spot features
"""
from pathlib import Path

import click
import structlog

from baseline.ols import load_feature_table, ols_predictor
from cli.options import (
    dataset_inputs,
    dataset_options,
    output_option,
    prepare_dataset,
    resolve_out_dir,
    write_run_manifest,
)
from errors import DataError
from evaluation.cv import cross_validate
from evaluation.report import write_report
from models.manifest import RunTimer

logger = structlog.get_logger(__name__)


@click.command("baseline")
@dataset_options()
@click.option("--features", "features_path", type=click.Path(path_type=Path), required=True,
              help="CSV: spot_id followed by numeric feature columns")
@click.option("--allow-skips", is_flag=True, help="Exit 0 even when some gene is unevaluable")
@output_option("baseline")
@click.pass_context
def baseline(ctx, manifest, expression, top_genes, gene_names, pseudo_count, features_path, allow_skips, out_dir):
    """Leave-one-patient-out OLS; writes report.csv in the eval schema."""
    with RunTimer() as timer:
        features = load_feature_table(features_path)
        dataset, genes = prepare_dataset(
            manifest, expression, top_genes, gene_names, pseudo_count, with_patches=False
        )
        out_dir = resolve_out_dir(out_dir, "baseline")
        report = cross_validate(dataset, genes, ols_predictor(features))
        report_path = write_report(out_dir / "report.csv", report)

    write_run_manifest(
        ctx,
        out_dir,
        {"genes": genes, "pseudo_count": pseudo_count, "features": list(features.feature_names)},
        inputs=dataset_inputs(manifest, dataset, expression, features_path),
        outputs=[report_path],
        timer=timer,
    )
    click.echo(
        f"{report.count_r_gt_half} of {len(genes)} genes with median r > {report.r_threshold:g}; "
        f"{report.count_p_significant} with combined p < {report.p_threshold:g}. Report: {report_path}"
    )
    if report.unevaluable and not allow_skips:
        raise DataError(f"unevaluable gene(s): {', '.join(report.unevaluable)} (pass --allow-skips to accept)")
