"""
report: side-by-side comparison of report files
"""
from pathlib import Path

import click
import structlog

from cli.options import output_option, resolve_out_dir, split_names, write_run_manifest
from errors import ValidationFailure
from evaluation.cv import P_THRESHOLD, R_THRESHOLD
from evaluation.overlay import correlation_scatter, write_svg
from evaluation.report import comparison_markdown, print_comparison, read_report
from models.manifest import RunTimer

logger = structlog.get_logger(__name__)


@click.command("report")
@click.argument("reports", nargs=-1, required=True, metavar="[LABEL=]REPORT.csv...")
@click.option("--genes", "gene_names", multiple=True,
              help="Genes shown as columns  [default: genes of the first report]")
@click.option("--scatter", is_flag=True, help="Write median r against -log10 p per report as SVG")
@output_option("report")
@click.pass_context
def report(ctx, reports, gene_names, scatter, out_dir):
    """Compare median correlations and summary counts across methods."""
    with RunTimer() as timer:
        tables, paths = [], []
        for entry in reports:
            label, sep, path = entry.partition("=")
            if not sep:
                label, path = None, entry
            tables.append(read_report(Path(path), label))
            paths.append(Path(path))

        genes = split_names(gene_names) or list(tables[0].per_gene)
        missing = [g for g in genes if not any(g in t.per_gene for t in tables)]
        if missing:
            known = sorted({g for t in tables for g in t.per_gene})
            raise ValidationFailure(f"gene(s) in no report: {', '.join(missing)}; known genes: {', '.join(known)}")

        out_dir = resolve_out_dir(out_dir, "report")
        print_comparison(tables, genes)
        markdown_path = out_dir / "comparison.md"
        markdown_path.write_text(comparison_markdown(tables, genes))
        outputs = [markdown_path]

        if scatter:
            for table in tables:
                scored = [s for s in table.per_gene.values() if s.evaluable]
                if not scored:
                    logger.warning("scatter_skipped", report=table.label, reason="no evaluable genes")
                    continue
                outputs.append(
                    write_svg(
                        out_dir / f"scatter_{table.label}.svg",
                        correlation_scatter(
                            [s.median_r for s in scored],
                            [s.combined_p for s in scored],
                            r_threshold=R_THRESHOLD,
                            p_threshold=P_THRESHOLD,
                        ),
                    )
                )

    write_run_manifest(
        ctx, out_dir, {"labels": [t.label for t in tables], "genes": genes}, inputs=paths, outputs=outputs, timer=timer
    )
    click.echo(f"Wrote {markdown_path}")
