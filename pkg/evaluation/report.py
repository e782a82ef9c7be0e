"""
Report files shared by the stain model and the OLS baseline
"""
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import pandas as pd
from rich.console import Console
from rich.table import Table

from errors import DataError, MissingColumn
from evaluation.cv import P_THRESHOLD, R_THRESHOLD, EvalReport, GeneSummary

REPORT_COLUMNS = ["gene", "median_r", "combined_p", "n_folds", "n_skipped"]
R_FOOTER = f"# genes_r_gt_{R_THRESHOLD:g}"
P_FOOTER = f"# genes_p_lt_{P_THRESHOLD:g}"


def _fmt(value: Optional[float]) -> str:
    return "" if value is None else format(value, ".10g")


def _parse(value: str) -> Optional[float]:
    return float(value) if value.strip() else None


def format_report(report: EvalReport) -> str:
    frame = pd.DataFrame(
        [
            [gene, _fmt(s.median_r), _fmt(s.combined_p), str(s.n_folds), str(s.n_skipped)]
            for gene, s in report.per_gene.items()
        ],
        columns=REPORT_COLUMNS,
    )
    body = frame.to_csv(index=False, lineterminator="\n")
    return body + f"{R_FOOTER},{report.count_r_gt_half}\n{P_FOOTER},{report.count_p_significant}\n"


def write_report(path: Union[str, Path], report: EvalReport) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_report(report))
    return path


@dataclass(frozen=True)
class ReportTable:
    """A report file read back: per-gene summaries and its footer counts"""

    label: str
    per_gene: Dict[str, GeneSummary]
    count_r_gt_half: int
    count_p_significant: int


def read_report(path: Union[str, Path], label: Optional[str] = None) -> ReportTable:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"report not found: {path}")
    footer, body = {}, []
    for line in path.read_text().splitlines():
        key, _, value = line.rpartition(",")
        if key in (R_FOOTER, P_FOOTER):
            footer[key] = int(value)
        else:
            body.append(line)
    # gene names are kept verbatim, "NA" included
    frame = pd.read_csv(io.StringIO("\n".join(body)), dtype=str, keep_default_na=False, na_filter=False)
    missing = [c for c in REPORT_COLUMNS if c not in frame.columns]
    if missing:
        raise MissingColumn(f"{path}: missing column(s) {', '.join(missing)}")

    per_gene = {}
    for row in frame.itertuples(index=False):
        per_gene[row.gene] = GeneSummary(
            row.gene, _parse(row.median_r), _parse(row.combined_p), int(row.n_folds), int(row.n_skipped)
        )

    def count(key: str, fallback: int) -> int:
        return footer.get(key, fallback)

    return ReportTable(
        label=label or path.stem,
        per_gene=per_gene,
        count_r_gt_half=count(R_FOOTER, sum(1 for s in per_gene.values() if s.evaluable and s.median_r > R_THRESHOLD)),
        count_p_significant=count(
            P_FOOTER, sum(1 for s in per_gene.values() if s.evaluable and s.combined_p < P_THRESHOLD)
        ),
    )


def comparison_rows(tables: Sequence[ReportTable], genes: Sequence[str]) -> List[List[str]]:
    """One row per report: label, median r per gene, then both summary counts"""
    rows = []
    for table in tables:
        cells = [table.label]
        for gene in genes:
            summary = table.per_gene.get(gene)
            cells.append("-" if summary is None or summary.median_r is None else f"{summary.median_r:.2f}")
        cells += [str(table.count_r_gt_half), str(table.count_p_significant)]
        rows.append(cells)
    return rows


def comparison_header(genes: Sequence[str]) -> List[str]:
    return ["Method", *genes, f"# Genes with r > {R_THRESHOLD:g}", f"# Genes with p < {P_THRESHOLD:g}"]


def comparison_markdown(tables: Sequence[ReportTable], genes: Sequence[str]) -> str:
    header = comparison_header(genes)
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    for row in comparison_rows(tables, genes):
        lines.append("| " + " | ".join(row) + " |")
    return "\n".join(lines) + "\n"


def print_comparison(tables: Sequence[ReportTable], genes: Sequence[str], console: Optional[Console] = None) -> None:
    console = console or Console()
    table = Table(title="Median Pearson correlation per gene")
    for column in comparison_header(genes):
        table.add_column(column, justify="left" if column == "Method" else "right")
    for row in comparison_rows(tables, genes):
        table.add_row(*row)
    console.print(table)
