"""
Tests for report files and method comparisons
"""
import pytest
from rich.console import Console

from errors import DataError, MissingColumn
from evaluation.cv import EvalReport, GeneSummary
from evaluation.report import (
    REPORT_COLUMNS,
    comparison_markdown,
    format_report,
    print_comparison,
    read_report,
    write_report,
)


def _report(**genes) -> EvalReport:
    per_gene = {
        name: GeneSummary(name, r, p, 8 if r is not None else 0, 0 if r is not None else 8)
        for name, (r, p) in genes.items()
    }
    return EvalReport(per_gene, ())


def test_format_report_layout():
    text = format_report(_report(GNAS=(0.54, 3e-6), FASN=(0.2, 0.04), ERBB2=(None, None)))
    lines = text.splitlines()
    assert lines[0] == ",".join(REPORT_COLUMNS)
    assert lines[1] == "GNAS,0.54,3e-06,8,0"
    assert lines[3] == "ERBB2,,,0,8"
    assert lines[-2] == "# genes_r_gt_0.5,1"
    assert lines[-1] == "# genes_p_lt_1e-05,1"


def test_report_round_trip(tmp_path):
    report = _report(GNAS=(0.54, 3e-6), FASN=(0.52, 2e-5), ACTB=(None, None))
    path = write_report(tmp_path / "report.csv", report)
    table = read_report(path, "NSL")
    assert table.label == "NSL"
    assert table.per_gene["FASN"].median_r == 0.52
    assert table.per_gene["GNAS"].combined_p == 3e-6
    assert not table.per_gene["ACTB"].evaluable
    assert (table.count_r_gt_half, table.count_p_significant) == (2, 1)


def test_read_report_errors(tmp_path):
    with pytest.raises(DataError):
        read_report(tmp_path / "absent.csv")
    broken = tmp_path / "broken.csv"
    broken.write_text("gene,median_r\nGNAS,0.5\n")
    with pytest.raises(MissingColumn):
        read_report(broken)


def test_comparison_outputs(tmp_path):
    write_report(tmp_path / "nsl.csv", _report(GNAS=(0.54, 3e-6), FASN=(0.52, 2e-7)))
    write_report(tmp_path / "ols.csv", _report(GNAS=(0.36, 0.01)))
    tables = [read_report(tmp_path / "nsl.csv", "NSL"), read_report(tmp_path / "ols.csv", "CC + MF")]

    markdown = comparison_markdown(tables, ["GNAS", "FASN"])
    lines = markdown.splitlines()
    assert lines[0] == "| Method | GNAS | FASN | # Genes with r > 0.5 | # Genes with p < 1e-05 |"
    assert lines[2] == "| NSL | 0.54 | 0.52 | 2 | 2 |"
    assert lines[3] == "| CC + MF | 0.36 | - | 0 | 0 |"

    console = Console(record=True, width=160)
    print_comparison(tables, ["GNAS", "FASN"], console)
    assert "CC + MF" in console.export_text()


def test_report_keeps_awkward_gene_names(tmp_path):
    report = _report(**{"HLA-A,B": (0.61, 2e-7), "NA": (0.3, 0.01), "null": (None, None)})
    text = format_report(report)
    assert text.splitlines()[1] == '"HLA-A,B",0.61,2e-07,8,0'
    table = read_report(write_report(tmp_path / "report.csv", report))
    assert list(table.per_gene) == ["HLA-A,B", "NA", "null"]
    assert table.per_gene["NA"].median_r == 0.3
    assert not table.per_gene["null"].evaluable
