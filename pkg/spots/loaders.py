"""
Spot manifest and expression matrix ingestion
"""
from pathlib import Path
from typing import List, Union

import numpy as np
import pandas as pd
import structlog

from errors import DataError, DuplicateSpotId, MalformedRow, MissingColumn, NoOverlap, RaggedRow
from models.records import SpotDataset, SpotRecord

logger = structlog.get_logger(__name__)

MANIFEST_COLUMNS = ["patient_id", "slide_id", "spot_id", "x", "y", "patch_path"]


def _read_text_table(path: Path, sep: str) -> pd.DataFrame:
    if not path.is_file():
        raise DataError(f"file not found: {path}")
    try:
        return pd.read_csv(path, sep=sep, dtype=str, keep_default_na=False, na_filter=False, skip_blank_lines=True)
    except pd.errors.EmptyDataError:
        raise MissingColumn(f"{path}: file is empty, header row expected") from None
    except pd.errors.ParserError as e:
        raise RaggedRow(f"inconsistent field count: {e}", path=str(path)) from e


def load_manifest(path: Union[str, Path]) -> SpotDataset:
    """Read `patient_id,slide_id,spot_id,x,y,patch_path` rows; no expression attached"""
    path = Path(path)
    frame = _read_text_table(path, ",")
    frame.columns = [c.strip() for c in frame.columns]

    missing = [c for c in MANIFEST_COLUMNS if c not in frame.columns]
    if missing:
        raise MissingColumn(f"{path}: missing column(s) {', '.join(missing)}")

    base = path.parent
    spots: List[SpotRecord] = []
    seen = set()
    # header is line 1
    for line, row in enumerate(frame[MANIFEST_COLUMNS].itertuples(index=False), start=2):
        patient_id, slide_id, spot_id, x, y, patch_path = (str(v).strip() for v in row)
        if not patient_id or not slide_id or not spot_id:
            raise MalformedRow("patient_id, slide_id and spot_id must be non-empty", row=line, path=str(path))
        try:
            xy = (float(x), float(y))
        except ValueError:
            raise MalformedRow(f"coordinates {x!r}, {y!r} are not numbers", row=line, path=str(path)) from None
        if not all(np.isfinite(xy)) or xy[0] < 0 or xy[1] < 0:
            raise MalformedRow(f"coordinates must be finite and non-negative, got {xy}", row=line, path=str(path))
        if spot_id in seen:
            raise DuplicateSpotId(f"{path}:{line}: duplicate spot_id {spot_id!r}")
        seen.add(spot_id)
        reference = None
        if patch_path:
            reference = Path(patch_path)
            if not reference.is_absolute():
                reference = base / reference
        spots.append(SpotRecord(patient_id, slide_id, spot_id, xy, patch_path=reference))

    if not spots:
        raise DataError(f"{path}: manifest has no rows")

    dataset = SpotDataset(tuple(spots))
    logger.info("manifest_loaded", path=str(path), spots=len(dataset), patients=len(dataset.patients))
    return dataset


def _sniff_delimiter(path: Path) -> str:
    with open(path, "r") as handle:
        header = handle.readline()
    return "\t" if "\t" in header else ","


def load_expression(path: Union[str, Path], dataset: SpotDataset) -> SpotDataset:
    """Attach expression vectors from a spot_id x gene matrix (tab or comma separated)"""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"file not found: {path}")
    frame = _read_text_table(path, _sniff_delimiter(path))
    frame.columns = [c.strip() for c in frame.columns]

    if not len(frame.columns) or frame.columns[0] != "spot_id":
        raise MissingColumn(f"{path}: first column must be 'spot_id'")
    gene_names = list(frame.columns[1:])
    if len(set(gene_names)) != len(gene_names):
        raise MalformedRow("duplicate gene names in header", row=1, path=str(path))

    spot_ids = frame["spot_id"].str.strip().tolist()
    values = np.empty((len(frame), len(gene_names)), dtype=np.float64)
    for i, row in enumerate(frame[gene_names].itertuples(index=False)):
        line = i + 2
        if any(not isinstance(cell, str) or cell.strip() == "" for cell in row):
            raise RaggedRow(f"expected {len(gene_names)} values", row=line, path=str(path))
        try:
            values[i] = [float(cell) for cell in row]
        except ValueError as e:
            raise MalformedRow(f"non-numeric expression value ({e})", row=line, path=str(path)) from None
        if not np.all(np.isfinite(values[i])):
            raise MalformedRow("expression values must be finite", row=line, path=str(path))

    lookup = {}
    for i, spot_id in enumerate(spot_ids):
        if spot_id in lookup:
            raise DuplicateSpotId(f"{path}: spot_id {spot_id!r} appears twice")
        lookup[spot_id] = i

    kept = [spot for spot in dataset.spots if spot.spot_id in lookup]
    if not kept:
        raise NoOverlap(f"{path}: none of the {len(dataset)} manifest spots appear in the expression matrix")
    dropped = len(dataset) - len(kept)
    if dropped:
        logger.warning("spots_without_expression", path=str(path), dropped=dropped)

    matrix = values[[lookup[spot.spot_id] for spot in kept]]
    result = SpotDataset(tuple(kept), tuple(gene_names), dropped_spots=dropped)
    result = result.with_expression_matrix(matrix, gene_names)
    logger.info("expression_loaded", path=str(path), spots=len(result), genes=len(gene_names))
    return result
