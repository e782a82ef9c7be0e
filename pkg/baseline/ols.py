"""
Ordinary least squares over precomputed spot features
"""
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import structlog
from scipy import linalg

from errors import (
    ColumnMismatch,
    DataError,
    DuplicateSpotId,
    LengthMismatch,
    MalformedRow,
    MissingColumn,
    NonFinite,
    RankDeficient,
    TooFewRows,
)
from models.records import SpotDataset

logger = structlog.get_logger(__name__)


@dataclass(frozen=True, eq=False)
class FeatureTable:
    """N spots x F numeric features"""

    spot_ids: Tuple[str, ...]
    feature_names: Tuple[str, ...]
    matrix: np.ndarray

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape != (len(self.spot_ids), len(self.feature_names)):
            raise ColumnMismatch(
                f"feature matrix shape {matrix.shape} does not match {len(self.spot_ids)} spots x "
                f"{len(self.feature_names)} features"
            )
        if not np.all(np.isfinite(matrix)):
            raise NonFinite("feature table contains non-finite entries")
        if len(set(self.spot_ids)) != len(self.spot_ids):
            raise DuplicateSpotId("feature table repeats a spot_id")
        matrix.setflags(write=False)
        object.__setattr__(self, "spot_ids", tuple(self.spot_ids))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "matrix", matrix)

    def rows_for(self, spot_ids: Sequence[str]) -> "FeatureTable":
        index = {spot_id: i for i, spot_id in enumerate(self.spot_ids)}
        missing = [s for s in spot_ids if s not in index]
        if missing:
            raise DataError(f"{len(missing)} spots have no features (first: {missing[0]})")
        return FeatureTable(tuple(spot_ids), self.feature_names, self.matrix[[index[s] for s in spot_ids]])

    def columns(self, feature_names: Sequence[str]) -> np.ndarray:
        index = {name: i for i, name in enumerate(self.feature_names)}
        missing = [n for n in feature_names if n not in index]
        if missing or len(feature_names) != len(self.feature_names):
            raise ColumnMismatch(
                f"feature columns {list(self.feature_names)} do not match the model's {list(feature_names)}"
            )
        return self.matrix[:, [index[n] for n in feature_names]]


def load_feature_table(path: Union[str, Path]) -> FeatureTable:
    """Read `spot_id,<feature names...>`"""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"feature table not found: {path}")
    try:
        frame = pd.read_csv(path, dtype={"spot_id": str})
    except pd.errors.EmptyDataError:
        raise MissingColumn(f"{path}: file is empty") from None
    except pd.errors.ParserError as e:
        raise MalformedRow(f"cannot parse feature table: {e}", path=str(path)) from e
    frame.columns = [str(c).strip() for c in frame.columns]
    if not len(frame.columns) or frame.columns[0] != "spot_id":
        raise MissingColumn(f"{path}: first column must be 'spot_id'")
    features = frame.columns[1:]
    try:
        matrix = frame[features].apply(pd.to_numeric, errors="raise").to_numpy(dtype=np.float64)
    except (ValueError, TypeError) as e:
        raise MalformedRow(f"non-numeric feature value: {e}", path=str(path)) from e
    table = FeatureTable(tuple(frame["spot_id"].astype(str).str.strip()), tuple(features), matrix)
    logger.info("features_loaded", path=str(path), spots=len(table.spot_ids), features=len(features))
    return table


@dataclass(frozen=True, eq=False)
class OlsModel:
    """Intercept first, then one slope per feature"""

    weights: np.ndarray
    gene_name: str
    feature_names: Tuple[str, ...]
    notes: Tuple[str, ...] = field(default=())

    @property
    def intercept(self) -> float:
        return float(self.weights[0])

    @property
    def slopes(self) -> np.ndarray:
        return self.weights[1:]


def _design(matrix: np.ndarray) -> np.ndarray:
    return np.hstack([np.ones((matrix.shape[0], 1)), matrix])


def ols_fit(features: FeatureTable, targets: Sequence[float], gene_name: str = "") -> OlsModel:
    """Least squares with an intercept, solved through a QR decomposition"""
    t = np.asarray(targets, dtype=np.float64).ravel()
    n, f = features.matrix.shape
    if t.shape[0] != n:
        raise LengthMismatch(f"{n} feature rows but {t.shape[0]} targets")
    if not np.all(np.isfinite(t)):
        raise NonFinite("targets contain non-finite values")
    if n < f + 1:
        raise TooFewRows(f"need at least {f + 1} rows for {f} features and an intercept, got {n}")

    x = _design(features.matrix)
    q, r = linalg.qr(x, mode="economic")
    diagonal = np.abs(np.diag(r))
    tolerance = diagonal.max() * max(x.shape) * np.finfo(np.float64).eps
    notes: List[str] = []
    if np.all(diagonal > tolerance):
        weights = linalg.solve_triangular(r, q.T @ t)
    else:
        gram = x.T @ x
        jitter = 1e-10 * np.trace(gram) / max(f, 1)
        weights = linalg.solve(gram + jitter * np.eye(f + 1), x.T @ t, assume_a="pos")
        message = f"design matrix is rank deficient; added diagonal jitter {jitter:.3g}"
        notes.append(message)
        warnings.warn(message, RankDeficient, stacklevel=2)
        logger.warning("rank_deficient_design", gene=gene_name, jitter=jitter)

    if not np.all(np.isfinite(weights)):
        raise NonFinite(f"least-squares solution for {gene_name or 'gene'} is not finite")
    weights.setflags(write=False)
    return OlsModel(weights, gene_name, features.feature_names, tuple(notes))


def ols_predict(model: OlsModel, features: FeatureTable) -> np.ndarray:
    """Intercept plus features times slopes, matching columns by name"""
    return model.intercept + features.columns(model.feature_names) @ model.slopes


def ols_predictor(features: FeatureTable):
    """Fold predictor for evaluation.cv.cross_validate"""

    def predict(train: SpotDataset, test: SpotDataset, gene_list: Sequence[str]) -> Dict[str, object]:
        train_features = features.rows_for([s.spot_id for s in train.spots])
        test_features = features.rows_for([s.spot_id for s in test.spots])
        targets = train.expression_matrix()
        outputs: Dict[str, object] = {}
        for gene in gene_list:
            if gene not in train.gene_names:
                outputs[gene] = f"UnknownGene: gene {gene!r} is not in the dataset"
                continue
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", RankDeficient)
                    model = ols_fit(train_features, targets[:, train.gene_index(gene)], gene)
            except (TooFewRows, NonFinite) as e:
                logger.warning("ols_fit_failed", gene=gene, error=type(e).__name__, reason=str(e))
                outputs[gene] = f"{type(e).__name__}: {e}"
                continue
            outputs[gene] = ols_predict(model, test_features)
        return outputs

    return predict
