"""
Gene selection and target transforms
"""
from typing import List, Sequence

import numpy as np
import structlog

from errors import NegativeExpression, ValidationFailure
from models.records import SpotDataset

logger = structlog.get_logger(__name__)


def select_top_genes(dataset: SpotDataset, n: int) -> List[str]:
    """Genes ranked by median expression (descending, ties by name), first n"""
    if n < 1:
        raise ValidationFailure(f"number of genes must be at least 1, got {n}")
    medians = np.median(dataset.expression_matrix(), axis=0)
    ranked = sorted(zip(dataset.gene_names, medians), key=lambda item: (-item[1], item[0]))
    return [name for name, _ in ranked[:n]]


def log_transform(value, pseudo_count: float = 1.0):
    """ln(value + pseudo_count) for scalars or arrays of non-negative values"""
    if pseudo_count <= 0:
        raise ValidationFailure(f"pseudo-count must be positive, got {pseudo_count}")
    array = np.asarray(value, dtype=np.float64)
    if np.any(array < 0):
        raise NegativeExpression(f"expression must be non-negative before the log transform (min {array.min():g})")
    result = np.log(array + pseudo_count)
    return float(result) if result.ndim == 0 else result


def restrict_genes(dataset: SpotDataset, gene_names: Sequence[str]) -> SpotDataset:
    columns = [dataset.gene_index(name) for name in gene_names]
    return dataset.with_expression_matrix(dataset.expression_matrix()[:, columns], gene_names)


def transform_targets(dataset: SpotDataset, pseudo_count: float = 1.0) -> SpotDataset:
    """Log-transform every expression value of the dataset"""
    transformed = log_transform(dataset.expression_matrix(), pseudo_count)
    result = dataset.with_expression_matrix(transformed, dataset.gene_names)
    flagged = result.zero_variance_genes()
    if flagged:
        logger.warning("zero_variance_genes", genes=flagged)
    return result
