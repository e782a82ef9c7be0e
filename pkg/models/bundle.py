"""
Model bundle documents: one JSON file per training run
"""
import json
from pathlib import Path
from typing import Any, Dict, List, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, ValidationError, field_validator

from errors import DataError, ValidationFailure
from models.configs import TrainConfig
from models.params import N_RAW, NslParams

BUNDLE_FORMAT = "nsl-bundle/1"


def format_exact(value: float) -> str:
    """17 significant digits: enough to round-trip any double"""
    return format(float(value), ".17g")


class CanonicalParams(BaseModel):
    """Learnable scalars in canonical form: unit-norm stain rows, biases, head"""

    stain_matrix: List[List[float]]
    stain_bias: List[float]
    stain_bias_trainable: bool = True
    weight: float
    bias: float

    def census(self) -> Dict[str, int]:
        """Independent learnable scalars per parameter group"""
        rows = np.asarray(self.stain_matrix, dtype=np.float64)
        if rows.shape != (3, 3) or not np.allclose(np.linalg.norm(rows, axis=1), 1.0, atol=1e-12):
            raise ValidationFailure("canonical stain matrix must have three unit-norm rows")
        # each unit row in R^3 has two free coordinates
        return {
            "stain_matrix": rows.size - rows.shape[0],
            "stain_bias": len(self.stain_bias) if self.stain_bias_trainable else 0,
            "weight": 1,
            "bias": 1,
        }


class GeneRecord(BaseModel):
    gene_name: str
    raw: List[str] = Field(description="D (row major), c, w, b with 17 significant digits")
    canonical: CanonicalParams
    learnable_scalars: int
    loss_trace: List[float]
    config_digest: str

    @field_validator("raw")
    @classmethod
    def _fourteen_values(cls, value: List[str]) -> List[str]:
        if len(value) != N_RAW:
            raise ValueError(f"raw must hold {N_RAW} values, got {len(value)}")
        return value

    def to_params(self) -> NslParams:
        return NslParams.from_vector([float(v) for v in self.raw])


class FailureRecord(BaseModel):
    gene_name: str
    error_type: str
    reason: str


class BundleDocument(BaseModel):
    format_version: str = BUNDLE_FORMAT
    config: TrainConfig
    genes: List[GeneRecord]
    failures: List[FailureRecord] = []

    @field_validator("format_version")
    @classmethod
    def _known_format(cls, value: str) -> str:
        if value != BUNDLE_FORMAT:
            raise ValueError(f"unsupported bundle format {value!r}")
        return value

    def params_by_gene(self) -> Dict[str, NslParams]:
        return {record.gene_name: record.to_params() for record in self.genes}

    def dumps(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, indent=2) + "\n"

    def write(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.dumps())
        return path

    @classmethod
    def read(cls, path: Union[str, Path]) -> "BundleDocument":
        try:
            return cls.model_validate_json(Path(path).read_text())
        except FileNotFoundError:
            raise DataError(f"model bundle not found: {path}") from None
        except ValidationError as e:
            raise DataError(f"{path}: invalid model bundle: {e}") from e


def gene_record(gene_name: str, params: NslParams, loss_trace, config: TrainConfig, config_digest: str) -> GeneRecord:
    canonical = CanonicalParams(
        stain_matrix=params.stain.normalized.tolist(),
        stain_bias=params.c.tolist(),
        stain_bias_trainable=config.use_stain_bias,
        weight=params.w,
        bias=params.b,
    )
    return GeneRecord(
        gene_name=gene_name,
        raw=[format_exact(v) for v in params.to_vector()],
        canonical=canonical,
        learnable_scalars=sum(canonical.census().values()),
        loss_trace=[float(v) for v in loss_trace],
        config_digest=config_digest,
    )


def bundle_from_result(result: Any) -> BundleDocument:
    """Build the document for a stain.trainer.TrainingResult"""
    genes = [
        gene_record(m.gene_name, m.params, m.loss_trace, result.config, m.config_digest) for m in result.models
    ]
    failures = [FailureRecord(gene_name=f.gene_name, error_type=f.error_type, reason=f.reason) for f in result.failures]
    return BundleDocument(config=result.config, genes=genes, failures=failures)


def census_of(record: GeneRecord) -> Tuple[int, Dict[str, int]]:
    groups = record.canonical.census()
    return sum(groups.values()), groups
