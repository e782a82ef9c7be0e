"""
Run configuration models
"""
import hashlib
import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from errors import ValidationFailure
from models.params import NslParams

# Hematoxylin, eosin and residual optical-density signatures as columns
# (rows are R, G, B)
STAIN_SIGNATURES: Tuple[Tuple[float, float, float], ...] = (
    (0.65, 0.07, 0.27),
    (0.70, 0.99, 0.57),
    (0.29, 0.11, 0.78),
)


def mixing_matrix(scale: float = 0.45) -> Tuple[Tuple[float, float, float], ...]:
    """Stain signatures scaled so unit concentrations stay inside the unit OD range"""
    return tuple(tuple(scale * v for v in row) for row in STAIN_SIGNATURES)


DEFAULT_MIXING = mixing_matrix()


class TrainConfig(BaseModel):
    """Hyperparameters of one training run"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    learning_rate: float = Field(0.001, gt=0)
    batch_size: int = Field(128, ge=1)
    epochs: int = Field(250, ge=1)
    beta1: float = Field(0.9, gt=0, lt=1)
    beta2: float = Field(0.999, gt=0, lt=1)
    adam_eps: float = Field(1e-8, gt=0)
    epsilon: float = Field(1e-6, gt=0, lt=1)
    seed: int = Field(0, ge=0, lt=2**64)
    init_range: float = Field(0.1, ge=0)
    use_stain_bias: bool = True

    def digest(self) -> str:
        payload = json.dumps(self.model_dump(mode="json"), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()

    @classmethod
    def from_yaml(cls, path: Union[str, Path], **overrides: Any) -> "TrainConfig":
        """Read a YAML run file; non-None overrides win over the file"""
        with open(path, "r") as handle:
            loaded = yaml.safe_load(handle) or {}
        if not isinstance(loaded, dict):
            raise ValidationFailure(f"{path}: expected a mapping of training options")
        section = loaded.get("training", loaded)
        values: Dict[str, Any] = dict(section)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


class SynthConfig(BaseModel):
    """Generator settings for synthetic datasets with a known stain model"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    true_params: Tuple[Any, ...]
    gene_names: Optional[Tuple[str, ...]] = None
    mixing: Tuple[Tuple[float, float, float], ...] = DEFAULT_MIXING
    patients: int = Field(6, ge=1)
    spots_per_patient: int = Field(200, ge=1)
    patch_side: int = Field(32, ge=1)
    noise_sigma: float = Field(0.05, ge=0)
    jitter: float = Field(0.02, ge=0)
    epsilon: float = Field(1e-6, gt=0, lt=1)
    seed: int = Field(0, ge=0)
    quantize: bool = False

    @field_validator("true_params")
    @classmethod
    def _some_genes(cls, value: Tuple[Any, ...]) -> Tuple[NslParams, ...]:
        if len(value) < 1:
            raise ValueError("at least one synthetic gene is required")
        if not all(isinstance(p, NslParams) for p in value):
            raise ValueError("true_params must be NslParams instances")
        return value

    @field_validator("mixing")
    @classmethod
    def _square_mixing(cls, value):
        array = np.asarray(value, dtype=np.float64)
        if array.shape != (3, 3) or not np.all(np.isfinite(array)):
            raise ValueError("mixing must be a finite 3x3 matrix")
        return value

    @model_validator(mode="after")
    def _names_match(self) -> "SynthConfig":
        if self.gene_names is not None and len(self.gene_names) != len(self.true_params):
            raise ValueError("gene_names must name every synthetic gene")
        return self

    def resolved_gene_names(self) -> List[str]:
        if self.gene_names is not None:
            return list(self.gene_names)
        return [f"SYN{i + 1}" for i in range(len(self.true_params))]
