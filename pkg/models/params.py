"""
Learnable parameter containers for the stain model
"""
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from errors import NonFinite, ShapeMismatch, SingularRow

# Smallest raw row norm that can still be normalized
MIN_ROW_NORM = 1e-9

# Flat layout shared by parameters, gradients and optimizer moments:
# 9 raw matrix entries (row major), 3 stain biases, head weight, head bias
N_RAW = 14
SLICE_MATRIX = slice(0, 9)
SLICE_BIAS = slice(9, 12)
INDEX_WEIGHT = 12
INDEX_OFFSET = 13


def _frozen(values, shape: Tuple[int, ...], name: str) -> np.ndarray:
    array = np.array(values, dtype=np.float64)
    if array.shape != shape:
        raise ShapeMismatch(f"{name} must have shape {shape}, got {array.shape}")
    if not np.all(np.isfinite(array)):
        raise NonFinite(f"{name} contains non-finite entries")
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class StainMatrix:
    """Raw 3x3 deconvolution matrix D; `normalized` gives its row-normalized form"""

    raw: np.ndarray

    def __post_init__(self):
        raw = _frozen(self.raw, (3, 3), "stain matrix")
        norms = np.linalg.norm(raw, axis=1)
        if np.any(norms < MIN_ROW_NORM):
            row = int(np.argmin(norms))
            raise SingularRow(f"row {row} of the stain matrix has norm {norms[row]:.3g}")
        object.__setattr__(self, "raw", raw)

    @property
    def normalized(self) -> np.ndarray:
        from stain.core import row_normalize

        return row_normalize(self.raw)


@dataclass(frozen=True)
class NslParams:
    """Per-gene parameters: stain matrix, stain-wise biases c, head weight w and bias b"""

    stain: StainMatrix
    c: np.ndarray
    w: float
    b: float

    def __post_init__(self):
        object.__setattr__(self, "c", _frozen(self.c, (3,), "stain bias"))
        for name in ("w", "b"):
            value = float(getattr(self, name))
            if not np.isfinite(value):
                raise NonFinite(f"head parameter {name} is not finite")
            object.__setattr__(self, name, value)

    @classmethod
    def create(cls, raw, c=(0.0, 0.0, 0.0), w: float = 1.0, b: float = 0.0) -> "NslParams":
        return cls(StainMatrix(raw), np.asarray(c, dtype=np.float64), w, b)

    @classmethod
    def from_vector(cls, vector) -> "NslParams":
        vector = np.asarray(vector, dtype=np.float64)
        if vector.shape != (N_RAW,):
            raise ShapeMismatch(f"parameter vector must have {N_RAW} entries, got {vector.shape}")
        return cls.create(
            vector[SLICE_MATRIX].reshape(3, 3),
            vector[SLICE_BIAS],
            vector[INDEX_WEIGHT],
            vector[INDEX_OFFSET],
        )

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.stain.raw.ravel(), self.c, [self.w, self.b]])

    def with_normalized_stain(self) -> "NslParams":
        return NslParams(StainMatrix(self.stain.normalized), self.c, self.w, self.b)


@dataclass(frozen=True)
class Gradients:
    """Derivatives of the loss, shaped like NslParams"""

    d_raw: np.ndarray
    d_c: np.ndarray
    d_w: float
    d_b: float

    def __post_init__(self):
        object.__setattr__(self, "d_raw", _frozen(self.d_raw, (3, 3), "d_raw"))
        object.__setattr__(self, "d_c", _frozen(self.d_c, (3,), "d_c"))
        for name in ("d_w", "d_b"):
            value = float(getattr(self, name))
            if not np.isfinite(value):
                raise NonFinite(f"gradient {name} is not finite")
            object.__setattr__(self, name, value)

    @classmethod
    def zeros(cls) -> "Gradients":
        return cls(np.zeros((3, 3)), np.zeros(3), 0.0, 0.0)

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.d_raw.ravel(), self.d_c, [self.d_w, self.d_b]])
