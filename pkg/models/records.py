"""
Spot, patch and dataset records
"""
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from errors import DuplicateSpotId, EmptyDataset, InvalidEpsilon, ShapeMismatch, ValidationFailure


def check_epsilon(epsilon: float) -> float:
    epsilon = float(epsilon)
    if not 0.0 < epsilon < 1.0:
        raise InvalidEpsilon(f"epsilon must lie in (0, 1), got {epsilon}")
    return epsilon


@dataclass(frozen=True, eq=False)
class Patch:
    """An RGB image patch.

    `pixels` is a (height, width, 3) array, either uint8 or floating point in
    [0, 1]. Channels are clamped to [epsilon, 1] when the model reads them.
    """

    pixels: np.ndarray
    padded_fraction: float = 0.0

    def __post_init__(self):
        pixels = np.asarray(self.pixels)
        if pixels.ndim != 3 or pixels.shape[2] != 3:
            raise ShapeMismatch(f"patch pixels must be (height, width, 3), got {pixels.shape}")
        if pixels.shape[0] < 1 or pixels.shape[1] < 1:
            raise ValidationFailure("patch must contain at least one pixel")
        if pixels.dtype != np.uint8:
            pixels = pixels.astype(np.float64, copy=True)
            if not np.all(np.isfinite(pixels)) or pixels.min() < 0.0 or pixels.max() > 1.0:
                raise ValidationFailure("floating point patch channels must lie in [0, 1]")
        else:
            pixels = pixels.copy()
        pixels.setflags(write=False)
        object.__setattr__(self, "pixels", pixels)

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def n_pixels(self) -> int:
        return self.width * self.height

    def unit_pixels(self) -> np.ndarray:
        """Pixels as a (K, 3) float array in [0, 1]"""
        flat = self.pixels.reshape(-1, 3)
        if flat.dtype == np.uint8:
            return flat.astype(np.float64) / 255.0
        return flat.astype(np.float64)

    def clamped(self, epsilon: float) -> np.ndarray:
        """Pixels as a (K, 3) float array in [epsilon, 1]"""
        return np.clip(self.unit_pixels(), check_epsilon(epsilon), 1.0)


@dataclass(frozen=True, eq=False)
class ColorHistogram:
    """Unique clamped colors of a patch with their pixel counts"""

    colors: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        colors = np.asarray(self.colors, dtype=np.float64).reshape(-1, 3)
        counts = np.asarray(self.counts, dtype=np.int64).ravel()
        if colors.shape[0] != counts.shape[0] or colors.shape[0] == 0:
            raise ShapeMismatch("histogram needs one positive count per color")
        if np.any(counts < 1):
            raise ValidationFailure("histogram counts must be positive")
        colors.setflags(write=False)
        counts.setflags(write=False)
        object.__setattr__(self, "colors", colors)
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @classmethod
    def from_patch(cls, patch: Patch, epsilon: float) -> "ColorHistogram":
        epsilon = check_epsilon(epsilon)
        if patch.pixels.dtype == np.uint8:
            # 24-bit keys are much cheaper to unique than float rows
            flat = patch.pixels.reshape(-1, 3).astype(np.int64)
            keys = (flat[:, 0] << 16) | (flat[:, 1] << 8) | flat[:, 2]
            unique_keys, counts = np.unique(keys, return_counts=True)
            rgb = np.stack([(unique_keys >> 16) & 255, (unique_keys >> 8) & 255, unique_keys & 255], axis=1)
            colors = np.clip(rgb.astype(np.float64) / 255.0, epsilon, 1.0)
            # distinct 8-bit values can collapse onto epsilon after clamping
            colors, inverse = np.unique(colors, axis=0, return_inverse=True)
            counts = np.bincount(inverse.ravel(), weights=counts).astype(np.int64)
            return cls(colors, counts)
        colors, counts = np.unique(patch.clamped(epsilon), axis=0, return_counts=True)
        return cls(colors, counts)


@dataclass(frozen=True, eq=False)
class SpotRecord:
    """One spatial transcriptomics spot"""

    patient_id: str
    slide_id: str
    spot_id: str
    center_xy: Tuple[float, float]
    patch: Optional[Patch] = None
    patch_path: Optional[Path] = None
    expression: Optional[np.ndarray] = None

    def __post_init__(self):
        x, y = (float(v) for v in self.center_xy)
        if x < 0 or y < 0:
            raise ValidationFailure(f"spot {self.spot_id} has negative coordinates ({x}, {y})")
        object.__setattr__(self, "center_xy", (x, y))
        if self.expression is not None:
            expression = np.array(self.expression, dtype=np.float64).ravel()
            expression.setflags(write=False)
            object.__setattr__(self, "expression", expression)


@dataclass(frozen=True, eq=False)
class SpotDataset:
    """Spots with a shared gene axis"""

    spots: Tuple[SpotRecord, ...]
    gene_names: Tuple[str, ...] = ()
    dropped_spots: int = 0
    _index: Dict[str, int] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        spots = tuple(self.spots)
        if not spots:
            raise EmptyDataset("dataset contains no spots")
        object.__setattr__(self, "spots", spots)
        object.__setattr__(self, "gene_names", tuple(self.gene_names))

        if len(set(self.gene_names)) != len(self.gene_names):
            raise ValidationFailure("gene names must be unique")

        seen = set()
        for spot in spots:
            if spot.spot_id in seen:
                raise DuplicateSpotId(f"duplicate spot_id {spot.spot_id!r}")
            seen.add(spot.spot_id)
            if spot.expression is not None and spot.expression.shape[0] != len(self.gene_names):
                raise ShapeMismatch(
                    f"spot {spot.spot_id} has {spot.expression.shape[0]} values for {len(self.gene_names)} genes"
                )
        object.__setattr__(self, "_index", {name: i for i, name in enumerate(self.gene_names)})

    def __len__(self) -> int:
        return len(self.spots)

    @property
    def patients(self) -> Tuple[str, ...]:
        """Distinct patient ids in first-seen order"""
        return tuple(dict.fromkeys(spot.patient_id for spot in self.spots))

    @property
    def slides(self) -> Tuple[str, ...]:
        return tuple(dict.fromkeys(spot.slide_id for spot in self.spots))

    @property
    def has_expression(self) -> bool:
        return all(spot.expression is not None for spot in self.spots)

    def gene_index(self, gene_name: str) -> int:
        try:
            return self._index[gene_name]
        except KeyError:
            raise KeyError(f"unknown gene {gene_name!r}") from None

    def expression_matrix(self) -> np.ndarray:
        """N x G matrix of targets"""
        if not self.has_expression:
            raise ValidationFailure("dataset has no expression attached")
        if not self.gene_names:
            return np.zeros((len(self.spots), 0))
        return np.stack([spot.expression for spot in self.spots])

    def patches(self) -> List[Patch]:
        missing = [spot.spot_id for spot in self.spots if spot.patch is None]
        if missing:
            raise ValidationFailure(f"{len(missing)} spots have no patch loaded (first: {missing[0]})")
        return [spot.patch for spot in self.spots]

    def subset(self, indices: Sequence[int]) -> "SpotDataset":
        return SpotDataset(tuple(self.spots[i] for i in indices), self.gene_names)

    def with_spots(self, spots: Sequence[SpotRecord], gene_names: Optional[Sequence[str]] = None) -> "SpotDataset":
        return SpotDataset(tuple(spots), self.gene_names if gene_names is None else tuple(gene_names), self.dropped_spots)

    def with_expression_matrix(self, matrix: np.ndarray, gene_names: Sequence[str]) -> "SpotDataset":
        matrix = np.asarray(matrix, dtype=np.float64)
        spots = [replace(spot, expression=row) for spot, row in zip(self.spots, matrix)]
        return SpotDataset(tuple(spots), tuple(gene_names), self.dropped_spots)

    def zero_variance_genes(self) -> List[str]:
        """Genes whose targets are constant across spots (Pearson undefined)"""
        matrix = self.expression_matrix()
        return [name for name, column in zip(self.gene_names, matrix.T) if np.ptp(column) == 0.0]
