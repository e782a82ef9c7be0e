"""
Neural stain deconvolution: optical density, learnable row-normalized stain
matrix, bipolar sigmoid activation, mean aggregation and a scalar head.

All arithmetic is float64. Reductions run in numpy's own loops (einsum, sum)
rather than BLAS so results do not depend on the number of BLAS threads.
"""
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
import structlog

from errors import EmptyBatch, LengthMismatch, SingularRow
from models.params import MIN_ROW_NORM, Gradients, NslParams
from models.records import ColorHistogram, Patch, check_epsilon

logger = structlog.get_logger(__name__)


def row_normalize(raw) -> np.ndarray:
    """Divide every row of a 3x3 matrix by its L2 norm"""
    raw = np.asarray(raw, dtype=np.float64)
    norms = np.sqrt(np.einsum("ij,ij->i", raw, raw))
    if np.any(norms < MIN_ROW_NORM):
        row = int(np.argmin(norms))
        raise SingularRow(f"row {row} has norm {norms[row]:.3g}, below {MIN_ROW_NORM:g}")
    return raw / norms[:, None]


def optical_density(pixels, epsilon: float) -> np.ndarray:
    """Normalized optical density ln(max(x, eps)) / ln(eps), in [0, 1].

    Accepts a single RGB triple or any array whose last axis is RGB.
    """
    epsilon = check_epsilon(epsilon)
    pixels = np.asarray(pixels, dtype=np.float64)
    return np.log(np.clip(pixels, epsilon, 1.0)) / np.log(epsilon)


def bipolar_sigmoid(z):
    """(1 - exp(-z)) / (1 + exp(-z)), evaluated as tanh(z / 2)"""
    return np.tanh(np.asarray(z, dtype=np.float64) * 0.5)


def bipolar_sigmoid_grad(psi):
    """Derivative of the bipolar sigmoid written in terms of its output"""
    psi = np.asarray(psi, dtype=np.float64)
    return 0.5 * (1.0 - psi * psi)


def deconvolve(patch: Patch, params: NslParams, epsilon: float) -> np.ndarray:
    """Per-pixel stain intensities Z = D_hat u, shaped (height, width, 3)"""
    u = optical_density(patch.clamped(epsilon), epsilon)
    z = np.einsum("kl,jl->kj", u, params.stain.normalized)
    return z.reshape(patch.height, patch.width, 3)


def activation_map(patch: Patch, params: NslParams, epsilon: float) -> np.ndarray:
    """Activated stain channels psi(Z + c), shaped (height, width, 3)"""
    return bipolar_sigmoid(deconvolve(patch, params, epsilon) + params.c)


def forward(patch: Patch, params: NslParams, epsilon: float) -> float:
    """Predicted expression for one patch"""
    u = optical_density(patch.clamped(epsilon), epsilon)
    psi = bipolar_sigmoid(np.einsum("kl,jl->kj", u, params.stain.normalized) + params.c)
    aggregate = psi.sum(axis=1).mean()
    return float(params.w * aggregate + params.b)


def forward_histogram(hist: ColorHistogram, params: NslParams, epsilon: float) -> float:
    """Same value as `forward` computed once per distinct color"""
    u = optical_density(hist.colors, epsilon)
    psi = bipolar_sigmoid(np.einsum("kl,jl->kj", u, params.stain.normalized) + params.c)
    aggregate = float(np.dot(hist.counts.astype(np.float64), psi.sum(axis=1))) / hist.total
    return float(params.w * aggregate + params.b)


def _stain_activation(u: np.ndarray, d_hat: np.ndarray, c: np.ndarray) -> np.ndarray:
    """psi(D_hat u + c) for channel-major densities shaped (..., 3, colors)"""
    z = u[..., 0:1, :] * d_hat[:, 0:1]
    z += u[..., 1:2, :] * d_hat[:, 1:2]
    z += u[..., 2:3, :] * d_hat[:, 2:3]
    z += c[:, None]
    z *= 0.5
    return np.tanh(z, out=z)


@dataclass(frozen=True, eq=False)
class PixelBank:
    """Color histograms of many spots, stored as padded per-spot blocks.

    Spot i owns `density[i, :, :lengths[i]]` (optical density, one row per
    channel) and `weight[i, :lengths[i]]` (each color's share of the spot's
    pixels). Padding has zero weight, so it never reaches a prediction or a
    gradient.
    """

    density: np.ndarray
    weight: np.ndarray
    lengths: np.ndarray
    epsilon: float

    @classmethod
    def from_histograms(cls, histograms: Sequence[ColorHistogram], epsilon: float) -> "PixelBank":
        epsilon = check_epsilon(epsilon)
        if not histograms:
            raise EmptyBatch("pixel bank needs at least one patch")
        lengths = np.array([h.colors.shape[0] for h in histograms], dtype=np.int64)
        width = int(lengths.max())
        density = np.zeros((len(histograms), 3, width))
        weight = np.zeros((len(histograms), width))
        for i, hist in enumerate(histograms):
            k = lengths[i]
            density[i, :, :k] = optical_density(hist.colors, epsilon).T
            weight[i, :k] = hist.counts / float(hist.total)
        for array in (density, weight, lengths):
            array.setflags(write=False)
        return cls(density, weight, lengths, epsilon)

    @classmethod
    def from_patches(cls, patches: Sequence[Patch], epsilon: float) -> "PixelBank":
        return cls.from_histograms([ColorHistogram.from_patch(p, epsilon) for p in patches], epsilon)

    def __len__(self) -> int:
        return int(self.lengths.shape[0])

    @property
    def n_colors(self) -> int:
        return int(self.lengths.sum())

    def blocks(self, spots: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Density and weight blocks of the given spots, cut to the widest of them"""
        width = int(self.lengths[spots].max())
        return self.density[spots, :, :width], self.weight[spots, :width]

    def aggregate(self, params: NslParams, spots=None) -> np.ndarray:
        """Pixel-mean of the channel-summed activations for each requested spot"""
        spots = np.arange(len(self), dtype=np.int64) if spots is None else np.asarray(spots, dtype=np.int64)
        if spots.shape[0] == 0:
            return np.zeros(0)
        u, weight = self.blocks(spots)
        psi = _stain_activation(u, params.stain.normalized, params.c)
        return (weight * psi.sum(axis=1)).sum(axis=1)

    def predict(self, params: NslParams, spots=None) -> np.ndarray:
        return params.w * self.aggregate(params, spots) + params.b

    def loss_and_gradients(self, params: NslParams, spots, targets) -> Tuple[float, Gradients]:
        """Mean squared error over the requested spots and its exact gradient"""
        spots = np.asarray(spots, dtype=np.int64)
        targets = np.asarray(targets, dtype=np.float64)
        if spots.shape[0] == 0:
            raise EmptyBatch("batch is empty")
        if targets.shape != spots.shape:
            raise LengthMismatch(f"{spots.shape[0]} spots but {targets.shape[0]} targets")
        u, weight = self.blocks(spots)
        return _loss_and_gradients(params, u, weight, targets)


def _loss_and_gradients(params: NslParams, u, weight, targets) -> Tuple[float, Gradients]:
    n = targets.shape[0]
    raw = params.stain.raw
    norms = np.sqrt(np.einsum("ij,ij->i", raw, raw))
    d_hat = raw / norms[:, None]

    psi = _stain_activation(u, d_hat, params.c)
    aggregate = (weight * psi.sum(axis=1)).sum(axis=1)
    residual = params.w * aggregate + params.b - targets
    loss = float(np.dot(residual, residual) / n)

    # dL/dy_i, then back through the head, the mean and the activation
    d_y = 2.0 * residual / n
    d_w = float(np.dot(d_y, aggregate))
    d_b = float(d_y.sum())
    d_z = psi * psi
    np.subtract(1.0, d_z, out=d_z)
    d_z *= (0.5 * params.w * d_y)[:, None, None] * weight[:, None, :]
    d_c = d_z.sum(axis=(0, 2))
    d_hat_grad = np.einsum("bjk,blk->jl", d_z, u)

    # row normalization: d d_hat / d d = (I - d_hat d_hat^T) / ||d||
    radial = np.einsum("jl,jl->j", d_hat_grad, d_hat)
    d_raw = (d_hat_grad - radial[:, None] * d_hat) / norms[:, None]

    return loss, Gradients(d_raw, d_c, d_w, d_b)


def gradients(batch: Sequence[Tuple[Patch, float]], params: NslParams, epsilon: float) -> Tuple[float, Gradients]:
    """Loss and exact gradients of the mean squared error over (patch, target) pairs"""
    if not batch:
        raise EmptyBatch("batch is empty")
    patches: List[Patch] = [patch for patch, _ in batch]
    targets = np.array([target for _, target in batch], dtype=np.float64)
    bank = PixelBank.from_patches(patches, epsilon)
    return bank.loss_and_gradients(params, np.arange(len(batch)), targets)
