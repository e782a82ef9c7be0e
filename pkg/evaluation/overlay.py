"""
Spot overlays and correlation plots rendered to SVG with matplotlib
"""
import io
import math
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import matplotlib

matplotlib.use("Agg")

import numpy as np
from matplotlib.cm import ScalarMappable
from matplotlib.collections import PatchCollection
from matplotlib.colors import LinearSegmentedColormap, Normalize, to_hex
from matplotlib.figure import Figure
from matplotlib.patches import Circle
from scipy.spatial import cKDTree

from errors import Empty, LengthMismatch, NonFinite

Color = Tuple[int, int, int]

# Low and high ends of the default diverging ramp
DEFAULT_RAMP: Tuple[Color, Color] = ((49, 54, 149), (165, 0, 38))
# fixed salt keeps clip-path ids, and so the whole file, stable between runs
SVG_HASH_SALT = "stain-learn"


def ramp_colormap(ramp: Tuple[Color, Color] = DEFAULT_RAMP) -> LinearSegmentedColormap:
    low, high = (tuple(c / 255.0 for c in color) for color in ramp)
    return LinearSegmentedColormap.from_list("stain_ramp", [low, high])


def ramp_color(fraction: float, ramp: Tuple[Color, Color] = DEFAULT_RAMP) -> str:
    return to_hex(ramp_colormap(ramp)(min(1.0, max(0.0, fraction))))


def _fractions(values: np.ndarray) -> np.ndarray:
    lo, hi = float(values.min()), float(values.max())
    if hi == lo:
        return np.full(values.shape, 0.5)
    return (values - lo) / (hi - lo)


def spot_radius(xy: np.ndarray) -> float:
    """0.45 of the smallest nearest-neighbour distance; 10 for a lone spot"""
    xy = np.asarray(xy, dtype=np.float64).reshape(-1, 2)
    if xy.shape[0] < 2:
        return 10.0
    distances, _ = cKDTree(xy).query(xy, k=2)
    nearest = distances[:, 1]
    nearest = nearest[nearest > 0]
    return 0.45 * float(nearest.min()) if nearest.size else 10.0


def overlay_figure(
    coordinates: Sequence[Tuple[float, float]],
    values: Sequence[float],
    ramp: Tuple[Color, Color] = DEFAULT_RAMP,
    title: Optional[str] = None,
    radius: Optional[float] = None,
) -> Figure:
    """One filled circle per spot, colored linearly from min to max of `values`"""
    xy = np.asarray(coordinates, dtype=np.float64).reshape(-1, 2)
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        raise Empty("overlay needs at least one spot")
    if xy.shape[0] != values.shape[0]:
        raise LengthMismatch(f"{xy.shape[0]} spots but {values.shape[0]} values")
    if not np.all(np.isfinite(values)) or not np.all(np.isfinite(xy)):
        raise NonFinite("overlay values and coordinates must be finite")

    radius = spot_radius(xy) if radius is None else float(radius)
    cmap = ramp_colormap(ramp)
    lo, hi = float(values.min()), float(values.max())
    norm = Normalize(lo, hi) if hi > lo else Normalize(lo - 0.5, hi + 0.5)

    figure = Figure(figsize=(6.0, 5.0))
    ax = figure.add_subplot()
    spots = PatchCollection(
        [Circle((x, y), radius) for x, y in xy], facecolors=cmap(_fractions(values)), edgecolors="none"
    )
    ax.add_collection(spots)
    margin = radius * 1.5
    ax.set_xlim(xy[:, 0].min() - margin, xy[:, 0].max() + margin)
    # image rows grow downwards
    ax.set_ylim(xy[:, 1].max() + margin, xy[:, 1].min() - margin)
    ax.set_aspect("equal")
    ax.set_axis_off()
    if title:
        ax.set_title(title)
    figure.colorbar(ScalarMappable(norm=norm, cmap=cmap), ax=ax, shrink=0.8)
    return figure


def scatter_figure(
    median_r: Sequence[float],
    combined_p: Sequence[float],
    r_threshold: float = 0.5,
    p_threshold: float = 1e-5,
) -> Figure:
    """Median correlation against -log10 combined p, one dot per gene"""
    r = np.asarray(median_r, dtype=np.float64)
    p = np.asarray(combined_p, dtype=np.float64)
    if r.size == 0:
        raise Empty("scatter needs at least one gene")
    if r.shape != p.shape:
        raise LengthMismatch("one p-value per correlation is required")
    score = -np.log10(np.clip(p, np.finfo(np.float64).tiny, 1.0))
    cutoff = -math.log10(p_threshold)
    colors = [ramp_color(1.0 if s > cutoff else 0.0) for s in score]

    figure = Figure(figsize=(5.0, 5.0))
    ax = figure.add_subplot()
    ax.scatter(r, score, c=colors, s=12)
    ax.axhline(cutoff, color="#888888", linestyle="--", linewidth=1)
    ax.axvline(r_threshold, color="#888888", linestyle="--", linewidth=1)
    ax.set_xlim(-1.0, 1.0)
    ax.set_ylim(0.0, max(float(score.max()), cutoff) * 1.05)
    ax.set_xlabel("median r")
    ax.set_ylabel("-log10 p")
    return figure


def render_svg(figure: Figure) -> str:
    buffer = io.StringIO()
    with matplotlib.rc_context({"svg.hashsalt": SVG_HASH_SALT}):
        figure.savefig(buffer, format="svg", metadata={"Date": None})
    return buffer.getvalue()


def spot_overlay(
    coordinates: Sequence[Tuple[float, float]],
    values: Sequence[float],
    ramp: Tuple[Color, Color] = DEFAULT_RAMP,
    title: Optional[str] = None,
    radius: Optional[float] = None,
) -> str:
    return render_svg(overlay_figure(coordinates, values, ramp, title, radius))


def correlation_scatter(
    median_r: Sequence[float],
    combined_p: Sequence[float],
    r_threshold: float = 0.5,
    p_threshold: float = 1e-5,
) -> str:
    return render_svg(scatter_figure(median_r, combined_p, r_threshold, p_threshold))


def write_svg(path: Union[str, Path], document: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(document)
    return path
