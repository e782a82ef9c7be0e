"""
Patch extraction from raster images
"""
import math
from dataclasses import replace
from pathlib import Path
from typing import Dict, Mapping, Optional, Tuple, Union

import numpy as np
import structlog
from PIL import Image, UnidentifiedImageError

from errors import DataError, DecodeError, ValidationFailure
from models.records import Patch, SpotDataset

logger = structlog.get_logger(__name__)

ImageSource = Union[str, Path, np.ndarray]


def decode_image(source: ImageSource) -> np.ndarray:
    """Decode an image file (or pass through an array) as (height, width, 3) RGB"""
    if isinstance(source, np.ndarray):
        image = source
    else:
        try:
            with Image.open(source) as handle:
                image = np.asarray(handle.convert("RGB"))
        except FileNotFoundError:
            raise DecodeError(f"image not found: {source}") from None
        except (UnidentifiedImageError, OSError, ValueError) as e:
            raise DecodeError(f"cannot decode {source}: {e}") from e
    if image.ndim != 3 or image.shape[2] != 3:
        raise DecodeError(f"expected an RGB image, got array of shape {image.shape}")
    return image


def extract_patch(image: ImageSource, center_xy: Tuple[float, float], side: int) -> Patch:
    """Crop a side x side patch centred on (x, y); outside pixels are white"""
    if side < 1:
        raise ValidationFailure(f"patch side must be at least 1, got {side}")
    image = decode_image(image)
    height, width = image.shape[:2]
    x0 = int(math.floor(center_xy[0] - side / 2.0 + 0.5))
    y0 = int(math.floor(center_xy[1] - side / 2.0 + 0.5))

    white = 255 if image.dtype == np.uint8 else 1.0
    patch = np.full((side, side, 3), white, dtype=image.dtype)

    xs, xe = max(x0, 0), min(x0 + side, width)
    ys, ye = max(y0, 0), min(y0 + side, height)
    inside = 0
    if xs < xe and ys < ye:
        patch[ys - y0 : ye - y0, xs - x0 : xe - x0] = image[ys:ye, xs:xe]
        inside = (xe - xs) * (ye - ys)

    return Patch(patch, padded_fraction=1.0 - inside / float(side * side))


def load_patch_file(path: Path) -> Patch:
    """A pre-cropped patch stored as its own image file"""
    return Patch(decode_image(path))


def attach_patches(
    dataset: SpotDataset,
    side: int,
    slide_images: Optional[Mapping[str, ImageSource]] = None,
    max_padding: float = 1.0,
) -> SpotDataset:
    """Load every spot's patch: its own file if given, else a crop of its slide raster.

    Spots whose padded fraction exceeds `max_padding` are dropped.
    """
    slide_images = dict(slide_images or {})
    decoded: Dict[str, np.ndarray] = {}
    spots = []
    skipped = 0
    for spot in dataset.spots:
        if spot.patch_path is not None:
            patch = load_patch_file(spot.patch_path)
        else:
            if spot.slide_id not in slide_images:
                raise DataError(f"spot {spot.spot_id}: no patch file and no raster for slide {spot.slide_id!r}")
            if spot.slide_id not in decoded:
                decoded[spot.slide_id] = decode_image(slide_images[spot.slide_id])
            patch = extract_patch(decoded[spot.slide_id], spot.center_xy, side)
        if patch.padded_fraction > max_padding:
            skipped += 1
            continue
        spots.append(replace(spot, patch=patch))

    if skipped:
        logger.warning("padded_patches_skipped", skipped=skipped, max_padding=max_padding)
    if not spots:
        raise DataError("every spot was filtered out by the padding limit")
    return dataset.with_spots(spots)


def write_png(path: Union[str, Path], pixels: np.ndarray) -> Path:
    """Write an 8-bit RGB (or grayscale) image"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    array = np.asarray(pixels)
    if array.dtype != np.uint8:
        array = np.clip(np.rint(array * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(array).save(path, format="PNG")
    return path
