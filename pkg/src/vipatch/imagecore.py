"""Image containers, patch embedding, and PNG I/O for visible-infrared pairs.

Images are float64 numpy arrays with intensities in [0, 1]: shape (h, w) for
single-channel data (infrared), (h, w, 3) for RGB (visible). Coordinates are
(x, y) = (column, row) with the origin at the top-left pixel. All operations
here are pure functions; arrays are treated as immutable by convention and
every operation allocates its output.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as _PILImage

from .errors import DimensionError, FeasibilityError, ImageFormatError

# ITU-R BT.601 luma weights, applied in fixed R, G, B order.
GRAY_WEIGHTS = (0.299, 0.587, 0.114)


def validate_image(image: np.ndarray, name: str = "image") -> np.ndarray:
    """Check that an array is a valid intensity image and return it.

    Valid images are float arrays of shape (h, w) or (h, w, 3) with finite
    values in [0, 1] and nonzero extent.
    """
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim not in (2, 3):
        raise DimensionError(f"{name}: expected 2 or 3 dimensions, got shape {arr.shape}")
    if arr.ndim == 3 and arr.shape[2] != 3:
        raise DimensionError(f"{name}: color images need exactly 3 channels, got {arr.shape[2]}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"{name}: empty image with shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name}: intensities must be finite")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError(f"{name}: intensities must lie in [0, 1]")
    return arr


def image_dims(image: np.ndarray) -> tuple[int, int]:
    """Return (width, height) of an image array."""
    return image.shape[1], image.shape[0]


@dataclass(frozen=True)
class ImagePair:
    """A registered pair: visible (h, w, 3) and infrared (h, w) images."""

    visible: np.ndarray
    infrared: np.ndarray

    def __post_init__(self) -> None:
        vis = validate_image(self.visible, "visible")
        inf = validate_image(self.infrared, "infrared")
        if vis.ndim != 3:
            raise DimensionError("visible image must have 3 channels")
        if inf.ndim != 2:
            raise DimensionError("infrared image must be single-channel")
        if vis.shape[:2] != inf.shape:
            raise DimensionError(
                f"visible {vis.shape[:2]} and infrared {inf.shape} dimensions disagree"
            )
        object.__setattr__(self, "visible", vis)
        object.__setattr__(self, "infrared", inf)

    @property
    def width(self) -> int:
        return self.visible.shape[1]

    @property
    def height(self) -> int:
        return self.visible.shape[0]

    @property
    def dims(self) -> tuple[int, int]:
        return self.width, self.height


def to_grayscale(image: np.ndarray) -> np.ndarray:
    """Collapse an RGB image to BT.601 luma; single-channel input passes through."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 2:
        return arr
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise DimensionError(f"expected (h, w) or (h, w, 3), got shape {arr.shape}")
    wr, wg, wb = GRAY_WEIGHTS
    return wr * arr[..., 0] + wg * arr[..., 1] + wb * arr[..., 2]


def feasible_position_bounds(radius: int, width: int, height: int) -> tuple[tuple[int, int], tuple[int, int]]:
    """Inclusive (x, y) bounds keeping a disk of the given radius inside the image."""
    if radius < 1:
        raise FeasibilityError(f"radius must be >= 1, got {radius}")
    if 2 * radius > width or 2 * radius > height:
        raise FeasibilityError(
            f"radius {radius} does not fit a {width}x{height} image"
        )
    return (radius, width - radius), (radius, height - radius)


def disk_mask(x: int, y: int, r: int, width: int, height: int) -> np.ndarray:
    """Boolean (height, width) mask of the closed disk centered at (x, y).

    Pixel (row i, col j) is set iff (i - y)^2 + (j - x)^2 <= r^2. The center
    must satisfy x in [r, width - r] and y in [r, height - r] so the patch
    cannot leave the image.
    """
    (x_lo, x_hi), (y_lo, y_hi) = feasible_position_bounds(r, width, height)
    if not (x_lo <= x <= x_hi):
        raise FeasibilityError(f"x={x} outside feasible range [{x_lo}, {x_hi}]")
    if not (y_lo <= y <= y_hi):
        raise FeasibilityError(f"y={y} outside feasible range [{y_lo}, {y_hi}]")
    yy = np.arange(height, dtype=np.int64)[:, None] - int(y)
    xx = np.arange(width, dtype=np.int64)[None, :] - int(x)
    return yy * yy + xx * xx <= int(r) * int(r)


def embed_patch(base: np.ndarray, patch_content: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Compose base and patch content through a binary mask.

    Output pixel = patch content where the mask is set, base elsewhere; the
    result is a new array and both inputs are left untouched.
    """
    base = np.asarray(base, dtype=np.float64)
    content = np.asarray(patch_content, dtype=np.float64)
    mask = np.asarray(mask)
    if mask.dtype != np.bool_:
        raise DimensionError("mask must be a boolean array")
    if base.shape != content.shape:
        raise DimensionError(
            f"base shape {base.shape} and patch content shape {content.shape} disagree"
        )
    if base.shape[:2] != mask.shape:
        raise DimensionError(
            f"mask shape {mask.shape} does not match image shape {base.shape[:2]}"
        )
    m = mask[..., None] if base.ndim == 3 else mask
    return np.where(m, content, base)


def intensity_to_byte(values: np.ndarray) -> np.ndarray:
    """Quantize [0, 1] intensities to uint8 by round-half-up on v * 255."""
    arr = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(arr)) or (arr.size and (arr.min() < 0.0 or arr.max() > 1.0)):
        raise ValueError("intensities must be finite values in [0, 1]")
    return np.floor(arr * 255.0 + 0.5).astype(np.uint8)


def byte_to_intensity(data: np.ndarray) -> np.ndarray:
    """Map uint8 samples to [0, 1] intensities."""
    return np.asarray(data, dtype=np.float64) / 255.0


def save_image(image: np.ndarray, path: str | Path) -> None:
    """Write an intensity image as an 8-bit grayscale or RGB PNG."""
    data = intensity_to_byte(validate_image(image))
    mode = "L" if data.ndim == 2 else "RGB"
    _PILImage.fromarray(data, mode=mode).save(Path(path), format="PNG")


def load_image(path: str | Path) -> np.ndarray:
    """Load an 8-bit grayscale or RGB PNG as a float array in [0, 1]."""
    path = Path(path)
    with _PILImage.open(path) as img:
        if img.format != "PNG":
            raise ImageFormatError(f"{path}: expected a PNG file, got {img.format}")
        if img.mode == "L":
            data = np.asarray(img, dtype=np.uint8)
        elif img.mode == "RGB":
            data = np.asarray(img, dtype=np.uint8)
        else:
            raise ImageFormatError(
                f"{path}: unsupported PNG mode {img.mode!r}; only 8-bit L and RGB are accepted"
            )
    return byte_to_intensity(data)


def load_pair(visible_path: str | Path, infrared_path: str | Path) -> ImagePair:
    """Load a registered visible/infrared pair from two PNG files.

    A 3-channel infrared file whose channels are identical is collapsed to a
    single channel with a warning; a genuinely colored file is rejected.
    """
    vis = load_image(visible_path)
    if vis.ndim != 3:
        raise ImageFormatError(f"{visible_path}: visible image must be RGB")
    inf = load_image(infrared_path)
    if inf.ndim == 3:
        if np.array_equal(inf[..., 0], inf[..., 1]) and np.array_equal(inf[..., 0], inf[..., 2]):
            warnings.warn(
                f"{infrared_path}: collapsing 3-channel grayscale infrared image to one channel",
                stacklevel=2,
            )
            inf = inf[..., 0]
        else:
            raise ImageFormatError(f"{infrared_path}: infrared image must be single-channel")
    return ImagePair(visible=vis, infrared=inf)
