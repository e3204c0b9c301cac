"""Codec between optimizer vectors and renderable circular patches.

A candidate patch is (x, y, r, colors): an integer center and radius plus an
ordered RGB color list that is cycled over the patch pixels in row-major
order. The infrared appearance is derived from the same colors by grayscale
conversion followed by an affine intensity compression, so a single parameter
vector drives both modalities.

Vector layout: [x, y, R1, G1, B1, ..., Rn, Gn, Bn] when the radius is fixed,
or [x, y, r, R1, G1, B1, ...] when the radius is optimized alongside.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError, FeasibilityError
from .imagecore import (
    ImagePair,
    disk_mask,
    embed_patch,
    feasible_position_bounds,
    to_grayscale,
)

# Default visible-to-infrared intensity compression: inf = beta * gray + gamma.
DEFAULT_BETA = 0.5
DEFAULT_GAMMA = 0.25


@dataclass(frozen=True)
class CompressionParams:
    """Affine map taking patch luma to infrared intensity, clamped to [0, 1]."""

    beta: float = DEFAULT_BETA
    gamma: float = DEFAULT_GAMMA


@dataclass(frozen=True)
class PatchGenome:
    """A decoded patch: integer center (x, y), radius r, and color table."""

    x: int
    y: int
    r: int
    colors: np.ndarray

    def __post_init__(self) -> None:
        colors = np.asarray(self.colors, dtype=np.float64)
        if colors.ndim != 2 or colors.shape[1] != 3 or colors.shape[0] < 1:
            raise DimensionError(f"colors must have shape (n, 3) with n >= 1, got {colors.shape}")
        if not np.all(np.isfinite(colors)) or colors.min() < 0.0 or colors.max() > 1.0:
            raise ValueError("color components must be finite values in [0, 1]")
        if self.r < 1:
            raise FeasibilityError(f"radius must be >= 1, got {self.r}")
        object.__setattr__(self, "colors", colors)

    @property
    def n_colors(self) -> int:
        return self.colors.shape[0]

    def validate_for(self, image_dims: tuple[int, int]) -> None:
        """Raise FeasibilityError unless the patch fits inside the image."""
        width, height = image_dims
        (x_lo, x_hi), (y_lo, y_hi) = feasible_position_bounds(self.r, width, height)
        if not (x_lo <= self.x <= x_hi) or not (y_lo <= self.y <= y_hi):
            raise FeasibilityError(
                f"center ({self.x}, {self.y}) outside feasible region "
                f"x in [{x_lo}, {x_hi}], y in [{y_lo}, {y_hi}]"
            )


@dataclass(frozen=True)
class ParamVector:
    """Raw optimizer values plus the layout marker for the radius slot.

    fixed_radius None means the vector carries r at index 2; otherwise the
    vector has no radius slot and fixed_radius is used when decoding.
    """

    values: np.ndarray
    fixed_radius: int | None = None

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64).ravel()
        head = 2 if self.fixed_radius is not None else 3
        if values.size < head + 3 or (values.size - head) % 3 != 0:
            raise DimensionError(
                f"vector of length {values.size} does not decode to "
                f"[x, y{', r' if head == 3 else ''}, colors * 3]"
            )
        object.__setattr__(self, "values", values)

    @property
    def n_colors(self) -> int:
        head = 2 if self.fixed_radius is not None else 3
        return (self.values.size - head) // 3


def round_half_up(values: np.ndarray | float) -> np.ndarray | float:
    """Round to nearest integer with ties going up (0.5 -> 1, 1.5 -> 2)."""
    return np.floor(np.asarray(values, dtype=np.float64) + 0.5)


def max_radius(image_dims: tuple[int, int]) -> int:
    """Largest radius whose feasible center region is nonempty."""
    width, height = image_dims
    return min(width, height) // 2


def decode(
    vector: ParamVector | np.ndarray,
    image_dims: tuple[int, int],
    fixed_radius: int | None = None,
) -> PatchGenome:
    """Decode raw optimizer values into a feasible PatchGenome.

    Continuous values are rounded half-up to integers for x, y, r; the radius
    is clamped to [1, min(w, h) // 2], the center is clamped into the feasible
    region for that radius, and colors are clamped to [0, 1]. Decoding is
    total: every finite vector yields a renderable genome.
    """
    if isinstance(vector, ParamVector):
        if fixed_radius is None:
            fixed_radius = vector.fixed_radius
        vector = vector.values
    values = np.asarray(vector, dtype=np.float64).ravel()
    if not np.all(np.isfinite(values)):
        raise ValueError("parameter vector must be finite")
    width, height = image_dims
    head = 2 if fixed_radius is not None else 3
    if values.size < head + 3 or (values.size - head) % 3 != 0:
        raise DimensionError(
            f"vector of length {values.size} does not decode to a patch genome"
        )
    if fixed_radius is not None:
        r = int(fixed_radius)
    else:
        r = int(round_half_up(values[2]))
    r = int(np.clip(r, 1, max_radius(image_dims)))
    x = int(round_half_up(values[0]))
    y = int(round_half_up(values[1]))
    x = int(np.clip(x, r, width - r))
    y = int(np.clip(y, r, height - r))
    colors = np.clip(values[head:].reshape(-1, 3), 0.0, 1.0)
    return PatchGenome(x=x, y=y, r=r, colors=colors)


def encode(genome: PatchGenome, optimize_radius: bool = False) -> ParamVector:
    """Encode a genome back into a parameter vector."""
    head = [float(genome.x), float(genome.y)]
    if optimize_radius:
        head.append(float(genome.r))
        fixed = None
    else:
        fixed = genome.r
    values = np.concatenate([np.asarray(head), genome.colors.ravel()])
    return ParamVector(values=values, fixed_radius=fixed)


def vector_bounds(
    image_dims: tuple[int, int],
    n_colors: int,
    radius: int | None = None,
    radius_range: tuple[int, int] | None = None,
) -> np.ndarray:
    """Per-dimension (low, high) search bounds for the patch vector.

    Pass radius for a fixed-radius layout, or radius_range=(lo, hi) to
    optimize the radius. Position bounds use the smallest radius; decode
    re-clamps positions for the actual radius.
    """
    if n_colors < 1:
        raise ConfigError(f"need at least one color, got {n_colors}")
    if (radius is None) == (radius_range is None):
        raise ConfigError("specify exactly one of radius or radius_range")
    width, height = image_dims
    if radius is not None:
        r_lo = r_hi = int(radius)
    else:
        r_lo, r_hi = int(radius_range[0]), int(radius_range[1])
        if r_lo > r_hi:
            raise ConfigError(f"empty radius range [{r_lo}, {r_hi}]")
    if r_lo < 1 or r_hi > max_radius(image_dims):
        raise FeasibilityError(
            f"radius range [{r_lo}, {r_hi}] does not fit a {width}x{height} image"
        )
    (x_lo, x_hi), (y_lo, y_hi) = feasible_position_bounds(r_lo, width, height)
    rows = [(float(x_lo), float(x_hi)), (float(y_lo), float(y_hi))]
    if radius is None:
        rows.append((float(r_lo), float(r_hi)))
    rows.extend([(0.0, 1.0)] * (3 * n_colors))
    return np.asarray(rows, dtype=np.float64)


def _cycled_values(table: np.ndarray, count: int) -> np.ndarray:
    """First `count` entries of the table cycled modulo its length."""
    return table[np.arange(count) % table.shape[0]]


def color_to_infrared(colors: np.ndarray, compression: CompressionParams | None = None) -> np.ndarray:
    """Map RGB colors to infrared intensities: clamp(beta * luma + gamma)."""
    comp = compression or CompressionParams()
    colors = np.asarray(colors, dtype=np.float64)
    luma = to_grayscale(colors.reshape(1, -1, 3))[0]
    return np.clip(comp.beta * luma + comp.gamma, 0.0, 1.0)


def render_visible(genome: PatchGenome, image_dims: tuple[int, int]) -> np.ndarray:
    """Render the visible patch layer: colors cycled over mask pixels.

    Mask pixels are enumerated in row-major order and pixel k receives color
    k mod n. Pixels outside the mask are zero.
    """
    width, height = image_dims
    mask = disk_mask(genome.x, genome.y, genome.r, width, height)
    out = np.zeros((height, width, 3), dtype=np.float64)
    idx = np.flatnonzero(mask.ravel())
    out.reshape(-1, 3)[idx] = _cycled_values(genome.colors, idx.size)
    return out


def render_infrared(
    genome: PatchGenome,
    image_dims: tuple[int, int],
    compression: CompressionParams | None = None,
) -> np.ndarray:
    """Render the infrared patch layer reusing the visible colors.

    Color k is converted to BT.601 luma and compressed affinely, then cycled
    over the mask pixels exactly like the visible layer.
    """
    width, height = image_dims
    mask = disk_mask(genome.x, genome.y, genome.r, width, height)
    out = np.zeros((height, width), dtype=np.float64)
    idx = np.flatnonzero(mask.ravel())
    out.ravel()[idx] = _cycled_values(color_to_infrared(genome.colors, compression), idx.size)
    return out


def apply(
    genome: PatchGenome,
    pair: ImagePair,
    compression: CompressionParams | None = None,
    modality: str = "both",
) -> ImagePair:
    """Embed the patch into an image pair and return the attacked pair.

    modality selects which images carry the patch: "both" (default),
    "visible", or "infrared". The input pair is never modified.
    """
    if modality not in ("both", "visible", "infrared"):
        raise ConfigError(f"unknown modality {modality!r}")
    genome.validate_for(pair.dims)
    mask = disk_mask(genome.x, genome.y, genome.r, pair.width, pair.height)
    visible = pair.visible
    infrared = pair.infrared
    if modality in ("both", "visible"):
        visible = embed_patch(pair.visible, render_visible(genome, pair.dims), mask)
    if modality in ("both", "infrared"):
        infrared = embed_patch(pair.infrared, render_infrared(genome, pair.dims, compression), mask)
    return ImagePair(visible=visible, infrared=infrared)


def genome_to_record(genome: PatchGenome) -> str:
    """Serialize a genome to one whitespace-separated text line.

    Format: x y r n R1 G1 B1 ... Rn Gn Bn with full-precision color floats.
    """
    parts = [str(genome.x), str(genome.y), str(genome.r), str(genome.n_colors)]
    parts.extend(repr(float(v)) for v in genome.colors.ravel())
    return " ".join(parts)


def genome_from_record(line: str) -> PatchGenome:
    """Parse a genome from the line format written by genome_to_record."""
    fields = line.split()
    if len(fields) < 4:
        raise ValueError(f"genome record too short: {line!r}")
    x, y, r, n = (int(fields[i]) for i in range(4))
    values = [float(v) for v in fields[4:]]
    if len(values) != 3 * n:
        raise ValueError(f"genome record announces {n} colors but carries {len(values)} components")
    return PatchGenome(x=x, y=y, r=r, colors=np.asarray(values).reshape(n, 3))
