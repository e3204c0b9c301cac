"""Seeded synthetic visible-infrared fixtures with point annotations.

Each fixture is a registered pair showing warm blobs on a textured scene:
the infrared channel carries bright Gaussian bumps on a mid-gray noise
background (one spatial cluster plus scattered singles), the visible channel
shows the same scene as smooth colored texture with warm highlights. Blob
centers double as point annotations. Geometry margins keep every blob an
isolated above-threshold component of the default counting surrogate, so
clean counts equal the annotation count by construction.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import ConfigError, ImageFormatError
from .imagecore import ImagePair, load_pair, save_image


@dataclass(frozen=True)
class FixtureLayout:
    """Scene geometry and intensity ranges for generated fixtures."""

    width: int = 224
    height: int = 176
    n_cluster: int = 4
    n_scatter: int = 9
    cluster_radius: int = 26
    cluster_margin: int = 48
    scatter_margin: int = 16
    min_cluster_sep: int = 18
    min_scatter_sep: int = 36
    background_level: float = 0.47
    background_wobble: float = 0.05
    blob_amp_lo: float = 0.38
    blob_amp_hi: float = 0.48
    blob_sigma_lo: float = 3.0
    blob_sigma_hi: float = 4.2

    def __post_init__(self) -> None:
        if self.width < 2 * self.cluster_margin or self.height < 2 * self.cluster_margin:
            raise ConfigError("image too small for the cluster margin")
        if self.n_cluster < 1 or self.n_scatter < 0:
            raise ConfigError("need at least one cluster blob")


def _smooth_noise(rng: np.random.Generator, height: int, width: int, sigma: float) -> np.ndarray:
    """Zero-mean smooth field normalized to max |value| = 1."""
    field = ndimage.gaussian_filter(rng.standard_normal((height, width)), sigma=sigma)
    peak = np.max(np.abs(field))
    return field / peak if peak > 0 else field


def _place_cluster(rng: np.random.Generator, layout: FixtureLayout) -> tuple[np.ndarray, np.ndarray]:
    cx = int(rng.integers(layout.cluster_margin, layout.width - layout.cluster_margin + 1))
    cy = int(rng.integers(layout.cluster_margin, layout.height - layout.cluster_margin + 1))
    points: list[tuple[int, int]] = []
    guard = 0
    while len(points) < layout.n_cluster:
        guard += 1
        if guard > 10000:
            raise ConfigError("cluster placement failed; loosen the layout")
        angle = rng.uniform(0.0, 2.0 * np.pi)
        rad = layout.cluster_radius * np.sqrt(rng.uniform(0.0, 1.0))
        x = int(round(cx + rad * np.cos(angle)))
        y = int(round(cy + rad * np.sin(angle)))
        if min(x, y) < layout.scatter_margin:
            continue
        if x >= layout.width - layout.scatter_margin or y >= layout.height - layout.scatter_margin:
            continue
        if all((x - px) ** 2 + (y - py) ** 2 >= layout.min_cluster_sep ** 2 for px, py in points):
            points.append((x, y))
    return np.asarray(points, dtype=np.int64), np.asarray([cx, cy], dtype=np.int64)


def _place_scatter(
    rng: np.random.Generator, layout: FixtureLayout, taken: np.ndarray
) -> np.ndarray:
    points = [tuple(p) for p in taken]
    placed: list[tuple[int, int]] = []
    guard = 0
    while len(placed) < layout.n_scatter:
        guard += 1
        if guard > 20000:
            raise ConfigError("scatter placement failed; loosen the layout")
        x = int(rng.integers(layout.scatter_margin, layout.width - layout.scatter_margin))
        y = int(rng.integers(layout.scatter_margin, layout.height - layout.scatter_margin))
        if all(
            (x - px) ** 2 + (y - py) ** 2 >= layout.min_scatter_sep ** 2
            for px, py in points + placed
        ):
            placed.append((x, y))
    return np.asarray(placed, dtype=np.int64)


def _bump_field(
    points: np.ndarray,
    amps: np.ndarray,
    sigmas: np.ndarray,
    height: int,
    width: int,
) -> np.ndarray:
    yy = np.arange(height, dtype=np.float64)[:, None]
    xx = np.arange(width, dtype=np.float64)[None, :]
    field = np.zeros((height, width), dtype=np.float64)
    for (x, y), amp, sigma in zip(points, amps, sigmas):
        d2 = (yy - y) ** 2 + (xx - x) ** 2
        field += amp * np.exp(-d2 / (2.0 * sigma * sigma))
    return field


def make_fixture(
    seed: int, layout: FixtureLayout | None = None
) -> tuple[ImagePair, np.ndarray]:
    """Generate one fixture pair and its (x, y) point annotations."""
    layout = layout or FixtureLayout()
    rng = np.random.default_rng(seed)
    h, w = layout.height, layout.width
    cluster, _ = _place_cluster(rng, layout)
    scatter = _place_scatter(rng, layout, cluster)
    points = np.concatenate([cluster, scatter], axis=0)
    n = points.shape[0]
    amps = rng.uniform(layout.blob_amp_lo, layout.blob_amp_hi, size=n)
    sigmas = rng.uniform(layout.blob_sigma_lo, layout.blob_sigma_hi, size=n)
    bumps = _bump_field(points, amps, sigmas, h, w)

    infrared = layout.background_level + layout.background_wobble * _smooth_noise(rng, h, w, 12.0)
    infrared = np.clip(infrared + bumps, 0.0, 1.0)

    base = 0.42 + 0.12 * np.stack(
        [_smooth_noise(rng, h, w, 16.0) for _ in range(3)], axis=-1
    )
    warm = np.stack([0.65 * bumps, 0.35 * bumps, 0.10 * bumps], axis=-1)
    visible = np.clip(base + warm, 0.0, 1.0)
    return ImagePair(visible=visible, infrared=infrared), points


def render_point_density(points: np.ndarray, dims: tuple[int, int], sigma: float = 4.0) -> np.ndarray:
    """Annotation density: one unit-mass Gaussian per point, image-normalized."""
    width, height = dims
    yy = np.arange(height, dtype=np.float64)[:, None]
    xx = np.arange(width, dtype=np.float64)[None, :]
    density = np.zeros((height, width), dtype=np.float64)
    for x, y in np.asarray(points, dtype=np.float64).reshape(-1, 2):
        kernel = np.exp(-((yy - y) ** 2 + (xx - x) ** 2) / (2.0 * sigma * sigma))
        mass = kernel.sum()
        if mass > 0:
            density += kernel / mass
    return density


def _fixture_stem(index: int) -> str:
    return f"pair{index:03d}"


def write_fixture_dir(
    out_dir: str | Path,
    count: int,
    base_seed: int = 0,
    layout: FixtureLayout | None = None,
) -> list[Path]:
    """Write `count` fixtures (visible/infrared PNGs + points CSV) to a directory."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for i in range(count):
        pair, points = make_fixture(base_seed + i, layout)
        stem = _fixture_stem(i)
        save_image(pair.visible, out / f"{stem}_visible.png")
        save_image(pair.infrared, out / f"{stem}_infrared.png")
        with open(out / f"{stem}_points.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "y"])
            writer.writerows(points.tolist())
        written.append(out / stem)
    return written


def load_points(path: str | Path) -> np.ndarray:
    """Read an (x, y) annotation CSV written by write_fixture_dir."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:2] != ["x", "y"]:
        raise ImageFormatError(f"{path}: expected an annotation CSV with an x,y header")
    return np.asarray([[float(r[0]), float(r[1])] for r in rows[1:]], dtype=np.float64)


def load_fixture_dir(directory: str | Path) -> list[tuple[str, ImagePair, np.ndarray | None]]:
    """Load every pair in a directory, sorted by name.

    Pairs are detected by the *_visible.png suffix; the matching infrared
    image must exist and the points CSV is optional.
    """
    directory = Path(directory)
    items = []
    for vis_path in sorted(directory.glob("*_visible.png")):
        stem = vis_path.name[: -len("_visible.png")]
        inf_path = directory / f"{stem}_infrared.png"
        if not inf_path.exists():
            raise ImageFormatError(f"{vis_path}: missing companion {inf_path.name}")
        pts_path = directory / f"{stem}_points.csv"
        points = load_points(pts_path) if pts_path.exists() else None
        items.append((stem, load_pair(vis_path, inf_path), points))
    if not items:
        raise ImageFormatError(f"{directory}: no *_visible.png pairs found")
    return items
