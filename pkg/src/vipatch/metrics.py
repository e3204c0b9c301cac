"""Attack-effectiveness and stealthiness metrics.

Counting metrics (grid count error, RMSE), segmentation metrics (mIoU,
recall), image-quality metrics (PSNR, SSIM), fusion-quality metrics (Qabf,
VIFF, CC) and the fusion intensity/gradient losses. The kernels are written
directly against their definitions so behaviour stays pinned; the test suite
checks them against independent brute-force oracles.

Conventions: intensity images live in [0, 1]; mIoU and recall are returned in
[0, 1] and scaled to percentages only in CSV reports; PSNR uses peak 1.0 and
is capped at 99 dB so identical images stay finite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields as _dc_fields

import numpy as np

from .errors import DimensionError
from .imagecore import to_grayscale

PSNR_CAP = 99.0
SSIM_WINDOW = 8
SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2

# Edge-preservation sigmoid constants (gradient strength, then orientation).
QABF_GAMMA_G = 0.9994
QABF_KAPPA_G = -15.0
QABF_SIGMA_G = 0.5
QABF_GAMMA_A = 0.9879
QABF_KAPPA_A = -22.0
QABF_SIGMA_A = 0.8


def _check_same_shape(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise DimensionError("empty input")
    return a, b


# ---------------------------------------------------------------------------
# counting


def _grid_edges(extent: int, n: int) -> np.ndarray:
    """Cell start offsets for an n-way split of [0, extent).

    Boundaries sit at floor(i * extent / n), so cell sizes differ by at most
    one pixel and every level-k boundary is also a level-(k+1) boundary.
    That nesting is what makes the grid error monotone in k; uniform cells
    with the remainder dumped in the last cell would not nest.
    """
    return (np.arange(n, dtype=np.int64) * extent) // n


_MANTISSA_BITS = 53
_HALF_MANTISSA = 1 << 27


def _exact_cell_sums(density: np.ndarray, row_edges: np.ndarray, col_edges: np.ndarray) -> tuple[list[list[int]], int]:
    """Per-cell density sums as exact integers at a common power-of-2 scale.

    Each pixel is decomposed into mantissa * 2^exponent, everything is
    brought to the smallest exponent E, and the per-cell integer sums are
    accumulated without rounding (the mantissas are split in half so the
    intermediate int64 sums cannot overflow). Returns (sums, E) with
    cell value = sums[a][b] * 2^E exactly. Exact sums make the grid error
    monotone in k with plain <=, which float accumulation (whose rounding
    differs per grid level) does not guarantee.
    """
    mantissa_f, exponent = np.frexp(density)
    mantissa = np.rint(mantissa_f * float(1 << _MANTISSA_BITS)).astype(np.int64)
    scale = exponent.astype(np.int64) - _MANTISSA_BITS
    nonzero = mantissa != 0
    n = len(row_edges)
    totals = [[0] * n for _ in range(n)]
    if not nonzero.any():
        return totals, 0
    common = int(min(scale[nonzero].min(), 0))
    shifts = np.where(nonzero, scale - common, 0)
    high, low = mantissa >> 27, mantissa & (_HALF_MANTISSA - 1)

    def block_sums(values: np.ndarray) -> np.ndarray:
        return np.add.reduceat(np.add.reduceat(values, row_edges, axis=0), col_edges, axis=1)

    for s in np.unique(shifts[nonzero]):
        selected = nonzero & (shifts == s)
        cell_high = block_sums(np.where(selected, high, 0))
        cell_low = block_sums(np.where(selected, low, 0))
        for a in range(n):
            for b in range(n):
                part = (int(cell_high[a, b]) << 27) + int(cell_low[a, b])
                if part:
                    totals[a][b] += part << int(s)
    return totals, common


def game(pred_density: np.ndarray, gt_points: np.ndarray, k: int) -> float:
    """Grid count error at level k.

    The image is partitioned into a 2^k x 2^k grid with nested, near-uniform
    cells (boundaries at floor(i * extent / 2^k)) and the absolute difference
    between predicted density mass and ground-truth point count is summed
    over cells. k = 0 is the plain absolute count error. Cell sums are exact,
    so GAME(k) <= GAME(k+1) holds without tolerance.
    """
    if k not in (0, 1, 2, 3):
        raise ValueError(f"grid level must be 0..3, got {k}")
    density = np.asarray(pred_density, dtype=np.float64)
    if density.ndim != 2:
        raise DimensionError(f"density must be 2-d, got shape {density.shape}")
    if np.any(density < 0):
        raise ValueError("density values must be non-negative")
    h, w = density.shape
    n = 2 ** k
    if h < n or w < n:
        raise ValueError(f"{w}x{h} image cannot be split into a {n}x{n} grid")
    row_edges = _grid_edges(h, n)
    col_edges = _grid_edges(w, n)
    cell_pred, common = _exact_cell_sums(density, row_edges, col_edges)
    cell_gt = np.zeros((n, n), dtype=np.int64)
    points = np.asarray(gt_points, dtype=np.float64).reshape(-1, 2)
    if points.size:
        px, py = points[:, 0], points[:, 1]
        if px.min() < 0 or py.min() < 0 or px.max() >= w or py.max() >= h:
            raise ValueError("annotation points must lie inside the image bounds")
        rows = np.searchsorted(row_edges, py, side="right") - 1
        cols = np.searchsorted(col_edges, px, side="right") - 1
        np.add.at(cell_gt, (rows, cols), 1)
    total = 0
    for a in range(n):
        for b in range(n):
            total += abs(cell_pred[a][b] - (int(cell_gt[a, b]) << -common))
    return math.ldexp(float(total), common)


def rmse(pred_counts: np.ndarray, gt_counts: np.ndarray) -> float:
    """Root mean squared count error over a set of images."""
    p = np.asarray(pred_counts, dtype=np.float64).ravel()
    g = np.asarray(gt_counts, dtype=np.float64).ravel()
    if p.shape != g.shape:
        raise DimensionError(f"count vectors disagree: {p.shape} vs {g.shape}")
    if p.size == 0:
        raise DimensionError("empty count vectors")
    return float(np.sqrt(np.mean((p - g) ** 2)))


# ---------------------------------------------------------------------------
# segmentation


def confusion_matrix(pred: np.ndarray, gt: np.ndarray, num_classes: int) -> np.ndarray:
    """Confusion counts P where P[i, j] = #pixels with gt class i, predicted j."""
    pred, gt = _check_same_shape(pred, gt)
    p = pred.ravel().astype(np.int64)
    g = gt.ravel().astype(np.int64)
    if num_classes < 1:
        raise ValueError(f"num_classes must be >= 1, got {num_classes}")
    if p.min() < 0 or p.max() >= num_classes or g.min() < 0 or g.max() >= num_classes:
        raise ValueError(f"labels must lie in [0, {num_classes})")
    counts = np.bincount(g * num_classes + p, minlength=num_classes * num_classes)
    return counts.reshape(num_classes, num_classes).astype(np.float64)


def miou(pred: np.ndarray, gt: np.ndarray, num_classes: int) -> float:
    """Mean intersection-over-union over the classes present in gt.

    IoU_i = P_ii / (row_i + col_i - P_ii); classes absent from gt are
    excluded from the mean, so the result is well defined whenever gt is
    nonempty. Returned in [0, 1].
    """
    cm = confusion_matrix(pred, gt, num_classes)
    gt_sizes = cm.sum(axis=1)
    present = gt_sizes > 0
    inter = np.diag(cm)[present]
    union = (gt_sizes + cm.sum(axis=0) - np.diag(cm))[present]
    return float(np.mean(inter / union))


def recall(pred: np.ndarray, gt: np.ndarray, num_classes: int) -> float:
    """Mean per-class recall over the classes present in gt, in [0, 1].

    recall_i = P_ii / col_i; a present class that is never predicted
    contributes 0.
    """
    cm = confusion_matrix(pred, gt, num_classes)
    present = cm.sum(axis=1) > 0
    col = cm.sum(axis=0)
    diag = np.diag(cm)
    per_class = np.divide(diag, col, out=np.zeros_like(diag), where=col > 0)
    return float(np.mean(per_class[present]))


# ---------------------------------------------------------------------------
# image quality


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB, peak 1.0, capped at 99 dB."""
    a, b = _check_same_shape(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return float(min(10.0 * np.log10(1.0 / mse), PSNR_CAP))


def _ssim_plane(a: np.ndarray, b: np.ndarray) -> float:
    """SSIM over the 8x8 tiling anchored at (0, 0); edge remainders form
    partial windows of their own."""
    h, w = a.shape
    row_edges = np.arange(0, h, SSIM_WINDOW)
    col_edges = np.arange(0, w, SSIM_WINDOW)

    def block_sum(x: np.ndarray) -> np.ndarray:
        return np.add.reduceat(np.add.reduceat(x, row_edges, axis=0), col_edges, axis=1)

    row_sizes = np.diff(np.append(row_edges, h)).astype(np.float64)
    col_sizes = np.diff(np.append(col_edges, w)).astype(np.float64)
    n = np.outer(row_sizes, col_sizes)
    mu_a = block_sum(a) / n
    mu_b = block_sum(b) / n
    var_a = block_sum(a * a) / n - mu_a ** 2
    var_b = block_sum(b * b) / n - mu_b ** 2
    cov = block_sum(a * b) / n - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + SSIM_C1) * (2.0 * cov + SSIM_C2)
    den = (mu_a ** 2 + mu_b ** 2 + SSIM_C1) * (var_a + var_b + SSIM_C2)
    return float(np.mean(num / den))


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Structural similarity with non-overlapping 8x8 windows.

    Population statistics per window, stability constants C1 = 0.01^2 and
    C2 = 0.03^2 on the [0, 1] intensity range; multi-channel inputs average
    the per-channel values. Identical images score exactly 1.
    """
    a, b = _check_same_shape(a, b)
    if a.ndim == 3:
        return float(np.mean([_ssim_plane(a[..., c], b[..., c]) for c in range(a.shape[2])]))
    if a.ndim != 2:
        raise DimensionError(f"ssim expects 2-d or 3-d images, got shape {a.shape}")
    return _ssim_plane(a, b)


# ---------------------------------------------------------------------------
# fusion quality


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    """Pearson correlation; degenerate (zero-variance) inputs give 0."""
    da = a.ravel() - a.mean()
    db = b.ravel() - b.mean()
    na = float(np.sqrt(np.sum(da * da)))
    nb = float(np.sqrt(np.sum(db * db)))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(da, db) / (na * nb))


def cc(visible: np.ndarray, infrared: np.ndarray, fused: np.ndarray) -> float:
    """Mean Pearson correlation between the fused image and each source."""
    vis_gray = to_grayscale(visible)
    fused_gray = to_grayscale(fused)
    _check_same_shape(vis_gray, fused_gray)
    _check_same_shape(infrared, fused_gray)
    return 0.5 * (_pearson(fused_gray, vis_gray) + _pearson(fused_gray, infrared))


def _sobel_xy(image: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Horizontal and vertical Sobel responses with replicated borders."""
    p = np.pad(np.asarray(image, dtype=np.float64), 1, mode="edge")
    tl, tc, tr = p[:-2, :-2], p[:-2, 1:-1], p[:-2, 2:]
    ml, mr = p[1:-1, :-2], p[1:-1, 2:]
    bl, bc, br = p[2:, :-2], p[2:, 1:-1], p[2:, 2:]
    gx = (tr + 2.0 * mr + br) - (tl + 2.0 * ml + bl)
    gy = (bl + 2.0 * bc + br) - (tl + 2.0 * tc + tr)
    return gx, gy


def sobel_magnitude(image: np.ndarray) -> np.ndarray:
    """Sobel gradient magnitude of a single-channel image."""
    if np.asarray(image).ndim != 2:
        raise DimensionError("sobel_magnitude expects a single-channel image")
    gx, gy = _sobel_xy(image)
    return np.hypot(gx, gy)


def fusion_losses(visible: np.ndarray, infrared: np.ndarray, fused: np.ndarray) -> tuple[float, float]:
    """Intensity and gradient reconstruction losses of a fused image.

    The target intensity is the pixelwise maximum of the grayscale visible
    and the infrared images; the target gradient is the pixelwise maximum of
    their Sobel magnitudes. Both losses are mean absolute deviations, so a
    max-fused image of the sources has zero intensity loss.
    """
    vis_gray = to_grayscale(visible)
    fused_gray = to_grayscale(fused)
    _check_same_shape(vis_gray, fused_gray)
    _check_same_shape(infrared, fused_gray)
    l_inten = float(np.mean(np.abs(fused_gray - np.maximum(vis_gray, infrared))))
    grad_target = np.maximum(sobel_magnitude(vis_gray), sobel_magnitude(infrared))
    l_grad = float(np.mean(np.abs(sobel_magnitude(fused_gray) - grad_target)))
    return l_inten, l_grad


def _edge_strength_angle(image: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    gx, gy = _sobel_xy(image)
    strength = np.hypot(gx, gy)
    # Undirected edge orientation folded into (-pi/2, pi/2].
    angle = np.arctan2(gy, gx)
    angle = np.where(angle > np.pi / 2.0, angle - np.pi, angle)
    angle = np.where(angle <= -np.pi / 2.0, angle + np.pi, angle)
    return strength, angle


def _edge_preservation(g_src: np.ndarray, a_src: np.ndarray, g_fus: np.ndarray, a_fus: np.ndarray) -> np.ndarray:
    big = np.maximum(g_src, g_fus)
    small = np.minimum(g_src, g_fus)
    rel_strength = np.divide(small, big, out=np.zeros_like(big), where=big > 0)
    diff = np.abs(a_src - a_fus)
    diff = np.minimum(diff, np.pi - diff)
    rel_angle = 1.0 - diff / (np.pi / 2.0)
    q_g = QABF_GAMMA_G / (1.0 + np.exp(QABF_KAPPA_G * (rel_strength - QABF_SIGMA_G)))
    q_a = QABF_GAMMA_A / (1.0 + np.exp(QABF_KAPPA_A * (rel_angle - QABF_SIGMA_A)))
    return q_g * q_a


def qabf(visible: np.ndarray, infrared: np.ndarray, fused: np.ndarray) -> float:
    """Gradient-based edge-preservation score of a fused image, in [0, 1].

    For each source, per-pixel edge strength and orientation similarities to
    the fused image pass through the standard sigmoids and are combined,
    weighted by source edge strength. Fully flat inputs carry no edge
    information and score 0.
    """
    vis_gray = to_grayscale(visible)
    fused_gray = to_grayscale(fused)
    _check_same_shape(vis_gray, fused_gray)
    _check_same_shape(infrared, fused_gray)
    g_a, a_a = _edge_strength_angle(vis_gray)
    g_b, a_b = _edge_strength_angle(infrared)
    g_f, a_f = _edge_strength_angle(fused_gray)
    q_af = _edge_preservation(g_a, a_a, g_f, a_f)
    q_bf = _edge_preservation(g_b, a_b, g_f, a_f)
    weight_sum = float(np.sum(g_a + g_b))
    if weight_sum == 0.0:
        return 0.0
    return float(np.sum(q_af * g_a + q_bf * g_b) / weight_sum)


def _gaussian_kernel1d(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    x = np.arange(size, dtype=np.float64) - half
    k = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return k / k.sum()


def _gauss_filter(image: np.ndarray, size: int, sigma: float) -> np.ndarray:
    """Separable Gaussian smoothing with replicated borders."""
    k = _gaussian_kernel1d(size, sigma)
    pad = size // 2
    p = np.pad(image, ((pad, pad), (0, 0)), mode="edge")
    out = np.zeros_like(image)
    for i, w in enumerate(k):
        out += w * p[i : i + image.shape[0], :]
    p = np.pad(out, ((0, 0), (pad, pad)), mode="edge")
    out = np.zeros_like(image)
    for i, w in enumerate(k):
        out += w * p[:, i : i + image.shape[1]]
    return out


def _vif(ref: np.ndarray, dist: np.ndarray, sigma_nsq: float = 2.0) -> float:
    """Pixel-domain visual information fidelity over four dyadic scales.

    Operates on a 0..255 intensity scale with the customary noise variance
    of 2. A reference with no information (flat image) scores 1 by
    convention.
    """
    ref = ref * 255.0
    dist = dist * 255.0
    num = 0.0
    den = 0.0
    for scale in range(1, 5):
        size = 2 ** (5 - scale) + 1
        sigma = size / 5.0
        if scale > 1:
            ref = _gauss_filter(ref, size, sigma)[::2, ::2]
            dist = _gauss_filter(dist, size, sigma)[::2, ::2]
            if min(ref.shape) < 2:
                break
        mu1 = _gauss_filter(ref, size, sigma)
        mu2 = _gauss_filter(dist, size, sigma)
        var1 = np.maximum(_gauss_filter(ref * ref, size, sigma) - mu1 * mu1, 0.0)
        var2 = np.maximum(_gauss_filter(dist * dist, size, sigma) - mu2 * mu2, 0.0)
        cov = _gauss_filter(ref * dist, size, sigma) - mu1 * mu2
        g = cov / (var1 + 1e-10)
        sv = var2 - g * cov
        g = np.where(var1 < 1e-10, 0.0, g)
        sv = np.where(var1 < 1e-10, var2, sv)
        sv = np.where(g < 0.0, var2, sv)
        g = np.maximum(g, 0.0)
        sv = np.maximum(sv, 1e-10)
        num += float(np.sum(np.log10(1.0 + g * g * var1 / (sv + sigma_nsq))))
        den += float(np.sum(np.log10(1.0 + var1 / sigma_nsq)))
    if den == 0.0:
        return 1.0
    return num / den


def viff(visible: np.ndarray, infrared: np.ndarray, fused: np.ndarray) -> float:
    """Visual information fidelity for fusion: VIF per source, averaged."""
    vis_gray = to_grayscale(visible)
    fused_gray = to_grayscale(fused)
    _check_same_shape(vis_gray, fused_gray)
    _check_same_shape(infrared, fused_gray)
    return 0.5 * (_vif(vis_gray, fused_gray) + _vif(infrared, fused_gray))


# ---------------------------------------------------------------------------
# reporting table

METRIC_COLUMNS = (
    "game0",
    "game1",
    "game2",
    "game3",
    "rmse",
    "miou",
    "recall",
    "psnr_vis",
    "ssim_vis",
    "psnr_inf",
    "ssim_inf",
    "qabf",
    "viff",
    "cc",
    "psnr_fused",
    "ssim_fused",
)

# Columns stored in [0, 1] internally but reported as percentages.
PERCENT_COLUMNS = ("miou", "recall")


@dataclass
class MetricTable:
    """One row of metric values; None marks a metric not applicable."""

    game0: float | None = None
    game1: float | None = None
    game2: float | None = None
    game3: float | None = None
    rmse: float | None = None
    miou: float | None = None
    recall: float | None = None
    psnr_vis: float | None = None
    ssim_vis: float | None = None
    psnr_inf: float | None = None
    ssim_inf: float | None = None
    qabf: float | None = None
    viff: float | None = None
    cc: float | None = None
    psnr_fused: float | None = None
    ssim_fused: float | None = None

    def as_dict(self) -> dict[str, float | None]:
        return {f.name: getattr(self, f.name) for f in _dc_fields(self)}

    def values(self) -> list[float | None]:
        return [getattr(self, name) for name in METRIC_COLUMNS]


def format_metric_value(value: float | None) -> str:
    """Deterministic CSV cell text: repr for floats, empty for missing."""
    if value is None:
        return ""
    return repr(float(value))


def metric_csv_header(label: str = "label") -> str:
    """CSV header line for metric tables, with a leading label column."""
    return ",".join((label,) + METRIC_COLUMNS)


def metric_csv_row(label: str, table: MetricTable) -> str:
    """One CSV line; miou and recall are scaled to percentages here."""
    cells = [label]
    for name in METRIC_COLUMNS:
        value = getattr(table, name)
        if value is not None and name in PERCENT_COLUMNS:
            value = value * 100.0
        cells.append(format_metric_value(value))
    return ",".join(cells)
