"""
A tour of the metric suite
==========================

Effectiveness metrics quantify how wrong a model becomes (counting grids,
segmentation overlap, fusion quality); stealth metrics quantify how visible
the manipulation is (PSNR, SSIM). All of them are plain functions over numpy
arrays in [0, 1].
"""

import numpy as np

from vipatch import (
    cc,
    fusion_losses,
    game,
    miou,
    psnr,
    qabf,
    recall,
    render_point_density,
    rmse,
    ssim,
    surrogate_fuse,
    to_grayscale,
    make_fixture,
)

rng = np.random.default_rng(7)
pair, points = make_fixture(seed=3)

# --- counting: GAME(k) partitions the image into 4^k cells and sums the
# absolute difference between predicted density mass and point counts.
density = render_point_density(points, pair.dims, sigma=4.0)
for k in range(4):
    print(f"GAME({k}) of a matched density: {game(density, points, k):.6f}")

# A density that misses one object is off by about 1 at every level.
short = render_point_density(points[:-1], pair.dims, sigma=4.0)
print(f"GAME(0) one object short: {game(short, points, 0):.3f}")
print(f"density RMSE vs matched: {rmse(short, density):.6f}")

# --- segmentation: mean IoU and recall over label maps.
labels_gt = rng.integers(0, 4, size=(pair.height, pair.width))
labels_noisy = labels_gt.copy()
flip = rng.random(labels_gt.shape) < 0.1
labels_noisy[flip] = rng.integers(0, 4, size=int(flip.sum()))
print(f"mIoU after 10% label noise: {miou(labels_noisy, labels_gt, 4):.4f}")
print(f"recall after 10% label noise: {recall(labels_noisy, labels_gt, 4):.4f}")

# --- fusion: compare a fused image against both sources.
fused = surrogate_fuse(pair)
l_inten, l_grad = fusion_losses(pair.visible, pair.infrared, fused)
print(f"fusion L_inten {l_inten:.6f}, L_grad {l_grad:.6f} (max-fusion reference)")
print(f"fusion correlation cc: {cc(pair.visible, pair.infrared, fused):.4f}")
print(f"fusion edge agreement Qabf: {qabf(pair.visible, pair.infrared, fused):.4f}")

# --- stealth: PSNR caps at 99 dB for identical images; SSIM is 1.
gray = to_grayscale(pair.visible)
print(f"identical images: PSNR {psnr(gray, gray):.1f} dB, SSIM {ssim(gray, gray):.3f}")
noisy = np.clip(gray + rng.normal(scale=0.02, size=gray.shape), 0.0, 1.0)
print(f"2% noise: PSNR {psnr(gray, noisy):.2f} dB, SSIM {ssim(gray, noisy):.4f}")
