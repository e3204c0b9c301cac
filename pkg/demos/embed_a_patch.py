"""
Embedding a circular patch into a visible/infrared pair
=======================================================

A patch is a disk: center (x, y), radius r, and a short table of RGB colors
that are cycled over the disk pixels in row-major order. The infrared layer
reuses the same colors after an affine intensity compression, so the patch
stays printable in one material.
"""

import numpy as np

from vipatch import PatchGenome, apply, color_to_infrared, disk_mask, make_fixture, save_image

# A synthetic annotated scene: 224x176 pair plus 13 ground-truth points.
pair, points = make_fixture(seed=0)
print(f"scene {pair.width}x{pair.height} with {len(points)} annotated objects")

# Three colors, cycled pixel by pixel across the disk.
genome = PatchGenome(x=90, y=80, r=32, colors=np.array([
    [0.9, 0.2, 0.1],
    [0.1, 0.6, 0.9],
    [0.95, 0.85, 0.2],
]))
attacked = apply(genome, pair)

# The infrared side carries the compressed gray of each color.
print("infrared values per color:", np.round(color_to_infrared(genome.colors), 3))

# Only pixels under the disk change; everything else is untouched.
mask = disk_mask(genome.x, genome.y, genome.r, pair.width, pair.height)
outside = ~mask
assert np.array_equal(attacked.visible[outside], pair.visible[outside])
assert np.array_equal(attacked.infrared[outside], pair.infrared[outside])
print(f"patch covers {int(mask.sum())} pixels; all others are bit-identical")

save_image(attacked.visible, "patched_visible.png")
save_image(attacked.infrared, "patched_infrared.png")
print("wrote patched_visible.png and patched_infrared.png")
