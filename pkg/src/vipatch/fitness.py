"""Task fitness: the scalarized attack objective J = alpha*E + (1-alpha)*S.

E measures attack effectiveness against the target model (count error, mIoU
drop, or fusion-quality loss) and S measures stealthiness of the attacked
pair relative to the clean pair via PSNR and SSIM on both modalities. The
weights inside E and S are fixed constants; only alpha trades the two terms.
E and S live on different natural scales (counts and dB); no normalization
is applied between them.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .imagecore import ImagePair, to_grayscale
from .metrics import MetricTable, fusion_losses, miou, psnr, recall, ssim
from .patchcodec import CompressionParams, PatchGenome, apply

TASKS = ("counting", "segmentation", "fusion")

# Stealthiness combination (PSNR in dB, SSIM dimensionless).
STEALTH_PSNR_WEIGHT = 1.0
STEALTH_SSIM_WEIGHT = 20.0

# Fusion effectiveness combination.
FUSION_INTENSITY_WEIGHT = 20.0
FUSION_GRADIENT_WEIGHT = 20.0
FUSION_SSIM_WEIGHT = 10.0


@dataclass(frozen=True)
class FitnessConfig:
    """Task selection and the effectiveness/stealthiness trade-off."""

    task: str = "counting"
    alpha: float = 1.0
    compression: CompressionParams = field(default_factory=CompressionParams)
    modality: str = "both"
    num_classes: int = 4

    def __post_init__(self) -> None:
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}; expected one of {TASKS}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.modality not in ("both", "visible", "infrared"):
            raise ConfigError(f"unknown modality {self.modality!r}")


@dataclass
class FitnessReport:
    """One evaluated genome: effectiveness, stealthiness, scalarized J."""

    e_term: float
    s_term: float
    j: float
    metrics: MetricTable


def stealth_score(clean: ImagePair, adversarial: ImagePair) -> tuple[float, MetricTable]:
    """S = (psnr_vis + psnr_inf) * 1 + (ssim_vis + ssim_inf) * 20."""
    psnr_vis = psnr(clean.visible, adversarial.visible)
    ssim_vis = ssim(clean.visible, adversarial.visible)
    psnr_inf = psnr(clean.infrared, adversarial.infrared)
    ssim_inf = ssim(clean.infrared, adversarial.infrared)
    s = STEALTH_PSNR_WEIGHT * (psnr_vis + psnr_inf) + STEALTH_SSIM_WEIGHT * (ssim_vis + ssim_inf)
    table = MetricTable(
        psnr_vis=psnr_vis, ssim_vis=ssim_vis, psnr_inf=psnr_inf, ssim_inf=ssim_inf
    )
    return s, table


def _scalarize(e: float, s: float, alpha: float) -> float:
    return alpha * e + (1.0 - alpha) * s


def fitness_counting(
    genome: PatchGenome,
    pair: ImagePair,
    model,
    config: FitnessConfig,
    clean_count: float | None = None,
) -> FitnessReport:
    """Count-error effectiveness against the model's clean prediction.

    E = |count(attacked) - count(clean)|. Pass clean_count to reuse a cached
    clean prediction across evaluations of the same pair.
    """
    adversarial = apply(genome, pair, config.compression, config.modality)
    adv_count, _ = model(adversarial)
    if clean_count is None:
        clean_count, _ = model(pair)
    e = abs(float(adv_count) - float(clean_count))
    s, table = stealth_score(pair, adversarial)
    return FitnessReport(e_term=e, s_term=s, j=_scalarize(e, s, config.alpha), metrics=table)


def fitness_segmentation(
    genome: PatchGenome,
    pair: ImagePair,
    model,
    config: FitnessConfig,
    reference_labels: np.ndarray | None = None,
) -> FitnessReport:
    """mIoU-drop effectiveness: E = 100 - 100 * mIoU(attacked, reference).

    The reference is the model's clean-input prediction unless an annotated
    class map is passed explicitly.
    """
    adversarial = apply(genome, pair, config.compression, config.modality)
    adv_labels = model(adversarial)
    if reference_labels is None:
        reference_labels = model(pair)
    iou = miou(adv_labels, reference_labels, config.num_classes)
    e = 100.0 - iou * 100.0
    s, table = stealth_score(pair, adversarial)
    table.miou = iou
    table.recall = recall(adv_labels, reference_labels, config.num_classes)
    return FitnessReport(e_term=e, s_term=s, j=_scalarize(e, s, config.alpha), metrics=table)


def fitness_fusion(
    genome: PatchGenome,
    pair: ImagePair,
    model,
    config: FitnessConfig,
) -> FitnessReport:
    """Fusion-degradation effectiveness against the clean sources.

    E = 20 * L_inten + 20 * L_grad + 10 * (1 - mean SSIM of the attacked
    fusion against each clean source). Fusion quality already measures
    similarity to the sources, so no separate stealthiness term exists:
    alpha is forced to 1 and J = E.
    """
    if config.alpha != 1.0:
        warnings.warn(
            "fusion fitness has no stealthiness term; alpha is forced to 1",
            stacklevel=2,
        )
    adversarial = apply(genome, pair, config.compression, config.modality)
    fused = np.asarray(model(adversarial), dtype=np.float64)
    vis_gray = to_grayscale(pair.visible)
    l_inten, l_grad = fusion_losses(pair.visible, pair.infrared, fused)
    ssim_sources = 0.5 * (ssim(vis_gray, fused) + ssim(pair.infrared, fused))
    e = (
        FUSION_INTENSITY_WEIGHT * l_inten
        + FUSION_GRADIENT_WEIGHT * l_grad
        + FUSION_SSIM_WEIGHT * (1.0 - ssim_sources)
    )
    table = MetricTable(
        psnr_fused=0.5 * (psnr(vis_gray, fused) + psnr(pair.infrared, fused)),
        ssim_fused=ssim_sources,
    )
    return FitnessReport(e_term=e, s_term=0.0, j=e, metrics=table)


def make_evaluator(
    pair: ImagePair,
    model,
    config: FitnessConfig,
    reference_labels: np.ndarray | None = None,
):
    """Genome evaluator with the clean prediction computed once and cached.

    Returns a callable genome -> FitnessReport suitable for wrapping into a
    DE fitness oracle.
    """
    if config.task == "counting":
        clean_count, _ = model(pair)

        def evaluate(genome: PatchGenome) -> FitnessReport:
            return fitness_counting(genome, pair, model, config, clean_count=clean_count)

    elif config.task == "segmentation":
        reference = reference_labels if reference_labels is not None else model(pair)

        def evaluate(genome: PatchGenome) -> FitnessReport:
            return fitness_segmentation(genome, pair, model, config, reference_labels=reference)

    else:

        def evaluate(genome: PatchGenome) -> FitnessReport:
            return fitness_fusion(genome, pair, model, config)

    return evaluate


def make_fast_objective(
    pair: ImagePair,
    model,
    config: FitnessConfig,
    reference_labels: np.ndarray | None = None,
):
    """Genome -> J only, skipping stealth metrics when alpha = 1.

    The full FitnessReport path computes four image-quality metrics per
    evaluation; inside the optimizer loop with alpha = 1 those never affect
    J, so this variant avoids them. Results are identical to the report path
    (the identity J = alpha*E + (1-alpha)*S is exact either way).
    """
    if config.alpha == 1.0 and config.task == "counting":
        clean_count, _ = model(pair)

        def counting_objective(genome: PatchGenome) -> float:
            adversarial = apply(genome, pair, config.compression, config.modality)
            adv_count, _ = model(adversarial)
            return abs(float(adv_count) - float(clean_count))

        return counting_objective
    if config.alpha == 1.0 and config.task == "segmentation":
        reference = reference_labels if reference_labels is not None else model(pair)

        def segmentation_objective(genome: PatchGenome) -> float:
            adversarial = apply(genome, pair, config.compression, config.modality)
            return 100.0 - 100.0 * miou(model(adversarial), reference, config.num_classes)

        return segmentation_objective
    evaluator = make_evaluator(pair, model, config, reference_labels)
    return lambda genome: evaluator(genome).j
