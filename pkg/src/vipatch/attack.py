"""End-to-end attack orchestration: single attacks, batches, sweeps, defenses.

This layer glues the engine to the task fitness and target oracles, applies
the ablation modes, computes reporting metrics against ground truth, and
writes all result artifacts (PNGs, genome records, trajectory and metric
CSVs, config snapshots). CSV content is deterministic for a given config and
seed: floats are rendered with repr and wall-clock timings never enter CSVs.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import deengine, fitness as fitness_mod, metrics as metrics_mod
from .defenses import DefenseConfig, apply_defense, detection_threshold, mse_detect
from .errors import ConfigError
from .fixtures import load_fixture_dir, render_point_density
from .imagecore import ImagePair, image_dims, load_pair, save_image, to_grayscale
from .metrics import (
    METRIC_COLUMNS,
    MetricTable,
    format_metric_value,
    game,
    metric_csv_header,
    metric_csv_row,
    miou,
    psnr,
    qabf,
    recall,
    ssim,
    viff,
)
from .metrics import cc as cc_metric
from .patchcodec import (
    CompressionParams,
    PatchGenome,
    decode,
    genome_from_record,
    genome_to_record,
    vector_bounds,
)
from .patchcodec import apply as apply_patch
from .targets import (
    RemoteEndpoint,
    SurrogateCountingParams,
    TargetKind,
    make_model,
)

TASK_DEFAULT_RADIUS = {"counting": 40, "segmentation": 40, "fusion": 30}
TASK_DEFAULT_COLORS = {"counting": 10, "segmentation": 10, "fusion": 2}
TASK_DEFAULT_TARGET = {
    "counting": TargetKind.SURROGATE_COUNTING,
    "segmentation": TargetKind.SURROGATE_SEGMENTATION,
    "fusion": TargetKind.SURROGATE_FUSION,
}
ABLATIONS = ("full", "position_only", "random", "visible_only", "infrared_only")

REPORT_EXTRA_COLUMNS = ("e_term", "s_term", "j", "stop_generation", "stop_reason")


@dataclass(frozen=True)
class AttackConfig:
    """Fully describes one attack run; unset fields fall to task defaults."""

    task: str = "counting"
    target: TargetKind | str | None = None
    endpoint: RemoteEndpoint | None = None
    radius: int | None = None
    n_colors: int | None = None
    alpha: float = 1.0
    population_size: int = 30
    max_generations: int = 200
    stagnation_patience: int = 10
    scale_factor: float = 0.7
    crossover_rate: float = 0.9
    seed: int = 0
    ablation: str = "full"
    compression: CompressionParams = field(default_factory=CompressionParams)
    optimize_radius: bool = False
    radius_range: tuple[int, int] | None = None
    counting_params: SurrogateCountingParams = field(default_factory=SurrogateCountingParams)
    num_classes: int = 4
    success_j: float | None = None
    workers: int = 1

    def __post_init__(self) -> None:
        if self.task not in TASK_DEFAULT_RADIUS:
            raise ConfigError(f"unknown task {self.task!r}")
        if self.ablation not in ABLATIONS:
            raise ConfigError(f"unknown ablation {self.ablation!r}; expected one of {ABLATIONS}")
        if self.radius is not None and self.radius < 1:
            raise ConfigError("radius must be positive")
        if self.n_colors is not None and self.n_colors < 1:
            raise ConfigError("color count must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.target is not None:
            object.__setattr__(self, "target", TargetKind(self.target))

    @property
    def resolved_radius(self) -> int:
        return self.radius if self.radius is not None else TASK_DEFAULT_RADIUS[self.task]

    @property
    def resolved_colors(self) -> int:
        return self.n_colors if self.n_colors is not None else TASK_DEFAULT_COLORS[self.task]

    @property
    def resolved_target(self) -> TargetKind:
        return self.target if self.target is not None else TASK_DEFAULT_TARGET[self.task]

    @property
    def resolved_alpha(self) -> float:
        # Fusion has no stealthiness term; its scalarization is pinned.
        return 1.0 if self.task == "fusion" else self.alpha

    @property
    def modality(self) -> str:
        if self.ablation == "visible_only":
            return "visible"
        if self.ablation == "infrared_only":
            return "infrared"
        return "both"

    def snapshot(self) -> str:
        """Flat key=value text, loadable again as a config file."""
        lines = [
            f"task={self.task}",
            f"target={self.resolved_target.value}",
            f"radius={self.resolved_radius}",
            f"colors={self.resolved_colors}",
            f"alpha={self.resolved_alpha!r}",
            f"pop={self.population_size}",
            f"gens={self.max_generations}",
            f"patience={self.stagnation_patience}",
            f"scale_factor={self.scale_factor!r}",
            f"crossover_rate={self.crossover_rate!r}",
            f"seed={self.seed}",
            f"ablation={self.ablation}",
            f"beta={self.compression.beta!r}",
            f"gamma={self.compression.gamma!r}",
            f"optimize_radius={'true' if self.optimize_radius else 'false'}",
            f"workers={self.workers}",
        ]
        if self.radius_range is not None:
            lines.append(f"radius_range={self.radius_range[0]}:{self.radius_range[1]}")
        if self.success_j is not None:
            lines.append(f"success_j={self.success_j!r}")
        if self.endpoint is not None:
            if self.endpoint.transport == "subprocess":
                lines.append("endpoint=cmd:" + " ".join(self.endpoint.command))
            else:
                lines.append(f"endpoint=tcp:{self.endpoint.address}")
            lines.append(f"timeout_ms={self.endpoint.timeout_ms}")
        return "\n".join(lines) + "\n"


@dataclass
class AttackResult:
    config: AttackConfig
    genome: PatchGenome
    adversarial: ImagePair
    report: fitness_mod.FitnessReport
    trajectory: deengine.Trajectory
    metrics_clean: MetricTable
    metrics_adversarial: MetricTable
    duration_s: float
    stop_generation: int
    stop_reason: str


class EvaluationContext:
    """Ground-truth-aware metric evaluation for one clean pair.

    Computes the model's clean prediction once; metrics_for then scores any
    pair (clean, attacked, defended) against ground truth and the clean
    images.
    """

    def __init__(
        self,
        clean_pair: ImagePair,
        model: Callable,
        task: str,
        gt_points: np.ndarray | None = None,
        gt_labels: np.ndarray | None = None,
        num_classes: int = 4,
    ):
        self.clean_pair = clean_pair
        self.model = model
        self.task = task
        self.gt_points = gt_points
        self.gt_labels = gt_labels
        self.num_classes = num_classes
        self.clean_prediction = model(clean_pair)

    def _counting_metrics(self, pair: ImagePair, table: MetricTable) -> None:
        if pair is self.clean_pair:
            count, density = self.clean_prediction
        else:
            count, density = self.model(pair)
        if self.gt_points is None:
            return
        n_gt = float(np.asarray(self.gt_points).reshape(-1, 2).shape[0])
        if density is None:
            table.game0 = abs(float(count) - n_gt)
        else:
            table.game0 = game(density, self.gt_points, 0)
            table.game1 = game(density, self.gt_points, 1)
            table.game2 = game(density, self.gt_points, 2)
            table.game3 = game(density, self.gt_points, 3)
        table.rmse = abs(float(count) - n_gt)

    def _segmentation_metrics(self, pair: ImagePair, table: MetricTable) -> None:
        labels = self.clean_prediction if pair is self.clean_pair else self.model(pair)
        reference = self.gt_labels if self.gt_labels is not None else self.clean_prediction
        table.miou = miou(labels, reference, self.num_classes)
        table.recall = recall(labels, reference, self.num_classes)

    def _fusion_metrics(self, pair: ImagePair, table: MetricTable) -> None:
        fused = self.clean_prediction if pair is self.clean_pair else self.model(pair)
        vis = self.clean_pair.visible
        inf = self.clean_pair.infrared
        table.qabf = qabf(vis, inf, fused)
        table.viff = viff(vis, inf, fused)
        table.cc = cc_metric(vis, inf, fused)
        vis_gray = to_grayscale(vis)
        table.psnr_fused = 0.5 * (psnr(vis_gray, fused) + psnr(inf, fused))
        table.ssim_fused = 0.5 * (ssim(vis_gray, fused) + ssim(inf, fused))

    def metrics_for(self, pair: ImagePair) -> MetricTable:
        """Effectiveness metrics plus stealth metrics relative to the clean pair."""
        table = MetricTable()
        if self.task == "counting":
            self._counting_metrics(pair, table)
        elif self.task == "segmentation":
            self._segmentation_metrics(pair, table)
        else:
            self._fusion_metrics(pair, table)
        table.psnr_vis = psnr(self.clean_pair.visible, pair.visible)
        table.ssim_vis = ssim(self.clean_pair.visible, pair.visible)
        table.psnr_inf = psnr(self.clean_pair.infrared, pair.infrared)
        table.ssim_inf = ssim(self.clean_pair.infrared, pair.infrared)
        return table

    def effectiveness(self, table: MetricTable) -> float | None:
        """The headline effectiveness number for sweep/defense comparisons."""
        if self.task == "counting":
            return table.game0
        if self.task == "segmentation":
            return None if table.miou is None else 100.0 - 100.0 * table.miou
        return None


def _resolve_model(config: AttackConfig, model: Callable | None = None) -> Callable:
    if model is not None:
        return model
    return make_model(
        config.task,
        config.resolved_target,
        endpoint=config.endpoint,
        counting_params=config.counting_params,
        num_bands=config.num_classes,
    )


def _search_bounds(config: AttackConfig, dims: tuple[int, int]) -> np.ndarray:
    if config.optimize_radius:
        radius_range = config.radius_range or (
            max(1, config.resolved_radius // 2),
            config.resolved_radius * 2,
        )
        return vector_bounds(dims, config.resolved_colors, radius_range=radius_range)
    return vector_bounds(dims, config.resolved_colors, radius=config.resolved_radius)


def _fixed_radius(config: AttackConfig) -> int | None:
    return None if config.optimize_radius else config.resolved_radius


def run_attack(
    pair: ImagePair,
    config: AttackConfig,
    model: Callable | None = None,
    gt_points: np.ndarray | None = None,
    gt_labels: np.ndarray | None = None,
) -> AttackResult:
    """Run one attack (or baseline) on a pair and evaluate it fully."""
    started = time.perf_counter()
    model = _resolve_model(config, model)
    dims = pair.dims
    bounds = _search_bounds(config, dims)
    fit_config = fitness_mod.FitnessConfig(
        task=config.task,
        alpha=config.resolved_alpha,
        compression=config.compression,
        modality=config.modality,
        num_classes=config.num_classes,
    )
    fixed_radius = _fixed_radius(config)

    if config.ablation == "random":
        rng = np.random.default_rng(config.seed)
        vector = rng.uniform(bounds[:, 0], bounds[:, 1])
        genome = decode(vector, dims, fixed_radius)
        trajectory = deengine.Trajectory(stop_reason="baseline")
        stop_generation = 0
    else:
        if config.ablation == "position_only":
            rng = np.random.default_rng(config.seed)
            frozen = rng.uniform(bounds[3 if fixed_radius is None else 2 :, 0],
                                 bounds[3 if fixed_radius is None else 2 :, 1])
            head = 3 if fixed_radius is None else 2
            bounds = bounds.copy()
            bounds[head:, 0] = frozen
            bounds[head:, 1] = frozen
        objective = fitness_mod.make_fast_objective(pair, model, fit_config)

        def oracle(vector: np.ndarray) -> float:
            return objective(decode(vector, dims, fixed_radius))

        predicate = None
        if config.success_j is not None:
            threshold = config.success_j
            predicate = lambda vec, fit: fit >= threshold
        engine_config = deengine.DEConfig(
            bounds=bounds,
            population_size=config.population_size,
            scale_factor=config.scale_factor,
            crossover_rate=config.crossover_rate,
            max_generations=config.max_generations,
            stagnation_patience=config.stagnation_patience,
            rng_seed=config.seed,
        )
        best, trajectory = deengine.run(
            engine_config, oracle, success_predicate=predicate, workers=config.workers
        )
        genome = decode(best, dims, fixed_radius)
        stop_generation = trajectory.final_generation

    evaluator = fitness_mod.make_evaluator(pair, model, fit_config, reference_labels=gt_labels)
    report = evaluator(genome)
    adversarial = apply_patch(genome, pair, config.compression, config.modality)
    context = EvaluationContext(
        pair, model, config.task, gt_points, gt_labels, config.num_classes
    )
    metrics_clean = context.metrics_for(pair)
    metrics_adversarial = context.metrics_for(adversarial)
    return AttackResult(
        config=config,
        genome=genome,
        adversarial=adversarial,
        report=report,
        trajectory=trajectory,
        metrics_clean=metrics_clean,
        metrics_adversarial=metrics_adversarial,
        duration_s=time.perf_counter() - started,
        stop_generation=stop_generation,
        stop_reason=trajectory.stop_reason,
    )


# ---------------------------------------------------------------------------
# artifact writing


def trajectory_csv(trajectory: deengine.Trajectory) -> str:
    lines = ["generation,best_fitness,mean_fitness"]
    for point in trajectory.points:
        lines.append(
            f"{point.generation},{format_metric_value(point.best_fitness)},"
            f"{format_metric_value(point.mean_fitness)}"
        )
    return "\n".join(lines) + "\n"


def _heat_image(diff: np.ndarray) -> np.ndarray:
    peak = diff.max()
    v = diff / peak if peak > 0 else diff
    return np.stack(
        [np.clip(3.0 * v, 0, 1), np.clip(3.0 * v - 1.0, 0, 1), np.clip(3.0 * v - 2.0, 0, 1)],
        axis=-1,
    )


def build_composite(clean: ImagePair, adversarial: ImagePair, gap: int = 4) -> np.ndarray:
    """Side-by-side rendering: clean | adversarial | difference heat, both modalities."""
    h, w = clean.height, clean.width
    vis_diff = np.sqrt(np.sum((clean.visible - adversarial.visible) ** 2, axis=-1))
    inf_diff = np.abs(clean.infrared - adversarial.infrared)
    inf3 = lambda im: np.repeat(im[..., None], 3, axis=-1)
    rows = [
        [clean.visible, adversarial.visible, _heat_image(vis_diff)],
        [inf3(clean.infrared), inf3(adversarial.infrared), _heat_image(inf_diff)],
    ]
    out = np.ones((2 * h + gap, 3 * w + 2 * gap, 3), dtype=np.float64)
    for ri, row in enumerate(rows):
        for ci, img in enumerate(row):
            y0 = ri * (h + gap)
            x0 = ci * (w + gap)
            out[y0 : y0 + h, x0 : x0 + w] = img
    return out


def save_attack_result(result: AttackResult, out_dir: str | Path) -> dict[str, Path]:
    """Write all artifacts of one attack run; returns the path map."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "visible": out / "adversarial_visible.png",
        "infrared": out / "adversarial_infrared.png",
        "genome": out / "genome.txt",
        "trajectory": out / "trajectory.csv",
        "metrics": out / "metrics.csv",
        "composite": out / "composite.png",
        "config": out / "config.txt",
        "result": out / "result.txt",
    }
    save_image(result.adversarial.visible, paths["visible"])
    save_image(result.adversarial.infrared, paths["infrared"])
    paths["genome"].write_text(genome_to_record(result.genome) + "\n")
    paths["trajectory"].write_text(trajectory_csv(result.trajectory))
    metric_lines = [
        metric_csv_header(),
        metric_csv_row("clean", result.metrics_clean),
        metric_csv_row("adversarial", result.metrics_adversarial),
    ]
    paths["metrics"].write_text("\n".join(metric_lines) + "\n")
    save_image(build_composite_from_result(result), paths["composite"])
    paths["config"].write_text(result.config.snapshot())
    paths["result"].write_text(
        f"e_term={result.report.e_term!r}\n"
        f"s_term={result.report.s_term!r}\n"
        f"j={result.report.j!r}\n"
        f"stop_generation={result.stop_generation}\n"
        f"stop_reason={result.stop_reason}\n"
        f"duration_s={result.duration_s!r}\n"
    )
    return paths


def build_composite_from_result(result: AttackResult) -> np.ndarray:
    clean = restore_clean_pair(result)
    return build_composite(clean, result.adversarial)


def restore_clean_pair(result: AttackResult) -> ImagePair:
    """Invert the embedding: clean pixels are the adversarial ones off-mask.

    Only used for rendering; metric rows are computed from the true clean
    pair before it goes out of scope.
    """
    from .imagecore import disk_mask, embed_patch

    g = result.genome
    adv = result.adversarial
    mask = disk_mask(g.x, g.y, g.r, adv.width, adv.height)
    return ImagePair(
        visible=embed_patch(adv.visible, np.zeros_like(adv.visible), mask),
        infrared=embed_patch(adv.infrared, np.zeros_like(adv.infrared), mask),
    )


# ---------------------------------------------------------------------------
# batches


@dataclass
class BatchItemOutcome:
    name: str
    result: AttackResult


@dataclass
class BatchResult:
    config: AttackConfig
    outcomes: list[BatchItemOutcome]

    def adversarial_tables(self) -> list[MetricTable]:
        return [o.result.metrics_adversarial for o in self.outcomes]

    def clean_tables(self) -> list[MetricTable]:
        return [o.result.metrics_clean for o in self.outcomes]

    def mean_effectiveness(self) -> float:
        values = [t.game0 for t in self.adversarial_tables() if t.game0 is not None]
        if not values:
            raise ConfigError("no effectiveness values recorded")
        return float(np.mean(values))


def item_seed(base_seed: int, index: int) -> int:
    """Stable per-item engine seed derived from (base seed, item index)."""
    return int(np.random.SeedSequence((base_seed, index)).generate_state(1)[0])


def sample_items(names: Sequence[str], sample: int | None, seed: int) -> list[int]:
    """Deterministic without-replacement sample of item indices, name order kept."""
    if sample is None or sample >= len(names):
        return list(range(len(names)))
    if sample < 1:
        raise ConfigError("sample must be >= 1")
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(names), size=sample, replace=False)
    return sorted(int(i) for i in chosen)


def run_batch(
    items: Sequence[tuple[str, ImagePair, np.ndarray | None]],
    config: AttackConfig,
    pool_size: int = 1,
    model: Callable | None = None,
    sample: int | None = None,
) -> BatchResult:
    """Attack a set of pairs with per-item seeds; pool size never changes results."""
    if not items:
        raise ConfigError("empty batch")
    indices = sample_items([name for name, _, _ in items], sample, config.seed)
    model = _resolve_model(config, model)

    def attack_one(index: int) -> BatchItemOutcome:
        name, pair, points = items[index]
        per_item = replace(config, seed=item_seed(config.seed, index))
        result = run_attack(pair, per_item, model=model, gt_points=points)
        return BatchItemOutcome(name=name, result=result)

    if pool_size > 1:
        with ThreadPoolExecutor(max_workers=pool_size) as pool:
            outcomes = list(pool.map(attack_one, indices))
    else:
        outcomes = [attack_one(i) for i in indices]
    return BatchResult(config=config, outcomes=outcomes)


def aggregate_rows(tables: Sequence[MetricTable]) -> dict[str, tuple[float, float] | None]:
    """Per-column (mean, population std) over the tables, None when absent."""
    out: dict[str, tuple[float, float] | None] = {}
    for name in METRIC_COLUMNS:
        values = [getattr(t, name) for t in tables if getattr(t, name) is not None]
        if not values:
            out[name] = None
            continue
        arr = np.asarray(values, dtype=np.float64)
        if name in metrics_mod.PERCENT_COLUMNS:
            arr = arr * 100.0
        out[name] = (float(arr.mean()), float(arr.std()))
    return out


def _scalar_stats(values: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray(list(values), dtype=np.float64)
    return float(arr.mean()), float(arr.std())


def aggregate_csv_header(label: str = "label") -> str:
    cells = [label]
    for name in METRIC_COLUMNS:
        cells.append(f"{name}_mean")
        cells.append(f"{name}_std")
    for name in ("e_term", "s_term", "j"):
        cells.append(f"{name}_mean")
        cells.append(f"{name}_std")
    return ",".join(cells)


def aggregate_csv_row(
    label: str,
    tables: Sequence[MetricTable],
    reports: Sequence[fitness_mod.FitnessReport] | None = None,
) -> str:
    stats = aggregate_rows(tables)
    cells = [label]
    for name in METRIC_COLUMNS:
        if stats[name] is None:
            cells.extend(["", ""])
        else:
            mean, std = stats[name]
            cells.extend([format_metric_value(mean), format_metric_value(std)])
    if reports:
        for attr in ("e_term", "s_term", "j"):
            mean, std = _scalar_stats([getattr(r, attr) for r in reports])
            cells.extend([format_metric_value(mean), format_metric_value(std)])
    else:
        cells.extend([""] * 6)
    return ",".join(cells)


def per_item_csv(batch: BatchResult) -> str:
    header = metric_csv_header("item") + "," + ",".join(REPORT_EXTRA_COLUMNS)
    lines = [header]
    for outcome in batch.outcomes:
        row = metric_csv_row(outcome.name, outcome.result.metrics_adversarial)
        extras = [
            format_metric_value(outcome.result.report.e_term),
            format_metric_value(outcome.result.report.s_term),
            format_metric_value(outcome.result.report.j),
            str(outcome.result.stop_generation),
            outcome.result.stop_reason,
        ]
        lines.append(row + "," + ",".join(extras))
    return "\n".join(lines) + "\n"


def aggregate_csv(batch: BatchResult) -> str:
    lines = [
        aggregate_csv_header(),
        aggregate_csv_row("clean", batch.clean_tables()),
        aggregate_csv_row(
            "adversarial",
            batch.adversarial_tables(),
            [o.result.report for o in batch.outcomes],
        ),
    ]
    return "\n".join(lines) + "\n"


def save_batch_result(batch: BatchResult, out_dir: str | Path, sources: dict[str, tuple[str, str, str | None]] | None = None) -> None:
    """Write batch CSVs plus per-item artifacts needed to re-evaluate later."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "per_item.csv").write_text(per_item_csv(batch))
    (out / "aggregate.csv").write_text(aggregate_csv(batch))
    (out / "config.txt").write_text(batch.config.snapshot())
    items_dir = out / "items"
    for outcome in batch.outcomes:
        item_dir = items_dir / outcome.name
        item_dir.mkdir(parents=True, exist_ok=True)
        save_image(outcome.result.adversarial.visible, item_dir / "adversarial_visible.png")
        save_image(outcome.result.adversarial.infrared, item_dir / "adversarial_infrared.png")
        (item_dir / "genome.txt").write_text(genome_to_record(outcome.result.genome) + "\n")
        if sources and outcome.name in sources:
            vis, inf, pts = sources[outcome.name]
            lines = [f"visible={vis}", f"infrared={inf}"]
            if pts is not None:
                lines.append(f"points={pts}")
            (item_dir / "sources.txt").write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# parameter sweeps

SWEEP_PARAMETERS = ("radius", "colors", "alpha")


def sweep_variant(config: AttackConfig, parameter: str, value: float) -> AttackConfig:
    if parameter == "radius":
        return replace(config, radius=int(value))
    if parameter == "colors":
        return replace(config, n_colors=int(value))
    if parameter == "alpha":
        return replace(config, alpha=float(value))
    raise ConfigError(f"unknown sweep parameter {parameter!r}; expected one of {SWEEP_PARAMETERS}")


def run_sweep(
    items: Sequence[tuple[str, ImagePair, np.ndarray | None]],
    config: AttackConfig,
    parameter: str,
    values: Sequence[float],
    pool_size: int = 1,
    model: Callable | None = None,
    sample: int | None = None,
) -> list[tuple[float, BatchResult]]:
    """Repeat the batch once per parameter value."""
    if not values:
        raise ConfigError("sweep needs at least one value")
    results = []
    for value in values:
        variant = sweep_variant(config, parameter, value)
        results.append((value, run_batch(items, variant, pool_size, model, sample)))
    return results


def sweep_csv(parameter: str, results: Sequence[tuple[float, BatchResult]]) -> str:
    lines = [aggregate_csv_header(parameter)]
    for value, batch in results:
        label = repr(int(value)) if parameter in ("radius", "colors") else repr(float(value))
        lines.append(
            aggregate_csv_row(
                label,
                batch.adversarial_tables(),
                [o.result.report for o in batch.outcomes],
            )
        )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# defense evaluation


@dataclass
class DefenseEvaluation:
    """Per-defense metric tables plus optional detector calibration results."""

    defense_tables: list[tuple[str, list[MetricTable]]]
    detector: tuple[float, int, int] | None = None

    @property
    def detection_rate(self) -> float | None:
        if self.detector is None:
            return None
        _, flagged, total = self.detector
        return flagged / total if total else 0.0


def run_defend(
    items: Sequence[tuple[str, ImagePair, np.ndarray | None, ImagePair]],
    defenses: Sequence[DefenseConfig],
    config: AttackConfig,
    model: Callable | None = None,
    detector_quantile: float = 0.95,
    density_sigma: float = 4.0,
) -> DefenseEvaluation:
    """Re-evaluate attacked pairs under each defense.

    Items carry (name, clean pair, gt points, adversarial pair). Image
    defenses preprocess the attacked pair and re-query the model; the MSE
    detector is calibrated on the clean items at the given quantile of
    prediction-vs-annotation MSE, then applied to the attacked items.
    """
    if not items:
        raise ConfigError("empty defense evaluation")
    model = _resolve_model(config, model)
    contexts = [
        EvaluationContext(clean, model, config.task, points, num_classes=config.num_classes)
        for _, clean, points, _ in items
    ]
    image_defenses = [d for d in defenses if d.kind in ("none", "jpeg", "median")]
    detector_configs = [d for d in defenses if d.kind == "mse_detector"]
    defense_tables: list[tuple[str, list[MetricTable]]] = []
    for defense in image_defenses:
        tables = []
        for (name, clean, points, adversarial), context in zip(items, contexts):
            defended = apply_defense(adversarial, defense)
            tables.append(context.metrics_for(defended))
        defense_tables.append((defense.describe(), tables))

    detector = None
    if detector_configs:
        if config.task != "counting":
            raise ConfigError("the MSE detector is defined over counting density maps")
        clean_mses = []
        attacked_mses = []
        for (name, clean, points, adversarial), context in zip(items, contexts):
            if points is None:
                raise ConfigError(f"item {name} has no point annotations for the detector")
            gt_density = render_point_density(points, clean.dims, sigma=density_sigma)
            _, clean_density = context.clean_prediction
            _, adv_density = model(adversarial)
            if clean_density is None or adv_density is None:
                raise ConfigError("the MSE detector needs a density-producing model")
            clean_mses.append(float(np.mean((clean_density - gt_density) ** 2)))
            attacked_mses.append(float(np.mean((adv_density - gt_density) ** 2)))
        base = detector_configs[0]
        threshold = (
            base.mse_threshold
            if base.mse_threshold is not None
            else detection_threshold(np.asarray(clean_mses), detector_quantile)
        )
        flagged = sum(1 for m in attacked_mses if mse_detect_scalar(m, threshold))
        detector = (float(threshold), flagged, len(attacked_mses))
    return DefenseEvaluation(defense_tables=defense_tables, detector=detector)


def mse_detect_scalar(mse: float, threshold: float) -> bool:
    return mse > threshold


def defense_csv(evaluation: DefenseEvaluation) -> str:
    lines = [aggregate_csv_header("defense")]
    for label, tables in evaluation.defense_tables:
        lines.append(aggregate_csv_row(label, tables))
    return "\n".join(lines) + "\n"


def detector_csv(evaluation: DefenseEvaluation) -> str:
    if evaluation.detector is None:
        raise ConfigError("no detector was evaluated")
    threshold, flagged, total = evaluation.detector
    rate = flagged / total if total else 0.0
    return (
        "threshold,flagged,total,detection_rate\n"
        f"{format_metric_value(threshold)},{flagged},{total},{format_metric_value(rate)}\n"
    )


def load_batch_items(
    batch_dir: str | Path,
) -> list[tuple[str, ImagePair, np.ndarray | None, ImagePair]]:
    """Reload (name, clean, points, adversarial) items from a saved batch.

    Adversarial pairs come back 8-bit quantized; defense evaluation runs on
    stored artifacts exactly as an external auditor would see them.
    """
    from .fixtures import load_points

    batch_dir = Path(batch_dir)
    items_dir = batch_dir / "items"
    if not items_dir.is_dir():
        raise ConfigError(f"{batch_dir} does not contain an items/ directory")
    loaded = []
    for item_dir in sorted(p for p in items_dir.iterdir() if p.is_dir()):
        sources_file = item_dir / "sources.txt"
        if not sources_file.exists():
            raise ConfigError(f"{item_dir} has no sources.txt; re-run the batch with source tracking")
        sources = dict(
            line.split("=", 1) for line in sources_file.read_text().splitlines() if line
        )
        clean = load_pair(sources["visible"], sources["infrared"])
        points = load_points(sources["points"]) if "points" in sources else None
        adversarial = load_pair(
            item_dir / "adversarial_visible.png", item_dir / "adversarial_infrared.png"
        )
        loaded.append((item_dir.name, clean, points, adversarial))
    return loaded
