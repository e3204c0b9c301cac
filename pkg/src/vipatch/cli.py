"""Command-line entry point.

Verbs: attack (one pair), batch (a directory of pairs), sweep (batch per
parameter value), defend (re-evaluate a saved batch under defenses), and
fixtures (generate synthetic pairs). A flat key=value config file can seed
any verb's options; command-line flags win over file values. Exit codes: 0
success, 2 configuration, 3 file I/O, 4 wire protocol, 5 target model.
"""

from __future__ import annotations

import argparse
import shlex
import sys
from pathlib import Path

from .attack import (
    ABLATIONS,
    SWEEP_PARAMETERS,
    AttackConfig,
    defense_csv,
    detector_csv,
    load_batch_items,
    run_attack,
    run_batch,
    run_defend,
    run_sweep,
    save_attack_result,
    save_batch_result,
    sweep_csv,
)
from .defenses import DefenseConfig
from .errors import (
    ConfigError,
    ImageFormatError,
    OracleError,
    ProtocolError,
    VipatchError,
)
from .fixtures import FixtureLayout, load_fixture_dir, load_points, write_fixture_dir
from .imagecore import load_pair
from .patchcodec import CompressionParams
from .targets import RemoteEndpoint, SurrogateCountingParams, TargetKind

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_PROTOCOL = 4
EXIT_ORACLE = 5


def parse_endpoint(text: str, timeout_ms: int = 10000, max_in_flight: int = 1) -> RemoteEndpoint:
    """Endpoint syntax: "cmd:<command line>" or "tcp:<host>:<port>"."""
    if text.startswith("cmd:"):
        command = shlex.split(text[len("cmd:") :])
        if not command:
            raise ConfigError("empty endpoint command line")
        return RemoteEndpoint(
            transport="subprocess",
            command=tuple(command),
            timeout_ms=timeout_ms,
            max_in_flight=max_in_flight,
        )
    if text.startswith("tcp:"):
        return RemoteEndpoint(
            transport="tcp",
            address=text[len("tcp:") :],
            timeout_ms=timeout_ms,
            max_in_flight=max_in_flight,
        )
    raise ConfigError(f"endpoint must start with cmd: or tcp:, got {text!r}")


def parse_config_file(path: str | Path) -> dict[str, str]:
    """Flat key=value lines; blank lines and # comments ignored."""
    values: dict[str, str] = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


# Maps config-file keys to argparse destinations, shared by all verbs.
CONFIG_KEYS = {
    "task": ("task", str),
    "target": ("target", str),
    "endpoint": ("endpoint", str),
    "timeout_ms": ("timeout_ms", int),
    "radius": ("radius", int),
    "colors": ("colors", int),
    "alpha": ("alpha", float),
    "pop": ("pop", int),
    "gens": ("gens", int),
    "patience": ("patience", int),
    "scale_factor": ("scale_factor", float),
    "crossover_rate": ("crossover_rate", float),
    "seed": ("seed", int),
    "ablation": ("ablation", str),
    "beta": ("beta", float),
    "gamma": ("gamma", float),
    "optimize_radius": ("optimize_radius", lambda v: v.lower() in ("true", "1", "yes")),
    "radius_range": ("radius_range", str),
    "success_j": ("success_j", float),
    "workers": ("workers", int),
    "pool": ("pool", int),
    "sample": ("sample", int),
    "num_classes": ("num_classes", int),
    "blur_sigma": ("blur_sigma", float),
    "threshold": ("threshold", float),
    "min_area": ("min_area", int),
    "out": ("out", str),
}


def _add_attack_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key=value config file; flags override it")
    parser.add_argument("--task", choices=("counting", "segmentation", "fusion"), default="counting")
    parser.add_argument("--target", choices=[k.value for k in TargetKind], default=None)
    parser.add_argument("--endpoint", help="remote model endpoint: cmd:<argv> or tcp:host:port")
    parser.add_argument("--timeout-ms", dest="timeout_ms", type=int, default=10000)
    parser.add_argument("--radius", type=int, default=None, help="patch radius in pixels")
    parser.add_argument("--colors", type=int, default=None, help="patch color count")
    parser.add_argument("--alpha", type=float, default=1.0)
    parser.add_argument("--pop", type=int, default=30, help="population size")
    parser.add_argument("--gens", type=int, default=200, help="generation budget")
    parser.add_argument("--patience", type=int, default=10)
    parser.add_argument("--scale-factor", dest="scale_factor", type=float, default=0.7)
    parser.add_argument("--crossover-rate", dest="crossover_rate", type=float, default=0.9)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--ablation", choices=ABLATIONS, default="full")
    parser.add_argument("--beta", type=float, default=0.5, help="infrared compression slope")
    parser.add_argument("--gamma", type=float, default=0.25, help="infrared compression offset")
    parser.add_argument("--optimize-radius", dest="optimize_radius", action="store_true")
    parser.add_argument("--radius-range", dest="radius_range", help="lo:hi when optimizing radius")
    parser.add_argument("--success-j", dest="success_j", type=float, default=None)
    parser.add_argument("--workers", type=int, default=1, help="fitness evaluation threads")
    parser.add_argument("--num-classes", dest="num_classes", type=int, default=4)
    parser.add_argument("--blur-sigma", dest="blur_sigma", type=float, default=2.0)
    parser.add_argument("--threshold", type=float, default=0.6)
    parser.add_argument("--min-area", dest="min_area", type=int, default=9)
    parser.add_argument("--out", default="vipatch_out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vipatch",
        description="Black-box adversarial patches for visible-infrared image pairs",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    p_attack = sub.add_parser("attack", help="attack one visible/infrared pair")
    p_attack.add_argument("visible", help="visible RGB PNG")
    p_attack.add_argument("infrared", help="infrared grayscale PNG")
    p_attack.add_argument("--points", help="optional x,y annotation CSV")
    _add_attack_flags(p_attack)

    p_batch = sub.add_parser("batch", help="attack every pair in a directory")
    p_batch.add_argument("directory", help="directory of *_visible.png / *_infrared.png pairs")
    p_batch.add_argument("--sample", type=int, default=None, help="attack a seeded subsample")
    p_batch.add_argument("--pool", type=int, default=1, help="batch worker pool size")
    _add_attack_flags(p_batch)

    p_sweep = sub.add_parser("sweep", help="repeat a batch per parameter value")
    p_sweep.add_argument("directory")
    p_sweep.add_argument("--parameter", choices=SWEEP_PARAMETERS, required=True)
    p_sweep.add_argument("--values", required=True, help="comma-separated values")
    p_sweep.add_argument("--sample", type=int, default=None)
    p_sweep.add_argument("--pool", type=int, default=1)
    _add_attack_flags(p_sweep)

    p_defend = sub.add_parser("defend", help="re-evaluate a saved batch under defenses")
    p_defend.add_argument("batch_dir", help="directory written by the batch verb")
    p_defend.add_argument(
        "--defenses",
        default="none,jpeg:75,median:3,mse",
        help="comma list: none | jpeg[:q] | median[:k] | mse[:threshold]",
    )
    p_defend.add_argument("--quantile", type=float, default=0.95)
    _add_attack_flags(p_defend)

    p_fix = sub.add_parser("fixtures", help="generate synthetic annotated pairs")
    p_fix.add_argument("directory")
    p_fix.add_argument("--count", type=int, default=20)
    p_fix.add_argument("--seed", type=int, default=0)
    p_fix.add_argument("--width", type=int, default=224)
    p_fix.add_argument("--height", type=int, default=176)
    return parser


def _apply_config_file(args: argparse.Namespace, argv: list[str]) -> argparse.Namespace:
    if not getattr(args, "config", None):
        return args
    file_values = parse_config_file(args.config)
    explicit = _explicit_flags(argv)
    for key, raw in file_values.items():
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        dest, convert = CONFIG_KEYS[key]
        if not hasattr(args, dest) or dest in explicit:
            continue
        try:
            setattr(args, dest, convert(raw))
        except ValueError as exc:
            raise ConfigError(f"config key {key}={raw!r}: {exc}") from exc
    return args


def _explicit_flags(argv: list[str]) -> set[str]:
    """Destinations the user set on the command line (so they beat the file)."""
    explicit = set()
    for token in argv:
        if token.startswith("--"):
            name = token[2:].split("=", 1)[0].replace("-", "_")
            explicit.add(name)
    return explicit


def _attack_config(args: argparse.Namespace) -> AttackConfig:
    endpoint = None
    target = args.target
    if args.endpoint:
        endpoint = parse_endpoint(args.endpoint, args.timeout_ms)
        target = TargetKind.REMOTE.value
    radius_range = None
    if args.radius_range:
        lo, _, hi = args.radius_range.partition(":")
        try:
            radius_range = (int(lo), int(hi))
        except ValueError as exc:
            raise ConfigError(f"radius range must be lo:hi, got {args.radius_range!r}") from exc
    return AttackConfig(
        task=args.task,
        target=target,
        endpoint=endpoint,
        radius=args.radius,
        n_colors=args.colors,
        alpha=args.alpha,
        population_size=args.pop,
        max_generations=args.gens,
        stagnation_patience=args.patience,
        scale_factor=args.scale_factor,
        crossover_rate=args.crossover_rate,
        seed=args.seed,
        ablation=args.ablation,
        compression=CompressionParams(beta=args.beta, gamma=args.gamma),
        optimize_radius=args.optimize_radius,
        radius_range=radius_range,
        counting_params=SurrogateCountingParams(
            blur_sigma=args.blur_sigma, threshold=args.threshold, min_area=args.min_area
        ),
        num_classes=args.num_classes,
        success_j=args.success_j,
        workers=args.workers,
    )


def parse_defense_list(text: str) -> list[DefenseConfig]:
    defenses = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        name, _, arg = token.partition(":")
        if name == "none":
            defenses.append(DefenseConfig(kind="none"))
        elif name == "jpeg":
            defenses.append(DefenseConfig(kind="jpeg", jpeg_quality=int(arg) if arg else 75))
        elif name == "median":
            defenses.append(DefenseConfig(kind="median", median_kernel=int(arg) if arg else 3))
        elif name == "mse":
            # No argument means the threshold is calibrated from clean data.
            defenses.append(
                DefenseConfig(kind="mse_detector", mse_threshold=float(arg) if arg else None)
            )
        else:
            raise ConfigError(f"unknown defense {name!r}")
    if not defenses:
        raise ConfigError("empty defense list")
    return defenses


def cmd_attack(args: argparse.Namespace) -> int:
    config = _attack_config(args)
    pair = load_pair(args.visible, args.infrared)
    points = load_points(args.points) if args.points else None
    result = run_attack(pair, config, gt_points=points)
    paths = save_attack_result(result, args.out)
    print(f"task={config.task} ablation={config.ablation} seed={config.seed}")
    print(
        f"e={result.report.e_term:.6g} s={result.report.s_term:.6g} "
        f"j={result.report.j:.6g} stop={result.stop_generation} ({result.stop_reason})"
    )
    print(f"artifacts: {Path(args.out).resolve()}")
    for key in ("visible", "infrared", "metrics", "trajectory"):
        print(f"  {key}: {paths[key].name}")
    return EXIT_OK


def cmd_batch(args: argparse.Namespace) -> int:
    config = _attack_config(args)
    items = load_fixture_dir(args.directory)
    batch = run_batch(items, config, pool_size=args.pool, sample=args.sample)
    directory = Path(args.directory)
    sources = {}
    for name, _, _ in items:
        pts = directory / f"{name}_points.csv"
        sources[name] = (
            str(directory / f"{name}_visible.png"),
            str(directory / f"{name}_infrared.png"),
            str(pts) if pts.exists() else None,
        )
    save_batch_result(batch, args.out, sources)
    print(f"batch: {len(batch.outcomes)} pairs, task={config.task}, ablation={config.ablation}")
    mean_e = sum(o.result.report.e_term for o in batch.outcomes) / len(batch.outcomes)
    print(f"mean effectiveness term: {mean_e:.6g}")
    print(f"reports: {Path(args.out).resolve()}/aggregate.csv")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    config = _attack_config(args)
    items = load_fixture_dir(args.directory)
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"sweep values must be numeric, got {args.values!r}") from exc
    results = run_sweep(items, config, args.parameter, values, pool_size=args.pool, sample=args.sample)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep.csv").write_text(sweep_csv(args.parameter, results))
    for value, batch in results:
        tag = f"{args.parameter}_{value:g}"
        save_batch_result(batch, out / tag)
    print(f"sweep over {args.parameter}: {len(results)} values")
    print(f"report: {out.resolve()}/sweep.csv")
    return EXIT_OK


def cmd_defend(args: argparse.Namespace) -> int:
    config = _attack_config(args)
    defenses = parse_defense_list(args.defenses)
    items = load_batch_items(args.batch_dir)
    evaluation = run_defend(items, defenses, config, detector_quantile=args.quantile)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "defense_report.csv").write_text(defense_csv(evaluation))
    print(f"defenses evaluated on {len(items)} attacked pairs")
    if evaluation.detector is not None:
        (out / "detector_report.csv").write_text(detector_csv(evaluation))
        threshold, flagged, total = evaluation.detector
        print(f"detector: threshold={threshold:.6g}, flagged {flagged}/{total}")
    print(f"reports: {out.resolve()}")
    return EXIT_OK


def cmd_fixtures(args: argparse.Namespace) -> int:
    layout = FixtureLayout(width=args.width, height=args.height)
    written = write_fixture_dir(args.directory, args.count, args.seed, layout)
    print(f"wrote {len(written)} fixture pairs to {Path(args.directory).resolve()}")
    return EXIT_OK


VERBS = {
    "attack": cmd_attack,
    "batch": cmd_batch,
    "sweep": cmd_sweep,
    "defend": cmd_defend,
    "fixtures": cmd_fixtures,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args = _apply_config_file(args, argv)
        return VERBS[args.verb](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ProtocolError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL
    except OracleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    except ImageFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except VipatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
