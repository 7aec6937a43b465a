"""Main CLI entry point for ghostkit."""

import json
import logging
import math
from contextlib import nullcontext
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import click
import numpy as np
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from ghostkit import __version__
from ghostkit.acquisition.noise import noise_fluctuation_ratio
from ghostkit.algorithms.crossval import cross_validate_lambda
from ghostkit.algorithms.engines import Method, reconstruct
from ghostkit.algorithms.training import TrainConfig
from ghostkit.errors import ComputationError, ConfigError, ContainerError
from ghostkit.experiments.dose import TOLERANCES, dose_study
from ghostkit.experiments.runner import score_report
from ghostkit.experiments.spec import ExperimentSpec, MethodSettings, resolve_configs
from ghostkit.experiments.sweep import noise_sweep
from ghostkit.io.container import read_container, write_container
from ghostkit.io.dataset import load_acquisition, save_acquisition, save_model
from ghostkit.io.images import read_pgm, write_pgm, write_png
from ghostkit.io.reports import RunManifest, to_jsonable, trace_rows, write_csv, write_json
from ghostkit.models.config import ModelConfig, ModelKind
from ghostkit.parallel import THREADS_ENV, resolve_workers
from ghostkit.scoring.metrics import QualityScorer
from ghostkit.solvers.variational import VariationalConfig
from ghostkit.tensor.tape import Precision, precision

EXIT_COMPUTATION = 1
EXIT_USAGE = 2

console = Console()
logger = logging.getLogger("ghostkit")

METHOD_CHOICES = [m.value for m in Method]
REGULARIZED_CHOICES = [m.value for m in Method if m.regularized]


def configure_logging(verbose: bool, quiet: bool) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
    handler = RichHandler(console=Console(stderr=True), show_path=False, markup=False)
    handler.setFormatter(logging.Formatter("%(message)s", datefmt="[%X]"))
    logger.addHandler(handler)
    logger.setLevel(level)


class GhostkitGroup(click.Group):
    """Command group mapping library errors onto exit codes."""

    def invoke(self, ctx: click.Context) -> Any:
        try:
            return super().invoke(ctx)
        except ComputationError as exc:
            console.print(f"[red]Computation failed:[/red] {exc}")
            ctx.exit(EXIT_COMPUTATION)
        except (ConfigError, ContainerError, OSError) as exc:
            console.print(f"[red]Error:[/red] {exc}")
            ctx.exit(EXIT_USAGE)


def training_options(with_lam: bool = True) -> Callable[[Callable[..., Any]], Callable[..., Any]]:
    """Options shared by every command that runs reconstruction methods."""
    options = [
        click.option("--model", type=click.Choice([k.value for k in ModelKind]), default=ModelKind.UNET.value,
                     show_default=True, help="Network for the learned methods (inr always uses the inr model)."),
        click.option("--features", type=click.IntRange(min=1), default=20, show_default=True,
                     help="U-Net base feature count."),
        click.option("--epochs", type=click.IntRange(min=0), default=None,
                     help="Training epochs (default 5000 for CNNs, 7000 for the INR)."),
        click.option("--lr", type=float, default=3e-4, show_default=True, help="Adam learning rate."),
        click.option("--splits", "-K", type=click.IntRange(min=2), default=4, show_default=True,
                     help="Realization splits for n2g / n2i."),
        click.option("--perms", "-P", type=click.IntRange(min=1), default=1, show_default=True,
                     help="Random permutations of the splits."),
        click.option("--cv-fraction", type=float, default=0.1, show_default=True,
                     help="Fraction of realizations put aside for early stopping."),
        click.option("--cv-repeats", type=click.IntRange(min=1), default=3, show_default=True,
                     help="Put-aside splits averaged by cross-validation."),
        click.option("--checkpoint-every", type=click.IntRange(min=1), default=50, show_default=True,
                     help="Epochs between cross-validation checkpoints."),
        click.option("--tv-iterations", type=click.IntRange(min=1), default=500, show_default=True,
                     help="Primal-dual iterations of the tv method."),
        click.option("--timeout", type=float, default=None, help="Training time limit in seconds."),
        click.option("--train-seed", type=int, default=0, show_default=True,
                     help="Seed of network initialization, splits and put-aside sets."),
        click.option("--precision", "precision_name", type=click.Choice([p.value for p in Precision]),
                     default=Precision.FLOAT32.value, show_default=True, help="Tensor precision."),
    ]
    if with_lam:
        options.append(click.option("--lam", type=click.FloatRange(min=0), default=None,
                                    help="TV weight (default 1e-5 for networks, 1e-2 for tv)."))

    def decorator(fn: Callable[..., Any]) -> Callable[..., Any]:
        for option in reversed(options):
            fn = option(fn)
        return fn

    return decorator


def threads_option(fn: Callable[..., Any]) -> Callable[..., Any]:
    return click.option("--threads", type=int, default=1, envvar=THREADS_ENV, show_default=True,
                        help=f"Worker threads (or set {THREADS_ENV}).")(fn)


def _build_configs(options: Dict[str, Any]) -> Tuple[ModelConfig, TrainConfig, VariationalConfig]:
    """Shared model, training and TV configs from the training options."""
    model = ModelConfig(kind=options["model"], features=options["features"], seed=options["train_seed"])
    overrides: Dict[str, Any] = {
        "lr": options["lr"],
        "K": options["splits"],
        "P": options["perms"],
        "cv_fraction": options["cv_fraction"],
        "cv_repeats": options["cv_repeats"],
        "checkpoint_every": options["checkpoint_every"],
        "timeout_seconds": options["timeout"],
        "seed": options["train_seed"],
    }
    if options["epochs"] is not None:
        overrides["epochs"] = options["epochs"]
    variational: Dict[str, Any] = {"iterations": options["tv_iterations"]}
    if options.get("lam") is not None:
        overrides["lam"] = options["lam"]
        variational["lam"] = options["lam"]
    return model, TrainConfig(**overrides), VariationalConfig(**variational)


def _finish(ctx: click.Context, output: Path, written: Sequence[Path], extras: Optional[Dict[str, Any]] = None) -> None:
    """Write the run manifest recording parameters and output hashes."""
    manifest = RunManifest.start(ctx.command.name or "", ctx.params)
    manifest.record(written, output)
    manifest.extras = extras or {}
    manifest.write(output)
    logger.info("wrote %d files and manifest.json to %s", len(written), output)


def _load_image(path: Path) -> np.ndarray:
    if path.suffix.lower() == ".pgm":
        return read_pgm(path)
    if path.suffix.lower() == ".gitk":
        image, _ = read_container(path)
        if image.ndim != 2:
            raise ConfigError(f"{path} holds a {image.ndim}-dimensional array, expected an image")
        return image.astype(np.float64)
    raise ConfigError(f"unsupported image format '{path.suffix}' (use .gitk or .pgm)")


def _format(value: Any, digits: int = 4) -> str:
    if isinstance(value, float):
        return f"{value:.{digits}g}" if math.isfinite(value) else str(value)
    return str(value)


def _metrics_table(title: str, metrics: Dict[str, Any]) -> Table:
    table = Table(title=title)
    table.add_column("Metric", style="cyan")
    table.add_column("Value", justify="right", style="magenta")
    for name, value in metrics.items():
        table.add_row(name, _format(value))
    return table


@click.group(cls=GhostkitGroup)
@click.version_option(version=__version__)
@click.option("--verbose", "-v", is_flag=True, help="Enable verbose output with progress information.")
@click.option("--quiet", "-q", is_flag=True, help="Suppress non-essential output.")
@click.pass_context
def cli(ctx: click.Context, verbose: bool, quiet: bool) -> None:
    """Simulate ghost-imaging acquisitions and reconstruct them.

    \b
    # Simulate a dataset and reconstruct it
    ghostkit generate --phantom blobs --size 64 --masks 800 --photons 100 -o data
    ghostkit reconstruct data --method n2g --splits 4 --perms 6 -o n2g
    ghostkit evaluate n2g/recon.gitk data/phantom.gitk
    """
    ctx.ensure_object(dict)
    ctx.obj["quiet"] = quiet
    configure_logging(verbose, quiet)


@cli.command()
@click.option("--phantom", default="blobs", show_default=True,
              help="Phantom kind (flat, disks, blobs) or a grayscale image file.")
@click.option("--size", type=click.IntRange(min=1), default=64, show_default=True, help="Image side in pixels.")
@click.option("--masks", "M", type=click.IntRange(min=1), default=410, show_default=True,
              help="Number of realizations.")
@click.option("--photons", type=float, default=100.0, show_default=True,
              help="Photon constant C; 'inf' gives noiseless buckets.")
@click.option("--seed", type=int, default=0, show_default=True, help="Seed of phantom, masks and noise.")
@click.option("--output", "-o", type=click.Path(file_okay=False, path_type=Path), default=Path("dataset"),
              show_default=True, help="Dataset directory.")
@click.pass_context
def generate(ctx: click.Context, phantom: str, size: int, M: int, photons: float, seed: int, output: Path) -> None:
    """Simulate a phantom, masks and clean and noisy buckets."""
    spec = ExperimentSpec(phantom=phantom, height=size, width=size, M=M, photons=(photons,), seed=seed)
    acquisition = spec.acquire(spec.load_phantom(), photons)
    written = save_acquisition(output, acquisition)

    if not ctx.obj["quiet"]:
        buckets = acquisition.buckets
        console.print(_metrics_table("Acquisition", {
            "pixels": size * size,
            "realizations": M,
            "compression": acquisition.compression,
            "photons": photons,
            "noise / fluctuation (%)": noise_fluctuation_ratio(buckets.clean, buckets.values),
        }))
    _finish(ctx, output, written)


@cli.command("reconstruct")
@click.argument("dataset", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--method", "-m", type=click.Choice(METHOD_CHOICES), required=True, help="Reconstruction method.")
@training_options()
@click.option("--cv-repeat", type=click.IntRange(min=0), default=0, show_default=True,
              help="Which put-aside split the learned methods use.")
@click.option("--save-model", "keep_model", is_flag=True, help="Also store the selected network parameters.")
@click.option("--png", is_flag=True, help="Also write an 8-bit PNG preview.")
@click.option("--json", "output_json", is_flag=True, help="Print the report as JSON.")
@click.option("--output", "-o", type=click.Path(file_okay=False, path_type=Path), default=Path("recon"),
              show_default=True, help="Output directory.")
@click.pass_context
def reconstruct_command(
    ctx: click.Context,
    dataset: Path,
    method: str,
    cv_repeat: int,
    keep_model: bool,
    png: bool,
    output_json: bool,
    output: Path,
    **options: Any,
) -> None:
    """Reconstruct a dataset with one method."""
    acquisition = load_acquisition(dataset)
    model, train, variational = _build_configs(options)
    model, train, variational = resolve_configs(MethodSettings(Method(method), model=model), train, variational)
    show_status = Method(method).learned and not ctx.obj["quiet"]
    status = console.status(f"[bold green]Training {method}...") if show_status else nullcontext()
    with precision(options["precision_name"]), status:
        report = reconstruct(method, acquisition.masks, acquisition.buckets, model, train, variational, cv_repeat)
    if acquisition.phantom is not None:
        score_report(report, acquisition.phantom)

    written = [write_container(output / "recon.gitk", report.image, {"method": method})]
    pgm = output / "recon.pgm"
    scale = write_pgm(pgm, report.image)
    written.append(pgm)
    if png:
        written.append(output / "recon.png")
        write_png(written[-1], report.image)
    payload = report.to_dict(timing=False)
    payload["pgm_scale"] = scale.to_dict()
    written.append(write_json(output / "report.json", payload))
    if report.trace is not None:
        written.append(write_csv(output / "trace.csv", trace_rows(report.trace)))
    if keep_model and report.model is not None:
        written.append(save_model(output / "model.gitk", report.model))

    if output_json:
        console.print(json.dumps(to_jsonable(payload), indent=2, sort_keys=True))
    elif not ctx.obj["quiet"]:
        summary: Dict[str, Any] = dict(report.metrics)
        if report.trace is not None:
            summary.update({
                "epochs": report.trace.epochs,
                "best epoch": report.trace.best_epoch,
                "best cv loss": report.trace.best_cv_loss,
                "wall time (s)": report.trace.wall_time,
            })
        console.print(_metrics_table(f"{method} reconstruction", summary))
    _finish(ctx, output, written, {"pgm_scale": scale.to_dict()})


@cli.command()
@click.argument("image", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.argument("reference", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--hann", is_flag=True, help="Apodize both images before the ring correlation.")
@click.option("--json", "output_json", is_flag=True, help="Print the metrics as JSON.")
@click.option("--output", "-o", type=click.Path(file_okay=False, path_type=Path), default=Path("evaluation"),
              show_default=True, help="Output directory.")
@click.pass_context
def evaluate(ctx: click.Context, image: Path, reference: Path, hann: bool, output_json: bool, output: Path) -> None:
    """Score a reconstruction against a reference image."""
    bundle = QualityScorer(hann=hann).score(_load_image(image), _load_image(reference))
    metrics = bundle.to_dict()
    written = [write_json(output / "metrics.json", metrics)]
    if bundle.frc is not None:
        written.append(write_csv(output / "frc.csv", bundle.frc.rows()))
    if output_json:
        console.print(json.dumps(to_jsonable(metrics), indent=2, sort_keys=True))
    elif not ctx.obj["quiet"]:
        console.print(_metrics_table("Quality", metrics))
    _finish(ctx, output, written)


def _methods_settings(methods: Sequence[str], model: ModelConfig) -> Tuple[MethodSettings, ...]:
    return tuple(MethodSettings(Method(m), model=model) for m in methods)


@cli.command()
@click.option("--phantom", default="blobs", show_default=True, help="Phantom kind or image file.")
@click.option("--size", type=click.IntRange(min=1), default=32, show_default=True, help="Image side in pixels.")
@click.option("--masks", "M", type=click.IntRange(min=1), default=205, show_default=True,
              help="Number of realizations.")
@click.option("--photons", type=float, multiple=True, default=(1.0, 10.0, 100.0), show_default=True,
              help="Photon constants to sweep (repeat the option).")
@click.option("--methods", type=click.Choice(METHOD_CHOICES), multiple=True, default=("ls", "tv"),
              show_default=True, help="Methods to compare (repeat the option).")
@click.option("--repeats", type=click.IntRange(min=1), default=5, show_default=True,
              help="Realization sets per photon level.")
@click.option("--seed", type=int, default=0, show_default=True)
@training_options()
@threads_option
@click.option("--output", "-o", type=click.Path(file_okay=False, path_type=Path), default=Path("sweep"),
              show_default=True, help="Output directory.")
@click.pass_context
def sweep(
    ctx: click.Context,
    phantom: str,
    size: int,
    M: int,
    photons: Tuple[float, ...],
    methods: Tuple[str, ...],
    repeats: int,
    seed: int,
    threads: int,
    output: Path,
    **options: Any,
) -> None:
    """Noise-level sweep: mean and std of PSNR, SSIM and resolution per method."""
    model, train, variational = _build_configs(options)
    spec = ExperimentSpec(
        phantom=phantom, height=size, width=size, M=M, photons=photons,
        methods=_methods_settings(methods, model), repeats=repeats, seed=seed,
        output_dir=output, train=train, variational=variational,
    )
    with precision(options["precision_name"]):
        result = noise_sweep(spec, workers=resolve_workers(threads))
    rows = result.rows()
    written = [write_csv(output / "sweep.csv", rows), write_json(output / "sweep.json", {"rows": rows})]

    if not ctx.obj["quiet"]:
        table = Table(title="Noise sweep")
        for column in ("method", "photons", "PSNR", "SSIM", "resolution"):
            table.add_column(column, justify="right" if column != "method" else "left")
        for point in result.points:
            table.add_row(
                point.method,
                _format(point.photons),
                f"{_format(point.mean('psnr'))} ± {_format(point.std('psnr'), 2)}",
                f"{_format(point.mean('ssim'))} ± {_format(point.std('ssim'), 2)}",
                f"{_format(point.mean('resolution'))} ± {_format(point.std('resolution'), 2)}",
            )
        console.print(table)
    _finish(ctx, output, written)


@cli.command()
@click.option("--phantom", default="blobs", show_default=True, help="Phantom kind or image file.")
@click.option("--size", type=click.IntRange(min=1), default=32, show_default=True, help="Image side in pixels.")
@click.option("--masks", "M", type=click.IntRange(min=1), default=205, show_default=True,
              help="Number of realizations.")
@click.option("--pb-photons", type=float, default=10.0, show_default=True,
              help="Pencil-beam photons per pixel to match ('inf' allowed).")
@click.option("--methods", type=click.Choice(METHOD_CHOICES), multiple=True, default=("tv", "gidc", "n2g"),
              show_default=True, help="Methods to match (repeat the option).")
@click.option("--metric", type=click.Choice(sorted(TOLERANCES)), default="psnr", show_default=True)
@click.option("--bracket", type=float, nargs=2, default=(1.0, 1e4), show_default=True,
              help="Photon-constant search interval.")
@click.option("--tolerance", type=float, default=None, help="Match tolerance (0.25 dB for PSNR).")
@click.option("--repeats", type=click.IntRange(min=1), default=5, show_default=True,
              help="Realization sets averaged per evaluation.")
@click.option("--seed", type=int, default=0, show_default=True)
@training_options()
@threads_option
@click.option("--output", "-o", type=click.Path(file_okay=False, path_type=Path), default=Path("dose"),
              show_default=True, help="Output directory.")
@click.pass_context
def dose(
    ctx: click.Context,
    phantom: str,
    size: int,
    M: int,
    pb_photons: float,
    methods: Tuple[str, ...],
    metric: str,
    bracket: Tuple[float, float],
    tolerance: Optional[float],
    repeats: int,
    seed: int,
    threads: int,
    output: Path,
    **options: Any,
) -> None:
    """Photon dose each method needs to match a pencil-beam scan."""
    if not pb_photons > 0:
        raise ConfigError(f"pencil-beam photons must be positive, got {pb_photons}")
    model, train, variational = _build_configs(options)
    spec = ExperimentSpec(
        phantom=phantom, height=size, width=size, M=M,
        methods=_methods_settings(methods, model), repeats=repeats, seed=seed,
        output_dir=output, train=train, variational=variational,
    )
    with precision(options["precision_name"]):
        study = dose_study(spec, pb_photons, metric, tuple(bracket), tolerance, workers=resolve_workers(threads))
    written = [write_json(output / "dose.json", study.to_dict()), write_csv(output / "dose.csv", study.rows())]

    if not ctx.obj["quiet"]:
        table = Table(title=f"Dose to match pencil beam ({metric} = {_format(study.target)})")
        for column in ("method", "C", metric, "total ratio", "max-pixel ratio", f"vs {study.reference}", "note"):
            table.add_column(column, justify="left" if column in ("method", "note") else "right")
        for row in study.rows():
            table.add_row(
                row["method"], _format(row["photons"]), _format(row["value"]),
                _format(row["total_dose_ratio"]), _format(row["max_pixel_dose_ratio"]),
                _format(row[f"dose_vs_{study.reference}"]),
                f"[yellow]bracket {row['bracket_edge']} edge[/yellow]" if row["bracket_edge"] else "",
            )
        console.print(table)
    _finish(ctx, output, written)


@cli.command()
@click.argument("dataset", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--method", "-m", type=click.Choice(REGULARIZED_CHOICES), required=True,
              help="Regularized method whose TV weight is selected.")
@click.option("--grid", type=click.FloatRange(min=0), multiple=True, required=True,
              help="Candidate TV weights (repeat the option).")
@training_options(with_lam=False)
@threads_option
@click.option("--output", "-o", type=click.Path(file_okay=False, path_type=Path), default=Path("gridsearch"),
              show_default=True, help="Output directory.")
@click.pass_context
def gridsearch(
    ctx: click.Context,
    dataset: Path,
    method: str,
    grid: Tuple[float, ...],
    threads: int,
    output: Path,
    **options: Any,
) -> None:
    """Select the TV weight by put-aside cross-validation."""
    acquisition = load_acquisition(dataset)
    model, train, variational = _build_configs(options)
    model, train, variational = resolve_configs(MethodSettings(Method(method), model=model), train, variational)
    with precision(options["precision_name"]):
        result = cross_validate_lambda(
            acquisition.masks, acquisition.buckets, method, grid, train, model, variational,
            workers=resolve_workers(threads),
        )
    rows: List[Dict[str, Any]] = [
        {"lam": s.lam, "cv_loss_mean": s.mean, "cv_loss_std": s.std, "cv_losses": s.cv_losses}
        for s in result.ranked()
    ]
    written = [
        write_json(output / "gridsearch.json", {"method": method, "best_lam": result.best_lam, "scores": rows}),
        write_csv(output / "gridsearch.csv", rows, ["lam", "cv_loss_mean", "cv_loss_std"]),
    ]

    if not ctx.obj["quiet"]:
        table = Table(title=f"{method}: cross-validation (best lambda {_format(result.best_lam)})")
        table.add_column("lambda", justify="right", style="cyan")
        table.add_column("mean CV loss", justify="right", style="magenta")
        table.add_column("std", justify="right")
        for row in rows:
            table.add_row(_format(row["lam"]), _format(row["cv_loss_mean"], 6), _format(row["cv_loss_std"], 3))
        console.print(table)
    else:
        console.print(_format(result.best_lam))
    _finish(ctx, output, written)


@cli.command()
@click.argument("manifest", type=click.Path(exists=True, path_type=Path))
@click.option("--output", "-o", type=click.Path(file_okay=False, path_type=Path), default=None,
              help="Write into this directory instead of the recorded one.")
@click.option("--check", is_flag=True, help="Fail when any output differs from the recorded hash.")
@click.pass_context
def replay(ctx: click.Context, manifest: Path, output: Optional[Path], check: bool) -> None:
    """Re-run the command recorded in a manifest."""
    recorded = RunManifest.read(manifest)
    command = cli.get_command(ctx, recorded.command)
    if command is None or command.name == "replay":
        raise ConfigError(f"manifest records an unknown command '{recorded.command}'")
    params = {
        param.name: param.type_cast_value(ctx, recorded.parameters[param.name])
        for param in command.params
        if param.name in recorded.parameters
    }
    if output is not None:
        params["output"] = output
    target = Path(params.get("output", "."))
    ctx.invoke(command, **params)

    if check:
        rerun = RunManifest.read(target)
        differing = sorted(
            name for name in set(recorded.outputs) | set(rerun.outputs)
            if recorded.outputs.get(name) != rerun.outputs.get(name)
        )
        if differing:
            raise ComputationError(f"replayed outputs differ from the manifest: {', '.join(differing)}")
        console.print(f"[green]✔️[/green] {len(rerun.outputs)} outputs reproduced bit-exactly")


if __name__ == "__main__":
    cli()
