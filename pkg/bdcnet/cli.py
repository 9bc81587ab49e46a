"""Command-line interface for bdcnet."""

import logging
from pathlib import Path
from typing import Any

import click
from rich.console import Console
from rich.logging import RichHandler
from rich.rule import Rule
from rich.table import Table

from . import __version__
from .config.loader import load_config
from .config.models import BdcnConfig, RunConfig
from .data.dataset import EdgeDataset, image_to_array
from .data.raster import load_raster, save_float_map, save_probability_raster
from .data.synth import synth_shapes, write_synth_dataset
from .evaluation.results import EvalSummary
from .evaluation.runner import EvaluationRunner, collect_items
from .network.bdcn import BdcnNetwork, build_network
from .network.inference import predict, predict_multiscale, receptive_fields
from .network.serialization import load_checkpoint
from .training.trainer import Trainer

console = Console()


def _setup_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(message)s",
        handlers=[RichHandler(console=console, show_path=False, rich_tracebacks=verbose)],
        force=True,
    )


def _report_failure(action: str, error: Exception, verbose: bool, context: dict[str, Any]) -> None:
    console.print(f"[red]Error during {action}: {error}[/red]")
    for label, value in context.items():
        if value is not None:
            console.print(f"[yellow]{label}: {value}[/yellow]")
    if verbose:
        console.print("[red]Full traceback:[/red]")
        console.print_exception()
    else:
        console.print("[dim]Use --verbose for full error details[/dim]")


def _parse_scales(value: str) -> list[float]:
    try:
        scales = [float(s) for s in value.split(",") if s.strip()]
    except ValueError as e:
        raise click.BadParameter(f"Scales must be comma-separated numbers, got {value!r}") from e
    if not scales:
        raise click.BadParameter("At least one scale is required")
    return scales


def _run_config(config_file: Path | None, **overrides: Any) -> RunConfig:
    config = load_config(config_file) if config_file else RunConfig()
    updates = {key: value for key, value in overrides.items() if value is not None}
    if "seed" in updates:
        config = config.model_copy(update={"model": config.model.model_copy(update={"seed": updates["seed"]})})
    if "iterations" in updates:
        config = config.model_copy(update={"optim": config.optim.model_copy(update={"iterations": updates.pop("iterations")})})
    return config.model_copy(update=updates)


@click.group()
@click.version_option(version=__version__, prog_name="bdcnet")
def cli():
    """bdcnet - Bi-Directional Cascade Network edge detection toolkit."""


@cli.command()
@click.option("--config", "config_file", type=click.Path(exists=True, path_type=Path), help="YAML or JSON run config")
@click.option("--manifest", type=click.Path(exists=True, path_type=Path), help="Training manifest (overrides config)")
@click.option("--seed", type=click.IntRange(min=0), help="Seed for weights, data order and augmentation")
@click.option("--iterations", type=click.IntRange(min=0), help="Number of parameter updates")
@click.option("--out", "output_dir", type=click.Path(path_type=Path), help="Output directory")
@click.option("--synthetic", type=click.IntRange(min=1), help="Train on N generated shape images instead of a manifest")
@click.option("--synthetic-size", type=click.IntRange(min=32), default=64, show_default=True)
@click.option("--verbose", "-v", is_flag=True, help="Enable verbose output")
def train(
    config_file: Path | None,
    manifest: Path | None,
    seed: int | None,
    iterations: int | None,
    output_dir: Path | None,
    synthetic: int | None,
    synthetic_size: int,
    verbose: bool,
):
    """Train a BDCN network.

    Examples:
        bdcnet train --config runs/bsds.yaml
        bdcnet train --synthetic 20 --iterations 2000 --out runs/toy
    """
    _setup_logging(verbose)
    try:
        config = _run_config(config_file, manifest=manifest, seed=seed, iterations=iterations, output_dir=output_dir)
        if config.manifest is not None:
            dataset = EdgeDataset.from_manifest(config.manifest)
        elif synthetic:
            dataset = EdgeDataset(synth_shapes(config.seed, synthetic, synthetic_size))
        else:
            raise click.UsageError("Give a manifest (--manifest or config) or --synthetic N")

        if verbose:
            console.print(f"[green]Training on {len(dataset)} samples[/green]")
            console.print(f"Description: {config.description or 'N/A'}")
        trainer = Trainer(config, dataset, use_progress_bar=console.is_terminal and not verbose)
        result = trainer.train(config.output_dir)

        console.print(Rule("Training complete"))
        console.print(f"Final checkpoint: {result.final_checkpoint}")
        console.print(f"Training log: {result.log_path}")
        if result.losses:
            console.print(f"Last loss: {result.losses[-1]:.4f}")
    except click.UsageError:
        raise
    except Exception as e:
        _report_failure("training", e, verbose, {"Configuration file": config_file, "Manifest": manifest})
        raise click.Abort() from e


@cli.command("predict")
@click.argument("checkpoint", type=click.Path(exists=True, path_type=Path))
@click.argument("images", nargs=-1, required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--scales", default="1.0", show_default=True, help="Comma-separated scale factors for multi-scale fusion")
@click.option("--emit-side-maps", is_flag=True, help="Also write all 2S side maps")
@click.option("--out", "output_dir", required=True, type=click.Path(path_type=Path), help="Output directory")
@click.option("--verbose", "-v", is_flag=True, help="Enable verbose output")
def predict_cmd(
    checkpoint: Path,
    images: tuple[Path, ...],
    scales: str,
    emit_side_maps: bool,
    output_dir: Path,
    verbose: bool,
):
    """Write edge probability maps as 8-bit rasters plus float dumps.

    Examples:
        bdcnet predict runs/toy/final.bdcn data/images/*.png --out preds
        bdcnet predict final.bdcn img.png --scales 0.5,1.0,1.5 --emit-side-maps --out preds
    """
    _setup_logging(verbose)
    scale_list = _parse_scales(scales)
    try:
        network = load_checkpoint(checkpoint).network
        output_dir.mkdir(parents=True, exist_ok=True)
        for path in images:
            image = image_to_array(load_raster(path))
            maps = predict(network, image) if emit_side_maps or scale_list == [1.0] else {}
            if scale_list != [1.0]:
                maps["fused"] = predict_multiscale(network, image, scale_list)
            written = _write_maps(output_dir, path.stem, maps if emit_side_maps else {"fused": maps["fused"]})
            if verbose:
                console.print(f"  {path.name}: {written} maps")
        console.print(f"[green]Wrote predictions for {len(images)} image(s) to {output_dir}[/green]")
    except Exception as e:
        _report_failure("prediction", e, verbose, {"Checkpoint": checkpoint, "Scales": scales})
        raise click.Abort() from e


def _write_maps(output_dir: Path, image_id: str, maps: dict) -> int:
    for name, prob in maps.items():
        stem = image_id if name == "fused" else f"{image_id}_{name}"
        save_probability_raster(output_dir / f"{stem}.png", prob)
        save_float_map(output_dir / f"{stem}.f32", {name: prob})
    return len(maps)


@cli.command("eval")
@click.argument("pred_dir", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.argument("manifest", type=click.Path(exists=True, path_type=Path))
@click.option("--tolerance", type=float, default=0.0075, show_default=True, help="Match radius as a fraction of the diagonal")
@click.option("--map", "map_name", default="fused", show_default=True, help="Which map to score: fused, s2d_k or d2s_k")
@click.option("--per-image", is_flag=True, help="Also write per_image.csv")
@click.option("--max-concurrent", type=click.IntRange(min=1), default=4, show_default=True)
@click.option("--out", "output_dir", type=click.Path(path_type=Path), help="Where result files go (default PRED_DIR/eval)")
@click.option("--verbose", "-v", is_flag=True, help="Enable verbose output")
def eval_cmd(
    pred_dir: Path,
    manifest: Path,
    tolerance: float,
    map_name: str,
    per_image: bool,
    max_concurrent: int,
    output_dir: Path | None,
    verbose: bool,
):
    """Score predictions against a GT manifest (NMS, matching, ODS/OIS/AP).

    Examples:
        bdcnet eval preds data/manifest.tsv
        bdcnet eval preds data/nyud.tsv --tolerance 0.011 --per-image
    """
    _setup_logging(verbose)
    try:
        config = RunConfig().eval.model_copy(update={"tolerance": tolerance, "max_concurrent": max_concurrent})
        items = collect_items(pred_dir, EdgeDataset.from_manifest(manifest), map_name)
        runner = EvaluationRunner(config, use_progress_bar=console.is_terminal and not verbose)
        summary = runner.evaluate(items)
        written = summary.export_all(output_dir or pred_dir / "eval", per_image=per_image)
        _print_summary(summary, map_name)
        for path in written:
            console.print(f"[green]Wrote {path}[/green]")
    except Exception as e:
        _report_failure("evaluation", e, verbose, {"Predictions": pred_dir, "Manifest": manifest})
        raise click.Abort() from e


def _print_summary(summary: EvalSummary, map_name: str) -> None:
    table = Table(title=f"Edge benchmark ({map_name})")
    table.add_column("Metric", style="cyan")
    table.add_column("Value", justify="right")
    table.add_column("Threshold", justify="right", style="dim")
    table.add_row("ODS", f"{summary.ods_f:.4f}", f"{summary.ods_threshold:.2f}")
    table.add_row("OIS", f"{summary.ois_f:.4f}", "per image")
    table.add_row("AP", f"{summary.ap:.4f}", "")
    console.print(table)


@cli.command()
@click.argument("checkpoint", required=False, type=click.Path(exists=True, path_type=Path))
@click.option("--config", "config_file", type=click.Path(exists=True, path_type=Path), help="Run config to inspect")
@click.option("--num-blocks", type=click.IntRange(2, 5), help="Number of ID Blocks S")
@click.option("--sem-branches", type=click.IntRange(min=0), help="Dilated branches per SEM (K)")
@click.option("--dilation-factor", type=click.IntRange(min=0), help="SEM rate factor r0")
@click.option("--layers/--no-layers", default=True, help="List every parameter tensor")
@click.option("--verbose", "-v", is_flag=True, help="Enable verbose output")
def inspect(
    checkpoint: Path | None,
    config_file: Path | None,
    num_blocks: int | None,
    sem_branches: int | None,
    dilation_factor: int | None,
    layers: bool,
    verbose: bool,
):
    """Report parameter shapes, SEM rates, parameter count and receptive fields.

    Examples:
        bdcnet inspect runs/toy/final.bdcn
        bdcnet inspect --num-blocks 2 --no-layers
    """
    _setup_logging(verbose)
    try:
        if checkpoint is not None:
            loaded = load_checkpoint(checkpoint)
            network = loaded.network
            console.print(f"Checkpoint: {checkpoint} (iteration {loaded.iteration})")
        else:
            model = load_config(config_file).model if config_file else BdcnConfig()
            flags = {"num_blocks": num_blocks, "sem_branches": sem_branches, "dilation_factor": dilation_factor}
            model = BdcnConfig(**{**model.model_dump(), **{k: v for k, v in flags.items() if v is not None}})
            network = build_network(model)
        _print_architecture(network, layers)
    except Exception as e:
        _report_failure("inspection", e, verbose, {"Checkpoint": checkpoint, "Configuration file": config_file})
        raise click.Abort() from e


def _print_architecture(network: BdcnNetwork, layers: bool) -> None:
    config = network.config
    console.print(Rule("Configuration"))
    for key, value in config.model_dump(mode="json").items():
        console.print(f"{key} = {value}")

    if layers:
        table = Table(title="Parameters")
        table.add_column("Name", style="cyan")
        table.add_column("Shape")
        table.add_column("Count", justify="right")
        for name, p in network.parameters().items():
            table.add_row(name, "x".join(str(d) for d in p.shape), f"{p.data.size:,}")
        console.print(table)

    rates = ",".join(str(r) for r in config.rate_schedule) or "none (SEM disabled)"
    console.print(f"SEM rates: {rates}")
    console.print(f"Total parameters: {network.num_parameters():,}")

    fields = Table(title="Receptive fields")
    fields.add_column("Block", justify="right")
    fields.add_column("Stride", justify="right")
    fields.add_column("Backbone", justify="right")
    fields.add_column("With SEM", justify="right")
    for rf in receptive_fields(config):
        fields.add_row(str(rf.block), str(rf.stride), str(rf.backbone), str(rf.with_sem))
    console.print(fields)


@cli.command()
@click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True)
@click.option("--count", type=click.IntRange(min=0), default=20, show_default=True)
@click.option("--size", type=click.IntRange(min=32), default=64, show_default=True)
@click.option("--out", "output_dir", required=True, type=click.Path(path_type=Path), help="Output directory")
@click.option("--verbose", "-v", is_flag=True, help="Enable verbose output")
def synth(seed: int, count: int, size: int, output_dir: Path, verbose: bool):
    """Generate a synthetic shape dataset with exact boundary GT.

    Example:
        bdcnet synth --count 20 --size 64 --out data/toy
    """
    _setup_logging(verbose)
    try:
        manifests = write_synth_dataset(output_dir, synth_shapes(seed, count, size))
        for name, path in manifests.items():
            console.print(f"[green]{name} manifest: {path}[/green]")
    except Exception as e:
        _report_failure("dataset generation", e, verbose, {"Output directory": output_dir})
        raise click.Abort() from e


if __name__ == "__main__":
    cli()
