"""Command-line interface for causal-cde."""

from __future__ import annotations

from contextlib import contextmanager
from pathlib import Path
from typing import Any, Iterator

import click
from rich.console import Console
from rich.table import Table

from causal_cde import __version__
from causal_cde.config import (
    GeneratorKind,
    GeneratorSpec,
    GraphKind,
    Mode,
    Profile,
    RunConfig,
    load_config,
)
from causal_cde.datagen import Dataset, generate
from causal_cde.discovery import DiscoveryResult, RankedGraph, gradient_suite
from causal_cde.errors import (
    AllRestartsFailed,
    ConfigError,
    ContractViolation,
    EnumerationCapError,
    NumericalError,
)
from causal_cde.graphs import Dag, read_adjacency_csv, read_edge_list, write_edge_list
from causal_cde.graphs.io import infer_dim
from causal_cde.harness import DiscoveryHarness
from causal_cde.metrics import MetricsReport, evaluate_graphs
from causal_cde.storage import RunStore

console = Console()

EXIT_USAGE = 2
EXIT_RUNTIME = 3

SHOWN_RANKS = 10


@contextmanager
def exit_codes(ctx: click.Context) -> Iterator[None]:
    """Map package errors onto the exit-code contract (2 usage, 3 runtime)."""
    try:
        yield
    except (ConfigError, ContractViolation, EnumerationCapError) as exc:
        console.print(f"[red]Error:[/red] {exc}")
        ctx.exit(EXIT_USAGE)
    except (NumericalError, AllRestartsFailed) as exc:
        console.print(f"[red]Run failed:[/red] {exc}")
        ctx.exit(EXIT_RUNTIME)


def build_run_config(
    ctx: click.Context,
    mode: Mode,
    dataset: Path | None = None,
    generator: GeneratorSpec | None = None,
    profile: str | None = None,
    seed: int | None = None,
    restarts: int | None = None,
    workers: int | None = None,
    output: Path | None = None,
) -> RunConfig:
    """Merge command-line flags over the ``--config`` file, if one was given.

    For ``discover`` the restarts are the seeds ``seed .. seed + restarts - 1``;
    for the enumeration modes ``--restarts`` sets the restarts per graph.
    """
    base: RunConfig | None = ctx.obj.get("config")
    data: dict[str, Any] = base.snapshot() if base is not None else {}
    if base is not None:
        data["workers"] = base.workers
    data["mode"] = mode.value

    if dataset is not None:
        data["dataset"] = str(dataset)
        data["generator"] = None
    if generator is not None:
        data["generator"] = generator.model_dump(mode="json")
        data["dataset"] = None
    if profile is not None:
        data["profile"] = profile
        data["train"] = None
    if output is not None:
        data["output_dir"] = str(output)
    if workers is not None:
        data["workers"] = workers

    seeds = data.get("seeds") or [0]
    first = seeds[0] if seed is None else seed
    if mode is Mode.DISCOVER:
        count = restarts if restarts is not None else len(seeds)
        data["seeds"] = list(range(first, first + count))
    else:
        data["seeds"] = [first]

    if data.get("dataset") is None and data.get("generator") is None:
        raise click.UsageError("give a dataset path or a --config with a dataset or generator")

    config = RunConfig.from_dict(data, "command line")
    if mode is not Mode.DISCOVER and restarts is not None:
        config.train = config.training.model_copy(update={"discrete_restarts": restarts})
    return config


def _print_adjacency(result: DiscoveryResult) -> None:
    table = Table(title="Weighted adjacency (row = child, column = parent)")
    table.add_column("", style="cyan")
    for j in range(result.dim):
        table.add_column(str(j), justify="right")
    entries = result.weighted_adjacency.entries
    for i in range(result.dim):
        table.add_row(str(i), *(f"{entries[i, j]:.4g}" for j in range(result.dim)))
    console.print(table)


def _print_restarts(best: DiscoveryResult, results: list[DiscoveryResult]) -> None:
    table = Table(title="Restarts")
    table.add_column("Seed", style="cyan")
    table.add_column("Status")
    table.add_column("ELBO", justify="right")
    table.add_column("Edges", justify="right")
    table.add_column("Note", style="dim")
    for result in results:
        status = (
            f"[green]{result.status.value}[/green]"
            if result.succeeded
            else f"[red]{result.status.value}[/red]"
        )
        elbo = f"{result.final_elbo:.4f}" if result.final_elbo is not None else "-"
        mark = " *" if result.seed == best.seed else ""
        table.add_row(
            f"{result.seed}{mark}",
            status,
            elbo,
            str(len(result.edges)) if result.succeeded else "-",
            result.error or "; ".join(result.deviations),
        )
    console.print(table)


def _print_ranking(ranking: list[RankedGraph]) -> None:
    table = Table(title=f"Ranking ({len(ranking)} graphs, best {min(SHOWN_RANKS, len(ranking))})")
    table.add_column("Rank", style="cyan", justify="right")
    table.add_column("ELBO", justify="right")
    table.add_column("Seed", justify="right")
    table.add_column("Edges", style="green")
    for rank, entry in enumerate(ranking[:SHOWN_RANKS], start=1):
        table.add_row(
            str(rank),
            f"{entry.elbo:.4f}",
            "-" if entry.seed is None else str(entry.seed),
            ", ".join(f"{p}->{c}" for p, c in entry.dag.sorted_edges()) or "(empty)",
        )
    console.print(table)


def _print_metrics(report: MetricsReport) -> None:
    table = Table(title="Structural metrics")
    table.add_column("Metric", style="cyan")
    table.add_column("Value", justify="right")
    table.add_row("SHD", str(report.shd))
    table.add_row("SID", str(report.sid))
    table.add_row("F1", f"{report.f1:.3f}")
    table.add_row("Precision", f"{report.precision:.3f}")
    table.add_row("Recall", f"{report.recall:.3f}")
    table.add_row("Predicted edges", str(report.predicted_edge_count))
    table.add_row("True edges", str(report.true_edge_count))
    table.add_row("Exact", "yes" if report.exact else "no")
    table.add_row("Markov equivalent", "yes" if report.markov_equivalent else "no")
    console.print(table)


# =============================================================================
# MAIN GROUP
# =============================================================================


@click.group()
@click.version_option(version=__version__, prog_name="causal-cde")
@click.option(
    "--config",
    "-c",
    type=click.Path(exists=True, path_type=Path),
    help="Run configuration (JSON or YAML)",
)
@click.option("--verbose", "-v", is_flag=True, help="Enable verbose output")
@click.pass_context
def main(ctx: click.Context, config: Path | None, verbose: bool) -> None:
    """causal-cde: causal discovery with Gaussian-process conditional density estimators."""
    ctx.ensure_object(dict)
    with exit_codes(ctx):
        ctx.obj["config"] = load_config(config) if config is not None else None
    ctx.obj["verbose"] = verbose


profile_option = click.option(
    "--profile",
    "-p",
    type=click.Choice([p.value for p in Profile]),
    help="Training schedule (default: desk, or the config's profile)",
)
workers_option = click.option(
    "--workers", "-w", type=click.IntRange(min=1), help="Parallel fits (default: physical cores)"
)
output_option = click.option(
    "--output", "-o", type=click.Path(path_type=Path), help="Run directory (default: runs)"
)


# =============================================================================
# GENERATE
# =============================================================================


@main.command("generate")
@click.option(
    "--scheme",
    "-s",
    type=click.Choice([k.value for k in GraphKind if k is not GraphKind.EDGES]),
    default=GraphKind.ER.value,
    show_default=True,
    help="Ground-truth graph family",
)
@click.option(
    "--edges-file",
    type=click.Path(exists=True, path_type=Path),
    help="Explicit ground-truth edge list (overrides --scheme)",
)
@click.option(
    "--generator",
    "-g",
    type=click.Choice([k.value for k in GeneratorKind]),
    default=GeneratorKind.NN.value,
    show_default=True,
    help="Mechanism family",
)
@click.option("--d", "dim", type=int, default=10, show_default=True, help="Number of variables")
@click.option("--edges", type=float, default=15.0, show_default=True, help="Expected edge count")
@click.option("--n", "samples", type=int, default=1000, show_default=True, help="Number of samples")
@click.option("--seed", type=int, required=True, help="Seed for graph and data")
@click.option(
    "--output",
    "-o",
    type=click.Path(path_type=Path),
    default=Path("data"),
    show_default=True,
    help="Directory for the dataset files",
)
@click.pass_context
def generate_cmd(
    ctx: click.Context,
    scheme: str,
    edges_file: Path | None,
    generator: str,
    dim: int,
    edges: float,
    samples: int,
    seed: int,
    output: Path,
) -> None:
    """Generate a synthetic dataset with its ground-truth graph.

    \b
    Writes:
      data.csv         - header row plus one sample per line
      data.json        - the generator spec (provenance)
      true_edges.txt   - 'parent child' lines

    \b
    Examples:
      causal-cde generate --scheme er --d 10 --edges 15 --n 1000 --seed 7
      causal-cde generate --scheme chain --d 3 --generator gp --n 250 --seed 1
    """
    with exit_codes(ctx):
        try:
            spec = GeneratorSpec(
                graph=GraphKind.EDGES if edges_file else GraphKind(scheme),
                generator=GeneratorKind(generator),
                d=dim,
                edges=edges,
                n=samples,
                seed=seed,
                edge_list=read_edge_list(edges_file, dim).sorted_edges() if edges_file else None,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        dataset, dag = generate(spec)
        output.mkdir(parents=True, exist_ok=True)
        data_path = output / "data.csv"
        dataset.to_csv(data_path)
        dataset.write_provenance(Dataset.provenance_path(data_path))
        write_edge_list(dag, output / "true_edges.txt")

    console.print(f"[green]✓ Generated {dataset.n} x {dataset.dim} dataset[/green]")
    console.print(f"  Graph:  {dag}")
    console.print(f"  Files:  {output}/data.csv, data.json, true_edges.txt")


# =============================================================================
# DISCOVER
# =============================================================================


@main.command()
@click.argument("dataset", required=False, type=click.Path(exists=True, path_type=Path))
@click.option("--restarts", "-r", type=click.IntRange(min=1), help="Number of random restarts")
@click.option("--seed", type=int, help="First restart seed")
@profile_option
@workers_option
@output_option
@click.pass_context
def discover(
    ctx: click.Context,
    dataset: Path | None,
    restarts: int | None,
    seed: int | None,
    profile: str | None,
    workers: int | None,
    output: Path | None,
) -> None:
    """Learn a DAG by continuous optimisation with random restarts.

    \b
    Examples:
      causal-cde discover data/data.csv --restarts 3 -o runs/chain
      causal-cde -c runs/chain/config.json discover
    """
    with exit_codes(ctx):
        config = build_run_config(
            ctx, Mode.DISCOVER, dataset, None, profile, seed, restarts, workers, output
        )
        harness = DiscoveryHarness(config, verbose=ctx.obj["verbose"])
        try:
            best, results = harness.run_discover()
        finally:
            harness.close()

        _print_adjacency(best)
        _print_restarts(best, results)
        console.print(f"\n[bold]Best restart:[/bold] seed {best.seed}, ELBO {best.final_elbo:.4f}")
        console.print(f"[bold]Edges:[/bold] {best.dag}")
        console.print(f"[dim]Artifacts in {config.output_dir}[/dim]")


# =============================================================================
# ENUMERATE
# =============================================================================


@main.command("enumerate")
@click.argument("dataset", required=False, type=click.Path(exists=True, path_type=Path))
@click.option("--restarts", "-r", type=click.IntRange(min=1), help="Restarts per graph")
@click.option("--seed", type=int, help="Base seed for the restarts")
@profile_option
@workers_option
@output_option
@click.pass_context
def enumerate_cmd(
    ctx: click.Context,
    dataset: Path | None,
    restarts: int | None,
    seed: int | None,
    profile: str | None,
    workers: int | None,
    output: Path | None,
) -> None:
    """Score every DAG on the variables and rank them (small D only).

    \b
    Examples:
      causal-cde enumerate data/data.csv --restarts 3 -o runs/enum
    """
    with exit_codes(ctx):
        config = build_run_config(
            ctx, Mode.ENUMERATE, dataset, None, profile, seed, restarts, workers, output
        )
        harness = DiscoveryHarness(config, verbose=ctx.obj["verbose"])
        try:
            ranking = harness.run_enumerate()
        finally:
            harness.close()

        _print_ranking(ranking)
        console.print(f"\n[bold]MAP graph:[/bold] {ranking[0].dag} (ELBO {ranking[0].elbo:.4f})")
        console.print(f"[dim]Artifacts in {config.output_dir}[/dim]")


# =============================================================================
# EVALUATE
# =============================================================================


def _graph_dim(path: Path) -> int | None:
    return read_adjacency_csv(path).dim if path.suffix == ".csv" else None


def _read_graph(path: Path, dim: int) -> Dag:
    """Edge list, or adjacency CSV (positive entries become edges)."""
    if path.suffix != ".csv":
        return read_edge_list(path, dim)
    g = Dag.from_matrix(read_adjacency_csv(path).entries)
    if g.dim != dim:
        raise ContractViolation(f"{path} has {g.dim} variables, expected {dim}")
    return g


@main.command()
@click.option(
    "--true", "true_path", type=click.Path(exists=True, path_type=Path), required=True,
    help="Ground-truth edge list or adjacency CSV",
)
@click.option(
    "--pred", "pred_path", type=click.Path(exists=True, path_type=Path), required=True,
    help="Predicted edge list or adjacency CSV",
)
@click.option("--dim", "-d", type=click.IntRange(min=1), help="Number of variables")
@click.option(
    "--output",
    "-o",
    type=click.Path(path_type=Path),
    default=Path("runs"),
    show_default=True,
    help="Directory for metrics.json",
)
@click.pass_context
def evaluate(
    ctx: click.Context, true_path: Path, pred_path: Path, dim: int | None, output: Path
) -> None:
    """Compare a predicted graph with the ground truth (SHD, SID, F1)."""
    with exit_codes(ctx):
        if dim is None:
            dims = [d for d in (_graph_dim(true_path), _graph_dim(pred_path)) if d is not None]
            dim = dims[0] if dims else infer_dim(true_path, pred_path)
        if dim < 1:
            raise click.UsageError("both edge lists are empty; pass --dim")
        report = evaluate_graphs(_read_graph(true_path, dim), _read_graph(pred_path, dim))
        path = RunStore(output).save_metrics(report)

    _print_metrics(report)
    console.print(f"[dim]Wrote {path}[/dim]")


# =============================================================================
# ERROR RATE
# =============================================================================


@main.command("error-rate")
@click.option("--d", "dim", type=click.IntRange(min=1), default=3, show_default=True)
@click.option("--n", "samples", type=click.IntRange(min=2), default=250, show_default=True)
@click.option(
    "--datasets-per-structure", "-k", type=click.IntRange(min=1), default=2, show_default=True
)
@click.option("--restarts", "-r", type=click.IntRange(min=1), help="Restarts per graph")
@click.option("--seed", type=int, default=0, show_default=True, help="Base dataset seed")
@profile_option
@workers_option
@output_option
@click.pass_context
def error_rate(
    ctx: click.Context,
    dim: int,
    samples: int,
    datasets_per_structure: int,
    restarts: int | None,
    seed: int,
    profile: str | None,
    workers: int | None,
    output: Path | None,
) -> None:
    """Estimate how often enumeration recovers graphs sampled from the model itself.

    Datasets are drawn from the GP-CDE prior on every distinct structure
    over D variables; each is scored by exhaustive enumeration.
    """
    with exit_codes(ctx):
        try:
            spec = GeneratorSpec(
                graph=GraphKind.EMPTY, generator=GeneratorKind.GP, d=dim, edges=0.0, n=samples,
                seed=seed,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        config = build_run_config(
            ctx, Mode.ENUMERATE, None, spec, profile, seed, restarts, workers, output
        )
        harness = DiscoveryHarness(config, verbose=ctx.obj["verbose"])
        try:
            report = harness.run_error_rate(datasets_per_structure)
        finally:
            harness.close()

    table = Table(title="Error-rate trials")
    table.add_column("Structure", style="cyan", justify="right")
    table.add_column("Dataset seed", justify="right")
    table.add_column("True edges")
    table.add_column("MAP edges")
    table.add_column("SHD", justify="right")
    table.add_column("SID", justify="right")
    table.add_column("F1", justify="right")
    for record in report.records:
        if record.metrics is None:
            table.add_row(
                str(record.structure), str(record.dataset_seed), str(record.true_edges),
                f"[red]{record.error}[/red]", "-", "-", "-",
            )
            continue
        table.add_row(
            str(record.structure),
            str(record.dataset_seed),
            str(record.true_edges),
            str(record.map_edges),
            str(record.metrics.shd),
            str(record.metrics.sid),
            f"{record.metrics.f1:.3f}",
        )
    console.print(table)
    console.print(
        f"\n[bold]Exact recovery:[/bold] {report.recovery_rate:.2%}  "
        f"[bold]MEC recovery:[/bold] {report.mec_recovery_rate:.2%}  "
        f"[bold]Failed:[/bold] {report.failed}"
    )


# =============================================================================
# GRADCHECK
# =============================================================================


@main.command()
@click.option("--n", "samples", type=click.IntRange(min=2), default=32, show_default=True)
@click.option("--d", "dim", type=click.IntRange(min=1), default=2, show_default=True)
@click.option("--m", "inducing", type=click.IntRange(min=1), default=8, show_default=True)
@click.option("--mc", "mc_samples", type=click.IntRange(min=1), default=8, show_default=True)
@click.option("--trials", "-t", type=click.IntRange(min=1), default=20, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--tol", type=float, default=1e-4, show_default=True)
@click.pass_context
def gradcheck(
    ctx: click.Context,
    samples: int,
    dim: int,
    inducing: int,
    mc_samples: int,
    trials: int,
    seed: int,
    tol: float,
) -> None:
    """Check analytic gradients against central finite differences."""
    with exit_codes(ctx):
        cases = gradient_suite(samples, dim, inducing, mc_samples, trials, seed, tol)

    table = Table(title="Gradient checks")
    table.add_column("Trial", style="cyan", justify="right")
    table.add_column("Objective")
    table.add_column("Parameters", justify="right")
    table.add_column("Max abs. error", justify="right")
    table.add_column("Max rel. error", justify="right")
    table.add_column("Result")
    for case in cases:
        table.add_row(
            str(case.trial),
            case.objective,
            str(case.report.rel_errors.size),
            f"{case.report.max_abs_error:.2e}",
            f"{case.report.max_rel_error:.2e}",
            "[green]pass[/green]" if case.passed else "[red]FAIL[/red]",
        )
    console.print(table)

    failed = [case for case in cases if not case.passed]
    if failed:
        console.print(f"[red]{len(failed)} of {len(cases)} checks exceeded tol {tol:g}[/red]")
        ctx.exit(EXIT_RUNTIME)
    console.print(f"[green]✓ All {len(cases)} checks within tol {tol:g}[/green]")


if __name__ == "__main__":
    main()
