# File: cli.py (Command line: simulate, experiment, validate, export-plan, calibrate)

import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional

import typer
from rich.console import Console
from rich.table import Table

from config import settings
from crud.plan_crud import default_building_plan, default_plan_document, load_building_plan, serialize_building_plan
from errors import SimulationError
from models import Category
from schemas import (
    ExperimentName,
    ExperimentSpec,
    PopulationSpec,
    Scenario,
    SummaryDocument,
    load_document,
    read_json_object,
    validate_document,
)
from services.engine_service import run_replications, simulate
from services.experiment_service import run_experiment, summarize
from services.export_service import export_service
from services.metering_service import calibrate_base_load, compute_betas, reconstruct_total, total_wh

logger = logging.getLogger(__name__)
console = Console()

app = typer.Typer(name="officewatt", add_completion=False, help="Agent-based office electricity simulator.")


def _fail(error: SimulationError) -> None:
    """Report a domain error and leave with its exit code (1 config, 2 runtime)."""
    logger.error(f"{type(error).__name__}: {error}")
    typer.secho(f"❌ {type(error).__name__}: {error}", fg=typer.colors.RED, err=True)
    raise typer.Exit(code=error.exit_code)


def _load_plan(plan: Optional[Path]):
    return load_building_plan(plan) if plan else default_building_plan()


def _summary_table(summary: SummaryDocument, title: str) -> Table:
    table = Table(title=title)
    table.add_column("seed", justify="right")
    table.add_column("total kWh", justify="right")
    for category in Category:
        table.add_column(f"{category.value} %", justify="right")
    table.add_column("peak W", justify="right")
    table.add_column("peak at")
    for item in summary.series:
        table.add_row(
            str(item.seed),
            f"{item.total_kwh:,.1f}",
            *[f"{item.shares_pct[category.value]:.1f}" for category in Category],
            f"{item.peak_w:,.0f}",
            item.peak_time,
        )
    return table


@app.command("simulate")
def simulate_command(
    scenario: Optional[Path] = typer.Option(None, "--scenario", "-s", help="Scenario JSON (defaults when omitted)"),
    plan: Optional[Path] = typer.Option(None, "--plan", "-p", help="Building plan JSON (default plan when omitted)"),
    population: Optional[Path] = typer.Option(None, "--population", help="Population JSON"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Override the scenario seed"),
    days: Optional[int] = typer.Option(None, "--days", help="Override the horizon in days"),
    out: Path = typer.Option(Path(settings.OUTPUT_DIR) / "run", "--out", "-o", help="Output directory"),
):
    """Run one scenario and write meter, half-hourly, beta, event and summary files."""
    try:
        overrides: Dict[str, Any] = read_json_object(scenario) if scenario else {}
        if seed is not None:
            overrides["seed"] = seed
        if days is not None:
            overrides["horizon_days"] = days
        scenario_doc = validate_document(Scenario, overrides, source=str(scenario or "<scenario>"))
        building = _load_plan(plan)
        population_doc = load_document(PopulationSpec, population) if population else None

        series, log = simulate(scenario_doc, building, population_doc)
        report = compute_betas(log, scenario_doc.horizon_ticks, building, scenario_doc.base_load_w)
        reconstructed = reconstruct_total(report, total_wh(series))
        summary = summarize([series])
        export_service.write_run(out, series, report, log, summary)
    except SimulationError as e:
        _fail(e)

    console.print(_summary_table(summary, f"Run seed {scenario_doc.seed}, {scenario_doc.horizon_days} days"))
    typer.secho(
        f"✅ {reconstructed / 1000.0:,.1f} kWh reconstructed from utilisation factors; files in {out}",
        fg=typer.colors.GREEN,
    )


@app.command("experiment")
def experiment_command(
    name: ExperimentName = typer.Option(..., "--name", "-n", help="Experiment to run"),
    config: Optional[Path] = typer.Option(None, "--config", "-c", help="Experiment spec JSON"),
    reps: Optional[int] = typer.Option(None, "--reps", "-r", help="Override the number of replications"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Output root directory"),
):
    """Run one of the experiments and write its CSVs and summary.json."""
    try:
        document: Dict[str, Any] = read_json_object(config) if config else {}
        document["name"] = name.value
        if reps is not None:
            document["n_reps"] = reps
        elif "n_reps" not in document:
            document["n_reps"] = settings.DEFAULT_REPLICATIONS
        document.setdefault("workers", settings.REPLICATION_WORKERS)
        spec = validate_document(ExperimentSpec, document, source=str(config or "<experiment>"))
        result = run_experiment(spec, out_dir=str(out) if out else None)
    except SimulationError as e:
        _fail(e)

    table = Table(title=f"Experiment {result.name.value}")
    table.add_column("key")
    table.add_column("value")
    for key, value in result.summary.items():
        if not isinstance(value, (dict, list)):
            table.add_row(key, f"{value:,.4g}" if isinstance(value, float) else str(value))
    console.print(table)
    typer.secho(f"✅ {len(result.files)} files written to {result.output_dir}", fg=typer.colors.GREEN)


@app.command("validate")
def validate_command(
    plan: Path = typer.Option(..., "--plan", "-p", help="Building plan JSON to check"),
):
    """Check a building plan and print its inventory."""
    try:
        building = load_building_plan(plan)
    except SimulationError as e:
        _fail(e)

    table = Table(title=f"Plan {plan}")
    table.add_column("item")
    table.add_column("count", justify="right")
    for key, value in building.totals.as_dict().items():
        table.add_row(key, str(value))
    for key, value in sorted(building.base_appliances.items()):
        table.add_row(f"base: {key}", str(value))
    console.print(table)
    typer.secho("✅ Plan is valid", fg=typer.colors.GREEN)


@app.command("export-plan")
def export_plan_command(
    out: Path = typer.Option(Path("default_plan.json"), "--out", "-o", help="Where to write the plan"),
    explicit: bool = typer.Option(False, "--explicit", help="List every appliance id instead of counts"),
):
    """Write the default building plan as JSON."""
    document = serialize_building_plan(default_building_plan()) if explicit else default_plan_document()
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(document, indent=2) + "\n", encoding="utf-8")
    typer.secho(f"✅ Default plan written to {out}", fg=typer.colors.GREEN)


@app.command("calibrate")
def calibrate_command(
    scenario: Optional[Path] = typer.Option(None, "--scenario", "-s", help="Scenario JSON"),
    plan: Optional[Path] = typer.Option(None, "--plan", "-p", help="Building plan JSON"),
    reps: int = typer.Option(5, "--reps", "-r", help="Replications to pool"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Write the calibration record as JSON"),
):
    """Find the base load that gives the target nights-and-weekends base share."""
    try:
        scenario_doc = load_document(Scenario, scenario) if scenario else Scenario()
        building = _load_plan(plan)
        series = run_replications(scenario_doc, reps, plan=building)
        result = calibrate_base_load(series)
    except SimulationError as e:
        _fail(e)

    table = Table(title="Base-load calibration")
    table.add_column("quantity")
    table.add_column("value", justify="right")
    for key, value in result.as_dict().items():
        table.add_row(key, f"{value:,.4f}")
    console.print(table)
    if out:
        export_service.write_json(result.as_dict(), out)
    typer.secho(f"✅ base_load_w = {result.base_load_w:,.0f} W", fg=typer.colors.GREEN)


if __name__ == "__main__":
    app()
