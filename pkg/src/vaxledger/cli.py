"""Command-line entry points: scenario simulation, fixture generation
and serving the HTTP API."""

from __future__ import annotations

import sys
from pathlib import Path

import click

from .api import ServiceConfig, serve as serve_api
from .errors import VaxError
from .sim import ScenarioConfig, generate_population, generate_regions, run_scenario, write_jsonl


@click.group()
def main():
    """Privacy-preserving vaccination registry with a ledger mirror."""


@main.command()
@click.option("--citizens", default=100, show_default=True)
@click.option("--centers", default=4, show_default=True)
@click.option("--agencies", default=2, show_default=True)
@click.option("--doses", default=2, show_default=True, help="Doses per citizen.")
@click.option("--seed", default=0, show_default=True)
@click.option("--tamper", default="none", show_default=True,
              help="none, db:k or ledger:k mutations after the honest run.")
@click.option("--report", "report_path", default="vaxledger-out/report.json",
              show_default=True, type=click.Path())
@click.option("--difficulty", default=8, show_default=True)
@click.option("--batch-size", default=16, show_default=True)
@click.option("--min-age", default=0, show_default=True)
@click.option("--http", "http_url", default=None, help="Drive a live service instead.")
def simulate(citizens, centers, agencies, doses, seed, tamper, report_path,
             difficulty, batch_size, min_age, http_url):
    """Run the full protocol end to end and audit the result.

    Exits 0 when the audit is clean, 2 when it reports findings.
    """
    report_path = Path(report_path)
    config = ScenarioConfig(
        citizens=citizens,
        centers=centers,
        agencies=agencies,
        doses_per_citizen=doses,
        seed=seed,
        tamper=tamper,
        out=str(report_path.parent),
        difficulty=difficulty,
        batch_size=batch_size,
        min_age=min_age,
        http_url=http_url,
    )
    try:
        report = run_scenario(config)
    except (VaxError, ValueError) as exc:
        click.echo(f"scenario failed: {exc}", err=True)
        sys.exit(1)
    audit = report["audit"]
    click.echo(f"report written to {report_path.parent}/report.json")
    click.echo(f"chain ok: {audit['chainOk']}, findings: {len(audit['findings'])}")
    if audit["findings"] or not audit["chainOk"]:
        sys.exit(2)


@main.command()
@click.option("--citizens", default=1000, show_default=True)
@click.option("--agencies", default=3, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", default="fixtures", show_default=True, type=click.Path())
def generate(citizens, agencies, seed, out):
    """Write directory.jsonl and regions.jsonl fixture files."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    regions = generate_regions(agencies, seed)
    population = generate_population(citizens, regions, seed)
    write_jsonl(out / "regions.jsonl", regions)
    write_jsonl(out / "directory.jsonl", population)
    click.echo(f"wrote {len(population)} citizens and {len(regions)} regions to {out}")


@main.command()
@click.option("--directory", "directory_fixture", required=True, type=click.Path(exists=True))
@click.option("--regions", "region_fixture", required=True, type=click.Path(exists=True))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@click.option("--difficulty", default=8, show_default=True)
@click.option("--batch-size", default=16, show_default=True)
@click.option("--max-doses", default=2, show_default=True)
@click.option("--min-age", default=18, show_default=True)
@click.option("--secret-code-mode", default="unique", show_default=True,
              type=click.Choice(["unique", "faithful"]))
@click.option("--seed", default=None, type=int,
              help="Deterministic mode; also enables GET /test/outbox.")
def serve(directory_fixture, region_fixture, host, port, difficulty, batch_size,
          max_doses, min_age, secret_code_mode, seed):
    """Serve the portal API."""
    config = ServiceConfig(
        directory_fixture=directory_fixture,
        region_fixture=region_fixture,
        listen_address=f"{host}:{port}",
        difficulty=difficulty,
        batch_size=batch_size,
        max_doses=max_doses,
        min_age=min_age,
        secret_code_mode=secret_code_mode,
        deterministic_seed=seed,
    )
    serve_api(config)


if __name__ == "__main__":
    main()
