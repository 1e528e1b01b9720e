"""dndchain command line: run scenarios, verify dumps, replay audits, recompute metrics."""

import argparse
import json
import logging
import sys
from typing import List, Optional

from rich.console import Console
from rich.table import Table

from dndchain.campaign.audit import Auditor
from dndchain.campaign.complaints import lookup_complaint
from dndchain.campaign.trace import read_trace
from dndchain.core.config import ChainConfig, load_config
from dndchain.core.errors import CodecError, ConfigInvalid, DndChainError, InsufficientEvidence, IoFailure
from dndchain.core.log import setup_logging
from dndchain.harness.consortium import identity_keypair
from dndchain.harness.metrics import MetricsReport, build_report
from dndchain.harness.reports import emit_reports
from dndchain.harness.scenario import load_scenario, scenario_schema
from dndchain.harness.simulator import RunResult, run_scenario
from dndchain.ledger.chain import load_ledger, read_ledger_bytes, verify_raw
from dndchain.membership.identity import ParticipantIdentity, write_genesis

logger = logging.getLogger("dndchain")
console = Console()

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INTEGRITY = 3


class IntegrityFailure(DndChainError):
    """A dump failed verification."""


def _config(path: Optional[str], overrides: dict) -> ChainConfig:
    base = load_config(path).to_dict() if path else {}
    for section, values in overrides.items():
        if isinstance(values, dict):
            base[section] = {**base.get(section, {}), **values}
        else:
            base[section] = values
    return ChainConfig.from_dict(base)


def _load_dump(path: str):
    report = verify_raw(read_ledger_bytes(path))
    if not report.ok:
        raise IntegrityFailure(f"chain broken at height {report.first_bad_height}: {report.reason}")
    return load_ledger(path)


def display_run(result: RunResult) -> None:
    table = Table(title=f"Scenario {result.scenario.name}")
    table.add_column("Metric", style="cyan")
    table.add_column("Value", style="green")
    table.add_row("Blocks", str(len(result.blocks)))
    table.add_row("Ledger digest", result.ledger_digest[:16])
    table.add_row("Deliveries", str(len(result.trace)))
    table.add_row("Verdicts", str(len(result.verdicts)))
    table.add_row("Violations", str(len(result.violations)))
    for label, count in sorted(result.rejected.items()):
        table.add_row(f"Refused: {label}", str(count))
    console.print(table)
    display_metrics(result.report)


def display_metrics(report: MetricsReport) -> None:
    scrub = report.scrub_success
    if not scrub.empty:
        table = Table(title="Scrubbing success rate")
        for column in ("campaign_id", "submitted", "delivered", "success_rate", "rolling_success_rate"):
            table.add_column(column, style="cyan" if column == "campaign_id" else "green")
        for row in scrub.itertuples(index=False):
            table.add_row(
                row.campaign_id, str(row.submitted), str(row.delivered),
                f"{row.success_rate:.2f}", f"{row.rolling_success_rate:.2f}",
            )
        console.print(table)
    complaints = report.complaints_per_million
    if not complaints.empty:
        table = Table(title="Complaints per million messages")
        for column in ("window", "messages", "rtm_per_million", "utm_per_million"):
            table.add_column(column, style="cyan" if column == "window" else "green")
        for row in complaints.itertuples(index=False):
            table.add_row(str(row.window), str(row.messages), f"{row.rtm_per_million:.2f}", f"{row.utm_per_million:.2f}")
        console.print(table)


def cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    if args.seed is not None:
        scenario = scenario.model_copy(update={"seed": args.seed})
    config = _config(args.config, scenario.parameters)
    with console.status(f"[bold blue]Running {scenario.name}..."):
        result = run_scenario(scenario, args.out, config)
    display_run(result)
    if args.out:
        console.print(f"[green]Outputs written to {args.out}[/green]")
    return EXIT_OK


def cmd_verify(args) -> int:
    report = verify_raw(read_ledger_bytes(args.dump))
    if report.ok:
        console.print(f"[bold green]chain ok[/bold green]: {report.length} blocks")
        return EXIT_OK
    console.print(f"[bold red]chain broken at height {report.first_bad_height}[/bold red]: {report.reason}")
    return EXIT_INTEGRITY


def cmd_replay(args) -> int:
    blocks = _load_dump(args.dump)
    auditor = Auditor(blocks, read_trace(args.trace), _config(args.config, {}))
    complaint = lookup_complaint(auditor.state, args.complaint)
    if complaint is None:
        console.print(f"[bold red]no committed complaint {args.complaint}[/bold red]")
        return EXIT_CONFIG
    try:
        verdict = auditor.replay_audit(complaint)
    except InsufficientEvidence as exc:
        console.print(f"[yellow]{exc}[/yellow]")
        return EXIT_OK
    table = Table(title=f"Audit of {complaint.complaint_id}")
    table.add_column("Field", style="cyan")
    table.add_column("Value", style="green")
    table.add_row("Class", complaint.complaint_class.value)
    table.add_row("Verdict", verdict.verdict.value)
    table.add_row("Campaign", verdict.campaign_id)
    table.add_row("Operator", verdict.operator)
    table.add_row("Notes", "; ".join(verdict.notes))
    console.print(table)
    return EXIT_OK


def cmd_metrics(args) -> int:
    blocks = _load_dump(args.dump)
    report = build_report(blocks, read_trace(args.trace), _config(args.config, {}))
    emit_reports(report, args.out)
    display_metrics(report)
    return EXIT_OK


def cmd_genesis(args) -> int:
    scenario = load_scenario(args.scenario)
    identities = [
        ParticipantIdentity.from_keypair(spec.id, spec.role, identity_keypair(scenario.seed, spec.id), spec.region)
        for spec in scenario.nodes
    ]
    write_genesis(args.out, identities)
    console.print(f"[green]{len(identities)} bootstrap identities written to {args.out}[/green]")
    return EXIT_OK


def cmd_schema(args) -> int:
    console.print_json(json.dumps(scenario_schema()))
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from dndchain.api.app import create_app
    from dndchain.harness.simulator import Simulation

    scenario = load_scenario(args.scenario)
    simulation = Simulation(scenario, _config(args.config, scenario.parameters))
    simulation.run()
    uvicorn.run(create_app(simulation.consortium), host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dndchain", description="Consortium ledger for do-not-disturb compliance")
    parser.add_argument("--config", help="YAML configuration override file")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario end to end")
    run.add_argument("--scenario", required=True, help="scenario JSON file")
    run.add_argument("--seed", type=int, help="override the scenario seed")
    run.add_argument("--out", help="directory for the ledger dump, trace, verdicts and metric CSVs")
    run.set_defaults(func=cmd_run)

    verify = sub.add_parser("verify", help="check chain integrity of a ledger dump")
    verify.add_argument("--dump", required=True)
    verify.set_defaults(func=cmd_verify)

    replay = sub.add_parser("replay", help="re-audit one complaint from a dump and trace")
    replay.add_argument("--dump", required=True)
    replay.add_argument("--trace", required=True)
    replay.add_argument("--complaint", required=True, help="complaint id")
    replay.set_defaults(func=cmd_replay)

    metrics = sub.add_parser("metrics", help="recompute metric CSVs from a dump and trace")
    metrics.add_argument("--dump", required=True)
    metrics.add_argument("--trace", required=True)
    metrics.add_argument("--out", required=True)
    metrics.set_defaults(func=cmd_metrics)

    genesis = sub.add_parser("genesis", help="write the bootstrap identities of a scenario as a YAML genesis file")
    genesis.add_argument("--scenario", required=True)
    genesis.add_argument("--out", required=True)
    genesis.set_defaults(func=cmd_genesis)

    schema = sub.add_parser("schema", help="print the scenario JSON schema")
    schema.set_defaults(func=cmd_schema)

    serve = sub.add_parser("serve", help="run a scenario, then serve the subscriber API over its consortium")
    serve.add_argument("--scenario", required=True)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.set_defaults(func=cmd_serve)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level or ChainConfig().log_level)
    try:
        return args.func(args)
    except ConfigInvalid as exc:
        logger.error(f"configuration error: {exc}")
        return EXIT_CONFIG
    except (IntegrityFailure, CodecError) as exc:
        logger.error(f"integrity failure: {exc}")
        return EXIT_INTEGRITY
    except IoFailure as exc:
        logger.error(str(exc))
        return EXIT_CONFIG
    except DndChainError as exc:
        logger.error(f"{type(exc).__name__}: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
