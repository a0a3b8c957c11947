import json
import sys
from contextlib import contextmanager
from pathlib import Path

import click
import yaml
from rich.console import Console
from rich.progress import (
    BarColumn,
    Progress,
    TaskProgressColumn,
    TextColumn,
    TimeRemainingColumn,
)

from provchain.config import ConfigurationError, load_config
from provchain.constants import EXIT_INTEGRITY, EXIT_USAGE, JSON_SCHEMA_VERSION
from provchain.engine import Engine, _DirLock
from provchain.errors import ProvchainError
from provchain.ledger import Ledger, VerificationReport
from provchain.locations import data_directory, ledger_file, lock_file, set_custom_root
from provchain.log import configure_logging
from provchain.managers import accounts, bols, boms, contracts, scenarios, traceability
from provchain.models.bom import Threshold
from provchain.models.bol import Bol
from provchain.models.events import Blob, Computed, Delivered, Fetched, LedgerEntry
from provchain.models.provenance import AncestryTree, DescendantSet
from provchain.utils import format as fmt

SCENARIO_SEED = "provchain-scenario"
DOT_FILENAME = "provenance.dot"


class ProvchainGroup(click.Group):
    """Maps errors to exit codes: usage 1, integrity 2, domain 3."""

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        try:
            rv = super().main(
                args=args,
                prog_name=prog_name,
                complete_var=complete_var,
                standalone_mode=False,
                **extra,
            )
        except click.ClickException as e:
            e.show()
            sys.exit(EXIT_USAGE)
        except click.Abort:
            click.echo("Aborted!", err=True)
            sys.exit(EXIT_USAGE)
        except ConfigurationError as e:
            click.echo(f"error: ConfigurationError: {e}", err=True)
            sys.exit(EXIT_USAGE)
        except ProvchainError as e:
            click.echo(f"error: {e.name}: {e}", err=True)
            sys.exit(e.exit_code)
        sys.exit(rv if isinstance(rv, int) else 0)


def format_option(*choices: str):
    choices = choices or ("text", "json")
    return click.option(
        "--format",
        "output_format",
        type=click.Choice(choices),
        default=choices[0],
        show_default=True,
        help="Output format.",
    )


def emit_json(data) -> None:
    if hasattr(data, "model_dump_json"):
        click.echo(data.model_dump_json(indent=2))
    else:
        click.echo(json.dumps(data, indent=2, sort_keys=True))


@contextmanager
def open_engine(shared: bool = False, root: Path | None = None, scenario: bool = False):
    root = root or data_directory()
    # read-only commands leave config.yaml as they found it
    config = load_config(root, write_defaults=not shared)
    if scenario:
        # scenario runs are reproducible unless the data dir configures otherwise
        config = config.model_copy(
            update={
                "clock": config.clock.model_copy(update={"mode": "fixed"})
                if config.clock.mode == "system"
                else config.clock,
                "keys": config.keys.model_copy(update={"seed": config.keys.seed or SCENARIO_SEED}),
            }
        )
    configure_logging(config.logging.level)
    engine = Engine(root, config, shared=shared)
    try:
        yield engine
    finally:
        engine.close()


def _read_input(path: Path) -> bytes:
    if str(path) == "-":
        return click.get_binary_stream("stdin").read()
    return Path(path).read_bytes()


@click.group(cls=ProvchainGroup)
@click.option(
    "--data-dir",
    type=click.Path(file_okay=False, dir_okay=True, path_type=Path),
    help="Data directory (overridden by PROVCHAIN_DATA_DIR).",
)
def cli(data_dir: Path | None):
    """Traceability of data supply chains: BoMs, BoLs, ledger and data contracts."""
    set_custom_root(data_dir)


@cli.command()
@click.argument("thing_to_locate", type=click.Choice(["data", "config", "ledger"]))
def locate(thing_to_locate: str) -> None:
    root = data_directory(create=False)
    if thing_to_locate == "data":
        click.echo(root)
    elif thing_to_locate == "config":
        click.echo(root / "config.yaml")
    else:
        click.echo(ledger_file(root))


# region participant


@cli.group()
def participant() -> None:
    """Register ledger participants."""


@participant.command("register")
@click.argument("participant_id")
@format_option()
def participant_register(participant_id: str, output_format: str) -> None:
    with open_engine() as engine:
        public_key = accounts.register_participant(engine, participant_id)
    if output_format == "json":
        emit_json({"participant": participant_id, "public_key": public_key})
    else:
        click.echo(public_key)


# region bom


@cli.group()
def bom() -> None:
    """Validate, register and show Bills of Materials."""


@bom.command("validate")
@click.argument("path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@format_option()
def bom_validate(path: Path, output_format: str) -> None:
    validated = boms.validate_bom(boms.load_bom_file(path))
    if output_format == "json":
        emit_json(
            {
                "ref": validated.ref,
                "name": validated.name,
                "version": validated.version,
                "nodes": validated.node_count,
            }
        )
    else:
        click.echo(validated.ref)


@bom.command("register")
@click.argument("path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--author", help="Registering participant (default: configured operator).")
@format_option()
def bom_register(path: Path, author: str | None, output_format: str) -> None:
    validated = boms.validate_bom(boms.load_bom_file(path))
    with open_engine() as engine:
        ref = boms.register_bom(engine, validated, author=author)
    if output_format == "json":
        emit_json({"ref": ref, "name": validated.name, "version": validated.version})
    else:
        click.echo(ref)


@bom.command("show")
@click.argument("ref")
@format_option("yaml", "json")
def bom_show(ref: str, output_format: str) -> None:
    with open_engine(shared=True) as engine:
        validated = boms.get_bom(engine, ref)
    data = validated.definition.model_dump(mode="json", exclude_none=True)
    if output_format == "json":
        emit_json({"ref": validated.ref, "definition": data})
    else:
        click.echo(yaml.safe_dump(data, sort_keys=False).rstrip())


# region bol


def _echo_bol(bol: Bol, output_format: str) -> None:
    if output_format == "json":
        emit_json(
            {
                "schema_version": JSON_SCHEMA_VERSION,
                "id": bol.id,
                "bom_ref": bol.bomRef,
                "status": str(bol.status),
                "opened_at": bol.openedAt,
                "bol_hash": bol.bolHash,
                "abort_reason": bol.abortReason,
                "shadows": [
                    {
                        "node": s.node,
                        "value": s.value.model_dump(mode="json"),
                        "provenance": s.provenance.model_dump(mode="json"),
                        "recorded_at": s.recordedAt,
                    }
                    for s in bol.shadows
                ],
            }
        )
    else:
        click.echo(fmt.render_bol(bol))


@cli.group()
def bol() -> None:
    """Open, record, seal, abort and show Bills of Lots."""


@bol.command("open")
@click.argument("bom_ref")
@click.option("--author", help="Operating participant (default: configured operator).")
@format_option()
def bol_open(bom_ref: str, author: str | None, output_format: str) -> None:
    with open_engine() as engine:
        opened = bols.instantiate_bol(engine, bom_ref, author=author)
    if output_format == "json":
        emit_json({"bol_id": opened.id, "bom_ref": opened.bomRef, "opened_at": opened.openedAt})
    else:
        click.echo(opened.id)


@bol.command("record")
@click.argument("bol_id")
@click.argument("node")
@click.option("--file", "file_path", type=click.Path(path_type=Path), help="Value from a file ('-' for stdin).")
@click.option("--value", "text_value", help="Value given as text.")
@click.option("--fetched", help="Origin the value was fetched from.")
@click.option("--computed", help="Assembly that computed the value.")
@click.option("--delivered", help="Request whose delivered payload is the value.")
@click.option("--author", help="Recording participant (default: configured operator).")
@format_option()
def bol_record(
    bol_id: str,
    node: str,
    file_path: Path | None,
    text_value: str | None,
    fetched: str | None,
    computed: str | None,
    delivered: str | None,
    author: str | None,
    output_format: str,
) -> None:
    given = [p for p in (fetched, computed, delivered) if p is not None]
    if len(given) != 1:
        raise click.UsageError("give exactly one of --fetched, --computed, --delivered")
    if file_path is not None and text_value is not None:
        raise click.UsageError("--file and --value are mutually exclusive")

    with open_engine() as engine:
        if delivered is not None:
            if file_path is not None or text_value is not None:
                raise click.UsageError("a delivered value is the request payload")
            request = contracts.get_request(engine, delivered)
            if request.payloadRef is None:
                raise ProvchainError(f"request {delivered} has no delivery")
            value = Blob(ref=request.payloadRef)
            provenance = Delivered(request_id=delivered)
        else:
            if file_path is not None:
                content = _read_input(file_path)
            elif text_value is not None:
                content = text_value.encode()
            else:
                raise click.UsageError("give --file or --value")
            value = bols.store_value(engine, content)
            provenance = Fetched(origin=fetched) if fetched is not None else Computed(assembly=computed)
        updated = bols.record_shadow(engine, bol_id, node, value, provenance, author=author)
    _echo_bol(updated, output_format)


@bol.command("seal")
@click.argument("bol_id")
@click.option("--author", help="Sealing participant (default: configured operator).")
@format_option()
def bol_seal(bol_id: str, author: str | None, output_format: str) -> None:
    with open_engine() as engine:
        sealed = bols.seal_bol(engine, bol_id, author=author)
    if output_format == "json":
        emit_json({"bol_id": sealed.id, "bol_hash": sealed.bolHash, "closed_at": sealed.closedAt})
    else:
        click.echo(sealed.bolHash)


@bol.command("abort")
@click.argument("bol_id")
@click.option("--reason", required=True)
@click.option("--author", help="Aborting participant (default: configured operator).")
@format_option()
def bol_abort(bol_id: str, reason: str, author: str | None, output_format: str) -> None:
    with open_engine() as engine:
        aborted = bols.abort_bol(engine, bol_id, reason, author=author)
    if output_format == "json":
        emit_json({"bol_id": aborted.id, "status": str(aborted.status), "reason": aborted.abortReason})
    else:
        click.echo(str(aborted.status))


@bol.command("show")
@click.argument("bol_id")
@format_option()
def bol_show(bol_id: str, output_format: str) -> None:
    with open_engine(shared=True) as engine:
        found = bols.get_bol(engine, bol_id)
    _echo_bol(found, output_format)


# region trace / track / cost


def _lineage(direction: str, bol_id: str, node: str, depth: int | None, output_format: str) -> None:
    with open_engine(shared=True) as engine:
        graph = traceability.build_graph(engine.ledger, engine.blobs)
        query = traceability.trace if direction == "trace" else traceability.track
        result: AncestryTree | DescendantSet = query(graph, (bol_id, node), max_depth=depth)
    if output_format == "json":
        emit_json(result)
    elif output_format == "dot":
        click.echo(traceability.export_dot(graph, nodes=[result.root, *result.nodes]), nl=False)
    else:
        click.echo(fmt.render_tree(result))


@cli.command()
@click.argument("bol_id")
@click.argument("node")
@click.option("--depth", type=click.IntRange(min=0), help="Maximum levels to follow.")
@format_option("tree", "dot", "json")
def trace(bol_id: str, node: str, depth: int | None, output_format: str) -> None:
    """Where a shadow or assembly instance came from."""
    _lineage("trace", bol_id, node, depth, output_format)


@cli.command()
@click.argument("bol_id")
@click.argument("node")
@click.option("--depth", type=click.IntRange(min=0), help="Maximum levels to follow.")
@format_option("tree", "dot", "json")
def track(bol_id: str, node: str, depth: int | None, output_format: str) -> None:
    """Where a shadow or assembly instance was used."""
    _lineage("track", bol_id, node, depth, output_format)


@cli.command()
@click.argument("bol_id")
@format_option()
def cost(bol_id: str, output_format: str) -> None:
    """Money settled for the data requests of one BoL."""
    with open_engine(shared=True) as engine:
        report = traceability.cost_breakdown(engine.ledger, bol_id)
    if output_format == "json":
        emit_json(report)
    else:
        click.echo(report.total)


# region ledger


@cli.group()
def ledger() -> None:
    """Verify and dump the ledger."""


@ledger.command("verify")
@format_option()
@click.pass_context
def ledger_verify(ctx, output_format: str) -> None:
    root = data_directory()
    lock = _DirLock(lock_file(root), shared=True)
    try:
        report = Ledger.load(ledger_file(root)).verify()
    finally:
        lock.release()
    if output_format == "json":
        emit_json({"schema_version": JSON_SCHEMA_VERSION, "ok": report.ok, **report.model_dump()})
    else:
        click.echo(str(report))
    if not report.ok:
        ctx.exit(EXIT_INTEGRITY)


@ledger.command("dump")
@format_option()
def ledger_dump(output_format: str) -> None:
    with open_engine(shared=True) as engine:
        entries: list[LedgerEntry] = engine.ledger.entries
    if output_format == "json":
        click.echo(
            json.dumps(
                [e.model_dump(mode="json") for e in entries],
                indent=2,
                sort_keys=True,
            )
        )
    else:
        for entry in entries:
            click.echo(fmt.render_entry(entry))


# region blob


@cli.group()
def blob() -> None:
    """Content-addressed blob storage."""


@blob.command("put")
@click.argument("path", type=click.Path(path_type=Path))
@format_option()
def blob_put(path: Path, output_format: str) -> None:
    content = _read_input(path)
    with open_engine() as engine:
        ref = engine.blobs.put(content)
    if output_format == "json":
        emit_json({"ref": ref, "size": len(content)})
    else:
        click.echo(ref)


@blob.command("get")
@click.argument("ref")
def blob_get(ref: str) -> None:
    with open_engine(shared=True) as engine:
        content = engine.blobs.get(ref)
    stdout = click.get_binary_stream("stdout")
    stdout.write(content)
    stdout.flush()


# region account


@cli.group()
def account() -> None:
    """Fund accounts and read balances."""


@account.command("fund")
@click.argument("participant_id")
@click.argument("amount", type=click.IntRange(min=1))
@format_option()
def account_fund(participant_id: str, amount: int, output_format: str) -> None:
    with open_engine() as engine:
        funded = accounts.fund_account(engine, participant_id, amount)
    if output_format == "json":
        emit_json({"participant": funded.id, "balance": funded.balance})
    else:
        click.echo(funded.balance)


@account.command("balance")
@click.argument("participant_id")
@format_option()
def account_balance(participant_id: str, output_format: str) -> None:
    with open_engine(shared=True) as engine:
        balance = accounts.get_balance(engine, participant_id)
    if output_format == "json":
        emit_json({"participant": participant_id, "balance": balance})
    else:
        click.echo(balance)


# region contract


def _parse_threshold(value: str) -> Threshold:
    try:
        metric, low, high = value.split(":")
        return Threshold(
            metric=metric,
            min=float(low) if low else None,
            max=float(high) if high else None,
        )
    except ValueError as e:
        raise click.BadParameter(f"expected metric:min:max, got {value!r}") from e


def _parse_metric(value: str) -> tuple[str, float]:
    name, sep, number = value.partition("=")
    try:
        if not sep:
            raise ValueError
        return name, float(number)
    except ValueError:
        raise click.BadParameter(f"expected name=value, got {value!r}") from None


def _echo_outcome(outcome, output_format: str) -> None:
    if output_format == "json":
        emit_json(outcome)
    elif outcome.outcome == "Accepted":
        click.echo(f"Accepted {outcome.payload_ref}")
    else:
        click.echo(f"{outcome.outcome} elapsed={outcome.elapsed_ms} limit={outcome.limit_ms}")


@cli.group()
def contract() -> None:
    """Payable data contracts."""


@contract.command("deploy")
@click.option("--provider", required=True)
@click.option("--price", type=click.IntRange(min=0), required=True)
@click.option("--max-response-ms", type=int, required=True)
@click.option("--interface", "interface_path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--threshold", "thresholds", multiple=True, help="Advisory bound metric:min:max.")
@format_option()
def contract_deploy(
    provider: str,
    price: int,
    max_response_ms: int,
    interface_path: Path | None,
    thresholds: tuple[str, ...],
    output_format: str,
) -> None:
    interface = None
    if interface_path is not None:
        try:
            interface = yaml.safe_load(interface_path.read_text())
        except yaml.YAMLError as e:
            raise click.BadParameter(f"interface is not structured text: {e}") from e
    with open_engine() as engine:
        address = contracts.deploy_contract(
            engine,
            provider,
            price,
            max_response_ms,
            interface=interface,
            thresholds=[_parse_threshold(t) for t in thresholds],
        )
    if output_format == "json":
        emit_json({"address": address, "provider": provider, "price": price})
    else:
        click.echo(address)


@contract.command("request")
@click.argument("address")
@click.option("--requester", required=True)
@click.option("--params", "params_path", type=click.Path(path_type=Path), help="Request parameters file.")
@click.option("--bol", "bol_id", help="BoL the request is issued for.")
@format_option()
def contract_request(
    address: str,
    requester: str,
    params_path: Path | None,
    bol_id: str | None,
    output_format: str,
) -> None:
    params = _read_input(params_path) if params_path is not None else b""
    with open_engine() as engine:
        request_id = contracts.request_data(engine, requester, address, params, bol_id=bol_id)
        escrow = contracts.get_request(engine, request_id).escrow
    if output_format == "json":
        emit_json({"request_id": request_id, "contract": address, "escrow": escrow})
    else:
        click.echo(request_id)


@contract.command("deliver")
@click.argument("request_id")
@click.option("--payload", "payload_path", type=click.Path(path_type=Path), required=True)
@click.option("--at", type=int, help="Delivery timestamp in ms (default: engine clock).")
@click.option("--metric", "metrics", multiple=True, help="Measured metric name=value.")
@click.option("--source-bol", help="Provider BoL holding the delivered value.")
@click.option("--source-node", help="Node of --source-bol holding the delivered value.")
@format_option()
def contract_deliver(
    request_id: str,
    payload_path: Path,
    at: int | None,
    metrics: tuple[str, ...],
    source_bol: str | None,
    source_node: str | None,
    output_format: str,
) -> None:
    if (source_bol is None) != (source_node is None):
        raise click.UsageError("--source-bol and --source-node go together")
    source = (source_bol, source_node) if source_bol is not None else None
    with open_engine() as engine:
        outcome = contracts.deliver_data(
            engine,
            request_id,
            _read_input(payload_path),
            at=at,
            metrics=dict(_parse_metric(m) for m in metrics),
            source=source,
        )
    _echo_outcome(outcome, output_format)


@contract.command("expire")
@click.argument("request_id")
@click.option("--at", type=int, help="Expiry timestamp in ms (default: engine clock).")
@format_option()
def contract_expire(request_id: str, at: int | None, output_format: str) -> None:
    with open_engine() as engine:
        outcome = contracts.expire_request(engine, request_id, at=at)
    _echo_outcome(outcome, output_format)


@contract.command("show")
@click.argument("identifier")
@format_option()
def contract_show(identifier: str, output_format: str) -> None:
    """Show a contract by address, or a request by id."""
    with open_engine(shared=True) as engine:
        try:
            found = contracts.get_contract(engine, identifier)
            is_contract = True
        except ProvchainError:
            found = contracts.get_request(engine, identifier)
            is_contract = False
    if output_format == "json":
        if is_contract:
            emit_json(
                {
                    "address": found.address,
                    "provider": found.provider,
                    "price": found.price,
                    "max_response_ms": found.maxResponseMs,
                    "interface_ref": found.interfaceRef,
                    "thresholds": [t.model_dump(mode="json") for t in found.thresholds],
                }
            )
        else:
            emit_json(
                {
                    "request_id": found.id,
                    "contract": found.contractAddress,
                    "requester": found.requester,
                    "state": str(found.state),
                    "escrow": found.escrow,
                    "requested_at": found.requestedAt,
                    "payload_ref": found.payloadRef,
                    "elapsed_ms": found.elapsedMs,
                }
            )
    else:
        click.echo(fmt.render_contract(found) if is_contract else fmt.render_request(found))


# region scenario / export / schema


@cli.group()
def scenario() -> None:
    """Reproducible end-to-end supply chain runs."""


@scenario.command("run")
@click.argument("name", type=click.Choice(sorted(scenarios.SCENARIOS)))
@click.option("--runs", type=click.IntRange(min=0), default=1, show_default=True)
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), help="Write into this directory instead of the data dir.")
@format_option()
def scenario_run(name: str, runs: int, out: Path | None, output_format: str) -> None:
    with open_engine(root=out, scenario=True) as engine:
        with Progress(
            TextColumn("[progress.description]{task.description}"),
            BarColumn(),
            TaskProgressColumn(),
            TimeRemainingColumn(),
            transient=True,
            console=Console(stderr=True),
        ) as progress:
            task = progress.add_task(
                f"Running {name}...", total=scenarios.SCENARIO_STEPS[name](runs) or None
            )
            bol_ids = scenarios.run_scenario(
                engine, name, runs, progress=lambda: progress.update(task, advance=1)
            )
        graph = traceability.build_graph(engine.ledger, engine.blobs)
        dot_path = engine.root / DOT_FILENAME
        dot_path.write_text(traceability.export_dot(graph))
        summary = {
            "scenario": name,
            "runs": runs,
            "bol_ids": bol_ids,
            "entries": len(engine.ledger),
            "tip": engine.ledger.tip.entry_hash if engine.ledger.tip else None,
            "dot": str(dot_path),
        }
    if output_format == "json":
        emit_json(summary)
    else:
        for bol_id in bol_ids:
            click.echo(bol_id)


@cli.group()
def export() -> None:
    """Export the provenance graph."""


@export.command("dot")
@click.option("--bol", "bol_id", help="Limit the export to one BoL.")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), help="Write to a file.")
@format_option("dot", "json")
def export_dot(bol_id: str | None, out: Path | None, output_format: str) -> None:
    with open_engine(shared=True) as engine:
        graph = traceability.build_graph(engine.ledger, engine.blobs)
    if output_format == "json":
        text = json.dumps(traceability.export_json(graph, bol_id=bol_id), indent=2, sort_keys=True) + "\n"
    else:
        text = traceability.export_dot(graph, bol_id=bol_id)
    if out is not None:
        out.write_text(text)
    else:
        click.echo(text, nl=False)


SCHEMAS = {
    "trace": AncestryTree,
    "track": DescendantSet,
    "cost": traceability.CostReport,
    "verify": VerificationReport,
    "outcome": contracts.Accepted,
}


@cli.command()
@click.argument("name", type=click.Choice(sorted(SCHEMAS)))
def schema(name: str) -> None:
    """Print the JSON Schema of a JSON output."""
    emit_json(SCHEMAS[name].model_json_schema())


if __name__ == "__main__":
    cli()
