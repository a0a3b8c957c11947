"""Plain-text renderings used by the CLI's default ``text`` format."""

import io

from rich.console import Console
from rich.tree import Tree

from provchain.models.bol import Bol
from provchain.models.contract import DataContract, DataRequest
from provchain.models.events import LedgerEntry
from provchain.models.provenance import LineageBranch, ProvNode

_KIND_SHORT = {
    "DataSourceInstance": "data",
    "ArtifactInstance": "artifact",
    "AssemblyInstance": "assembly",
}


def _node_text(node: ProvNode, edge: str | None = None) -> str:
    text = f"{node.label} [{_KIND_SHORT[node.kind]}]"
    return f"{text} <{edge}>" if edge else text


def render_tree(lineage) -> str:
    tree = Tree(_node_text(lineage.root), highlight=False)

    def grow(parent: Tree, branches: list[LineageBranch]) -> None:
        for branch in sorted(branches, key=lambda b: b.node.key):
            grow(parent.add(_node_text(branch.node, branch.edge)), branch.children)

    grow(tree, lineage.children)
    buffer = io.StringIO()
    console = Console(
        file=buffer, width=240, color_system=None, force_terminal=False, soft_wrap=True
    )
    console.print(tree)
    summary = f"{lineage.direction}: {len(lineage.nodes)} nodes, depth {lineage.depth}"
    return buffer.getvalue().rstrip() + "\n" + summary


def render_bol(bol: Bol) -> str:
    lines = [
        f"bol {bol.id}",
        f"bom {bol.bomRef}",
        f"status {bol.status}",
        f"opened_at {bol.openedAt}",
    ]
    if bol.bolHash:
        lines.append(f"bol_hash {bol.bolHash}")
    if bol.abortReason:
        lines.append(f"reason {bol.abortReason}")
    for shadow in bol.shadows:
        if shadow.valueKind == "inline":
            value = f"inline:{shadow.inlineData.hex()}" if len(shadow.inlineData) <= 32 else (
                f"inline:{len(shadow.inlineData)}B"
            )
        else:
            value = f"blob:{shadow.blobRef}"
        lines.append(
            f"  {shadow.node} {value} {shadow.provenanceKind}:{shadow.provenanceValue} "
            f"at={shadow.recordedAt}"
        )
    return "\n".join(lines)


def render_entry(entry: LedgerEntry) -> str:
    return (
        f"{entry.seq} {entry.timestamp} {entry.author} {entry.type} "
        f"{entry.entry_hash}"
    )


def render_contract(contract: DataContract) -> str:
    return "\n".join(
        [
            f"contract {contract.address}",
            f"provider {contract.provider}",
            f"price {contract.price}",
            f"max_response_ms {contract.maxResponseMs}",
            f"interface {contract.interfaceRef}",
            *(
                f"threshold {t.metric} min={t.min} max={t.max}"
                for t in contract.thresholds
            ),
        ]
    )


def render_request(request: DataRequest) -> str:
    lines = [
        f"request {request.id}",
        f"contract {request.contractAddress}",
        f"requester {request.requester}",
        f"state {request.state}",
        f"escrow {request.escrow}",
        f"requested_at {request.requestedAt}",
    ]
    if request.payloadRef:
        lines.append(f"payload {request.payloadRef} elapsed_ms={request.elapsedMs}")
    return "\n".join(lines)
