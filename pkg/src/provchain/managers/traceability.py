"""Where-from and where-used queries over every closed BoL on the ledger."""

from collections import defaultdict
from typing import Any, Callable, Iterable, Literal

import networkx as nx
from pydantic import BaseModel, Field

from provchain.blobstore import BlobStore
from provchain.constants import DERIVED_FROM_SCHEME, JSON_SCHEMA_VERSION
from provchain.errors import LedgerInvalid, ProvenanceCycle, UnknownBol
from provchain.ledger import Ledger
from provchain.log import get_logger
from provchain.managers.boms import load_bom_blob
from provchain.models.bom import ValidatedBom
from provchain.models.events import (
    Blob,
    BolAborted,
    BolOpened,
    BolSealed,
    DataDelivered,
    DataRequested,
    Delivered,
    Fetched,
    PaymentRefunded,
    PaymentSettled,
    ShadowRecorded,
)
from provchain.models.provenance import (
    CROSS_BOL_EDGES,
    AncestryTree,
    BolSummary,
    DescendantSet,
    LineageBranch,
    ProvenanceGraph,
    ProvNode,
)

logger = get_logger(__name__)

_KINDS = {
    "assembly": "AssemblyInstance",
    "data_source": "DataSourceInstance",
    "artifact": "ArtifactInstance",
}


class _BolFacts:
    def __init__(self, bol_id: str, bom_ref: str):
        self.bol_id = bol_id
        self.bom_ref = bom_ref
        self.status: str | None = None
        self.closed_seq: int | None = None
        # node -> (ShadowRecorded event, seq)
        self.shadows: dict[str, tuple[ShadowRecorded, int]] = {}


def parse_derived_from(origin: str) -> tuple[str, str] | None:
    """``provchain://<bol_id>/<node>`` -> (bol_id, node)."""
    if not origin.startswith(DERIVED_FROM_SCHEME):
        return None
    rest = origin[len(DERIVED_FROM_SCHEME) :]
    bol_id, sep, node = rest.partition("/")
    if not sep or not bol_id or not node:
        return None
    return bol_id, node


def derived_from_origin(bol_id: str, node: str) -> str:
    return f"{DERIVED_FROM_SCHEME}{bol_id}/{node}"


# region Build


def _require_verified(ledger: Ledger) -> None:
    report = ledger.verify()
    if not report.ok:
        raise LedgerInvalid(report.violation.seq, report.violation.cause)


def build_graph(ledger: Ledger, blobs: BlobStore) -> ProvenanceGraph:
    """Provenance DAG over all sealed and aborted BoLs."""
    _require_verified(ledger)

    facts: dict[str, _BolFacts] = {}
    deliveries: dict[str, tuple[str, str]] = {}
    for entry in ledger.entries:
        event = entry.event
        match event:
            case BolOpened():
                facts[entry.entry_hash] = _BolFacts(entry.entry_hash, event.bom_ref)
            case ShadowRecorded():
                facts[event.bol_id].shadows[event.node] = (event, entry.seq)
            case BolSealed():
                facts[event.bol_id].status = "Sealed"
                facts[event.bol_id].closed_seq = entry.seq
            case BolAborted():
                facts[event.bol_id].status = "Aborted"
                facts[event.bol_id].closed_seq = entry.seq
            case DataDelivered() if event.source_bol and event.source_node:
                deliveries[event.request_id] = (event.source_bol, event.source_node)

    closed = {bol_id: f for bol_id, f in facts.items() if f.status is not None}
    boms: dict[str, ValidatedBom] = {}
    for f in closed.values():
        if f.bom_ref not in boms:
            boms[f.bom_ref] = load_bom_blob(blobs, f.bom_ref)

    graph = nx.DiGraph()
    summaries: dict[str, BolSummary] = {}
    index: dict[tuple[str, str], ProvNode] = {}

    def add(bol_id: str, node: str, bom: ValidatedBom) -> ProvNode:
        prov = ProvNode(bol_id=bol_id, node=node, kind=_KINDS[bom.node_kind(node)])
        index[prov.key] = prov
        graph.add_node(prov, name=bom.name_of(node), aborted=closed[bol_id].status == "Aborted")
        return prov

    for bol_id in sorted(closed):
        f = closed[bol_id]
        bom = boms[f.bom_ref]
        summaries[bol_id] = BolSummary(
            bol_id=bol_id,
            bom_ref=f.bom_ref,
            bom_name=bom.name,
            status=f.status,
            closed_seq=f.closed_seq,
        )
        for node in sorted(f.shadows):
            add(bol_id, node, bom)
        for assembly in sorted(bom.assemblies.values(), key=lambda a: a.id):
            asm = add(bol_id, assembly.id, bom)
            for source in sorted(assembly.inputs):
                if source in f.shadows:
                    graph.add_edge(index[(bol_id, source)], asm, kind="FeedsAssembly")
            for artifact in sorted(assembly.artifacts):
                if artifact in f.shadows:
                    graph.add_edge(index[(bol_id, artifact)], asm, kind="ConsumesArtifact")
            for output in sorted(assembly.outputs):
                if output in f.shadows:
                    graph.add_edge(asm, index[(bol_id, output)], kind="ProducedBy")

    _link_across_bols(graph, closed, boms, deliveries, index)

    if not nx.is_directed_acyclic_graph(graph):
        cycle = nx.find_cycle(graph)
        raise ProvenanceCycle([u.label for u, _ in cycle] + [cycle[-1][1].label])

    logger.debug(
        "provenance.built",
        bols=len(summaries),
        nodes=graph.number_of_nodes(),
        edges=graph.number_of_edges(),
    )
    return ProvenanceGraph(graph, summaries)


def _link_across_bols(graph, closed, boms, deliveries, index) -> None:
    # Blob ref -> produced shadows carrying it, with the producing BoL's close seq.
    produced: dict[str, list[tuple[str, str, int]]] = defaultdict(list)
    for bol_id in sorted(closed):
        f = closed[bol_id]
        bom = boms[f.bom_ref]
        for node, (event, _) in sorted(f.shadows.items()):
            if bom.is_output(node) and isinstance(event.value, Blob):
                produced[event.value.ref].append((bol_id, node, f.closed_seq))

    def link(source: tuple[str, str], target: ProvNode, seq: int, kind: str) -> None:
        src_bol, src_node = source
        if src_bol == target.bol_id or src_bol not in closed:
            return
        if closed[src_bol].closed_seq >= seq or source not in index:
            return
        if not graph.has_edge(index[source], target):
            graph.add_edge(index[source], target, kind=kind)

    for bol_id in sorted(closed):
        f = closed[bol_id]
        bom = boms[f.bom_ref]
        for node, (event, seq) in sorted(f.shadows.items()):
            target = index[(bol_id, node)]
            provenance = event.provenance
            if isinstance(provenance, Fetched):
                derived = parse_derived_from(provenance.origin)
                if derived is not None:
                    link(derived, target, seq, "ExplicitDerivedFrom")
            if bom.is_output(node):
                continue
            if isinstance(provenance, Delivered) and provenance.request_id in deliveries:
                link(deliveries[provenance.request_id], target, seq, "CrossBolContentMatch")
            if isinstance(event.value, Blob):
                for src_bol, src_node, _ in produced.get(event.value.ref, []):
                    link((src_bol, src_node), target, seq, "CrossBolContentMatch")


# region Query


def _walk(graph: ProvenanceGraph, root: ProvNode, backwards: bool, max_depth: int | None):
    visited = {root}
    branches: dict[ProvNode, LineageBranch] = {}
    top: list[LineageBranch] = []
    frontier = [root]
    depth = 0
    while frontier and (max_depth is None or depth < max_depth):
        discovered = []
        for parent in frontier:
            neighbours = graph.parents(parent) if backwards else graph.children(parent)
            for neighbour in neighbours:
                if neighbour in visited:
                    continue
                visited.add(neighbour)
                edge = (
                    graph.edge_kind(neighbour, parent)
                    if backwards
                    else graph.edge_kind(parent, neighbour)
                )
                branch = LineageBranch(node=neighbour, edge=edge)
                branches[neighbour] = branch
                (top if parent == root else branches[parent].children).append(branch)
                discovered.append(neighbour)
        if not discovered:
            break
        depth += 1
        frontier = discovered
    visited.discard(root)
    return depth, top, sorted(visited, key=lambda n: n.key)


def trace(
    graph: ProvenanceGraph, node: ProvNode | tuple[str, str], max_depth: int | None = None
) -> AncestryTree:
    """Everything the node was derived from, nearest first."""
    root = graph.node(*node) if isinstance(node, tuple) else graph.node(*node.key)
    depth, children, nodes = _walk(graph, root, backwards=True, max_depth=max_depth)
    return AncestryTree(root=root, depth=depth, children=children, nodes=nodes)


def track(
    graph: ProvenanceGraph, node: ProvNode | tuple[str, str], max_depth: int | None = None
) -> DescendantSet:
    """Everything derived from the node, including consumers in other BoLs."""
    root = graph.node(*node) if isinstance(node, tuple) else graph.node(*node.key)
    depth, children, nodes = _walk(graph, root, backwards=False, max_depth=max_depth)
    return DescendantSet(root=root, depth=depth, children=children, nodes=nodes)


# region Cost


class RequestCost(BaseModel):
    request_id: str
    state: Literal["Pending", "Settled", "Refunded"]
    amount: int


class CostReport(BaseModel):
    schema_version: str = JSON_SCHEMA_VERSION
    bol_id: str
    total: int
    requests: list[RequestCost] = Field(default_factory=list)


def cost_breakdown(ledger: Ledger, bol_id: str) -> CostReport:
    entries = ledger.entries
    if not any(isinstance(e.event, BolOpened) and e.entry_hash == bol_id for e in entries):
        raise UnknownBol(bol_id)

    request_ids: set[str] = set()
    for entry in entries:
        event = entry.event
        if isinstance(event, DataRequested) and event.bol_id == bol_id:
            request_ids.add(entry.entry_hash)
        elif (
            isinstance(event, ShadowRecorded)
            and event.bol_id == bol_id
            and isinstance(event.provenance, Delivered)
        ):
            request_ids.add(event.provenance.request_id)

    costs = {rid: RequestCost(request_id=rid, state="Pending", amount=0) for rid in request_ids}
    for entry in entries:
        event = entry.event
        if isinstance(event, PaymentSettled) and event.request_id in costs:
            costs[event.request_id] = RequestCost(
                request_id=event.request_id, state="Settled", amount=event.amount
            )
        elif isinstance(event, PaymentRefunded) and event.request_id in costs:
            costs[event.request_id] = RequestCost(
                request_id=event.request_id, state="Refunded", amount=0
            )

    requests = [costs[rid] for rid in sorted(costs)]
    return CostReport(bol_id=bol_id, total=sum(r.amount for r in requests), requests=requests)


def cost_rollup(graph: ProvenanceGraph | None, ledger: Ledger, bol_id: str) -> int:
    """Money settled for the requests a BoL issued; refunds count as zero."""
    return cost_breakdown(ledger, bol_id).total


# region Export


def _escape(value: str) -> str:
    return value.replace("\\", "\\\\").replace('"', '\\"')


def _quote(value: str) -> str:
    return '"' + _escape(value) + '"'


def _node_label(graph: ProvenanceGraph, node: ProvNode) -> str:
    # a backslash-n inside a quoted DOT label is a line break
    return f'"{_escape(graph.name_of(node))}\\n({_escape(node.label)})"'


def _path(node: ProvNode) -> str:
    return f"{node.bol_id}/{node.node}"


def _dot_id(node: ProvNode) -> str:
    return _quote(_path(node))


def _scope(
    graph: ProvenanceGraph, bol_id: str | None, nodes: Iterable[ProvNode] | None
) -> tuple[list[str], Callable[[ProvNode], bool]]:
    if bol_id is not None:
        graph.bol(bol_id)
    keep = set(nodes) if nodes is not None else None

    def included(node: ProvNode) -> bool:
        if bol_id is not None and node.bol_id != bol_id:
            return False
        return keep is None or node in keep

    if bol_id is not None:
        bol_ids = [bol_id]
    elif keep is not None:
        bol_ids = sorted({n.bol_id for n in keep})
    else:
        bol_ids = sorted(graph.bols)
    return bol_ids, included


def export_dot(
    graph: ProvenanceGraph,
    bol_id: str | None = None,
    nodes: Iterable[ProvNode] | None = None,
) -> str:
    """Deterministic Graphviz rendering; one cluster per BoL, cross-BoL edges dashed.

    ``bol_id`` limits the output to one BoL, ``nodes`` to a node set such as a
    trace result.
    """
    bol_ids, included = _scope(graph, bol_id, nodes)

    lines = ["digraph provenance {"]
    for current in bol_ids:
        summary = graph.bols[current]
        label = f"{summary.bom_name} {current[:8]}"
        lines.append(f"  subgraph cluster_{current} {{")
        if summary.aborted:
            lines.append(f"    label={_quote(label + ' (aborted)')};")
            lines.append("    style=dashed;")
        else:
            lines.append(f"    label={_quote(label)};")
        for node in filter(included, graph.nodes_of(current)):
            shape = "ellipse" if node.is_assembly else "box"
            lines.append(f"    {_dot_id(node)} [shape={shape}, label={_node_label(graph, node)}];")
        lines.append("  }")

    for source, target, kind in graph.edges:
        if not (included(source) and included(target)):
            continue
        style = " [style=dashed]" if kind in CROSS_BOL_EDGES else ""
        lines.append(f"  {_dot_id(source)} -> {_dot_id(target)}{style};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_json(graph: ProvenanceGraph, bol_id: str | None = None) -> dict[str, Any]:
    """The same scope as ``export_dot`` as plain data."""
    bol_ids, included = _scope(graph, bol_id, None)
    return {
        "schema_version": JSON_SCHEMA_VERSION,
        "bols": [graph.bols[b].model_dump(mode="json") for b in bol_ids],
        "nodes": [
            {
                "bol_id": node.bol_id,
                "node": node.node,
                "name": graph.name_of(node),
                "assembly": node.is_assembly,
            }
            for b in bol_ids
            for node in filter(included, graph.nodes_of(b))
        ],
        "edges": [
            {"source": _path(source), "target": _path(target), "kind": kind}
            for source, target, kind in graph.edges
            if included(source) and included(target)
        ],
    }
