from typing import Literal

import networkx as nx
from pydantic import BaseModel, ConfigDict, Field

from provchain.constants import JSON_SCHEMA_VERSION
from provchain.errors import UnknownBol, UnknownProvNode

NodeKind = Literal["DataSourceInstance", "ArtifactInstance", "AssemblyInstance"]
EdgeKind = Literal[
    "FeedsAssembly",
    "ProducedBy",
    "ConsumesArtifact",
    "CrossBolContentMatch",
    "ExplicitDerivedFrom",
]
CROSS_BOL_EDGES = ("CrossBolContentMatch", "ExplicitDerivedFrom")

BOL_PREFIX = 8


class ProvNode(BaseModel):
    model_config = ConfigDict(frozen=True)

    bol_id: str
    node: str
    kind: NodeKind

    @property
    def key(self) -> tuple[str, str]:
        return (self.bol_id, self.node)

    @property
    def label(self) -> str:
        return f"{self.node}@{self.bol_id[:BOL_PREFIX]}"

    @property
    def is_assembly(self) -> bool:
        return self.kind == "AssemblyInstance"

    def __str__(self) -> str:
        return self.label


class BolSummary(BaseModel):
    model_config = ConfigDict(frozen=True)

    bol_id: str
    bom_ref: str
    bom_name: str
    status: Literal["Sealed", "Aborted"]
    closed_seq: int

    @property
    def aborted(self) -> bool:
        return self.status == "Aborted"


def sort_nodes(nodes) -> list[ProvNode]:
    return sorted(nodes, key=lambda n: n.key)


class ProvenanceGraph:
    """Immutable snapshot of the cross-BoL provenance DAG."""

    def __init__(self, graph: nx.DiGraph | None = None, bols: dict[str, BolSummary] | None = None):
        self.graph = graph if graph is not None else nx.DiGraph()
        self.bols = dict(bols or {})
        self._index = {n.key: n for n in self.graph.nodes}

    def __len__(self) -> int:
        return self.graph.number_of_nodes()

    def __contains__(self, node: ProvNode) -> bool:
        return node in self.graph

    @property
    def nodes(self) -> list[ProvNode]:
        return sort_nodes(self.graph.nodes)

    @property
    def edges(self) -> list[tuple[ProvNode, ProvNode, EdgeKind]]:
        return sorted(
            ((u, v, kind) for u, v, kind in self.graph.edges(data="kind")),
            key=lambda e: (e[0].key, e[1].key),
        )

    def name_of(self, node: ProvNode) -> str:
        """Human name of the BoM node behind ``node``."""
        return self.graph.nodes[node].get("name") or node.node

    def edge_kind(self, source: ProvNode, target: ProvNode) -> EdgeKind:
        return self.graph.edges[source, target]["kind"]

    def node(self, bol_id: str, node: str) -> ProvNode:
        try:
            return self._index[(bol_id, node)]
        except KeyError:
            raise UnknownProvNode(bol_id, node) from None

    def bol(self, bol_id: str) -> BolSummary:
        try:
            return self.bols[bol_id]
        except KeyError:
            raise UnknownBol(bol_id) from None

    def nodes_of(self, bol_id: str) -> list[ProvNode]:
        return [n for n in self.nodes if n.bol_id == bol_id]

    def parents(self, node: ProvNode) -> list[ProvNode]:
        return sort_nodes(self.graph.predecessors(node))

    def children(self, node: ProvNode) -> list[ProvNode]:
        return sort_nodes(self.graph.successors(node))


class LineageBranch(BaseModel):
    node: ProvNode
    edge: EdgeKind
    children: list["LineageBranch"] = Field(default_factory=list)


class _Lineage(BaseModel):
    schema_version: str = JSON_SCHEMA_VERSION
    root: ProvNode
    depth: int = 0
    children: list[LineageBranch] = Field(default_factory=list)
    # every reached node once, sorted by (bol_id, node)
    nodes: list[ProvNode] = Field(default_factory=list)

    def __contains__(self, node: ProvNode) -> bool:
        return node in set(self.nodes)

    def __len__(self) -> int:
        return len(self.nodes)

    def node_ids(self) -> set[str]:
        return {n.node for n in self.nodes}


class AncestryTree(_Lineage):
    direction: Literal["trace"] = "trace"

    @property
    def ancestors(self) -> set[ProvNode]:
        return set(self.nodes)


class DescendantSet(_Lineage):
    direction: Literal["track"] = "track"

    @property
    def descendants(self) -> set[ProvNode]:
        return set(self.nodes)
