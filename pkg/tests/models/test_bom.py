import random

import networkx as nx
import pytest

from provchain.errors import (
    BadAccessSpec,
    BadContentRef,
    BomParseError,
    CyclicBom,
    DanglingReference,
    DuplicateId,
    EmptyBom,
    IncompleteAssembly,
    MultipleProducers,
)
from provchain.managers.boms import (
    load_static_bom,
    parse_bom,
    root_inputs,
    topological_order,
    validate_bom,
)
from provchain.models.bom import (
    ArtifactDef,
    AssemblyDef,
    BomDef,
    ContractAccess,
    DataSourceDef,
    InternalAccess,
    StaticUrlAccess,
)
from provchain.utils.canonical import canonical_encode


def source(node_id, access=None):
    return DataSourceDef(id=node_id, name=node_id, access=access or InternalAccess())


def assembly(node_id, inputs=(), artifacts=(), outputs=()):
    return AssemblyDef(
        id=node_id,
        name=node_id,
        inputs=list(inputs),
        artifacts=list(artifacts),
        outputs=list(outputs),
    )


def test_hpc_cs_bom_validates():
    bom = validate_bom(load_static_bom("hpc-cs"))

    assert bom.node_count == 4
    assert bom.shadowable == ["congestion-model", "congestion-score", "location-photo"]
    assert bom.producers == {"congestion-score": "traffic-scene-analysis"}
    assert root_inputs(bom) == ["congestion-model", "location-photo"]
    assert len(bom.ref) == 64
    order = topological_order(bom)
    assert order.index("location-photo") < order.index("traffic-scene-analysis")
    assert order.index("traffic-scene-analysis") < order.index("congestion-score")


@pytest.mark.parametrize(
    "name",
    ["hpc-cs", "ltc-cs-training", "fusion-member", "fusion", "congestion-aggregator"],
)
def test_static_boms_validate(name):
    assert validate_bom(load_static_bom(name)).name


def test_self_cycle_is_rejected():
    definition = BomDef(
        name="loop",
        version="1",
        assemblies=[assembly("A", inputs=["D"], outputs=["D"])],
        data_sources=[source("D")],
    )
    with pytest.raises(CyclicBom) as exc:
        validate_bom(definition)
    assert exc.value.path == ["A", "D", "A"]


def test_longer_cycle_is_rejected():
    definition = BomDef(
        name="loop",
        version="1",
        assemblies=[
            assembly("A", inputs=["x"], outputs=["y"]),
            assembly("B", inputs=["y"], outputs=["x"]),
        ],
        data_sources=[source("x"), source("y")],
    )
    with pytest.raises(CyclicBom) as exc:
        validate_bom(definition)
    assert exc.value.path[0] == exc.value.path[-1]


def test_empty_bom():
    with pytest.raises(EmptyBom):
        validate_bom(BomDef(name="empty", version="1"))


def test_dangling_reference():
    definition = BomDef(
        name="dangling",
        version="1",
        assemblies=[assembly("A", inputs=["in"], outputs=["missing"])],
        data_sources=[source("in")],
    )
    with pytest.raises(DanglingReference) as exc:
        validate_bom(definition)
    assert exc.value.node == "missing"


def test_duplicate_id():
    definition = BomDef(
        name="dup",
        version="1",
        assemblies=[assembly("A", inputs=["in"], outputs=["out"])],
        data_sources=[source("in"), source("out")],
        artifacts=[ArtifactDef(id="in", name="clash", kind="model")],
    )
    with pytest.raises(DuplicateId):
        validate_bom(definition)


def test_multiple_producers():
    definition = BomDef(
        name="multi",
        version="1",
        assemblies=[
            assembly("A", inputs=["in"], outputs=["out"]),
            assembly("B", inputs=["in"], outputs=["out"]),
        ],
        data_sources=[source("in"), source("out")],
    )
    with pytest.raises(MultipleProducers):
        validate_bom(definition)


def test_incomplete_assembly():
    definition = BomDef(
        name="incomplete",
        version="1",
        assemblies=[assembly("A", inputs=["in"])],
        data_sources=[source("in")],
    )
    with pytest.raises(IncompleteAssembly):
        validate_bom(definition)


def test_produced_source_must_be_internal():
    definition = BomDef(
        name="access",
        version="1",
        assemblies=[assembly("A", inputs=["in"], outputs=["out"])],
        data_sources=[source("in"), source("out", StaticUrlAccess(url="https://example.org/x"))],
    )
    with pytest.raises(BadAccessSpec) as exc:
        validate_bom(definition)
    assert exc.value.node == "out"


def test_contract_access_needs_content_address():
    definition = BomDef(
        name="access",
        version="1",
        assemblies=[assembly("A", inputs=["in"], outputs=["out"])],
        data_sources=[source("in", ContractAccess(address="not-a-ref")), source("out")],
    )
    with pytest.raises(BadAccessSpec):
        validate_bom(definition)


def test_artifact_content_ref_checked():
    definition = BomDef(
        name="artifact",
        version="1",
        assemblies=[assembly("A", inputs=["in"], artifacts=["m"], outputs=["out"])],
        data_sources=[source("in"), source("out")],
        artifacts=[ArtifactDef(id="m", name="model", kind="model", content_ref="xyz")],
    )
    with pytest.raises(BadContentRef):
        validate_bom(definition)


def test_parse_rejects_unknown_keys():
    text = """
name: x
version: "1"
colour: blue
assemblies: []
"""
    with pytest.raises(BomParseError):
        parse_bom(text)


def test_parse_rejects_non_mapping():
    with pytest.raises(BomParseError):
        parse_bom("- just\n- a list\n")


def test_parse_json_document():
    text = (
        '{"name": "j", "version": "1", "assemblies": [{"id": "A", "name": "A", '
        '"inputs": ["i"], "outputs": ["o"]}], "data_sources": '
        '[{"id": "i", "name": "i", "access": {"type": "static_url", "url": "https://x"}}, '
        '{"id": "o", "name": "o"}]}'
    )
    bom = validate_bom(parse_bom(text))
    assert bom.node_kind("i") == "data_source"
    assert isinstance(bom.data_sources["i"].access, StaticUrlAccess)


def test_declaration_order_does_not_change_encoding():
    first = load_static_bom("ltc-cs-training")
    shuffled = first.model_copy(
        update={
            "data_sources": list(reversed(first.data_sources)),
            "artifacts": list(reversed(first.artifacts)),
        }
    )
    assert canonical_encode(first) == canonical_encode(shuffled)
    assert validate_bom(first).ref == validate_bom(shuffled).ref


def test_version_bump_changes_encoding():
    first = load_static_bom("hpc-cs")
    bumped = first.model_copy(update={"version": "1.1"})
    assert canonical_encode(first) != canonical_encode(bumped)


# region Random DAG property


def _has_cycle_dfs(edges: dict[str, set[str]]) -> bool:
    white, grey, black = 0, 1, 2
    colour = {n: white for n in edges}

    def visit(node):
        colour[node] = grey
        for nxt in edges[node]:
            if colour[nxt] == grey:
                return True
            if colour[nxt] == white and visit(nxt):
                return True
        colour[node] = black
        return False

    return any(colour[n] == white and visit(n) for n in list(edges))


def _random_definition(rng: random.Random, n_nodes: int) -> tuple[BomDef, bool]:
    """A BoM of n_nodes with random wiring; returns it with whether it should validate."""
    n_assemblies = max(1, n_nodes // 4)
    n_sources = n_nodes - n_assemblies
    sources = [f"d{i}" for i in range(n_sources)]
    dangling = rng.random() < 0.1

    assemblies = []
    producers: dict[str, str] = {}
    for a in range(n_assemblies):
        inputs = rng.sample(sources, k=min(len(sources), rng.randint(1, 3)))
        free = [s for s in sources if s not in producers and s not in inputs]
        if not free:
            free = [s for s in sources if s not in inputs] or sources
        output = rng.choice(free)
        producers.setdefault(output, f"a{a}")
        assemblies.append(assembly(f"a{a}", inputs=inputs, outputs=[output]))
    if dangling:
        first = assemblies[0]
        assemblies[0] = first.model_copy(update={"inputs": first.inputs + ["ghost"]})

    definition = BomDef(
        name="random",
        version="1",
        assemblies=assemblies,
        data_sources=[source(s) for s in sources],
    )

    edges: dict[str, set[str]] = {n: set() for n in sources + [a.id for a in assemblies]}
    produced_twice = False
    seen_outputs: set[str] = set()
    for a in assemblies:
        for i in a.inputs:
            edges.setdefault(i, set()).add(a.id)
        for o in a.outputs:
            edges[a.id].add(o)
            produced_twice |= o in seen_outputs
            seen_outputs.add(o)
    for n in list(edges):
        for m in list(edges[n]):
            edges.setdefault(m, set())
    acceptable = not dangling and not produced_twice and not _has_cycle_dfs(edges)
    return definition, acceptable


@pytest.mark.slow
def test_validate_accepts_exactly_acyclic_resolved_boms():
    rng = random.Random(20241019)
    accepted = rejected = 0
    for _ in range(300):
        definition, acceptable = _random_definition(rng, rng.randint(2, 200))
        try:
            bom = validate_bom(definition)
        except (CyclicBom, DanglingReference, MultipleProducers) as e:
            assert not acceptable, f"rejected a valid BoM: {e}"
            rejected += 1
            continue
        assert acceptable
        order = topological_order(bom)
        position = {node: i for i, node in enumerate(order)}
        for u, v in nx.DiGraph(
            [(i, a.id) for a in bom.assemblies.values() for i in a.inputs]
            + [(a.id, o) for a in bom.assemblies.values() for o in a.outputs]
        ).edges:
            assert position[u] < position[v]
        accepted += 1
    assert accepted > 0 and rejected > 0
