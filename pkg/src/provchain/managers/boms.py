from pathlib import Path
from typing import TYPE_CHECKING

import networkx as nx
import yaml
from pydantic import ValidationError
from sqlalchemy import select

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
    UnknownBom,
)
from provchain.models.bom import (
    BomDef,
    ContractAccess,
    ContractInterface,
    InternalAccess,
    StaticUrlAccess,
    ValidatedBom,
)
from provchain.models.bom_registration import BomRegistration
from provchain.models.events import BomRegistered
from provchain.utils.canonical import (
    canonical_decode,
    canonical_encode,
    content_address,
    is_content_ref,
)

if TYPE_CHECKING:
    from provchain.engine import Engine

BOM_DIRECTORY = Path(__file__).parent.parent / "static" / "boms"


# region Parse


def parse_bom(text: str) -> BomDef:
    """Parse a YAML (or JSON) BoM definition, rejecting unknown keys."""
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise BomParseError(f"not a structured BoM document: {e}") from e
    if not isinstance(data, dict):
        raise BomParseError("BoM document must be a mapping")
    try:
        return BomDef.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(x) for x in first["loc"])
        raise BomParseError(f"{where}: {first['msg']}") from e


def load_bom_file(path: Path) -> BomDef:
    return parse_bom(Path(path).read_text())


def load_static_bom(name: str) -> BomDef:
    return load_bom_file(BOM_DIRECTORY / f"{name}.yaml")


# region Validate


def bom_graph(definition: BomDef) -> nx.DiGraph:
    """Wiring graph: input/artifact -> assembly -> output."""
    graph = nx.DiGraph()
    for node in sorted(
        [a.id for a in definition.assemblies]
        + [d.id for d in definition.data_sources]
        + [a.id for a in definition.artifacts]
    ):
        graph.add_node(node)
    for assembly in sorted(definition.assemblies, key=lambda a: a.id):
        for source in sorted(set(assembly.inputs) | set(assembly.artifacts)):
            graph.add_edge(source, assembly.id)
        for output in sorted(assembly.outputs):
            graph.add_edge(assembly.id, output)
    return graph


def _check_access(definition: BomDef, producers: dict[str, str]) -> None:
    for source in definition.data_sources:
        access = source.access
        if source.id in producers and not isinstance(access, InternalAccess):
            raise BadAccessSpec(source.id, "produced data sources must be internal")
        if isinstance(access, StaticUrlAccess) and not access.url.strip():
            raise BadAccessSpec(source.id, "empty url")
        if isinstance(access, ContractAccess):
            if not is_content_ref(access.address):
                raise BadAccessSpec(source.id, "contract address is not a content reference")
            try:
                ContractInterface.model_validate(access.interface)
            except ValidationError as e:
                raise BadAccessSpec(source.id, "malformed contract interface") from e


def validate_bom(definition: BomDef) -> ValidatedBom:
    if not definition.assemblies:
        raise EmptyBom()

    seen: set[str] = set()
    for node in sorted(
        [a.id for a in definition.assemblies]
        + [d.id for d in definition.data_sources]
        + [a.id for a in definition.artifacts]
    ):
        if node in seen:
            raise DuplicateId(node)
        seen.add(node)

    components = {d.id for d in definition.data_sources} | {a.id for a in definition.artifacts}
    assemblies = sorted(definition.assemblies, key=lambda a: a.id)
    for assembly in assemblies:
        for ref in sorted({*assembly.inputs, *assembly.artifacts, *assembly.outputs}):
            if ref not in components:
                raise DanglingReference(ref)

    for assembly in assemblies:
        if not (assembly.inputs or assembly.artifacts) or not assembly.outputs:
            raise IncompleteAssembly(assembly.id)
        looped = sorted(set(assembly.inputs + assembly.artifacts) & set(assembly.outputs))
        if looped:
            raise CyclicBom([assembly.id, looped[0], assembly.id])

    producers: dict[str, str] = {}
    for assembly in assemblies:
        for output in sorted(set(assembly.outputs)):
            if output in producers:
                raise MultipleProducers(output)
            producers[output] = assembly.id

    try:
        cycle = nx.find_cycle(bom_graph(definition))
    except nx.NetworkXNoCycle:
        cycle = None
    if cycle:
        raise CyclicBom([u for u, _ in cycle] + [cycle[-1][1]])

    _check_access(definition, producers)

    for artifact in definition.artifacts:
        if artifact.content_ref is not None and not is_content_ref(artifact.content_ref):
            raise BadContentRef(artifact.content_ref)

    canonical = definition.canonical()
    return ValidatedBom(ref=content_address(canonical), definition=canonical)


def topological_order(bom: ValidatedBom) -> list[str]:
    return list(nx.lexicographical_topological_sort(bom_graph(bom.definition)))


def root_inputs(bom: ValidatedBom) -> list[str]:
    """Shadowable nodes no assembly of the BoM produces."""
    return [node for node in bom.shadowable if not bom.is_output(node)]


# region Register


def register_bom(engine: "Engine", bom: ValidatedBom, author: str | None = None) -> str:
    """Store the canonical BoM in the blobstore and announce it. Idempotent per ref."""
    existing = _get_registration(engine, bom.ref)
    if existing is not None:
        return existing.ref

    event = BomRegistered(bom_ref=bom.ref, name=bom.name, version=bom.version)
    author = author or engine.operator
    if author == engine.operator:
        engine.ensure_participant(author)
    engine.blobs.put(canonical_encode(bom.definition))
    engine.emit(event, author=author)
    return bom.ref


# region Read


def _get_registration(engine: "Engine", ref: str) -> BomRegistration | None:
    session = engine.Session()
    try:
        return session.get(BomRegistration, ref)
    finally:
        session.close()


def get_bom(engine: "Engine", ref: str) -> ValidatedBom:
    if _get_registration(engine, ref) is None:
        raise UnknownBom(ref)
    return load_bom_blob(engine.blobs, ref)


def load_bom_blob(blobs, ref: str) -> ValidatedBom:
    definition = BomDef.model_validate(canonical_decode(blobs.get(ref)))
    return ValidatedBom(ref=ref, definition=definition)


def get_all_boms(engine: "Engine") -> list[BomRegistration]:
    session = engine.Session()
    try:
        return list(
            session.scalars(select(BomRegistration).order_by(BomRegistration.registeredSeq))
        )
    finally:
        session.close()
