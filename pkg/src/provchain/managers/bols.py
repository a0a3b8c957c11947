from typing import TYPE_CHECKING

from sqlalchemy import select

from provchain.errors import (
    BadProvenance,
    BolNotOpen,
    DuplicateShadow,
    MissingBlob,
    MissingShadows,
    OversizeInline,
    UnknownBol,
    UnknownNode,
    UnknownRequest,
)
from provchain.log import get_logger
from provchain.managers.boms import get_bom
from provchain.models.bol import Bol, BolStatus
from provchain.models.bom import ValidatedBom
from provchain.models.contract import DataRequest
from provchain.models.events import (
    Blob,
    BolAborted,
    BolOpened,
    BolSealed,
    Computed,
    Delivered,
    Fetched,
    Inline,
    ShadowRecorded,
)
from provchain.utils.canonical import content_address

if TYPE_CHECKING:
    from provchain.engine import Engine

logger = get_logger(__name__)


def _author(engine: "Engine", author: str | None) -> str:
    if author is None:
        author = engine.operator
        engine.ensure_participant(author)
    return author


def store_value(engine: "Engine", content: bytes) -> Inline | Blob:
    """Inline when within the threshold, otherwise a blob."""
    if len(content) <= engine.inline_threshold:
        return Inline(data=content)
    return Blob(ref=engine.blobs.put(content))


def read_value(engine: "Engine", value: Inline | Blob) -> bytes:
    if isinstance(value, Inline):
        return value.data
    return engine.blobs.get(value.ref)


# region Create


def instantiate_bol(
    engine: "Engine",
    bom: ValidatedBom | str,
    at: int | None = None,
    author: str | None = None,
) -> Bol:
    bom_ref = bom.ref if isinstance(bom, ValidatedBom) else bom
    get_bom(engine, bom_ref)
    entry = engine.emit(BolOpened(bom_ref=bom_ref), author=_author(engine, author), at=at)
    logger.info("bol.opened", bol_id=entry.entry_hash, bom_ref=bom_ref)
    return get_bol(engine, entry.entry_hash)


# region Update


def _open_bol(engine: "Engine", bol_id: str) -> Bol:
    bol = get_bol(engine, bol_id)
    if not bol.is_open:
        raise BolNotOpen(bol_id, str(bol.status))
    return bol


def _check_provenance(
    engine: "Engine", bom: ValidatedBom, node: str, value, provenance
) -> None:
    match provenance:
        case Computed(assembly=assembly):
            if bom.producers.get(node) != assembly:
                raise BadProvenance(f"{assembly} does not produce {node}")
        case Delivered(request_id=request_id):
            session = engine.Session()
            try:
                request = session.get(DataRequest, request_id)
            finally:
                session.close()
            if request is None:
                raise UnknownRequest(request_id)
            if request.payloadRef is None:
                raise BadProvenance(f"request {request_id} has no delivery")
            if not isinstance(value, Blob) or value.ref != request.payloadRef:
                raise BadProvenance(f"value of {node} is not the payload delivered for {request_id}")
        case Fetched(origin=origin):
            if not origin.strip():
                raise BadProvenance("empty fetch origin")


def record_shadow(
    engine: "Engine",
    bol_id: str,
    node: str,
    value: Inline | Blob,
    provenance: Fetched | Computed | Delivered,
    at: int | None = None,
    author: str | None = None,
) -> Bol:
    bol = _open_bol(engine, bol_id)
    bom = get_bom(engine, bol.bomRef)
    if node not in bom.shadowable:
        raise UnknownNode(node)
    if node in bol.shadow_map:
        raise DuplicateShadow(node)
    if isinstance(value, Inline) and len(value.data) > engine.inline_threshold:
        raise OversizeInline(len(value.data), engine.inline_threshold)
    if isinstance(value, Blob) and value.ref not in engine.blobs:
        raise MissingBlob(value.ref)
    _check_provenance(engine, bom, node, value, provenance)

    engine.emit(
        ShadowRecorded(bol_id=bol_id, node=node, value=value, provenance=provenance),
        author=_author(engine, author),
        at=at,
    )
    return get_bol(engine, bol_id)


def seal_bol(engine: "Engine", bol_id: str, at: int | None = None, author: str | None = None) -> Bol:
    bol = _open_bol(engine, bol_id)
    bom = get_bom(engine, bol.bomRef)
    missing = sorted(set(bom.shadowable) - set(bol.shadow_map))
    if missing:
        raise MissingShadows(missing)
    bol_hash = content_address(bol)
    engine.emit(BolSealed(bol_id=bol_id, bol_hash=bol_hash), author=_author(engine, author), at=at)
    logger.info("bol.sealed", bol_id=bol_id, bol_hash=bol_hash)
    return get_bol(engine, bol_id)


def abort_bol(
    engine: "Engine", bol_id: str, reason: str, at: int | None = None, author: str | None = None
) -> Bol:
    _open_bol(engine, bol_id)
    engine.emit(BolAborted(bol_id=bol_id, reason=reason), author=_author(engine, author), at=at)
    logger.info("bol.aborted", bol_id=bol_id, reason=reason)
    return get_bol(engine, bol_id)


# region Read


def get_bol(engine: "Engine", bol_id: str) -> Bol:
    session = engine.Session()
    try:
        bol = session.get(Bol, bol_id)
        if bol is None:
            raise UnknownBol(bol_id)
        return bol
    finally:
        session.close()


def get_all_bols(engine: "Engine", status: BolStatus | None = None) -> list[Bol]:
    session = engine.Session()
    try:
        query = select(Bol).order_by(Bol.openedSeq)
        if status is not None:
            query = query.where(Bol.status == status)
        return list(session.scalars(query))
    finally:
        session.close()
