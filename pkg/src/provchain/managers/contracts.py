from typing import TYPE_CHECKING, Annotated, Any, Iterable, Literal, Union

from pydantic import BaseModel, Field, ValidationError
from sqlalchemy import select

from provchain.errors import (
    BadInterface,
    BadTerms,
    InsufficientFunds,
    NotYetExpired,
    RequestNotPending,
    TimeBeforeRequest,
    UnknownContract,
    UnknownNode,
    UnknownParticipant,
    UnknownRequest,
)
from provchain.log import get_logger
from provchain.managers.accounts import get_balance
from provchain.managers.bols import get_bol, store_value
from provchain.models.bom import ContractInterface, Threshold
from provchain.models.contract import DataContract, DataRequest, RequestState
from provchain.models.events import (
    ContractDeployed,
    DataDelivered,
    DataRequested,
    FundsDeposited,
    LedgerEntry,
    ParticipantRegistered,
    PaymentRefunded,
    PaymentSettled,
    QosViolation,
)
from provchain.utils.canonical import canonical_decode, canonical_encode

if TYPE_CHECKING:
    from provchain.engine import Engine

logger = get_logger(__name__)


class Accepted(BaseModel):
    outcome: Literal["Accepted"] = "Accepted"
    request_id: str
    payload_ref: str
    elapsed_ms: int


class RejectedLate(BaseModel):
    outcome: Literal["RejectedLate"] = "RejectedLate"
    request_id: str
    payload_ref: str
    elapsed_ms: int
    limit_ms: int


class Expired(BaseModel):
    outcome: Literal["Expired"] = "Expired"
    request_id: str
    elapsed_ms: int
    limit_ms: int


DeliveryOutcome = Annotated[Union[Accepted, RejectedLate, Expired], Field(discriminator="outcome")]


def _require_participant(engine: "Engine", participant: str) -> None:
    if participant not in engine.ledger.keys:
        raise UnknownParticipant(participant)


def parse_interface(interface: ContractInterface | dict[str, Any] | None) -> ContractInterface:
    if isinstance(interface, ContractInterface):
        return interface
    try:
        return ContractInterface.model_validate(interface or {})
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(x) for x in first["loc"])
        raise BadInterface(f"{where}: {first['msg']}") from e


def get_interface(engine: "Engine", contract: DataContract) -> ContractInterface:
    return ContractInterface.model_validate(canonical_decode(engine.blobs.get(contract.interfaceRef)))


# region Create


def deploy_contract(
    engine: "Engine",
    provider: str,
    price: int,
    max_response_ms: int,
    interface: ContractInterface | dict[str, Any] | None = None,
    thresholds: Iterable[Threshold] = (),
    at: int | None = None,
) -> str:
    """Publish immutable contract terms. Returns the contract address."""
    _require_participant(engine, provider)
    if price < 0:
        raise BadTerms(f"price must be non-negative, got {price}")
    if max_response_ms <= 0:
        raise BadTerms(f"max_response_ms must be positive, got {max_response_ms}")
    descriptor = parse_interface(interface)
    interface_ref = engine.blobs.put(canonical_encode(descriptor))
    entry = engine.emit(
        ContractDeployed(
            provider=provider,
            price=price,
            max_response_ms=max_response_ms,
            interface_ref=interface_ref,
            thresholds=list(thresholds),
        ),
        author=provider,
        at=at,
    )
    logger.info("contract.deployed", address=entry.entry_hash, provider=provider, price=price)
    return entry.entry_hash


def request_data(
    engine: "Engine",
    requester: str,
    address: str,
    params: bytes = b"",
    at: int | None = None,
    bol_id: str | None = None,
) -> str:
    """Escrow the contract price and record the request. Returns the request id."""
    contract = get_contract(engine, address)
    _require_participant(engine, requester)
    if bol_id is not None:
        get_bol(engine, bol_id)
    available = get_balance(engine, requester)
    if available < contract.price:
        raise InsufficientFunds(contract.price, available)
    entry = engine.emit(
        DataRequested(
            address=address,
            requester=requester,
            params=store_value(engine, params),
            escrow=contract.price,
            bol_id=bol_id,
        ),
        author=requester,
        at=at,
    )
    return entry.entry_hash


# region Update


def _pending_request(engine: "Engine", request_id: str, at: int) -> DataRequest:
    request = get_request(engine, request_id)
    if not request.is_pending:
        raise RequestNotPending(request_id, str(request.state))
    if at < request.requestedAt:
        raise TimeBeforeRequest(at, request.requestedAt)
    return request


def _advisory_checks(
    engine: "Engine",
    request: DataRequest,
    elapsed: int,
    metrics: dict[str, float],
    at: int,
) -> None:
    for threshold in request.contract.thresholds:
        observed = metrics.get(threshold.metric)
        if observed is None or not threshold.violated_by(observed):
            continue
        engine.emit(
            QosViolation(
                request_id=request.id,
                elapsed_ms=elapsed,
                limit_ms=request.contract.maxResponseMs,
                metric=threshold.metric,
                observed=float(observed),
                advisory=True,
            ),
            author=engine.engine_participant,
            at=at,
        )
        logger.info("contract.qos_advisory", request_id=request.id, metric=threshold.metric)


def _refund(engine: "Engine", request: DataRequest, elapsed: int, at: int) -> None:
    limit = request.contract.maxResponseMs
    engine.emit(
        QosViolation(request_id=request.id, elapsed_ms=elapsed, limit_ms=limit),
        author=engine.engine_participant,
        at=at,
    )
    engine.emit(
        PaymentRefunded(request_id=request.id, payee=request.requester, amount=request.escrow),
        author=engine.engine_participant,
        at=at,
    )
    logger.info("contract.refunded", request_id=request.id, elapsed_ms=elapsed, limit_ms=limit)


def deliver_data(
    engine: "Engine",
    request_id: str,
    payload: bytes,
    at: int | None = None,
    metrics: dict[str, float] | None = None,
    source: tuple[str, str] | None = None,
) -> Accepted | RejectedLate:
    """Archive the payload and settle or refund the escrow on the response time.

    ``source`` names the (bol_id, node) shadow in the provider's own BoL the
    payload was taken from.
    """
    at = engine.now() if at is None else at
    request = _pending_request(engine, request_id, at)
    if source is not None:
        source_bol = get_bol(engine, source[0])
        if source[1] not in source_bol.shadow_map:
            raise UnknownNode(source[1])

    engine.ensure_participant(engine.engine_participant)
    contract = request.contract
    elapsed = at - request.requestedAt
    payload_ref = engine.blobs.put(payload)
    engine.emit(
        DataDelivered(
            request_id=request_id,
            payload_ref=payload_ref,
            elapsed_ms=elapsed,
            source_bol=source[0] if source else None,
            source_node=source[1] if source else None,
        ),
        author=contract.provider,
        at=at,
    )

    if elapsed <= contract.maxResponseMs:
        engine.emit(
            PaymentSettled(
                request_id=request_id,
                payer=request.requester,
                payee=contract.provider,
                amount=request.escrow,
            ),
            author=engine.engine_participant,
            at=at,
        )
        logger.info("contract.settled", request_id=request_id, amount=request.escrow)
        outcome = Accepted(request_id=request_id, payload_ref=payload_ref, elapsed_ms=elapsed)
    else:
        _refund(engine, request, elapsed, at)
        outcome = RejectedLate(
            request_id=request_id,
            payload_ref=payload_ref,
            elapsed_ms=elapsed,
            limit_ms=contract.maxResponseMs,
        )

    if metrics:
        _advisory_checks(engine, request, elapsed, metrics, at)
    return outcome


def expire_request(engine: "Engine", request_id: str, at: int | None = None) -> Expired:
    at = engine.now() if at is None else at
    request = _pending_request(engine, request_id, at)
    elapsed = at - request.requestedAt
    limit = request.contract.maxResponseMs
    if elapsed <= limit:
        raise NotYetExpired(elapsed, limit)
    engine.ensure_participant(engine.engine_participant)
    _refund(engine, request, elapsed, at)
    return Expired(request_id=request_id, elapsed_ms=elapsed, limit_ms=limit)


# region Read


def get_contract(engine: "Engine", address: str) -> DataContract:
    session = engine.Session()
    try:
        contract = session.get(DataContract, address)
        if contract is None:
            raise UnknownContract(address)
        return contract
    finally:
        session.close()


def get_request(engine: "Engine", request_id: str) -> DataRequest:
    session = engine.Session()
    try:
        request = session.get(DataRequest, request_id)
        if request is None:
            raise UnknownRequest(request_id)
        return request
    finally:
        session.close()


def get_requests(engine: "Engine", state: RequestState | None = None) -> list[DataRequest]:
    session = engine.Session()
    try:
        query = select(DataRequest).order_by(DataRequest.requestedSeq)
        if state is not None:
            query = query.where(DataRequest.state == state)
        return list(session.scalars(query))
    finally:
        session.close()


# region Replay


class ContractState(BaseModel):
    """Money and request state reconstructed from ledger events alone."""

    balances: dict[str, int] = Field(default_factory=dict)
    escrow: dict[str, int] = Field(default_factory=dict)
    states: dict[str, str] = Field(default_factory=dict)
    supply: int = 0

    @property
    def pending_escrow(self) -> int:
        return sum(self.escrow.values())


def replay_contract_state(entries: Iterable[LedgerEntry]) -> ContractState:
    state = ContractState()
    for entry in entries:
        event = entry.event
        match event:
            case ParticipantRegistered():
                state.balances.setdefault(event.participant, 0)
            case FundsDeposited():
                state.balances[event.participant] = state.balances.get(event.participant, 0) + event.amount
                state.supply += event.amount
            case DataRequested():
                state.balances[event.requester] -= event.escrow
                state.escrow[entry.entry_hash] = event.escrow
                state.states[entry.entry_hash] = RequestState.PENDING.value
            case PaymentSettled():
                amount = state.escrow.pop(event.request_id)
                state.balances[event.payee] = state.balances.get(event.payee, 0) + amount
                state.states[event.request_id] = RequestState.SETTLED.value
            case PaymentRefunded():
                amount = state.escrow.pop(event.request_id)
                state.balances[event.payee] = state.balances.get(event.payee, 0) + amount
                state.states[event.request_id] = RequestState.REFUNDED.value
    return state
