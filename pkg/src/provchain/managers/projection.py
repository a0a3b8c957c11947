"""Applies ledger entries to the SQL projection.

The same ``apply_entry`` runs on the live append path and during replay, so a
rebuilt projection equals the one maintained incrementally.
"""

from sqlalchemy import delete
from sqlalchemy.orm import Session

from provchain.log import get_logger
from provchain.models.account import Account, Participant
from provchain.models.bol import Bol, BolStatus, Shadow
from provchain.models.bom_registration import BomRegistration
from provchain.models.contract import DataContract, DataRequest, RequestState
from provchain.models.events import (
    Blob,
    BolAborted,
    BolOpened,
    BolSealed,
    BomRegistered,
    Computed,
    ContractDeployed,
    DataDelivered,
    DataRequested,
    Delivered,
    Fetched,
    FundsDeposited,
    Inline,
    LedgerEntry,
    ParticipantRegistered,
    PaymentRefunded,
    PaymentSettled,
    QosViolation,
    ShadowRecorded,
)
from provchain.models.ledger_cursor import LedgerCursor

logger = get_logger(__name__)


def _account(session: Session, participant: str) -> Account:
    account = session.get(Account, participant)
    if account is None:
        raise RuntimeError(f"projection has no account for {participant}")
    return account


def _request(session: Session, request_id: str) -> DataRequest:
    request = session.get(DataRequest, request_id)
    if request is None:
        raise RuntimeError(f"projection has no request {request_id}")
    return request


def _bol(session: Session, bol_id: str) -> Bol:
    bol = session.get(Bol, bol_id)
    if bol is None:
        raise RuntimeError(f"projection has no BoL {bol_id}")
    return bol


def apply_entry(session: Session, entry: LedgerEntry) -> None:
    """Fold one entry into the projection and advance the cursor. Does not commit."""
    event = entry.event
    match event:
        case ParticipantRegistered():
            session.add(
                Participant(
                    id=event.participant,
                    publicKey=event.public_key,
                    registeredAt=entry.timestamp,
                    registeredSeq=entry.seq,
                )
            )
            session.add(Account(participantId=event.participant, balance=0, funded=0))

        case FundsDeposited():
            account = _account(session, event.participant)
            account.balance += event.amount
            account.funded += event.amount

        case BomRegistered():
            session.add(
                BomRegistration(
                    ref=event.bom_ref,
                    name=event.name,
                    version=event.version,
                    author=entry.author,
                    registeredAt=entry.timestamp,
                    registeredSeq=entry.seq,
                )
            )

        case BolOpened():
            session.add(
                Bol(
                    id=entry.entry_hash,
                    bomRef=event.bom_ref,
                    author=entry.author,
                    openedAt=entry.timestamp,
                    openedSeq=entry.seq,
                    status=BolStatus.OPEN,
                )
            )

        case ShadowRecorded():
            match event.provenance:
                case Fetched(origin=origin):
                    provenance_value = origin
                case Computed(assembly=assembly):
                    provenance_value = assembly
                case Delivered(request_id=request_id):
                    provenance_value = request_id
            value = event.value
            shadow = Shadow(
                bolId=event.bol_id,
                node=event.node,
                valueKind=value.kind,
                inlineData=value.data if isinstance(value, Inline) else None,
                blobRef=value.ref if isinstance(value, Blob) else None,
                provenanceKind=event.provenance.kind,
                provenanceValue=provenance_value,
                recordedAt=entry.timestamp,
                seq=entry.seq,
            )
            bol = _bol(session, event.bol_id)
            bol.shadows.append(shadow)

        case BolSealed():
            bol = _bol(session, event.bol_id)
            bol.status = BolStatus.SEALED
            bol.bolHash = event.bol_hash
            bol.closedAt = entry.timestamp
            bol.closedSeq = entry.seq

        case BolAborted():
            bol = _bol(session, event.bol_id)
            bol.status = BolStatus.ABORTED
            bol.abortReason = event.reason
            bol.closedAt = entry.timestamp
            bol.closedSeq = entry.seq

        case ContractDeployed():
            session.add(
                DataContract(
                    address=entry.entry_hash,
                    provider=event.provider,
                    price=event.price,
                    maxResponseMs=event.max_response_ms,
                    interfaceRef=event.interface_ref,
                    thresholdsJson=[t.model_dump(mode="json") for t in event.thresholds],
                    deployedAt=entry.timestamp,
                    deployedSeq=entry.seq,
                )
            )

        case DataRequested():
            _account(session, event.requester).balance -= event.escrow
            params = event.params
            session.add(
                DataRequest(
                    id=entry.entry_hash,
                    contractAddress=event.address,
                    requester=event.requester,
                    paramsInline=params.data if isinstance(params, Inline) else None,
                    paramsRef=params.ref if isinstance(params, Blob) else None,
                    requestedAt=entry.timestamp,
                    requestedSeq=entry.seq,
                    escrow=event.escrow,
                    state=RequestState.PENDING,
                    bolId=event.bol_id,
                )
            )

        case DataDelivered():
            request = _request(session, event.request_id)
            request.payloadRef = event.payload_ref
            request.deliveredAt = entry.timestamp
            request.elapsedMs = event.elapsed_ms
            request.sourceBol = event.source_bol
            request.sourceNode = event.source_node

        case PaymentSettled():
            request = _request(session, event.request_id)
            _account(session, event.payee).balance += event.amount
            request.state = RequestState.SETTLED
            request.resolvedAt = entry.timestamp

        case PaymentRefunded():
            request = _request(session, event.request_id)
            _account(session, event.payee).balance += event.amount
            request.state = RequestState.REFUNDED
            request.resolvedAt = entry.timestamp

        case QosViolation():
            _request(session, event.request_id).violations += 1

    cursor = session.get(LedgerCursor, 1)
    if cursor is None:
        cursor = LedgerCursor(id=1)
        session.add(cursor)
    cursor.seq = entry.seq
    cursor.entryHash = entry.entry_hash
    session.flush()


def projection_matches(session: Session, ledger) -> bool:
    cursor = session.get(LedgerCursor, 1)
    tip = ledger.tip
    if tip is None:
        return cursor is None or cursor.seq == -1
    return cursor is not None and cursor.seq == tip.seq and cursor.entryHash == tip.entry_hash


def rebuild_state(session: Session, ledger) -> int:
    """Clear the projection and replay every ledger entry. Returns the entry count."""
    for model in (Shadow, Bol, DataRequest, DataContract, BomRegistration, Account, Participant):
        session.execute(delete(model))
    session.expunge_all()
    cursor = session.get(LedgerCursor, 1)
    if cursor is not None:
        cursor.seq = -1
        cursor.entryHash = None
    session.flush()
    count = 0
    for entry in ledger:
        apply_entry(session, entry)
        count += 1
    session.commit()
    logger.info("projection.rebuilt", entries=count)
    return count
