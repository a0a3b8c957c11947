from typing import TYPE_CHECKING

from sqlalchemy import func, select

from provchain.errors import ParticipantExists, ProvchainError, UnknownParticipant
from provchain.ledger.keys import check_participant_id
from provchain.models.account import Account, Participant
from provchain.models.contract import DataRequest, RequestState
from provchain.models.events import FundsDeposited, ParticipantRegistered

if TYPE_CHECKING:
    from provchain.engine import Engine


# region Create


def register_participant(engine: "Engine", participant: str, at: int | None = None) -> str:
    """Create (or load) the participant's key and publish it. Returns the public key hex."""
    check_participant_id(participant)
    if participant in engine.ledger.keys:
        raise ParticipantExists(participant)
    signer = engine.keyring.create(participant)
    engine.emit(
        ParticipantRegistered(participant=participant, public_key=signer.public_key_hex),
        author=participant,
        at=at,
    )
    return signer.public_key_hex


def fund_account(
    engine: "Engine", participant: str, amount: int, at: int | None = None
) -> Account:
    if amount <= 0:
        raise ProvchainError(f"funding amount must be positive, got {amount}")
    if participant not in engine.ledger.keys:
        raise UnknownParticipant(participant)
    engine.ensure_participant(engine.operator)
    engine.emit(
        FundsDeposited(participant=participant, amount=amount),
        author=engine.operator,
        at=at,
    )
    return get_account(engine, participant)


# region Read


def get_participant(engine: "Engine", participant: str) -> Participant:
    session = engine.Session()
    try:
        found = session.get(Participant, participant)
        if found is None:
            raise UnknownParticipant(participant)
        return found
    finally:
        session.close()


def get_all_participants(engine: "Engine") -> list[Participant]:
    session = engine.Session()
    try:
        return list(session.scalars(select(Participant).order_by(Participant.id)))
    finally:
        session.close()


def get_account(engine: "Engine", participant: str) -> Account:
    session = engine.Session()
    try:
        account = session.get(Account, participant)
        if account is None:
            raise UnknownParticipant(participant)
        return account
    finally:
        session.close()


def get_balance(engine: "Engine", participant: str) -> int:
    return get_account(engine, participant).balance


def total_supply(engine: "Engine") -> int:
    """Sum of all fundings; constant under requests, settlements and refunds."""
    session = engine.Session()
    try:
        return session.scalar(select(func.coalesce(func.sum(Account.funded), 0)))
    finally:
        session.close()


def total_balances(engine: "Engine") -> int:
    session = engine.Session()
    try:
        return session.scalar(select(func.coalesce(func.sum(Account.balance), 0)))
    finally:
        session.close()


def total_escrow(engine: "Engine") -> int:
    session = engine.Session()
    try:
        return session.scalar(
            select(func.coalesce(func.sum(DataRequest.escrow), 0)).where(
                DataRequest.state == RequestState.PENDING
            )
        )
    finally:
        session.close()
