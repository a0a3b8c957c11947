from typing import Annotated, Any, Literal, Union

from pydantic import AfterValidator, BaseModel, ConfigDict, Field

from provchain.constants import DEFAULT_INLINE_THRESHOLD
from provchain.errors import OversizeText
from provchain.models.bom import Threshold


def _bounded(text: str) -> str:
    size = len(text.encode())
    if size > DEFAULT_INLINE_THRESHOLD:
        raise OversizeText(size, DEFAULT_INLINE_THRESHOLD)
    return text


# Free text carried on the ledger; anything longer belongs in the blobstore
BoundedText = Annotated[str, AfterValidator(_bounded)]


class _Value(BaseModel):
    model_config = ConfigDict(
        extra="forbid", frozen=True, ser_json_bytes="base64", val_json_bytes="base64"
    )


# region shadow values


class Inline(_Value):
    kind: Literal["inline"] = "inline"
    data: bytes


class Blob(_Value):
    kind: Literal["blob"] = "blob"
    ref: str


ShadowValue = Annotated[Union[Inline, Blob], Field(discriminator="kind")]


class Fetched(_Value):
    kind: Literal["fetched"] = "fetched"
    origin: BoundedText


class Computed(_Value):
    kind: Literal["computed"] = "computed"
    assembly: str


class Delivered(_Value):
    kind: Literal["delivered"] = "delivered"
    request_id: str


Provenance = Annotated[Union[Fetched, Computed, Delivered], Field(discriminator="kind")]


# region events


class ParticipantRegistered(_Value):
    type: Literal["ParticipantRegistered"] = "ParticipantRegistered"
    participant: str
    public_key: str


class FundsDeposited(_Value):
    type: Literal["FundsDeposited"] = "FundsDeposited"
    participant: str
    amount: int


class BomRegistered(_Value):
    type: Literal["BomRegistered"] = "BomRegistered"
    bom_ref: str
    name: BoundedText
    version: BoundedText


class BolOpened(_Value):
    """The BoL id is the entry hash of the entry carrying this event."""

    type: Literal["BolOpened"] = "BolOpened"
    bom_ref: str


class ShadowRecorded(_Value):
    type: Literal["ShadowRecorded"] = "ShadowRecorded"
    bol_id: str
    node: str
    value: ShadowValue
    provenance: Provenance


class BolSealed(_Value):
    type: Literal["BolSealed"] = "BolSealed"
    bol_id: str
    bol_hash: str


class BolAborted(_Value):
    type: Literal["BolAborted"] = "BolAborted"
    bol_id: str
    reason: BoundedText


class ContractDeployed(_Value):
    """The contract address is the entry hash of the entry carrying this event."""

    type: Literal["ContractDeployed"] = "ContractDeployed"
    provider: str
    price: int
    max_response_ms: int
    interface_ref: str
    thresholds: list[Threshold] = Field(default_factory=list)


class DataRequested(_Value):
    """The request id is the entry hash of the entry carrying this event."""

    type: Literal["DataRequested"] = "DataRequested"
    address: str
    requester: str
    params: ShadowValue
    escrow: int
    bol_id: str | None = None


class DataDelivered(_Value):
    type: Literal["DataDelivered"] = "DataDelivered"
    request_id: str
    payload_ref: str
    elapsed_ms: int
    source_bol: str | None = None
    source_node: str | None = None


class PaymentSettled(_Value):
    type: Literal["PaymentSettled"] = "PaymentSettled"
    request_id: str
    payer: str
    payee: str
    amount: int


class PaymentRefunded(_Value):
    type: Literal["PaymentRefunded"] = "PaymentRefunded"
    request_id: str
    payee: str
    amount: int


class QosViolation(_Value):
    type: Literal["QosViolation"] = "QosViolation"
    request_id: str
    elapsed_ms: int
    limit_ms: int
    # set for advisory threshold checks, which carry no financial effect
    metric: str | None = None
    observed: float | None = None
    advisory: bool = False


LedgerEvent = Annotated[
    Union[
        ParticipantRegistered,
        FundsDeposited,
        BomRegistered,
        BolOpened,
        ShadowRecorded,
        BolSealed,
        BolAborted,
        ContractDeployed,
        DataRequested,
        DataDelivered,
        PaymentSettled,
        PaymentRefunded,
        QosViolation,
    ],
    Field(discriminator="type"),
]

REQUEST_EVENTS = (DataDelivered, PaymentSettled, PaymentRefunded, QosViolation)


class LedgerEntry(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    seq: int
    prev_hash: str
    timestamp: int
    author: str
    event: LedgerEvent
    entry_hash: str
    signature: str

    @property
    def type(self) -> str:
        return self.event.type

    def body(self) -> dict[str, Any]:
        """The hashed part of the entry."""
        return hashed_body(self.seq, self.prev_hash, self.timestamp, self.author, self.event)

    def to_canonical(self) -> dict[str, Any]:
        return self.model_dump(mode="python")


def hashed_body(seq: int, prev_hash: str, timestamp: int, author: str, event) -> dict[str, Any]:
    return {
        "seq": seq,
        "prev_hash": prev_hash,
        "timestamp": timestamp,
        "author": author,
        "event": event.model_dump(mode="python"),
    }
