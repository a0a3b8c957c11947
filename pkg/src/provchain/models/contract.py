from enum import Enum

from sqlalchemy import (
    JSON,
    BigInteger,
    CheckConstraint,
    Column,
    Enum as SQLEnum,
    ForeignKey,
    Integer,
    LargeBinary,
    String,
)
from sqlalchemy.orm import relationship

from provchain.models.bom import Threshold
from provchain.models.events import Blob, Inline

from .database.db import Base


class RequestState(Enum):
    PENDING = "Pending"
    SETTLED = "Settled"
    REFUNDED = "Refunded"

    def __str__(self):
        return self.value


class DataContract(Base):
    """Deployed terms. The address is the entry hash of ContractDeployed."""

    __tablename__ = "data_contract"

    address = Column(String, primary_key=True)
    provider = Column(String, ForeignKey("participant.id"), nullable=False)
    price = Column(BigInteger, CheckConstraint("price >= 0"), nullable=False)
    maxResponseMs = Column(
        BigInteger, CheckConstraint('"maxResponseMs" > 0'), nullable=False
    )
    interfaceRef = Column(String, nullable=False)
    thresholdsJson = Column(JSON, nullable=False, default=list)
    deployedAt = Column(BigInteger, nullable=False)
    deployedSeq = Column(Integer, nullable=False)

    requests = relationship("DataRequest", back_populates="contract")

    @property
    def thresholds(self) -> list[Threshold]:
        return [Threshold.model_validate(t) for t in self.thresholdsJson or []]


class DataRequest(Base):
    """A payable request. The id is the entry hash of DataRequested."""

    __tablename__ = "data_request"

    id = Column(String, primary_key=True)
    contractAddress = Column(
        String, ForeignKey("data_contract.address"), nullable=False, index=True
    )
    requester = Column(String, ForeignKey("participant.id"), nullable=False)
    paramsInline = Column(LargeBinary, nullable=True)
    paramsRef = Column(String, nullable=True)
    requestedAt = Column(BigInteger, nullable=False)
    requestedSeq = Column(Integer, nullable=False)
    escrow = Column(BigInteger, CheckConstraint("escrow >= 0"), nullable=False)
    state = Column(SQLEnum(RequestState), nullable=False, default=RequestState.PENDING)
    bolId = Column(String, nullable=True, index=True)

    payloadRef = Column(String, nullable=True)
    deliveredAt = Column(BigInteger, nullable=True)
    elapsedMs = Column(BigInteger, nullable=True)
    sourceBol = Column(String, nullable=True)
    sourceNode = Column(String, nullable=True)
    resolvedAt = Column(BigInteger, nullable=True)
    violations = Column(Integer, nullable=False, default=0)

    contract = relationship("DataContract", back_populates="requests", lazy="selectin")

    @property
    def params(self) -> Inline | Blob:
        if self.paramsRef is not None:
            return Blob(ref=self.paramsRef)
        return Inline(data=self.paramsInline or b"")

    @property
    def is_pending(self) -> bool:
        return self.state == RequestState.PENDING
