from sqlalchemy import BigInteger, CheckConstraint, Column, ForeignKey, Integer, String
from sqlalchemy.orm import relationship

from .database.db import Base


class Participant(Base):
    __tablename__ = "participant"

    id = Column(String, primary_key=True)
    publicKey = Column(String, nullable=False)
    registeredAt = Column(BigInteger, nullable=False)
    registeredSeq = Column(Integer, nullable=False)

    account = relationship(
        "Account", back_populates="participant", uselist=False, lazy="selectin"
    )


class Account(Base):
    __tablename__ = "account"
    __table_args__ = (
        CheckConstraint("balance >= 0", name="ck_account_balance_non_negative"),
    )

    participantId = Column(String, ForeignKey("participant.id"), primary_key=True)
    balance = Column(BigInteger, nullable=False, default=0)
    # sum of FundsDeposited for this participant
    funded = Column(BigInteger, nullable=False, default=0)

    participant = relationship("Participant", back_populates="account")

    @property
    def id(self) -> str:
        return self.participantId
