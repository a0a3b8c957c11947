from enum import Enum

from sqlalchemy import (
    BigInteger,
    Column,
    Enum as SQLEnum,
    ForeignKey,
    Integer,
    LargeBinary,
    String,
    UniqueConstraint,
)
from sqlalchemy.orm import relationship, validates

from provchain.models.events import Blob, Computed, Delivered, Fetched, Inline

from .database.db import Base


class BolStatus(Enum):
    OPEN = "Open"
    SEALED = "Sealed"
    ABORTED = "Aborted"

    def __str__(self):
        return self.value


class Bol(Base):
    """One run of a registered BoM. The id is the entry hash of its BolOpened entry."""

    __tablename__ = "bol"

    id = Column(String, primary_key=True)
    bomRef = Column(String, ForeignKey("bom_registration.ref"), nullable=False)
    author = Column(String, nullable=False)
    openedAt = Column(BigInteger, nullable=False)
    openedSeq = Column(Integer, nullable=False)
    status = Column(SQLEnum(BolStatus), nullable=False, default=BolStatus.OPEN)
    closedAt = Column(BigInteger, nullable=True)
    closedSeq = Column(Integer, nullable=True)
    bolHash = Column(String, nullable=True)
    abortReason = Column(String, nullable=True)

    bom = relationship("BomRegistration", lazy="selectin")
    shadows = relationship(
        "Shadow",
        back_populates="bol",
        cascade="all, delete-orphan",
        order_by="Shadow.node",
        lazy="selectin",
    )

    @property
    def shadow_map(self) -> dict[str, "Shadow"]:
        return {shadow.node: shadow for shadow in self.shadows}

    @property
    def is_open(self) -> bool:
        return self.status == BolStatus.OPEN

    def to_canonical(self) -> dict:
        """Content of the BoL hashed into BolSealed."""
        return {
            "id": self.id,
            "bom_ref": self.bomRef,
            "opened_at": self.openedAt,
            "shadows": {
                shadow.node: shadow.to_canonical() for shadow in self.shadows
            },
        }


class Shadow(Base):
    __tablename__ = "shadow"
    __table_args__ = (UniqueConstraint("bolId", "node", name="uq_shadow_bol_node"),)

    id = Column(Integer, primary_key=True, index=True)
    bolId = Column(String, ForeignKey("bol.id"), nullable=False, index=True)
    node = Column(String, nullable=False)
    valueKind = Column(String, nullable=False)
    inlineData = Column(LargeBinary, nullable=True)
    blobRef = Column(String, nullable=True, index=True)
    provenanceKind = Column(String, nullable=False)
    # origin url, assembly id or request id depending on provenanceKind
    provenanceValue = Column(String, nullable=False)
    recordedAt = Column(BigInteger, nullable=False)
    seq = Column(Integer, nullable=False)

    bol = relationship("Bol", back_populates="shadows")

    @validates("valueKind")
    def validate_value_kind(self, key, value):
        if value not in ("inline", "blob"):
            raise ValueError(f"Invalid shadow value kind: {value!r}")
        return value

    @property
    def value(self) -> Inline | Blob:
        if self.valueKind == "inline":
            return Inline(data=self.inlineData)
        return Blob(ref=self.blobRef)

    @property
    def provenance(self) -> Fetched | Computed | Delivered:
        match self.provenanceKind:
            case "fetched":
                return Fetched(origin=self.provenanceValue)
            case "computed":
                return Computed(assembly=self.provenanceValue)
            case _:
                return Delivered(request_id=self.provenanceValue)

    def to_canonical(self) -> dict:
        return {
            "node": self.node,
            "value": self.value,
            "provenance": self.provenance,
            "recorded_at": self.recordedAt,
        }
