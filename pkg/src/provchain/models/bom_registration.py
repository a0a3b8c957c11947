from sqlalchemy import BigInteger, Column, Integer, String

from .database.db import Base


class BomRegistration(Base):
    __tablename__ = "bom_registration"

    ref = Column(String, primary_key=True)
    name = Column(String, nullable=False)
    version = Column(String, nullable=False)
    author = Column(String, nullable=False)
    registeredAt = Column(BigInteger, nullable=False)
    registeredSeq = Column(Integer, nullable=False)
