from sqlalchemy import Column, Integer, String

from .database.db import Base


class LedgerCursor(Base):
    """Last ledger entry applied to the projection. Single row, id 1."""

    __tablename__ = "ledger_cursor"

    id = Column(Integer, primary_key=True, default=1)
    seq = Column(Integer, nullable=False, default=-1)
    entryHash = Column(String, nullable=True)
