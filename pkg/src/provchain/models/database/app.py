from pathlib import Path

from sqlalchemy import create_engine, event, inspect
from sqlalchemy.engine import Engine
from sqlalchemy.orm import sessionmaker
from sqlalchemy.pool import StaticPool

from provchain.log import get_logger

# -------- create all imports -------- #
from provchain.models.account import Account, Participant  # noqa: F401
from provchain.models.bol import Bol, Shadow  # noqa: F401
from provchain.models.bom_registration import BomRegistration  # noqa: F401
from provchain.models.contract import DataContract, DataRequest  # noqa: F401
from provchain.models.database.db import Base
from provchain.models.ledger_cursor import LedgerCursor

logger = get_logger(__name__)


def make_engine(path: Path | None = None, read_only: bool = False) -> Engine:
    """SQLite engine for the projection; ``None`` gives a private in-memory database."""
    if path is None:
        db_engine = create_engine(
            "sqlite://",
            connect_args={"check_same_thread": False},
            poolclass=StaticPool,
        )
    elif read_only:
        db_engine = create_engine(f"sqlite:///file:{path.resolve()}?mode=ro&uri=true")
    else:
        db_engine = create_engine(f"sqlite:///{path.resolve()}")

    @event.listens_for(db_engine, "connect")
    def _enable_foreign_keys(dbapi_connection, connection_record):
        cursor = dbapi_connection.cursor()
        cursor.execute("PRAGMA foreign_keys=ON")
        cursor.close()

    return db_engine


def make_session_factory(db_engine: Engine) -> sessionmaker:
    return sessionmaker(bind=db_engine, expire_on_commit=False)


def _create_cursor(session):
    if session.get(LedgerCursor, 1) is None:
        session.add(LedgerCursor(id=1, seq=-1, entryHash=None))
        session.commit()


def schema_matches(db_engine: Engine) -> bool:
    """True when every projection table exists with exactly the model's columns."""
    inspector = inspect(db_engine)
    existing_tables = set(inspector.get_table_names())
    for table in Base.metadata.tables.values():
        if table.name not in existing_tables:
            return False
        existing_columns = {col["name"] for col in inspector.get_columns(table.name)}
        if existing_columns != {col.name for col in table.columns}:
            return False
    return True


def init_db(db_engine: Engine):
    # The projection is rebuilt from the ledger, so a stale schema is dropped, not migrated
    if not schema_matches(db_engine):
        if inspect(db_engine).get_table_names():
            logger.info("projection.schema_reset")
        Base.metadata.drop_all(db_engine)
        Base.metadata.create_all(db_engine)
    session = make_session_factory(db_engine)()
    try:
        _create_cursor(session)
    finally:
        session.close()
