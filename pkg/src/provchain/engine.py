"""Wires config, clock, keys, ledger, blobstore and the SQL projection together."""

from pathlib import Path

from sqlalchemy.engine import Engine as SqlEngine

from provchain.blobstore import BlobStore
from provchain.clock import Clock, SteppingClock, SystemClock
from provchain.config import Config
from provchain.constants import LAYOUT_VERSION
from provchain.errors import LayoutMismatch, NonMonotoneTimestamp
from provchain.ledger import Keyring, Ledger
from provchain.locations import (
    blob_root,
    keys_directory,
    layout_marker,
    ledger_file,
    lock_file,
    state_db_file,
)
from provchain.log import get_logger
from provchain.managers.accounts import register_participant
from provchain.managers.projection import apply_entry, projection_matches, rebuild_state
from provchain.models.database.app import (
    init_db,
    make_engine,
    make_session_factory,
    schema_matches,
)
from provchain.models.events import LedgerEntry

try:
    import fcntl
except ImportError:  # pragma: no cover - non-posix
    fcntl = None

logger = get_logger(__name__)


def make_clock(config: Config) -> Clock:
    if config.clock.mode == "fixed":
        return SteppingClock(config.clock.start_ms, config.clock.step_ms)
    return SystemClock()


def check_layout(root: Path, write: bool = True) -> None:
    marker = layout_marker(root)
    if marker.is_file():
        found = marker.read_text().strip()
        if found != str(LAYOUT_VERSION):
            raise LayoutMismatch(found, LAYOUT_VERSION)
    elif write:
        marker.write_text(f"{LAYOUT_VERSION}\n")


class _DirLock:
    def __init__(self, path: Path, shared: bool):
        self._file = open(path, "a+")
        if fcntl is not None:
            fcntl.flock(self._file.fileno(), fcntl.LOCK_SH if shared else fcntl.LOCK_EX)

    def release(self) -> None:
        if self._file.closed:
            return
        if fcntl is not None:
            fcntl.flock(self._file.fileno(), fcntl.LOCK_UN)
        self._file.close()


class Engine:
    """A data directory opened for use.

    ``root=None`` gives a fully in-memory engine (ledger, blobs, keys and
    projection), which is what the tests use.
    """

    def __init__(
        self,
        root: Path | None = None,
        config: Config | None = None,
        clock: Clock | None = None,
        shared: bool = False,
    ):
        self.root = root
        self.config = config or Config.get_default()
        self._lock = None

        if root is not None:
            root.mkdir(parents=True, exist_ok=True)
            check_layout(root, write=not shared)
            self._lock = _DirLock(lock_file(root), shared)

        try:
            self.keyring = Keyring(
                keys_directory(root) if root is not None else None,
                seed=self.config.keys.seed,
            )
            self.ledger = Ledger.open(ledger_file(root)) if root is not None else Ledger()
            self.blobs = BlobStore(
                blob_root(root) if root is not None else None,
                max_bytes=self.config.limits.max_blob_bytes,
            )
            self.db_engine = self._open_projection(shared)
            self.Session = make_session_factory(self.db_engine)
            self.sync_state()

            self.clock = clock or make_clock(self.config)
            self._resume_clock(self.ledger.tip_timestamp)
        except BaseException:
            self.close()
            raise

    @property
    def inline_threshold(self) -> int:
        return self.config.limits.inline_threshold

    @property
    def operator(self) -> str:
        return self.config.defaults.operator

    @property
    def engine_participant(self) -> str:
        return self.config.defaults.engine_participant

    def _resume_clock(self, timestamp: int | None) -> None:
        resume = getattr(self.clock, "resume_after", None)
        if resume is not None:
            resume(timestamp)

    def now(self) -> int:
        return self.clock.now()

    def _open_projection(self, shared: bool) -> SqlEngine:
        """SQLite projection for this engine.

        Under a shared lock the on-disk database is opened read-only and only
        used when it already ends at the ledger tip. Otherwise the projection
        is rebuilt in memory and nothing is written to the data directory.
        """
        if self.root is None:
            db_engine = make_engine(None)
        elif not shared:
            db_engine = make_engine(state_db_file(self.root))
        else:
            path = state_db_file(self.root)
            if path.is_file():
                db_engine = make_engine(path, read_only=True)
                if schema_matches(db_engine):
                    session = make_session_factory(db_engine)()
                    try:
                        if projection_matches(session, self.ledger):
                            return db_engine
                    finally:
                        session.close()
                db_engine.dispose()
            logger.info("projection.rebuilt_in_memory", reason="shared lock")
            db_engine = make_engine(None)
        init_db(db_engine)
        return db_engine

    def sync_state(self) -> None:
        """Rebuild the projection when it does not end at the ledger tip."""
        session = self.Session()
        try:
            if not projection_matches(session, self.ledger):
                rebuild_state(session, self.ledger)
        finally:
            session.close()

    def emit(self, event, author: str, at: int | None = None) -> LedgerEntry:
        """Sign and append one event, then fold it into the projection."""
        if at is None:
            at = self.clock.now()
            tip = self.ledger.tip_timestamp
            if tip is not None and at < tip:
                raise NonMonotoneTimestamp(at, tip)
        signer = self.keyring.signer(author)
        entry = self.ledger.append(event, signer, at)
        self._resume_clock(at)

        session = self.Session()
        try:
            apply_entry(session, entry)
            session.commit()
        except Exception:
            session.rollback()
            session.close()
            logger.warning("projection.apply_failed", seq=entry.seq, type=entry.type)
            # the entry is on the ledger; bring the projection back to its tip
            try:
                self.sync_state()
            except Exception:
                logger.exception("projection.rebuild_failed", seq=entry.seq)
            raise
        finally:
            session.close()
        return entry

    def ensure_participant(self, participant: str) -> None:
        """Register a service participant on first use, stamped at the ledger tip."""
        if participant not in self.ledger.keys:
            register_participant(self, participant, at=self.ledger.tip_timestamp)

    def close(self) -> None:
        db_engine = getattr(self, "db_engine", None)
        if db_engine is not None:
            db_engine.dispose()
        if self._lock is not None:
            self._lock.release()
            self._lock = None

    def __enter__(self) -> "Engine":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
