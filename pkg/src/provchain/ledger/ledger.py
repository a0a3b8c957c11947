"""Append-only, hash-chained, signed event log.

File format: magic ``PCL1`` followed by records of a 4-byte big-endian length
and the canonical bytes of one LedgerEntry. Each entry hashes
(seq, prev_hash, timestamp, author, event) and carries the author's Ed25519
signature over that hash.
"""

import os
import struct
from pathlib import Path
from typing import Iterator, Literal

from pydantic import BaseModel

from provchain.constants import LEDGER_MAGIC, ZERO_DIGEST
from provchain.errors import (
    LedgerInvalid,
    NonMonotoneTimestamp,
    ParticipantExists,
    ProvchainError,
    UnknownParticipant,
)
from provchain.ledger.keys import KeyRegistry, Signer, verify_signature
from provchain.log import get_logger
from provchain.models.events import (
    REQUEST_EVENTS,
    BolAborted,
    BolOpened,
    BolSealed,
    DataRequested,
    Delivered,
    LedgerEntry,
    ParticipantRegistered,
    ShadowRecorded,
    hashed_body,
)
from provchain.utils.canonical import canonical_decode, canonical_encode, digest

logger = get_logger(__name__)

ViolationCause = Literal["HashMismatch", "BrokenChain", "BadSignature", "NonMonotoneTimestamp"]

_LENGTH = struct.Struct(">I")


class Violation(BaseModel):
    seq: int
    cause: ViolationCause


class VerificationReport(BaseModel):
    entries: int
    violation: Violation | None = None

    @property
    def ok(self) -> bool:
        return self.violation is None

    def __str__(self) -> str:
        if self.violation is None:
            return f"ok entries={self.entries}"
        return f"violation at seq={self.violation.seq} cause={self.violation.cause}"


class _MalformedEntry(Exception):
    pass


def decode_entry(raw: bytes) -> LedgerEntry:
    """Decode one record; the bytes must be exactly the entry's canonical form."""
    try:
        entry = LedgerEntry.model_validate(canonical_decode(raw))
        if canonical_encode(entry) != raw:
            raise _MalformedEntry("non-canonical entry bytes")
    except _MalformedEntry:
        raise
    except Exception as e:
        raise _MalformedEntry(str(e)) from e
    return entry


def split_frames(data: bytes) -> tuple[list[bytes], bool]:
    """Return the record payloads and whether framing broke after the last one."""
    if not data:
        return [], False
    if data[: len(LEDGER_MAGIC)] != LEDGER_MAGIC:
        return [], True
    frames: list[bytes] = []
    offset = len(LEDGER_MAGIC)
    while offset < len(data):
        if offset + _LENGTH.size > len(data):
            return frames, True
        (length,) = _LENGTH.unpack_from(data, offset)
        start = offset + _LENGTH.size
        if start + length > len(data):
            return frames, True
        frames.append(data[start : start + length])
        offset = start + length
    return frames, False


def frame_offsets(data: bytes) -> list[tuple[int, int]]:
    """(start, end) byte span of each record, length prefix included."""
    spans = []
    offset = len(LEDGER_MAGIC)
    while offset + _LENGTH.size <= len(data):
        (length,) = _LENGTH.unpack_from(data, offset)
        end = offset + _LENGTH.size + length
        spans.append((offset, end))
        offset = end
    return spans


class Ledger:
    """Single-writer ledger. ``path=None`` keeps it in memory."""

    def __init__(self, path: Path | None = None):
        self.path = path
        self._frames: list[bytes] = []
        self._entries: list[LedgerEntry] = []
        self._truncated = False
        self._verified = True
        self.keys = KeyRegistry()

    # region open

    @classmethod
    def load(cls, path: Path) -> "Ledger":
        """Read a ledger file without trusting it; use ``verify`` before reading entries."""
        data = path.read_bytes() if path.is_file() else b""
        return cls.from_bytes(data, path=path)

    @classmethod
    def from_bytes(cls, data: bytes, path: Path | None = None) -> "Ledger":
        """Unverified ledger over a file image."""
        ledger = cls(path)
        ledger._frames, ledger._truncated = split_frames(data)
        ledger._verified = False
        return ledger

    @classmethod
    def open(cls, path: Path) -> "Ledger":
        """Load and re-verify the whole chain; refuse a ledger that fails."""
        ledger = cls.load(path)
        report = ledger.verify()
        if not report.ok:
            raise LedgerInvalid(report.violation.seq, report.violation.cause)
        ledger._adopt()
        return ledger

    def _adopt(self) -> None:
        self._entries = [decode_entry(raw) for raw in self._frames]
        self.keys = KeyRegistry()
        for entry in self._entries:
            if isinstance(entry.event, ParticipantRegistered):
                self.keys.register(entry.event.participant, entry.event.public_key)
        self._verified = True

    # region read

    def __len__(self) -> int:
        return len(self._frames)

    def __iter__(self) -> Iterator[LedgerEntry]:
        self._require_verified()
        return iter(list(self._entries))

    @property
    def entries(self) -> list[LedgerEntry]:
        self._require_verified()
        return list(self._entries)

    def entry(self, seq: int) -> LedgerEntry:
        self._require_verified()
        return self._entries[seq]

    @property
    def tip(self) -> LedgerEntry | None:
        self._require_verified()
        return self._entries[-1] if self._entries else None

    @property
    def tip_hash(self) -> str:
        tip = self.tip
        return tip.entry_hash if tip else ZERO_DIGEST

    @property
    def tip_timestamp(self) -> int | None:
        tip = self.tip
        return tip.timestamp if tip else None

    def _require_verified(self) -> None:
        if not self._verified:
            raise ProvchainError("ledger has not been verified")

    def to_bytes(self) -> bytes:
        parts = [LEDGER_MAGIC]
        for raw in self._frames:
            parts.append(_LENGTH.pack(len(raw)))
            parts.append(raw)
        return b"".join(parts)

    # region append

    def append(self, event, signer: Signer, at: int) -> LedgerEntry:
        self._require_verified()
        author = signer.participant
        if isinstance(event, ParticipantRegistered):
            if event.participant != author or event.public_key != signer.public_key_hex:
                raise ProvchainError("participants register themselves with their own key")
            if author in self.keys:
                raise ParticipantExists(author)
        elif author not in self.keys:
            raise UnknownParticipant(author)
        elif self.keys.get(author) != signer.public_key_hex:
            raise ProvchainError(f"signing key does not match the registered key of {author}")

        tip_ts = self.tip_timestamp
        if tip_ts is not None and at < tip_ts:
            raise NonMonotoneTimestamp(at, tip_ts)

        seq = len(self._entries)
        prev_hash = self.tip_hash
        entry_hash = digest(canonical_encode(hashed_body(seq, prev_hash, at, author, event)))
        entry = LedgerEntry(
            seq=seq,
            prev_hash=prev_hash,
            timestamp=at,
            author=author,
            event=event,
            entry_hash=entry_hash,
            signature=signer.sign(bytes.fromhex(entry_hash)).hex(),
        )
        raw = canonical_encode(entry)
        self._write(raw)
        self._frames.append(raw)
        self._entries.append(entry)
        if isinstance(event, ParticipantRegistered):
            self.keys.register(author, event.public_key)
        logger.debug("ledger.appended", seq=seq, type=event.type, author=author)
        return entry

    def _write(self, raw: bytes) -> None:
        if self.path is None:
            return
        new_file = not self.path.is_file() or self.path.stat().st_size == 0
        with open(self.path, "ab") as f:
            if new_file:
                f.write(LEDGER_MAGIC)
            f.write(_LENGTH.pack(len(raw)))
            f.write(raw)
            f.flush()
            os.fsync(f.fileno())

    # region verify

    def verify(self) -> VerificationReport:
        """Recompute the chain from the stored bytes. Read-only."""
        registry = KeyRegistry()
        prev_hash = ZERO_DIGEST
        prev_ts: int | None = None

        def violation(seq: int, cause: ViolationCause) -> VerificationReport:
            return VerificationReport(entries=len(self._frames), violation=Violation(seq=seq, cause=cause))

        for seq, raw in enumerate(self._frames):
            try:
                entry = decode_entry(raw)
            except _MalformedEntry:
                return violation(seq, "HashMismatch")

            recomputed = digest(canonical_encode(entry.body()))
            if recomputed != entry.entry_hash:
                return violation(seq, "HashMismatch")
            if entry.seq != seq or entry.prev_hash != prev_hash:
                return violation(seq, "BrokenChain")

            event = entry.event
            self_registration = (
                isinstance(event, ParticipantRegistered)
                and event.participant == entry.author
                and entry.author not in registry
            )
            if self_registration:
                key = event.public_key
            elif entry.author in registry and not isinstance(event, ParticipantRegistered):
                key = registry.get(entry.author)
            else:
                return violation(seq, "BadSignature")
            try:
                signature = bytes.fromhex(entry.signature)
            except ValueError:
                return violation(seq, "BadSignature")
            if not verify_signature(key, signature, bytes.fromhex(entry.entry_hash)):
                return violation(seq, "BadSignature")

            if prev_ts is not None and entry.timestamp < prev_ts:
                return violation(seq, "NonMonotoneTimestamp")

            if self_registration:
                registry.register(entry.author, key)
            prev_hash = entry.entry_hash
            prev_ts = entry.timestamp

        if self._truncated:
            return violation(len(self._frames), "HashMismatch")
        return VerificationReport(entries=len(self._frames))

    # region queries

    def events_for_bol(self, bol_id: str) -> list[LedgerEntry]:
        """Entries referencing the BoL, including the contract traffic of its requests."""
        entries = self.entries
        request_ids: set[str] = set()
        for entry in entries:
            event = entry.event
            if isinstance(event, DataRequested) and event.bol_id == bol_id:
                request_ids.add(entry.entry_hash)
            elif (
                isinstance(event, ShadowRecorded)
                and event.bol_id == bol_id
                and isinstance(event.provenance, Delivered)
            ):
                request_ids.add(event.provenance.request_id)

        result = []
        for entry in entries:
            event = entry.event
            if isinstance(event, BolOpened):
                hit = entry.entry_hash == bol_id
            elif isinstance(event, (ShadowRecorded, BolSealed, BolAborted)):
                hit = event.bol_id == bol_id
            elif isinstance(event, DataRequested):
                hit = entry.entry_hash in request_ids
            elif isinstance(event, REQUEST_EVENTS):
                hit = event.request_id in request_ids
            else:
                hit = False
            if hit:
                result.append(entry)
        return result
