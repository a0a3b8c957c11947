import hashlib
import os
import re
import secrets
from pathlib import Path

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from provchain.errors import ParticipantExists, ProvchainError, UnknownParticipant

_PARTICIPANT = re.compile(r"^[A-Za-z0-9._-]{1,128}$")


def check_participant_id(participant: str) -> str:
    if not isinstance(participant, str) or not _PARTICIPANT.match(participant):
        raise ProvchainError(f"invalid participant id {participant!r}")
    return participant


class Signer:
    """Ed25519 signing key bound to a participant."""

    def __init__(self, participant: str, private_key: Ed25519PrivateKey):
        self.participant = participant
        self._private_key = private_key
        self.public_key_hex = (
            private_key.public_key()
            .public_bytes(
                encoding=serialization.Encoding.Raw,
                format=serialization.PublicFormat.Raw,
            )
            .hex()
        )

    @classmethod
    def from_seed(cls, participant: str, seed: bytes) -> "Signer":
        if len(seed) != 32:
            raise ValueError(f"Seed must be 32 bytes, got {len(seed)}")
        return cls(participant, Ed25519PrivateKey.from_private_bytes(seed))

    def sign(self, message: bytes) -> bytes:
        return self._private_key.sign(message)

    def seed_bytes(self) -> bytes:
        return self._private_key.private_bytes(
            encoding=serialization.Encoding.Raw,
            format=serialization.PrivateFormat.Raw,
            encryption_algorithm=serialization.NoEncryption(),
        )


def verify_signature(public_key_hex: str, signature: bytes, message: bytes) -> bool:
    try:
        key = Ed25519PublicKey.from_public_bytes(bytes.fromhex(public_key_hex))
        key.verify(signature, message)
        return True
    except (InvalidSignature, ValueError):
        return False


class KeyRegistry:
    """Participant id -> verification key, populated from registration events."""

    def __init__(self):
        self._keys: dict[str, str] = {}

    def register(self, participant: str, public_key_hex: str) -> None:
        if participant in self._keys:
            raise ParticipantExists(participant)
        self._keys[participant] = public_key_hex

    def get(self, participant: str) -> str:
        try:
            return self._keys[participant]
        except KeyError:
            raise UnknownParticipant(participant) from None

    def __contains__(self, participant: str) -> bool:
        return participant in self._keys

    def __len__(self) -> int:
        return len(self._keys)

    def participants(self) -> list[str]:
        return sorted(self._keys)


class Keyring:
    """Private signing keys, one file per participant under ``directory``.

    With ``seed`` set, keys are derived as sha256(seed/participant) so ledgers
    written from scratch are byte-reproducible. Without a directory the
    keyring lives in memory.
    """

    def __init__(self, directory: Path | None = None, seed: str | None = None):
        self.directory = directory
        self.seed = seed
        self._signers: dict[str, Signer] = {}
        if directory is not None:
            directory.mkdir(parents=True, exist_ok=True)

    def _key_path(self, participant: str) -> Path | None:
        if self.directory is None:
            return None
        return self.directory / f"{participant}.key"

    def _derive(self, participant: str) -> bytes:
        if self.seed is not None:
            return hashlib.sha256(f"{self.seed}/{participant}".encode()).digest()
        return secrets.token_bytes(32)

    def create(self, participant: str) -> Signer:
        check_participant_id(participant)
        existing = self._load(participant)
        if existing is not None:
            return existing
        signer = Signer.from_seed(participant, self._derive(participant))
        path = self._key_path(participant)
        if path is not None:
            path.write_text(signer.seed_bytes().hex())
            os.chmod(path, 0o600)
        self._signers[participant] = signer
        return signer

    def _load(self, participant: str) -> Signer | None:
        if participant in self._signers:
            return self._signers[participant]
        path = self._key_path(participant)
        if path is None or not path.is_file():
            return None
        signer = Signer.from_seed(participant, bytes.fromhex(path.read_text().strip()))
        self._signers[participant] = signer
        return signer

    def signer(self, participant: str) -> Signer:
        signer = self._load(participant)
        if signer is None:
            raise UnknownParticipant(participant)
        return signer
