import random

import pytest

from provchain.constants import LEDGER_MAGIC, ZERO_DIGEST
from provchain.errors import (
    LedgerInvalid,
    NonMonotoneTimestamp,
    ParticipantExists,
    ProvchainError,
    UnknownParticipant,
)
from provchain.ledger import Keyring, Ledger
from provchain.ledger.ledger import frame_offsets
from provchain.models.events import (
    BolOpened,
    BomRegistered,
    FundsDeposited,
    ParticipantRegistered,
)
from provchain.utils.canonical import canonical_encode, digest

T0 = 1_700_000_000_000


@pytest.fixture
def keyring():
    return Keyring(seed="ledger-tests")


def register(ledger: Ledger, keyring: Keyring, participant: str, at: int = T0):
    signer = keyring.create(participant)
    return ledger.append(
        ParticipantRegistered(participant=participant, public_key=signer.public_key_hex),
        signer,
        at,
    )


def build(size: int, keyring: Keyring, path=None) -> Ledger:
    """Ledger of ``size`` entries: one registration then FundsDeposited events."""
    ledger = Ledger(path)
    register(ledger, keyring, "alice")
    signer = keyring.signer("alice")
    for i in range(1, size):
        ledger.append(FundsDeposited(participant="alice", amount=i), signer, T0 + i)
    return ledger


def test_genesis_entry(keyring):
    ledger = Ledger()
    entry = register(ledger, keyring, "alice")

    assert entry.seq == 0
    assert entry.prev_hash == ZERO_DIGEST
    assert entry.entry_hash == digest(canonical_encode(entry.body()))
    assert ledger.tip == entry
    assert "alice" in ledger.keys


def test_unregistered_author_is_rejected(keyring):
    ledger = Ledger()
    with pytest.raises(UnknownParticipant):
        ledger.append(BolOpened(bom_ref="a" * 64), keyring.create("mallory"), T0)
    assert len(ledger) == 0


def test_registration_must_be_self_signed(keyring):
    ledger = Ledger()
    register(ledger, keyring, "alice")
    bob = keyring.create("bob")
    with pytest.raises(ProvchainError):
        ledger.append(
            ParticipantRegistered(participant="carol", public_key=bob.public_key_hex), bob, T0
        )
    with pytest.raises(ParticipantExists):
        register(ledger, keyring, "alice")


def test_wrong_key_is_rejected(keyring):
    ledger = Ledger()
    register(ledger, keyring, "alice")
    impostor = Keyring(seed="someone-else").create("alice")
    with pytest.raises(ProvchainError):
        ledger.append(BolOpened(bom_ref="a" * 64), impostor, T0 + 1)


def test_timestamps_never_go_back(keyring):
    ledger = Ledger()
    register(ledger, keyring, "alice", at=T0 + 10)
    with pytest.raises(NonMonotoneTimestamp):
        ledger.append(BolOpened(bom_ref="a" * 64), keyring.signer("alice"), T0)
    # equal timestamps are allowed
    ledger.append(BolOpened(bom_ref="a" * 64), keyring.signer("alice"), T0 + 10)


def test_hundred_entries_chain(keyring):
    ledger = build(100, keyring)
    entries = ledger.entries

    assert [e.seq for e in entries] == list(range(100))
    prev = ZERO_DIGEST
    for entry in entries:
        assert entry.prev_hash == prev
        assert entry.entry_hash == digest(canonical_encode(entry.body()))
        prev = entry.entry_hash
    report = ledger.verify()
    assert report.ok
    assert str(report) == "ok entries=100"


def test_empty_ledger_verifies(tmp_path):
    assert Ledger().verify().ok
    assert Ledger.load(tmp_path / "missing.pcl").verify().ok


def test_file_round_trip(tmp_path, keyring):
    path = tmp_path / "ledger.pcl"
    ledger = build(20, keyring, path)

    data = path.read_bytes()
    assert data.startswith(LEDGER_MAGIC)
    assert data == ledger.to_bytes()

    reopened = Ledger.open(path)
    assert reopened.entries == ledger.entries
    assert reopened.keys.participants() == ["alice"]
    reopened.append(FundsDeposited(participant="alice", amount=1), keyring.signer("alice"), T0 + 50)
    assert Ledger.open(path).tip.seq == 20


def test_unverified_ledger_cannot_be_read(tmp_path, keyring):
    path = tmp_path / "ledger.pcl"
    build(3, keyring, path)
    loaded = Ledger.load(path)
    with pytest.raises(ProvchainError):
        loaded.entries
    assert loaded.verify().ok


def test_open_refuses_tampered_file(tmp_path, keyring):
    path = tmp_path / "ledger.pcl"
    build(10, keyring, path)
    data = bytearray(path.read_bytes())
    start, end = frame_offsets(bytes(data))[4]
    data[(start + end) // 2] ^= 0x01
    path.write_bytes(bytes(data))

    with pytest.raises(LedgerInvalid) as exc:
        Ledger.open(path)
    assert exc.value.seq <= 4


def test_flip_in_entry_42_is_reported_at_42(keyring):
    ledger = build(100, keyring)
    data = bytearray(ledger.to_bytes())
    start, end = frame_offsets(bytes(data))[42]
    data[end - 10] ^= 0xFF

    report = Ledger.from_bytes(bytes(data)).verify()
    assert not report.ok
    assert report.violation.seq == 42
    assert str(report).startswith("violation at seq=42")


def test_truncated_tail_is_reported(keyring):
    ledger = build(5, keyring)
    data = ledger.to_bytes()[:-3]
    report = Ledger.from_bytes(data).verify()
    assert report.violation.seq == 4
    assert report.violation.cause == "HashMismatch"


def test_entry_signed_by_other_key_is_bad_signature(keyring):
    ledger = build(3, keyring)
    good = ledger.to_bytes()

    # Same body, signature from a key alice never registered
    other = Keyring(seed="forger").create("alice")
    entry = ledger.entries[1]
    tampered = entry.model_copy(
        update={"signature": other.sign(bytes.fromhex(entry.entry_hash)).hex()}
    )
    raw = canonical_encode(tampered)
    spans = frame_offsets(good)
    data = good[: spans[1][0]] + len(raw).to_bytes(4, "big") + raw + good[spans[1][1] :]

    report = Ledger.from_bytes(data).verify()
    assert report.violation.seq == 1
    assert report.violation.cause == "BadSignature"


def test_reordered_entries_break_the_chain(keyring):
    ledger = build(4, keyring)
    data = ledger.to_bytes()
    spans = frame_offsets(data)
    frames = [data[s:e] for s, e in spans]
    swapped = LEDGER_MAGIC + frames[0] + frames[2] + frames[1] + frames[3]

    report = Ledger.from_bytes(swapped).verify()
    assert report.violation.seq == 1
    assert report.violation.cause == "BrokenChain"


def test_events_for_bol(keyring):
    ledger = Ledger()
    register(ledger, keyring, "alice")
    signer = keyring.signer("alice")
    ledger.append(BomRegistered(bom_ref="a" * 64, name="x", version="1"), signer, T0)
    opened = ledger.append(BolOpened(bom_ref="a" * 64), signer, T0)

    assert [e.type for e in ledger.events_for_bol(opened.entry_hash)] == ["BolOpened"]
    assert ledger.events_for_bol("f" * 64) == []


def test_seeded_keys_give_identical_ledgers():
    first = build(30, Keyring(seed="same"))
    second = build(30, Keyring(seed="same"))
    assert first.to_bytes() == second.to_bytes()


@pytest.mark.slow
@pytest.mark.parametrize("size,mutations", [(50, 400), (120, 300), (250, 200), (500, 100)])
def test_every_single_byte_mutation_is_caught(size, mutations, keyring):
    ledger = build(size, keyring)
    data = ledger.to_bytes()
    spans = frame_offsets(data)
    assert Ledger.from_bytes(data).verify().ok

    rng = random.Random(size)
    for _ in range(mutations):
        position = rng.randrange(len(data))
        mutated = bytearray(data)
        mutated[position] ^= rng.randint(1, 255)
        mutated_seq = next(
            (seq for seq, (start, end) in enumerate(spans) if start <= position < end), 0
        )

        report = Ledger.from_bytes(bytes(mutated)).verify()
        assert not report.ok, f"flip at byte {position} went unnoticed"
        assert report.violation.seq <= mutated_seq
