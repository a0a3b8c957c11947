"""Deterministic stand-in payloads for photos, datasets and models."""

import hashlib


def payload(label: str, size: int) -> bytes:
    """``size`` bytes of a sha256 chain seeded by ``label``."""
    out = bytearray()
    block = hashlib.sha256(label.encode()).digest()
    while len(out) < size:
        out += block
        block = hashlib.sha256(block).digest()
    return bytes(out[:size])


def congestion_score(content: bytes) -> int:
    """Stub scorer: first digest byte reduced to 0..10."""
    return hashlib.sha256(content).digest()[0] % 11
