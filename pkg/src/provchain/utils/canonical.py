"""Deterministic byte encoding for content addressing.

Encoding is msgpack over a normalised value tree: map keys sorted, lists kept
in order, every integer packed as an 8-byte big-endian extension value so
integer width never depends on magnitude. Equal trees give equal bytes and
``canonical_decode`` inverts ``canonical_encode``.
"""

import hashlib
import re
from enum import Enum
from typing import Any

import msgpack
from pydantic import BaseModel

from provchain.constants import DIGEST_HEX_LENGTH, HASH_ALGORITHM
from provchain.errors import BadContentRef

_INT_EXT = 1
_CONTENT_REF = re.compile(rf"^[0-9a-f]{{{DIGEST_HEX_LENGTH}}}$")


def _normalise(value: Any) -> Any:
    if hasattr(value, "to_canonical"):
        value = value.to_canonical()
    elif isinstance(value, BaseModel):
        value = value.model_dump(mode="python")

    if isinstance(value, Enum):
        value = value.value
    if value is None or isinstance(value, (bool, str, bytes, float)):
        return value
    if isinstance(value, int):
        return msgpack.ExtType(_INT_EXT, value.to_bytes(8, "big", signed=True))
    if isinstance(value, dict):
        for key in value:
            if not isinstance(key, str):
                raise TypeError(f"canonical maps need string keys, got {key!r}")
        return {key: _normalise(value[key]) for key in sorted(value)}
    if isinstance(value, (list, tuple)):
        return [_normalise(v) for v in value]
    raise TypeError(f"cannot canonically encode {type(value).__name__}")


def _ext_hook(code: int, data: bytes) -> int:
    if code != _INT_EXT or len(data) != 8:
        raise ValueError(f"unexpected extension type {code}")
    return int.from_bytes(data, "big", signed=True)


def canonical_encode(entity: Any) -> bytes:
    return msgpack.packb(_normalise(entity), use_bin_type=True)


def canonical_decode(data: bytes) -> Any:
    return msgpack.unpackb(
        data, raw=False, ext_hook=_ext_hook, strict_map_key=True, use_list=True
    )


def digest(data: bytes) -> str:
    return hashlib.new(HASH_ALGORITHM, data).hexdigest()


def content_address(entity: Any) -> str:
    return digest(canonical_encode(entity))


def is_content_ref(value: Any) -> bool:
    return isinstance(value, str) and _CONTENT_REF.match(value) is not None


def check_content_ref(value: str) -> str:
    if not is_content_ref(value):
        raise BadContentRef(value)
    return value
