import random

import pytest

from provchain.errors import BadContentRef
from provchain.managers.boms import load_static_bom
from provchain.models.events import Blob, Computed, ShadowRecorded
from provchain.utils.canonical import (
    canonical_decode,
    canonical_encode,
    check_content_ref,
    content_address,
    digest,
    is_content_ref,
)


def test_same_value_same_bytes():
    bom = load_static_bom("hpc-cs")
    assert canonical_encode(bom) == canonical_encode(bom)
    assert content_address(bom) == content_address(load_static_bom("hpc-cs"))


def test_bom_address_ignores_declaration_order():
    bom = load_static_bom("ltc-cs-training")
    reordered = bom.model_copy(
        update={
            "data_sources": list(reversed(bom.data_sources)),
            "artifacts": list(reversed(bom.artifacts)),
            "assemblies": list(reversed(bom.assemblies)),
        }
    )
    assert content_address(reordered) == content_address(bom)
    assert content_address(reordered) == content_address(bom.canonical())


def test_map_key_order_is_irrelevant():
    assert canonical_encode({"b": 1, "a": [1, 2]}) == canonical_encode({"a": [1, 2], "b": 1})


def test_list_order_is_significant():
    assert canonical_encode([1, 2]) != canonical_encode([2, 1])


def test_integer_width_is_fixed():
    small = canonical_encode(1)
    large = canonical_encode(2**40)
    assert len(small) == len(large)
    assert canonical_decode(large) == 2**40
    assert canonical_decode(canonical_encode(-5)) == -5


def test_models_encode_as_their_fields():
    event = ShadowRecorded(
        bol_id="b" * 64,
        node="congestion-score",
        value=Blob(ref="c" * 64),
        provenance=Computed(assembly="traffic-scene-analysis"),
    )
    decoded = canonical_decode(canonical_encode(event))
    assert decoded["node"] == "congestion-score"
    assert decoded["value"] == {"kind": "blob", "ref": "c" * 64}
    assert ShadowRecorded.model_validate(decoded) == event


def test_rejects_unsupported_values():
    with pytest.raises(TypeError):
        canonical_encode({1: "int key"})
    with pytest.raises(TypeError):
        canonical_encode({"set": {1, 2}})


def test_content_refs():
    ref = digest(b"")
    assert ref == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
    assert is_content_ref(ref)
    assert not is_content_ref(ref.upper())
    assert not is_content_ref(ref[:-1])
    assert not is_content_ref(None)
    with pytest.raises(BadContentRef):
        check_content_ref("nope")


def _random_tree(rng: random.Random, depth: int = 0):
    choice = rng.randrange(8 if depth < 4 else 6)
    if choice == 0:
        return None
    if choice == 1:
        return rng.random() < 0.5
    if choice == 2:
        return rng.randint(-(2**63), 2**63 - 1)
    if choice == 3:
        return "".join(rng.choice("abcxyz-_/é") for _ in range(rng.randint(0, 12)))
    if choice == 4:
        return rng.randbytes(rng.randint(0, 40))
    if choice == 5:
        return rng.uniform(-1e6, 1e6)
    if choice == 6:
        return [_random_tree(rng, depth + 1) for _ in range(rng.randint(0, 5))]
    return {
        "".join(rng.choice("abcdef") for _ in range(rng.randint(1, 6))): _random_tree(rng, depth + 1)
        for _ in range(rng.randint(0, 5))
    }


def _sorted_tree(value):
    if isinstance(value, dict):
        return {k: _sorted_tree(value[k]) for k in sorted(value)}
    if isinstance(value, list):
        return [_sorted_tree(v) for v in value]
    return value


@pytest.mark.slow
def test_random_trees_decode_to_themselves():
    rng = random.Random(7)
    for _ in range(10_000):
        tree = _random_tree(rng)
        encoded = canonical_encode(tree)
        decoded = canonical_decode(encoded)
        assert decoded == _sorted_tree(tree)
        assert canonical_encode(decoded) == encoded
