import pytest

from provchain.errors import OversizeText, UnknownBom
from provchain.managers.boms import (
    get_all_boms,
    get_bom,
    load_static_bom,
    register_bom,
    validate_bom,
)


def test_register_and_read_back(engine):
    bom = validate_bom(load_static_bom("hpc-cs"))
    ref = register_bom(engine, bom)

    assert ref == bom.ref
    assert get_bom(engine, ref).definition == bom.definition
    assert engine.blobs.get(ref)
    event = engine.ledger.tip.event
    assert (event.type, event.bom_ref, event.name) == ("BomRegistered", ref, "hpc-cs")


def test_register_is_idempotent(engine):
    bom = validate_bom(load_static_bom("hpc-cs"))
    register_bom(engine, bom)
    count = len(engine.ledger)

    assert register_bom(engine, bom) == bom.ref
    assert len(engine.ledger) == count
    assert [b.ref for b in get_all_boms(engine)] == [bom.ref]


def test_unknown_bom(engine):
    with pytest.raises(UnknownBom):
        get_bom(engine, "f" * 64)


def test_oversize_name_is_not_registered(engine):
    bom = load_static_bom("hpc-cs")
    long_name = validate_bom(bom.model_copy(update={"name": "hpc-cs " * 300}))
    count = len(engine.ledger)

    with pytest.raises(OversizeText):
        register_bom(engine, long_name)

    assert len(engine.ledger) == count
    assert get_all_boms(engine) == []
