import pytest

from provchain.config import ClockConfig, Config, KeysConfig
from provchain.engine import Engine
from provchain.managers.boms import load_static_bom, register_bom, validate_bom


def make_config(seed: str = "test-seed") -> Config:
    return Config.get_default().model_copy(
        update={
            "clock": ClockConfig(mode="fixed", start_ms=1_700_000_000_000, step_ms=10),
            "keys": KeysConfig(seed=seed),
        }
    )


@pytest.fixture(scope="function")
def engine():
    # Fully in-memory: ledger, blobs, keys and SQLite projection
    engine = Engine(None, make_config())
    yield engine
    engine.close()


@pytest.fixture(scope="function")
def disk_engine(tmp_path):
    engine = Engine(tmp_path / "data", make_config())
    yield engine
    engine.close()


@pytest.fixture
def hpc_bom(engine):
    bom = validate_bom(load_static_bom("hpc-cs"))
    register_bom(engine, bom)
    return bom


@pytest.fixture
def engine_factory():
    """Fresh in-memory engines, closed at teardown."""
    engines: list[Engine] = []

    def factory(seed: str = "test-seed") -> Engine:
        engines.append(Engine(None, make_config(seed)))
        return engines[-1]

    yield factory
    for engine in engines:
        engine.close()
