import os
from pathlib import Path
from typing import Optional

from xdg_base_dirs import xdg_data_home

from provchain.constants import (
    BLOB_DIRNAME,
    KEYS_DIRNAME,
    LAYOUT_MARKER,
    LEDGER_FILENAME,
    LOCK_FILENAME,
    STATE_DB_FILENAME,
)

DATA_DIR_ENV = "PROVCHAIN_DATA_DIR"

# Store the custom root directory
_custom_root: Optional[Path] = None


def set_custom_root(path: Optional[str | Path]) -> None:
    """Set a custom data directory (``--data-dir``)."""
    global _custom_root
    _custom_root = Path(path) if path else None


def data_directory(create: bool = True) -> Path:
    """Return (possibly creating) the data directory.

    Precedence: ``PROVCHAIN_DATA_DIR``, then ``--data-dir``, then
    ``$XDG_DATA_HOME/provchain``.
    """
    env = os.environ.get(DATA_DIR_ENV)
    if env:
        directory = Path(env)
    elif _custom_root is not None:
        directory = _custom_root
    else:
        directory = xdg_data_home() / "provchain"

    if create:
        directory.mkdir(exist_ok=True, parents=True)
    return directory


def config_file(root: Path) -> Path:
    return root / "config.yaml"


def ledger_file(root: Path) -> Path:
    return root / LEDGER_FILENAME


def state_db_file(root: Path) -> Path:
    return root / STATE_DB_FILENAME


def blob_root(root: Path) -> Path:
    return root / BLOB_DIRNAME


def keys_directory(root: Path) -> Path:
    return root / KEYS_DIRNAME


def layout_marker(root: Path) -> Path:
    return root / LAYOUT_MARKER


def lock_file(root: Path) -> Path:
    return root / LOCK_FILENAME
