import warnings
from pathlib import Path
from typing import Any, Literal

import yaml
from pydantic import BaseModel, Field, ValidationError, field_validator

from provchain.constants import (
    DEFAULT_INLINE_THRESHOLD,
    DEFAULT_MAX_BLOB_BYTES,
    HASH_ALGORITHM,
    SIGNATURE_ALGORITHM,
)
from provchain.locations import config_file


class ClockConfig(BaseModel):
    # system: wall clock; fixed: start_ms, start_ms + step_ms, ...
    mode: Literal["system", "fixed"] = "system"
    start_ms: int = Field(ge=0, default=1_600_000_000_000)
    step_ms: int = Field(gt=0, default=100)


class HashingConfig(BaseModel):
    algorithm: Literal["sha256"] = HASH_ALGORITHM
    signature: Literal["ed25519"] = SIGNATURE_ALGORITHM


class Limits(BaseModel):
    inline_threshold: int = Field(gt=0, default=DEFAULT_INLINE_THRESHOLD)
    max_blob_bytes: int = Field(gt=0, default=DEFAULT_MAX_BLOB_BYTES)


class KeysConfig(BaseModel):
    # When set, participant keys derive from this seed so ledgers are reproducible.
    seed: str | None = None


class Defaults(BaseModel):
    operator: str = "operator"
    engine_participant: str = "contract-engine"

    @field_validator("operator", "engine_participant")
    @classmethod
    def strip_participant(cls, v: str) -> str:
        v = (v or "").strip()
        if not v:
            raise ValueError("participant id cannot be empty")
        return v


class LoggingConfig(BaseModel):
    level: Literal["DEBUG", "INFO", "WARNING", "ERROR"] = "WARNING"


class Config(BaseModel):
    clock: ClockConfig = ClockConfig()
    hashing: HashingConfig = HashingConfig()
    limits: Limits = Limits()
    keys: KeysConfig = KeysConfig()
    defaults: Defaults = Defaults()
    logging: LoggingConfig = LoggingConfig()

    @classmethod
    def get_default(cls):
        return cls(
            clock=ClockConfig(),
            hashing=HashingConfig(),
            limits=Limits(),
            keys=KeysConfig(),
            defaults=Defaults(),
            logging=LoggingConfig(),
        )

    @classmethod
    def from_mapping(cls, data: dict[str, Any]) -> "Config":
        try:
            return cls(**data)
        except ValidationError as e:
            error_messages = []
            for error in e.errors():
                field = error["loc"]
                field_path = ".".join(str(x) for x in field)
                input_value = error.get("input")
                allowed_values = None

                # Extract allowed values for literal errors
                if error["type"] == "literal_error":
                    msg = error["msg"]
                    allowed_list = msg.split("'")[1::2]
                    allowed_values = " or ".join(f"'{v}'" for v in allowed_list)

                message = f"Invalid configuration in field '{field_path}'"
                if input_value is not None:
                    message += f"\nCurrent value: '{input_value}'"
                if allowed_values:
                    message += f"\nAllowed values: {allowed_values}"

                error_messages.append(message)

            raise ConfigurationError("\n\n".join(error_messages))


class ConfigurationError(Exception):
    """Custom exception for configuration errors"""

    pass


CONFIG: Config | None = None


def _load_yaml_config(path: Path) -> dict[str, Any]:
    if not path.is_file():
        return {}

    try:
        with open(path, "r") as f:
            config = yaml.safe_load(f)
            return config if isinstance(config, dict) else {}
    except Exception as e:
        warnings.warn(f"Error loading config file: {e}")
        return {}


def ensure_yaml_fields(path: Path, config: Config) -> None:
    """Write any missing default keys back into config.yaml."""
    current = _load_yaml_config(path)

    def update_config(default, current):
        for key, value in default.items():
            if isinstance(value, dict):
                current[key] = update_config(value, current.get(key, {}))
            elif key not in current:
                current[key] = value
        return current

    merged = update_config(config.model_dump(), current)
    try:
        with open(path, "w") as f:
            yaml.safe_dump(merged, f, default_flow_style=False)
    except OSError:
        pass


def load_config(root: Path | None = None, write_defaults: bool = True) -> Config:
    """Load ``<root>/config.yaml``; with no root, return defaults."""
    global CONFIG
    if root is None:
        CONFIG = Config.get_default()
        return CONFIG

    path = config_file(root)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        data = _load_yaml_config(path)
    CONFIG = Config.from_mapping(data)
    if write_defaults:
        ensure_yaml_fields(path, CONFIG)
    return CONFIG
