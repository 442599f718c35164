"""Relay decoder configuration files.

Flat ``key=value`` text using the published parameter names, one per line,
with ``#`` comments. Hyphenated spellings such as ``pre-iter`` are accepted.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path

from .relaybp import RelayConfig

_INT_KEYS = ("pre_iter", "set_max_iter", "num_sets", "stop_nconv", "seed")
CONFIG_KEYS = (
    "stop_nconv",
    "num_sets",
    "gamma0",
    "pre_iter",
    "set_max_iter",
    "gamma_min",
    "gamma_max",
    "seed",
)


def parse_relay_config(text: str, base: RelayConfig | None = None) -> RelayConfig:
    """Apply the settings in ``text`` on top of ``base``.

    Raises:
        ValueError: On unknown keys, malformed lines or values, or a
            resulting configuration that fails validation
    """
    overrides: dict[str, int | float] = {}
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {line_number}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in CONFIG_KEYS:
            raise ValueError(
                f"line {line_number}: unknown key {key!r}; expected one of {list(CONFIG_KEYS)}"
            )
        try:
            overrides[key] = int(value) if key in _INT_KEYS else float(value)
        except ValueError as e:
            raise ValueError(f"line {line_number}: bad value for {key}: {value!r}") from e

    return dataclasses.replace(base or RelayConfig(), **overrides)


def load_relay_config(path: Path, base: RelayConfig | None = None) -> RelayConfig:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Config file not found: {path}")
    try:
        return parse_relay_config(path.read_text(encoding="utf-8"), base)
    except ValueError as e:
        raise ValueError(f"{path}: {e}") from e


def dump_relay_config(cfg: RelayConfig) -> str:
    return "".join(f"{key}={getattr(cfg, key)!r}\n" for key in CONFIG_KEYS)


def save_relay_config(cfg: RelayConfig, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump_relay_config(cfg), encoding="utf-8")
    return path
