"""Shared helpers: key-value config files and reproducible RNG streams."""

from __future__ import annotations

import zlib
from pathlib import Path

import numpy as np


class ConfigError(ValueError):
    """Raised for malformed or inconsistent configuration input."""


def read_kv_config(path: str | Path) -> dict[str, str]:
    """Parse a flat ``key = value`` config file.

    Blank lines and lines starting with ``#`` are ignored. Keys may repeat
    only for list-style entries (``tower.*``); plain keys must be unique.
    """
    out: dict[str, str] = {}
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"{path}:{lineno}: empty key")
        if key in out:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def parse_bool(value: str, key: str) -> bool:
    low = value.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {value!r}")


def derive_rng(master_seed: int, *labels: object) -> np.random.Generator:
    """Named deterministic RNG stream.

    Every source of randomness in the pipeline draws from a stream derived
    from one master seed plus stable labels (stage name, location id), so
    results are reproducible and independent of evaluation order.
    """
    keys = [zlib.crc32(str(label).encode("utf-8")) for label in labels]
    return np.random.default_rng([int(master_seed) & 0xFFFFFFFF, *keys])


def as_rng(rng: np.random.Generator | int | None) -> np.random.Generator:
    """Accept a Generator, a seed, or None (fresh nondeterministic stream)."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
