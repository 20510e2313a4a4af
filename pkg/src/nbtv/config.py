"""Flat ``key = value`` configuration files.

The format is intentionally tiny: one ``key = value`` pair per line, ``#``
starts a comment, blank lines are ignored.  Lists are comma-separated.
The canonical serialization (sorted keys, repr-formatted values) feeds a
SHA-256 digest that experiment outputs carry row by row, so any result can
be traced back to the exact effective configuration.
"""

from __future__ import annotations

import hashlib

from .errors import ConfigError


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse flat key = value lines into a string -> string mapping."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}: line {lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"{source}: line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"{source}: line {lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def read_config_file(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return parse_config_text(text, source=str(path))


def canonical_text(mapping: dict) -> str:
    """Canonical serialization: sorted ``key = value`` lines."""
    lines = [f"{k} = {mapping[k]}" for k in sorted(mapping)]
    return "\n".join(lines) + "\n"


def config_digest(mapping: dict) -> str:
    """Short stable digest of the canonical serialization."""
    blob = canonical_text(mapping).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:12]


# -- typed getters ----------------------------------------------------------


def get_str(mapping: dict, key: str, default: str) -> str:
    return mapping.get(key, default)


def get_int(mapping: dict, key: str, default: int) -> int:
    raw = mapping.get(key)
    if raw is None:
        return default
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: expected integer, got {raw!r}") from exc


def get_float(mapping: dict, key: str, default: float) -> float:
    raw = mapping.get(key)
    if raw is None:
        return default
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: expected number, got {raw!r}") from exc


def get_float_list(mapping: dict, key: str, default: list) -> list:
    raw = mapping.get(key)
    if raw is None:
        return list(default)
    try:
        return [float(tok) for tok in raw.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"key {key!r}: expected comma-separated numbers") from exc


def get_str_list(mapping: dict, key: str, default: list) -> list:
    raw = mapping.get(key)
    if raw is None:
        return list(default)
    return [tok.strip() for tok in raw.split(",") if tok.strip()]
