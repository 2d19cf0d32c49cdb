"""Flat key-value configuration files.

Format: one ``key = value`` pair per line, ``#`` starts a comment, blank
lines ignored. Values are kept as strings; consumers coerce. Lists are
comma-separated; lists of vectors additionally use ``;`` between vectors.
"""

from __future__ import annotations

from pathlib import Path

from .errors import UsageError


def read_kv(path) -> dict[str, str]:
    """Parse a flat key-value file into an ordered dict of strings."""
    out: dict[str, str] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def parse_strings(value: str) -> list[str]:
    return [part.strip() for part in value.split(",") if part.strip()]


def parse_floats(value: str) -> list[float]:
    return [float(part) for part in parse_strings(value)]


def parse_ints(value: str) -> list[int]:
    return [int(part) for part in parse_strings(value)]


def parse_vectors(value: str) -> list[list[float]]:
    """Parse ``;``-separated groups of comma-separated floats."""
    return [parse_floats(group) for group in value.split(";") if group.strip()]


def require(cfg: dict[str, str], key: str, context: str) -> str:
    if key not in cfg:
        raise UsageError(f"{context} config is missing required key {key!r}")
    return cfg[key]
