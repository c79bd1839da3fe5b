"""Flat ``dotted.key = value`` scenario files.

One assignment per line; ``#`` starts a comment. Values are integers, floats,
booleans (``true``/``false``), bare or double-quoted strings, comma lists, or
inclusive integer ranges written ``lo..hi``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any

_KEY = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*(\.[A-Za-z_][A-Za-z0-9_]*)*$")
_RANGE = re.compile(r"^(-?\d+)\.\.(-?\d+)$")


class ConfigError(ValueError):
    """Parse or validation failure, carrying the offending line and key when known."""

    def __init__(self, message: str, line: int | None = None, key: str | None = None, source: str = "<config>"):
        self.line, self.key, self.source = line, key, source
        where = source + (f":{line}" if line is not None else "")
        what = f" [{key}]" if key else ""
        super().__init__(f"{where}{what}: {message}")


@dataclass(frozen=True)
class Entry:
    value: Any
    line: int


def parse_scalar(text: str) -> Any:
    t = text.strip()
    if len(t) >= 2 and t[0] == t[-1] == '"':
        return t[1:-1]
    low = t.lower()
    if low in ("true", "false"):
        return low == "true"
    for conv in (int, float):
        try:
            return conv(t)
        except ValueError:
            pass
    return t


def parse_value(text: str) -> Any:
    t = text.strip()
    m = _RANGE.match(t)
    if m:
        lo, hi = int(m.group(1)), int(m.group(2))
        if hi < lo:
            raise ValueError(f"empty range {t}")
        return list(range(lo, hi + 1))
    if "," in t and not (t.startswith('"') and t.endswith('"')):
        return [parse_scalar(p) for p in t.split(",") if p.strip()]
    return parse_scalar(t)


def parse_config(text: str, source: str = "<config>") -> dict[str, Entry]:
    out: dict[str, Entry] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = _strip_comment(raw)
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", lineno, source=source)
        key, _, value = (p.strip() for p in line.partition("="))
        if not _KEY.match(key):
            raise ConfigError(f"malformed key {key!r}", lineno, source=source)
        if key in out:
            raise ConfigError(f"duplicate key (first set on line {out[key].line})", lineno, key, source)
        if not value:
            raise ConfigError("missing value", lineno, key, source)
        try:
            out[key] = Entry(parse_value(value), lineno)
        except ValueError as exc:
            raise ConfigError(str(exc), lineno, key, source) from None
    return out


def _strip_comment(raw: str) -> str:
    quoted = False
    for i, ch in enumerate(raw):
        if ch == '"':
            quoted = not quoted
        elif ch == "#" and not quoted:
            return raw[:i].strip()
    return raw.strip()


def load_config(path: str | Path) -> dict[str, Entry]:
    path = Path(path)
    return parse_config(path.read_text(), str(path))
