"""Key-value text configs: ``key = value`` lines, ``#`` comments, dotted keys for sections."""
from __future__ import annotations

import dataclasses
import types
import typing
from pathlib import Path
from typing import Any, Mapping

from .errors import ConfigInvalid


def parse_kv(text: str, source: str = "<config>") -> dict[str, str]:
    out: dict[str, str] = {}
    for i, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigInvalid(f"{source}:{i}: expected 'key = value'")
        out[key.strip()] = value.strip()
    return out


def load_kv(path) -> dict[str, str]:
    return parse_kv(Path(path).read_text(encoding="utf-8"), str(path))


def section(kv: Mapping[str, str], prefix: str) -> dict[str, str]:
    """Entries directly under ``prefix.`` with the prefix stripped; deeper sections are left out."""
    p = prefix + "."
    return {k[len(p):]: v for k, v in kv.items() if k.startswith(p) and "." not in k[len(p):]}


def _coerce(value: str, tp: Any) -> Any:
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin is typing.Union or origin is types.UnionType:
        non_none = [a for a in args if a is not type(None)]
        if value.lower() in ("none", "") and len(non_none) < len(args):
            return None
        return _coerce(value, non_none[0])
    if origin is tuple:
        items = [v.strip() for v in value.split(",") if v.strip()]
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_coerce(v, args[0]) for v in items)
        if len(items) != len(args):
            raise ConfigInvalid(f"expected {len(args)} comma-separated values, got {value!r}")
        return tuple(_coerce(v, a) for v, a in zip(items, args))
    if tp is bool:
        if value.lower() in ("1", "true", "yes", "on"):
            return True
        if value.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigInvalid(f"not a boolean: {value!r}")
    if tp in (int, float, str):
        try:
            return tp(value)
        except ValueError:
            raise ConfigInvalid(f"cannot read {value!r} as {tp.__name__}") from None
    raise ConfigInvalid(f"unsupported config type {tp!r}")


def build(cls, kv: Mapping[str, str], base=None):
    """Instantiate dataclass ``cls`` from string values, starting from ``base`` or defaults."""
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(kv) - names
    if unknown:
        raise ConfigInvalid(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    values = {k: _coerce(v, hints[k]) for k, v in kv.items()}
    if base is not None:
        return dataclasses.replace(base, **values)
    return cls(**values)
