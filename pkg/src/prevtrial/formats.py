"""Rendering and file output shared by the CLI and service.

Numbers are formatted to 6 significant digits so that repeated runs are
byte-identical. Writes go through a temp file and os.replace so a crashed
run never leaves a truncated output behind.
"""

from __future__ import annotations

import json
import os
import tempfile
from typing import Any, Mapping, Sequence

from .errors import ValidationError

FORMATS = ("csv", "json", "markdown")


def sig6(value: Any) -> str:
    """6-significant-digit text for floats; ints and strings pass through."""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if value != value:
            return "nan"
        return f"{value:.6g}"
    return str(value)


def _config_lines(config: Mapping[str, Any]) -> list[str]:
    return [f"{key} = {sig6(config[key])}" for key in config]


def render_table(
    columns: Sequence[str],
    rows: Sequence[Sequence[Any]],
    fmt: str,
    config: Mapping[str, Any],
) -> str:
    """Render a rectangular result. The effective configuration rides along:
    comment lines for csv, an HTML comment for markdown, a "config" key for
    json."""
    if fmt not in FORMATS:
        raise ValidationError(f"unknown format {fmt!r}", field="format")
    if fmt == "csv":
        lines = [f"# {line}" for line in _config_lines(config)]
        lines.append(",".join(columns))
        for row in rows:
            lines.append(",".join(sig6(v) for v in row))
        return "\n".join(lines) + "\n"
    if fmt == "markdown":
        lines = []
        if config:
            lines.append("<!--")
            lines.extend(_config_lines(config))
            lines.append("-->")
        lines.append("| " + " | ".join(columns) + " |")
        lines.append("|" + "|".join(" --- " for _ in columns) + "|")
        for row in rows:
            lines.append("| " + " | ".join(sig6(v) for v in row) + " |")
        return "\n".join(lines) + "\n"
    payload = {
        "config": {k: v for k, v in config.items()},
        "rows": [dict(zip(columns, _jsonable_row(row))) for row in rows],
    }
    return json.dumps(payload, indent=2, sort_keys=False) + "\n"


def _jsonable_row(row: Sequence[Any]) -> list[Any]:
    out = []
    for v in row:
        if isinstance(v, float):
            out.append(float(f"{v:.6g}") if v == v else None)
        else:
            out.append(v)
    return out


def render_mapping(payload: Mapping[str, Any], fmt: str, config: Mapping[str, Any]) -> str:
    """Render a single-record result (nested mappings allowed)."""
    if fmt not in FORMATS:
        raise ValidationError(f"unknown format {fmt!r}", field="format")
    flat = _flatten(payload)
    if fmt == "csv":
        lines = [f"# {line}" for line in _config_lines(config)]
        lines.append("key,value")
        lines.extend(f"{key},{sig6(value)}" for key, value in flat)
        return "\n".join(lines) + "\n"
    if fmt == "markdown":
        lines = []
        if config:
            lines.append("<!--")
            lines.extend(_config_lines(config))
            lines.append("-->")
        lines.append("| key | value |")
        lines.append("| --- | --- |")
        lines.extend(f"| {key} | {sig6(value)} |" for key, value in flat)
        return "\n".join(lines) + "\n"
    body = {"config": {k: v for k, v in config.items()}, "result": _round_floats(payload)}
    return json.dumps(body, indent=2, sort_keys=False) + "\n"


def _flatten(payload: Mapping[str, Any], prefix: str = "") -> list[tuple[str, Any]]:
    items: list[tuple[str, Any]] = []
    for key, value in payload.items():
        name = f"{prefix}{key}"
        if isinstance(value, Mapping):
            items.extend(_flatten(value, prefix=f"{name}."))
        elif isinstance(value, (list, tuple)):
            for i, element in enumerate(value):
                if isinstance(element, Mapping):
                    items.extend(_flatten(element, prefix=f"{name}[{i}]."))
                else:
                    items.append((f"{name}[{i}]", element))
        else:
            items.append((name, value))
    return items


def _round_floats(value: Any) -> Any:
    if isinstance(value, float):
        return float(f"{value:.6g}") if value == value else None
    if isinstance(value, Mapping):
        return {k: _round_floats(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_round_floats(v) for v in value]
    return value


def atomic_write(path: str, text: str) -> None:
    """Write text to path via a same-directory temp file and os.replace."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".out")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise
