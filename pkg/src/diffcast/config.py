"""Key-value config files: `section.key = value` lines, `#` comments.

Values are parsed as int, float, bool, or a comma list thereof; anything
else stays a string. Sections in use: generator.*, model.*, train.*,
loss.*. The parsed mapping is echoed into checkpoints at train time.
"""

from __future__ import annotations

from pathlib import Path

from .errors import ConfigError


def _parse_value(text: str):
    text = text.strip()
    if "," in text:
        return [_parse_value(part) for part in text.split(",")]
    low = text.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    if low in ("none", "null"):
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def parse_kv_text(text: str) -> dict[str, object]:
    out: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out[key] = _parse_value(value)
    return out


def load_kv_file(path: str | Path) -> dict[str, object]:
    return parse_kv_text(Path(path).read_text(encoding="utf-8"))


def section(config: dict[str, object], name: str) -> dict[str, object]:
    """Keys under `name.`, with the prefix stripped."""
    prefix = name + "."
    return {k[len(prefix) :]: v for k, v in config.items() if k.startswith(prefix)}
