"""Line-oriented `key = value` configuration files.

The format used by ensemble spec files, the optional CLI config file, and
run manifests: one `key = value` pair per line, `#` starts a comment, keys
may repeat (order preserved).
"""

from __future__ import annotations

from .errors import ConfigError

TRUE_WORDS = frozenset({"1", "true", "yes", "on"})
FALSE_WORDS = frozenset({"0", "false", "no", "off"})


def parse_kv(text: str) -> list[tuple[str, str]]:
    """All (key, value) pairs in file order."""
    pairs = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        pairs.append((key.strip(), value.strip()))
    return pairs


def kv_to_dict(pairs: list[tuple[str, str]]) -> dict[str, str]:
    """Last occurrence wins for repeated keys."""
    return dict(pairs)


def parse_bool(value: str) -> bool:
    lowered = value.lower()
    if lowered in TRUE_WORDS:
        return True
    if lowered in FALSE_WORDS:
        return False
    raise ConfigError(f"expected a boolean, got {value!r}")


def format_kv(pairs: list[tuple[str, str]]) -> str:
    return "".join(f"{key} = {value}\n" for key, value in pairs)
