"""Key-value run configuration files.

Format: one ``key = value`` pair per line, ``#`` comments, blank lines
ignored.  Values are quoted strings (for expressions), numbers, or bare
words (regime tags, suite names).
"""

from __future__ import annotations

__all__ = ["ConfigError", "parse_config_text", "load_config"]


class ConfigError(ValueError):
    pass


def parse_config_text(text):
    """Parse config text into a dict of str -> (float | str)."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if len(value) >= 2 and value[0] == value[-1] and value[0] in "'\"":
            out[key] = value[1:-1]
            continue
        try:
            out[key] = float(value)
        except ValueError:
            out[key] = value
    return out


def load_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())
