"""Minimal sectioned ``key = value`` plain-text config parser.

The format is shared by experiment configs and taskset files:

    # comment
    [section]
    key = value
    list_key = a, b, c

Section names may be dotted (``[taskset.facesim]``). Values are kept as raw
strings; ``SectionView`` provides typed accessors that raise
``ValidationError`` naming ``section.key`` on bad input.
"""

from __future__ import annotations

from .errors import ConfigParseError, ValidationError

Sections = dict[str, dict[str, str]]


def parse_sections_text(text: str, path: str = "<string>") -> Sections:
    sections: Sections = {}
    current: dict[str, str] | None = None
    current_name = ""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith(";"):
            continue
        if line.startswith("["):
            if not line.endswith("]") or len(line) < 3:
                raise ConfigParseError(path, lineno, f"malformed section header {line!r}")
            current_name = line[1:-1].strip()
            if not current_name:
                raise ConfigParseError(path, lineno, "empty section name")
            if current_name in sections:
                raise ConfigParseError(path, lineno, f"duplicate section [{current_name}]")
            current = {}
            sections[current_name] = current
            continue
        if "=" not in line:
            raise ConfigParseError(path, lineno, f"expected 'key = value', got {line!r}")
        if current is None:
            raise ConfigParseError(path, lineno, "key/value pair before any [section] header")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigParseError(path, lineno, "empty key")
        if key in current:
            raise ConfigParseError(path, lineno, f"duplicate key {key!r} in [{current_name}]")
        current[key] = value
    return sections


def parse_sections(path: str) -> Sections:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigParseError(str(path), 0, f"cannot read file: {exc}") from exc
    return parse_sections_text(text, path=str(path))


class SectionView:
    """Typed accessor over one parsed section, tracking consumed keys."""

    def __init__(self, name: str, data: dict[str, str]):
        self.name = name
        self._data = data
        self._seen: set[str] = set()

    def _qual(self, key: str) -> str:
        return f"{self.name}.{key}"

    def has(self, key: str) -> bool:
        return key in self._data

    def raw(self, key: str, default: str | None = None) -> str | None:
        self._seen.add(key)
        return self._data.get(key, default)

    def get_float(self, key: str, default: float | None = None) -> float:
        raw = self.raw(key)
        if raw is None:
            if default is None:
                raise ValidationError(self._qual(key), "required key is missing")
            return default
        try:
            return float(raw)
        except ValueError:
            raise ValidationError(self._qual(key), f"expected a number, got {raw!r}") from None

    def get_int(self, key: str, default: int | None = None) -> int:
        raw = self.raw(key)
        if raw is None:
            if default is None:
                raise ValidationError(self._qual(key), "required key is missing")
            return default
        try:
            return int(raw)
        except ValueError:
            raise ValidationError(self._qual(key), f"expected an integer, got {raw!r}") from None

    def get_bool(self, key: str, default: bool) -> bool:
        raw = self.raw(key)
        if raw is None:
            return default
        lowered = raw.lower()
        if lowered in ("true", "yes", "on", "1"):
            return True
        if lowered in ("false", "no", "off", "0"):
            return False
        raise ValidationError(self._qual(key), f"expected a boolean, got {raw!r}")

    def get_str(self, key: str, default: str | None = None) -> str:
        raw = self.raw(key)
        if raw is None:
            if default is None:
                raise ValidationError(self._qual(key), "required key is missing")
            return default
        return raw

    def get_float_list(self, key: str, default: list[float] | None = None) -> list[float]:
        raw = self.raw(key)
        if raw is None:
            if default is None:
                raise ValidationError(self._qual(key), "required key is missing")
            return list(default)
        items = [part.strip() for part in raw.split(",") if part.strip()]
        if not items:
            raise ValidationError(self._qual(key), "expected a comma-separated list of numbers")
        try:
            return [float(part) for part in items]
        except ValueError:
            raise ValidationError(self._qual(key), f"expected numbers, got {raw!r}") from None

    def get_str_list(self, key: str, default: list[str] | None = None) -> list[str]:
        raw = self.raw(key)
        if raw is None:
            if default is None:
                raise ValidationError(self._qual(key), "required key is missing")
            return list(default)
        return [part.strip() for part in raw.split(",") if part.strip()]

    def unknown_keys(self) -> list[str]:
        return sorted(set(self._data) - self._seen)
