"""
Flat ``key=value`` text files.

Used for benchmark configs, SEM sidecars, identifiability triple specs and
discovery diagnostics. Blank lines and ``#`` comments are ignored; keys are
unique per file.
"""

from pathlib import Path
from typing import Dict, List, Mapping, Sequence, Tuple, Union

from utils.error_handler import DataFormatError, InvalidInputError

PathLike = Union[str, Path]


def parse_keyvalue_text(text: str, source: str = "<string>") -> Dict[str, str]:
    """Parse key=value lines into an ordered dict"""
    entries: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DataFormatError(f"{source} line {lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise DataFormatError(f"{source} line {lineno}: empty key")
        if key in entries:
            raise DataFormatError(f"{source} line {lineno}: duplicate key {key!r}")
        entries[key] = value
    return entries


def read_keyvalue_file(path: PathLike) -> Dict[str, str]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Config file not found: {path}")
    return parse_keyvalue_text(path.read_text(encoding="ascii"), source=str(path))


def format_keyvalue(entries: Mapping[str, object]) -> str:
    lines = []
    for key, value in entries.items():
        text = format_value(value)
        if "\n" in text or "=" in key:
            raise InvalidInputError(f"cannot serialize key {key!r} as a single line")
        lines.append(f"{key}={text}")
    return "\n".join(lines) + "\n"


def write_keyvalue_file(path: PathLike, entries: Mapping[str, object]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_keyvalue(entries), encoding="ascii")
    return path


def format_value(value: object) -> str:
    """Render scalars and sequences; floats keep full precision"""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(float(value))
    if isinstance(value, (list, tuple)):
        return ",".join(format_value(v) for v in value)
    return str(value)


# Typed accessors for parsed entries


def get_str(entries: Mapping[str, str], key: str, default: str) -> str:
    return entries.get(key, default)


def get_int(entries: Mapping[str, str], key: str, default: int) -> int:
    if key not in entries:
        return default
    try:
        return int(entries[key])
    except ValueError:
        raise InvalidInputError(f"{key}: expected an integer, got {entries[key]!r}") from None


def get_float(entries: Mapping[str, str], key: str, default: float) -> float:
    if key not in entries:
        return default
    try:
        return float(entries[key])
    except ValueError:
        raise InvalidInputError(f"{key}: expected a number, got {entries[key]!r}") from None


def get_list(entries: Mapping[str, str], key: str, default: Sequence[str]) -> List[str]:
    if key not in entries:
        return list(default)
    return [item.strip() for item in entries[key].split(",") if item.strip()]


def get_int_list(entries: Mapping[str, str], key: str, default: Sequence[int]) -> Tuple[int, ...]:
    try:
        return tuple(int(v) for v in get_list(entries, key, [str(d) for d in default]))
    except ValueError:
        raise InvalidInputError(f"{key}: expected comma-separated integers") from None


def get_float_list(entries: Mapping[str, str], key: str, default: Sequence[float]) -> Tuple[float, ...]:
    try:
        return tuple(float(v) for v in get_list(entries, key, [repr(float(d)) for d in default]))
    except ValueError:
        raise InvalidInputError(f"{key}: expected comma-separated numbers") from None
