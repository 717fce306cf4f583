"""Tools"""

import hashlib
import json
from typing import Any, Iterable


def str_to_bool(value: str) -> bool:
    """Converts string to bool"""
    return str(value).lower() in ["true", "1", "yes"]


def format_float(value: float) -> str:
    """Full precision scientific notation, dot decimal."""
    return f"{value:.17e}"


def config_hash(config: Any) -> str:
    """Short, stable hash of a JSON-serializable config."""
    payload = json.dumps(config, sort_keys=True, default=str).encode("utf-8")
    return hashlib.sha256(payload).hexdigest()[:16]


def cell_name(tag: str, d_interior: int | None) -> str:
    """File stem for one (formulation, basis size) sweep cell."""
    return tag if d_interior is None else f"{tag}_d{d_interior}"


def parse_int_list(values: Iterable[Any]) -> list[int]:
    """Converts a YAML list (or comma separated string) to ints."""
    if isinstance(values, str):
        values = [v for v in values.split(",") if v.strip()]
    return [int(v) for v in values]
