"""Small helpers shared by the experiment runners and the CLI."""
import math
import os
from typing import List, Sequence


def create_dirs(file_path: str):
    """Create all directories to a (non-existent) file."""
    directory = os.path.dirname(file_path)
    if directory and not os.path.exists(directory):
        os.makedirs(directory, exist_ok=True)


def format_float(value: float) -> str:
    """Shortest decimal text that reads back to the same float."""
    value = float(value)
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return repr(value)


def format_cell(value) -> str:
    """CSV text of one cell."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, str):
        return value
    return format_float(value)


def format_row(values: Sequence) -> List[str]:
    """CSV text of one row."""
    return [format_cell(value) for value in values]


def parse_float_list(text: str) -> List[float]:
    """Parse ``"-10, -8.5,-7"``; an empty string gives an empty list."""
    items = [item.strip() for item in text.split(",")]
    if items == [""]:
        return []
    values = []
    for item in items:
        try:
            value = float(item)
        except ValueError as exc:
            raise ValueError(f"not a number: {item!r}") from exc
        if not math.isfinite(value):
            raise ValueError(f"not a finite number: {item!r}")
        values.append(value)
    return values
