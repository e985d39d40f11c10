"""Machine-readable result emission.

Every number leaves the process with 12 significant digits (``'.'`` decimal
separator) so identical runs produce byte-identical files.
"""

import contextlib
import csv
import json
import math
import sys
from pathlib import Path
from typing import Any, Iterable, Iterator, Optional, Sequence, TextIO, Union

import numpy as np


SIGNIFICANT_DIGITS = 12
OUTPUT_FORMATS = ("json", "csv")


def format_number(value: Any) -> str:
    """Render one cell; floats get 12 significant digits."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{value:.{SIGNIFICANT_DIGITS}g}"
    if value is None:
        return ""
    return str(value)


def to_jsonable(value: Any) -> Any:
    """Convert results to JSON types, rounding floats to 12 significant digits."""
    if hasattr(value, "to_dict"):
        return to_jsonable(value.to_dict())
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if not math.isfinite(value):
            return format_number(value)
        return float(format_number(value))
    return value


def dump_json(payload: Any, stream: TextIO) -> None:
    stream.write(json.dumps(to_jsonable(payload), indent=2))
    stream.write("\n")


def write_csv(header: Sequence[str], rows: Iterable[Sequence[Any]], stream: TextIO) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_number(cell) for cell in row])


@contextlib.contextmanager
def open_output(path: Optional[Union[str, Path]]) -> Iterator[TextIO]:
    """Yield stdout for ``None`` or ``-``, otherwise a UTF-8 file."""
    if path is None or str(path) == "-":
        yield sys.stdout
        return
    with open(path, "w", encoding="utf-8", newline="") as handle:
        yield handle
