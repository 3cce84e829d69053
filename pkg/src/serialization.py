import csv
import io
import json
import math
from typing import Any, Dict, Iterable, List, Sequence, Tuple

from pydantic import BaseModel

from .errors import DomainError
from .models import ExperimentReport


def parse_vector(text: str, name: str = "vector") -> Tuple[float, ...]:
    """
    Parse a comma-separated list of numbers such as "0.6,0.9".

    Args:
        text: Comma-separated numbers; "inf" and "-inf" are accepted
        name: Flag name used in error messages

    Returns:
        Tuple[float, ...]: The parsed components
    """
    parts = [part.strip() for part in text.split(",")]
    if not parts or any(part == "" for part in parts):
        raise DomainError(f"{name} must be a comma-separated list of numbers, got {text!r}")
    try:
        values = tuple(float(part) for part in parts)
    except ValueError:
        raise DomainError(f"{name} must be a comma-separated list of numbers, got {text!r}")
    if any(math.isnan(v) for v in values):
        raise DomainError(f"{name} must not contain NaN")
    return values


def format_number(value: Any) -> str:
    """CSV cell text: repr for floats (round-trips exactly), 'inf' for infinities, '' for None."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    return str(value)


def to_json(model: BaseModel) -> str:
    """Pretty JSON for a result model; infinities become the string "inf"."""
    return model.model_dump_json(indent=2, by_alias=True)


def dumps(document: Dict[str, Any]) -> str:
    """JSON for plain documents, with the same "inf" convention as the models."""
    return json.dumps(_encode(document), indent=2)


def _encode(value: Any) -> Any:
    if isinstance(value, BaseModel):
        return value.model_dump(mode="json", by_alias=True)
    if isinstance(value, float) and math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if isinstance(value, dict):
        return {k: _encode(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_encode(v) for v in value]
    if hasattr(value, "tolist"):
        return _encode(value.tolist())
    return value


def write_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    """Header line plus one record per row, '\\n' line endings."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_number(v) for v in row])
    return buffer.getvalue()


REPORT_COLUMNS: List[str] = [
    "t",
    "n",
    "hits",
    "probability",
    "ci_low",
    "ci_high",
    "speed",
    "log_rate",
    "log_rate_low",
    "log_rate_high",
    "gap",
    "censored",
    "target",
]


def report_rows(report: ExperimentReport) -> List[List[Any]]:
    return [[getattr(row, column) for column in REPORT_COLUMNS[:-1]] + [report.target] for row in report.rows]


def report_csv(report: ExperimentReport) -> str:
    """One record per t of the grid; the analytic target is repeated on every line."""
    return write_csv(REPORT_COLUMNS, report_rows(report))
