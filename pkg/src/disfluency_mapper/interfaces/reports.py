"""Report writers: TSV tables, JSON summaries and decode traces.

Every writer produces the same bytes for the same input: fixed float
formatting, sorted JSON keys, LF line endings.
"""

import csv
import json
import logging
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Sequence, Union

import jsonlines

from ..core.analyze import (
    ERROR_CATEGORIES,
    EXCLUDED,
    CategorySummary,
    PMITable,
    ScatterRow,
)
from ..core.segment import AUDIT_COLUMNS, AuditEntry

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

SCATTER_COLUMNS = (
    "word",
    "category",
    "log_rel_freq_corpus",
    "log_rel_freq_missed",
    "log_rel_freq_hallucinated",
)
PMI_COLUMNS = ("type", "P_M", "PMI_m_star", "PMI_m", "PMI_h")
CATEGORY_COLUMNS = (
    "category",
    "corpus",
    "missed",
    "hallucinated",
    "share_missed",
    "share_hallucinated",
)


def format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return f"{value:.6f}"
    if isinstance(value, Enum):
        return str(value.value)
    return str(value)


def write_tsv(path: PathLike, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> int:
    """Write a header and rows as TSV; returns the number of rows."""
    count = 0
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, delimiter="\t", lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_cell(value) for value in row])
            count += 1
    logger.debug(f"Wrote {count} rows to {path}")
    return count


def _plain(value: Any) -> Any:
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, Mapping):
        return {str(_plain(k)): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, float):
        return round(value, 10)
    return value


def to_json_text(payload: Mapping[str, Any]) -> str:
    return json.dumps(_plain(payload), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_json(path: PathLike, payload: Mapping[str, Any]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(to_json_text(payload))


def write_traces(path: PathLike, traces: Iterable[Mapping[str, Any]]) -> int:
    count = 0
    with jsonlines.open(path, mode="w", compact=True, sort_keys=True) as writer:
        for trace in traces:
            writer.write(_plain(trace))
            count += 1
    return count


def write_audit(path: PathLike, entries: Iterable[AuditEntry]) -> int:
    return write_tsv(path, AUDIT_COLUMNS, (entry.as_row() for entry in entries))


def scatter_rows(rows: Iterable[ScatterRow]) -> List[Sequence[Any]]:
    return [
        (
            row.word,
            row.category,
            row.log_rel_freq_corpus,
            row.log_rel_freq_missed,
            row.log_rel_freq_hallucinated,
        )
        for row in rows
    ]


def pmi_rows(table: PMITable) -> List[Sequence[Any]]:
    return [
        (row.kind, row.p_marginal, *(row.pmi[category] for category in ERROR_CATEGORIES))
        for row in table.rows
    ]


def category_rows(rows: Iterable[CategorySummary]) -> List[Sequence[Any]]:
    return [
        (r.category, r.corpus, r.missed, r.hallucinated, r.share_missed, r.share_hallucinated)
        for r in rows
    ]


def pmi_summary(table: PMITable) -> Dict[str, Any]:
    """Counts behind a PMI table, for the JSON summary."""
    return {
        "base": table.base,
        "tokens": table.counts.total,
        "excluded_share": table.excluded_share,
        "marginal": dict(sorted(table.counts.marginal.items())),
        "conditional": {
            category.value: dict(sorted(table.counts.conditional[category].items()))
            for category in ERROR_CATEGORIES
        },
        "excluded_bucket": EXCLUDED,
    }
