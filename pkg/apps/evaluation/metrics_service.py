"""
MetricsRecord CSV files.

Columns: round,ba,tr,asr_natural,asr_forced,osi_far,osi_frr. Rates are
written with repr() and absent values as empty fields. Files are written to a
temporary sibling and renamed into place, so a reader never sees a partial file.
"""
import csv
import logging
import os
import tempfile
from pathlib import Path
from typing import Iterable, List, Optional

from .dtos import MetricsRecord

logger = logging.getLogger(__name__)


def _format(value) -> str:
    if value is None:
        return ''
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(text: str) -> Optional[float]:
    return None if text == '' else float(text)


def write_atomic(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, 'w', newline='') as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def metrics_to_csv(records: Iterable[MetricsRecord]) -> str:
    lines = [','.join(MetricsRecord.columns())]
    for record in records:
        lines.append(','.join(_format(getattr(record, column)) for column in MetricsRecord.columns()))
    return '\n'.join(lines) + '\n'


def write_metrics(records: Iterable[MetricsRecord], path) -> Path:
    records = list(records)
    path = write_atomic(path, metrics_to_csv(records))
    logger.info(f"Wrote {len(records)} metrics rows to {path}")
    return path


def read_metrics(path) -> List[MetricsRecord]:
    with open(path, newline='') as f:
        rows = list(csv.DictReader(f))
    return [
        MetricsRecord(
            round=int(row['round']),
            ba=float(row['ba']),
            tr=_parse(row['tr']),
            asr_natural=_parse(row['asr_natural']),
            asr_forced=_parse(row['asr_forced']),
            osi_far=float(row['osi_far']),
            osi_frr=float(row['osi_frr']),
        )
        for row in rows
    ]


def rounds_to_threshold(records: Iterable[MetricsRecord], threshold: float = 0.9) -> Optional[int]:
    """First round whose forced ASR reaches threshold, or None if it never does."""
    for record in records:
        if record.asr_forced is not None and record.asr_forced >= threshold:
            return record.round
    return None
