"""
Dataset file I/O.

Grammar (one record per line, comma separated, no quoting):

    header := <d>,<n_classes>
    row    := <f_1>,...,<f_d>,<label>,<enrolled>

Features are written with repr() so a write/read cycle is bit-exact. label is
an integer below n_classes for enrolled rows (enrolled = 1) and exactly
n_classes for imposter rows (enrolled = 0).
"""
import csv
import logging
import math
from pathlib import Path

import numpy as np

from apps.core.exceptions import DatasetParseError
from .dtos import SpeakerDataset

logger = logging.getLogger(__name__)


def write_dataset(ds: SpeakerDataset, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow([ds.dim, ds.n_classes])
        for features, label, enrolled in zip(ds.features, ds.labels, ds.enrolled):
            writer.writerow([repr(float(v)) for v in features] + [int(label), int(enrolled)])
    logger.info(f"Wrote {len(ds)} rows to {path}")
    return path


def _parse_int(text: str, what: str, line_number: int) -> int:
    try:
        return int(text)
    except ValueError:
        raise DatasetParseError(f"{what} {text!r} is not an integer", line_number)


def read_dataset(path) -> SpeakerDataset:
    path = Path(path)
    with open(path, newline='') as f:
        lines = list(csv.reader(f))

    if not lines or not lines[0]:
        raise DatasetParseError("missing header '<d>,<n_classes>'", 1)
    if len(lines[0]) != 2:
        raise DatasetParseError(f"header has {len(lines[0])} fields, expected 2", 1)
    dim = _parse_int(lines[0][0], "dimension", 1)
    n_classes = _parse_int(lines[0][1], "class count", 1)
    if dim < 1 or n_classes < 1:
        raise DatasetParseError("dimension and class count must be >= 1", 1)

    features = np.zeros((len(lines) - 1, dim), dtype=np.float64)
    labels = np.zeros(len(lines) - 1, dtype=np.int64)
    enrolled = np.zeros(len(lines) - 1, dtype=bool)
    for i, fields in enumerate(lines[1:]):
        line_number = i + 2
        if len(fields) != dim + 2:
            raise DatasetParseError(f"expected {dim + 2} columns, found {len(fields)}", line_number)
        try:
            row = [float(v) for v in fields[:dim]]
        except ValueError:
            raise DatasetParseError("feature is not a decimal number", line_number)
        if not all(math.isfinite(v) for v in row):
            raise DatasetParseError("feature is not finite", line_number)
        features[i] = row
        label = _parse_int(fields[dim], "label", line_number)
        flag = fields[dim + 1]
        if flag not in ('0', '1'):
            raise DatasetParseError(f"enrolled flag {flag!r} must be 0 or 1", line_number)
        is_enrolled = flag == '1'
        if is_enrolled and not 0 <= label < n_classes:
            raise DatasetParseError(f"unknown label {label} for {n_classes} enrolled classes", line_number)
        if not is_enrolled and label != n_classes:
            raise DatasetParseError(f"imposter row must carry label {n_classes}, found {label}", line_number)
        labels[i] = label
        enrolled[i] = is_enrolled

    logger.info(f"Read {len(labels)} rows from {path}")
    return SpeakerDataset(features=features, labels=labels, enrolled=enrolled, n_classes=n_classes)
