"""DTOs for the speakers app."""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from apps.core.exceptions import InvalidInputError, ShapeError


@dataclass(frozen=True, eq=False)
class SpeakerDataset:
    """
    Embedding-like feature rows with speaker labels.

    Enrolled rows carry a label in [0, n_classes); imposter rows carry the
    sentinel label n_classes. row_ids keep each row's position in the dataset
    it was generated or read as, so splits can be checked for disjointness.
    """
    features: np.ndarray
    labels: np.ndarray
    enrolled: np.ndarray
    n_classes: int
    row_ids: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        enrolled = np.asarray(self.enrolled, dtype=bool)
        if features.ndim != 2:
            raise ShapeError(f"features must be a matrix, got shape {features.shape}")
        rows = features.shape[0]
        if labels.shape != (rows,) or enrolled.shape != (rows,):
            raise ShapeError(f"labels/enrolled must have {rows} entries")
        row_ids = np.arange(rows, dtype=np.int64) if self.row_ids is None else np.asarray(self.row_ids, dtype=np.int64)
        if row_ids.shape != (rows,):
            raise ShapeError(f"row_ids must have {rows} entries")
        if np.any(labels[enrolled] < 0) or np.any(labels[enrolled] >= self.n_classes):
            raise InvalidInputError("enrolled rows must carry a label below n_classes")
        if np.any(labels[~enrolled] != self.n_classes):
            raise InvalidInputError("imposter rows must carry the sentinel label")
        object.__setattr__(self, 'features', features)
        object.__setattr__(self, 'labels', labels)
        object.__setattr__(self, 'enrolled', enrolled)
        object.__setattr__(self, 'row_ids', row_ids)

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def imposter_label(self) -> int:
        return self.n_classes

    def subset(self, indices) -> 'SpeakerDataset':
        indices = np.asarray(indices, dtype=np.int64)
        return SpeakerDataset(
            features=self.features[indices],
            labels=self.labels[indices],
            enrolled=self.enrolled[indices],
            n_classes=self.n_classes,
            row_ids=self.row_ids[indices],
        )

    def enrolled_rows(self) -> 'SpeakerDataset':
        return self.subset(np.flatnonzero(self.enrolled))

    def as_imposters(self) -> 'SpeakerDataset':
        """Same rows with every speaker treated as not enrolled."""
        return SpeakerDataset(
            features=self.features,
            labels=np.full(len(self), self.n_classes, dtype=np.int64),
            enrolled=np.zeros(len(self), dtype=bool),
            n_classes=self.n_classes,
            row_ids=self.row_ids,
        )

    def equals(self, other: 'SpeakerDataset') -> bool:
        return (
            self.n_classes == other.n_classes
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.enrolled, other.enrolled)
        )
