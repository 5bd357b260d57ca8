"""Labeled embedding batches and their class partitions.

A batch is the ground set V: n embeddings in R^d with integer class labels.
Labels must cover 0..C-1 with every class nonempty, so a label array always
induces a valid partition of V. The CSV layout is one row per embedding with
header ``id,label,f0,...,f{d-1}``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyGroundSet, ParseError, ValidationError


@dataclass
class EmbeddingBatch:
    """Ground set of labeled embeddings.

    vectors : (n, d) float64
    labels  : (n,) int64, values covering 0..C-1 with no empty class
    ids     : n opaque sample identifiers (row order)
    """

    vectors: np.ndarray
    labels: np.ndarray
    ids: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.vectors.ndim != 2:
            raise ValidationError(f"vectors must be 2-D, got shape {self.vectors.shape}")
        n, d = self.vectors.shape
        if n == 0:
            raise EmptyGroundSet()
        if d == 0:
            raise ValidationError("embedding dimension must be >= 1")
        if self.labels.shape != (n,):
            raise ValidationError(
                f"labels shape {self.labels.shape} does not match {n} embeddings"
            )
        if not np.all(np.isfinite(self.vectors)):
            raise ValidationError("vectors contain non-finite values")
        if self.labels.min() < 0:
            raise ValidationError("labels must be nonnegative")
        c = int(self.labels.max()) + 1
        present = np.bincount(self.labels, minlength=c)
        gaps = np.flatnonzero(present == 0)
        if gaps.size:
            raise ValidationError(
                f"labels must cover 0..{c - 1} contiguously; class {gaps[0]} is empty"
            )
        if not self.ids:
            self.ids = [str(i) for i in range(n)]
        elif len(self.ids) != n:
            raise ValidationError(f"{len(self.ids)} ids for {n} embeddings")

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) + 1

    def partition(self) -> ClassPartition:
        return partition_from_labels(self.labels)


@dataclass
class ClassPartition:
    """Disjoint nonempty index sets A_1..A_C whose union is range(n)."""

    sets: tuple[np.ndarray, ...]

    def __post_init__(self):
        self.sets = tuple(np.asarray(a, dtype=np.int64) for a in self.sets)
        if not self.sets:
            raise ValidationError("partition needs at least one class")
        seen = np.concatenate(self.sets) if self.sets else np.empty(0, np.int64)
        n = seen.size
        for k, a in enumerate(self.sets):
            if a.size == 0:
                raise ValidationError(f"class {k} is empty")
        if np.unique(seen).size != n or seen.min() != 0 or seen.max() != n - 1:
            raise ValidationError("class sets must partition range(n) disjointly")

    @property
    def num_classes(self) -> int:
        return len(self.sets)

    def __iter__(self):
        return iter(self.sets)


def partition_from_labels(labels: np.ndarray) -> ClassPartition:
    labels = np.asarray(labels, dtype=np.int64)
    c = int(labels.max()) + 1
    return ClassPartition(tuple(np.flatnonzero(labels == k) for k in range(c)))


def read_embedding_file(path) -> EmbeddingBatch:
    """Parse an ``id,label,f0,...`` CSV into a batch.

    Raises ParseError with the 1-based line number of the first bad record.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(path, 1, "empty file") from None
        header = [h.strip() for h in header]
        if len(header) < 3 or header[0] != "id" or header[1] != "label":
            raise ParseError(path, 1, "header must be id,label,f0,...")
        want = ["f%d" % i for i in range(len(header) - 2)]
        if header[2:] != want:
            raise ParseError(path, 1, "feature columns must be f0..f%d" % (len(header) - 3))
        d = len(header) - 2
        ids, labels, rows = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d + 2:
                raise ParseError(path, lineno, f"expected {d + 2} fields, got {len(row)}")
            ids.append(row[0])
            try:
                label = int(row[1])
            except ValueError:
                raise ParseError(path, lineno, f"label {row[1]!r} is not an integer") from None
            if label < 0:
                raise ParseError(path, lineno, f"label {label} is negative")
            labels.append(label)
            try:
                rows.append([float(x) for x in row[2:]])
            except ValueError:
                raise ParseError(path, lineno, "non-numeric feature value") from None
    if not rows:
        raise ParseError(path, 2, "no data rows")
    try:
        return EmbeddingBatch(np.array(rows), np.array(labels), ids)
    except ValidationError as exc:
        raise ParseError(path, 2, str(exc)) from exc


def write_embedding_file(path, batch: EmbeddingBatch) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "label"] + ["f%d" % i for i in range(batch.dim)])
        for i in range(batch.n):
            writer.writerow(
                [batch.ids[i], int(batch.labels[i])]
                + [repr(float(x)) for x in batch.vectors[i]]
            )
