"""Synthetic cluster datasets and the loss-versus-separation sweep.

Two generators. The K-sweep builds four 2-D Gaussian clusters whose
centroids sit at (+-1, +-1) scaled by a fixed schedule of K in 0..7:

    scale(K) = 1 - K/5          K <= 4   (separation shrinks to 0.4)
    scale(K) = -(K - 4)/3       K >= 5   (reflected, separation regrows)

so pairwise centroid distance decreases strictly along K = 0..4 and
increases strictly along 4..7. The cluster noise is drawn once per seed,
independent of K: sweeping K moves only the centroids, so loss differences
across K reflect geometry, not resampling.

The imbalance generator places C Gaussian clusters on scaled coordinate
axes (pairwise-equidistant, so no class is geometrically privileged) and
assigns per-class counts by either schedule:

    longtail  count_k = round(base * decay^(k / (C-1)))
    step      first ceil(C/2) classes get base, the rest base/ratio

Rounding is banker's, matching the worked longtail example
(600, 278, 129, 60) for base 600, decay 1/10, C = 4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels, losses, objectives
from .batch import EmbeddingBatch
from .errors import BadK, EmptyClass, ParseError, ValidationError
from .sampling import Rng

K_RANGE = range(8)


@dataclass
class ClusterSpec:
    """Fully resolved recipe for one Gaussian mixture draw."""

    C: int
    d: int
    centroids: np.ndarray
    spread: float
    counts: tuple[int, ...]
    seed: int

    def __post_init__(self):
        self.centroids = np.asarray(self.centroids, dtype=np.float64)
        if self.centroids.shape != (self.C, self.d):
            raise ValidationError(
                f"centroids shape {self.centroids.shape} != ({self.C}, {self.d})"
            )
        if len(self.counts) != self.C:
            raise ValidationError(f"{len(self.counts)} counts for {self.C} classes")
        if any(c < 1 for c in self.counts):
            raise ValidationError("every class needs at least one sample")
        if not self.spread > 0:
            raise ValidationError(f"spread must be positive, got {self.spread}")


def sample_clusters(spec: ClusterSpec) -> EmbeddingBatch:
    """Draw the mixture: class k is centroid_k + spread * N(0, I)."""
    rng = Rng(spec.seed)
    noise = rng.normals((sum(spec.counts), spec.d))
    vectors = np.repeat(spec.centroids, spec.counts, axis=0) + spec.spread * noise
    labels = np.repeat(np.arange(spec.C), spec.counts)
    return EmbeddingBatch(vectors, labels)


def k_scale(k: int) -> float:
    if not isinstance(k, (int, np.integer)) or k not in K_RANGE:
        raise BadK(k)
    if k <= 4:
        return 1.0 - k / 5.0
    return -(k - 4) / 3.0


_CORNERS = np.array([[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]])


def make_k_dataset(k: int, points_per_cluster: int = 100,
                   spread: float = 0.3, seed: int = 0) -> EmbeddingBatch:
    """Four 2-D clusters at the corner schedule for this K."""
    spec = ClusterSpec(
        C=4, d=2,
        centroids=_CORNERS * k_scale(k),
        spread=spread,
        counts=(points_per_cluster,) * 4,
        seed=seed,
    )
    return sample_clusters(spec)


def _longtail_counts(c: int, base: int, decay: float) -> tuple[int, ...]:
    if not 0 < decay <= 1:
        raise ValidationError(f"decay must lie in (0, 1], got {decay}")
    counts = tuple(int(round(base * decay ** (k / (c - 1)))) for k in range(c)) \
        if c > 1 else (base,)
    return counts


def _step_counts(c: int, base: int, ratio: float) -> tuple[int, ...]:
    if ratio < 1:
        raise ValidationError(f"step ratio must be >= 1, got {ratio}")
    head = (c + 1) // 2
    low = int(round(base / ratio))
    return (base,) * head + (low,) * (c - head)


def make_imbalanced_dataset(kind: str, c: int, d: int, base_count: int,
                            decay_or_ratio: float, spread: float, seed: int,
                            separation: float | None = None) -> EmbeddingBatch:
    """Gaussian classes with longtail or step counts.

    Centroids sit at separation/sqrt(2) along distinct coordinate axes, so
    every centroid pair is exactly `separation` apart (needs C <= d).
    Separation defaults to four spreads.
    """
    if base_count < c:
        raise ValidationError(f"base_count {base_count} < {c} classes")
    if c > d:
        raise ValidationError(
            f"axis-aligned centroids need C <= d, got C={c}, d={d}"
        )
    if kind == "longtail":
        counts = _longtail_counts(c, base_count, decay_or_ratio)
    elif kind == "step":
        counts = _step_counts(c, base_count, decay_or_ratio)
    else:
        raise ValidationError(f"kind must be 'longtail' or 'step', got {kind!r}")
    for label, count in enumerate(counts):
        if count < 1:
            raise EmptyClass(label, count)

    if separation is None:
        separation = 4.0 * spread
    centroids = np.zeros((c, d))
    centroids[np.arange(c), np.arange(c)] = separation / math.sqrt(2.0)
    spec = ClusterSpec(c, d, centroids, spread, counts, seed)
    return sample_clusters(spec)


@dataclass
class SweepResult:
    """Loss values over the (K, objective, kernel) grid, in grid order."""

    rows: list

    def write_csv(self, fh) -> None:
        fh.write(SWEEP_HEADER + "\n")
        for k, name, kind, value in self.rows:
            fh.write(f"{k},{name},{kind},{value!r}\n")

    def value(self, k: int, name: str, kind: str) -> float:
        for row in self.rows:
            if row[:3] == (k, name, kind):
                return row[3]
        raise KeyError((k, name, kind))


SWEEP_HEADER = "k,objective,kernel,loss"


def read_sweep_csv(path) -> SweepResult:
    rows = []
    with open(path, newline="") as fh:
        header = fh.readline().strip()
        if header != SWEEP_HEADER:
            raise ParseError(path, 1, f"expected header {SWEEP_HEADER!r}")
        for lineno, line in enumerate(fh, start=2):
            parts = line.strip().split(",")
            if len(parts) != 4:
                raise ParseError(path, lineno, f"expected 4 fields, got {len(parts)}")
            try:
                rows.append((int(parts[0]), parts[1], parts[2], float(parts[3])))
            except ValueError as exc:
                raise ParseError(path, lineno, str(exc)) from None
    return SweepResult(rows)


def k_sweep(names, kinds, ks, points_per_cluster: int = 100,
            spread: float = 0.3, seed: int = 0, lam: float = 1.0,
            margin: float = 0.2, bandwidth: float = 1.0) -> SweepResult:
    """Evaluate each objective/kernel on each K's dataset.

    Rows come out sorted by (K, objective order, kernel order) regardless
    of argument order, so repeated sweeps serialize identically.
    """
    names = sorted(set(names), key=objectives.OBJECTIVES.index)
    kinds = sorted(set(kinds), key=kernels.SIMILARITY_KINDS.index)
    rows = []
    for k in sorted(set(int(k) for k in ks)):
        batch = make_k_dataset(k, points_per_cluster, spread, seed)
        for name in names:
            for kind in kinds:
                cfg = losses.LossConfig(name, lam, margin, kind, bandwidth)
                rows.append((k, name, kind, losses.total_loss(batch, cfg).total))
    return SweepResult(rows)
