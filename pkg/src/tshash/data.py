"""Datasets, pairwise supervision, and RBF kernel preprocessing."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

__all__ = [
    "Dataset",
    "PairSupervision",
    "KernelConfig",
    "DataFormatError",
    "load_dataset",
    "generate_clusters",
    "supervision_from_labels",
    "supervision_from_distance",
    "save_supervision",
    "load_supervision",
    "rbf_bandwidth",
    "sample_anchors",
    "kernel_features",
    "kernel_matrix",
]


class DataFormatError(ValueError):
    """Malformed dataset, supervision, or kernel configuration input."""


@dataclass
class Dataset:
    """Feature matrix (n x d, float64) with optional integer class labels."""

    features: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        if self.features.ndim != 2 or self.features.shape[0] < 1 or self.features.shape[1] < 1:
            raise DataFormatError("features must be a non-empty 2-D matrix")
        if not np.isfinite(self.features).all():
            raise DataFormatError("features contain non-finite values")
        if self.labels is not None:
            self.labels = np.ascontiguousarray(self.labels, dtype=np.int64)
            if self.labels.shape != (self.features.shape[0],):
                raise DataFormatError(
                    f"labels length {self.labels.shape} does not match n={self.n}"
                )
            self.labels.flags.writeable = False
        self.features.flags.writeable = False

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def has_labels(self) -> bool:
        return self.labels is not None


def load_dataset(path, has_labels: bool = False) -> Dataset:
    """Parse a headerless CSV of reals (optional trailing integer label column).

    Blank lines are ignored; any malformed cell is reported with its 1-based
    file row number.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.readlines()

    rows: list[list[float]] = []
    labels: list[int] = []
    width = None
    for lineno, line in enumerate(lines, start=1):
        text = line.strip()
        if not text:
            continue
        cells = [c.strip() for c in text.split(",")]
        if width is None:
            width = len(cells)
            if has_labels and width < 2:
                raise DataFormatError(f"row {lineno}: need at least one feature and a label")
        elif len(cells) != width:
            raise DataFormatError(f"ragged row {lineno}: expected {width} cells, got {len(cells)}")
        if has_labels:
            label_cell = cells[-1]
            cells = cells[:-1]
            try:
                labels.append(int(label_cell))
            except ValueError:
                raise DataFormatError(f"non-integer label {label_cell!r} in row {lineno}") from None
        values = []
        for cell in cells:
            try:
                v = float(cell)
            except ValueError:
                raise DataFormatError(f"non-numeric cell {cell!r} in row {lineno}") from None
            if not math.isfinite(v):
                raise DataFormatError(f"non-finite value {cell!r} in row {lineno}")
            values.append(v)
        rows.append(values)

    if not rows:
        raise DataFormatError(f"empty file: {path}")
    return Dataset(np.array(rows, dtype=np.float64), np.array(labels) if has_labels else None)


def generate_clusters(n: int, clusters: int, d: int, spread: float, seed: int) -> Dataset:
    """Labeled Gaussian blobs around fixed well-separated centers.

    Centers are placed deterministically (evenly on the unit circle in the
    first two dimensions, or at integer positions when d == 1); only the
    per-point noise consumes the seed.
    """
    if clusters < 2:
        raise ValueError("clusters must be >= 2")
    if n < clusters:
        raise ValueError("n must be >= clusters")
    if d < 1:
        raise ValueError("d must be >= 1")
    if spread < 0:
        raise ValueError("spread must be >= 0")

    centers = np.zeros((clusters, d))
    if d == 1:
        centers[:, 0] = np.arange(clusters, dtype=np.float64)
    else:
        angles = 2.0 * np.pi * np.arange(clusters) / clusters
        centers[:, 0] = np.cos(angles)
        centers[:, 1] = np.sin(angles)

    counts = np.full(clusters, n // clusters)
    counts[: n % clusters] += 1
    rng = np.random.default_rng(seed)
    feats = np.empty((n, d))
    labels = np.empty(n, dtype=np.int64)
    row = 0
    for c in range(clusters):
        feats[row : row + counts[c]] = centers[c] + spread * rng.standard_normal((counts[c], d))
        labels[row : row + counts[c]] = c
        row += counts[c]
    return Dataset(feats, labels)


@dataclass
class PairSupervision:
    """Sparse symmetric affinity relation on point pairs.

    Each stored entry (i, j, y) has i < j and stands for both orders;
    pairs that are absent carry no relation at all.
    """

    n: int
    i: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    j: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    y: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.float64))

    def __post_init__(self):
        self.i = np.ascontiguousarray(self.i, dtype=np.int64)
        self.j = np.ascontiguousarray(self.j, dtype=np.int64)
        self.y = np.ascontiguousarray(self.y, dtype=np.float64)
        if not (self.i.shape == self.j.shape == self.y.shape):
            raise DataFormatError("supervision arrays must have equal length")
        if self.i.size:
            if self.i.min() < 0 or self.j.max() >= self.n:
                raise DataFormatError("pair index out of range")
            if np.any(self.i >= self.j):
                raise DataFormatError("pairs must be stored with i < j")
            keys = self.i * self.n + self.j
            if np.unique(keys).size != keys.size:
                raise DataFormatError("duplicate pair")
        for arr in (self.i, self.j, self.y):
            arr.flags.writeable = False
        self._index = {(int(a), int(b)): float(v) for a, b, v in zip(self.i, self.j, self.y)}

    @classmethod
    def from_entries(cls, n: int, entries) -> "PairSupervision":
        """Build from (i, j, y) triples; orders each pair canonically and sorts."""
        canon = {}
        for a, b, v in entries:
            if a == b:
                raise DataFormatError(f"self-pair ({a},{a}) is not allowed")
            key = (a, b) if a < b else (b, a)
            if key in canon and canon[key] != v:
                raise DataFormatError(f"conflicting values for pair {key}")
            canon[key] = v
        items = sorted(canon.items())
        ii = np.array([k[0] for k, _ in items], dtype=np.int64)
        jj = np.array([k[1] for k, _ in items], dtype=np.int64)
        yy = np.array([v for _, v in items], dtype=np.float64)
        return cls(n, ii, jj, yy)

    def __len__(self) -> int:
        return self.i.size

    def lookup(self, a: int, b: int) -> float | None:
        """Affinity of the (a, b) pair in either order, or None if undefined."""
        key = (a, b) if a < b else (b, a)
        return self._index.get(key)

    def arrays(self):
        return self.i, self.j, self.y


def _sample_partners(n: int, pairs_per_point: int, seed: int) -> set[tuple[int, int]]:
    """Per-point partner sampling without replacement; unordered pairs, deduped."""
    if n == 1:
        return set()
    if pairs_per_point < 1:
        raise ValueError("pairs_per_point must be >= 1")
    if pairs_per_point > n - 1:
        raise ValueError(f"pairs_per_point {pairs_per_point} exceeds n-1 = {n - 1}")
    pairs: set[tuple[int, int]] = set()
    if pairs_per_point == n - 1:
        for a in range(n):
            for b in range(a + 1, n):
                pairs.add((a, b))
        return pairs
    rng = np.random.default_rng(seed)
    for a in range(n):
        others = rng.choice(n - 1, size=pairs_per_point, replace=False)
        others = others + (others >= a)
        for b in others:
            pairs.add((a, int(b)) if a < b else (int(b), a))
    return pairs


def supervision_from_labels(ds: Dataset, pairs_per_point: int, seed: int) -> PairSupervision:
    """Affinity +1 for same-class pairs, -1 otherwise, on sampled partners."""
    if not ds.has_labels:
        raise ValueError("dataset has no labels")
    pairs = _sample_partners(ds.n, pairs_per_point, seed)
    labels = ds.labels
    entries = [(a, b, 1.0 if labels[a] == labels[b] else -1.0) for a, b in pairs]
    return PairSupervision.from_entries(ds.n, entries)


def _quantile_index(percentile: float, count: int) -> int:
    """Index of the cutoff value in an ascending list of `count` distances."""
    k = math.ceil(percentile * count / 100.0)
    return min(max(k, 1), count) - 1


def supervision_from_distance(
    ds: Dataset, percentile: float, pairs_per_point: int, seed: int
) -> PairSupervision:
    """Euclidean pseudo-labels: +1 when a pair falls inside either endpoint's
    top-percentile distance quantile, -1 otherwise.

    The per-point cutoff is the value at index ceil(percentile/100 * (n-1)) - 1
    of that point's ascending distance list; ties at the cutoff count as +1.
    Labelling through the larger of the two cutoffs keeps the relation
    symmetric regardless of which endpoint sampled the pair.
    """
    if not 0.0 < percentile < 100.0:
        raise ValueError("percentile must lie in (0, 100)")
    if ds.n < 2:
        raise ValueError("need at least 2 points for distance supervision")
    pairs = _sample_partners(ds.n, pairs_per_point, seed)

    dist = cdist(ds.features, ds.features)
    masked = dist.copy()
    np.fill_diagonal(masked, np.inf)
    ordered = np.sort(masked, axis=1)[:, : ds.n - 1]
    cutoff = ordered[:, _quantile_index(percentile, ds.n - 1)]

    entries = []
    for a, b in pairs:
        near = dist[a, b] <= max(cutoff[a], cutoff[b])
        entries.append((a, b, 1.0 if near else -1.0))
    return PairSupervision.from_entries(ds.n, entries)


def save_supervision(sup: PairSupervision, path) -> None:
    """Write supervision as CSV triples "i,j,y"."""
    with open(path, "w", encoding="utf-8") as fh:
        for a, b, v in zip(sup.i, sup.j, sup.y):
            fh.write(f"{int(a)},{int(b)},{float(v)!r}\n")


def load_supervision(path, n: int) -> PairSupervision:
    entries = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            cells = text.split(",")
            if len(cells) != 3:
                raise DataFormatError(f"supervision row {lineno}: expected 3 cells")
            try:
                entries.append((int(cells[0]), int(cells[1]), float(cells[2])))
            except ValueError:
                raise DataFormatError(f"supervision row {lineno}: malformed cell") from None
    return PairSupervision.from_entries(n, entries)


def rbf_bandwidth(ds: Dataset, t: float, k: int = 100) -> float:
    """t times the mean distance to each point's k nearest neighbours.

    k is clamped to n-1. Errors out when the mean distance is zero (all
    points coincide), since a zero bandwidth is unusable.
    """
    if ds.n < 2:
        raise ValueError("need at least 2 points to estimate a bandwidth")
    if t <= 0:
        raise ValueError("t must be positive")
    k = min(max(int(k), 1), ds.n - 1)
    dist = cdist(ds.features, ds.features)
    np.fill_diagonal(dist, np.inf)
    nearest = np.sort(dist, axis=1)[:, :k]
    mean_dist = float(nearest.mean())
    if mean_dist == 0.0:
        raise ValueError("degenerate bandwidth: all points coincide")
    return t * mean_dist


@dataclass
class KernelConfig:
    """RBF anchor set and bandwidth for kernel-transferred features."""

    anchors: np.ndarray
    bandwidth: float

    def __post_init__(self):
        self.anchors = np.ascontiguousarray(self.anchors, dtype=np.float64)
        if self.anchors.ndim != 2 or self.anchors.shape[0] < 1:
            raise DataFormatError("anchors must be a non-empty 2-D matrix")
        if not np.isfinite(self.anchors).all():
            raise DataFormatError("anchors contain non-finite values")
        if not (self.bandwidth > 0):
            raise DataFormatError("bandwidth must be positive")
        self.anchors.flags.writeable = False

    @property
    def q(self) -> int:
        return self.anchors.shape[0]

    @property
    def d(self) -> int:
        return self.anchors.shape[1]


def sample_anchors(ds: Dataset, q: int, seed: int) -> np.ndarray:
    """Uniform sample of q training rows (without replacement), in row order."""
    if not 1 <= q <= ds.n:
        raise ValueError(f"anchor count must be in [1, {ds.n}]")
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(ds.n, size=q, replace=False))
    return ds.features[idx].copy()


def kernel_matrix(points: np.ndarray, cfg: KernelConfig) -> np.ndarray:
    """Row-wise RBF responses exp(-||x - anchor||^2 / (2 sigma^2))."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if points.shape[1] != cfg.d:
        raise ValueError(f"dimension mismatch: points have d={points.shape[1]}, anchors d={cfg.d}")
    sq = cdist(points, cfg.anchors, "sqeuclidean")
    return np.exp(-sq / (2.0 * cfg.bandwidth**2))


def kernel_features(x: np.ndarray, cfg: KernelConfig) -> np.ndarray:
    """Kernel-transferred representation of a single point (length Q)."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    return kernel_matrix(x[None, :], cfg)[0]
