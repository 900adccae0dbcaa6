"""Supervised dataset construction: feature extraction from trajectories,
oracle labeling, z-score standardization, SMOTE oversampling, stratified
7:2:1 splitting, and CSV persistence.

Feature order everywhere: (altitude_m, v_vertical_mps, ax, ay, az).
Samples stay in raw feature units end to end; the scaler travels with the
trained model so inference is self-contained.
"""

import csv
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .flight import RocketModel, Trajectory, predict_apogee_batch

FEATURE_NAMES = [
    "altitude_m", "v_vertical_mps",
    "accel_x_mps2", "accel_y_mps2", "accel_z_mps2",
]
DATASET_CSV_HEADER = FEATURE_NAMES + ["airbrake_state"]
N_FEATURES = 5


class EmptyDatasetError(ValueError):
    pass


class DegenerateFeatureError(ValueError):
    def __init__(self, column: int):
        self.column = column
        super().__init__(
            f"feature column {column} ({FEATURE_NAMES[column]}) has zero variance"
        )


class InsufficientMinorityError(ValueError):
    pass


class StratificationError(RuntimeError):
    pass


class CsvSchemaError(ValueError):
    pass


class CsvParseError(ValueError):
    def __init__(self, line_no: int, msg: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {msg}")


@dataclass
class SampleSet:
    """features: (N, 5) float64; labels: (N,) int64 with 1 = Open, 0 = Closed."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64).reshape(-1, N_FEATURES)
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("features and labels length mismatch")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("non-finite feature value")
        if not np.all((self.labels == 0) | (self.labels == 1)):
            raise ValueError("labels must be 0 or 1")

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    def class_counts(self) -> Tuple[int, int]:
        n_open = int(np.sum(self.labels == 1))
        return len(self) - n_open, n_open

    def open_fraction(self) -> float:
        return float(np.mean(self.labels == 1)) if len(self) else 0.0


@dataclass(frozen=True)
class Scaler:
    mean: np.ndarray
    std: np.ndarray

    def transform(self, features: np.ndarray) -> np.ndarray:
        return (np.asarray(features, dtype=np.float64) - self.mean) / self.std


@dataclass(frozen=True)
class SplitDataset:
    train: SampleSet
    validation: SampleSet
    test: SampleSet
    seed: int


def extract_samples(
    trajectories: Sequence[Trajectory],
    model: RocketModel,
    h: float,
    stride: int = 1,
) -> SampleSet:
    """One sample per ascending trajectory step (every stride-th step),
    labeled by the oracle with the brakes treated as currently closed."""
    if stride < 1:
        raise ValueError("stride must be >= 1")
    if not trajectories:
        raise EmptyDatasetError("no trajectories given")
    rows = []
    for traj in trajectories:
        ascending = [s for s in traj.samples if s.v_vertical > 0]
        for s in ascending[::stride]:
            rows.append((s.altitude, s.v_vertical, *s.accel))
    if not rows:
        raise EmptyDatasetError("trajectories contain no ascending samples")
    feats = np.array(rows, dtype=np.float64)
    apogees = predict_apogee_batch(model, feats[:, 0], feats[:, 1], h, assume_open=False)
    labels = (apogees > model.target_apogee + model.deadband).astype(np.int64)
    return SampleSet(feats, labels)


def fit_scaler(samples: SampleSet) -> Scaler:
    """Per-feature mean/std over the given samples (population std, i.e.
    divide by N). Fit on the training split only."""
    if len(samples) < 2:
        raise ValueError("need at least 2 samples to fit a scaler")
    mean = samples.features.mean(axis=0)
    std = samples.features.std(axis=0)
    floor = 1e-12 * np.maximum(1.0, np.abs(mean))
    for j in range(N_FEATURES):
        if std[j] <= floor[j]:
            raise DegenerateFeatureError(j)
    return Scaler(mean=mean, std=std)


def apply_scaler(scaler: Scaler, samples: SampleSet) -> SampleSet:
    return SampleSet(scaler.transform(samples.features), samples.labels.copy())


def smote_oversample(
    samples: SampleSet,
    k: int = 5,
    seed: int = 0,
    scaler: Optional[Scaler] = None,
) -> SampleSet:
    """Balance classes by synthesizing minority points on segments between
    k-nearest minority neighbors: x + u * (x_nn - x), u ~ Uniform(0, 1).

    Neighbor distances are Euclidean on scaled features when a scaler is
    given (features themselves stay in their input units; the convex
    combination commutes with the affine scaling). Originals are preserved
    verbatim; synthetic rows are appended. Each synthetic sample uses a
    sub-seed derived from its index so output is schedule-independent.
    """
    n_closed, n_open = samples.class_counts()
    if n_closed == n_open:
        return SampleSet(samples.features.copy(), samples.labels.copy())
    minority_label = 1 if n_open < n_closed else 0
    n_min = min(n_closed, n_open)
    n_maj = max(n_closed, n_open)
    if n_min < 2:
        raise InsufficientMinorityError("minority class needs at least 2 samples")
    if k < 1:
        raise ValueError("k must be >= 1")
    if k >= n_min:
        raise ValueError(f"k={k} must be < minority count {n_min}")

    minority = samples.features[samples.labels == minority_label]
    space = scaler.transform(minority) if scaler is not None else minority
    # pairwise distances; minority counts are small enough for the dense matrix
    diff = space[:, None, :] - space[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=2))
    np.fill_diagonal(dist, np.inf)
    knn = np.argsort(dist, axis=1, kind="stable")[:, :k]

    needed = n_maj - n_min
    synth = np.empty((needed, N_FEATURES))
    for j in range(needed):
        rng = np.random.default_rng([seed, j])
        base = j % n_min
        nn = knn[base, rng.integers(0, k)]
        u = rng.uniform()
        synth[j] = minority[base] + u * (minority[nn] - minority[base])
    feats = np.vstack([samples.features, synth])
    labels = np.concatenate([samples.labels, np.full(needed, minority_label, dtype=np.int64)])
    return SampleSet(feats, labels)


def _allocate(counts: np.ndarray, total: int) -> np.ndarray:
    """Largest-remainder allocation of `total` slots proportionally to
    `counts`; each class ends within 1 of its exact quota."""
    n = counts.sum()
    quota = total * counts / n
    alloc = np.floor(quota).astype(np.int64)
    rem = quota - np.floor(quota)
    order = np.argsort(-rem, kind="stable")
    i = 0
    while alloc.sum() < total:
        c = order[i % len(counts)]
        if alloc[c] < counts[c]:
            alloc[c] += 1
        i += 1
    return alloc


def split_dataset(samples: SampleSet, seed: int) -> SplitDataset:
    """Stratified shuffle split: test = round(0.1 N), validation =
    round(0.2 N), train = remainder."""
    n = len(samples)
    if n < 10:
        raise ValueError("need at least 10 samples to split 7:2:1")
    n_test = int(round(0.1 * n))
    n_val = int(round(0.2 * n))
    classes = np.array([0, 1])
    counts = np.array([int(np.sum(samples.labels == c)) for c in classes])
    present = counts > 0
    test_alloc = _allocate(counts[present], n_test)
    val_alloc = _allocate(counts[present], n_val)

    rng = np.random.default_rng(seed)
    idx_test, idx_val, idx_train = [], [], []
    ai = 0
    for c, cnt in zip(classes[present], counts[present]):
        cls_idx = np.flatnonzero(samples.labels == c)
        cls_idx = rng.permutation(cls_idx)
        t, v = int(test_alloc[ai]), int(val_alloc[ai])
        if t + v > cnt:
            raise StratificationError(f"class {c} too small for its split quotas")
        idx_test.append(cls_idx[:t])
        idx_val.append(cls_idx[t:t + v])
        idx_train.append(cls_idx[t + v:])
        ai += 1

    def _take(parts: List[np.ndarray]) -> SampleSet:
        idx = np.sort(np.concatenate(parts))
        return SampleSet(samples.features[idx], samples.labels[idx])

    split = SplitDataset(
        train=_take(idx_train), validation=_take(idx_val), test=_take(idx_test), seed=seed
    )
    # absence is only a violation when the split's proportional quota for the
    # class is at least one whole sample
    for name, part in (("train", split.train), ("validation", split.validation), ("test", split.test)):
        for c, cnt in zip(classes, counts):
            quota = cnt * len(part) / n
            if quota >= 1.0 and int(np.sum(part.labels == c)) == 0:
                raise StratificationError(f"class {c} absent from {name} split")
    return split


def write_csv(samples: SampleSet, path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(DATASET_CSV_HEADER)
        for x, y in zip(samples.features, samples.labels):
            writer.writerow([repr(float(v)) for v in x] + [int(y)])


def read_csv(path) -> SampleSet:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvSchemaError("empty file: missing header") from None
        if header != DATASET_CSV_HEADER:
            raise CsvSchemaError(f"unexpected header {header!r}")
        feats, labels = [], []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(DATASET_CSV_HEADER):
                raise CsvSchemaError(f"line {line_no}: expected {len(DATASET_CSV_HEADER)} columns, got {len(row)}")
            try:
                x = [float(v) for v in row[:N_FEATURES]]
            except ValueError as e:
                raise CsvParseError(line_no, str(e)) from None
            if row[N_FEATURES] not in ("0", "1"):
                raise CsvParseError(line_no, f"label must be 0 or 1, got {row[N_FEATURES]!r}")
            feats.append(x)
            labels.append(int(row[N_FEATURES]))
    if not feats:
        return SampleSet(np.empty((0, N_FEATURES)), np.empty(0, dtype=np.int64))
    return SampleSet(np.array(feats), np.array(labels, dtype=np.int64))
