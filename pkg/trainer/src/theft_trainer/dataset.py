"""Dataset synthesis: honest CSV -> balanced, split, labeled meter-days.

For every honest day the six tampering behaviours produce six malicious
rows, so honest examples start out as the 1:6 minority.  The real rows
are split 80/20 with per-class stratification first; ADASYN then
oversamples the training split's minority class to parity.  Synthetic
rows are tagged and never reach the test split.
"""

from __future__ import annotations

import csv
import random
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from sklearn.neighbors import NearestNeighbors

from .attacks import ATTACK_KINDS, apply_attack, derive_seed
from .errors import InsufficientData, ParseError

READING_SCALE = 1000  # integer watt-hours per kWh, per the CSV contract
MIN_HONEST_DAYS = 100


@dataclass(frozen=True)
class MeterDay:
    meter_id: int
    day: str
    readings: Tuple[int, ...]  # fixed-point units


def load_honest_csv(path, period_slots: int = 48) -> List[MeterDay]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("%s: empty file" % path) from None
        want = ["meter_id", "date"] + ["r%d" % (i + 1) for i in range(period_slots)]
        if [h.strip() for h in header] != want:
            raise ParseError("%s: header does not match the readings schema" % path)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != period_slots + 2:
                raise ParseError(
                    "%s:%d: expected %d readings" % (path, lineno, period_slots)
                )
            try:
                meter_id = int(row[0])
                values = [float(v) for v in row[2:]]
            except ValueError as exc:
                raise ParseError("%s:%d: %s" % (path, lineno, exc)) from exc
            if any(v < 0 for v in values):
                raise ParseError("%s:%d: negative reading" % (path, lineno))
            rows.append(
                MeterDay(
                    meter_id, row[1],
                    tuple(round(v * READING_SCALE) for v in values),
                )
            )
    return rows


@dataclass
class BalancedDataset:
    """Training features are balanced; test features are untouched real rows."""

    x_train: np.ndarray
    y_train: np.ndarray
    tags_train: List[str]  # honest | f1..f6 | synthetic-oversample
    x_test: np.ndarray
    y_test: np.ndarray
    tags_test: List[str]
    train_ids: List[Tuple[int, str, str]]  # (meter, day, provenance)
    test_ids: List[Tuple[int, str, str]]

    @property
    def d(self) -> int:
        return self.x_train.shape[1]


def _adasyn(
    x: np.ndarray, y: np.ndarray, rng: np.random.Generator, k: int = 5
) -> np.ndarray:
    """Synthetic minority rows bringing the classes to exact parity.

    Follows the adaptive-density recipe: minority points with more
    majority neighbours get proportionally more synthetic offspring,
    each interpolated toward a random minority neighbour.  Largest
    remainders absorb the rounding so the class counts end 1:1.
    """
    minority = int(y.sum() * 2 < len(y))
    x_min = x[y == minority]
    need = int((y != minority).sum() - len(x_min))
    if need <= 0:
        return np.empty((0, x.shape[1]))
    k_eff = min(k, len(x) - 1)
    nn_all = NearestNeighbors(n_neighbors=k_eff + 1).fit(x)
    _, idx = nn_all.kneighbors(x_min)
    # ratio of majority neighbours, excluding the point itself
    ratios = np.array(
        [np.mean(y[row[1:]] != minority) for row in idx], dtype=np.float64
    )
    if ratios.sum() == 0:
        ratios = np.ones(len(x_min))
    weights = ratios / ratios.sum()
    counts = np.floor(weights * need).astype(int)
    remainder = need - counts.sum()
    if remainder > 0:
        order = np.argsort(-(weights * need - counts))
        counts[order[:remainder]] += 1

    k_min = min(k, len(x_min) - 1)
    if k_min < 1:
        # single minority point: jitter-free duplication is all that's left
        return np.repeat(x_min, need, axis=0)
    nn_min = NearestNeighbors(n_neighbors=k_min + 1).fit(x_min)
    _, min_idx = nn_min.kneighbors(x_min)
    synth = []
    for i, g in enumerate(counts):
        for _ in range(g):
            z = min_idx[i][1 + rng.integers(k_min)]
            lam = rng.random()
            synth.append(x_min[i] + lam * (x_min[z] - x_min[i]))
    return np.array(synth) if synth else np.empty((0, x.shape[1]))


def synthesize_dataset(
    honest_csv, seed: int, period_slots: int = 48, test_fraction: float = 0.2
) -> BalancedDataset:
    """Honest CSV -> attacks -> stratified split -> ADASYN-balanced train set."""
    honest = load_honest_csv(honest_csv, period_slots)
    if len(honest) < MIN_HONEST_DAYS:
        raise InsufficientData(
            "need at least %d honest meter-days, got %d"
            % (MIN_HONEST_DAYS, len(honest))
        )

    features: List[np.ndarray] = []
    labels: List[int] = []
    tags: List[str] = []
    ids: List[Tuple[int, str, str]] = []
    for row in honest:
        features.append(np.array(row.readings, dtype=np.float64) / READING_SCALE)
        labels.append(0)
        tags.append("honest")
        ids.append((row.meter_id, row.day, "honest"))
        for kind in ATTACK_KINDS:
            tampered = apply_attack(kind, row.readings, row.meter_id, row.day, seed)
            features.append(np.array(tampered, dtype=np.float64) / READING_SCALE)
            labels.append(1)
            tags.append(kind)
            ids.append((row.meter_id, row.day, kind))

    x = np.vstack(features)
    y = np.array(labels, dtype=np.int64)

    # stratified 80/20 split of the real rows
    rng = random.Random(derive_seed(seed, "split"))
    train_idx, test_idx = [], []
    for cls in (0, 1):
        members = [i for i in range(len(y)) if y[i] == cls]
        rng.shuffle(members)
        cut = round(len(members) * test_fraction)
        test_idx.extend(members[:cut])
        train_idx.extend(members[cut:])
    train_idx.sort()
    test_idx.sort()

    x_train, y_train = x[train_idx], y[train_idx]
    tags_train = [tags[i] for i in train_idx]
    ids_train = [ids[i] for i in train_idx]

    synth = _adasyn(x_train, y_train, np.random.default_rng(derive_seed(seed, "adasyn")))
    if len(synth):
        minority = int(y_train.sum() * 2 < len(y_train))
        x_train = np.vstack([x_train, synth])
        y_train = np.concatenate([y_train, np.full(len(synth), minority)])
        tags_train = tags_train + ["synthetic-oversample"] * len(synth)
        ids_train = ids_train + [(-1, "synthetic", "synthetic-oversample")] * len(synth)

    return BalancedDataset(
        x_train=x_train,
        y_train=y_train,
        tags_train=tags_train,
        x_test=x[test_idx],
        y_test=y[test_idx],
        tags_test=[tags[i] for i in test_idx],
        train_ids=ids_train,
        test_ids=[ids[i] for i in test_idx],
    )
