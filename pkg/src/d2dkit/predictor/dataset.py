"""Temporally split pair datasets."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..trace import TierIndex, as_trace
from .features import COLUMNS, FeatureContext, feature_matrix, window_trace

WEEK = 604800


class EmptyCandidatesError(ValueError):
    pass


@dataclass
class PairDataset:
    pairs: np.ndarray  # (n, 2) user ids, user_a < user_b
    X: np.ndarray  # raw feature values, columns = COLUMNS
    y: np.ndarray
    feature_window: tuple
    label_window: tuple
    mean: Optional[np.ndarray] = None
    std: Optional[np.ndarray] = None
    columns: tuple = field(default=COLUMNS)

    def __len__(self) -> int:
        return int(self.y.size)

    @property
    def standardized(self) -> np.ndarray:
        if self.mean is None:
            raise ValueError("dataset has no standardization fitted")
        return (self.X - self.mean) / self.std

    def base_rate(self) -> float:
        return float(self.y.mean()) if self.y.size else 0.0

    def select(self, names) -> np.ndarray:
        idx = [self.columns.index(c) for c in names]
        return self.standardized[:, idx]


def week_window(min_ts: int, first_week: int, last_week: int) -> tuple:
    """[start of week ``first_week``, end of week ``last_week``); weeks are 1-based."""
    return (min_ts + (first_week - 1) * WEEK, min_ts + last_week * WEEK)


def make_split(trace, feature_window: tuple, label_window: tuple, tiers: Optional[TierIndex] = None,
               gps_cell_deg: float = 0.01) -> PairDataset:
    if not feature_window[1] <= label_window[0]:
        raise ValueError("feature window must precede the label window")
    trace = as_trace(trace)
    feat = window_trace(trace, *feature_window)
    if len(feat) == 0:
        raise EmptyCandidatesError("no events in the feature window")
    ctx = FeatureContext(feat, tiers, gps_cell_deg, feature_window)
    pairs = ctx.candidate_pairs()
    lab = window_trace(trace, *label_window)
    lab_keys = np.unique(np.minimum(lab.sender, lab.receiver) * (1 << 32) + np.maximum(lab.sender, lab.receiver))
    y = np.isin(pairs[:, 0] * (1 << 32) + pairs[:, 1], lab_keys).astype(np.int64)
    return PairDataset(pairs, feature_matrix(ctx, pairs), y, tuple(feature_window), tuple(label_window))


def build_dataset(trace, tiers: Optional[TierIndex] = None, train_weeks: int = 6, test_weeks: int = 7,
                  gps_cell_deg: float = 0.01, min_ts: Optional[int] = None) -> tuple:
    """(train, test) datasets.

    Train: features from weeks 1..train_weeks-1, labels from week
    train_weeks. Test: features from the following test_weeks-1 weeks,
    labels from the week after. Standardization is fit on train only.
    """
    trace = as_trace(trace)
    if min_ts is None:
        min_ts = trace.min_ts
    if trace.max_ts and trace.max_ts < min_ts + (train_weeks + test_weeks) * WEEK:
        raise ValueError(f"trace spans fewer than {train_weeks + test_weeks} weeks")
    train = make_split(trace, week_window(min_ts, 1, train_weeks - 1),
                       week_window(min_ts, train_weeks, train_weeks), tiers, gps_cell_deg)
    end = train_weeks + test_weeks
    test = make_split(trace, week_window(min_ts, train_weeks + 1, end - 1),
                      week_window(min_ts, end, end), tiers, gps_cell_deg)
    mean = train.X.mean(axis=0)
    std = train.X.std(axis=0)
    std[std == 0] = 1.0
    for ds in (train, test):
        ds.mean, ds.std = mean, std
    return train, test
