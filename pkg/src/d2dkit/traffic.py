"""Reduplicate (redundant) transmission volume per time window and category."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .trace import CATEGORIES, as_trace

DEFAULT_WINDOW = 86400

ROW_COLUMNS = ("window_start_ts", "category", "total_bytes", "redundant_bytes", "redundant_ratio",
               "deliveries", "redundant_deliveries", "distinct_files")


@dataclass
class RedundancyReport:
    window_seconds: int
    rows: list = field(default_factory=list)

    def totals_by_category(self) -> dict:
        out: dict = {}
        for r in self.rows:
            tot, red = out.get(r["category"], (0, 0))
            out[r["category"]] = (tot + r["total_bytes"], red + r["redundant_bytes"])
        return out


def redundant_mask(trace) -> np.ndarray:
    """True for every delivery of a file after its globally first delivery."""
    trace = as_trace(trace)
    order = trace.order()
    files = trace.file[order]
    # stable sort by file keeps time order inside each file
    by_file = np.argsort(files, kind="stable")
    f_sorted = files[by_file]
    first = np.ones(f_sorted.size, dtype=bool)
    first[1:] = f_sorted[1:] != f_sorted[:-1]
    mask = np.empty(len(trace), dtype=bool)
    mask[order[by_file]] = ~first
    return mask


def redundancy_timeseries(events, window_seconds: int = DEFAULT_WINDOW) -> RedundancyReport:
    if window_seconds <= 0:
        raise ValueError("window_seconds must be positive")
    trace = as_trace(events)
    report = RedundancyReport(int(window_seconds))
    if len(trace) == 0:
        return report
    red = redundant_mask(trace)
    origin = trace.min_ts if trace.min_ts <= int(trace.ts.min()) else int(trace.ts.min())
    win = (trace.ts - origin) // window_seconds
    keys = win * len(CATEGORIES) + trace.category
    uniq, inv = np.unique(keys, return_inverse=True)
    k = uniq.size
    total = np.zeros(k, dtype=np.int64)
    redundant = np.zeros(k, dtype=np.int64)
    np.add.at(total, inv, trace.size)
    np.add.at(redundant, inv, np.where(red, trace.size, 0))
    deliveries = np.bincount(inv, minlength=k)
    red_deliveries = np.bincount(inv, weights=red, minlength=k).astype(np.int64)
    pair = np.unique(np.stack([inv, trace.file]), axis=1)
    distinct = np.bincount(pair[0], minlength=k)
    for j in range(k):
        w, c = divmod(int(uniq[j]), len(CATEGORIES))
        t = int(total[j])
        report.rows.append({
            "window_start_ts": origin + w * window_seconds,
            "category": CATEGORIES[c],
            "total_bytes": t,
            "redundant_bytes": int(redundant[j]),
            "redundant_ratio": int(redundant[j]) / t if t else 0.0,
            "deliveries": int(deliveries[j]),
            "redundant_deliveries": int(red_deliveries[j]),
            "distinct_files": int(distinct[j]),
        })
    return report


def category_redundancy_ranking(report: RedundancyReport) -> list:
    """(category, overall redundant byte ratio), highest first; ties by name."""
    ranked = []
    for cat, (tot, red) in report.totals_by_category().items():
        ranked.append((cat, red / tot if tot else 0.0))
    return sorted(ranked, key=lambda x: (-x[1], x[0]))
