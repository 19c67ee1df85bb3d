"""Accuracy-vs-feature-family tradeoff table."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from itertools import combinations

from .dataset import PairDataset
from .features import FAMILIES, columns_for
from .linear import evaluate, train


def family_subsets(k_set=(2, 3), include_full: bool = True) -> list:
    fams = list(FAMILIES)
    subsets = [c for k in sorted(set(k_set)) for c in combinations(fams, k)]
    if include_full and tuple(fams) not in subsets:
        subsets.append(tuple(fams))
    return subsets


def feature_subset_sweep(train_ds: PairDataset, test_ds: PairDataset, k_set=(2, 3), include_full: bool = True,
                         threads: int = 1, **train_kw) -> list:
    """One row per family subset: {"families", "k", metrics...} on the test set."""

    def run(subset):
        cols = columns_for(subset)
        model = train(train_ds.select(cols), train_ds.y, columns=cols, **train_kw)
        metrics = evaluate(model, test_ds.select(cols), test_ds.y)
        return {"families": "+".join(subset), "k": len(subset), **metrics}

    subsets = family_subsets(k_set, include_full)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run, subsets))
    return [run(s) for s in subsets]
