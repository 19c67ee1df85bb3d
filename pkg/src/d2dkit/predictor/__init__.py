"""Pairwise sharing nowcaster: features, temporal datasets, linear models."""

from .dataset import EmptyCandidatesError, PairDataset, build_dataset, make_split
from .features import COLUMNS, FAMILIES, FeatureContext, FeatureVector, extract_features, shannon_entropy
from .linear import LinearModel, SingleClassError, auc, evaluate, objective, train
from .sweep import family_subsets, feature_subset_sweep

__all__ = [
    "EmptyCandidatesError", "PairDataset", "build_dataset", "make_split", "COLUMNS", "FAMILIES",
    "FeatureContext", "FeatureVector", "extract_features", "shannon_entropy", "LinearModel",
    "SingleClassError", "auc", "evaluate", "objective", "train", "family_subsets", "feature_subset_sweep",
]
