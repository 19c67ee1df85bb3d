"""Analysis toolkit for device-to-device file-sharing traces."""

from .trace import (CATEGORIES, SharingEvent, Tier, TierIndex, Trace, TraceFormatError, parse_event_log,
                    read_trace, split_by_time, summarize, write_event_log)
from .synthgen import GeneratorConfig, GroundTruthLedger, generate_trace
from .graphing import EncounterGraph, GroupPartition, build_encounter_graph, compute_groups
from .netmetrics import fit_powerlaw_mle, global_clustering, group_metrics, local_clustering, path_stats
from .traffic import category_redundancy_ranking, redundancy_timeseries
from .influence import Strategy, build_sharing_forest, select_seed
from .cascade import CascadeParams, evaluate_coverage, replay_propagation

__version__ = "0.1.0"

__all__ = [
    "CATEGORIES", "SharingEvent", "Tier", "TierIndex", "Trace", "TraceFormatError", "parse_event_log",
    "read_trace", "split_by_time", "summarize", "write_event_log", "GeneratorConfig", "GroundTruthLedger",
    "generate_trace", "EncounterGraph", "GroupPartition", "build_encounter_graph", "compute_groups",
    "fit_powerlaw_mle", "global_clustering", "group_metrics", "local_clustering", "path_stats",
    "category_redundancy_ranking", "redundancy_timeseries", "Strategy", "build_sharing_forest",
    "select_seed", "CascadeParams", "evaluate_coverage", "replay_propagation", "__version__",
]
