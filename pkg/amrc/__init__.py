"""amrc: Adaptive minimax risk classifiers for data streams under concept drift."""
__version__ = "0.1.0"

from amrc.classifier import (  # noqa: E402
    PredictionDistribution,
    predict_deterministic,
    predict_probs,
)
from amrc.config import RunConfig, named_config  # noqa: E402
from amrc.errors import AMRCError  # noqa: E402
from amrc.feature_map import FeatureMap, InstanceMapConfig, phi  # noqa: E402
from amrc.harness import (  # noqa: E402
    StepRecord,
    emit_results,
    ingest_csv,
    load_results,
    run_online,
)
from amrc.optimizer import ClassifierState, optimize  # noqa: E402
from amrc.tracker import TrackerState, track_step  # noqa: E402

__all__ = [
    "__version__",
    "AMRCError",
    "ClassifierState",
    "FeatureMap",
    "InstanceMapConfig",
    "PredictionDistribution",
    "RunConfig",
    "StepRecord",
    "TrackerState",
    "emit_results",
    "ingest_csv",
    "load_results",
    "named_config",
    "optimize",
    "phi",
    "predict_deterministic",
    "predict_probs",
    "run_online",
    "track_step",
]
