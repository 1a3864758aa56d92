"""driftbeam: foresight beam decoding guided by drift estimates.

The package treats a language model's evolving answer quality as a
stochastic process: candidate reasoning steps are scored by the predictable
drift of short lookahead rollouts, the beam is resampled by softmax weights
over those drifts, statistically lagging paths are pruned by an optional
stopping rule, and deliberation halts once the best available drift is
indistinguishable from zero. Consensus-stopped foresight and plain
autoregressive completion ship as controlled baselines, with exact FLOPs
and accuracy accounting on top.
"""

from .backends import (
    Capabilities,
    HttpCompletionsModel,
    RecordingModel,
    ScriptedModel,
    SequenceModel,
    StepSample,
    SyntheticModel,
    SyntheticTask,
    quality_of,
)
from .baselines import (
    PhiConfig,
    PhiScore,
    ar_cot_decode,
    phi_advantage,
    phi_alignment,
    phi_decode,
    phi_stop,
)
from .dataset import TaskInstance, load_dataset, save_dataset, synthetic_suite
from .engine import (
    BeamPath,
    BeamState,
    Candidate,
    DecodeConfig,
    DecodeResult,
    PruneRecord,
    check_stop,
    decode,
    expand_beam,
    extract_answer,
    finalize,
    prune_beam,
    score_candidates,
    select_beam,
    softmax_weights,
    substream,
)
from .errors import (
    CapacityError,
    DatasetError,
    DecodeStalledError,
    DriftbeamError,
    NumericInputError,
    PreconditionError,
    ProtocolError,
    TransportError,
)
from .metrics import (
    Comparison,
    PerExample,
    RunMetrics,
    accuracy,
    answers_match,
    canonical_json,
    compare_runs,
    emit_report,
    flops,
    normalize_answer,
    parse_report,
)
from .process import (
    AdaptiveThreshold,
    DoobEstimate,
    QualityPoint,
    QualityTrajectory,
    TrajectoryStats,
    adaptive_threshold,
    deficit,
    estimate_predictable_advantage,
    has_converged,
    should_prune,
    trajectory_statistics,
)
from .runner import (
    PRESETS,
    BackendSpec,
    RunConfig,
    SweepPoint,
    execute_run,
    parse_config,
    run,
    serialize_config,
    sweep,
)

__version__ = "0.1.0"

__all__ = [
    "AdaptiveThreshold",
    "BackendSpec",
    "BeamPath",
    "BeamState",
    "Candidate",
    "Capabilities",
    "CapacityError",
    "Comparison",
    "DatasetError",
    "DecodeConfig",
    "DecodeResult",
    "DecodeStalledError",
    "DoobEstimate",
    "DriftbeamError",
    "HttpCompletionsModel",
    "NumericInputError",
    "PRESETS",
    "PerExample",
    "PhiConfig",
    "PhiScore",
    "PreconditionError",
    "ProtocolError",
    "PruneRecord",
    "QualityPoint",
    "QualityTrajectory",
    "RecordingModel",
    "RunConfig",
    "RunMetrics",
    "ScriptedModel",
    "SequenceModel",
    "StepSample",
    "SweepPoint",
    "SyntheticModel",
    "SyntheticTask",
    "TaskInstance",
    "TrajectoryStats",
    "TransportError",
    "accuracy",
    "adaptive_threshold",
    "answers_match",
    "ar_cot_decode",
    "canonical_json",
    "check_stop",
    "compare_runs",
    "decode",
    "deficit",
    "emit_report",
    "estimate_predictable_advantage",
    "execute_run",
    "expand_beam",
    "extract_answer",
    "finalize",
    "flops",
    "has_converged",
    "load_dataset",
    "normalize_answer",
    "parse_config",
    "parse_report",
    "phi_advantage",
    "phi_alignment",
    "phi_decode",
    "phi_stop",
    "prune_beam",
    "quality_of",
    "run",
    "save_dataset",
    "score_candidates",
    "select_beam",
    "serialize_config",
    "should_prune",
    "softmax_weights",
    "substream",
    "sweep",
    "synthetic_suite",
    "trajectory_statistics",
]
