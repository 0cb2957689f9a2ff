"""RoPE extrapolation scaling laws, variant scoring and logit diagnostics."""

from .rope_core import (
    ConfigurationError,
    DimensionError,
    OrderingError,
    RopeConfig,
    RotaryAngles,
    ScoreBreakdown,
    apply_rotation,
    attention_score_complex,
    attention_score_real,
    relative_phase,
    rotary_angles,
)
from .scaling_laws import (
    Branch,
    ScalingReport,
    critical_base,
    critical_dimension,
    extended_law,
    extrapolation_bound,
    period,
    smaller_base_pivots,
)
from .variants import Kind, ScoreRequest, SpecificationError, VariantSpec, list_variants, score
from .diagnostics import (
    AttentionTrace,
    CoverageReport,
    PhaseClass,
    ood_split,
    phase_coverage,
    score_trace,
    unseen_phase_flags,
)

__version__ = "0.1.0"
