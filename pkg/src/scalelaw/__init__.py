"""Scaling-law toolkit: fit loss laws from training-run logs, extract
compute frontiers and batch-size laws, and turn them into concrete
recommendations for model size, data, batch size, and learning rate."""

from .errors import (
    ConflictError,
    DegenerateVarianceError,
    EmptyContourError,
    EmptyEnvelopeError,
    FitFailureError,
    GammaUndefinedError,
    InfeasibleTargetError,
    InputError,
    InsufficientDataError,
    InsufficientFrontierError,
    InsufficientGridError,
    NoMinimumError,
    NumericalError,
    ParseError,
    PreRangeLossError,
    ScaleLawError,
    UnreachableLossError,
    ValidationError,
)
from .runlog import (
    CurvePoint,
    LrScheme,
    ModelSpec,
    RunRecord,
    RunSet,
    finite_prefix,
    flops,
    has_divergence,
    monotone_envelope,
    parse_runs,
    serialize_runs,
    smooth_curve,
    smooth_run,
    tokens_at_loss,
)
from .lawfit import (
    ChinchillaLaw,
    FitReport,
    FrontierConstraint,
    KaplanLaw,
    apply_constraint,
    fit_loss_law,
    huber,
    r_squared,
    samples_from_runs,
)
from .noisescale import (
    TABLE_B_RATIOS,
    NoiseParams,
    TradeoffRow,
    critical_batch,
    delta_loss_opt,
    eta_opt_adam,
    eta_opt_sgd,
    solve_tradeoff,
    tradeoff_table,
)
from .frontier import (
    EnvelopeSample,
    FrontierPoint,
    FrontierReport,
    PowerLaw,
    compute_envelope,
    default_grid,
    extract_frontier_points,
    fit_power_law,
    frontier_laws,
    frontier_report,
)
from .bslaw import (
    BoptLaw,
    ContourPoint,
    ContourVertex,
    bopt_law_from_runs,
    default_loss_levels,
    derive_sopt,
    fit_bopt_law,
    fit_contour_parabola,
    iso_loss_contour,
)
from .lrlaw import (
    LossSurface,
    LrLawFit,
    LrSample,
    build_surface,
    extract_lr_opt,
    fit_gamma,
    scale_lr,
)
from .synth import (
    GroundTruth,
    SynthConfig,
    d_required,
    default_ground_truth,
    default_sweep_config,
    simulate_curve,
    simulate_grid,
)
from .advisor import (
    CompressionResult,
    PresetRow,
    Presets,
    Recommendation,
    advise_compute,
    advise_data,
    compress_query,
    preset_lookup,
)
from .artifact import LawArtifact, build_reference_artifact, reference_artifact

__version__ = "0.1.0"

__all__ = [
    "ScaleLawError",
    "InputError",
    "NumericalError",
    "ParseError",
    "ConflictError",
    "ValidationError",
    "InsufficientDataError",
    "InsufficientGridError",
    "DegenerateVarianceError",
    "PreRangeLossError",
    "UnreachableLossError",
    "InfeasibleTargetError",
    "FitFailureError",
    "EmptyEnvelopeError",
    "InsufficientFrontierError",
    "EmptyContourError",
    "NoMinimumError",
    "GammaUndefinedError",
    "LrScheme",
    "ModelSpec",
    "CurvePoint",
    "RunRecord",
    "RunSet",
    "parse_runs",
    "serialize_runs",
    "flops",
    "finite_prefix",
    "has_divergence",
    "smooth_curve",
    "smooth_run",
    "monotone_envelope",
    "tokens_at_loss",
    "ChinchillaLaw",
    "KaplanLaw",
    "FrontierConstraint",
    "FitReport",
    "apply_constraint",
    "huber",
    "r_squared",
    "fit_loss_law",
    "samples_from_runs",
    "NoiseParams",
    "TradeoffRow",
    "TABLE_B_RATIOS",
    "eta_opt_sgd",
    "eta_opt_adam",
    "delta_loss_opt",
    "solve_tradeoff",
    "tradeoff_table",
    "critical_batch",
    "PowerLaw",
    "EnvelopeSample",
    "FrontierPoint",
    "FrontierReport",
    "compute_envelope",
    "default_grid",
    "extract_frontier_points",
    "fit_power_law",
    "frontier_laws",
    "frontier_report",
    "BoptLaw",
    "ContourPoint",
    "ContourVertex",
    "default_loss_levels",
    "iso_loss_contour",
    "fit_contour_parabola",
    "fit_bopt_law",
    "derive_sopt",
    "bopt_law_from_runs",
    "LossSurface",
    "LrSample",
    "LrLawFit",
    "build_surface",
    "extract_lr_opt",
    "fit_gamma",
    "scale_lr",
    "GroundTruth",
    "SynthConfig",
    "d_required",
    "simulate_curve",
    "simulate_grid",
    "default_ground_truth",
    "default_sweep_config",
    "PresetRow",
    "Presets",
    "preset_lookup",
    "Recommendation",
    "advise_compute",
    "advise_data",
    "CompressionResult",
    "compress_query",
    "LawArtifact",
    "reference_artifact",
    "build_reference_artifact",
    "__version__",
]
