"""Finite metric spaces, continuous-logic sentences, and Monte Carlo
concentration experiments on Urysohn-sphere approximations."""

__version__ = "0.1.0"

from .spaces import (
    TOL,
    FiniteMetricSpace,
    Interval,
    InvalidSpaceError,
    NotKatetovError,
    Violation,
    admissible_interval,
    extend_space,
    extract_substructure,
    find_violations,
    is_katetov,
    katetov_violation,
    loads_fms,
    dumps_fms,
    read_fms,
    validate_space,
    write_fms,
)
from .logic import (
    AbsDiff,
    Classification,
    Const,
    Dist,
    ExtensionAxiomSpec,
    Formula,
    Inf,
    KindSentenceSpec,
    Max,
    Min,
    Prod,
    SampledValue,
    Sup,
    TruncAdd,
    TruncSub,
    classify,
    evaluate,
    evaluate_on_sample,
    free_variables,
    kind_parts,
    make_extension_axiom,
    make_kind_sentence,
    parse_formula,
    parse_sentence,
    to_text,
)
from .generate import (
    ApproximationParams,
    GridInfeasibleError,
    Sampler,
    TupleTooLargeError,
    build_approximation,
    random_extension,
    sequential_random_space,
)
from .experiments import (
    BoundEstimate,
    ConcentrationResult,
    ExperimentConfig,
    TrialRow,
    TrialSeries,
    ZeroOneResult,
    estimate_witness_probability,
    holdout_bound,
    holdout_bound_log,
    run_concentration_experiment,
    run_zero_one_experiment,
    wilson_interval,
)
from .rng import derive_seed, substream
