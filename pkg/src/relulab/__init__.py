"""Exact-arithmetic laboratory for instability of relu classifiers.

The package studies a family of binary classification problems on which
small, verifiable neural networks behave in provably extreme ways: a matcher
that fits every training point yet is flipped everywhere by one tiny
perturbation, a stable classifier for the same data, an exact collapse of
deep nets to affine maps along decreasing lines, Monte Carlo checks of the
sampling bounds behind the instability theorem, and an information-theoretic
adversary that defeats any solver working from finitely many digits.

Everything label-critical runs in exact rational arithmetic; training and
sampling run in float64.
"""

__version__ = "0.1.0"

from .ratio import as_ratio, exact_from_float, format_ratio, parse_ratio
from .network import (
    EXACT_MODE,
    FLOAT_MODE,
    AffineLayer,
    ReluNetwork,
    eval_network,
    eval_network_batch,
    load_network,
    make_layer,
    make_network,
    network_from_json,
    network_to_json,
    relu,
    save_network,
    to_exact,
    to_float64,
    validate_network,
)
from .monotone import (
    MonotoneMap,
    affine_map,
    identity_map,
    logistic_map,
    parse_monotone,
    step_map,
    threshold_map,
)
from .problem import (
    COST_KINDS,
    LabeledMultiset,
    ProblemInstance,
    ZetaDistribution,
    cf_eps_bound,
    classify,
    classify_first,
    cost_eval,
    dataset_from_json,
    dataset_to_json,
    distribution_constants,
    enumerate_dataset,
    grid_index,
    grid_point,
    is_well_separated,
    load_dataset,
    sample_dataset,
    save_dataset,
    separation_radius,
    theorem_constant,
    theorem_radius,
    trial_rng,
    zeta_normalizer,
)
from .constructions import (
    AlphaSequence,
    AttackReport,
    AttackRow,
    Perturbation,
    build_stable_classifier,
    build_unstable_matcher,
    certified_intervals,
    make_perturbation,
    stable_alphas,
    verify_attack,
)
from .reduction import (
    CollapseResult,
    LayerTrace,
    MisclassifiedSet,
    collapse_on_line,
    collapse_trace_text,
    extract_misclassified,
    line_sign_patterns,
)
from .montecarlo import (
    TrialReport,
    reports_summary,
    reports_to_csv,
    summary_to_json,
    verify_alternation_bound,
    verify_max_bound,
    verify_theorem_event,
    verify_unique_count,
)
from .training import (
    TrainConfig,
    TrainOutcome,
    AttackSearchOutcome,
    accuracy,
    attack_outcomes_csv,
    cost_gradients,
    cost_value,
    greedy_alternating,
    init_params,
    network_to_params,
    params_to_network,
    train,
    training_curve_csv,
    universal_attack_search,
)
from .oracle import (
    AdversarySession,
    DyadicAnswer,
    DyadicQuery,
    OracleTranscript,
    ProtocolError,
    QueryBudgetExceeded,
    Verdict,
    baseline_solvers,
    hedge_solver,
    labels_solver,
    nonhalting_solver,
    run_adversary,
    solution_set_gap,
    train_solver,
    transcript_text,
)

__all__ = [name for name in dir() if not name.startswith("_")]
