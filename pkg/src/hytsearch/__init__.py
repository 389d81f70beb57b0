"""Surrogate-assisted multi-objective search over a hybrid conv/attention
architecture space, with baseline strategies and result analytics."""

__version__ = "0.1.0"

from .acquisition import AcquisitionConfig, beta_at, ucb_score
from .evaluators import (
    AnalyticProxyEvaluator,
    EvaluationError,
    EvaluationRecord,
    Evaluator,
    ExternalCommandEvaluator,
    TabularEvaluator,
    ZdtEvaluator,
    analytic_proxy_evaluate,
    build_evaluator,
    zdt_evaluate,
)
from .nsga2 import GaConfig, SolverPoint, evolve
from .pareto import (
    crowding_distance,
    dominates,
    greedy_hvi_select,
    hvi,
    hypervolume_2d,
    non_dominated_sort,
)
from .report import ComparisonReport, align_traces, win_rate
from .sampling import (
    InfeasiblePopulationError,
    derive_seed,
    lhs_genomes,
    lhs_unit,
    make_rng,
    uniform_genome,
)
from .search import (
    Archive,
    RunResult,
    SearchAbortedError,
    SearchConfig,
    compute_reference_point,
    run_hytnas,
    run_nsga2_direct,
    run_random,
    run_search,
    write_run_result,
)
from .space import (
    ArchitectureDescriptor,
    BlockGroupSpec,
    GenomeValidationError,
    HyperparamSpec,
    SearchSpaceSpec,
    SpaceValidationError,
    UniformGeneSpace,
    cardinality,
    decode,
    default_space,
    encode,
    flops_estimate,
    genome_from_unit,
    load_space,
    param_count,
    to_unit_vector,
    validate_genome,
)
from .surrogate import (
    GradientBoostedTrees,
    RankEnsemble,
    RegressionTree,
    fit_objective_ensembles,
    fit_tree,
    kendall_tau,
    rank_normalize,
)

__all__ = [name for name in dir() if not name.startswith("_")]
