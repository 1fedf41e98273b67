"""Solver library for the monotone submodular multiple knapsack problem."""

from .blocks import (
    BlockConstraintInstance,
    BlockPolytope,
    BlockSpec,
    Element,
    FractionalPoint,
    assignment_to_elements,
    block_instance_to_dict,
    build_block_instance,
    enumerate_configurations,
)
from .errors import ConfigurationBudgetError, InputError, SizeLimitError, SmkpError
from .extension import MultilinearEstimate, multilinear_exact, multilinear_sample
from .greedy import ContinuousGreedyResult, GreedyConfig, continuous_greedy, scale_point
from .instance import (
    Assignment,
    RestrictedInstance,
    SmkpInstance,
    assignment_value,
    check_feasible,
    dedup_assignment,
    generate_instance,
    parse_instance,
    serialize_instance,
)
from .objectives import (
    AnchoredOracle,
    CoverageObjective,
    GroupSaturationObjective,
    LiftedOracle,
    ModularObjective,
    ResidualOracle,
    check_submodular_monotone,
    least_marginal_part,
)
from .pipeline import (
    BaselineResult,
    ExactResult,
    PipelineParams,
    SolveReport,
    enumerate_partials,
    greedy_marginal_prefix,
    parameters_for_target_gap,
    residual_instance,
    solve,
    solve_exact,
    solve_greedy,
)
from .rounding import (
    RoundingResult,
    convert_block_solution,
    failure_probability_bound,
    max_singleton_gain,
    relax_and_round,
    sample_set,
)
from .structuring import LeveledStructure, build_leveled_structure, transform_assignment

__version__ = "0.1.0"
