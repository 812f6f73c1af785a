"""Polynomial causal compatibility inequalities via inflated marginal problems.

The package tests distributions over the observed nodes of a latent-variable
causal structure (centrally the triangle) by building an inflated structure,
posing the induced marginal problem as a linear program, and turning exact
infeasibility certificates into polynomial inequalities on the original
observables.
"""

from .events import Distribution, Event, EventSpace, bit_coarse_grain, marginalize
from .exact import Root2, format_exact, rationalize
from .graphs import (
    CausalStructure,
    NodeId,
    ancestral_subgraph,
    bell_structure,
    builtin_structure,
    format_structure,
    parse_structure,
    triangle_structure,
    verify_full_compatibility,
)
from .inequalities import (
    ChshReport,
    Factor,
    NoisyFamily,
    PolynomialInequality,
    chsh_triangle,
    chsh_triangle_report,
    evaluate,
    format_inequality,
    fritz_distribution,
    noise_threshold,
    noisy_member,
    parse_inequality,
    uniform_triangle_distribution,
    wagon_wheel_inequality,
)
from .inflation import (
    AiExpressibleSet,
    CompatibilityReport,
    FrozenCertificate,
    Inflation,
    ai_expressible_sets,
    builtin_inflation,
    deflate_certificate,
    format_inflation,
    inflated_marginal_model,
    injectable_sets,
    is_injectable,
    parse_inflation,
    test_compatibility,
    wagon_wheel_certificate,
)
from .io import (
    RunManifest,
    format_distribution,
    parse_distribution,
    parse_manifest,
    read_distribution,
    write_distribution,
)
from .lp import (
    FeasibilityProblem,
    Feasible,
    IndeterminateError,
    Infeasible,
    solve_feasibility,
    verify_certificate,
)
from .marginals import (
    MarginalModel,
    MarginalScenario,
    SparseIncidence,
    incidence_matrix,
    marginal_vector,
)
from .optimize import (
    OptimizationRun,
    OptimizerOptions,
    OptResult,
    ViolationReport,
    basin_hopping,
    bfgs_fd,
    finite_difference_gradient,
    maximize_violation,
    nelder_mead,
    support_pattern,
)
from .quantum import (
    QuantumStrategy,
    StrategyParams,
    UnitaryParams,
    alignment_permutation,
    angles_from_probabilities,
    density_from_params,
    fritz_strategy,
    hyperspherical_probabilities,
    params_from_unitary,
    parameterize_strategy,
    pvm_from_params,
    spengler_unitary,
    triangle_distribution,
)
from .symmetry import (
    OrbitPartition,
    PermGroup,
    Permutation,
    SymmetricReport,
    SymmetrizedScenario,
    deflation_consistent,
    expand_certificate,
    joint_orbits,
    marginal_orbits,
    permute_inequality,
    stabilizer_group,
    symmetric_incidence,
    symmetric_vectors,
    symmetrize_inflation,
    test_compatibility_symmetric,
)

__version__ = "0.1.0"

__all__ = [
    "ai_expressible_sets",
    "AiExpressibleSet",
    "alignment_permutation",
    "ancestral_subgraph",
    "angles_from_probabilities",
    "basin_hopping",
    "bell_structure",
    "bfgs_fd",
    "bit_coarse_grain",
    "builtin_inflation",
    "builtin_structure",
    "CausalStructure",
    "chsh_triangle",
    "chsh_triangle_report",
    "ChshReport",
    "CompatibilityReport",
    "deflate_certificate",
    "deflation_consistent",
    "density_from_params",
    "Distribution",
    "evaluate",
    "Event",
    "EventSpace",
    "expand_certificate",
    "Factor",
    "FeasibilityProblem",
    "Feasible",
    "finite_difference_gradient",
    "format_distribution",
    "format_exact",
    "format_inequality",
    "format_inflation",
    "format_structure",
    "fritz_distribution",
    "fritz_strategy",
    "FrozenCertificate",
    "hyperspherical_probabilities",
    "incidence_matrix",
    "IndeterminateError",
    "Infeasible",
    "inflated_marginal_model",
    "Inflation",
    "injectable_sets",
    "is_injectable",
    "joint_orbits",
    "marginal_orbits",
    "marginal_vector",
    "marginalize",
    "MarginalModel",
    "MarginalScenario",
    "maximize_violation",
    "nelder_mead",
    "NodeId",
    "noise_threshold",
    "noisy_member",
    "NoisyFamily",
    "OptimizationRun",
    "OptimizerOptions",
    "OptResult",
    "OrbitPartition",
    "parameterize_strategy",
    "params_from_unitary",
    "parse_distribution",
    "parse_inequality",
    "parse_inflation",
    "parse_manifest",
    "parse_structure",
    "PermGroup",
    "Permutation",
    "permute_inequality",
    "PolynomialInequality",
    "pvm_from_params",
    "QuantumStrategy",
    "rationalize",
    "read_distribution",
    "Root2",
    "RunManifest",
    "solve_feasibility",
    "SparseIncidence",
    "spengler_unitary",
    "stabilizer_group",
    "StrategyParams",
    "support_pattern",
    "symmetric_incidence",
    "symmetric_vectors",
    "SymmetricReport",
    "symmetrize_inflation",
    "SymmetrizedScenario",
    "test_compatibility",
    "test_compatibility_symmetric",
    "triangle_distribution",
    "triangle_structure",
    "uniform_triangle_distribution",
    "UnitaryParams",
    "verify_certificate",
    "verify_full_compatibility",
    "ViolationReport",
    "wagon_wheel_certificate",
    "wagon_wheel_inequality",
    "write_distribution",
    "__version__",
]
