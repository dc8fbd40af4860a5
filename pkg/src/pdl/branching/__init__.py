"""Subcritical population processes and their quasi-stationary toolkit."""

from .counts import (
    AbsorbedError,
    OffspringDist,
    REFERENCE_DIST,
    bridge_trajectory,
    estimate_g,
    extinction_grid,
    simulate_final_counts,
    step_branching,
    survival_probability,
)
from .genealogy import (
    GenealogyTree,
    conditioned_tree,
    evolve_genealogy,
    o_t_statistics,
    yaglom_trees,
)
from .brw import (
    BrwRun,
    brw_offspring,
    canonical_brw,
    conditioned_brw,
    o_t_statistics_brw,
    simulate_brw,
    step_brw,
    support_diameter,
    walker_jump_counts,
    walker_path,
    yaglom_brw,
)
from .spectral import (
    ConvergenceError,
    SpectralSolution,
    TruncationError,
    build_subgenerator,
    dense_eig_reference,
    q_process_simulate,
    spectral_oracle,
)

__all__ = [
    "AbsorbedError",
    "OffspringDist",
    "REFERENCE_DIST",
    "bridge_trajectory",
    "estimate_g",
    "extinction_grid",
    "simulate_final_counts",
    "step_branching",
    "survival_probability",
    "GenealogyTree",
    "conditioned_tree",
    "evolve_genealogy",
    "o_t_statistics",
    "yaglom_trees",
    "BrwRun",
    "brw_offspring",
    "canonical_brw",
    "conditioned_brw",
    "o_t_statistics_brw",
    "simulate_brw",
    "step_brw",
    "support_diameter",
    "walker_jump_counts",
    "walker_path",
    "yaglom_brw",
    "ConvergenceError",
    "SpectralSolution",
    "TruncationError",
    "build_subgenerator",
    "dense_eig_reference",
    "q_process_simulate",
    "spectral_oracle",
]
