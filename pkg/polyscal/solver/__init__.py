"""
Capillary energy minimization, stability, rigidity and CMC foliations
"""
from .energy import (
    Clearances,
    EnergyReport,
    InfimumProbe,
    check_admissible,
    energy,
    energy_gradient,
    energy_terms,
    infimum_probe,
    is_admissible,
    obstacle_check,
)
from .evolution import EvolutionCheck, evolution_lemma_check, surface_gradient, variation_field
from .foliation import (
    DynamicsLedger,
    FoliationTrace,
    LeafProblem,
    LeafState,
    contact_lengths,
    dynamics_check,
    foliate,
    leaf_solve,
)
from .minimize import MinimizeOptions, certify, check_descent, minimize
from .neumann import neumann_solve
from .rigidity import (
    ComparisonLedger,
    RigidityCertificate,
    check_comparison_hypotheses,
    comparison_verdict,
    rigidity_certificate,
)
from .stability import (
    Eigenpair,
    StabilityOperator,
    assemble,
    lowest_eigenvalues,
    min_eigenvalue,
    quadratic_form,
    stiffness_matrix,
)

__all__ = [
    "Clearances",
    "EnergyReport",
    "InfimumProbe",
    "check_admissible",
    "energy",
    "energy_gradient",
    "energy_terms",
    "infimum_probe",
    "is_admissible",
    "obstacle_check",
    "EvolutionCheck",
    "evolution_lemma_check",
    "surface_gradient",
    "variation_field",
    "DynamicsLedger",
    "FoliationTrace",
    "LeafProblem",
    "LeafState",
    "contact_lengths",
    "dynamics_check",
    "foliate",
    "leaf_solve",
    "MinimizeOptions",
    "certify",
    "check_descent",
    "minimize",
    "neumann_solve",
    "ComparisonLedger",
    "RigidityCertificate",
    "check_comparison_hypotheses",
    "comparison_verdict",
    "rigidity_certificate",
    "Eigenpair",
    "StabilityOperator",
    "assemble",
    "lowest_eigenvalues",
    "min_eigenvalue",
    "quadratic_form",
    "stiffness_matrix",
]
