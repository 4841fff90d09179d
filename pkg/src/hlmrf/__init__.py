"""hlmrf: soft-logic rules compiled to convex hinge energies.

Rules in Lukasiewicz logic ground into weighted hinge-loss potentials
over [0, 1] variables with hard linear constraints. MAP states are found
exactly by consensus ADMM; template weights are learned by approximate
maximum likelihood, pseudolikelihood, or large-margin cutting planes.
"""

from .admm import (
    AdmmConfig,
    ConsensusState,
    HAVE_COMPILED_KERNEL,
    InferenceDiagnostics,
    mpe_infer,
)
from .grounding import (
    ConstraintSpec,
    Database,
    Predicate,
    ground_constraints,
    ground_model,
    ground_templates,
    load_database,
)
from .logic import (
    GroundLiteral,
    GroundRule,
    Literal,
    RuleTemplate,
    luk_conjunction,
    luk_disjunction,
    rule_to_hinge,
    rule_truth,
)
from .model import (
    ConstraintKind,
    GroundModel,
    HingePotential,
    LinearConstraint,
    LinearFunctional,
    check_feasible,
    evaluate_energy,
    evaluate_potential,
    template_features,
)

__version__ = "0.1.0"

__all__ = [
    "AdmmConfig",
    "ConsensusState",
    "ConstraintKind",
    "ConstraintSpec",
    "Database",
    "GroundLiteral",
    "GroundModel",
    "GroundRule",
    "HAVE_COMPILED_KERNEL",
    "HingePotential",
    "InferenceDiagnostics",
    "LinearConstraint",
    "LinearFunctional",
    "Literal",
    "Predicate",
    "RuleTemplate",
    "check_feasible",
    "evaluate_energy",
    "evaluate_potential",
    "ground_constraints",
    "ground_model",
    "ground_templates",
    "load_database",
    "luk_conjunction",
    "luk_disjunction",
    "mpe_infer",
    "rule_to_hinge",
    "rule_truth",
    "template_features",
]
