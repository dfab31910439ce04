"""FOND planning models: PDDL subset, grounding and successor semantics."""

from .grounding import (
    EvaluatedState,
    GroundAction,
    GroundedModel,
    applicable,
    evaluate_derived,
    ground,
    successors,
)
from .model import (
    TRUE_CONDITION,
    ActionSchema,
    Atomic,
    Axiom,
    Condition,
    ConditionalEffect,
    Conjunction,
    Disjunction,
    FondDomain,
    FondError,
    FondProblem,
    Implication,
    Negation,
    PredicateSchema,
    check_domain,
    check_problem,
)
from .pddl import (
    PddlSyntaxError,
    format_condition,
    format_key,
    parse_domain,
    parse_problem,
    print_domain,
    print_problem,
)
