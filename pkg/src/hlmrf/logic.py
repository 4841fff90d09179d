"""Lukasiewicz soft-logic connectives and the conversion of ground rules
into hinge potentials.

A rule ``B1 & ... & Bk -> H1 | ... | Hm`` is compiled to the affine
functional ``sum(body) - (k - 1) - sum(head)`` (negated literals fold as
``1 - x``), whose positive part is the rule's distance to satisfaction.
The affine form agrees exactly with ``1 - implication truth`` on Boolean
assignments and lower-bounds it everywhere else.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ModelError, StructureError
from .model import HingePotential, LinearFunctional

__all__ = [
    "Variable",
    "Constant",
    "Literal",
    "RuleTemplate",
    "GroundLiteral",
    "GroundRule",
    "luk_conjunction",
    "luk_disjunction",
    "rule_truth",
    "rule_to_hinge",
]


@dataclass(frozen=True)
class Variable:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Constant:
    value: str

    def __str__(self):
        return f"'{self.value}'"


@dataclass(frozen=True)
class Literal:
    predicate: str
    args: tuple
    negated: bool = False

    def variables(self):
        return [t.name for t in self.args if isinstance(t, Variable)]

    def __str__(self):
        inner = f"{self.predicate}({', '.join(str(a) for a in self.args)})"
        return "~" + inner if self.negated else inner


@dataclass(frozen=True)
class RuleTemplate:
    """A weighted rule whose groundings share one template weight.

    ``guards`` are pairs of variable names that must bind to distinct
    constants. Head variables must be bound by the body unless the body
    is empty (priors), in which case they range over their domains.
    """

    body: tuple
    head: tuple
    template_index: int
    exponent: int = 1
    guards: tuple = ()

    def __post_init__(self):
        if not self.body and not self.head:
            raise ModelError("rule must have a nonempty body or head")
        if self.exponent not in (1, 2):
            raise ModelError("rule exponent must be 1 or 2")
        body_vars = {v for lit in self.body for v in lit.variables()}
        head_vars = {v for lit in self.head for v in lit.variables()}
        if self.body and not head_vars <= body_vars:
            loose = sorted(head_vars - body_vars)
            raise ModelError(f"head variables {loose} not bound by the body")
        all_vars = body_vars | head_vars
        for a, b in self.guards:
            if a not in all_vars or b not in all_vars:
                raise ModelError(f"guard {a} != {b} references unknown variables")

    def variables(self):
        seen = []
        for lit in self.body + self.head:
            for v in lit.variables():
                if v not in seen:
                    seen.append(v)
        return seen


@dataclass(frozen=True)
class GroundLiteral:
    """A literal resolved against a database: either a free variable
    index or a fixed observed value, plus the negation flag."""

    variable: int | None
    value: float | None
    negated: bool = False

    def __post_init__(self):
        if (self.variable is None) == (self.value is None):
            raise StructureError("ground literal needs exactly one of variable/value")

    def truth(self, assignment) -> float:
        v = self.value if self.variable is None else float(assignment[self.variable])
        return 1.0 - v if self.negated else v


@dataclass(frozen=True)
class GroundRule:
    body: tuple
    head: tuple


def luk_conjunction(values) -> float:
    """max(sum - (n - 1), 0); 1 for the empty conjunction."""
    values = list(values)
    return max(sum(values) - (len(values) - 1), 0.0)


def luk_disjunction(values) -> float:
    """min(sum, 1); 0 for the empty disjunction."""
    return min(sum(values), 1.0)


def rule_truth(rule: GroundRule, assignment) -> float:
    """Implication truth min(1, 1 - T(body) + T(head)) in [0, 1]."""
    tb = luk_conjunction(lit.truth(assignment) for lit in rule.body)
    th = luk_disjunction(lit.truth(assignment) for lit in rule.head)
    return min(1.0, 1.0 - tb + th)


def rule_to_hinge(rule: GroundRule, exponent: int = 1, template: int = 0) -> HingePotential:
    """Compile a ground rule into a hinge potential.

    The functional is ``sum(body) - (|body| - 1) - sum(head)`` with
    negations folded as ``1 - x`` and observed values folded into the
    constant. Repeated variables accumulate; zero net coefficients drop.
    """
    coeffs: dict[int, float] = {}
    const = -(len(rule.body) - 1)

    def add(lit, sign):
        nonlocal const
        if lit.variable is None:
            v = 1.0 - lit.value if lit.negated else lit.value
            const += sign * v
        elif lit.negated:
            const += sign * 1.0
            coeffs[lit.variable] = coeffs.get(lit.variable, 0.0) - sign
        else:
            coeffs[lit.variable] = coeffs.get(lit.variable, 0.0) + sign

    for lit in rule.body:
        add(lit, +1.0)
    for lit in rule.head:
        add(lit, -1.0)

    terms = sorted((i, c) for i, c in coeffs.items() if c != 0.0)
    return HingePotential(LinearFunctional(terms, const), exponent=exponent, template=template)
