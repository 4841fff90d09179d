"""Instantiate rule templates and functional constraints over a
relational database of observed and target atoms.

Observed predicates follow the closed-world assumption: any atom not
listed has value 0. Grounding is deterministic — templates in order,
substitutions in lexicographic order of the bound constants — and prunes
ground rules whose hinge is identically zero on the unit box.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DataError, ModelError
from .logic import Constant, GroundLiteral, GroundRule, Variable, rule_to_hinge
from .model import ConstraintKind, GroundModel, LinearConstraint, LinearFunctional

__all__ = [
    "Predicate",
    "ConstraintSpec",
    "Database",
    "load_database",
    "ground_templates",
    "ground_constraints",
    "ground_model",
]

ROLE_OBSERVED = "observed"
ROLE_TARGET = "target"


@dataclass(frozen=True)
class Predicate:
    name: str
    arity: int
    role: str = ROLE_OBSERVED

    def __post_init__(self):
        if self.arity < 1:
            raise ModelError(f"predicate {self.name} must have arity >= 1")
        if self.role not in (ROLE_OBSERVED, ROLE_TARGET):
            raise ModelError(f"unknown predicate role {self.role!r}")


@dataclass(frozen=True)
class ConstraintSpec:
    """One functional-sum constraint family: atoms of ``predicate`` that
    agree on the non-summed argument positions must sum to one."""

    predicate: str
    sum_positions: tuple
    kind: str = "functional_sum"


@dataclass
class Database:
    """Observed atom values, target atom indices, and per-position
    constant universes for a set of declared predicates."""

    predicates: dict
    observed: dict = field(default_factory=dict)
    targets: dict = field(default_factory=dict)
    target_atoms: list = field(default_factory=list)
    universes: dict = field(default_factory=dict)

    @property
    def num_variables(self) -> int:
        return len(self.target_atoms)

    @classmethod
    def build(cls, predicates, observed_atoms=(), target_atoms=()):
        """Assemble a database, assigning target atoms free-variable
        indices in sorted (predicate, constants) order."""
        preds = {p.name: p for p in predicates}
        observed = {}
        for name, args, value in observed_atoms:
            args = tuple(str(a) for a in args)
            _check_atom(preds, name, args)
            if not 0.0 <= value <= 1.0:
                raise DataError(f"{name}{args} has value {value} outside [0, 1]")
            if (name, args) in observed:
                raise DataError(f"duplicate observed atom {name}{args}")
            observed[(name, args)] = float(value)
        targets = {}
        atoms = []
        for name, args in target_atoms:
            args = tuple(str(a) for a in args)
            _check_atom(preds, name, args)
            if preds[name].role != ROLE_TARGET:
                raise DataError(f"target declaration for non-target predicate {name}")
            if (name, args) in targets:
                raise DataError(f"duplicate target atom {name}{args}")
            if (name, args) in observed:
                raise DataError(f"atom {name}{args} is both observed and a target")
            targets[(name, args)] = -1
            atoms.append((name, args))
        atoms.sort()
        for i, key in enumerate(atoms):
            targets[key] = i
        universes = {}
        for (name, args) in itertools.chain(observed, targets):
            for pos, c in enumerate(args):
                universes.setdefault((name, pos), set()).add(c)
        universes = {k: tuple(sorted(v)) for k, v in universes.items()}
        return cls(preds, observed, targets, atoms, universes)

    def resolve(self, name, args) -> GroundLiteral:
        """Resolve an atom to a free variable or an observed value
        (closed world: unlisted atoms are 0)."""
        key = (name, tuple(args))
        idx = self.targets.get(key)
        if idx is not None:
            return GroundLiteral(variable=idx, value=None)
        return GroundLiteral(variable=None, value=self.observed.get(key, 0.0))

    def domain(self, name, pos):
        return self.universes.get((name, pos), ())


def _check_atom(preds, name, args):
    if name not in preds:
        raise DataError(f"atom references undeclared predicate {name}")
    if len(args) != preds[name].arity:
        raise DataError(
            f"{name} has arity {preds[name].arity} but atom lists {len(args)} arguments"
        )


def _read_rows(path: Path):
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            yield lineno, line.split("\t")


def load_database(predicates, data_dir) -> Database:
    """Load ``<name>.tsv`` per predicate plus ``targets.tsv``.

    Data rows are tab-separated constants with an optional trailing value
    column in [0, 1]; a missing value column means 1.0. Target rows are
    ``predicate<TAB>arg1<TAB>...``.
    """
    data_dir = Path(data_dir)
    observed = []
    for pred in predicates:
        path = data_dir / f"{pred.name}.tsv"
        if not path.exists():
            continue
        for lineno, cols in _read_rows(path):
            cols = [c.strip() for c in cols]
            if len(cols) == pred.arity:
                value = 1.0
            elif len(cols) == pred.arity + 1:
                try:
                    value = float(cols[-1])
                except ValueError:
                    raise DataError(f"{path}:{lineno}: bad value {cols[-1]!r}") from None
                cols = cols[:-1]
            else:
                raise DataError(
                    f"{path}:{lineno}: expected {pred.arity} or {pred.arity + 1} "
                    f"columns, got {len(cols)}"
                )
            observed.append((pred.name, tuple(cols), value))
    targets = []
    tpath = data_dir / "targets.tsv"
    if tpath.exists():
        for lineno, cols in _read_rows(tpath):
            cols = [c.strip() for c in cols]
            if len(cols) < 2:
                raise DataError(f"{tpath}:{lineno}: target rows need a predicate and arguments")
            targets.append((cols[0], tuple(cols[1:])))
    try:
        return Database.build(predicates, observed, targets)
    except DataError as exc:
        raise DataError(f"{data_dir}: {exc}") from None


def _substitutions(template, db):
    """Lexicographic substitutions of the template's variables."""
    names = template.variables()
    domains = {}
    for lit in template.body + template.head:
        for pos, term in enumerate(lit.args):
            if isinstance(term, Variable):
                dom = set(db.domain(lit.predicate, pos))
                if term.name in domains:
                    domains[term.name] &= dom
                else:
                    domains[term.name] = dom
    ordered = [sorted(domains.get(v, ())) for v in names]
    if any(not d for d in ordered):
        return
    for combo in itertools.product(*ordered):
        binding = dict(zip(names, combo))
        if any(binding[a] == binding[b] for a, b in template.guards):
            continue
        yield binding


def _resolve_literal(lit, binding, db) -> GroundLiteral:
    args = []
    for term in lit.args:
        if isinstance(term, Variable):
            args.append(binding[term.name])
        elif isinstance(term, Constant):
            args.append(term.value)
        else:
            raise ModelError(f"unsupported term {term!r}")
    gl = db.resolve(lit.predicate, args)
    return GroundLiteral(variable=gl.variable, value=gl.value, negated=lit.negated)


def ground_templates(templates, db: Database) -> GroundModel:
    """Ground every template over the database.

    Produces one hinge potential per substitution, pruning those that are
    identically zero on the box (e.g. a body atom observed at 0). The
    returned model carries no constraints; see :func:`ground_constraints`.
    """
    templates = list(templates)
    for i, t in enumerate(templates):
        if t.template_index != i:
            raise ModelError("template indices must be consecutive from 0")
    potentials = []
    for template in templates:
        for binding in _substitutions(template, db):
            rule = GroundRule(
                body=tuple(_resolve_literal(l, binding, db) for l in template.body),
                head=tuple(_resolve_literal(l, binding, db) for l in template.head),
            )
            hinge = rule_to_hinge(rule, template.exponent, template.template_index)
            if hinge.ell.max_over_box() <= 0.0:
                continue
            potentials.append(hinge)
    return GroundModel(
        db.num_variables, potentials, (), template_count=len(templates)
    )


def ground_constraints(specs, db: Database):
    """One sum-to-one equality per block of target atoms sharing the
    non-summed argument values."""
    constraints = []
    for spec in specs:
        pred = db.predicates.get(spec.predicate)
        if pred is None:
            raise ModelError(f"constraint references undeclared predicate {spec.predicate}")
        if pred.role != ROLE_TARGET:
            raise ModelError(f"functional constraint on non-target predicate {pred.name}")
        sum_pos = set(spec.sum_positions)
        if not sum_pos or any(p < 0 or p >= pred.arity for p in sum_pos):
            raise ModelError(f"bad summed positions {spec.sum_positions} for {pred.name}")
        group_pos = [p for p in range(pred.arity) if p not in sum_pos]
        blocks = {}
        for (name, args) in db.target_atoms:
            if name != spec.predicate:
                continue
            key = tuple(args[p] for p in group_pos)
            blocks.setdefault(key, []).append(db.targets[(name, args)])
        for key in sorted(blocks):
            idxs = blocks[key]
            if not idxs:
                raise ModelError(f"empty constraint block for {spec.predicate} {key}")
            func = LinearFunctional([(i, 1.0) for i in sorted(idxs)], -1.0)
            constraints.append(LinearConstraint(func, ConstraintKind.EQUALITY))
    return constraints


def ground_model(templates, specs, db: Database) -> GroundModel:
    """Ground templates and constraints into one model."""
    base = ground_templates(templates, db)
    constraints = ground_constraints(specs, db)
    return GroundModel(
        db.num_variables, base.potentials, constraints, template_count=base.template_count
    )
