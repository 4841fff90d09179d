"""Line-oriented model language.

    # comment
    predicate: Trusts/2 target
    1.0 squared: Trusts(A, B) & Trusts(B, C) & A != B -> Trusts(A, C)
    learn: Label(A, C) & Cites(A, B) -> Label(B, C)
    learn squared: ~Trusts(A, B)
    constraint functional: Label(Doc, +Cat)

Rule bodies are conjunctions (``&``) of literals and ``X != Y`` guards;
heads are disjunctions (``|``) of literals; ``~`` negates. A rule with
no ``->`` is a head-only prior. Unquoted identifiers are logic
variables; quoted strings are constants. Weighted rules carry a fixed
nonnegative weight, ``learn`` rules are trained.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError
from .grounding import ConstraintSpec, Predicate, ROLE_OBSERVED, ROLE_TARGET
from .logic import Constant, Literal, RuleTemplate, Variable

__all__ = ["ParsedModel", "parse_model_file", "format_model"]

_PREDICATE_RE = re.compile(
    r"^predicate\s*:\s*([A-Za-z_]\w*)\s*/\s*(\d+)\s+(observed|target)\s*$"
)
_CONSTRAINT_RE = re.compile(
    r"^constraint\s+functional\s*:\s*([A-Za-z_]\w*)\s*\((.*)\)\s*$"
)
_LEARN_RE = re.compile(r"^learn(\s+squared)?\s*:\s*(.*)$")
_WEIGHT_RE = re.compile(r"^(-?\d+(?:\.\d*)?(?:[eE][+-]?\d+)?)(\s+squared)?\s*:\s*(.*)$")
_LITERAL_RE = re.compile(r"^(~)?\s*([A-Za-z_]\w*)\s*\((.*)\)$")
_GUARD_RE = re.compile(r"^([A-Za-z_]\w*)\s*!=\s*([A-Za-z_]\w*)$")
_VARIABLE_RE = re.compile(r"^[A-Za-z_]\w*$")


@dataclass
class ParsedModel:
    predicates: list = field(default_factory=list)
    templates: list = field(default_factory=list)
    weights: np.ndarray = field(default_factory=lambda: np.zeros(0))
    learnable: list = field(default_factory=list)
    constraint_specs: list = field(default_factory=list)

    def predicate_map(self):
        return {p.name: p for p in self.predicates}


def _split_args(text, line_no, line):
    """Split on commas outside quotes."""
    args = []
    current = []
    quote = None
    for ch in text:
        if quote:
            if ch == quote:
                quote = None
            current.append(ch)
        elif ch in "'\"":
            quote = ch
            current.append(ch)
        elif ch == ",":
            args.append("".join(current).strip())
            current = []
        else:
            current.append(ch)
    if quote:
        raise ParseError("unterminated quote in argument list", line_no, line.find(text) + 1)
    args.append("".join(current).strip())
    return args


def _parse_term(token, line_no, line):
    if len(token) >= 2 and token[0] in "'\"" and token[-1] == token[0]:
        return Constant(token[1:-1])
    if _VARIABLE_RE.match(token):
        return Variable(token)
    raise ParseError(f"bad term {token!r}", line_no, line.find(token) + 1)


def _parse_literal(text, line_no, line, predicates):
    m = _LITERAL_RE.match(text)
    if not m:
        raise ParseError(f"bad literal {text!r}", line_no, line.find(text) + 1)
    negated, name, arg_text = bool(m.group(1)), m.group(2), m.group(3)
    if name not in predicates:
        raise ParseError(f"undeclared predicate {name}", line_no, line.find(name) + 1)
    args = tuple(
        _parse_term(tok, line_no, line) for tok in _split_args(arg_text, line_no, line)
    )
    if len(args) != predicates[name].arity:
        raise ParseError(
            f"{name} has arity {predicates[name].arity}, literal lists {len(args)} arguments",
            line_no,
            line.find(name) + 1,
        )
    return Literal(name, args, negated)


def _parse_rule_text(text, line_no, line, predicates):
    parts = text.split("->")
    if len(parts) > 2:
        raise ParseError("rule may contain at most one '->'", line_no)
    body_lits, guards = [], []
    if len(parts) == 2:
        body_text, head_text = parts
        for piece in body_text.split("&"):
            piece = piece.strip()
            if not piece:
                raise ParseError("empty body conjunct", line_no)
            g = _GUARD_RE.match(piece)
            if g:
                guards.append((g.group(1), g.group(2)))
            else:
                body_lits.append(_parse_literal(piece, line_no, line, predicates))
    else:
        head_text = parts[0]
    head_lits = []
    for piece in head_text.split("|"):
        piece = piece.strip()
        if not piece:
            raise ParseError("empty head disjunct", line_no)
        head_lits.append(_parse_literal(piece, line_no, line, predicates))
    return tuple(body_lits), tuple(head_lits), tuple(guards)


def parse_model_file(text: str) -> ParsedModel:
    """Parse model text; raises :class:`ParseError` with the source line
    (and a column when one is identifiable)."""
    model = ParsedModel()
    predicates = {}
    weights = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        m = _PREDICATE_RE.match(line)
        if m:
            name, arity, role = m.group(1), int(m.group(2)), m.group(3)
            if name in predicates:
                raise ParseError(f"predicate {name} declared twice", line_no)
            pred = Predicate(name, arity, ROLE_TARGET if role == "target" else ROLE_OBSERVED)
            predicates[name] = pred
            model.predicates.append(pred)
            continue
        m = _CONSTRAINT_RE.match(line)
        if m:
            name, arg_text = m.group(1), m.group(2)
            if name not in predicates:
                raise ParseError(f"undeclared predicate {name}", line_no, line.find(name) + 1)
            tokens = _split_args(arg_text, line_no, line)
            if len(tokens) != predicates[name].arity:
                raise ParseError(f"constraint arity mismatch for {name}", line_no)
            sum_positions = tuple(i for i, t in enumerate(tokens) if t.startswith("+"))
            if not sum_positions:
                raise ParseError("functional constraint needs a '+' argument", line_no)
            for tok in tokens:
                if not _VARIABLE_RE.match(tok.lstrip("+")):
                    raise ParseError(f"bad constraint argument {tok!r}", line_no)
            model.constraint_specs.append(ConstraintSpec(name, sum_positions))
            continue
        m = _LEARN_RE.match(line)
        if m:
            exponent = 2 if m.group(1) else 1
            body, head, guards = _parse_rule_text(m.group(2), line_no, line, predicates)
            idx = len(model.templates)
            model.templates.append(
                _make_template(body, head, idx, exponent, guards, line_no)
            )
            model.learnable.append(idx)
            weights.append(1.0)
            continue
        m = _WEIGHT_RE.match(line)
        if m:
            weight = float(m.group(1))
            if weight < 0:
                raise ParseError(f"negative fixed weight {weight:g}", line_no, 1)
            exponent = 2 if m.group(2) else 1
            body, head, guards = _parse_rule_text(m.group(3), line_no, line, predicates)
            idx = len(model.templates)
            model.templates.append(
                _make_template(body, head, idx, exponent, guards, line_no)
            )
            weights.append(weight)
            continue
        raise ParseError(f"unrecognized line {line!r}", line_no, 1)
    model.weights = np.array(weights, dtype=np.float64)
    return model


def _make_template(body, head, idx, exponent, guards, line_no):
    from .errors import ModelError

    try:
        return RuleTemplate(body, head, idx, exponent, guards)
    except ModelError as exc:
        raise ParseError(str(exc), line_no) from None


def _format_term(term):
    if isinstance(term, Constant):
        return f"'{term.value}'"
    return term.name


def _format_literal(lit):
    inner = f"{lit.predicate}({', '.join(_format_term(t) for t in lit.args)})"
    return ("~" if lit.negated else "") + inner


def format_model(model: ParsedModel) -> str:
    """Canonical text form; parsing it back yields a structurally
    identical model."""
    lines = []
    for p in model.predicates:
        lines.append(f"predicate: {p.name}/{p.arity} {p.role}")
    learnable = set(model.learnable)
    for t in model.templates:
        prefix = "learn" if t.template_index in learnable else repr(
            float(model.weights[t.template_index])
        )
        if t.exponent == 2:
            prefix += " squared"
        pieces = [_format_literal(l) for l in t.body]
        pieces += [f"{a} != {b}" for a, b in t.guards]
        head = " | ".join(_format_literal(l) for l in t.head)
        if t.body or t.guards:
            if not head:
                raise ParseError("cannot format a rule with an empty head")
            lines.append(f"{prefix}: {' & '.join(pieces)} -> {head}")
        else:
            lines.append(f"{prefix}: {head}")
    for spec in model.constraint_specs:
        pred = model.predicate_map()[spec.predicate]
        args = [
            ("+" if i in spec.sum_positions else "") + f"A{i}" for i in range(pred.arity)
        ]
        lines.append(f"constraint functional: {spec.predicate}({', '.join(args)})")
    return "\n".join(lines) + "\n"
