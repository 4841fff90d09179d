"""Core model objects: sparse linear functionals, hinge potentials,
linear constraints and the ground model, plus pure energy evaluation.

Assignments and template weight vectors are plain float64 numpy arrays;
the helpers :func:`as_assignment` and :func:`as_weights` validate them
against a model.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import StructureError

__all__ = [
    "LinearFunctional",
    "HingePotential",
    "ConstraintKind",
    "LinearConstraint",
    "GroundModel",
    "as_assignment",
    "as_weights",
    "evaluate_potential",
    "evaluate_energy",
    "template_features",
    "check_feasible",
]


class LinearFunctional:
    """Sparse affine function ``sum_k coeffs[k] * y[indices[k]] + constant``.

    Variable indices must be unique; a functional with no terms is a
    constant. Observed inputs are folded into ``constant`` at grounding
    time, so evaluation only ever sees free variables.
    """

    __slots__ = ("indices", "coeffs", "constant")

    def __init__(self, terms=(), constant=0.0):
        terms = list(terms)
        idx = np.array([int(i) for i, _ in terms], dtype=np.int64)
        if idx.size != np.unique(idx).size:
            raise StructureError("duplicate variable index in linear functional")
        if idx.size and idx.min() < 0:
            raise StructureError("negative variable index in linear functional")
        self.indices = idx
        self.coeffs = np.array([float(c) for _, c in terms], dtype=np.float64)
        self.constant = float(constant)

    def value(self, values: np.ndarray) -> float:
        if self.indices.size == 0:
            return self.constant
        return float(self.coeffs @ values[self.indices]) + self.constant

    @property
    def norm_sq(self) -> float:
        return float(self.coeffs @ self.coeffs)

    def max_over_box(self) -> float:
        """Maximum of the functional over the unit box [0, 1]^n."""
        return self.constant + float(np.maximum(self.coeffs, 0.0).sum())

    def terms(self):
        return list(zip(self.indices.tolist(), self.coeffs.tolist()))

    def __repr__(self):
        parts = [f"{c:+g}*y{i}" for i, c in self.terms()]
        parts.append(f"{self.constant:+g}")
        return "LinearFunctional(" + " ".join(parts) + ")"


@dataclass(frozen=True)
class HingePotential:
    """Potential ``max(ell, 0) ** exponent`` with exponent 1 or 2.

    ``template`` names the weight-sharing group the potential belongs to.
    """

    ell: LinearFunctional
    exponent: int = 1
    template: int = 0

    def __post_init__(self):
        if self.exponent not in (1, 2):
            raise StructureError(f"hinge exponent must be 1 or 2, got {self.exponent}")
        if self.template < 0:
            raise StructureError("negative template index")


class ConstraintKind(enum.Enum):
    EQUALITY = "equality"      # func == 0
    INEQUALITY = "inequality"  # func >= 0


@dataclass(frozen=True)
class LinearConstraint:
    func: LinearFunctional
    kind: ConstraintKind = ConstraintKind.EQUALITY

    def violation(self, values: np.ndarray) -> float:
        v = self.func.value(values)
        if self.kind is ConstraintKind.EQUALITY:
            return abs(v)
        return max(-v, 0.0)


class _PackedPotentials:
    """Flat array view of a potential list for vectorized evaluation."""

    def __init__(self, potentials, num_variables, template_count):
        m = len(potentials)
        sizes = np.array([p.ell.indices.size for p in potentials], dtype=np.int64)
        self.offsets = np.zeros(m + 1, dtype=np.int64)
        np.cumsum(sizes, out=self.offsets[1:])
        if m:
            self.var = np.concatenate([p.ell.indices for p in potentials])
            self.coef = np.concatenate([p.ell.coeffs for p in potentials])
        else:
            self.var = np.zeros(0, dtype=np.int64)
            self.coef = np.zeros(0, dtype=np.float64)
        self.slot_pot = np.repeat(np.arange(m, dtype=np.int64), sizes)
        self.const = np.array([p.ell.constant for p in potentials], dtype=np.float64)
        self.exponent = np.array([p.exponent for p in potentials], dtype=np.int8)
        self.template = np.array([p.template for p in potentials], dtype=np.int64)
        self.norm_sq = np.bincount(
            self.slot_pot, weights=self.coef * self.coef, minlength=m
        ).astype(np.float64, copy=False)
        self.num_potentials = m
        self.num_variables = num_variables
        self.template_count = template_count

    def ell_values(self, values: np.ndarray) -> np.ndarray:
        prods = self.coef * values[self.var]
        sums = np.bincount(self.slot_pot, weights=prods, minlength=self.num_potentials)
        return sums.astype(np.float64, copy=False) + self.const

    def potential_values(self, values: np.ndarray) -> np.ndarray:
        lv = np.maximum(self.ell_values(values), 0.0)
        return np.where(self.exponent == 2, lv * lv, lv)


class GroundModel:
    """A grounded energy model: free variables, hinge potentials grouped
    into weight-sharing templates, and hard linear constraints.

    Immutable after construction; safe to share across threads.
    """

    def __init__(self, num_variables, potentials, constraints=(), template_count=None):
        self.num_variables = int(num_variables)
        if self.num_variables < 0:
            raise StructureError("negative variable count")
        self.potentials = tuple(potentials)
        self.constraints = tuple(constraints)
        max_tmpl = max((p.template for p in self.potentials), default=-1)
        if template_count is None:
            template_count = max_tmpl + 1
        self.template_count = int(template_count)
        if max_tmpl >= self.template_count:
            raise StructureError(
                f"potential references template {max_tmpl} but model has "
                f"{self.template_count} templates"
            )
        for p in self.potentials:
            self._check_indices(p.ell)
        for c in self.constraints:
            self._check_indices(c.func)
        partition = [[] for _ in range(self.template_count)]
        for j, p in enumerate(self.potentials):
            partition[p.template].append(j)
        self.template_partition = tuple(tuple(g) for g in partition)
        self.grounding_counts = np.array([len(g) for g in self.template_partition], dtype=np.int64)
        self._packed = None

    def _check_indices(self, func):
        if func.indices.size and func.indices.max() >= self.num_variables:
            raise StructureError(
                f"variable index {int(func.indices.max())} out of range for "
                f"model with {self.num_variables} variables"
            )

    @property
    def packed(self) -> _PackedPotentials:
        if self._packed is None:
            self._packed = _PackedPotentials(
                self.potentials, self.num_variables, self.template_count
            )
        return self._packed

    def __repr__(self):
        return (
            f"GroundModel(n={self.num_variables}, potentials={len(self.potentials)}, "
            f"constraints={len(self.constraints)}, templates={self.template_count})"
        )


def as_assignment(values, model: GroundModel) -> np.ndarray:
    a = np.asarray(values, dtype=np.float64)
    if a.shape != (model.num_variables,):
        raise StructureError(
            f"assignment has shape {a.shape}, expected ({model.num_variables},)"
        )
    return a


def as_weights(weights, model: GroundModel) -> np.ndarray:
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (model.template_count,):
        raise StructureError(
            f"weight vector has shape {w.shape}, expected ({model.template_count},)"
        )
    if w.size and w.min() < 0:
        raise StructureError("template weights must be nonnegative")
    return w


def evaluate_potential(p: HingePotential, values) -> float:
    """Value of one hinge potential at an assignment; always >= 0."""
    a = np.asarray(values, dtype=np.float64)
    if p.ell.indices.size and p.ell.indices.max() >= a.size:
        raise StructureError("potential references a variable outside the assignment")
    v = max(p.ell.value(a), 0.0)
    return v * v if p.exponent == 2 else v


def template_features(model: GroundModel, values) -> np.ndarray:
    """Per-template sums of potential values (the feature vector)."""
    a = as_assignment(values, model)
    packed = model.packed
    phi = packed.potential_values(a)
    feats = np.bincount(packed.template, weights=phi, minlength=model.template_count)
    return feats.astype(np.float64, copy=False)


def evaluate_energy(model: GroundModel, weights, values) -> float:
    """Weighted energy ``dot(weights, template_features)``."""
    w = as_weights(weights, model)
    return float(np.dot(w, template_features(model, values)))


def check_feasible(model: GroundModel, values, tol: float):
    """Check box and constraint feasibility.

    Returns ``(feasible, max_violation)`` where the violation includes
    how far any coordinate leaves [0, 1].
    """
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    a = as_assignment(values, model)
    box = 0.0
    if a.size:
        box = max(float(np.maximum(a - 1.0, 0.0).max()), float(np.maximum(-a, 0.0).max()))
    worst = box
    for c in model.constraints:
        worst = max(worst, c.violation(a))
    return worst <= tol, worst
