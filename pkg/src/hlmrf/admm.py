"""MPE inference by consensus ADMM.

Each hinge potential and each hard constraint owns local copies of the
variables it touches plus Lagrange multipliers; one iteration updates
multipliers, solves every subproblem in closed form (hinge prox or
hyperplane/halfspace projection), then averages copies into the
box-clipped consensus. Convergence requires small primal and dual
residuals and consensus feasibility within the primal tolerance.

The iteration loop runs in the compiled extension ``hlmrf._kernel`` when
it is built, otherwise in the vectorized fallback ``hlmrf._kernel_py``;
both are bit-reproducible. An optional per-variable linear bias can be
added to the objective (used for loss-augmented inference); each biased
variable gets one extra single-variable subproblem.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleModelError, StructureError
from .model import (
    ConstraintKind,
    GroundModel,
    HingePotential,
    LinearConstraint,
    as_weights,
    evaluate_energy,
)
from . import _kernel_py

try:
    from . import _kernel
except ImportError:  # extension not compiled
    _kernel = None

HAVE_COMPILED_KERNEL = _kernel is not None

__all__ = [
    "AdmmConfig",
    "ConsensusState",
    "InferenceDiagnostics",
    "HAVE_COMPILED_KERNEL",
    "mpe_infer",
    "prox_potential",
    "project_constraint",
    "consensus_step",
    "compute_residuals",
]


@dataclass
class AdmmConfig:
    """Solver settings.

    Tolerances are absolute, applied to copy-count-normalized residuals.
    ``kernel`` selects the iteration loop: "auto" prefers the compiled
    extension, "compiled" requires it, "python" forces the fallback.
    ``deterministic`` is accepted for interface stability; both kernels
    iterate sequentially in index order and are always reproducible.
    """

    rho: float = 1.0
    max_iterations: int = 25000
    primal_tolerance: float = 1e-5
    dual_tolerance: float = 1e-5
    deterministic: bool = True
    kernel: str = "auto"

    def __post_init__(self):
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        if self.primal_tolerance <= 0 or self.dual_tolerance <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.kernel not in ("auto", "compiled", "python"):
            raise ValueError(f"unknown kernel {self.kernel!r}")


@dataclass
class ConsensusState:
    """Consensus values plus flat local copies and multipliers.

    ``slot_variables`` records which consensus variable each slot copies;
    it doubles as the structural signature checked on warm starts.
    """

    consensus: np.ndarray
    local: np.ndarray
    multipliers: np.ndarray
    slot_variables: np.ndarray

    def copy(self) -> "ConsensusState":
        return ConsensusState(
            self.consensus.copy(),
            self.local.copy(),
            self.multipliers.copy(),
            self.slot_variables,
        )


@dataclass
class InferenceDiagnostics:
    iterations: int
    primal_residual: float
    dual_residual: float
    converged: bool
    energy: float


@dataclass
class _PackedProblem:
    num_variables: int
    slot_var: np.ndarray
    slot_coef: np.ndarray
    pot_off: np.ndarray
    pot_const: np.ndarray
    pot_lam: np.ndarray
    pot_exp: np.ndarray
    pot_nsq: np.ndarray
    con_off: np.ndarray
    con_const: np.ndarray
    con_eq: np.ndarray
    con_nsq: np.ndarray
    lin_b: np.ndarray


def _pack(model: GroundModel, weights: np.ndarray, linear_bias=None) -> _PackedProblem:
    packed = model.packed
    m = packed.num_potentials
    pot_lam = weights[packed.template] if m else np.zeros(0)

    kept = []
    for c in model.constraints:
        if c.func.norm_sq == 0.0:
            v = c.func.constant
            bad = abs(v) > 1e-12 if c.kind is ConstraintKind.EQUALITY else v < -1e-12
            if bad:
                raise InfeasibleModelError(
                    f"constraint over no variables is violated by {v:g}"
                )
            continue  # trivially satisfied, nothing to project
        kept.append(c)
    r = len(kept)
    sp = int(packed.offsets[-1])
    con_sizes = np.array([c.func.indices.size for c in kept], dtype=np.int64)
    con_off = sp + np.concatenate([[0], np.cumsum(con_sizes)]).astype(np.int64)
    if r:
        con_var = np.concatenate([c.func.indices for c in kept])
        con_coef = np.concatenate([c.func.coeffs for c in kept])
    else:
        con_var = np.zeros(0, dtype=np.int64)
        con_coef = np.zeros(0)
    con_const = np.array([c.func.constant for c in kept], dtype=np.float64)
    con_eq = np.array(
        [c.kind is ConstraintKind.EQUALITY for c in kept], dtype=np.uint8
    )
    con_nsq = np.array([c.func.norm_sq for c in kept], dtype=np.float64)

    if linear_bias is not None:
        bias = np.asarray(linear_bias, dtype=np.float64)
        if bias.shape != (model.num_variables,):
            raise StructureError("linear bias length must match the variable count")
        lin_var = np.nonzero(bias)[0].astype(np.int64)
        lin_b = bias[lin_var]
    else:
        lin_var = np.zeros(0, dtype=np.int64)
        lin_b = np.zeros(0)

    slot_var = np.concatenate([packed.var, con_var, lin_var])
    slot_coef = np.concatenate([packed.coef, con_coef])
    return _PackedProblem(
        model.num_variables,
        slot_var,
        slot_coef,
        packed.offsets,
        packed.const,
        np.ascontiguousarray(pot_lam),
        packed.exponent,
        packed.norm_sq,
        con_off,
        con_const,
        con_eq,
        con_nsq,
        lin_b,
    )


def _fresh_state(prob: _PackedProblem) -> ConsensusState:
    consensus = np.full(prob.num_variables, 0.5)
    return ConsensusState(
        consensus,
        consensus[prob.slot_var].copy(),
        np.zeros(prob.slot_var.size),
        prob.slot_var,
    )


def _select_kernel(name: str):
    if name == "python":
        return _kernel_py
    if name == "compiled":
        if _kernel is None:
            raise RuntimeError("compiled kernel requested but hlmrf._kernel is not built")
        return _kernel
    return _kernel if _kernel is not None else _kernel_py


def mpe_infer(model: GroundModel, weights, config: AdmmConfig | None = None,
              warm: ConsensusState | None = None, linear_bias=None):
    """Minimize the weighted energy over the feasible set.

    Parameters
    ----------
    model, weights:
        The ground model and its nonnegative template weights.
    config:
        :class:`AdmmConfig`; defaults are rho=1, tolerances 1e-5.
    warm:
        A :class:`ConsensusState` from a previous run on a structurally
        identical problem (weights may differ).
    linear_bias:
        Optional length-n vector b adding ``b @ y`` to the objective.

    Returns ``(assignment, state, diagnostics)``. On non-convergence the
    best iterate is returned with ``diagnostics.converged`` False rather
    than raising.
    """
    config = config or AdmmConfig()
    w = as_weights(weights, model)
    prob = _pack(model, w, linear_bias)
    if warm is not None:
        if warm.consensus.shape != (prob.num_variables,) or not np.array_equal(
            warm.slot_variables, prob.slot_var
        ):
            raise StructureError("warm-start state does not match the model structure")
        state = warm.copy()
    else:
        state = _fresh_state(prob)

    kern = _select_kernel(config.kernel)
    iterations, primal, dual, converged = kern.run_admm(
        state.consensus,
        state.local,
        state.multipliers,
        prob.slot_var,
        prob.pot_off,
        prob.pot_const,
        prob.pot_lam,
        prob.pot_exp,
        prob.pot_nsq,
        prob.con_off,
        prob.con_const,
        prob.con_eq,
        prob.con_nsq,
        prob.slot_coef,
        prob.lin_b,
        config.rho,
        config.max_iterations,
        config.primal_tolerance,
        config.dual_tolerance,
    )
    energy = evaluate_energy(model, w, state.consensus)
    diag = InferenceDiagnostics(int(iterations), float(primal), float(dual),
                                bool(converged), energy)
    return state.consensus.copy(), state, diag


def prox_potential(p: HingePotential, lam: float, z, rho: float) -> np.ndarray:
    """Exact proximal step for one hinge potential.

    Minimizes ``lam * max(ell(y), 0)**p + (rho/2) * ||y - z||^2`` over the
    potential's variables (z is restricted to them, in coefficient order).
    """
    if lam < 0 or rho <= 0:
        raise ValueError("need lam >= 0 and rho > 0")
    z = np.asarray(z, dtype=np.float64)
    c = p.ell.coeffs
    if z.shape != c.shape:
        raise StructureError("prox point length must match the potential arity")
    nsq = p.ell.norm_sq
    lz = float(c @ z) + p.ell.constant
    if nsq == 0.0 or lz <= 0.0:
        return z.copy()
    if p.exponent == 1:
        y = z - (lam / rho) * c
    else:
        y = z - (2.0 * lam * lz / (rho + 2.0 * lam * nsq)) * c
    if float(c @ y) + p.ell.constant < 0.0:
        y = z - (lz / nsq) * c
    return y


def project_constraint(k: LinearConstraint, z) -> np.ndarray:
    """Euclidean projection onto the constraint's feasible set."""
    z = np.asarray(z, dtype=np.float64)
    c = k.func.coeffs
    if z.shape != c.shape:
        raise StructureError("projection point length must match the constraint arity")
    nsq = k.func.norm_sq
    v = float(c @ z) + k.func.constant
    if nsq == 0.0:
        violated = abs(v) > 0.0 if k.kind is ConstraintKind.EQUALITY else v < 0.0
        if violated:
            raise InfeasibleModelError("constant constraint cannot be satisfied")
        return z.copy()
    if k.kind is ConstraintKind.INEQUALITY and v >= 0.0:
        return z.copy()
    return z - (v / nsq) * c


def consensus_step(state: ConsensusState, rho: float) -> np.ndarray:
    """Mean of (copy + multiplier/rho) per variable, clipped to [0, 1].

    Variables with no copies keep their current consensus value.
    """
    n = state.consensus.size
    counts = np.bincount(state.slot_variables, minlength=n)
    sums = np.bincount(
        state.slot_variables,
        weights=state.local + state.multipliers / rho,
        minlength=n,
    )
    means = np.clip(sums / np.maximum(counts, 1), 0.0, 1.0)
    return np.where(counts > 0, means, state.consensus)


def compute_residuals(state: ConsensusState, previous_consensus, rho: float):
    """Normalized primal and dual residuals after one iteration."""
    total = state.local.size
    if total == 0:
        return 0.0, 0.0
    inv = 1.0 / np.sqrt(total)
    gaps = state.local - state.consensus[state.slot_variables]
    primal = float(np.linalg.norm(gaps)) * inv
    dual = rho * float(np.linalg.norm(state.consensus - np.asarray(previous_consensus))) * inv
    return primal, dual
