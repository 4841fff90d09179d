"""Weight learning by fixed-step projected gradient ("voted perceptron"):
approximate maximum likelihood with the MPE state standing in for the
model expectation, and maximum pseudolikelihood with Monte-Carlo
conditional expectations.

Both gradient routines return the ascent direction of the corresponding
log objective — (features at the model's preferred state) minus
(features at the truth) — and the trainers step along it, projecting
weights back onto the nonnegative orthant after every step.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .admm import AdmmConfig, mpe_infer
from .errors import NumericsError, StructureError
from .model import ConstraintKind, GroundModel, as_assignment, as_weights, template_features

__all__ = [
    "PerceptronConfig",
    "MpleConfig",
    "mle_gradient",
    "mle_train",
    "conditional_expectation",
    "mple_gradient",
    "mple_train",
]

# potential evaluations performed by the most recent mple_gradient call;
# read by tests checking the linear-cost contract
last_mple_evaluations = 0


@dataclass
class PerceptronConfig:
    steps: int = 100
    step_size: float = 1.0
    scale_by_groundings: bool = True
    average_iterates: bool = True

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be at least 1")
        if self.step_size <= 0:
            raise ValueError("step size must be positive")


@dataclass
class MpleConfig:
    samples_per_variable: int = 1000
    seed: int = 0
    block_constraints: bool = True

    def __post_init__(self):
        if self.samples_per_variable < 2:
            raise ValueError("need at least 2 samples per variable")


def _scaled(grad, model, enabled):
    if not enabled:
        return grad
    return grad / np.maximum(model.grounding_counts, 1)


# ---------------------------------------------------------------------------
# MPE-approximate maximum likelihood


def mle_gradient(model: GroundModel, truth, weights, infer_config: AdmmConfig | None = None,
                 scale_by_groundings: bool = False, warm=None):
    """Log-likelihood ascent direction: features at the MPE state minus
    features at the truth, optionally divided per template by its
    grounding count. Non-convergence warns and uses the best iterate."""
    truth = as_assignment(truth, model)
    w = as_weights(weights, model)
    mpe, _, diag = mpe_infer(model, w, infer_config, warm=warm)
    if not diag.converged:
        warnings.warn("inference did not converge; gradient uses the best iterate")
    grad = template_features(model, mpe) - template_features(model, truth)
    return _scaled(grad, model, scale_by_groundings)


def _learn_mask(model, learnable):
    if learnable is None:
        return np.ones(model.template_count, dtype=bool)
    mask = np.zeros(model.template_count, dtype=bool)
    mask[np.asarray(learnable, dtype=np.int64)] = True
    return mask


def mle_train(model: GroundModel, truth, config: PerceptronConfig | None = None,
              infer_config: AdmmConfig | None = None, initial_weights=None,
              learnable=None):
    """Fixed-step projected ascent on the MPE-approximate log-likelihood.

    Inference is warm-started across steps. Returns the average of the
    post-projection iterates when averaging is enabled (the
    initialization is excluded), else the final iterate. ``learnable``
    optionally restricts updates to a subset of template indices.
    """
    config = config or PerceptronConfig()
    truth = as_assignment(truth, model)
    if initial_weights is None:
        w = np.ones(model.template_count)
    else:
        w = as_weights(initial_weights, model).copy()
    mask = _learn_mask(model, learnable)
    feats_truth = template_features(model, truth)
    warm = None
    total = np.zeros_like(w)
    for _ in range(config.steps):
        mpe, warm, _ = mpe_infer(model, w, infer_config, warm=warm)
        grad = template_features(model, mpe) - feats_truth
        grad = _scaled(grad, model, config.scale_by_groundings)
        w = np.where(mask, np.maximum(w + config.step_size * grad, 0.0), w)
        total += w
    return total / config.steps if config.average_iterates else w


# ---------------------------------------------------------------------------
# Maximum pseudolikelihood


def _variable_blocks(model: GroundModel, block_constraints: bool):
    """Singleton blocks for unconstrained variables plus one block per
    sum-to-one equality constraint."""
    in_block = np.full(model.num_variables, -1, dtype=np.int64)
    blocks = []
    for c in model.constraints:
        if not block_constraints:
            raise StructureError(
                "model has constraints; enable block_constraints to use MPLE"
            )
        sum_to_one = (
            c.kind is ConstraintKind.EQUALITY
            and np.all(c.func.coeffs == 1.0)
            and c.func.constant == -1.0
        )
        if not sum_to_one:
            raise StructureError(
                "pseudolikelihood supports only sum-to-one equality constraints"
            )
        idx = np.sort(c.func.indices)
        if np.any(in_block[idx] >= 0):
            raise StructureError("constraint blocks must be disjoint for MPLE")
        in_block[idx] = len(blocks)
        blocks.append(idx)
    for i in range(model.num_variables):
        if in_block[i] < 0:
            blocks.append(np.array([i], dtype=np.int64))
    return blocks


class _BlockPayload:
    """Per-block data that stays fixed across training steps: the touching
    potentials as affine functions of the block, and truth-side sums."""

    __slots__ = ("block", "a_mat", "b_vec", "exponent", "template", "truth_sums")

    def __init__(self, model, truth, block):
        packed = model.packed
        js = np.unique(packed.slot_pot[np.isin(packed.var, block)])
        self.block = block
        pos = {int(v): k for k, v in enumerate(block)}
        self.a_mat = np.zeros((js.size, block.size))
        self.b_vec = np.zeros(js.size)
        for row, j in enumerate(js):
            p = model.potentials[j]
            b = p.ell.constant
            for idx, coef in zip(p.ell.indices, p.ell.coeffs):
                if int(idx) in pos:
                    self.a_mat[row, pos[int(idx)]] += coef
                else:
                    b += coef * truth[idx]
            self.b_vec[row] = b
        self.exponent = np.array([model.potentials[j].exponent for j in js])
        self.template = np.array([model.potentials[j].template for j in js], dtype=np.int64)
        lv = np.maximum(self.a_mat @ truth[block] + self.b_vec, 0.0)
        phi = np.where(self.exponent == 2, lv * lv, lv)
        self.truth_sums = np.zeros(model.template_count)
        np.add.at(self.truth_sums, self.template, phi)

    @property
    def num_potentials(self):
        return self.b_vec.size

    def sample(self, rng, count):
        if self.block.size == 1:
            return rng.random((count, 1))
        # uniform on the probability simplex via normalized exponentials
        e = rng.exponential(size=(count, self.block.size))
        return e / e.sum(axis=1, keepdims=True)

    def expectation(self, w, samples, template_count):
        """Self-normalized estimate of per-template local sums under the
        conditional density exp(-local energy)."""
        lv = np.maximum(samples @ self.a_mat.T + self.b_vec, 0.0)
        phi = np.where(self.exponent == 2, lv * lv, lv)
        f = phi @ w[self.template]
        mc_w = np.exp(-(f - f.min()))
        denom = mc_w.sum()
        if denom <= 0.0 or not np.isfinite(denom):
            raise NumericsError("conditional sampling weights vanished")
        expected = np.zeros(template_count)
        np.add.at(expected, self.template, (phi.T @ mc_w) / denom)
        return expected, phi.size


def _prepare_blocks(model, truth, block_constraints):
    blocks = _variable_blocks(model, block_constraints)
    return [_BlockPayload(model, truth, b) for b in blocks]


def conditional_expectation(model: GroundModel, truth, weights, block,
                            config: MpleConfig | None = None):
    """Expected per-template local potential sums for one variable or one
    sum-to-one block, every other variable fixed at the truth."""
    config = config or MpleConfig()
    truth = as_assignment(truth, model)
    w = as_weights(weights, model)
    block = np.atleast_1d(np.asarray(block, dtype=np.int64))
    if block.size > 1 and not config.block_constraints:
        raise StructureError("block sampling disabled but a block was given")
    payload = _BlockPayload(model, truth, block)
    if payload.num_potentials == 0:
        return np.zeros(model.template_count)
    rng = np.random.default_rng(config.seed)
    samples = payload.sample(rng, config.samples_per_variable)
    expected, _ = payload.expectation(w, samples, model.template_count)
    return expected


def _gradient_from_payloads(payloads, w, config, template_count):
    global last_mple_evaluations
    grad = np.zeros(template_count)
    seeds = np.random.SeedSequence(config.seed).spawn(len(payloads))
    evals = 0
    for payload, seed in zip(payloads, seeds):
        if payload.num_potentials == 0:
            continue
        rng = np.random.default_rng(seed)
        samples = payload.sample(rng, config.samples_per_variable)
        expected, count = payload.expectation(w, samples, template_count)
        evals += count
        grad += expected - payload.truth_sums
    last_mple_evaluations = evals
    return grad


def mple_gradient(model: GroundModel, truth, weights, config: MpleConfig | None = None):
    """Log-pseudolikelihood ascent direction.

    Sums, over variables (blocked by sum-to-one constraints), the
    conditional expectation of each template's local potential sum minus
    the same sum at the truth. Needs no inference; cost is linear in
    (touching potential slots) x (samples per variable), and the result
    is bit-reproducible for a fixed seed.
    """
    config = config or MpleConfig()
    truth = as_assignment(truth, model)
    w = as_weights(weights, model)
    payloads = _prepare_blocks(model, truth, config.block_constraints)
    return _gradient_from_payloads(payloads, w, config, model.template_count)


def mple_train(model: GroundModel, truth, config: PerceptronConfig | None = None,
               mple_config: MpleConfig | None = None, initial_weights=None,
               learnable=None):
    """Fixed-step projected ascent on the log-pseudolikelihood."""
    config = config or PerceptronConfig()
    mple_config = mple_config or MpleConfig()
    truth = as_assignment(truth, model)
    if initial_weights is None:
        w = np.ones(model.template_count)
    else:
        w = as_weights(initial_weights, model).copy()
    mask = _learn_mask(model, learnable)
    payloads = _prepare_blocks(model, truth, mple_config.block_constraints)
    step_seeds = np.random.SeedSequence(mple_config.seed).spawn(config.steps)
    total = np.zeros_like(w)
    for step in range(config.steps):
        step_cfg = MpleConfig(
            samples_per_variable=mple_config.samples_per_variable,
            seed=int(step_seeds[step].generate_state(1)[0]),
            block_constraints=mple_config.block_constraints,
        )
        grad = _gradient_from_payloads(payloads, w, step_cfg, model.template_count)
        grad = _scaled(grad, model, config.scale_by_groundings)
        w = np.where(mask, np.maximum(w + config.step_size * grad, 0.0), w)
        total += w
    return total / config.steps if config.average_iterates else w
