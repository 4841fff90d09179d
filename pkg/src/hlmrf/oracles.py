"""Independent oracles and seeded instance generators for the test suite.

The MPE oracle shares no code path with the ADMM solver: it scans a
feasible grid of the box, repairs the best point to exact feasibility,
and polishes it with a feasibility-preserving pattern search. The
conditional-expectation oracle integrates by composite Simpson rule with
splits at hinge kinks. Synthetic tasks provide desk-scale stand-ins for
collective classification and signed-trust prediction.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleModelError, NumericsError
from .grounding import (
    ConstraintSpec,
    Database,
    Predicate,
    ROLE_OBSERVED,
    ROLE_TARGET,
    ground_model,
)
from .logic import Constant, GroundLiteral, GroundRule, Literal, RuleTemplate, Variable, rule_to_hinge
from .model import (
    ConstraintKind,
    GroundModel,
    HingePotential,
    LinearConstraint,
    LinearFunctional,
    as_assignment,
    as_weights,
    evaluate_energy,
)

__all__ = [
    "GeneratorConfig",
    "brute_force_mpe",
    "brute_force_minimum",
    "quadrature_conditional",
    "quadrature_log_pseudolikelihood",
    "finite_diff_gradient",
    "generate_random_model",
    "generate_citation_task",
    "generate_trust_task",
    "generate_synthetic_tasks",
    "generate_perf_model",
    "TaskInstance",
    "SyntheticTask",
]

_EQ_TOL = 1e-10
_INEQ_TOL = 1e-10


# ---------------------------------------------------------------------------
# Brute-force MPE oracle


def _feasible(model, x, eq_tol=_EQ_TOL, ineq_tol=_INEQ_TOL):
    if x.min() < -1e-12 or x.max() > 1.0 + 1e-12:
        return False
    for c in model.constraints:
        v = c.func.value(x)
        if c.kind is ConstraintKind.EQUALITY:
            if abs(v) > eq_tol:
                return False
        elif v < -ineq_tol:
            return False
    return True


def _repair_feasible(model, x, rounds=200):
    """Move a near-feasible point onto the exact feasible set.

    Sum-to-one equality blocks use the exact simplex projection; anything
    else alternates hyperplane/halfspace projections with box clipping.
    """
    x = np.clip(np.asarray(x, dtype=np.float64), 0.0, 1.0)
    for _ in range(rounds):
        for c in model.constraints:
            idx = c.func.indices
            v = c.func.value(x)
            if c.kind is ConstraintKind.EQUALITY:
                if abs(v) <= 1e-14:
                    continue
                if np.all(c.func.coeffs == 1.0) and c.func.constant == -1.0:
                    x[idx] = _project_simplex(x[idx])
                else:
                    x[idx] -= (v / c.func.norm_sq) * c.func.coeffs
            elif v < 0.0:
                x[idx] -= (v / c.func.norm_sq) * c.func.coeffs
        x = np.clip(x, 0.0, 1.0)
        if _feasible(model, x, eq_tol=1e-12, ineq_tol=1e-12):
            return x
    if _feasible(model, x, eq_tol=1e-9, ineq_tol=1e-9):
        return x
    raise NumericsError("could not repair grid point to exact feasibility")


def _project_simplex(v):
    """Euclidean projection onto {x >= 0, sum(x) = 1} (sort-based)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    rho_idx = np.nonzero(u - css / np.arange(1, v.size + 1) > 0)[0]
    theta = css[rho_idx[-1]] / (rho_idx[-1] + 1.0)
    return np.maximum(v - theta, 0.0)


def _pattern_search(objective, model, x, step, min_step=1e-6):
    n = x.size
    dirs = []
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        dirs.append(e)
        dirs.append(-e)
    for i, j in itertools.combinations(range(n), 2):
        for si, sj in ((1, -1), (-1, 1), (1, 1), (-1, -1)):
            e = np.zeros(n)
            e[i], e[j] = si, sj
            dirs.append(e)
    best = objective(x)
    delta = step
    while delta >= min_step:
        improved = False
        for d in dirs:
            y = x + delta * d
            if y.min() < 0.0 or y.max() > 1.0:
                continue
            if not _feasible(model, y):
                continue
            val = objective(y)
            if val < best - 1e-15:
                x, best = y, val
                improved = True
        if not improved:
            delta *= 0.5
    return x, best


def brute_force_minimum(model: GroundModel, objective, grid_step: float):
    """Minimize an arbitrary objective over the feasible box by grid scan
    plus feasibility-preserving pattern-search refinement."""
    n = model.num_variables
    if n > 4:
        raise ValueError("grid oracle limited to 4 variables")
    if n == 0:
        return np.zeros(0), objective(np.zeros(0))
    steps = int(round(1.0 / grid_step))
    axis = np.linspace(0.0, 1.0, steps + 1)
    grid = np.stack(
        [g.ravel() for g in np.meshgrid(*([axis] * n), indexing="ij")], axis=1
    )
    mask = np.ones(grid.shape[0], dtype=bool)
    for c in model.constraints:
        v = grid[:, c.func.indices] @ c.func.coeffs + c.func.constant
        if c.kind is ConstraintKind.EQUALITY:
            mask &= np.abs(v) <= grid_step
        else:
            mask &= v >= -grid_step
    if not mask.any():
        raise InfeasibleModelError("no feasible grid point")
    pts = grid[mask]
    vals = np.array([objective(p) for p in pts])
    x = _repair_feasible(model, pts[int(np.argmin(vals))])
    x, best = _pattern_search(objective, model, x, grid_step)
    x = _repair_feasible(model, x)
    return x, objective(x)


def _grid_energies(model, weights, pts):
    packed = model.packed
    total = np.zeros(pts.shape[0])
    for j in range(packed.num_potentials):
        s, e = packed.offsets[j], packed.offsets[j + 1]
        lv = pts[:, packed.var[s:e]] @ packed.coef[s:e] + packed.const[j]
        np.maximum(lv, 0.0, out=lv)
        if packed.exponent[j] == 2:
            lv *= lv
        total += weights[packed.template[j]] * lv
    return total


def brute_force_mpe(model: GroundModel, weights, grid_step: float):
    """Grid-plus-refinement minimizer of the energy.

    The returned energy is evaluated at an exactly feasible point so it
    upper-bounds the true minimum, within O(grid_step) of it.
    """
    w = as_weights(weights, model)
    n = model.num_variables
    if n > 4:
        raise ValueError("grid oracle limited to 4 variables")
    if n == 0:
        return np.zeros(0), 0.0
    steps = int(round(1.0 / grid_step))
    axis = np.linspace(0.0, 1.0, steps + 1)
    grid = np.stack(
        [g.ravel() for g in np.meshgrid(*([axis] * n), indexing="ij")], axis=1
    )
    mask = np.ones(grid.shape[0], dtype=bool)
    for c in model.constraints:
        v = grid[:, c.func.indices] @ c.func.coeffs + c.func.constant
        if c.kind is ConstraintKind.EQUALITY:
            mask &= np.abs(v) <= grid_step
        else:
            mask &= v >= -grid_step
    if not mask.any():
        raise InfeasibleModelError("no feasible grid point")
    pts = grid[mask]
    vals = _grid_energies(model, w, pts)
    x = _repair_feasible(model, pts[int(np.argmin(vals))])

    def objective(p):
        return evaluate_energy(model, w, p)

    x, _ = _pattern_search(objective, model, x, grid_step)
    x = _repair_feasible(model, x)
    return x, objective(x)


# ---------------------------------------------------------------------------
# Quadrature oracle for 1-D conditionals


def _touching_potentials(model, i):
    packed = model.packed
    hits = packed.slot_pot[packed.var == i]
    return np.unique(hits)


def _local_affine(model, truth, i, j):
    """Potential j's functional as a + b*s where s is variable i."""
    p = model.potentials[j]
    a = 0.0
    b = p.ell.constant
    for idx, coef in zip(p.ell.indices, p.ell.coeffs):
        if idx == i:
            a += coef
        else:
            b += coef * truth[idx]
    return a, b


def _simpson(fvals, h):
    # composite Simpson over an even number of subintervals
    return (h / 3.0) * (
        fvals[0] + fvals[-1] + 4.0 * fvals[1:-1:2].sum() + 2.0 * fvals[2:-1:2].sum()
    )


def quadrature_conditional(model: GroundModel, truth, weights, i: int, resolution: int = 256):
    """Deterministic conditional expectations for one unconstrained
    variable, others fixed at ``truth``.

    Returns ``(expected_local_sums, log_normalizer)`` where the vector
    holds, per template, E[sum of that template's potentials touching i]
    under the conditional density. Integration is composite Simpson on
    [0, 1] split at hinge kinks, ``resolution`` subintervals per piece.
    """
    truth = as_assignment(truth, model)
    w = as_weights(weights, model)
    if resolution % 2:
        resolution += 1
    js = _touching_potentials(model, i)
    affine = [_local_affine(model, truth, i, j) for j in js]
    cuts = {0.0, 1.0}
    for a, b in affine:
        if a != 0.0:
            s = -b / a
            if 0.0 < s < 1.0:
                cuts.add(s)
    edges = sorted(cuts)

    tmpl = np.array([model.potentials[j].template for j in js], dtype=np.int64)
    expo = np.array([model.potentials[j].exponent for j in js], dtype=np.int64)
    lam = np.array([w[model.potentials[j].template] for j in js])
    avec = np.array([a for a, _ in affine])
    bvec = np.array([b for _, b in affine])

    z_total = 0.0
    num_total = np.zeros(model.template_count)
    for lo, hi in zip(edges[:-1], edges[1:]):
        s = np.linspace(lo, hi, resolution + 1)
        h = (hi - lo) / resolution
        if js.size:
            lv = np.maximum(np.outer(avec, s) + bvec[:, None], 0.0)
            lv = np.where((expo == 2)[:, None], lv * lv, lv)
            f = lam @ lv
        else:
            lv = np.zeros((0, s.size))
            f = np.zeros(s.size)
        dens = np.exp(-f)
        z_total += _simpson(dens, h)
        for q in range(model.template_count):
            g = lv[tmpl == q].sum(axis=0)
            num_total[q] += _simpson(g * dens, h)
    if z_total <= 0.0 or not np.isfinite(z_total):
        raise NumericsError("degenerate conditional normalizer")
    return num_total / z_total, float(np.log(z_total))


def quadrature_log_pseudolikelihood(model: GroundModel, truth, weights, resolution: int = 256):
    """Sum over variables of the conditional log density of the truth."""
    if model.constraints:
        raise NumericsError("quadrature pseudolikelihood requires an unconstrained model")
    truth = as_assignment(truth, model)
    w = as_weights(weights, model)
    total = 0.0
    for i in range(model.num_variables):
        js = _touching_potentials(model, i)
        f_truth = 0.0
        for j in js:
            p = model.potentials[j]
            v = max(p.ell.value(truth), 0.0)
            f_truth += w[p.template] * (v * v if p.exponent == 2 else v)
        _, log_z = quadrature_conditional(model, truth, w, i, resolution)
        total += -f_truth - log_z
    return total


def finite_diff_gradient(fn, point, h: float = 1e-5):
    """Central finite differences of a scalar function."""
    point = np.asarray(point, dtype=np.float64)
    grad = np.zeros(point.size)
    for q in range(point.size):
        hi = point.copy()
        lo = point.copy()
        hi[q] += h
        lo[q] -= h
        grad[q] = (fn(hi) - fn(lo)) / (2.0 * h)
    return grad


# ---------------------------------------------------------------------------
# Random model generator


@dataclass
class GeneratorConfig:
    seed: int = 0
    variable_count: int = 4
    potential_count: int = 8
    squared_fraction: float = 0.5
    constraint_count: int = 0
    weight_range: tuple = (0.2, 2.0)
    template_count: int = 2

    def __post_init__(self):
        if not 1 <= self.variable_count <= 6:
            raise ValueError("variable_count must be in 1..6 for grid oracles")
        if self.constraint_count * 2 > self.variable_count:
            raise ValueError("too many disjoint constraint blocks")


def generate_random_model(cfg: GeneratorConfig):
    """Random sparse model with constraints on disjoint variable blocks
    (feasible by construction). Returns ``(model, weights)``."""
    rng = np.random.default_rng(cfg.seed)
    n = cfg.variable_count
    potentials = []
    for _ in range(cfg.potential_count):
        k = int(rng.integers(1, min(3, n) + 1))
        idx = np.sort(rng.choice(n, size=k, replace=False))
        coeffs = rng.uniform(-2.0, 2.0, size=k)
        coeffs[coeffs == 0.0] = 1.0
        const = rng.uniform(-1.0, 1.0)
        exponent = 2 if rng.random() < cfg.squared_fraction else 1
        template = int(rng.integers(cfg.template_count))
        potentials.append(
            HingePotential(
                LinearFunctional(list(zip(idx.tolist(), coeffs)), const),
                exponent,
                template,
            )
        )
    order = rng.permutation(n)
    constraints = []
    for b in range(cfg.constraint_count):
        block = np.sort(order[2 * b: 2 * b + 2])
        func_terms = [(int(i), 1.0) for i in block]
        if b % 2 == 0:
            constraints.append(
                LinearConstraint(LinearFunctional(func_terms, -1.0), ConstraintKind.EQUALITY)
            )
        else:
            bound = rng.uniform(0.2, 1.4)
            constraints.append(
                LinearConstraint(LinearFunctional(func_terms, -bound), ConstraintKind.INEQUALITY)
            )
    model = GroundModel(n, potentials, constraints, template_count=cfg.template_count)
    weights = rng.uniform(*cfg.weight_range, size=cfg.template_count)
    return model, weights


def generate_perf_model(num_potentials: int = 10000, seed: int = 0,
                        num_templates: int = 10):
    """Large ring-structured model for timing runs; no hard constraints."""
    rng = np.random.default_rng(seed)
    n = max(2, num_potentials // 5)
    potentials = []
    for _ in range(num_potentials):
        i = int(rng.integers(n))
        j = (i + int(rng.integers(1, 4))) % n
        c1 = rng.uniform(0.5, 2.0) * rng.choice([-1.0, 1.0])
        c2 = rng.uniform(0.5, 2.0) * rng.choice([-1.0, 1.0])
        const = rng.uniform(-1.0, 1.0)
        exponent = 2 if rng.random() < 0.5 else 1
        template = int(rng.integers(num_templates))
        potentials.append(
            HingePotential(LinearFunctional([(i, c1), (j, c2)], const), exponent, template)
        )
    model = GroundModel(n, potentials, template_count=num_templates)
    weights = rng.uniform(0.2, 1.5, size=num_templates)
    return model, weights


# ---------------------------------------------------------------------------
# Synthetic learning tasks


@dataclass
class TaskInstance:
    model: GroundModel
    truth: np.ndarray
    groups: list          # per evaluation unit, indices of its variables
    labels: np.ndarray    # per variable, binary evaluation label
    info: dict = None     # generator statistics (class balance etc.)


@dataclass
class SyntheticTask:
    name: str
    train: TaskInstance
    test: TaskInstance


def _citation_instance(rng, n_docs, n_classes, seed_fraction, homophily,
                       label_noise, edges_per_node):
    classes = np.array([i % n_classes for i in range(n_docs)])
    rng.shuffle(classes)
    docs = [f"d{i:03d}" for i in range(n_docs)]
    cats = [f"c{j}" for j in range(n_classes)]

    n_seed = int(round(seed_fraction * n_docs))
    perm = rng.permutation(n_docs)
    seed_ids = set(perm[:n_seed].tolist())
    # every class needs at least one seed to propagate from
    for cls in range(n_classes):
        if not any(classes[i] == cls for i in seed_ids):
            seed_ids.add(int(np.nonzero(classes == cls)[0][0]))
    seeds_by_class = {
        cls: [i for i in sorted(seed_ids) if classes[i] == cls] for cls in range(n_classes)
    }

    def pick(cls_wanted):
        pool = seeds_by_class[cls_wanted]
        return pool[int(rng.integers(len(pool)))]

    # every non-seed doc cites several seeds so a noisy anchor is outvoted
    edges = set()
    for i in range(n_docs):
        anchors = edges_per_node - 1 if i not in seed_ids else 1
        for _ in range(anchors):
            wanted = classes[i] if rng.random() < homophily else (classes[i] + 1) % n_classes
            j = pick(wanted)
            if j != i:
                edges.add((i, j))
        cls = classes[i] if rng.random() < homophily else (classes[i] + 1) % n_classes
        pool = np.nonzero(classes == cls)[0]
        j = int(pool[int(rng.integers(pool.size))])
        if j != i:
            edges.add((i, j))

    observed = [("Cites", (docs[i], docs[j]), 1.0) for i, j in sorted(edges)]
    for i in sorted(seed_ids):
        lbl = classes[i]
        if rng.random() < label_noise:
            lbl = (lbl + 1) % n_classes
        observed.append(("Label", (docs[i], cats[lbl]), 1.0))

    targets = [
        ("Label", (docs[i], cats[c]))
        for i in range(n_docs)
        if i not in seed_ids
        for c in range(n_classes)
    ]
    predicates = [
        Predicate("Label", 2, ROLE_TARGET),
        Predicate("Cites", 2, ROLE_OBSERVED),
    ]
    db = Database.build(predicates, observed, targets)

    a, b, c = Variable("A"), Variable("B"), Variable("C")
    templates = [
        RuleTemplate(
            body=(Literal("Label", (a, c)), Literal("Cites", (a, b))),
            head=(Literal("Label", (b, c)),),
            template_index=0,
            exponent=2,
        ),
        RuleTemplate(
            body=(Literal("Label", (a, c)), Literal("Cites", (b, a))),
            head=(Literal("Label", (b, c)),),
            template_index=1,
            exponent=2,
        ),
    ]
    specs = [ConstraintSpec("Label", sum_positions=(1,))]
    model = ground_model(templates, specs, db)

    truth = np.zeros(db.num_variables)
    labels = np.zeros(db.num_variables)
    groups = {}
    for (name, args) in db.target_atoms:
        doc, cat = args
        i, c = docs.index(doc), cats.index(cat)
        idx = db.targets[(name, args)]
        val = 1.0 if classes[i] == c else 0.0
        truth[idx] = val
        labels[idx] = val
        groups.setdefault(doc, []).append(idx)
    group_list = [sorted(groups[d]) for d in sorted(groups)]
    target_classes = [int(classes[docs.index(d)]) for d in sorted(groups)]
    baseline = max(np.bincount(target_classes, minlength=n_classes)) / len(target_classes)
    return TaskInstance(model, truth, group_list, labels,
                        {"majority_baseline": float(baseline)})


def generate_citation_task(seed=0, n_docs=40, n_classes=2, seed_fraction=0.5,
                           homophily=0.9, label_noise=0.15, edges_per_node=4):
    """Homophilous citation graph with label propagation rules and
    one-hot label constraints; train and test are independent draws."""
    ss = np.random.SeedSequence(seed)
    r_train, r_test = [np.random.default_rng(s) for s in ss.spawn(2)]
    args = (n_docs, n_classes, seed_fraction, homophily, label_noise, edges_per_node)
    return SyntheticTask(
        "citation",
        _citation_instance(r_train, *args),
        _citation_instance(r_test, *args),
    )


_TRUST_PATTERNS = [
    (d1, d2, n1, n2)
    for d1 in (0, 1)      # 0: (A,B), 1: (B,A)
    for d2 in (0, 1)      # 0: (B,C), 1: (C,B)
    for n1 in (False, True)
    for n2 in (False, True)
]


def _trust_instance(rng, n_nodes, n_triangles, camp_fraction, flip_fraction,
                    target_fraction):
    camp = np.zeros(n_nodes, dtype=int)
    camp[int(round(camp_fraction * n_nodes)):] = 1
    rng.shuffle(camp)
    links = set()
    while len(links) < 3 * n_triangles:
        tri = rng.choice(n_nodes, size=3, replace=False)
        for u, v in itertools.combinations(sorted(tri.tolist()), 2):
            links.add((u, v))
    links = sorted(links)
    planted = {lk: 1.0 if camp[lk[0]] == camp[lk[1]] else 0.0 for lk in links}

    neighbors = {}
    for u, v in links:
        neighbors.setdefault(u, set()).add(v)
        neighbors.setdefault(v, set()).add(u)
    tri_count = {lk: len(neighbors[lk[0]] & neighbors[lk[1]]) for lk in links}

    # hold out links with at least two triangles so every target has
    # observable evidence; evaluation truth is the planted sign
    eligible_pos = [lk for lk in links if planted[lk] == 1.0 and tri_count[lk] >= 2]
    eligible_neg = [lk for lk in links if planted[lk] == 0.0 and tri_count[lk] >= 2]
    n_t_pos = max(3, int(round(target_fraction * len(eligible_pos))))
    n_t_neg = max(3, int(round(target_fraction * len(eligible_neg))))
    held = set()
    for pool, k in ((eligible_pos, n_t_pos), (eligible_neg, n_t_neg)):
        chosen = rng.choice(len(pool), size=min(k, len(pool)), replace=False)
        held.update(pool[int(c)] for c in chosen)

    # directed atoms: both directions of each undirected link; flips
    # corrupt only the observed network
    var_of = {}
    atoms = []
    for u, v in links:
        for pair in ((u, v), (v, u)):
            if (u, v) in held:
                var_of[pair] = len(atoms)
                atoms.append(pair)
    observed = {}
    for u, v in links:
        if (u, v) not in held:
            value = planted[(u, v)]
            if rng.random() < flip_fraction:
                value = 1.0 - value
            observed[(u, v)] = value
            observed[(v, u)] = value

    def resolve(pair, negated):
        if pair in var_of:
            return GroundLiteral(variable=var_of[pair], value=None, negated=negated)
        return GroundLiteral(variable=None, value=observed.get(pair, 0.0), negated=negated)

    triangles = set()
    for u, v in links:
        for w in neighbors[u] & neighbors[v]:
            triangles.add(tuple(sorted((u, v, w))))

    potentials = []
    for tri in sorted(triangles):
        for a, b, c in itertools.permutations(tri):
            for t_idx, (d1, d2, n1, n2) in enumerate(_TRUST_PATTERNS):
                b1 = (a, b) if d1 == 0 else (b, a)
                b2 = (b, c) if d2 == 0 else (c, b)
                rule = GroundRule(
                    body=(resolve(b1, n1), resolve(b2, n2)),
                    head=(resolve((a, c), n1 != n2),),
                )
                hinge = rule_to_hinge(rule, exponent=2, template=t_idx)
                if hinge.ell.max_over_box() <= 0.0:
                    continue
                potentials.append(hinge)
    prior_template = len(_TRUST_PATTERNS)
    for pair in atoms:
        rule = GroundRule(
            body=(),
            head=(GroundLiteral(variable=var_of[pair], value=None, negated=True),),
        )
        potentials.append(rule_to_hinge(rule, exponent=2, template=prior_template))

    model = GroundModel(len(atoms), potentials, template_count=prior_template + 1)
    truth = np.array([planted[tuple(sorted(p))] for p in atoms])
    info = {"planted_positive_fraction": float(np.mean(list(planted.values())))}
    return TaskInstance(model, truth, [[i] for i in range(len(atoms))], truth.copy(), info)


def generate_trust_task(seed=0, n_nodes=100, n_triangles=200, camp_fraction=0.92,
                        flip_fraction=0.1, target_fraction=0.125):
    """Signed trust network with planted two-camp structure; the sixteen
    direction/sign transitivity rules plus a not-trusting prior, all
    squared. Positive links dominate by construction."""
    ss = np.random.SeedSequence(seed)
    r_train, r_test = [np.random.default_rng(s) for s in ss.spawn(2)]
    args = (n_nodes, n_triangles, camp_fraction, flip_fraction, target_fraction)
    return SyntheticTask(
        "trust",
        _trust_instance(r_train, *args),
        _trust_instance(r_test, *args),
    )


def generate_synthetic_tasks(seed=0):
    """The two bundled desk-scale learning tasks."""
    return generate_citation_task(seed), generate_trust_task(seed)
