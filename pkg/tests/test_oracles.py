import numpy as np
import pytest

from hlmrf.admm import mpe_infer
from hlmrf.errors import InfeasibleModelError
from hlmrf.metrics import categorical_accuracy
from hlmrf.model import (
    ConstraintKind,
    GroundModel,
    HingePotential,
    LinearConstraint,
    LinearFunctional,
    evaluate_energy,
)
from hlmrf.likelihood import MpleConfig, conditional_expectation
from hlmrf.oracles import (
    GeneratorConfig,
    brute_force_mpe,
    finite_diff_gradient,
    generate_citation_task,
    generate_perf_model,
    generate_random_model,
    generate_synthetic_tasks,
    generate_trust_task,
    quadrature_conditional,
)

CLOSED_FORM_E = (1.0 - 2.0 * np.exp(-1.0)) / (1.0 - np.exp(-1.0))


def hinge(terms, const, exponent=1, template=0):
    return HingePotential(LinearFunctional(terms, const), exponent, template)


class TestBruteForceMpe:
    def test_zero_potentials(self):
        model = GroundModel(2, [])
        _, energy = brute_force_mpe(model, np.zeros(0), 0.1)
        assert energy == 0.0

    def test_one_dim_scan(self):
        model = GroundModel(
            1, [hinge([(0, 1.0)], 0.0, template=0), hinge([(0, -1.0)], 0.8, template=1)]
        )
        x, energy = brute_force_mpe(model, [1.0, 3.0], 0.01)
        assert x[0] == pytest.approx(0.8, abs=1e-4)
        assert energy == pytest.approx(0.8, abs=1e-4)

    def test_symmetric_constrained(self):
        c = LinearConstraint(LinearFunctional([(0, 1.0), (1, 1.0)], -1.0))
        model = GroundModel(
            2, [hinge([(0, 1.0), (1, -1.0)], 0.0, exponent=2)], [c]
        )
        x, energy = brute_force_mpe(model, [1.0], 0.05)
        assert energy == pytest.approx(0.0, abs=1e-9)
        assert x[0] + x[1] == pytest.approx(1.0, abs=1e-9)
        assert x[0] <= x[1] + 1e-9  # any such point is optimal

    def test_infeasible_grid(self):
        c = LinearConstraint(LinearFunctional([(0, 1.0)], -2.0))
        model = GroundModel(1, [], [c])
        with pytest.raises(InfeasibleModelError):
            brute_force_mpe(model, np.zeros(0), 0.1)

    def test_halving_step_is_stable(self):
        for seed in range(5):
            model, w = generate_random_model(
                GeneratorConfig(seed=seed, variable_count=3, constraint_count=1)
            )
            _, e_coarse = brute_force_mpe(model, w, 0.1)
            _, e_fine = brute_force_mpe(model, w, 0.05)
            lip = sum(
                w[p.template] * np.abs(p.ell.coeffs).sum() for p in model.potentials
            )
            assert abs(e_coarse - e_fine) < 5 * 0.1 * max(lip, 1.0)

    def test_upper_bounds_admm(self):
        for seed in range(10):
            model, w = generate_random_model(
                GeneratorConfig(seed=seed, variable_count=4, constraint_count=seed % 3)
            )
            _, _, diag = mpe_infer(model, w)
            _, oracle_energy = brute_force_mpe(model, w, 0.05)
            assert diag.energy <= oracle_energy + 1e-3


class TestQuadratureConditional:
    def make_model(self):
        return GroundModel(1, [hinge([(0, 1.0)], 0.0)])

    def test_uniform(self):
        e, log_z = quadrature_conditional(self.make_model(), [0.3], [0.0], 0)
        assert e[0] == pytest.approx(0.5, abs=1e-10)
        assert log_z == pytest.approx(0.0, abs=1e-10)

    def test_closed_form(self):
        e, _ = quadrature_conditional(self.make_model(), [0.3], [1.0], 0)
        assert e[0] == pytest.approx(CLOSED_FORM_E, abs=1e-10)

    def test_kink_split_consistency(self):
        model = GroundModel(1, [hinge([(0, 1.0)], -0.5)])
        lo, _ = quadrature_conditional(model, [0.3], [2.0], 0, resolution=64)
        hi, _ = quadrature_conditional(model, [0.3], [2.0], 0, resolution=1024)
        assert lo[0] == pytest.approx(hi[0], abs=1e-8)

    def test_monte_carlo_converges_to_quadrature(self):
        model = GroundModel(
            2, [hinge([(0, 1.0), (1, -0.5)], 0.1, template=0),
                hinge([(0, -1.0)], 0.6, exponent=2, template=1)]
        )
        truth = np.array([0.4, 0.7])
        w = np.array([1.2, 0.8])
        exact, _ = quadrature_conditional(model, truth, w, 0, resolution=512)
        small = conditional_expectation(
            model, truth, w, 0, MpleConfig(samples_per_variable=1000, seed=0)
        )
        big = conditional_expectation(
            model, truth, w, 0, MpleConfig(samples_per_variable=100000, seed=0)
        )
        # standard error scale of the estimators
        se_small = 0.5 / np.sqrt(1000)
        se_big = 0.5 / np.sqrt(100000)
        assert np.abs(small - exact).max() <= 3 * se_small + 1e-6
        assert np.abs(big - exact).max() <= 3 * se_big + 1e-6
        assert np.abs(big - exact).max() < np.abs(small - exact).max() + 3 * se_big


class TestFiniteDiff:
    def test_constant(self):
        g = finite_diff_gradient(lambda x: 3.0, np.array([0.2, 0.4]), 1e-4)
        assert g == pytest.approx([0.0, 0.0])

    def test_quadratic(self):
        g = finite_diff_gradient(lambda x: float(x[0] ** 2), np.array([1.0]), 1e-4)
        assert g[0] == pytest.approx(2.0, abs=1e-7)

    def test_l1_away_from_kinks(self):
        g = finite_diff_gradient(lambda x: float(np.abs(x).sum()), np.array([2.0, 3.0]), 1e-4)
        assert g == pytest.approx([1.0, 1.0])


class TestGenerators:
    def test_random_model_deterministic(self):
        cfg = GeneratorConfig(seed=5, constraint_count=1)
        m1, w1 = generate_random_model(cfg)
        m2, w2 = generate_random_model(cfg)
        assert np.array_equal(w1, w2)
        assert [p.ell.terms() for p in m1.potentials] == [
            p.ell.terms() for p in m2.potentials
        ]

    def test_synthetic_tasks_deterministic(self):
        c1, t1 = generate_synthetic_tasks(3)
        c2, t2 = generate_synthetic_tasks(3)
        assert np.array_equal(c1.train.truth, c2.train.truth)
        assert np.array_equal(t1.test.truth, t2.test.truth)

    def test_noise_free_citation_recovers_planted_labels(self):
        task = generate_citation_task(seed=1, label_noise=0.0, homophily=1.0)
        inst = task.test
        a, _, diag = mpe_infer(inst.model, np.ones(inst.model.template_count))
        assert diag.converged
        assert categorical_accuracy(a, inst.truth, inst.groups) == 1.0

    def test_trust_balance_skew(self):
        for seed in range(3):
            task = generate_trust_task(seed=seed)
            for inst in (task.train, task.test):
                assert inst.info["planted_positive_fraction"] >= 0.80

    def test_perf_model_shape(self):
        model, w = generate_perf_model(2000, seed=1)
        assert len(model.potentials) == 2000
        assert w.min() > 0
        assert evaluate_energy(model, w, np.full(model.num_variables, 0.5)) >= 0.0
