import numpy as np
import pytest

from hlmrf.errors import StructureError
from hlmrf.model import (
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
from hlmrf.oracles import GeneratorConfig, generate_random_model


def hinge(terms, const, exponent=1, template=0):
    return HingePotential(LinearFunctional(terms, const), exponent, template)


class TestLinearFunctional:
    def test_value_and_constant(self):
        f = LinearFunctional([(0, 2.0), (3, -1.0)], 0.5)
        a = np.array([1.0, 0.0, 0.0, 0.25])
        assert f.value(a) == pytest.approx(2.0 - 0.25 + 0.5)
        assert LinearFunctional([], 0.7).value(a) == 0.7

    def test_duplicate_indices_rejected(self):
        with pytest.raises(StructureError):
            LinearFunctional([(1, 1.0), (1, 2.0)], 0.0)

    def test_max_over_box(self):
        f = LinearFunctional([(0, 1.5), (1, -2.0)], -0.5)
        assert f.max_over_box() == pytest.approx(1.0)


class TestEvaluatePotential:
    def test_violated_boolean_corner(self):
        # body true, head false: distance one
        p = hinge([(0, 1.0), (1, 1.0), (2, -1.0)], -1.0)
        assert evaluate_potential(p, [1.0, 1.0, 0.0]) == 1.0

    def test_satisfied_implication(self):
        p = hinge([(0, 1.0), (1, 1.0), (2, -1.0)], -1.0)
        assert evaluate_potential(p, [1.0, 1.0, 1.0]) == 0.0

    def test_squared(self):
        p = hinge([(0, 1.0)], -0.5, exponent=2)
        assert evaluate_potential(p, [0.9]) == pytest.approx(0.16)

    def test_out_of_range_index(self):
        p = hinge([(5, 1.0)], 0.0)
        with pytest.raises(StructureError):
            evaluate_potential(p, [0.1, 0.2])

    def test_bad_exponent(self):
        with pytest.raises(StructureError):
            hinge([(0, 1.0)], 0.0, exponent=3)


class TestEnergy:
    def test_zero_potentials(self):
        m = GroundModel(2, [])
        assert evaluate_energy(m, np.zeros(0), [0.3, 0.9]) == 0.0

    def test_single_potential(self):
        m = GroundModel(1, [hinge([(0, 1.0)], 0.0)])
        assert evaluate_energy(m, [3.0], [0.4]) == pytest.approx(1.2)

    def test_two_potentials(self):
        m = GroundModel(
            1, [hinge([(0, 1.0)], 0.0, template=0), hinge([(0, -1.0)], 0.8, template=1)]
        )
        assert evaluate_energy(m, [1.0, 3.0], [0.8]) == pytest.approx(0.8)

    def test_weight_length_mismatch(self):
        m = GroundModel(1, [hinge([(0, 1.0)], 0.0)])
        with pytest.raises(StructureError):
            evaluate_energy(m, [1.0, 2.0], [0.5])

    def test_negative_weight_rejected(self):
        m = GroundModel(1, [hinge([(0, 1.0)], 0.0)])
        with pytest.raises(StructureError):
            evaluate_energy(m, [-1.0], [0.5])


class TestTemplateFeatures:
    def test_inactive_potentials(self):
        m = GroundModel(1, [hinge([(0, 1.0)], -2.0)])
        assert template_features(m, [0.5]) == pytest.approx([0.0])

    def test_single_template_collapse(self):
        m = GroundModel(2, [hinge([(0, 1.0)], 0.0), hinge([(1, 1.0)], -0.1)])
        a = [0.4, 0.7]
        assert template_features(m, a)[0] == pytest.approx(evaluate_energy(m, [1.0], a))

    def test_partition_sum(self):
        m = GroundModel(
            2, [hinge([(0, 1.0)], -0.3, template=0), hinge([(1, 1.0)], -0.1, template=1)]
        )
        assert template_features(m, [0.5, 0.8]) == pytest.approx([0.2, 0.7])

    def test_decomposition_exact(self):
        model, w = generate_random_model(GeneratorConfig(seed=5, template_count=3))
        rng = np.random.default_rng(2)
        for _ in range(20):
            a = rng.random(model.num_variables)
            assert evaluate_energy(model, w, a) == float(
                np.dot(w, template_features(model, a))
            )


class TestCheckFeasible:
    def test_no_constraints(self):
        m = GroundModel(2, [])
        ok, viol = check_feasible(m, [0.2, 0.9], 1e-9)
        assert ok and viol == 0.0

    def test_equality_holds(self):
        c = LinearConstraint(LinearFunctional([(0, 1.0), (1, 1.0)], -1.0))
        m = GroundModel(2, [], [c])
        ok, _ = check_feasible(m, [0.3, 0.7], 1e-9)
        assert ok

    def test_inequality_violated(self):
        c = LinearConstraint(
            LinearFunctional([(0, 1.0)], -0.5), ConstraintKind.INEQUALITY
        )
        m = GroundModel(1, [], [c])
        ok, viol = check_feasible(m, [0.2], 1e-6)
        assert not ok
        assert viol == pytest.approx(0.3)

    def test_box_violation_counts(self):
        m = GroundModel(1, [])
        ok, viol = check_feasible(m, [1.2], 1e-6)
        assert not ok
        assert viol == pytest.approx(0.2)


class TestInvariants:
    def test_energy_nonnegative(self):
        rng = np.random.default_rng(0)
        for seed in range(10):
            model, w = generate_random_model(GeneratorConfig(seed=seed))
            for _ in range(10):
                a = rng.random(model.num_variables)
                assert evaluate_energy(model, w, a) >= 0.0

    def test_convexity_witness(self):
        rng = np.random.default_rng(1)
        for seed in range(10):
            model, w = generate_random_model(GeneratorConfig(seed=seed))
            a = rng.random(model.num_variables)
            b = rng.random(model.num_variables)
            fa = evaluate_energy(model, w, a)
            fb = evaluate_energy(model, w, b)
            for theta in (0.25, 0.5, 0.75):
                mid = evaluate_energy(model, w, theta * a + (1 - theta) * b)
                assert mid <= theta * fa + (1 - theta) * fb + 1e-12

    def test_exponent_monotonicity(self):
        # for functional values in [0, 1] the squared hinge is smaller
        rng = np.random.default_rng(2)
        for _ in range(200):
            c = rng.uniform(0.1, 1.0)
            x = rng.random()
            lin = hinge([(0, c)], 0.0, exponent=1)
            sq = hinge([(0, c)], 0.0, exponent=2)
            if lin.ell.value(np.array([x])) <= 1.0:
                assert evaluate_potential(sq, [x]) <= evaluate_potential(lin, [x])
