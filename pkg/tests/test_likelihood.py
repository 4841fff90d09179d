import numpy as np
import pytest

import hlmrf.likelihood as lk
from hlmrf.admm import mpe_infer
from hlmrf.errors import StructureError
from hlmrf.likelihood import (
    MpleConfig,
    PerceptronConfig,
    conditional_expectation,
    mle_gradient,
    mle_train,
    mple_gradient,
    mple_train,
)
from hlmrf.model import (
    ConstraintKind,
    GroundModel,
    HingePotential,
    LinearConstraint,
    LinearFunctional,
    template_features,
)
from hlmrf.oracles import (
    GeneratorConfig,
    generate_random_model,
    quadrature_conditional,
)

CLOSED_FORM_E = (1.0 - 2.0 * np.exp(-1.0)) / (1.0 - np.exp(-1.0))


def hinge(terms, const, exponent=1, template=0):
    return HingePotential(LinearFunctional(terms, const), exponent, template)


def one_var_model():
    return GroundModel(1, [hinge([(0, 1.0)], 0.0)])


class TestMleGradient:
    def test_zero_when_mpe_equals_truth(self):
        # truth at the unconstrained minimizer
        model = GroundModel(
            1, [hinge([(0, 1.0)], 0.0, template=0), hinge([(0, -1.0)], 0.8, template=1)]
        )
        truth, _, _ = mpe_infer(model, [1.0, 3.0])
        grad = mle_gradient(model, truth, [1.0, 3.0])
        assert np.abs(grad).max() <= 1e-3

    def test_definition(self):
        model = one_var_model()
        truth = np.array([0.7])
        grad = mle_gradient(model, truth, [1.0])
        mpe, _, _ = mpe_infer(model, [1.0])
        expected = template_features(model, mpe) - template_features(model, truth)
        assert grad == pytest.approx(expected)

    def test_scaling_by_groundings(self):
        model = GroundModel(1, [hinge([(0, 1.0)], 0.0) for _ in range(5)])
        truth = np.array([0.7])
        raw = mle_gradient(model, truth, [1.0])
        scaled = mle_gradient(model, truth, [1.0], scale_by_groundings=True)
        assert scaled == pytest.approx(raw / 5.0)


class TestMleTrain:
    def test_projection_at_boundary(self):
        # truth maximally violates the single rule; the gradient is the
        # constant -1 so one unit step projects the weight to zero
        model = one_var_model()
        truth = np.array([1.0])
        w = mle_train(
            model,
            truth,
            PerceptronConfig(steps=2, step_size=1.0, scale_by_groundings=False,
                             average_iterates=False),
            initial_weights=[0.5],
        )
        assert w == pytest.approx([0.0])

    def test_weights_stay_nonnegative(self):
        model, _ = generate_random_model(GeneratorConfig(seed=1, template_count=3))
        rng = np.random.default_rng(0)
        truth = rng.random(model.num_variables)
        w = mle_train(model, truth, PerceptronConfig(steps=10))
        assert w.min() >= 0.0

    def test_averaging_excludes_initialization(self):
        model = one_var_model()
        truth = np.array([1.0])
        w = mle_train(
            model,
            truth,
            PerceptronConfig(steps=2, step_size=1.0, scale_by_groundings=False,
                             average_iterates=True),
            initial_weights=[0.5],
        )
        # iterates: 0.0, 0.0 -> average 0.0 (the 0.5 start is excluded)
        assert w == pytest.approx([0.0])


class TestConditionalExpectation:
    def test_uniform_case(self):
        model = one_var_model()
        e = conditional_expectation(
            model, [0.3], [0.0], 0, MpleConfig(samples_per_variable=200000, seed=0)
        )
        assert e[0] == pytest.approx(0.5, abs=5e-3)

    def test_exponential_tilt_closed_form(self):
        model = one_var_model()
        e = conditional_expectation(
            model, [0.3], [1.0], 0, MpleConfig(samples_per_variable=200000, seed=0)
        )
        assert e[0] == pytest.approx(CLOSED_FORM_E, abs=5e-3)

    def test_untouched_variable(self):
        model = GroundModel(2, [hinge([(0, 1.0)], 0.0)])
        e = conditional_expectation(model, [0.3, 0.4], [1.0], 1)
        assert e == pytest.approx([0.0])

    def test_block_samples_live_on_simplex(self):
        c = LinearConstraint(LinearFunctional([(0, 1.0), (1, 1.0)], -1.0))
        model = GroundModel(2, [hinge([(0, 1.0)], 0.0)], [c])
        e = conditional_expectation(
            model, [0.5, 0.5], [1.0], [0, 1], MpleConfig(samples_per_variable=50000, seed=0)
        )
        # conditional of y0 on the 2-simplex is uniform on [0, 1]
        assert e[0] == pytest.approx(CLOSED_FORM_E, abs=1e-2)


class TestMpleGradient:
    def test_uniform_truth_at_mean(self):
        model = one_var_model()
        grad = mple_gradient(
            model, [0.5], [0.0], MpleConfig(samples_per_variable=200000, seed=1)
        )
        assert grad[0] == pytest.approx(0.0, abs=5e-3)

    def test_additive_over_disjoint_variables(self):
        cfg = MpleConfig(samples_per_variable=50000, seed=3)
        m1 = GroundModel(1, [hinge([(0, 1.0)], 0.0)])
        m2 = GroundModel(1, [hinge([(0, 1.0)], -0.2)])
        joint = GroundModel(
            2, [hinge([(0, 1.0)], 0.0), hinge([(1, 1.0)], -0.2)]
        )
        g1 = mple_gradient(m1, [0.4], [0.8], cfg)
        g2 = mple_gradient(m2, [0.9], [0.8], cfg)
        g = mple_gradient(joint, [0.4, 0.9], [0.8], cfg)
        assert g[0] == pytest.approx(g1[0] + g2[0], abs=2e-2)

    def test_deterministic_given_seed(self):
        model, w = generate_random_model(GeneratorConfig(seed=9, template_count=2))
        truth = np.random.default_rng(1).random(model.num_variables)
        cfg = MpleConfig(samples_per_variable=5000, seed=123)
        g1 = mple_gradient(model, truth, w, cfg)
        g2 = mple_gradient(model, truth, w, cfg)
        assert np.array_equal(g1, g2)

    def test_no_inference_and_linear_cost(self, monkeypatch):
        # mple must never call the solver
        monkeypatch.setattr(
            "hlmrf.admm.mpe_infer",
            lambda *a, **k: (_ for _ in ()).throw(AssertionError("inference called")),
        )
        cfg = MpleConfig(samples_per_variable=500, seed=0)
        m1 = GroundModel(1, [hinge([(0, 1.0)], 0.0)])
        mple_gradient(m1, [0.5], [1.0], cfg)
        count1 = lk.last_mple_evaluations
        m2 = GroundModel(1, [hinge([(0, 1.0)], 0.0) for _ in range(4)])
        mple_gradient(m2, [0.5], [1.0], cfg)
        count2 = lk.last_mple_evaluations
        assert count1 == 500 * 1
        assert count2 == 500 * 4

    def test_inequality_constraints_rejected(self):
        c = LinearConstraint(
            LinearFunctional([(0, 1.0)], -0.5), ConstraintKind.INEQUALITY
        )
        model = GroundModel(1, [hinge([(0, 1.0)], 0.0)], [c])
        with pytest.raises(StructureError):
            mple_gradient(model, [0.7], [1.0])

    def test_block_constraints_flag_required(self):
        c = LinearConstraint(LinearFunctional([(0, 1.0), (1, 1.0)], -1.0))
        model = GroundModel(2, [hinge([(0, 1.0)], 0.0)], [c])
        with pytest.raises(StructureError):
            mple_gradient(model, [0.5, 0.5], [1.0], MpleConfig(block_constraints=False))


class TestMpleTrain:
    def test_zero_gradient_start_unchanged(self):
        # truth at the uniform conditional mean with zero-weight contributions
        model = GroundModel(1, [])
        w = mple_train(model, [0.5], PerceptronConfig(steps=3))
        assert w.size == 0

    def test_one_dim_matches_quadrature_maximizer(self):
        model = one_var_model()
        truth = np.array([0.25])

        def neg_pl(weight):
            _, log_z = quadrature_conditional(model, truth, [weight], 0, 512)
            return -(-weight * 0.25 - log_z)

        ws = np.linspace(0.0, 6.0, 601)
        best = ws[int(np.argmin([neg_pl(w) for w in ws]))]
        learned = mple_train(
            model,
            truth,
            PerceptronConfig(steps=300, step_size=1.0, scale_by_groundings=False,
                             average_iterates=False),
            MpleConfig(samples_per_variable=20000, seed=5),
        )
        assert learned[0] == pytest.approx(best, abs=0.1)

    def test_weights_never_negative(self):
        model, _ = generate_random_model(GeneratorConfig(seed=4, template_count=3))
        truth = np.random.default_rng(2).random(model.num_variables)
        w = mple_train(
            model, truth, PerceptronConfig(steps=25), MpleConfig(samples_per_variable=200)
        )
        assert w.min() >= 0.0
