import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hlmrf.errors import ModelError
from hlmrf.logic import (
    GroundLiteral,
    GroundRule,
    Literal,
    RuleTemplate,
    Variable,
    luk_conjunction,
    luk_disjunction,
    rule_to_hinge,
    rule_truth,
)
from hlmrf.model import evaluate_potential

unit = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)


def var_lit(i, negated=False):
    return GroundLiteral(variable=i, value=None, negated=negated)


def obs_lit(v, negated=False):
    return GroundLiteral(variable=None, value=v, negated=negated)


class TestConnectives:
    @pytest.mark.parametrize(
        "values,expected",
        [((1.0, 1.0), 1.0), ((0.5, 0.5), 0.0), ((0.9, 0.8, 0.7), 0.4), ((), 1.0)],
    )
    def test_conjunction(self, values, expected):
        assert luk_conjunction(values) == pytest.approx(expected)

    @pytest.mark.parametrize(
        "values,expected",
        [((0.0, 0.0), 0.0), ((0.5, 0.5), 1.0), ((0.2, 0.3), 0.5), ((), 0.0)],
    )
    def test_disjunction(self, values, expected):
        assert luk_disjunction(values) == pytest.approx(expected)

    @given(st.lists(unit, max_size=6))
    def test_symmetry(self, values):
        assert luk_conjunction(values) == pytest.approx(luk_conjunction(values[::-1]))
        assert luk_disjunction(values) == pytest.approx(luk_disjunction(values[::-1]))

    @given(st.lists(unit, min_size=1, max_size=5), unit, st.data())
    def test_monotone(self, values, bumped, data):
        i = data.draw(st.integers(min_value=0, max_value=len(values) - 1))
        hi = list(values)
        hi[i] = max(hi[i], bumped)
        assert luk_conjunction(hi) >= luk_conjunction(values)
        assert luk_disjunction(hi) >= luk_disjunction(values)

    @given(st.lists(st.sampled_from([0.0, 1.0]), max_size=6))
    def test_boolean_agreement(self, bits):
        assert luk_conjunction(bits) == float(all(bits))
        assert luk_disjunction(bits) == float(any(bits))


class TestRuleTruth:
    def test_violated_boolean(self):
        r = GroundRule((obs_lit(1.0), obs_lit(1.0)), (obs_lit(0.0),))
        assert rule_truth(r, np.zeros(0)) == 0.0

    def test_satisfied_boolean(self):
        r = GroundRule((obs_lit(1.0), obs_lit(1.0)), (obs_lit(1.0),))
        assert rule_truth(r, np.zeros(0)) == 1.0

    def test_interior_composition(self):
        r = GroundRule((obs_lit(0.6), obs_lit(0.6)), (obs_lit(0.1),))
        assert rule_truth(r, np.zeros(0)) == pytest.approx(0.9)


class TestRuleToHinge:
    def test_transitivity_form(self):
        r = GroundRule((var_lit(0), var_lit(1)), (var_lit(2),))
        h = rule_to_hinge(r)
        assert h.ell.terms() == [(0, 1.0), (1, 1.0), (2, -1.0)]
        assert h.ell.constant == -1.0

    def test_negated_body(self):
        r = GroundRule((var_lit(0), var_lit(1, negated=True)), (var_lit(2),))
        h = rule_to_hinge(r)
        assert h.ell.terms() == [(0, 1.0), (1, -1.0), (2, -1.0)]
        assert h.ell.constant == 0.0

    def test_observed_zero_body_vacuous(self):
        r = GroundRule((obs_lit(0.0),), (var_lit(0),))
        h = rule_to_hinge(r)
        assert h.ell.max_over_box() <= 0.0

    def test_empty_body_prior(self):
        r = GroundRule((), (var_lit(0, negated=True),))
        h = rule_to_hinge(r)
        assert h.ell.terms() == [(0, 1.0)]
        assert h.ell.constant == pytest.approx(0.0)


def all_rule_shapes(max_body=3, max_head=2):
    for nb in range(max_body + 1):
        for nh in range(max_head + 1):
            if nb + nh == 0:
                continue
            for negs in itertools.product([False, True], repeat=nb + nh):
                body = tuple(var_lit(i, negs[i]) for i in range(nb))
                head = tuple(var_lit(nb + j, negs[nb + j]) for j in range(nh))
                yield GroundRule(body, head), nb + nh


class TestHingeVsTruth:
    def test_boolean_corner_exactness(self):
        for rule, n in all_rule_shapes():
            h = rule_to_hinge(rule, 1)
            for bits in itertools.product([0.0, 1.0], repeat=n):
                a = np.array(bits)
                assert evaluate_potential(h, a) == 1.0 - rule_truth(rule, a)

    def test_lower_bound_interior(self):
        rng = np.random.default_rng(3)
        shapes = list(all_rule_shapes())
        for _ in range(2000):
            rule, n = shapes[rng.integers(len(shapes))]
            a = rng.random(n)
            h = rule_to_hinge(rule, 1)
            assert evaluate_potential(h, a) <= 1.0 - rule_truth(rule, a) + 1e-12


class TestRuleTemplate:
    def test_unbound_head_variable_rejected(self):
        with pytest.raises(ModelError):
            RuleTemplate(
                body=(Literal("P", (Variable("A"),)),),
                head=(Literal("Q", (Variable("B"),)),),
                template_index=0,
            )

    def test_empty_rule_rejected(self):
        with pytest.raises(ModelError):
            RuleTemplate(body=(), head=(), template_index=0)

    def test_prior_allows_free_head_variables(self):
        t = RuleTemplate(
            body=(), head=(Literal("P", (Variable("A"),), True),), template_index=0
        )
        assert t.variables() == ["A"]
