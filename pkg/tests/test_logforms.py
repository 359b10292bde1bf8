from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from logres.errors import DegreeOverflow, InsufficientPrecision
from logres.logforms import (
    LevelPair, LogForm, classify_pair, level_decomposition, log_d,
    reassemble_levels, theta_delta, wedge,
)
from logres.series import TruncatedSeries
from logres.values import WeightSystem

W1 = WeightSystem((1,), [(1,)])


def S(ws, s, terms, **kw):
    return TruncatedSeries(ws, s, terms, **kw)


def euler_form():
    """(y - x) dx/x - x dy over one x and one dependent variable."""
    a = S(W1, 1, {((0,), (1,)): 1, ((1,), (0,)): -1})
    b = S(W1, 1, {((1,), (0,)): -1})
    return LogForm(W1, 1, 1, {(("X", 0),): a, (("Y", 0),): b})


class TestWedge:
    def test_self_wedge_vanishes(self):
        w = LogForm.d_log_x(W1, 1, 0)
        assert w.wedge(w).is_zero()

    def test_basis_wedge(self):
        out = LogForm.d_log_x(W1, 1, 0).wedge(LogForm.d_dep(W1, 1, 0))
        assert out.degree == 2
        assert out.coeff((("X", 0), ("Y", 0))).constant_term() == 1

    def test_bilinear_expansion(self):
        one_plus_y = S(W1, 1, {((0,), (0,)): 1, ((0,), (1,)): 1})
        x = S(W1, 1, {((1,), (0,)): 1})
        w = LogForm(W1, 1, 1, {(("X", 0),): one_plus_y, (("Y", 0),): x})
        out = w.wedge(LogForm.d_log_x(W1, 1, 0))
        key = (("X", 0), ("Y", 0))
        assert out.coeffs[key].terms == {((1,), (0,)): -1}

    def test_antisymmetry_sign(self):
        a, b = LogForm.d_log_x(W1, 1, 0), LogForm.d_dep(W1, 1, 0)
        assert (a.wedge(b) + b.wedge(a)).is_zero()

    def test_degree_overflow(self):
        two = LogForm.d_log_x(W1, 1, 0).wedge(LogForm.d_dep(W1, 1, 0))
        with pytest.raises(DegreeOverflow):
            two.wedge(two)


class TestExteriorDerivative:
    def test_product_rule_in_log_basis(self):
        F = S(W1, 1, {((1,), (1,)): 1})  # x*y
        d = log_d(F)
        assert d.coeff((("X", 0),)).terms == {((1,), (1,)): 1}
        assert d.coeff((("Y", 0),)).terms == {((1,), (0,)): 1}

    def test_dd_zero(self):
        F = S(W1, 2, {((2,), (0, 0)): 1, ((0,), (1, 1)): 1})  # x^2 + y1 y2
        assert log_d(log_d(F)).is_zero()

    @given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 2),
                              st.integers(0, 2), st.integers(-4, 4)),
                    min_size=1, max_size=5))
    @settings(max_examples=50, deadline=None)
    def test_dd_zero_random(self, quads):
        terms = {}
        for a, b1, b2, c in quads:
            k = ((a,), (b1, b2))
            terms[k] = terms.get(k, 0) + c
        F = S(W1, 2, terms)
        assert log_d(log_d(F)).is_zero()

    def test_value_preserved_for_nonunits(self):
        F = S(W1, 0, {((1,), ()): 1, ((2,), ()): 1})
        d = log_d(F)
        assert d.coeff((("X", 0),)).terms == {((1,), ()): 1, ((2,), ()): 2}
        assert F.explicit_value() == d.explicit_value() == W1.value(1)

    @given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3),
                              st.integers(-5, 5)),
                    min_size=1, max_size=5))
    @settings(max_examples=80, deadline=None)
    def test_value_law_random_nonunits(self, triples):
        terms = {}
        for a, b, c in triples:
            if a == 0 and b == 0:
                continue  # keep it a non-unit
            k = ((a,), (b,))
            terms[k] = terms.get(k, 0) + c
        F = S(W1, 1, terms)
        if F.is_zero():
            return
        assert log_d(F).explicit_value() == F.explicit_value()

    def test_wedge_value_superadditive(self):
        a = euler_form()
        b = log_d(S(W1, 1, {((2,), (1,)): 3}))
        w = a.wedge(b)
        if not w.is_zero():
            assert w.explicit_value() >= a.explicit_value() + b.explicit_value()


class TestClassify:
    def test_log_elementary_basis_form(self):
        c = LogForm.d_log_x(W1, 1, 0).classify_gamma_final(W1.zero())
        assert c.is_dominant and c.value == W1.zero()

    def test_euler_not_final_at_zero(self):
        c = euler_form().classify_gamma_final(W1.zero())
        assert c.kind == "not_final"

    def test_recessive_form(self):
        w = LogForm(W1, 1, 1, {(("Y", 0),): S(W1, 1, {((3,), (0,)): 1})})
        assert w.classify_gamma_final(W1.value(2)).is_recessive

    def test_log_final_classification(self):
        elem = LogForm(W1, 1, 1, {(("X", 0),): TruncatedSeries.one(W1, 1),
                                  (("Y", 0),): TruncatedSeries.one(W1, 1)})
        assert elem.classify_log_final() == "LogElementary"
        assert euler_form().classify_log_final() == "LogCanonical"

    def test_log_final_unit_invariance(self):
        u = S(W1, 1, {((0,), (0,)): 3, ((1,), (1,)): -2})
        for w in (euler_form(),
                  LogForm(W1, 1, 1, {(("X", 0),): TruncatedSeries.one(W1, 1)})):
            assert w.module_scale(u).classify_log_final() == w.classify_log_final()

    def test_not_final_when_no_linear_term(self):
        w = LogForm(W1, 1, 1, {(("X", 0),): S(W1, 1, {((1,), (0,)): 1, ((0,), (2,)): 1})})
        assert w.classify_log_final() == "NotFinal"

    def test_canonicity_needs_depth(self):
        w = LogForm(W1, 1, 1, {(("X", 0),): S(W1, 1, {((1,), (0,)): 1}, prec_dep=1)})
        with pytest.raises(InsufficientPrecision):
            w.classify_log_final()


class TestPairs:
    def test_trivial_dominant(self):
        c = classify_pair(LogForm.d_log_x(W1, 1, 0), TruncatedSeries.one(W1, 1), W1.zero())
        assert c.is_dominant

    def test_recessive_pair(self):
        w = LogForm(W1, 1, 1, {(("Y", 0),): S(W1, 1, {((1,), (0,)): 1})})
        F = S(W1, 1, {((1,), (0,)): 1})
        assert classify_pair(w, F, W1.zero()).is_recessive

    def test_blocking_form_part(self):
        w = LogForm(W1, 1, 1, {(("X", 0),): S(W1, 1, {((0,), (1,)): 1})})
        F = S(W1, 1, {((1,), (0,)): 1})
        c = classify_pair(w, F, W1.value(2))
        assert c.kind == "not_final"

    def test_function_witness_alone(self):
        # form sits strictly above the pair value: its monomial part vanishes
        w = LogForm(W1, 1, 1, {(("Y", 0),): S(W1, 1, {((2,), (0,)): 1})})
        F = S(W1, 1, {((1,), (0,)): 1, ((1,), (1,)): 2})
        c = classify_pair(w, F, W1.value(3))
        assert c.is_dominant and c.value == W1.value(1)


class TestLevels:
    def test_dz_alone(self):
        w = LogForm(W1, 2, 1, {(("Y", 1),): TruncatedSeries.one(W1, 2)})
        levels = level_decomposition(w)
        assert len(levels) == 2
        assert levels[0].eta.is_zero() and levels[0].f.is_zero()
        assert levels[1].eta.is_zero()
        assert levels[1].f == TruncatedSeries.one(W1, 1)

    def test_euler_levels(self):
        levels = level_decomposition(euler_form())
        assert len(levels) == 2
        assert levels[0].eta.coeff((("X", 0),)).terms == {((1,), ()): -1}
        assert levels[0].f.is_zero()
        assert levels[1].eta.coeff((("X", 0),)).terms == {((0,), ()): 1}
        assert levels[1].f.terms == {((1,), ()): -1}

    def test_high_level_only(self):
        w = LogForm(W1, 2, 1, {(("Y", 0),): S(W1, 2, {((1,), (0, 2)): 1})})
        levels = level_decomposition(w)
        assert len(levels) == 3
        assert levels[2].eta.coeff((("Y", 0),)).terms == {((1,), (0,)): 1}
        assert levels[2].f.is_zero()

    def test_round_trip(self):
        w = euler_form()
        back = reassemble_levels(W1, 1, level_decomposition(w))
        assert back == w

    def test_beta_values(self):
        levels = level_decomposition(euler_form())
        assert levels[0].beta() == W1.value(1)
        assert levels[1].beta() == W1.zero()

    def test_requested_padding_of_exact_form(self):
        levels = level_decomposition(euler_form(), n_levels=5)
        assert len(levels) == 5
        assert all(p.eta.is_zero() and p.f.is_exact_zero() for p in levels[2:])

    def test_truncated_coefficient_announces_hidden_levels(self):
        # the x-coefficient stores only level 0 but is cut at dep degree 3
        short = S(W1, 2, {((1,), (0, 0)): 1}, prec_dep=3, dep_floor=W1.value(2))
        w = LogForm(W1, 2, 1, {
            (("X", 0),): short,
            (("Y", 1),): S(W1, 2, {((0,), (0, 3)): 1}),
        })
        levels = level_decomposition(w)
        assert len(levels) == 5
        lev2 = levels[2].eta.coeff((("X", 0),))
        assert lev2.is_zero() and not lev2.is_exact_zero()
        assert lev2.prec_dep == 1 and lev2.dep_floor == W1.value(2)
        # classification sees the floor, not a phantom exact zero
        assert levels[2].classify(W1.value(1)).kind == "recessive"
        with pytest.raises(InsufficientPrecision):
            levels[2].classify(W1.value(2))


class TestThetaDelta:
    def test_exact_differential_integrable(self):
        F = S(W1, 2, {((1,), (1, 1)): 1, ((2,), (0, 1)): -3})
        thetas, deltas = theta_delta(level_decomposition(log_d(F)))
        assert all(t.is_zero() for t in thetas)
        assert all(d.is_zero() for d in deltas)

    def test_single_level_collapse(self):
        eta = log_d(S(W1, 1, {((1,), (1,)): 1}))
        levels = [LevelPair(eta, TruncatedSeries.zero(W1, 1))]
        thetas, deltas = theta_delta(levels)
        assert thetas[0] == eta.wedge(log_d(eta))
        assert deltas[0].is_zero()

    def test_euler_is_integrable(self):
        thetas, deltas = theta_delta(level_decomposition(euler_form()))
        assert all(t.is_zero() for t in thetas)
        assert all(d.is_zero() for d in deltas)

    def test_equivalence_with_direct_wedge(self):
        # a non-integrable form: both bookkeeping and direct wedge see it
        w = LogForm(W1, 2, 1, {
            (("X", 0),): S(W1, 2, {((0,), (1, 0)): 1}),
            (("Y", 0),): S(W1, 2, {((1,), (0, 0)): 1}),
            (("Y", 1),): S(W1, 2, {((0,), (0, 0)): 1}),
        })
        direct = w.wedge(log_d(w))
        thetas, deltas = theta_delta(level_decomposition(w))
        assert (not direct.is_zero()) == any(
            not t.is_zero() for t in thetas) or any(not d.is_zero() for d in deltas)


def test_form_json_round_trip():
    w = euler_form()
    data = w.to_json()
    assert data[0]["basis"] == ["X1"]
    back = LogForm.from_json(W1, 1, data)
    assert back == w


def test_module_scale_and_monomials():
    w = euler_form()
    x = S(W1, 1, {((1,), (0,)): 1})
    scaled = w.module_scale(x)
    assert scaled.divide_monomial((1,)) == w
