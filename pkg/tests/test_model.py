import json
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from logres.errors import (
    BudgetExhausted,
    InsufficientArcPrecision,
    ValueConstraintViolated,
)
from logres.logforms import LogForm, log_d
from logres.model import (
    ARC_WINDOW,
    GeneralizedArc,
    Model,
    Transcript,
    TransformStep,
    _ratio_floor,
    blowup,
    contact_data,
    ordered_change,
    puiseux_package,
    pullback,
)
from logres.series import TruncatedSeries
from logres.values import Value, WeightSystem, vmin

B1 = (1,)
B12 = (1, 2)
W1 = WeightSystem(B1, [(1,)])
W2 = WeightSystem(B12, [(1, 0), (0, 1)])  # weights 1 and sqrt(2)
HALF = Fraction(1, 2)


def V(q, basis=B1):
    return Value.rational(Fraction(q), basis)


def arc(pairs, basis=B1, prec=None):
    terms = [
        (e if isinstance(e, Value) else V(e, basis), c) for e, c in pairs
    ]
    if prec is None:
        p = Value.infinity(basis)
    else:
        p = prec if isinstance(prec, Value) else V(prec, basis)
    return GeneralizedArc(terms, p)


def model_one_dep(y_pairs, prec=None):
    """r = 1, weight 1, a single dependent coordinate y."""
    return Model.initial(W1, ("x",), {"y": arc(y_pairs, prec=prec)})


def three_var():
    """x = t, y = t^(1/2) + t, z = t^(1/2) + 2t."""
    return Model.initial(
        W1,
        ("x",),
        {
            "y": arc([(HALF, 1), (1, 1)]),
            "z": arc([(HALF, 1), (1, 2)]),
        },
    )


def terms_below(form, k):
    """All (key, exponent) -> coefficient entries of dependent degree < k."""
    out = {}
    for key, C in form.coeffs.items():
        for (a, b), c in C.terms.items():
            if sum(b) < k:
                kk = (key, a, b)
                out[kk] = out.get(kk, Fraction(0)) + c
    return {kk: c for kk, c in out.items() if c != 0}


def arcs_agree(a, b):
    p = vmin(a.prec_t, b.prec_t)
    assert a.truncate(p) == b.truncate(p)


# -- arcs ---------------------------------------------------------------------


class TestGeneralizedArc:
    def test_constructor_merges_and_sorts(self):
        a = arc([(2, 1), (1, 2), (2, -1)])
        assert a.terms == ((V(1), Fraction(2)),)

    def test_constructor_drops_terms_beyond_cut(self):
        a = arc([(1, 1), (3, 1)], prec=2)
        assert a.terms == ((V(1), Fraction(1)),)
        assert a.prec_t == V(2)

    def test_ord_of_exact_zero_is_infinite(self):
        assert GeneralizedArc.exact_zero(B1).ord().infinite

    def test_ord_of_truncated_empty_raises(self):
        a = GeneralizedArc((), V(3))
        with pytest.raises(InsufficientArcPrecision):
            a.ord()
        assert a.ord_lower() == V(3)

    def test_add_with_cancellation(self):
        a = arc([(1, 1), (2, 1)]) - arc([(1, 1)])
        assert a.terms == ((V(2), Fraction(1)),)
        assert a.prec_t.infinite

    def test_add_takes_minimum_precision(self):
        a = arc([(1, 1)], prec=5) + arc([(2, 1)], prec=3)
        assert a.prec_t == V(3)
        assert [e for e, _ in a.terms] == [V(1), V(2)]

    def test_mul_precision_window(self):
        a = arc([(1, 1)], prec=3)
        p = a * a
        assert p.terms == ((V(2), Fraction(1)),)
        assert p.prec_t == V(4)

    def test_mul_exact(self):
        p = arc([(1, 1)]) * arc([(1, 1), (2, 1)])
        assert p.terms == ((V(2), Fraction(1)), (V(3), Fraction(1)))
        assert p.prec_t.infinite

    def test_pow(self):
        p = arc([(1, 1), (2, 1)]).pow(3)
        want = {V(3): 1, V(4): 3, V(5): 3, V(6): 1}
        assert dict(p.terms) == {e: Fraction(c) for e, c in want.items()}

    def test_pow_zero_is_one(self):
        p = arc([(1, 1)], prec=2).pow(0)
        assert p.terms == ((V(0), Fraction(1)),)
        assert p.prec_t.infinite

    def test_shift_moves_cut(self):
        a = arc([(1, 1)], prec=3).shift(V(-1))
        assert a.terms == ((V(0), Fraction(1)),)
        assert a.prec_t == V(2)

    def test_div_by_single_term_is_exact(self):
        q = arc([(HALF, 1), (1, 1)]).div(arc([(1, 1)]))
        assert q.terms == ((V(-HALF), Fraction(1)), (V(0), Fraction(1)))
        assert q.prec_t.infinite

    def test_div_geometric_expansion(self):
        q = arc([(1, 1)]).div(arc([(1, 1), (2, 1)]), window=V(5))
        want = [(V(0), 1), (V(1), -1), (V(2), 1), (V(3), -1), (V(4), 1)]
        assert q.terms == tuple((e, Fraction(c)) for e, c in want)
        assert q.prec_t == V(5)

    def test_div_precision_induced_by_numerator(self):
        q = arc([(1, 1)], prec=4).div(arc([(0, 1), (1, 1)]))
        assert q.terms == (
            (V(1), Fraction(1)), (V(2), Fraction(-1)), (V(3), Fraction(1))
        )
        assert q.prec_t == V(4)

    def test_div_precision_induced_by_denominator(self):
        q = arc([(1, 1)]).div(arc([(0, 1), (1, 1)], prec=2))
        assert q.terms == ((V(1), Fraction(1)), (V(2), Fraction(-1)))
        assert q.prec_t == V(3)

    def test_div_by_zero(self):
        a = arc([(1, 1)])
        with pytest.raises(ZeroDivisionError):
            a.div(GeneralizedArc.exact_zero(B1))
        with pytest.raises(InsufficientArcPrecision):
            a.div(GeneralizedArc((), V(3)))

    def test_exact_div_by_multi_term_needs_window(self):
        with pytest.raises(ValueError):
            arc([(0, 1)]).div(arc([(0, 1), (1, 1)]))

    def test_div_of_truncated_empty_numerator(self):
        q = GeneralizedArc((), V(3)).div(arc([(0, 1), (1, 1)]), window=V(10))
        assert q.terms == ()
        assert q.prec_t == V(3)

    def test_scale_by_zero_is_exact_zero(self):
        assert arc([(1, 1)], prec=4).scale(0).is_exact_zero()

    def test_json_roundtrip(self):
        a = arc(
            [(Value((1, 1), B12), Fraction(2, 3)), (Value((2, 0), B12), -1)],
            basis=B12,
            prec=Value((3, 1), B12),
        )
        assert GeneralizedArc.from_json(a.to_json(), B12) == a

    @given(
        st.lists(
            st.tuples(st.integers(0, 6), st.integers(-5, 5)),
            min_size=0, max_size=4,
        ),
        st.lists(
            st.tuples(st.integers(0, 6), st.integers(-5, 5)),
            min_size=0, max_size=4,
        ),
        st.lists(
            st.tuples(st.integers(0, 6), st.integers(-5, 5)),
            min_size=1, max_size=4,
        ),
    )
    @settings(max_examples=50, deadline=None)
    def test_mul_distributes_over_add(self, ta, tb, tc):
        a, b, c = (arc([(e, q) for e, q in t]) for t in (ta, tb, tc))
        assert (a + b) * c == a * c + b * c


# -- models -------------------------------------------------------------------


class TestModel:
    def test_initial_default_independent_arcs(self):
        m = Model.initial(W2, ("x1", "x2"), {})
        assert m.arcs["x1"].terms == ((Value((1, 0), B12), Fraction(1)),)
        assert m.arcs["x2"].terms == ((Value((0, 1), B12), Fraction(1)),)
        assert m.s == 0 and m.r == 2

    def test_dependent_values_read_from_arcs(self):
        m = three_var()
        assert m.dep_values == (V(HALF), V(HALF))
        assert m.coordinate_value("z") == V(HALF)
        assert m.coordinate_value("x") == V(1)

    def test_duplicate_names_rejected(self):
        with pytest.raises(ValueError):
            Model.initial(W1, ("x",), {"x": arc([(1, 1)])})

    def test_dependent_value_outside_span_rejected(self):
        ws = WeightSystem(B12, [(1, 0)])
        bad = GeneralizedArc.single(Value((0, 1), B12), 1)
        with pytest.raises(ValueError):
            Model.initial(ws, ("x",), {"y": bad})

    def test_independent_arc_must_realize_weight(self):
        with pytest.raises(ValueError):
            Model.initial(W1, ("x",), {}, x_arcs={"x": arc([(2, 1)])})

    def test_dependent_relation(self):
        m = three_var()
        assert m.dep_relation(0) == (2, (1,))
        ws = WeightSystem(B12, [(1, 0), (0, 1)])
        n = Model.initial(
            ws, ("x1", "x2"),
            {"y": GeneralizedArc.single(Value((0, 1), B12), 1)},
        )
        assert n.dep_relation(0) == (1, (0, 1))

    def test_eval_along_arcs(self):
        m = three_var()
        F = m.series({((0,), (0, 1)): 1, ((0,), (1, 0)): -1})
        assert m.eval_along_arcs(F).terms == ((V(1), Fraction(1)),)

    def test_eval_accounts_for_dependent_cut(self):
        m = three_var()
        F = m.series({((0,), (1, 0)): 1}, prec_dep=2)
        got = m.eval_along_arcs(F)
        assert got.terms == ((V(HALF), Fraction(1)),)
        assert got.prec_t == V(1)  # dep floor 0 + 2 * min value 1/2

    def test_json_roundtrip(self):
        m = three_var()
        again = Model.from_json(m.to_json())
        assert m.state_equals(again)
        assert m.state_digest() == again.state_digest()

    def test_describe_is_json_safe(self):
        json.dumps(three_var().describe())


# -- blow-up at two independent coordinates -----------------------------------


class TestBlowupIndependentPair:
    def setup_method(self):
        self.m = Model.initial(W2, ("x1", "x2"), {})
        self.dst, self.pm, self.step = blowup(self.m, ("xx", 0, 1))

    def test_larger_weight_is_divided(self):
        assert self.step.kind == "blowup-xx"
        assert self.step.payload["divided"] == "x2"
        w = self.dst.ws.weights
        assert w[0] == Value((1, 0), B12)
        assert w[1] == Value((-1, 1), B12)  # sqrt(2) - 1
        assert self.dst.arcs["x2"].terms == ((Value((-1, 1), B12), Fraction(1)),)

    def test_monomial_exponent_transform(self):
        F = self.m.series({((2, 3), ()): 1})
        G = self.pm.apply_series(F)
        assert G.terms == {((5, 3), ()): Fraction(1)}

    def test_monomial_value_preserved(self):
        F = self.m.series({((2, 3), ()): 1, ((4, 1), ()): 5})
        G = self.pm.apply_series(F)
        assert G.explicit_value() == F.explicit_value()

    def test_direction_ignores_argument_order(self):
        other, _, _ = blowup(self.m, ("xx", 1, 0))
        assert other.state_equals(self.dst)

    def test_log_covector_splits(self):
        w = LogForm.d_log_x(W2, 0, 1)
        g = self.pm.apply_form(w)
        one = TruncatedSeries.one(self.dst.ws, 0)
        assert g.coeff((("X", 0),)) == one
        assert g.coeff((("X", 1),)) == one

    def test_log_derivative_commutes(self):
        F = self.m.series({((2, 3), ()): 1, ((5, 0), ()): -2})
        assert log_d(self.pm.apply_series(F)) == self.pm.apply_form(log_d(F))

    def test_digest_matches_destination(self):
        assert self.step.payload["digest"] == self.dst.state_digest()

    def test_bad_centers_rejected(self):
        with pytest.raises(ValueError):
            blowup(self.m, ("xx", 0, 0))
        with pytest.raises(ValueError):
            blowup(self.m, ("xx", 0, 5))
        with pytest.raises(ValueError):
            blowup(self.m, ("zz", 0, 1))

    @given(
        st.lists(
            st.tuples(st.integers(0, 4), st.integers(0, 4),
                      st.integers(-7, 7).filter(lambda c: c != 0)),
            min_size=1, max_size=5,
        )
    )
    @settings(max_examples=50, deadline=None)
    def test_random_values_preserved(self, triples):
        terms = {}
        for a1, a2, c in triples:
            k = ((a1, a2), ())
            terms[k] = terms.get(k, 0) + c
        F = self.m.series(terms)
        if F.is_zero():
            return
        assert self.pm.apply_series(F).explicit_value() == F.explicit_value()


# -- blow-up dividing the dependent coordinate --------------------------------


class TestBlowupDivideDependent:
    def setup_method(self):
        self.m = model_one_dep([(Fraction(3, 2), 1), (2, 1)])
        self.dst, self.pm, self.step = blowup(self.m, ("xy", 0, 0))

    def test_value_and_arc_updated(self):
        assert self.step.payload["divided"] == "y"
        assert self.dst.dep_values == (V(HALF),)
        assert self.dst.arcs["y"].terms == (
            (V(HALF), Fraction(1)), (V(1), Fraction(1))
        )
        assert self.dst.ws.weights == self.m.ws.weights

    def test_series_pullback(self):
        F = self.m.series({((0,), (1,)): 1, ((1,), (0,)): 1})
        G = self.pm.apply_series(F)
        assert G.terms == {((1,), (1,)): Fraction(1), ((1,), (0,)): Fraction(1)}

    def test_form_pullback(self):
        g = self.pm.apply_form(LogForm.d_dep(W1, 1, 0))
        assert g.coeff((("X", 0),)) == self.dst.series({((1,), (1,)): 1})
        assert g.coeff((("Y", 0),)) == self.dst.series({((1,), (0,)): 1})

    def test_dependent_cut_floor_shifts(self):
        F = self.m.series({((0,), (1,)): 1}, prec_dep=2)
        G = self.pm.apply_series(F)
        assert G.prec_dep == 2
        assert G.dep_floor == V(2)  # old floor 0 + weight 1 * cut 2

    def test_explicit_value_never_drops_and_arcs_agree(self):
        F = self.m.series({((2,), (1,)): 3, ((0,), (2,)): -1})
        G = self.pm.apply_series(F)
        assert not G.explicit_value() < F.explicit_value()
        arcs_agree(self.m.eval_along_arcs(F), self.dst.eval_along_arcs(G))

    def test_log_derivative_commutes(self):
        F = self.m.series({((1,), (2,)): 1, ((3,), (0,)): 4})
        assert log_d(self.pm.apply_series(F)) == self.pm.apply_form(log_d(F))


# -- blow-up dividing the independent coordinate ------------------------------


class TestBlowupDivideIndependent:
    def setup_method(self):
        self.m = model_one_dep([(HALF, 1), (1, 1)])
        self.dst, self.pm, self.step = blowup(self.m, ("xy", 0, 0))

    def test_weight_shrinks_and_arc_expands(self):
        assert self.step.payload["divided"] == "x"
        assert self.dst.ws.weights == (V(HALF),)
        a = self.dst.arcs["x"]
        assert a.leading() == (V(HALF), Fraction(1))
        assert a.coeff_at(V(1)) == -1
        assert a.coeff_at(V(Fraction(3, 2))) == 1
        assert a.prec_t == V(HALF + ARC_WINDOW)
        assert self.dst.dep_values == (V(HALF),)

    def test_series_pullback_moves_exponent(self):
        F = self.m.series({((2,), (0,)): 1})
        G = self.pm.apply_series(F)
        assert G.terms == {((2,), (2,)): Fraction(1)}
        # the full value rides partly on the dependent coordinate now, but
        # the arcs still see all of it
        assert self.dst.eval_along_arcs(G).ord() == V(2)

    def test_truncation_scales_by_certified_ratio(self):
        F = self.m.series({}, prec_x=V(2))
        G = self.pm.apply_series(F)
        assert G.prec_x == V(1)  # ratio 1/2 is exactly representable

    def test_form_needs_divisible_coefficient(self):
        with pytest.raises(ValueError):
            self.pm.apply_form(LogForm.d_log_x(W1, 1, 0))

    def test_log_derivative_commutes_on_divisible_input(self):
        F = self.m.series({((1,), (0,)): 1, ((2,), (1,)): 3})
        assert log_d(self.pm.apply_series(F)) == self.pm.apply_form(log_d(F))

    def test_degenerate_center_rejected(self):
        # value (2 - sqrt(2))/2 has relation 2*v = 2*w1 - w2: dividing x1
        # would send its weight to v * (p1 - d) = 0
        e = Value((1, -HALF), B12)
        m = Model.initial(
            W2, ("x1", "x2"), {"y": GeneralizedArc.single(e, 1)}
        )
        assert m.dep_relation(0) == (2, (2, -1))
        with pytest.raises(ValueError):
            blowup(m, ("xy", 0, 0))


class TestRatioFloor:
    def test_exact_when_representable(self):
        assert _ratio_floor(V(HALF), V(1)) == HALF
        assert _ratio_floor(V(3), V(2)) == Fraction(3, 2)

    def test_certified_lower_bound_for_irrational_ratio(self):
        num = Value((1, -HALF), B12)  # 1 - sqrt(2)/2
        den = Value((1, 0), B12)
        c = _ratio_floor(num, den)
        step = Fraction(1, 2 ** 24)
        assert den.scale(c) <= num
        assert num < den.scale(c + step)


# -- blow-up with equal values: translation -----------------------------------


class TestBlowupTranslation:
    def setup_method(self):
        self.m = model_one_dep([(1, 1), (2, 1)])
        self.dst, self.pm, self.step = blowup(self.m, ("xy", 0, 0))

    def test_residue_and_new_arc(self):
        assert self.step.kind == "blowup-translation"
        assert self.step.payload["residue"] == "1"
        assert self.dst.dep_values == (V(1),)
        assert self.dst.arcs["y"].terms == ((V(1), Fraction(1)),)

    def test_series_pullback(self):
        F = self.m.series({((0,), (1,)): 1})
        G = self.pm.apply_series(F)
        assert G.terms == {((1,), (1,)): Fraction(1), ((1,), (0,)): Fraction(1)}

    def test_series_pullback_binomial(self):
        F = self.m.series({((0,), (2,)): 1})
        G = self.pm.apply_series(F)
        assert G.terms == {
            ((2,), (2,)): Fraction(1),
            ((2,), (1,)): Fraction(2),
            ((2,), (0,)): Fraction(1),
        }

    def test_form_pullback(self):
        g = self.pm.apply_form(LogForm.d_dep(W1, 1, 0))
        assert g.coeff((("X", 0),)) == self.dst.series(
            {((1,), (1,)): 1, ((1,), (0,)): 1}
        )
        assert g.coeff((("Y", 0),)) == self.dst.series({((1,), (0,)): 1})

    def test_dependent_cut_becomes_x_cut(self):
        F = self.m.series({((0,), (0,)): 1}, prec_dep=3)
        G = self.pm.apply_series(F)
        assert G.prec_x == V(3)
        assert G.prec_dep == float("inf")

    def test_negative_residue(self):
        m = model_one_dep([(1, -1), (3, 1)])
        dst, pm, step = blowup(m, ("xy", 0, 0))
        assert step.payload["residue"] == "-1"
        assert dst.dep_values == (V(2),)
        G = pm.apply_series(m.series({((0,), (1,)): 1}))
        assert G.terms == {((1,), (1,)): Fraction(1), ((1,), (0,)): Fraction(-1)}

    def test_rational_residue(self):
        m = model_one_dep([(1, Fraction(2, 3)), (2, 1)])
        _, _, step = blowup(m, ("xy", 0, 0))
        assert step.payload["residue"] == "2/3"

    def test_shallow_arc_rejected_honestly(self):
        m = model_one_dep([(1, 1)], prec=2)
        with pytest.raises(InsufficientArcPrecision):
            blowup(m, ("xy", 0, 0))

    def test_residual_value_outside_span_rejected(self):
        ws = WeightSystem(B12, [(1, 0)])
        a = GeneralizedArc(
            [(Value((1, 0), B12), Fraction(1)), (Value((0, 1), B12), Fraction(1))],
            Value.infinity(B12),
        )
        m = Model.initial(ws, ("x",), {"y": a})
        with pytest.raises(ValueError):
            blowup(m, ("xy", 0, 0))


# -- ordered coordinate changes -----------------------------------------------


class TestOrderedChange:
    def test_difference_of_equal_values(self):
        m = three_var()
        psi = m.series({((0,), (1, 0)): -1})  # subtract y from z
        dst, pm, step = ordered_change(m, 1, psi)
        assert dst.dep_values == (V(HALF), V(1))
        assert dst.arcs["z"].terms == ((V(1), Fraction(1)),)
        assert step.kind == "ordered-change"
        # the old coordinate reads z + y in the new chart
        F = m.series({((0,), (0, 1)): 1})
        assert pm.apply_series(F).terms == {
            ((0,), (0, 1)): Fraction(1), ((0,), (1, 0)): Fraction(1)
        }

    def test_identity_change(self):
        m = three_var()
        dst, pm, _ = ordered_change(m, 1, m.series({}))
        assert dst.state_equals(m)
        F = m.series({((1,), (1, 1)): 5})
        assert pm.apply_series(F) == F

    def test_polynomial_shift_updates_arc(self):
        m = model_one_dep([(1, 1), (3, 1)])
        dst, _, _ = ordered_change(m, 0, m.series({((2,), (0,)): 1}))
        assert dst.dep_values == (V(1),)
        assert dst.arcs["y"].terms == (
            (V(1), Fraction(1)), (V(2), Fraction(1)), (V(3), Fraction(1))
        )

    def test_low_value_term_rejected(self):
        m = model_one_dep([(Fraction(3, 2), 1)])
        with pytest.raises(ValueConstraintViolated):
            ordered_change(m, 0, m.series({((1,), (0,)): 1}))

    def test_dependent_terms_count_toward_the_constraint(self):
        # psi = -y has value 1/2 >= value(z): legal even though no pure
        # x monomial of that value exists
        m = three_var()
        ordered_change(m, 1, m.series({((0,), (1, 0)): -1}))

    def test_later_or_own_dependent_rejected(self):
        m = three_var()
        with pytest.raises(ValueError):
            ordered_change(m, 0, m.series({((0,), (0, 1)): 1}))
        with pytest.raises(ValueError):
            ordered_change(m, 1, m.series({((0,), (0, 1)): 1}))

    def test_truncated_psi_rejected(self):
        m = model_one_dep([(1, 1)])
        with pytest.raises(ValueError):
            ordered_change(m, 0, m.series({((2,), (0,)): 1}, prec_dep=3))

    def test_vanishing_coordinate_rejected(self):
        m = Model.initial(
            W1, ("x",),
            {"y": arc([(HALF, 1), (1, 1)]), "z": arc([(HALF, 1), (1, 1)])},
        )
        with pytest.raises(ValueError):
            ordered_change(m, 1, m.series({((0,), (1, 0)): -1}))

    def test_cancellation_beyond_arc_depth_raises(self):
        m = Model.initial(
            W1, ("x",),
            {
                "y": arc([(HALF, 1), (1, 1)]),
                "z": arc([(HALF, 1), (1, 1)], prec=Fraction(3, 2)),
            },
        )
        with pytest.raises(InsufficientArcPrecision):
            ordered_change(m, 1, m.series({((0,), (1, 0)): -1}))

    def test_form_pullback_subtracts_differential(self):
        m = three_var()
        psi = m.series({((0,), (1, 0)): -1})
        _, pm, _ = ordered_change(m, 1, psi)
        g = pm.apply_form(LogForm.d_dep(W1, 2, 1))
        one = TruncatedSeries.one(W1, 2)
        assert g.coeff((("Y", 1),)) == one
        assert g.coeff((("Y", 0),)) == one  # minus d(-y)

    def test_log_derivative_commutes(self):
        m = three_var()
        psi = m.series({((0,), (1, 0)): -1, ((1,), (0, 0)): 2})
        _, pm, _ = ordered_change(m, 1, psi)
        F = m.series({((1,), (0, 1)): 1, ((0,), (2, 0)): 1, ((2,), (0, 0)): -3})
        assert log_d(pm.apply_series(F)) == pm.apply_form(log_d(F))

    def test_dependent_free_shift_caps_x_precision(self):
        m = model_one_dep([(1, 1), (3, 1)])
        _, pm, _ = ordered_change(m, 0, m.series({((2,), (0,)): 1}))
        G = pm.apply_series(m.series({}, prec_dep=1))
        assert G.prec_x == V(1)  # floor 0 + value(y) = 1

    def test_dependent_only_shift_keeps_x_precision(self):
        m = three_var()
        _, pm, _ = ordered_change(m, 1, m.series({((0,), (1, 0)): -1}))
        G = pm.apply_series(m.series({}, prec_dep=2))
        assert G.prec_x.infinite
        assert G.prec_dep == 2


# -- contact data -------------------------------------------------------------


class TestContactData:
    def test_half_integer_value(self):
        c = contact_data(three_var(), 0)
        assert (c.d, c.p, c.xi) == (2, (1,), Fraction(1))
        assert c.phi == "y^2 / x"

    def test_equal_value(self):
        c = contact_data(model_one_dep([(1, 1), (2, 1)]), 0)
        assert (c.d, c.p, c.xi) == (1, (1,), Fraction(1))
        assert c.phi == "y / x"

    def test_factorial_coefficient_arc(self):
        pairs = [(n + 1, __import__("math").factorial(n)) for n in range(8)]
        m = model_one_dep(pairs, prec=9)
        c = contact_data(m, 0)
        assert (c.d, c.p, c.xi) == (1, (1,), Fraction(1))

    def test_negative_relation_entry(self):
        e = Value((2, -1), B12)  # 2 - sqrt(2)
        m = Model.initial(
            W2, ("x1", "x2"), {"y": GeneralizedArc.single(e, 1)}
        )
        c = contact_data(m, 0)
        assert (c.d, c.p, c.xi) == (1, (2, -1), Fraction(1))
        assert c.phi == "y*x2 / x1^2"

    def test_scaled_leading_coefficient(self):
        m = model_one_dep([(HALF, 3), (1, 1)])
        c = contact_data(m, 0)
        assert (c.d, c.p, c.xi) == (2, (1,), Fraction(9))


# -- packages -----------------------------------------------------------------


class TestPuiseuxPackage:
    def setup_method(self):
        self.m = three_var()
        self.pkg = puiseux_package(self.m, 0)

    def test_half_integer_package_shape(self):
        pkg = self.pkg
        assert (pkg.d, pkg.p, pkg.xi) == (2, (1,), Fraction(1))
        assert pkg.centers == [["xy", 0, 0], ["xy", 0, 0]]
        assert pkg.x_matrix == ((2,),)
        assert pkg.full_matrix == ((2, 1), (1, 1))

    def test_substitution_on_series(self):
        # x becomes x^2 (y + 1); z - y becomes z - x (y + 1)
        x = self.m.series({((1,), (0, 0)): 1})
        assert self.pkg.pmap.apply_series(x).terms == {
            ((2,), (1, 0)): Fraction(1), ((2,), (0, 0)): Fraction(1)
        }
        F = self.m.series({((0,), (0, 1)): 1, ((0,), (1, 0)): -1})
        assert self.pkg.pmap.apply_series(F).terms == {
            ((0,), (0, 1)): Fraction(1),
            ((1,), (1, 0)): Fraction(-1),
            ((1,), (0, 0)): Fraction(-1),
        }

    def test_final_chart(self):
        final = self.pkg.model
        assert final.ws.weights == (V(HALF),)
        assert final.dep_values[0] == V(HALF)
        assert final.arcs["y"].leading() == (V(HALF), Fraction(2))
        assert final.dep_values[1] == V(HALF)  # z untouched
        assert final.arcs["z"] == self.m.arcs["z"]

    def test_values_never_drop(self):
        for F in (
            self.m.series({((1,), (0, 0)): 1}),
            self.m.series({((0,), (1, 0)): 1}),
            self.m.series({((0,), (0, 1)): 1, ((0,), (1, 0)): -1}),
            self.m.series({((2,), (1, 1)): 7, ((0,), (3, 0)): -2}),
        ):
            before = F.explicit_value()
            after = self.pkg.pmap.apply_series(F).explicit_value()
            assert not after < before

    def test_history_records_one_composite_step(self):
        final = self.pkg.model
        assert [s.kind for s in final.history.steps] == ["puiseux-package"]
        assert final.history.steps[0].payload["digest"] == final.state_digest()

    def test_unit_relation_is_single_translation(self):
        m = model_one_dep([(1, 1), (2, 1)])
        pkg = puiseux_package(m, 0)
        assert pkg.centers == [["xy", 0, 0]]
        assert pkg.x_matrix == ((1,),)
        assert pkg.full_matrix == ((1, 0), (1, 1))
        assert pkg.xi == 1
        assert pkg.model.dep_values == (V(1),)

    def test_factorial_arc_package(self):
        import math as _math

        pairs = [(n + 1, _math.factorial(n)) for n in range(8)]
        pkg = puiseux_package(model_one_dep(pairs, prec=9), 0)
        assert pkg.full_matrix == ((1, 0), (1, 1))
        assert pkg.xi == 1
        assert pkg.model.dep_values == (V(1),)

    def test_joint_relation_two_independents(self):
        e = Value((1, 1), B12)  # 1 + sqrt(2)
        a = GeneralizedArc(
            [(e, Fraction(1)), (e + Value((1, 0), B12), Fraction(1))],
            Value.infinity(B12),
        )
        m = Model.initial(W2, ("x1", "x2"), {"y": a})
        pkg = puiseux_package(m, 0)
        assert (pkg.d, pkg.p) == (1, (1, 1))
        assert pkg.centers == [["xy", 0, 0], ["xy", 1, 0]]
        assert pkg.x_matrix == ((1, 0), (0, 1))
        assert pkg.full_matrix == ((1, 0, 0), (0, 1, 0), (1, 1, 1))
        y = m.series({((0, 0), (1,)): 1})
        assert pkg.pmap.apply_series(y).terms == {
            ((1, 1), (1,)): Fraction(1), ((1, 1), (0,)): Fraction(1)
        }

    def test_deep_denominator_with_drain(self):
        # value (3 + sqrt(2))/2: relation 2v = 3 w1 + w2 with both weights
        # below v, so the run must pool support before it can divide
        e = Value((Fraction(3, 2), HALF), B12)
        a = GeneralizedArc(
            [(e, Fraction(1)), (e + Value((1, 0), B12), Fraction(1))],
            Value.infinity(B12),
        )
        m = Model.initial(W2, ("x1", "x2"), {"y": a})
        pkg = puiseux_package(m, 0)
        assert (pkg.d, pkg.p) == (2, (3, 1))
        assert pkg.centers == [
            ["xx", 1, 0], ["xy", 0, 0], ["xy", 0, 0], ["xy", 1, 0], ["xy", 1, 0]
        ]
        assert pkg.x_matrix == ((1, 0), (1, 2))
        assert pkg.full_matrix == ((1, 0, 0), (1, 2, 1), (2, 1, 1))
        assert pkg.xi == 1
        assert pkg.model.dep_values[0] == Value((1, 0), B12)
        # the original second coordinate reads x1 x2^2 (y + 1) afterwards
        x2 = m.series({((0, 1), (0,)): 1})
        got = pkg.pmap.apply_series(x2)
        assert got.terms == {
            ((1, 2), (1,)): Fraction(1), ((1, 2), (0,)): Fraction(1)
        }
        assert got.explicit_value() == Value((0, 1), B12)

    def test_form_transport_matches_series_route(self):
        F = self.m.series({((0,), (0, 1)): 1, ((0,), (1, 0)): -1})
        lhs = self.pkg.pmap.apply_form(log_d(F))
        rhs = log_d(self.pkg.pmap.apply_series(F))
        assert terms_below(lhs, 5) == terms_below(rhs, 5)

    def test_form_transport_of_log_covector(self):
        # dx/x becomes 2 dx'/x' + (y+1)^{-1} dy'
        g = self.pkg.pmap.apply_form(LogForm.d_log_x(W1, 2, 0))
        two = TruncatedSeries.constant(self.pkg.model.ws, 2, 2)
        assert g.coeff((("X", 0),)) == two
        got = g.coeff((("Y", 0),))
        for k in range(5):
            assert got.terms.get(((0,), (k, 0))) == Fraction(-1) ** k

    def test_evaluation_commutes_with_pullback(self):
        rng = random.Random(7)
        for _ in range(10):
            terms = {}
            for _ in range(rng.randint(1, 4)):
                key = (
                    (rng.randint(0, 3),),
                    (rng.randint(0, 2), rng.randint(0, 2)),
                )
                terms[key] = terms.get(key, 0) + rng.randint(-4, 4)
            F = self.m.series(terms)
            arcs_agree(
                self.m.eval_along_arcs(F),
                self.pkg.model.eval_along_arcs(self.pkg.pmap.apply_series(F)),
            )

    def test_budget_exhausted(self):
        with pytest.raises(BudgetExhausted):
            puiseux_package(three_var(), 0, budget=1)

    def test_random_small_models_satisfy_matrix_identities(self):
        rng = random.Random(11)
        for _ in range(20):
            num = rng.randint(1, 6)
            den = rng.choice([1, 2, 3, 4])
            e = Value((Fraction(num, den), 0), B12)
            if rng.random() < 0.5:
                e = e + Value((0, Fraction(rng.randint(0, 2), den)), B12)
            if e.sign() <= 0:
                continue
            a = GeneralizedArc(
                [(e, Fraction(1)), (e + Value((1, 0), B12), Fraction(1))],
                Value.infinity(B12),
            )
            m = Model.initial(W2, ("x1", "x2"), {"y": a})
            d, p = m.dep_relation(0)
            pkg = puiseux_package(m, 0)
            r = 2
            H = pkg.full_matrix
            for k in range(r):
                assert sum(p[i] * H[i][k] for i in range(r)) == d * H[r][k]
            assert sum(p[i] * H[i][r] for i in range(r)) + 1 == d * H[r][r]
            assert pkg.model.dep_values[0].sign() > 0


# -- transcripts and replay ---------------------------------------------------


def pipeline():
    """Ordered change, package, then one more blow-up, recorded externally."""
    tr = Transcript()
    m0 = three_var()
    m1, _, _ = ordered_change(m0, 1, m0.series({((0,), (1, 0)): -1}), tr)
    pkg = puiseux_package(m1, 0, tr)
    m2 = pkg.model
    m3, _, _ = blowup(m2, ("xy", 0, 1), tr)  # value(z~) = 1 > weight 1/2
    return tr, m0, m3


class TestTranscript:
    def test_replay_reaches_same_state(self):
        tr, m0, m3 = pipeline()
        final, maps = tr.replay(m0)
        assert len(maps) == 3
        assert final.state_equals(m3)
        assert final.state_digest() == m3.state_digest()

    def test_replay_detects_tampered_digest(self):
        tr, m0, _ = pipeline()
        tr.steps[1].payload["digest"] = "0" * 64
        with pytest.raises(ValueError):
            tr.replay(m0)

    def test_replay_detects_tampered_residue(self):
        m = model_one_dep([(1, 1), (2, 1)])
        tr = Transcript()
        blowup(m, ("xy", 0, 0), tr)
        tr.steps[0].payload["residue"] = "2"
        with pytest.raises(ValueError):
            tr.replay(m)

    def test_jsonl_roundtrip(self, tmp_path):
        tr, m0, m3 = pipeline()
        again = Transcript.from_jsonl(tr.to_jsonl())
        final, _ = again.replay(m0)
        assert final.state_equals(m3)
        path = tmp_path / "steps.jsonl"
        tr.write(path)
        final2, _ = Transcript.load(path).replay(m0)
        assert final2.state_digest() == m3.state_digest()

    def test_step_json_roundtrip(self):
        step = TransformStep("blowup-xx", {"center": ["xx", 0, 1], "digest": "x"})
        assert TransformStep.from_json(step.to_json()) == step

    def test_model_history_replays(self):
        tr, m0, m3 = pipeline()
        assert [s.kind for s in m3.history.steps] == [
            "ordered-change", "puiseux-package", "blowup-xy"
        ]
        final, _ = m3.history.replay(m0)
        assert final.state_equals(m3)

    def test_source_history_is_not_mutated(self):
        m0 = three_var()
        assert len(m0.history) == 0
        blowup(m0, ("xy", 0, 0), None)
        assert len(m0.history) == 0


# -- pullback plumbing --------------------------------------------------------


class TestPullbackMap:
    def test_composition(self):
        m = model_one_dep([(Fraction(3, 2), 1), (2, 1)])
        m1, pm1, _ = blowup(m, ("xy", 0, 0))  # divide y: value 3/2 -> 1/2
        m2, pm2, _ = blowup(m1, ("xy", 0, 0))  # now weight 1 > 1/2: divide x
        pm = pm1.then(pm2)
        assert pm.src is m and pm.dst is m2
        F = m.series({((0,), (1,)): 1})
        assert pm.apply_series(F) == pm2.apply_series(pm1.apply_series(F))

    def test_apply_dispatch(self):
        m = three_var()
        _, pm, _ = ordered_change(m, 1, m.series({}))
        F = m.series({((1,), (0, 0)): 1})
        assert pullback(pm, F) == F
        w = LogForm.d_dep(W1, 2, 0)
        assert pullback(pm, w) == w
        with pytest.raises(TypeError):
            pm.apply("not a series")
