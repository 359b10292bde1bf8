"""Monomial combinatorics: simple lists, monomialization, and the right sweep.

A finite list of monomials in the independent coordinates is *simple* when
divisibility agrees with the value order on every pair: the lower-valued
monomial divides the higher-valued one.  Because the weights are positive
and rationally independent, a pair is simple exactly when one exponent
vector dominates the other componentwise, and this property survives every
further combinatorial blow-up.  The two-monomial game below therefore makes
a whole list simple one pair at a time.

The game tracks a lexicographic invariant of the exponent difference c:
with M = max(0, c_1, ..., c_r) and m = min(0, c_1, ..., c_r), the pair
``(-M*m, #{c_i = M} + #{c_i = m})`` is positive in its first entry exactly
when the pair is incomparable, and strictly decreases when the chart of the
blow-up centered at coordinates realizing m and M replaces the smaller-
weight exponent entry by the sum of the extremes.  Termination is a free
consequence; a step budget guards against misuse all the same.

On top of the game sit the three consumers:

* ``monomialize_function`` factors a nonzero dependent-free series as a
  monomial times a unit, by making the minimal generators of its support
  simple and dividing out the value-minimal one.
* ``log_final_rank0`` does the same for a logarithmic 1-form with
  dependent-free coefficients, running the game on the minimal generators
  of the union of all coefficient supports.  The value-minimal generator
  then divides every stored term of every coefficient, and the coefficient
  that carries it exactly yields a unit after division, so the quotient
  form is log-elementary.
* ``push_right`` composes one Puiseux package per dependent coordinate,
  left to right.  After the sweep, any object that was not dominant in the
  source chart has strictly larger explicit value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import BudgetExhausted, InsufficientPrecision
from .logforms import LogForm
from .model import Model, PullbackMap, PuiseuxPackage, blowup, puiseux_package
from .series import TruncatedSeries

#: Cap on blow-ups per list operation.  The descent invariant proves
#: termination; the cap only turns a misuse into a clean error.
GAME_BUDGET = 10_000


# -- the two-monomial game ----------------------------------------------------


def divisibility_defect(a, b):
    """Descent invariant of a pair of exponent vectors.

    Returns ``(-M*m, T + t)`` for the difference c = a - b, where M and m
    are the largest and smallest entries of c together with 0, and T and t
    count how often each extreme is attained.  The first entry is zero if
    and only if one vector dominates the other componentwise.
    """
    c = [int(x) - int(y) for x, y in zip(a, b)]
    big, small = max(0, *c) if c else 0, min(0, *c) if c else 0
    return (-big * small, c.count(big) + c.count(small))


def _extreme_pair(a, b):
    """Indices (i, j) where a - b attains its min and its max."""
    c = [int(x) - int(y) for x, y in zip(a, b)]
    return c.index(min(0, *c)), c.index(max(0, *c))


@dataclass(frozen=True)
class SimpleListResult:
    """A chart where the supplied monomial list is simple.

    ``entries`` are the exponent vectors rewritten in the new chart, in the
    input order; ``trace`` records, per blow-up, the active pair of list
    positions, the blow-up center, and the defect before the step.
    """

    model: Model
    pmap: PullbackMap
    entries: tuple
    trace: tuple


def make_simple_finite(
    model: Model, entries, budget: int = GAME_BUDGET
) -> SimpleListResult:
    """Make a finite list of monomials simple by combinatorial blow-ups.

    ``entries`` is an iterable of exponent vectors over the independent
    coordinates.  Pairs are processed in order; a settled pair cannot be
    broken again because both its divisibility and the values of all
    monomials are preserved by every later blow-up.
    """
    work = [tuple(int(e) for e in a) for a in entries]
    if not work:
        raise ValueError("empty monomial list")
    for a in work:
        if len(a) != model.r:
            raise ValueError("exponent arity does not match the chart")
        if any(e < 0 for e in a):
            raise ValueError("negative exponent")
    pmap = PullbackMap(model, model, [])
    trace = []
    used = 0
    for u in range(len(work)):
        for v in range(u + 1, len(work)):
            while True:
                defect = divisibility_defect(work[u], work[v])
                if defect[0] == 0:
                    break
                used += 1
                if used > budget:
                    raise BudgetExhausted("blow-up budget for the list game")
                i, j = _extreme_pair(work[u], work[v])
                wi, wj = model.ws.weights[i], model.ws.weights[j]
                small, big = (i, j) if wi < wj else (j, i)
                trace.append(((u, v), (i, j), defect))
                model, step, _ = blowup(model, ("xx", i, j))
                pmap = pmap.then(step)
                work = [
                    tuple(
                        e + a[big] if k == small else e for k, e in enumerate(a)
                    )
                    for a in work
                ]
    return SimpleListResult(model, pmap, tuple(work), tuple(trace))


# -- monomialization of functions ---------------------------------------------


def minimal_generators(exponents):
    """The divisibility-minimal elements of a set of exponent vectors."""
    pool = sorted({tuple(int(e) for e in a) for a in exponents}, key=lambda a: (sum(a), a))
    gens = []
    for a in pool:
        if not any(all(g[k] <= a[k] for k in range(len(a))) for g in gens):
            gens.append(a)
    return gens


def _require_dependent_free(F: TruncatedSeries, what: str):
    if F.s and F.prec_dep != math.inf:
        raise ValueError(f"{what} carries a dependent truncation; not certified pure")
    for (_a, b) in F.terms:
        if any(b):
            raise ValueError(f"{what} involves dependent coordinates")


@dataclass(frozen=True)
class MonomializeResult:
    """A chart where the input series is a monomial times a unit.

    ``exponent`` is the monomial's exponent vector and ``unit`` the cofactor
    with nonzero constant term; the input equals x^exponent * unit in the
    new chart.
    """

    model: Model
    pmap: PullbackMap
    exponent: tuple
    unit: TruncatedSeries
    trace: tuple


def monomialize_function(
    model: Model, F: TruncatedSeries, budget: int = GAME_BUDGET
) -> MonomializeResult:
    """Factor a nonzero dependent-free series as monomial times unit.

    The minimal generators of the stored support are made simple; the
    value-minimal generator then divides every stored term, and the
    quotient has a nonzero constant term.  The monomial's value equals the
    explicit value of the input, which no blow-up changes.
    """
    _require_dependent_free(F, "the series to monomialize")
    if not F.terms:
        if F.is_exact_zero():
            raise ValueError("cannot monomialize the zero series")
        raise InsufficientPrecision(
            "no stored term below the truncation; minimal monomial unknown",
            known_bound=F.value_lower_bound(),
        )
    gens = minimal_generators(a for (a, _b) in F.terms)
    res = make_simple_finite(model, gens, budget)
    F = res.pmap.apply_series(F)
    t = None
    for g in res.entries:
        if t is None or res.model.ws.monomial_value(g) < res.model.ws.monomial_value(t):
            t = g
    unit = F.divide_monomial(t)
    if unit.constant_term() == 0:
        raise AssertionError("cofactor lost its constant term")
    return MonomializeResult(res.model, res.pmap, t, unit, res.trace)


# -- log-elementary reduction of dependent-free 1-forms -----------------------


@dataclass(frozen=True)
class LogFinalResult:
    """A chart where the input form is a monomial times a log-elementary form.

    The input equals x^exponent * form in the new chart, and ``form`` has a
    unit coefficient on some logarithmic differential.
    """

    model: Model
    pmap: PullbackMap
    exponent: tuple
    form: LogForm


def log_final_rank0(model: Model, omega: LogForm, budget: int = GAME_BUDGET) -> LogFinalResult:
    """Reduce a 1-form with dependent-free coefficients to log-elementary.

    Every coefficient sits on a logarithmic differential dx_i/x_i and is a
    series in the independent coordinates alone.  The minimal generators of
    the union of all coefficient supports are made simple; the value-
    minimal generator then divides every stored term, belongs to some
    coefficient's support, and dividing it out leaves that coefficient a
    unit.  Blow-ups mix the logarithmic coefficients additively, which is
    why the game runs on the joint support rather than coefficient by
    coefficient.
    """
    if omega.degree != 1:
        raise ValueError("only 1-forms are reduced")
    if omega.dep_coeffs():
        raise ValueError("the form involves dependent differentials")
    for i, ser in omega.x_coeffs().items():
        _require_dependent_free(ser, f"coefficient of dx_{i}/x_{i}")
    support = {a for ser in omega.coeffs.values() for (a, _b) in ser.terms}
    if not support:
        if all(ser.is_exact_zero() for ser in omega.coeffs.values()):
            raise ValueError("cannot reduce the zero form")
        raise InsufficientPrecision(
            "no stored coefficient term below the truncation",
            known_bound=omega.value_lower_bound(),
        )
    res = make_simple_finite(model, minimal_generators(support), budget)
    model, pmap, omega = res.model, res.pmap, res.pmap.apply_form(omega)
    t = None
    for g in res.entries:
        if t is None or model.ws.monomial_value(g) < model.ws.monomial_value(t):
            t = g
    value = omega.explicit_value()
    if value != model.ws.monomial_value(t):
        raise AssertionError("minimal generator misses the form's value")
    reduced = LogForm(
        model.ws, omega.s, 1,
        {key: ser.divide_monomial(t) for key, ser in omega.coeffs.items()},
    )
    if not reduced.is_log_elementary():
        raise AssertionError("reduction failed to produce a unit coefficient")
    return LogFinalResult(model, pmap, t, reduced)


# -- the right sweep ----------------------------------------------------------


@dataclass(frozen=True)
class PushRightResult:
    """Composite of one Puiseux package per dependent coordinate, in order."""

    model: Model
    pmap: PullbackMap
    packages: tuple


def push_right(model: Model, ell: int, budget: int = GAME_BUDGET) -> PushRightResult:
    """Run Puiseux packages on the first ``ell`` dependent coordinates.

    Any function, form, or pair that is not dominant in the source chart
    gains explicit value under the sweep, while dominant objects keep
    theirs; this is the tool that pushes the non-dominant content of an
    object to the right of any fixed bound.
    """
    if not 0 <= ell <= model.s:
        raise ValueError("sweep length exceeds the dependent coordinates")
    pmap = PullbackMap(model, model, [])
    packages: list[PuiseuxPackage] = []
    for j in range(ell):
        pkg = puiseux_package(model, j)
        model = pkg.model
        pmap = pmap.then(pkg.pmap)
        packages.append(pkg)
    return PushRightResult(model, pmap, tuple(packages))
