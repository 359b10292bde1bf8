"""Truncated multivariate series over the rationals.

A series lives over a weight system (the independent variables x, whose
exponents carry values) plus ``s`` dependent variables of value zero weight
in the grading sense.  Support is always finite; ignorance is explicit:

* ``prec_x`` — terms whose x-part has value >= this are unknown;
* ``prec_dep`` — terms of total dependent degree >= this are unknown;
* ``dep_floor`` — a certified lower bound for the x-value of every term
  hidden behind the dependent cut.  It is what lets the explicit value be
  *certified* rather than guessed: the minimum stored x-value m is the true
  explicit value exactly when m <= dep_floor.

The explicit value of a series counts only x-monomial values: it is the
minimum of v(x^a) over exponents a whose dependent-variable coefficient
series is nonzero.  Because the weights are rationally independent there is
at most one exponent per value, so the minimal term is unique — the fact
behind the dominant/recessive classification.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .errors import InsufficientPrecision, PrecisionExhausted
from .values import Value, WeightSystem, vmin

_INF = math.inf


@dataclass(frozen=True)
class Classification:
    """Outcome of a finality test at some bound gamma."""

    kind: str  # "dominant" | "recessive" | "not_final"
    value: "Value | None" = None
    exponent: "tuple | None" = None

    @property
    def is_dominant(self):
        return self.kind == "dominant"

    @property
    def is_recessive(self):
        return self.kind == "recessive"

    @property
    def is_final(self):
        return self.kind != "not_final"


class TruncatedSeries:
    __slots__ = ("ws", "s", "terms", "prec_x", "prec_dep", "dep_floor")

    def __init__(self, ws: WeightSystem, s: int, terms, prec_x=None, prec_dep=_INF, dep_floor=None):
        self.ws = ws
        self.s = int(s)
        self.prec_x = ws.infinity() if prec_x is None else prec_x
        self.prec_dep = prec_dep if prec_dep is not None else _INF
        if self.prec_dep == _INF:
            floor = ws.infinity()
        elif dep_floor is None:
            floor = ws.zero()
        else:
            floor = dep_floor
        clean = {}
        for (a, b), c in terms.items():
            c = Fraction(c)
            if c == 0:
                continue
            a, b = tuple(int(e) for e in a), tuple(int(e) for e in b)
            if len(a) != ws.r or len(b) != self.s:
                raise ValueError("exponent arity does not match scope")
            if any(e < 0 for e in a + b):
                raise ValueError("negative exponent")
            xv = ws.monomial_value(a)
            if not xv < self.prec_x:
                continue
            if sum(b) >= self.prec_dep:
                floor = vmin(floor, xv)
                continue
            key = (a, b)
            clean[key] = clean.get(key, Fraction(0)) + c
        self.terms = {k: v for k, v in clean.items() if v != 0}
        self.dep_floor = floor

    # -- constructors ---------------------------------------------------------

    @classmethod
    def zero(cls, ws, s):
        return cls(ws, s, {})

    @classmethod
    def constant(cls, ws, s, c):
        zr, zs = (0,) * ws.r, (0,) * s
        return cls(ws, s, {(zr, zs): Fraction(c)})

    @classmethod
    def one(cls, ws, s):
        return cls.constant(ws, s, 1)

    @classmethod
    def monomial(cls, ws, s, a, b, c=1):
        return cls(ws, s, {(tuple(a), tuple(b)): Fraction(c)})

    @classmethod
    def x_var(cls, ws, s, i):
        a = tuple(1 if k == i else 0 for k in range(ws.r))
        return cls.monomial(ws, s, a, (0,) * s)

    @classmethod
    def dep_var(cls, ws, s, j):
        b = tuple(1 if k == j else 0 for k in range(s))
        return cls.monomial(ws, s, (0,) * ws.r, b)

    # -- inspection -----------------------------------------------------------

    def is_zero(self):
        return not self.terms

    def is_exact_zero(self):
        return not self.terms and self.prec_x.infinite and self.prec_dep == _INF

    def is_unit(self):
        return ((0,) * self.ws.r, (0,) * self.s) in self.terms

    def constant_term(self) -> Fraction:
        return self.terms.get(((0,) * self.ws.r, (0,) * self.s), Fraction(0))

    def dep_order(self):
        """Minimal total dependent degree among stored terms (inf when none)."""
        if not self.terms:
            return self.prec_dep
        return min(sum(b) for _, b in self.terms)

    def support_min(self):
        """(value, exponent) of the unique minimal-value stored x-exponent."""
        best = None
        for (a, _b) in self.terms:
            xv = self.ws.monomial_value(a)
            if best is None or xv < best[0]:
                best = (xv, a)
        return best

    def value_lower_bound(self) -> Value:
        """Certified lower bound for the explicit value, never raises."""
        cands = [self.prec_x, self.dep_floor]
        m = self.support_min()
        if m is not None:
            cands.append(m[0])
        return vmin(*cands)

    def value_certified(self) -> bool:
        m = self.support_min()
        if m is None:
            return self.prec_x.infinite and self.prec_dep == _INF
        return m[0] <= self.dep_floor

    def explicit_value(self) -> Value:
        m = self.support_min()
        if m is None:
            if self.prec_x.infinite and self.prec_dep == _INF:
                return self.ws.infinity()
            raise InsufficientPrecision(
                "empty support under finite truncation; value only bounded below",
                known_bound=self.value_lower_bound(),
            )
        if m[0] <= self.dep_floor:
            return m[0]
        raise InsufficientPrecision(
            "minimal stored value exceeds the dependent-cut floor",
            known_bound=self.value_lower_bound(),
        )

    def classify_gamma_final(self, gamma: Value) -> Classification:
        """Dominant, recessive, or neither at the bound gamma.

        Dominant means: the unique minimal-value exponent t has value <= gamma
        and its dependent coefficient is a unit, so the series splits as
        x^t * unit + strictly-higher-value rest.  Recessive means the whole
        value is certified above gamma.
        """
        m = self.support_min()
        if m is None:
            lower = self.value_lower_bound()
            if lower > gamma:
                return Classification("recessive")
            if self.is_exact_zero():
                return Classification("recessive", value=self.ws.infinity())
            raise InsufficientPrecision(
                "cannot separate the value from gamma", known_bound=lower
            )
        val, t = m
        if val > gamma:
            if vmin(self.prec_x, self.dep_floor) > gamma:
                return Classification("recessive")
            raise InsufficientPrecision(
                "stored value exceeds gamma but hidden terms could undercut it",
                known_bound=self.value_lower_bound(),
            )
        # now val <= gamma; need the value certified
        if not val <= self.dep_floor:
            raise InsufficientPrecision(
                "minimal stored value not certified", known_bound=self.value_lower_bound()
            )
        if self.prec_dep < 1:
            raise InsufficientPrecision("dependent precision too small to test the unit part")
        if self.terms.get((t, (0,) * self.s), 0) != 0:
            return Classification("dominant", value=val, exponent=t)
        return Classification("not_final", value=val, exponent=t)

    # -- levels ---------------------------------------------------------------

    def z_levels(self, n_levels=None):
        """Coefficients of powers of the last dependent variable.

        Level k lives over one fewer dependent variable with its dependent
        precision reduced by k (clamped at zero: a level past the dependent
        cut is wholly unknown but still carries the x-floor of whatever the
        cut hides).  By default only levels up to the highest stored power
        are returned; pass ``n_levels`` to pad with empty levels that keep
        the same truncation data, so absent levels stay honest.
        """
        if self.s == 0:
            raise ValueError("no dependent variable to expand in")
        buckets = {}
        for (a, b), c in self.terms.items():
            buckets.setdefault(b[-1], {})[(a, b[:-1])] = c
        count = (max(buckets) if buckets else 0) + 1
        if n_levels is not None:
            count = max(count, n_levels)
        out = []
        for k in range(count):
            pd = max(0, self.prec_dep - k) if self.prec_dep != _INF else _INF
            out.append(
                TruncatedSeries(
                    self.ws, self.s - 1, buckets.get(k, {}),
                    prec_x=self.prec_x, prec_dep=pd, dep_floor=self.dep_floor,
                )
            )
        return out

    def n_known_levels(self):
        return self.prec_dep

    @classmethod
    def from_levels(cls, ws, levels, prec_x=None, prec_dep=_INF):
        """Reassemble a series from last-variable levels."""
        terms = {}
        s = levels[0].s + 1 if levels else 1
        for k, lev in enumerate(levels):
            for (a, b), c in lev.terms.items():
                terms[(a, b + (k,))] = c
        return cls(ws, s, terms, prec_x=prec_x, prec_dep=prec_dep)

    # -- arithmetic -----------------------------------------------------------

    def _binop_precision(self, other):
        return vmin(self.prec_x, other.prec_x), min(self.prec_dep, other.prec_dep), vmin(self.dep_floor, other.dep_floor)

    def __add__(self, other: "TruncatedSeries") -> "TruncatedSeries":
        if self.ws is not other.ws and self.ws.to_json() != other.ws.to_json():
            raise ValueError("series over different weight systems")
        if self.s != other.s:
            raise ValueError("series over different scopes")
        terms = dict(self.terms)
        for k, c in other.terms.items():
            terms[k] = terms.get(k, Fraction(0)) + c
        px, pd, fl = self._binop_precision(other)
        return TruncatedSeries(self.ws, self.s, terms, prec_x=px, prec_dep=pd, dep_floor=fl)

    def __neg__(self):
        return self.scale(-1)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, q) -> "TruncatedSeries":
        q = Fraction(q)
        if q == 0:
            return TruncatedSeries.zero(self.ws, self.s)
        return TruncatedSeries(
            self.ws, self.s, {k: q * c for k, c in self.terms.items()},
            prec_x=self.prec_x, prec_dep=self.prec_dep, dep_floor=self.dep_floor,
        )

    def __mul__(self, other: "TruncatedSeries") -> "TruncatedSeries":
        if self.s != other.s:
            raise ValueError("series over different scopes")
        if self.is_zero() and self.prec_x.infinite and self.prec_dep == _INF:
            return self
        if other.is_zero() and other.prec_x.infinite and other.prec_dep == _INF:
            return other
        va, vb = self.value_lower_bound(), other.value_lower_bound()
        px = vmin(self.prec_x + vb, other.prec_x + va)
        da, db = self.dep_order(), other.dep_order()
        pd = min(
            self.prec_dep + (db if db != _INF else 0),
            other.prec_dep + (da if da != _INF else 0),
        )
        fl = vmin(self.dep_floor + vb, other.dep_floor + va)
        terms = {}
        for (a1, b1), c1 in self.terms.items():
            for (a2, b2), c2 in other.terms.items():
                key = (
                    tuple(u + v for u, v in zip(a1, a2)),
                    tuple(u + v for u, v in zip(b1, b2)),
                )
                terms[key] = terms.get(key, Fraction(0)) + c1 * c2
        return TruncatedSeries(self.ws, self.s, terms, prec_x=px, prec_dep=pd, dep_floor=fl)

    def __pow__(self, n: int) -> "TruncatedSeries":
        if n < 0:
            raise ValueError("negative power; use inverse() explicitly")
        out = TruncatedSeries.one(self.ws, self.s)
        base = self
        while n:
            if n & 1:
                out = out * base
            base_needed = n >> 1
            if base_needed:
                base = base * base
            n >>= 1
        return out

    def inverse(self, max_steps=10000) -> "TruncatedSeries":
        """Inverse of a unit, expanded until the tail leaves the truncation."""
        c0 = self.constant_term()
        if c0 == 0:
            raise ValueError("series is not a unit")
        u = TruncatedSeries.one(self.ws, self.s) - self.scale(1 / c0)
        acc = TruncatedSeries.one(self.ws, self.s)
        pw = u
        steps = 0
        while not pw.is_zero():
            acc = acc + pw
            # the inverse is only determined to the input's own truncation,
            # so cap each power there — that is also what makes this stop
            pw = (pw * u).truncate(prec_x=self.prec_x, prec_dep=self.prec_dep)
            steps += 1
            if steps > max_steps:
                raise PrecisionExhausted(
                    "unit inverse does not terminate under the current truncation"
                )
        acc = acc.truncate(prec_x=self.prec_x, prec_dep=self.prec_dep)
        floor = self.ws.zero() if acc.prec_dep != _INF else self.ws.infinity()
        return TruncatedSeries(
            self.ws, self.s, acc.scale(1 / c0).terms,
            prec_x=acc.prec_x, prec_dep=acc.prec_dep, dep_floor=floor,
        )

    # -- structural operations ------------------------------------------------

    def truncate(self, prec_x=None, prec_dep=None) -> "TruncatedSeries":
        px = self.prec_x if prec_x is None else vmin(self.prec_x, prec_x)
        pd = self.prec_dep if prec_dep is None else min(self.prec_dep, prec_dep)
        return TruncatedSeries(self.ws, self.s, self.terms, prec_x=px, prec_dep=pd, dep_floor=self.dep_floor)

    def multiply_monomial(self, a_shift, c=1) -> "TruncatedSeries":
        a_shift = tuple(int(e) for e in a_shift)
        shift_v = self.ws.monomial_value(a_shift)
        terms = {
            (tuple(u + v for u, v in zip(a, a_shift)), b): Fraction(c) * co
            for (a, b), co in self.terms.items()
        }
        return TruncatedSeries(
            self.ws, self.s, terms,
            prec_x=self.prec_x + shift_v, prec_dep=self.prec_dep,
            dep_floor=self.dep_floor + shift_v,
        )

    def divide_monomial(self, a_shift) -> "TruncatedSeries":
        a_shift = tuple(int(e) for e in a_shift)
        for (a, _b) in self.terms:
            if any(u < v for u, v in zip(a, a_shift)):
                raise ValueError("monomial does not divide every term")
        shift_v = self.ws.monomial_value(a_shift)
        terms = {
            (tuple(u - v for u, v in zip(a, a_shift)), b): co
            for (a, b), co in self.terms.items()
        }
        return TruncatedSeries(
            self.ws, self.s, terms,
            prec_x=self.prec_x - shift_v, prec_dep=self.prec_dep,
            dep_floor=self.dep_floor - shift_v if not self.dep_floor.infinite else self.dep_floor,
        )

    def substitute_dep(self, j: int, repl: "TruncatedSeries") -> "TruncatedSeries":
        """Replace the j-th dependent variable by a series of the same scope."""
        out = TruncatedSeries(
            self.ws, self.s, {}, prec_x=self.prec_x, prec_dep=self.prec_dep, dep_floor=self.dep_floor
        )
        powers = {0: TruncatedSeries.one(self.ws, self.s)}

        def pw(n):
            if n not in powers:
                powers[n] = pw(n - 1) * repl
            return powers[n]

        for (a, b), c in self.terms.items():
            rest = b[:j] + (0,) + b[j + 1:]
            mono = TruncatedSeries(self.ws, self.s, {(a, rest): c},
                                   prec_x=self.prec_x, prec_dep=self.prec_dep,
                                   dep_floor=self.dep_floor)
            out = out + mono * pw(b[j])
        return out

    def x_log_derivative(self, i: int) -> "TruncatedSeries":
        """x_i * d/dx_i — exponentwise multiplication by a_i."""
        terms = {(a, b): c * a[i] for (a, b), c in self.terms.items() if a[i]}
        return TruncatedSeries(self.ws, self.s, terms, prec_x=self.prec_x,
                               prec_dep=self.prec_dep, dep_floor=self.dep_floor)

    def dep_derivative(self, j: int) -> "TruncatedSeries":
        terms = {}
        for (a, b), c in self.terms.items():
            if b[j]:
                nb = b[:j] + (b[j] - 1,) + b[j + 1:]
                terms[(a, nb)] = terms.get((a, nb), Fraction(0)) + c * b[j]
        pd = self.prec_dep - 1 if self.prec_dep != _INF else _INF
        return TruncatedSeries(self.ws, self.s, terms, prec_x=self.prec_x,
                               prec_dep=pd, dep_floor=self.dep_floor)

    def eval_dep_zero(self) -> "TruncatedSeries":
        """Constant-in-dependent-variables part, same scope."""
        terms = {(a, b): c for (a, b), c in self.terms.items() if sum(b) == 0}
        return TruncatedSeries(self.ws, self.s, terms, prec_x=self.prec_x,
                               prec_dep=self.prec_dep, dep_floor=self.ws.infinity()
                               if self.prec_dep >= 1 else self.dep_floor)

    def widen_scope(self, s_new: int) -> "TruncatedSeries":
        """Reinterpret over a larger dependent scope (new variables absent)."""
        if s_new < self.s:
            raise ValueError("cannot shrink scope")
        pad = (0,) * (s_new - self.s)
        terms = {(a, b + pad): c for (a, b), c in self.terms.items()}
        return TruncatedSeries(self.ws, s_new, terms, prec_x=self.prec_x,
                               prec_dep=self.prec_dep, dep_floor=self.dep_floor)

    # -- presentation ---------------------------------------------------------

    def sorted_terms(self):
        return sorted(
            self.terms.items(),
            key=lambda kv: (float(self.ws.monomial_value(kv[0][0])), kv[0]),
        )

    def __eq__(self, other):
        if not isinstance(other, TruncatedSeries):
            return NotImplemented
        return (
            self.terms == other.terms
            and self.prec_x == other.prec_x
            and self.prec_dep == other.prec_dep
            and self.s == other.s
        )

    def __hash__(self):
        return hash((frozenset(self.terms.items()), self.prec_x, self.prec_dep, self.s))

    def __repr__(self):
        if not self.terms:
            body = "0"
        else:
            bits = []
            for (a, b), c in self.sorted_terms()[:8]:
                factors = [str(c)] if c != 1 or (not any(a) and not any(b)) else []
                factors += [f"x{i+1}^{e}" if e != 1 else f"x{i+1}" for i, e in enumerate(a) if e]
                factors += [f"y{j+1}^{e}" if e != 1 else f"y{j+1}" for j, e in enumerate(b) if e]
                bits.append("*".join(factors))
            body = " + ".join(bits)
            if len(self.terms) > 8:
                body += f" + ({len(self.terms) - 8} more)"
        cut = "" if self.prec_x.infinite and self.prec_dep == _INF else f" [px={self.prec_x!r}, pd={self.prec_dep}]"
        return f"<{body}{cut}>"

    def to_json(self):
        lits = [
            {"coeff": str(c), "x": list(a), "dep": list(b)}
            for (a, b), c in self.sorted_terms()
        ]
        return {
            "terms": lits,
            "prec_x": self.prec_x.to_json(),
            "prec_dep": "inf" if self.prec_dep == _INF else int(self.prec_dep),
        }

    @classmethod
    def from_json(cls, ws, s, data) -> "TruncatedSeries":
        terms = {
            (tuple(t["x"]), tuple(t["dep"])): Fraction(t["coeff"])
            for t in data.get("terms", data if isinstance(data, list) else [])
        }
        prec_x = None
        prec_dep = _INF
        if isinstance(data, dict):
            if "prec_x" in data:
                prec_x = Value.from_json(data["prec_x"], basis=ws.basis)
            pd = data.get("prec_dep", "inf")
            prec_dep = _INF if pd == "inf" else int(pd)
        return cls(ws, s, terms, prec_x=prec_x, prec_dep=prec_dep)


# Contracted operation names as thin module-level wrappers.

def explicit_value(F: TruncatedSeries, ws=None) -> Value:
    return F.explicit_value()


def classify_gamma_final_fn(F: TruncatedSeries, gamma: Value, ws=None) -> Classification:
    return F.classify_gamma_final(gamma)


def z_levels(F: TruncatedSeries):
    return F.z_levels()


def ring_arith(F: TruncatedSeries, G: TruncatedSeries, op: str) -> TruncatedSeries:
    if op == "add":
        return F + G
    if op == "mul":
        return F * G
    raise ValueError(f"unknown op {op!r}")
