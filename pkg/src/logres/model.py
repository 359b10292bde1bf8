"""Parameterized regular local models and their value-directed transforms.

A model is one chart of the ambient space: r independent coordinates whose
positive weights are linearly independent over the rationals, plus s
dependent coordinates whose values are witnessed by explicit arcs --
truncated one-parameter series with exponents in the weight algebra.  The
arcs are the oracle: every comparison, residue and new value is read off
them, always in the forward direction (substitution and division), never by
inverting a series.

Three state transitions are provided:

* ``blowup`` -- one chart of the blow-up at a two-coordinate center.  The
  direction is decided by comparing the two values; the equal-value case
  introduces a rational translation whose residue comes from the arcs.
* ``ordered_change`` -- adds to one dependent coordinate a polynomial in the
  independent and *earlier* dependent coordinates, under the value
  constraint that keeps the new coordinate's value from dropping.
* ``puiseux_package`` -- the value-directed composite of blow-ups that ends
  in a translation and makes one dependent coordinate's value monomial.  It
  reports the exponent matrices of the composite substitution.

Each transition returns the new model together with a ``PullbackMap`` that
transports truncated series and logarithmic forms.  Precision bookkeeping is
conservative: a pullback never claims a term or a bound that the input's
truncation data do not certify.  A ``Transcript`` records transitions as
JSON lines and can re-execute them, checking every recorded residue, matrix
and state digest on the way.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from fractions import Fraction

from .errors import (
    BudgetExhausted,
    InsufficientArcPrecision,
    ValueConstraintViolated,
)
from .logforms import LogForm
from .series import TruncatedSeries
from .values import Value, WeightSystem, vmin

_INF = math.inf

#: Extra exponent margin (in units of 1) used when a blow-up stores the
#: quotient of two arcs with no intrinsic precision cut of its own.
ARC_WINDOW = 32

#: Dependent-coordinate truncation adopted when an exact form meets the one
#: series inverse a package's form transport needs.
DEFAULT_DEP_BUDGET = 32

#: Hard ceiling on elementary blow-ups inside a single package.
PACKAGE_BUDGET = 10_000


# -- arcs ---------------------------------------------------------------------


class GeneralizedArc:
    """A truncated one-parameter series with exponents in the value algebra.

    ``terms`` is a tuple of (exponent, coefficient) pairs with strictly
    increasing ``Value`` exponents and nonzero rational coefficients;
    ``prec_t`` is the exponent cut -- nothing is claimed at or above it.
    Exponents may be negative in intermediate arithmetic; the model layer
    checks positivity where a coordinate requires it.
    """

    __slots__ = ("terms", "prec_t")

    def __init__(self, terms, prec_t: Value):
        if not isinstance(prec_t, Value):
            raise TypeError("prec_t must be a Value")
        merged = {}
        for e, c in terms:
            c = Fraction(c)
            if c == 0:
                continue
            merged[e] = merged.get(e, Fraction(0)) + c
        kept = [(e, c) for e, c in merged.items() if c != 0 and e < prec_t]
        kept.sort(key=lambda t: t[0])
        self.terms = tuple(kept)
        self.prec_t = prec_t

    @classmethod
    def single(cls, exponent: Value, coeff, prec_t=None):
        prec = Value.infinity(exponent.basis) if prec_t is None else prec_t
        return cls([(exponent, Fraction(coeff))], prec)

    @classmethod
    def exact_zero(cls, basis):
        return cls((), Value.infinity(basis))

    # -- inspection

    @property
    def basis(self):
        return self.prec_t.basis

    def is_exact_zero(self):
        return not self.terms and self.prec_t.infinite

    def ord(self) -> Value:
        """Leading exponent; infinite for the exact zero arc."""
        if self.terms:
            return self.terms[0][0]
        if self.prec_t.infinite:
            return self.prec_t
        raise InsufficientArcPrecision(
            f"arc shows no term below its precision {self.prec_t!r}"
        )

    def ord_lower(self) -> Value:
        """A certified lower bound for the order, available unconditionally."""
        return self.terms[0][0] if self.terms else self.prec_t

    def leading(self):
        if not self.terms:
            raise InsufficientArcPrecision("arc has no leading term to report")
        return self.terms[0]

    def coeff_at(self, e: Value) -> Fraction:
        if not e < self.prec_t:
            raise InsufficientArcPrecision(
                f"exponent {e!r} is at or beyond the arc precision {self.prec_t!r}"
            )
        for ee, c in self.terms:
            if ee == e:
                return c
        return Fraction(0)

    # -- arithmetic

    def __add__(self, other: "GeneralizedArc") -> "GeneralizedArc":
        prec = vmin(self.prec_t, other.prec_t)
        return GeneralizedArc(list(self.terms) + list(other.terms), prec)

    def __neg__(self):
        return GeneralizedArc([(e, -c) for e, c in self.terms], self.prec_t)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, q) -> "GeneralizedArc":
        q = Fraction(q)
        if q == 0:
            return GeneralizedArc.exact_zero(self.basis)
        return GeneralizedArc([(e, q * c) for e, c in self.terms], self.prec_t)

    def shift(self, delta: Value) -> "GeneralizedArc":
        """Multiply by t^delta: all exponents and the cut move together."""
        return GeneralizedArc(
            [(e + delta, c) for e, c in self.terms], self.prec_t + delta
        )

    def __mul__(self, other: "GeneralizedArc") -> "GeneralizedArc":
        prec = vmin(self.prec_t + other.ord_lower(), other.prec_t + self.ord_lower())
        if not self.terms or not other.terms:
            return GeneralizedArc((), prec)
        # dense products dominate the running time, so do the pair loop on
        # plain integers: exponents share a bounded denominator and the
        # coefficients a common one per factor
        basis = self.basis
        eden = cden1 = cden2 = 1
        for e, c in self.terms:
            for q in e.coeffs:
                eden = eden * q.denominator // math.gcd(eden, q.denominator)
            cden1 = cden1 * c.denominator // math.gcd(cden1, c.denominator)
        for e, c in other.terms:
            for q in e.coeffs:
                eden = eden * q.denominator // math.gcd(eden, q.denominator)
            cden2 = cden2 * c.denominator // math.gcd(cden2, c.denominator)
        a = [
            (tuple(int(q * eden) for q in e.coeffs), int(c * cden1))
            for e, c in self.terms
        ]
        b = [
            (tuple(int(q * eden) for q in e.coeffs), int(c * cden2))
            for e, c in other.terms
        ]
        acc = {}
        for ka, ca in a:
            for kb, cb in b:
                k = tuple(x + y for x, y in zip(ka, kb))
                v = acc.get(k)
                acc[k] = ca * cb if v is None else v + ca * cb
        cden = cden1 * cden2
        terms = [
            (Value(tuple(Fraction(x, eden) for x in k), basis), Fraction(c, cden))
            for k, c in acc.items()
            if c
        ]
        return GeneralizedArc(terms, prec)

    def pow(self, n: int) -> "GeneralizedArc":
        if n < 0:
            raise ValueError("negative arc power; divide instead")
        out = GeneralizedArc.single(Value.rational(0, self.basis), 1)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base if n > 1 else base
            n >>= 1
        return out

    def truncate(self, prec: Value) -> "GeneralizedArc":
        return GeneralizedArc(self.terms, vmin(self.prec_t, prec))

    def div(self, den: "GeneralizedArc", window: Value | None = None) -> "GeneralizedArc":
        """Quotient arc.  Single-term denominators divide exactly; otherwise
        the unit part is expanded geometrically down to the smaller of the
        precision the inputs certify and the requested window."""
        if not den.terms:
            if den.prec_t.infinite:
                raise ZeroDivisionError("division by the exact zero arc")
            raise InsufficientArcPrecision(
                "divisor arc shows no term; deepen its precision first"
            )
        e, c = den.leading()
        if len(den.terms) == 1:
            terms = [(ee - e, cc / c) for ee, cc in self.terms]
            return GeneralizedArc(terms, self.prec_t - e)
        num_low = self.ord_lower()
        induced = vmin(self.prec_t - e, den.prec_t - e - e + num_low)
        target = induced if window is None else vmin(induced, window)
        if target.infinite:
            raise ValueError(
                "exact division by a multi-term arc does not terminate; "
                "pass a precision window"
            )
        if not self.terms:
            return GeneralizedArc((), target)
        # long division: peel the least remainder exponent, emit one quotient
        # term, subtract that multiple of the denominator's tail
        cutoff = target + e  # remainder content at or above this is irrelevant
        rem = {ee: cc for ee, cc in self.terms if ee < cutoff}
        tail = den.terms[1:]
        out = []
        guard = 0
        while rem:
            e_r = min(rem)
            c_q = rem.pop(e_r) / c
            out.append((e_r - e, c_q))
            for ee, cc in tail:
                k = e_r + (ee - e)
                if k < cutoff:
                    v = rem.get(k, Fraction(0)) - c_q * cc
                    if v:
                        rem[k] = v
                    else:
                        rem.pop(k, None)
            guard += 1
            if guard > 200_000:
                raise BudgetExhausted("long division in arc quotient ran away")
        return GeneralizedArc(out, target)

    # -- serialization & comparison

    def to_json(self):
        return {
            "terms": [[e.to_json(), str(c)] for e, c in self.terms],
            "prec": self.prec_t.to_json(),
        }

    @classmethod
    def from_json(cls, data, basis) -> "GeneralizedArc":
        terms = [
            (Value.from_json(e, basis), Fraction(c)) for e, c in data["terms"]
        ]
        return cls(terms, Value.from_json(data["prec"], basis))

    def __eq__(self, other):
        if not isinstance(other, GeneralizedArc):
            return NotImplemented
        return self.terms == other.terms and self.prec_t == other.prec_t

    def __repr__(self):
        body = " + ".join(f"{c}*t^({e!r})" for e, c in self.terms) or "0"
        return f"<arc {body} + O(t^{self.prec_t!r})>"


def _refine_leading(make, start_window: Value, what: str) -> GeneralizedArc:
    """Evaluate ``make(window)`` with growing windows until a term shows.

    Stops honestly: if the returned arc's precision falls short of the window
    the inputs are exhausted; if doubling the window 64 times shows nothing
    the quantity is treated as indistinguishable from zero.
    """
    window = start_window
    for _ in range(64):
        arc = make(window)
        if arc.terms:
            return arc
        if arc.prec_t < window:
            raise InsufficientArcPrecision(
                f"{what}: inputs certify nothing below {arc.prec_t!r}; "
                "deepen the input arcs"
            )
        window = window.scale(2)
    raise InsufficientArcPrecision(
        f"{what}: no leading term within the doubling guard; "
        "the quantity may vanish identically"
    )


# -- the model ----------------------------------------------------------------


class Model:
    """One chart: weighted independent coordinates plus arc-witnessed
    dependent coordinates.  Validation ties every recorded value to the
    leading exponent of its arc and keeps dependent values inside the
    rational span of the weights."""

    __slots__ = ("ws", "x_names", "dep_names", "dep_values", "arcs", "history")

    def __init__(self, ws: WeightSystem, x_names, dep_names, dep_values, arcs,
                 history=None):
        self.history = history if history is not None else Transcript()
        self.ws = ws
        self.x_names = tuple(str(n) for n in x_names)
        self.dep_names = tuple(str(n) for n in dep_names)
        self.dep_values = tuple(dep_values)
        self.arcs = dict(arcs)
        names = self.x_names + self.dep_names
        if len(set(names)) != len(names):
            raise ValueError("coordinate names must be pairwise distinct")
        if len(self.x_names) != ws.r:
            raise ValueError("need exactly one name per weight")
        if len(self.dep_values) != len(self.dep_names):
            raise ValueError("need exactly one value per dependent coordinate")
        if set(self.arcs) != set(names):
            raise ValueError("every coordinate needs an arc")
        for i, n in enumerate(self.x_names):
            if self.arcs[n].ord() != ws.weights[i]:
                raise ValueError(f"arc of {n} does not realize its weight")
        for j, n in enumerate(self.dep_names):
            v = self.dep_values[j]
            if v.infinite or v.sign() <= 0:
                raise ValueError(f"dependent coordinate {n} needs a positive finite value")
            if self.arcs[n].ord() != v:
                raise ValueError(f"arc of {n} does not realize its recorded value")
            if ws.express_in_weights(v) is None:
                raise ValueError(
                    f"value of {n} lies outside the rational span of the weights"
                )

    @classmethod
    def initial(cls, ws: WeightSystem, x_names, dep_arcs, x_arcs=None) -> "Model":
        """Starting chart.  ``dep_arcs`` maps dependent names to arcs, in
        coordinate order; independent arcs default to pure powers t^w."""
        arcs = {}
        x_names = tuple(x_names)
        for i, n in enumerate(x_names):
            if x_arcs and n in x_arcs:
                arcs[n] = x_arcs[n]
            else:
                arcs[n] = GeneralizedArc.single(ws.weights[i], 1)
        dep_names = tuple(dep_arcs)
        dep_values = []
        for n, arc in dep_arcs.items():
            arcs[n] = arc
            dep_values.append(arc.ord())
        return cls(ws, x_names, dep_names, dep_values, arcs)

    # -- shape

    @property
    def r(self) -> int:
        return self.ws.r

    @property
    def s(self) -> int:
        return len(self.dep_names)

    def x_index(self, name: str) -> int:
        return self.x_names.index(name)

    def dep_index(self, name: str) -> int:
        return self.dep_names.index(name)

    def coordinate_value(self, name: str) -> Value:
        if name in self.x_names:
            return self.ws.weights[self.x_index(name)]
        return self.dep_values[self.dep_index(name)]

    # -- ring and module constructors bound to this chart

    def series(self, terms=None, **kw) -> TruncatedSeries:
        return TruncatedSeries(self.ws, self.s, terms or {}, **kw)

    def x_series(self, i: int) -> TruncatedSeries:
        return TruncatedSeries.x_var(self.ws, self.s, i)

    def dep_series(self, j: int) -> TruncatedSeries:
        return TruncatedSeries.dep_var(self.ws, self.s, j)

    def form(self, degree: int, coeffs=None) -> LogForm:
        return LogForm(self.ws, self.s, degree, coeffs or {})

    def dep_relation(self, j: int):
        """The dependent value as an integer relation: d * value = sum p_i w_i
        with d >= 1 and gcd(d, p) = 1."""
        coeffs = self.ws.express_in_weights(self.dep_values[j])
        if coeffs is None:  # impossible after validation; keep the guard
            raise ValueError("dependent value left the rational span of the weights")
        d = 1
        for q in coeffs:
            d = d * q.denominator // math.gcd(d, q.denominator)
        p = tuple(int(q * d) for q in coeffs)
        g = d
        for e in p:
            g = math.gcd(g, abs(e))
        if g != 1:  # cannot happen: the relation is primitive by construction
            raise AssertionError("dependent relation is not primitive")
        return d, p

    # -- oracle

    def eval_along_arcs(self, F: TruncatedSeries) -> GeneralizedArc:
        """Substitute every coordinate's arc into a truncated series.

        The result's precision accounts for what F's truncation hides: terms
        cut in x live at or above prec_x, terms cut in the dependent degree
        at or above dep_floor plus prec_dep times the smallest dependent
        value."""
        basis = self.ws.basis
        total = GeneralizedArc.exact_zero(basis)
        powers = {}

        def apow(name, n):
            key = (name, n)
            if key not in powers:
                powers[key] = self.arcs[name].pow(n)
            return powers[key]

        for (a, b), c in F.terms.items():
            prod = GeneralizedArc.single(Value.rational(0, basis), c)
            for i, e in enumerate(a):
                if e:
                    prod = prod * apow(self.x_names[i], e)
            for j, e in enumerate(b):
                if e:
                    prod = prod * apow(self.dep_names[j], e)
            total = total + prod
        bound = F.prec_x
        if F.prec_dep != _INF and self.s:
            mdep = self.dep_values[0]
            for v in self.dep_values[1:]:
                mdep = vmin(mdep, v)
            bound = vmin(bound, F.dep_floor + mdep.scale(F.prec_dep))
        return total.truncate(bound)

    # -- serialization

    def to_json(self):
        deps = []
        for j, n in enumerate(self.dep_names):
            d, p = self.dep_relation(j)
            deps.append({"name": n, "d": d, "p": list(p)})
        return {
            "weights": self.ws.to_json(),
            "x": list(self.x_names),
            "dep": deps,
            "arcs": {n: arc.to_json() for n, arc in self.arcs.items()},
        }

    @classmethod
    def from_json(cls, data) -> "Model":
        ws = WeightSystem.from_json(data["weights"])
        basis = ws.basis
        arcs = {n: GeneralizedArc.from_json(a, basis) for n, a in data["arcs"].items()}
        dep_names, dep_values = [], []
        for entry in data["dep"]:
            dep_names.append(entry["name"])
            d = int(entry["d"])
            q = [Fraction(int(pi), d) for pi in entry["p"]]
            dep_values.append(ws.monomial_value(q))
        return cls(ws, data["x"], dep_names, dep_values, arcs)

    def state_digest(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def state_equals(self, other: "Model") -> bool:
        return self.to_json() == other.to_json()

    def describe(self):
        """A human-oriented summary, JSON-safe."""
        return {
            "independent": [
                {"name": n, "weight": float(self.ws.weights[i])}
                for i, n in enumerate(self.x_names)
            ],
            "dependent": [
                {
                    "name": n,
                    "value": float(self.dep_values[j]),
                    "arc_terms": len(self.arcs[n].terms),
                }
                for j, n in enumerate(self.dep_names)
            ],
        }

    def __repr__(self):
        xs = ", ".join(self.x_names)
        ys = ", ".join(self.dep_names)
        return f"<Model x=({xs}) dep=({ys})>"


# -- transcripts --------------------------------------------------------------


@dataclass
class TransformStep:
    """One recorded transition: a kind tag plus a JSON-safe payload that is
    rich enough to re-execute and verify the transition."""

    kind: str
    payload: dict

    def to_json(self):
        return {"kind": self.kind, "payload": self.payload}

    @classmethod
    def from_json(cls, data) -> "TransformStep":
        return cls(data["kind"], data["payload"])


class Transcript:
    """Append-only record of model transitions, one JSON object per line."""

    def __init__(self, steps=None):
        self.steps = list(steps or [])

    def append(self, step: TransformStep):
        self.steps.append(step)

    def __len__(self):
        return len(self.steps)

    def to_jsonl(self) -> str:
        return "".join(
            json.dumps(s.to_json(), sort_keys=True, separators=(",", ":")) + "\n"
            for s in self.steps
        )

    @classmethod
    def from_jsonl(cls, text: str) -> "Transcript":
        steps = [
            TransformStep.from_json(json.loads(line))
            for line in text.splitlines()
            if line.strip()
        ]
        return cls(steps)

    def write(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_jsonl())

    @classmethod
    def load(cls, path) -> "Transcript":
        with open(path) as fh:
            return cls.from_jsonl(fh.read())

    def replay(self, model: Model):
        """Re-execute every step against ``model``, checking each recorded
        payload (directions, residues, matrices, state digests) bit for bit.
        Returns the final model and the list of pullback maps."""
        maps = []
        for idx, step in enumerate(self.steps):
            model, pmap, redone = _execute_step(model, step)
            if redone.kind != step.kind or redone.payload != step.payload:
                raise ValueError(
                    f"replay mismatch at step {idx}: recorded {step.kind} "
                    f"{step.payload}, re-execution produced {redone.kind} "
                    f"{redone.payload}"
                )
            maps.append(pmap)
        return model, maps


def _execute_step(model: Model, step: TransformStep):
    if step.kind in ("blowup-xx", "blowup-xy", "blowup-translation"):
        center = step.payload["center"]
        out, pmap, redone = blowup(model, (center[0], center[1], center[2]))
        return out, pmap, redone
    if step.kind == "ordered-change":
        psi = TruncatedSeries.from_json(model.ws, model.s, step.payload["psi"])
        out, pmap, redone = ordered_change(model, step.payload["dep"], psi)
        return out, pmap, redone
    if step.kind == "puiseux-package":
        pkg = puiseux_package(model, step.payload["dep"])
        return pkg.model, pkg.pmap, pkg.step
    raise ValueError(f"unknown transcript step kind {step.kind!r}")


# -- pullback steps -----------------------------------------------------------


def _divide_dep(F: TruncatedSeries, j: int) -> TruncatedSeries:
    """Exact division of a series by the j-th dependent coordinate."""
    terms = {}
    for (a, b), c in F.terms.items():
        if b[j] == 0:
            raise ValueError(
                "coefficient is not divisible by the dependent coordinate; "
                "this form cannot be transported through the divide-independent "
                "chart on its own"
            )
        b2 = b[:j] + (b[j] - 1,) + b[j + 1:]
        terms[(a, b2)] = c
    pd = F.prec_dep if F.prec_dep == _INF else max(F.prec_dep - 1, 0)
    return TruncatedSeries(F.ws, F.s, terms, F.prec_x, pd, F.dep_floor)


def _transform_form(form: LogForm, pull, sub, dst_ws: WeightSystem, s: int) -> LogForm:
    """Rewrite a form: transport each coefficient with ``pull`` and expand
    every basis covector through ``sub``.

    ``sub`` maps a symbol to a list of (target symbol, op) pairs, ``op``
    being a callable applied to the transported coefficient (None = keep).
    Unlisted symbols pass through unchanged.  Repeated symbols in an
    expanded key wedge to zero and are dropped."""
    out = {}
    for key, C in form.coeffs.items():
        branches = [((), pull(C))]
        for sym in key:
            expansion = sub.get(sym, [(sym, None)])
            nxt = []
            for syms_acc, ser in branches:
                for tgt, op in expansion:
                    if tgt in syms_acc:
                        continue
                    ser2 = ser if op is None else op(ser)
                    nxt.append((syms_acc + (tgt,), ser2))
            branches = nxt
        for syms_acc, ser in branches:
            if syms_acc in out:
                out[syms_acc] = out[syms_acc] + ser
            else:
                out[syms_acc] = ser
    return LogForm(dst_ws, s, form.degree, out)


class _StepXX:
    """Chart x_big = x'_small * x'_big of the blow-up at two independent
    coordinates; monomial values are preserved, so all precisions carry."""

    kind = "xx"

    def __init__(self, src_ws, dst_ws, s, small, big):
        self.src_ws, self.dst_ws, self.s = src_ws, dst_ws, s
        self.small, self.big = small, big

    def apply_series(self, F: TruncatedSeries) -> TruncatedSeries:
        terms = {}
        for (a, b), c in F.terms.items():
            a2 = list(a)
            a2[self.small] += a[self.big]
            key = (tuple(a2), b)
            terms[key] = terms.get(key, Fraction(0)) + c
        return TruncatedSeries(
            self.dst_ws, self.s, terms, F.prec_x, F.prec_dep, F.dep_floor
        )

    def apply_form(self, w: LogForm) -> LogForm:
        sub = {
            ("X", self.big): [
                (("X", self.small), None),
                (("X", self.big), None),
            ]
        }
        return _transform_form(w, self.apply_series, sub, self.dst_ws, self.s)


class _StepXYComb:
    """Chart y_j = x'_i * y'_j: the dependent coordinate is divided."""

    kind = "xy-comb"

    def __init__(self, ws, s, i, j):
        self.ws, self.s, self.i, self.j = ws, s, i, j

    def apply_series(self, F: TruncatedSeries) -> TruncatedSeries:
        terms = {}
        for (a, b), c in F.terms.items():
            a2 = list(a)
            a2[self.i] += b[self.j]
            key = (tuple(a2), b)
            terms[key] = terms.get(key, Fraction(0)) + c
        floor = F.dep_floor
        if self.s == 1 and F.prec_dep != _INF:
            floor = F.dep_floor + self.ws.weights[self.i].scale(F.prec_dep)
        return TruncatedSeries(self.ws, self.s, terms, F.prec_x, F.prec_dep, floor)

    def apply_form(self, w: LogForm) -> LogForm:
        i, j = self.i, self.j
        xi = TruncatedSeries.x_var(self.ws, self.s, i)
        xiyj = xi * TruncatedSeries.dep_var(self.ws, self.s, j)
        sub = {
            ("Y", j): [
                (("X", i), lambda C: C * xiyj),
                (("Y", j), lambda C: C * xi),
            ]
        }
        return _transform_form(w, self.apply_series, sub, self.ws, self.s)


class _StepXYRev:
    """Chart x_i = x'_i * y'_j: the independent coordinate is divided.  The
    x-precision scales by a certified rational lower bound of the weight
    ratio; dependent degrees grow and the usual cut refolds them."""

    kind = "xy-rev"

    def __init__(self, src_ws, dst_ws, s, i, j, ratio_floor: Fraction):
        self.src_ws, self.dst_ws, self.s = src_ws, dst_ws, s
        self.i, self.j = i, j
        self.ratio_floor = ratio_floor

    def _scale_bound(self, v: Value) -> Value:
        if v.infinite:
            return v
        if self.ratio_floor == 0:
            return Value.rational(0, v.basis)
        return v.scale(self.ratio_floor)

    def apply_series(self, F: TruncatedSeries) -> TruncatedSeries:
        terms = {}
        for (a, b), c in F.terms.items():
            b2 = list(b)
            b2[self.j] += a[self.i]
            key = (a, tuple(b2))
            terms[key] = terms.get(key, Fraction(0)) + c
        return TruncatedSeries(
            self.dst_ws,
            self.s,
            terms,
            self._scale_bound(F.prec_x),
            F.prec_dep,
            self._scale_bound(F.dep_floor),
        )

    def apply_form(self, w: LogForm) -> LogForm:
        i, j = self.i, self.j
        sub = {
            ("X", i): [
                (("X", i), None),
                (("Y", j), lambda C: _divide_dep(C, j)),
            ]
        }
        return _transform_form(w, self.apply_series, sub, self.dst_ws, self.s)


class _StepTranslate:
    """Chart y_j = x'_i * (y'_j + lam) with a nonzero rational residue.  For
    a single dependent coordinate the dependent cut converts into an
    x-precision bound and the result becomes exact in the dependent
    direction; otherwise the leak of hidden high-degree terms into low
    degrees caps the x-precision at dep_floor plus one weight."""

    kind = "translate"

    def __init__(self, ws, s, i, j, lam: Fraction):
        self.ws, self.s, self.i, self.j = ws, s, i, j
        self.lam = Fraction(lam)

    def apply_series(self, F: TruncatedSeries) -> TruncatedSeries:
        i, j, lam = self.i, self.j, self.lam
        terms = {}
        for (a, b), c in F.terms.items():
            bj = b[j]
            a2 = list(a)
            a2[i] += bj
            a2 = tuple(a2)
            for k in range(bj + 1):
                coeff = c * math.comb(bj, k) * lam ** (bj - k)
                b2 = b[:j] + (k,) + b[j + 1:]
                key = (a2, b2)
                terms[key] = terms.get(key, Fraction(0)) + coeff
        wi = self.ws.weights[i]
        if F.prec_dep == _INF:
            return TruncatedSeries(self.ws, self.s, terms, F.prec_x, _INF, None)
        if self.s == 1:
            px = vmin(F.prec_x, F.dep_floor + wi.scale(F.prec_dep))
            return TruncatedSeries(self.ws, self.s, terms, px, _INF, None)
        px = vmin(F.prec_x, F.dep_floor + wi)
        return TruncatedSeries(self.ws, self.s, terms, px, F.prec_dep, F.dep_floor)

    def apply_form(self, w: LogForm) -> LogForm:
        i, j = self.i, self.j
        xi = TruncatedSeries.x_var(self.ws, self.s, i)
        shifted = xi * (
            TruncatedSeries.dep_var(self.ws, self.s, j)
            + TruncatedSeries.constant(self.ws, self.s, self.lam)
        )
        sub = {
            ("Y", j): [
                (("X", i), lambda C: C * shifted),
                (("Y", j), lambda C: C * xi),
            ]
        }
        return _transform_form(w, self.apply_series, sub, self.ws, self.s)


class _StepOrdered:
    """Substitution y_l = y'_l - psi with psi an exact polynomial in the
    independent and earlier dependent coordinates."""

    kind = "ordered"

    def __init__(self, ws, s, ell, psi: TruncatedSeries, v_ell: Value):
        self.ws, self.s, self.ell = ws, s, ell
        self.psi = psi
        self.v_ell = v_ell
        degs = [sum(b) for (_, b) in psi.terms]
        self.min_dep_degree = min(degs) if degs else None

    def apply_series(self, F: TruncatedSeries) -> TruncatedSeries:
        repl = TruncatedSeries.dep_var(self.ws, self.s, self.ell) - self.psi
        G = F.substitute_dep(self.ell, repl)
        if (
            self.min_dep_degree == 0
            and F.prec_dep != _INF
        ):
            # dependent-free replacement terms can push hidden high-degree
            # content down to low degrees, at x-value >= dep_floor + v(y_l)
            px = vmin(G.prec_x, F.dep_floor + self.v_ell)
            G = TruncatedSeries(self.ws, self.s, G.terms, px, G.prec_dep, G.dep_floor)
        return G

    def apply_form(self, w: LogForm) -> LogForm:
        ell = self.ell
        entries = [(("Y", ell), None)]
        for i in range(self.ws.r):
            der = self.psi.x_log_derivative(i)
            if not der.is_exact_zero():
                entries.append((("X", i), lambda C, d=der: -(C * d)))
        for m in range(ell):
            der = self.psi.dep_derivative(m)
            if not der.is_exact_zero():
                entries.append((("Y", m), lambda C, d=der: -(C * d)))
        sub = {("Y", ell): entries}
        return _transform_form(w, self.apply_series, sub, self.ws, self.s)


class _StepPackage:
    """Composite of a package's elementary steps.  Series fold through the
    steps one by one; forms go through the exponent matrices instead, so the
    only series inverse is the final translated unit."""

    kind = "package"

    def __init__(self, src_ws, dst_ws, s, ell, steps, x_matrix, full_matrix, xi):
        self.src_ws, self.dst_ws, self.s = src_ws, dst_ws, s
        self.ell = ell
        self.steps = steps
        self.x_matrix = x_matrix
        self.full_matrix = full_matrix
        self.xi = Fraction(xi)

    def apply_series(self, F: TruncatedSeries) -> TruncatedSeries:
        for st in self.steps:
            F = st.apply_series(F)
        return F

    def apply_form(self, w: LogForm) -> LogForm:
        ws, s, ell = self.dst_ws, self.s, self.ell
        r = ws.r
        budget = _INF
        for C in w.coeffs.values():
            if C.prec_dep != _INF:
                budget = min(budget, C.prec_dep)
        if budget == _INF:
            budget = DEFAULT_DEP_BUDGET
        unit = (
            TruncatedSeries.constant(ws, s, self.xi)
            + TruncatedSeries.dep_var(ws, s, ell)
        ).truncate(prec_dep=int(budget))
        inv = unit.inverse()

        H = self.full_matrix
        sub = {}
        for i in range(r):
            entries = []
            for k in range(r):
                e = H[i][k]
                if e:
                    entries.append((("X", k), lambda C, q=Fraction(e): C.scale(q)))
            bi = H[i][r]
            if bi:
                entries.append(
                    (("Y", ell), lambda C, q=Fraction(bi): (C * inv).scale(q))
                )
            sub[("X", i)] = entries
        # dy_l = y_l * (sum alpha0_k dx'_k/x'_k + beta0 * unit^{-1} dy'_l)
        alpha0 = H[r][:r]
        beta0 = H[r][r]
        a_exp = tuple(int(e) for e in alpha0)
        y_series = TruncatedSeries.monomial(ws, s, a_exp, (0,) * s) * _unit_power(
            ws, s, ell, self.xi, beta0
        )
        entries0 = []
        for k in range(r):
            if alpha0[k]:
                entries0.append(
                    (("X", k), lambda C, q=Fraction(alpha0[k]): (C * y_series).scale(q))
                )
        entries0.append(
            (("Y", ell), lambda C: (C * y_series * inv).scale(Fraction(beta0)))
        )
        sub[("Y", ell)] = entries0
        return _transform_form(w, self.apply_series, sub, ws, s)


def _unit_power(ws, s, ell, xi, n: int) -> TruncatedSeries:
    """(y_l + xi)^n as an exact polynomial series."""
    out = TruncatedSeries.one(ws, s)
    base = TruncatedSeries.dep_var(ws, s, ell) + TruncatedSeries.constant(ws, s, xi)
    for _ in range(int(n)):
        out = out * base
    return out


class PullbackMap:
    """Transport of series and forms from a source chart to a target chart."""

    def __init__(self, src: Model, dst: Model, steps):
        self.src = src
        self.dst = dst
        self.steps = list(steps)

    def apply_series(self, F: TruncatedSeries) -> TruncatedSeries:
        for st in self.steps:
            F = st.apply_series(F)
        return F

    def apply_form(self, w: LogForm) -> LogForm:
        for st in self.steps:
            w = st.apply_form(w)
        return w

    def apply(self, obj):
        if isinstance(obj, TruncatedSeries):
            return self.apply_series(obj)
        if isinstance(obj, LogForm):
            return self.apply_form(obj)
        raise TypeError(f"cannot pull back objects of type {type(obj).__name__}")

    def then(self, other: "PullbackMap") -> "PullbackMap":
        return PullbackMap(self.src, other.dst, self.steps + other.steps)


def pullback(pmap: PullbackMap, obj):
    """Functional entry point: transport a series or form through a map."""
    return pmap.apply(obj)


# -- blow-ups -----------------------------------------------------------------


def _stored_div(num: GeneralizedArc, den: GeneralizedArc, expected: Value) -> GeneralizedArc:
    """Quotient arc as stored on a model: exact when the denominator is a
    single term, otherwise windowed a fixed margin past the expected order."""
    unit = Value.rational(1, num.basis)
    window = expected + unit.scale(ARC_WINDOW)
    q = num.div(den, window=window)
    if not q.terms:
        raise InsufficientArcPrecision(
            "quotient arc shows no term; the input arcs are too shallow"
        )
    if q.ord() != expected:
        raise ValueError("quotient arc does not realize the expected value")
    return q


def blowup(model: Model, center, transcript: Transcript | None = None):
    """One chart of the blow-up at a two-coordinate center.

    ``center`` is ("xx", i, j) for two independent coordinates or
    ("xy", i, j) for independent i and dependent j.  Comparing the two
    values fixes the chart: the larger-valued coordinate is divided by the
    smaller.  Equal values (only possible in the mixed case) force a
    translation whose rational residue is read off the arcs.

    Returns (new model, pullback map, recorded step).
    """
    kind, i, j = center
    ws = model.ws
    s = model.s
    if kind == "xx":
        if not (0 <= i < ws.r and 0 <= j < ws.r) or i == j:
            raise ValueError("center needs two distinct independent coordinates")
        wi, wj = ws.weights[i], ws.weights[j]
        if wi < wj:
            small, big = i, j
        elif wj < wi:
            small, big = j, i
        else:  # unreachable: weights are independent over the rationals
            raise ValueError("equal weights cannot occur in a valid model")
        new_weights = list(ws.weights)
        new_weights[big] = ws.weights[big] - ws.weights[small]
        dst_ws = WeightSystem(ws.basis, new_weights)
        arcs = dict(model.arcs)
        nb, ns = model.x_names[big], model.x_names[small]
        arcs[nb] = _stored_div(arcs[nb], arcs[ns], new_weights[big])
        dst = Model(
            dst_ws, model.x_names, model.dep_names, model.dep_values, arcs,
            history=Transcript(model.history.steps),
        )
        step = TransformStep(
            "blowup-xx",
            {
                "center": ["xx", i, j],
                "divided": nb,
                "digest": dst.state_digest(),
            },
        )
        dst.history.append(step)
        pmap = PullbackMap(model, dst, [_StepXX(ws, dst_ws, s, small, big)])
        if transcript is not None:
            transcript.append(step)
        return dst, pmap, step

    if kind != "xy":
        raise ValueError(f"unknown center kind {kind!r}")
    if not (0 <= i < ws.r and 0 <= j < s):
        raise ValueError("center needs one independent and one dependent coordinate")
    wi = ws.weights[i]
    vj = model.dep_values[j]
    xn, yn = model.x_names[i], model.dep_names[j]

    if wi < vj:
        # divide the dependent coordinate: y_j = x'_i y'_j
        newv = vj - wi
        arcs = dict(model.arcs)
        arcs[yn] = _stored_div(arcs[yn], arcs[xn], newv)
        dep_values = list(model.dep_values)
        dep_values[j] = newv
        dst = Model(
            ws, model.x_names, model.dep_names, dep_values, arcs,
            history=Transcript(model.history.steps),
        )
        step = TransformStep(
            "blowup-xy",
            {
                "center": ["xy", i, j],
                "divided": yn,
                "digest": dst.state_digest(),
            },
        )
        dst.history.append(step)
        pmap = PullbackMap(model, dst, [_StepXYComb(ws, s, i, j)])
        if transcript is not None:
            transcript.append(step)
        return dst, pmap, step

    if vj < wi:
        # divide the independent coordinate: x_i = x'_i y'_j
        d, p = model.dep_relation(j)
        if p[i] == d:
            raise ValueError(
                "this center would collapse the independent coordinate's weight"
            )
        new_weights = list(ws.weights)
        new_weights[i] = wi - vj
        dst_ws = WeightSystem(ws.basis, new_weights)
        arcs = dict(model.arcs)
        arcs[xn] = _stored_div(arcs[xn], arcs[yn], new_weights[i])
        dst = Model(
            dst_ws, model.x_names, model.dep_names, model.dep_values, arcs,
            history=Transcript(model.history.steps),
        )
        ratio = _ratio_floor(new_weights[i], wi)
        step = TransformStep(
            "blowup-xy",
            {
                "center": ["xy", i, j],
                "divided": xn,
                "digest": dst.state_digest(),
            },
        )
        dst.history.append(step)
        pmap = PullbackMap(model, dst, [_StepXYRev(ws, dst_ws, s, i, j, ratio)])
        if transcript is not None:
            transcript.append(step)
        return dst, pmap, step

    # equal values: translation chart y_j = x'_i (y'_j + lam)
    basis = ws.basis
    unit = Value.rational(1, basis)
    w0 = unit.scale(ARC_WINDOW)
    q0 = model.arcs[yn].div(model.arcs[xn], window=w0)
    if not q0.terms:
        raise InsufficientArcPrecision(
            "arcs are too shallow to read the translation residue"
        )
    e0, lam = q0.leading()
    if e0 != ws.zero():  # unreachable: equal values mean the quotient is a unit
        raise AssertionError("translation quotient does not start at exponent 0")

    def residue_free(window):
        q = model.arcs[yn].div(model.arcs[xn], window=window)
        return GeneralizedArc(q.terms[1:], q.prec_t)

    residual = _refine_leading(residue_free, w0, f"translation at ({xn}, {yn})")
    newv = residual.ord()
    if newv.sign() <= 0:  # unreachable: the constant head was removed
        raise AssertionError("translated coordinate has non-positive value")
    if ws.express_in_weights(newv) is None:
        raise ValueError(
            "translation exposes a value outside the rational span of the "
            "weights; the model's rank does not match these arcs"
        )
    arcs = dict(model.arcs)
    arcs[yn] = residual
    dep_values = list(model.dep_values)
    dep_values[j] = newv
    dst = Model(
        ws, model.x_names, model.dep_names, dep_values, arcs,
        history=Transcript(model.history.steps),
    )
    step = TransformStep(
        "blowup-translation",
        {
            "center": ["xy", i, j],
            "residue": str(lam),
            "digest": dst.state_digest(),
        },
    )
    dst.history.append(step)
    pmap = PullbackMap(model, dst, [_StepTranslate(ws, s, i, j, lam)])
    if transcript is not None:
        transcript.append(step)
    return dst, pmap, step


def _ratio_floor(num: Value, den: Value, bits: int = 24) -> Fraction:
    """Largest n / 2^bits not exceeding num/den, for positive values.  Uses
    only exact comparisons in the value algebra."""
    scale = 1 << bits
    target = num.scale(scale)
    hi = scale
    while den.scale(hi) <= target:
        hi *= 2
    lo = 0
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if den.scale(mid) <= target:
            lo = mid
        else:
            hi = mid - 1
    return Fraction(lo, scale)


# -- ordered coordinate changes ----------------------------------------------


def ordered_change(
    model: Model, ell: int, psi: TruncatedSeries, transcript: Transcript | None = None
):
    """Replace the ell-th dependent coordinate y by y + psi.

    ``psi`` must be an exact polynomial in the independent coordinates and
    the dependent coordinates before ell, and every term's value (x-part
    plus dependent part) must be at least the value of y -- that constraint
    is what keeps the new coordinate's value from dropping.  Returns
    (model, map, step)."""
    ws, s = model.ws, model.s
    if not (0 <= ell < s):
        raise ValueError("no such dependent coordinate")
    if psi.ws.basis != ws.basis or psi.ws.weights != ws.weights or psi.s != s:
        raise ValueError("psi must live in the model's ring")
    if not (psi.prec_x.infinite and psi.prec_dep == _INF):
        raise ValueError("an ordered change needs an exact polynomial")
    v_ell = model.dep_values[ell]
    for (a, b), c in psi.terms.items():
        if any(b[m] for m in range(ell, s)):
            raise ValueError(
                "psi may only involve dependent coordinates before the one changed"
            )
        tv = ws.monomial_value(a)
        for m in range(ell):
            if b[m]:
                tv = tv + model.dep_values[m].scale(b[m])
        if tv < v_ell:
            raise ValueConstraintViolated(
                f"term with exponents {a}, {b} has value below the coordinate's; "
                "such terms must vanish"
            )
    yn = model.dep_names[ell]
    shift = model.eval_along_arcs(psi)
    new_arc = model.arcs[yn] + shift
    newv = new_arc.ord()  # InsufficientArcPrecision propagates when unknowable
    if newv.infinite:
        raise ValueError(
            "the changed coordinate vanishes along the arcs and is no coordinate"
        )
    if newv < v_ell:  # unreachable: every psi term has value >= v_ell
        raise AssertionError("ordered change lowered the coordinate's value")
    if ws.express_in_weights(newv) is None:
        raise ValueError(
            "the changed coordinate's value leaves the rational span of the weights"
        )
    arcs = dict(model.arcs)
    arcs[yn] = new_arc
    dep_values = list(model.dep_values)
    dep_values[ell] = newv
    dst = Model(
        ws, model.x_names, model.dep_names, dep_values, arcs,
        history=Transcript(model.history.steps),
    )
    step = TransformStep(
        "ordered-change",
        {"dep": ell, "psi": psi.to_json(), "digest": dst.state_digest()},
    )
    dst.history.append(step)
    pmap = PullbackMap(model, dst, [_StepOrdered(ws, s, ell, psi, v_ell)])
    if transcript is not None:
        transcript.append(step)
    return dst, pmap, step


# -- contact data and packages ------------------------------------------------


@dataclass
class ContactData:
    """Integer relation d * v(y) = sum p_i w_i together with the rational
    monomial y^d / x^p it defines and that monomial's residue along the
    arcs."""

    d: int
    p: tuple
    phi: str
    xi: Fraction


def _monomial_string(model: Model, ell: int, d: int, p) -> str:
    top = [model.dep_names[ell] + (f"^{d}" if d != 1 else "")]
    bot = []
    for i, pi in enumerate(p):
        if pi == 0:
            continue
        piece = model.x_names[i] + (f"^{abs(pi)}" if abs(pi) != 1 else "")
        (bot if pi > 0 else top).append(piece)
    s = "*".join(top)
    return s + (" / " + "*".join(bot) if bot else "")


def contact_data(model: Model, ell: int) -> ContactData:
    d, p = model.dep_relation(ell)
    basis = model.ws.basis
    num = model.arcs[model.dep_names[ell]].pow(d)
    den = GeneralizedArc.single(Value.rational(0, basis), 1)
    for i, pi in enumerate(p):
        arc = model.arcs[model.x_names[i]]
        if pi > 0:
            den = den * arc.pow(pi)
        elif pi < 0:
            num = num * arc.pow(-pi)
    window = Value.rational(ARC_WINDOW, basis)
    q = num.div(den, window=window)
    if not q.terms:
        raise InsufficientArcPrecision(
            "arcs are too shallow to read the contact residue"
        )
    e0, xi = q.leading()
    if e0 != model.ws.zero():  # unreachable: the relation says ord = 0
        raise AssertionError("contact quotient does not start at exponent 0")
    return ContactData(d, p, _monomial_string(model, ell, d, p), xi)


def _det(mat) -> Fraction:
    """Determinant by exact Gaussian elimination; fine for small matrices."""
    n = len(mat)
    m = [[Fraction(v) for v in row] for row in mat]
    det = Fraction(1)
    for col in range(n):
        piv = next((k for k in range(col, n) if m[k][col] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != col:
            m[col], m[piv] = m[piv], m[col]
            det = -det
        det *= m[col][col]
        inv = 1 / m[col][col]
        for k in range(col + 1, n):
            if m[k][col]:
                f = m[k][col] * inv
                m[k] = [a - f * b for a, b in zip(m[k], m[col])]
    return det


@dataclass
class PuiseuxPackage:
    """Result of a package: the final chart, the composite pullback map, the
    exponent matrices of the substitution, and the terminal residue.

    ``x_matrix`` is the r-by-r block describing the original independent
    coordinates in terms of the new ones; ``full_matrix`` extends it by the
    dependent row and column and is unimodular."""

    model: Model
    pmap: PullbackMap
    ell: int
    d: int
    p: tuple
    xi: Fraction
    x_matrix: tuple
    full_matrix: tuple
    centers: list
    step: TransformStep


def puiseux_package(
    model: Model,
    ell: int,
    transcript: Transcript | None = None,
    budget: int = PACKAGE_BUDGET,
) -> PuiseuxPackage:
    """Value-directed composite of blow-ups that ends in a translation and
    renders the ell-th dependent coordinate's value monomial.

    Strategy, re-reading the value relation d * v(y) = sum p_i w_i after
    every elementary step: while some p_i is negative, play the two-monomial
    descent on the independent pair realizing the extreme entries; once all
    p_i >= 0, either a single relation entry remains at d = 1 (terminal
    translation), or the relation is shortened by dividing y (d = 1), or by
    dividing an x whose weight exceeds v(y) (d >= 2), or -- when every
    supporting weight is below v(y) -- by draining a minimal prefix of the
    support, sorted by descending weight, onto its smallest-weight member
    and then dividing y by that one."""
    src = model
    ws0 = model.ws
    r, s = model.r, model.s
    if not (0 <= ell < s):
        raise ValueError("no such dependent coordinate")
    d0, p0 = model.dep_relation(ell)

    # composite exponent bookkeeping: one row per original independent
    # coordinate plus one for the original dependent coordinate; each row is
    # (x-exponents, dependent exponent) of the original coordinate expressed
    # in the current chart
    rows = [[1 if k == i else 0 for k in range(r)] for i in range(r)]
    deps = [0] * r
    row_y = [0] * r
    dep_y = 1

    steps = []
    centers = []
    xi = None
    m = model
    count = 0
    while True:
        count += 1
        if count > budget:
            raise BudgetExhausted(
                f"package did not terminate within {budget} elementary steps"
            )
        d, p = m.dep_relation(ell)
        neg = [k for k, v in enumerate(p) if v < 0]
        if neg:
            # two-monomial descent on c = -p: blow up at the pair attaining
            # the extreme entries (lowest index on ties)
            c = [-v for v in p]
            cm, cM = min(c), max(c)
            i, j = c.index(cm), c.index(cM)
            wi, wj = m.ws.weights[i], m.ws.weights[j]
            small, big = (i, j) if wi < wj else (j, i)
            big_name = m.x_names[big]
            m, pmap, st = blowup(m, ("xx", i, j))
            if st.payload["divided"] != big_name:  # unreachable
                raise AssertionError("descent step divided the wrong coordinate")
            for row in rows + [row_y]:
                row[small] += row[big]
            steps.append(pmap.steps[0])
            centers.append(["xx", i, j])
            continue

        t = list(p)
        total = sum(t)
        if d == 1 and total == 1:
            i0 = t.index(1)
            m, pmap, st = blowup(m, ("xy", i0, ell))
            if st.kind != "blowup-translation":  # unreachable: values agree
                raise AssertionError("terminal step was not a translation")
            xi = Fraction(st.payload["residue"])
            for k in range(r):
                rows[k][i0] += deps[k]
            row_y[i0] += dep_y
            steps.append(pmap.steps[0])
            centers.append(["xy", i0, ell])
            break

        if d == 1:
            i0 = min(k for k, v in enumerate(t) if v > 0)
            m, pmap, st = blowup(m, ("xy", i0, ell))
            if st.payload["divided"] != m.dep_names[ell]:  # unreachable
                raise AssertionError("expected the dependent coordinate to divide")
            for k in range(r):
                rows[k][i0] += deps[k]
            row_y[i0] += dep_y
            steps.append(pmap.steps[0])
            centers.append(["xy", i0, ell])
            continue

        v = m.dep_values[ell]
        above = [k for k, tv in enumerate(t) if tv > 0 and m.ws.weights[k] > v]
        if above:
            i0 = min(above)
            m, pmap, st = blowup(m, ("xy", i0, ell))
            if st.payload["divided"] != m.x_names[i0]:  # unreachable
                raise AssertionError("expected the independent coordinate to divide")
            for k in range(r):
                deps[k] += rows[k][i0]
            dep_y += row_y[i0]
            steps.append(pmap.steps[0])
            centers.append(["xy", i0, ell])
            continue

        # every supporting weight is below v(y): drain a minimal descending-
        # weight prefix of the support onto its smallest-weight member
        supp = [k for k, tv in enumerate(t) if tv > 0]
        order = sorted(supp, key=lambda k: m.ws.weights[k], reverse=True)
        acc_sum = 0
        prefix = []
        for k in order:
            prefix.append(k)
            acc_sum += t[k]
            if acc_sum >= d:
                break
        if acc_sum < d:  # unreachable: the support total strictly exceeds d
            raise AssertionError("support does not cover the denominator")
        a = prefix[-1]
        for k in prefix[:-1]:
            m, pmap, st = blowup(m, ("xx", k, a))
            if st.payload["divided"] != m.x_names[k]:  # unreachable
                raise AssertionError("drain step divided the wrong coordinate")
            for row in rows + [row_y]:
                row[a] += row[k]
            steps.append(pmap.steps[0])
            centers.append(["xx", k, a])
        m, pmap, st = blowup(m, ("xy", a, ell))
        if st.payload["divided"] != m.dep_names[ell]:  # unreachable
            raise AssertionError("expected the dependent coordinate to divide")
        for k in range(r):
            rows[k][a] += deps[k]
        row_y[a] += dep_y
        steps.append(pmap.steps[0])
        centers.append(["xy", a, ell])

    x_matrix = tuple(tuple(row) for row in rows)
    full_matrix = tuple(
        tuple(rows[i]) + (deps[i],) for i in range(r)
    ) + (tuple(row_y) + (dep_y,),)

    # structural checks: the composite substitution must satisfy the value
    # relation and be invertible the right way
    for k in range(r):
        if sum(p0[i] * rows[i][k] for i in range(r)) != d0 * row_y[k]:
            raise AssertionError("x-exponents violate the value relation")
    if sum(p0[i] * deps[i] for i in range(r)) + 1 != d0 * dep_y:
        raise AssertionError("dependent exponents violate the value relation")
    if any(e < 0 for row in full_matrix for e in row):
        raise AssertionError("composite substitution has a negative exponent")
    if abs(_det(full_matrix)) != 1:
        raise AssertionError("extended matrix is not unimodular")
    if _det(x_matrix) == 0:
        raise AssertionError("x-exponent block is singular")
    if d0 == 1 and all(e >= 0 for e in p0):
        ident = tuple(
            tuple(1 if a == b else 0 for b in range(r)) for a in range(r)
        )
        if x_matrix != ident:
            raise AssertionError("monomial-value package must keep x untouched")

    pkg_step = _StepPackage(
        ws0, m.ws, s, ell, steps, x_matrix, full_matrix, xi
    )
    pmap = PullbackMap(src, m, [pkg_step])
    payload = {
        "dep": ell,
        "d": d0,
        "p": list(p0),
        "xi": str(xi),
        "x_matrix": [list(row) for row in x_matrix],
        "full_matrix": [list(row) for row in full_matrix],
        "centers": centers,
        "digest": m.state_digest(),
    }
    step = TransformStep("puiseux-package", payload)
    # the final model's own history shows the package as one composite step
    m.history = Transcript(list(src.history.steps) + [step])
    if transcript is not None:
        transcript.append(step)
    return PuiseuxPackage(
        m, pmap, ell, d0, p0, xi, x_matrix, full_matrix, centers, step
    )
