"""Logarithmic differential forms over the truncated series ring.

Degree-p forms (p = 1, 2, 3) over the basis dx_i/x_i, dy_j, with series
coefficients.  Keys are canonically sorted symbol tuples; antisymmetry is
absorbed into signs at construction time.  The exterior derivative and the
wedge are what the integrability bookkeeping needs — 2- and 3-forms exist
solely to be measured, never to be transformed.

The symbol ("X", i) stands for dx_i/x_i and ("Y", j) for dy_j.  The
explicit value of a form is the minimal x-monomial value across all of its
coefficients, with the same certification discipline as for series.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import DegreeOverflow, InsufficientPrecision
from .series import Classification, TruncatedSeries
from .values import Value, WeightSystem, vmin


def _sort_key(sym):
    return (0 if sym[0] == "X" else 1, sym[1])


def _canonical(key):
    """Sort a symbol tuple; return (sorted key, sign) or (None, 0) if repeated."""
    key = tuple(key)
    if len(set(key)) != len(key):
        return None, 0
    order = sorted(range(len(key)), key=lambda i: _sort_key(key[i]))
    sign = 1
    perm = list(order)
    # parity by counting transpositions
    seen = [False] * len(perm)
    for i in range(len(perm)):
        if seen[i]:
            continue
        j, cyc = i, 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            cyc += 1
        if cyc % 2 == 0:
            sign = -sign
    return tuple(key[i] for i in order), sign


class LogForm:
    __slots__ = ("ws", "s", "degree", "coeffs")

    def __init__(self, ws: WeightSystem, s: int, degree: int, coeffs=None):
        if degree not in (1, 2, 3):
            raise ValueError("supported degrees are 1, 2, 3")
        self.ws = ws
        self.s = int(s)
        self.degree = degree
        clean = {}
        for key, ser in (coeffs or {}).items():
            skey, sign = _canonical(key)
            if sign == 0 or ser.is_exact_zero():
                continue
            adj = ser if sign == 1 else -ser
            if skey in clean:
                adj = clean[skey] + adj
            clean[skey] = adj
        self.coeffs = {k: v for k, v in clean.items() if not v.is_exact_zero()}
        for key, ser in self.coeffs.items():
            if len(key) != degree:
                raise ValueError("key arity does not match degree")
            if ser.s != self.s:
                raise ValueError("coefficient scope mismatch")
            for sym in key:
                kind, idx = sym
                if kind == "X" and not 0 <= idx < ws.r:
                    raise ValueError(f"no such independent variable: {sym}")
                if kind == "Y" and not 0 <= idx < self.s:
                    raise ValueError(f"no such dependent variable: {sym}")

    # -- constructors ---------------------------------------------------------

    @classmethod
    def zero(cls, ws, s, degree=1):
        return cls(ws, s, degree, {})

    @classmethod
    def d_log_x(cls, ws, s, i):
        return cls(ws, s, 1, {(("X", i),): TruncatedSeries.one(ws, s)})

    @classmethod
    def d_dep(cls, ws, s, j):
        return cls(ws, s, 1, {(("Y", j),): TruncatedSeries.one(ws, s)})

    # -- inspection -----------------------------------------------------------

    def is_zero(self):
        return all(c.is_zero() for c in self.coeffs.values())

    def coeff(self, key) -> TruncatedSeries:
        skey, sign = _canonical(key)
        ser = self.coeffs.get(skey)
        if ser is None:
            return TruncatedSeries.zero(self.ws, self.s)
        return ser if sign == 1 else -ser

    def x_coeffs(self):
        """The dx_i/x_i coefficients of a 1-form, as {i: series}."""
        return {key[0][1]: ser for key, ser in self.coeffs.items() if key[0][0] == "X"}

    def dep_coeffs(self):
        return {key[0][1]: ser for key, ser in self.coeffs.items() if key[0][0] == "Y"}

    def support_min(self):
        best = None
        for ser in self.coeffs.values():
            m = ser.support_min()
            if m is not None and (best is None or m[0] < best[0]):
                best = m
        return best

    def value_lower_bound(self) -> Value:
        cands = [self.ws.infinity()]
        for ser in self.coeffs.values():
            cands.append(ser.value_lower_bound())
        return vmin(*cands)

    def _floor(self) -> Value:
        cands = [self.ws.infinity()]
        for ser in self.coeffs.values():
            cands.append(vmin(ser.dep_floor, ser.prec_x))
        return vmin(*cands)

    def is_exact(self):
        return all(
            c.prec_x.infinite and c.prec_dep == float("inf") for c in self.coeffs.values()
        )

    def explicit_value(self) -> Value:
        m = self.support_min()
        if m is None:
            if self.is_exact():
                return self.ws.infinity()
            raise InsufficientPrecision(
                "no stored coefficient terms under finite truncation",
                known_bound=self.value_lower_bound(),
            )
        hidden = self._floor()
        if m[0] <= hidden:
            return m[0]
        raise InsufficientPrecision(
            "minimal stored value not certified", known_bound=self.value_lower_bound()
        )

    def log_elementary_witness(self, t):
        """True when some dx_i/x_i coefficient carries the term x^t (dep-free)."""
        zero_dep = (0,) * self.s
        for i, ser in self.x_coeffs().items():
            if ser.terms.get((tuple(t), zero_dep), 0) != 0:
                return True
        return False

    def classify_gamma_final(self, gamma: Value) -> Classification:
        """Final-dominant / final-recessive / neither, for a 1-form.

        Dominant needs the unique minimal-value exponent to come with a
        log-elementary cofactor: after factoring the monomial, some
        dx_i/x_i coefficient must be a unit.
        """
        if self.degree != 1:
            raise ValueError("classification applies to 1-forms")
        m = self.support_min()
        lower = self.value_lower_bound()
        if m is None:
            if lower > gamma or self.is_exact():
                return Classification("recessive")
            raise InsufficientPrecision("empty support, bound below gamma", known_bound=lower)
        val, t = m
        if val > gamma:
            if vmin(self._floor(), *(c.prec_x for c in self.coeffs.values())) > gamma:
                return Classification("recessive")
            raise InsufficientPrecision(
                "stored value above gamma but hidden terms may undercut", known_bound=lower
            )
        if not val <= self._floor():
            raise InsufficientPrecision("minimal value not certified", known_bound=lower)
        for ser in self.coeffs.values():
            if ser.prec_dep < 1:
                raise InsufficientPrecision("dependent precision too small for the unit test")
        if self.log_elementary_witness(t):
            return Classification("dominant", value=val, exponent=t)
        return Classification("not_final", value=val, exponent=t)

    def is_log_elementary(self):
        """Some dx_i/x_i coefficient is a unit (zero-final dominant)."""
        return any(ser.is_unit() for ser in self.x_coeffs().values())

    def classify_log_final(self):
        """Terminal classification of a normalized integrable 1-form.

        Elementary: some dx_i/x_i coefficient is a unit.  Canonical: all
        dx_i/x_i coefficients non-units, but one of them has a term linear
        in a dependent variable (so the coefficient ideal escapes the
        x-ideal plus squares).
        """
        if self.is_log_elementary():
            return "LogElementary"
        xs = self.x_coeffs()
        zero_x = (0,) * self.ws.r
        linear = False
        for ser in xs.values():
            if ser.prec_dep < 2:
                raise InsufficientPrecision("need dependent degree 2 to settle canonicity")
            for (a, b), c in ser.terms.items():
                if a == zero_x and sum(b) == 1:
                    linear = True
        return "LogCanonical" if linear else "NotFinal"

    # -- arithmetic -----------------------------------------------------------

    def _merge(self, other, op):
        if self.degree != other.degree or self.s != other.s:
            raise ValueError("form shape mismatch")
        keys = set(self.coeffs) | set(other.coeffs)
        out = {}
        for k in keys:
            a = self.coeffs.get(k)
            b = other.coeffs.get(k)
            if a is None:
                out[k] = op(TruncatedSeries.zero(self.ws, self.s), b)
            elif b is None:
                out[k] = op(a, TruncatedSeries.zero(self.ws, self.s))
            else:
                out[k] = op(a, b)
        return LogForm(self.ws, self.s, self.degree, out)

    def __add__(self, other):
        return self._merge(other, lambda a, b: a + b)

    def __sub__(self, other):
        return self._merge(other, lambda a, b: a - b)

    def __neg__(self):
        return self.scale(-1)

    def scale(self, q):
        return LogForm(self.ws, self.s, self.degree,
                       {k: c.scale(q) for k, c in self.coeffs.items()})

    def module_scale(self, F: TruncatedSeries):
        """Multiply by a ring element."""
        return LogForm(self.ws, self.s, self.degree,
                       {k: F * c for k, c in self.coeffs.items()})

    def multiply_monomial(self, a_shift, c=1):
        return LogForm(self.ws, self.s, self.degree,
                       {k: ser.multiply_monomial(a_shift, c) for k, ser in self.coeffs.items()})

    def divide_monomial(self, a_shift):
        return LogForm(self.ws, self.s, self.degree,
                       {k: ser.divide_monomial(a_shift) for k, ser in self.coeffs.items()})

    def truncate(self, prec_x=None, prec_dep=None):
        return LogForm(self.ws, self.s, self.degree,
                       {k: ser.truncate(prec_x, prec_dep) for k, ser in self.coeffs.items()})

    def widen_scope(self, s_new):
        return LogForm(self.ws, s_new, self.degree,
                       {k: ser.widen_scope(s_new) for k, ser in self.coeffs.items()})

    def wedge(self, other: "LogForm") -> "LogForm":
        if self.degree + other.degree > 3:
            raise DegreeOverflow(f"wedge of degrees {self.degree} and {other.degree}")
        out = {}
        for k1, s1 in self.coeffs.items():
            for k2, s2 in other.coeffs.items():
                key, sign = _canonical(k1 + k2)
                if sign == 0:
                    continue
                term = (s1 * s2).scale(sign)
                out[key] = out[key] + term if key in out else term
        return LogForm(self.ws, self.s, self.degree + other.degree, out)

    def __eq__(self, other):
        if not isinstance(other, LogForm):
            return NotImplemented
        return (self.degree == other.degree and self.s == other.s
                and self.coeffs == other.coeffs)

    def __hash__(self):
        return hash((self.degree, self.s, frozenset(self.coeffs.items())))

    def __repr__(self):
        if not self.coeffs:
            return "<0-form:0>"
        bits = []
        for key, ser in sorted(self.coeffs.items(), key=lambda kv: tuple(map(_sort_key, kv[0]))):
            name = "^".join(
                (f"dx{i+1}/x{i+1}" if kind == "X" else f"dy{i+1}") for kind, i in key
            )
            bits.append(f"({ser!r}) {name}")
        return " + ".join(bits)

    def to_json(self):
        return [
            {"basis": [f"{kind}{idx+1}" for kind, idx in key], "series": ser.to_json()}
            for key, ser in sorted(self.coeffs.items(), key=lambda kv: tuple(map(_sort_key, kv[0])))
        ]

    @classmethod
    def from_json(cls, ws, s, data, degree=None) -> "LogForm":
        coeffs = {}
        for entry in data:
            key = tuple(
                (sym[0], int(sym[1:]) - 1) for sym in entry["basis"]
            )
            coeffs[key] = TruncatedSeries.from_json(ws, s, entry["series"])
        deg = degree or (len(next(iter(coeffs))) if coeffs else 1)
        return cls(ws, s, deg, coeffs)


def log_d(obj) -> LogForm:
    """Exterior derivative into the logarithmic basis.

    On functions: sum of x_i dF/dx_i dx_i/x_i plus dF/dy_j dy_j.  On forms
    the basis elements are closed, so only coefficients differentiate.
    """
    if isinstance(obj, TruncatedSeries):
        ws, s = obj.ws, obj.s
        coeffs = {}
        for i in range(ws.r):
            der = obj.x_log_derivative(i)
            if not (der.is_zero() and der.prec_x.infinite):
                coeffs[(("X", i),)] = der
        for j in range(s):
            der = obj.dep_derivative(j)
            if not (der.is_zero() and der.prec_x.infinite):
                coeffs[(("Y", j),)] = der
        return LogForm(ws, s, 1, coeffs)
    if obj.degree >= 3:
        raise DegreeOverflow("cannot differentiate a 3-form within degree 3")
    out = LogForm.zero(obj.ws, obj.s, obj.degree + 1)
    for key, ser in obj.coeffs.items():
        dc = log_d(ser)
        wedge_part = LogForm(obj.ws, obj.s, obj.degree, {key: TruncatedSeries.one(obj.ws, obj.s)})
        out = out + dc.wedge(wedge_part)
    return out


def wedge(a: LogForm, b: LogForm) -> LogForm:
    return a.wedge(b)


@dataclass(frozen=True)
class LevelPair:
    """One z-level of a 1-form: eta + f dz/z with both parts one scope down."""

    eta: LogForm
    f: TruncatedSeries

    def beta_lower(self) -> Value:
        return vmin(self.eta.value_lower_bound(), self.f.value_lower_bound())

    def beta(self) -> Value:
        return vmin(self.eta.explicit_value(), self.f.explicit_value())

    def delta(self) -> Value:
        return self.eta.explicit_value()

    def phi(self) -> Value:
        return self.f.explicit_value()

    def is_zero(self):
        return self.eta.is_zero() and self.f.is_zero()

    def classify(self, gamma: Value) -> Classification:
        return classify_pair(self.eta, self.f, gamma)


def classify_pair(omega: LogForm, F: TruncatedSeries, gamma: Value) -> Classification:
    """Finality of a (1-form, function) pair at gamma.

    The pair value is the smaller of the two; dominance requires the
    component(s) realizing it to be dominant and the other to sit
    strictly above (its monomial part then vanishes at the minimal
    exponent, which is one of the allowed witness shapes).
    """
    mw, mf = omega.support_min(), F.support_min()
    if mw is None and mf is None:
        if omega.is_exact() and F.is_exact_zero():
            return Classification("recessive")
        lower = vmin(omega.value_lower_bound(), F.value_lower_bound())
        if lower > gamma:
            return Classification("recessive")
        raise InsufficientPrecision("empty pair support below gamma", known_bound=lower)
    lower = vmin(omega.value_lower_bound(), F.value_lower_bound())
    best = mw if mf is None else mf if mw is None else (mw if mw[0] <= mf[0] else mf)
    val, t = best
    if val > gamma:
        if lower > gamma:
            return Classification("recessive")
        raise InsufficientPrecision("pair value above gamma but not certified", known_bound=lower)
    if not val <= vmin(omega._floor(), F.dep_floor, F.prec_x):
        raise InsufficientPrecision("pair value not certified", known_bound=lower)
    omega_at = mw is not None and mw[0] == val
    f_at = mf is not None and mf[0] == val
    ok = True
    if omega_at:
        ok = ok and omega.log_elementary_witness(t)
    if f_at:
        ok = ok and F.terms.get((t, (0,) * F.s), 0) != 0
    if ok:
        return Classification("dominant", value=val, exponent=t)
    return Classification("not_final", value=val, exponent=t)


def level_decomposition(omega: LogForm, n_levels=None):
    """Split a 1-form over scope s into z-levels over scope s-1.

    The dz-coefficient c contributes through f = z*c, which shifts its
    levels up by one — the 0-level functional part is structurally zero.
    Every emitted level draws a (possibly empty) slice from every
    coefficient, so a truncated coefficient keeps announcing its hidden
    tail at levels past its stored top instead of passing for exact zero.
    """
    if omega.degree != 1:
        raise ValueError("level decomposition applies to 1-forms")
    ws, s = omega.ws, omega.s
    if s == 0:
        raise ValueError("no dependent variable to expand in")
    z = s - 1
    shifts = {key: (1 if key[0] == ("Y", z) else 0) for key in omega.coeffs}
    count = max(
        (len(ser.z_levels()) + shifts[key] for key, ser in omega.coeffs.items()),
        default=1,
    )
    if n_levels is not None:
        count = max(count, n_levels)
    eta_levels = {}
    f_levels = {}
    for key, ser in omega.coeffs.items():
        sym = key[0]
        shift = shifts[key]
        for k, lev in enumerate(ser.z_levels(n_levels=count - shift)):
            if shift:
                # dz = z * dz/z: level k+1 functional part picks up level k of c
                f_levels[k + 1] = f_levels.get(k + 1, TruncatedSeries.zero(ws, s - 1)) + lev
            else:
                eta_levels.setdefault(k, {})[(sym,)] = lev
    out = []
    for k in range(count):
        eta = LogForm(ws, s - 1, 1, eta_levels.get(k, {}))
        f = f_levels.get(k, TruncatedSeries.zero(ws, s - 1))
        out.append(LevelPair(eta, f))
    return out


def reassemble_levels(ws, s, levels):
    """Inverse of level_decomposition, for round-trip checks."""
    coeffs = {}
    for k, pair in enumerate(levels):
        for key, ser in pair.eta.coeffs.items():
            tgt = (key[0],)
            lifted = TruncatedSeries(
                ws, s, {(a, b + (k,)): c for (a, b), c in ser.terms.items()},
                prec_x=ser.prec_x,
                prec_dep=(ser.prec_dep + k if ser.prec_dep != float("inf") else None),
            )
            coeffs[tgt] = coeffs.get(tgt, TruncatedSeries.zero(ws, s)) + lifted
        if not pair.f.is_zero():
            if k == 0:
                raise ValueError("level 0 functional part must vanish")
            lifted = TruncatedSeries(
                ws, s, {(a, b + (k - 1,)): c for (a, b), c in pair.f.terms.items()},
                prec_x=pair.f.prec_x,
                prec_dep=(pair.f.prec_dep + k - 1 if pair.f.prec_dep != float("inf") else None),
            )
            key = (("Y", s - 1),)
            coeffs[key] = coeffs.get(key, TruncatedSeries.zero(ws, s)) + lifted
    return LogForm(ws, s, 1, coeffs)


def theta_delta(levels, m_max=None):
    """Integrability bookkeeping for a level list.

    Theta_m collects eta_i ^ d eta_j over i+j=m (3-forms); Delta_m collects
    j eta_j ^ eta_i + f_i d eta_j + eta_i d f_j (2-forms).  Exact only for
    m below the number of known levels.
    """
    if not levels:
        return [], []
    ws = levels[0].eta.ws
    s = levels[0].eta.s
    known = len(levels)
    top = known - 1 if m_max is None else min(m_max, known - 1)
    thetas, deltas = [], []
    d_eta = [log_d(p.eta) for p in levels]
    d_f = [log_d(p.f) for p in levels]
    for m in range(top + 1):
        th = LogForm.zero(ws, s, 3)
        de = LogForm.zero(ws, s, 2)
        for i in range(m + 1):
            j = m - i
            th = th + levels[i].eta.wedge(d_eta[j])
            de = de + levels[j].eta.scale(j).wedge(levels[i].eta) \
                + d_eta[j].module_scale(levels[i].f) \
                + levels[i].eta.wedge(d_f[j])
        thetas.append(th)
        deltas.append(de)
    return thetas, deltas


def form_value_lower(omega: LogForm) -> Value:
    return omega.value_lower_bound()
