"""Exact arithmetic for the archimedean value group.

A value is a rational combination of square roots of distinct squarefree
integers (the first always 1, so plain rationals embed).  Distinct
squarefree radicals are linearly independent over the rationals, so the
zero test is syntactic, and the sign of a nonzero element is found by
refining dyadic enclosures of each radical until zero is excluded.  Both
facts together give a decidable total order matching the real one.

The basis doubles as a multiplication table: a product of two radicals
reduces via sqrt(a)*sqrt(b) = g*sqrt(ab/g^2).  Products and inverses are
defined only when the reduced radical stays in the declared basis;
otherwise ``BasisNotClosed`` is raised.  Since the span is then a
finite-dimensional subring of the reals, every nonzero element has an
inverse inside it, computed from the multiplication matrix.
"""

from __future__ import annotations

from fractions import Fraction
from math import isqrt

from .errors import BasisNotClosed


def _squarefree_part(n: int) -> tuple[int, int]:
    """Return (g, s) with n = g*g*s and s squarefree."""
    g, s, d = 1, n, 2
    while d * d <= s:
        while s % (d * d) == 0:
            s //= d * d
            g *= d
        d += 1
    return g, s


def _sqrt_interval(d: int, bits: int) -> tuple[Fraction, Fraction]:
    """A dyadic enclosure of sqrt(d) of width 2**-bits."""
    scale = 1 << bits
    lo = isqrt(d * scale * scale)
    return Fraction(lo, scale), Fraction(lo + 1, scale)


class Value:
    """One element of the value group, or the absorbing element infinity."""

    __slots__ = ("basis", "coeffs", "infinite", "_hash")

    def __init__(self, coeffs, basis, infinite=False):
        self.basis = tuple(basis)
        self.infinite = bool(infinite)
        self._hash = None
        if self.infinite:
            self.coeffs = (Fraction(0),) * len(self.basis)
        else:
            cs = tuple(
                c if type(c) is Fraction else Fraction(c) for c in coeffs
            )
            if len(cs) != len(self.basis):
                raise ValueError("coefficient vector does not match basis")
            self.coeffs = cs

    # -- construction helpers -------------------------------------------------

    @classmethod
    def rational(cls, q, basis) -> "Value":
        return cls((Fraction(q),) + (Fraction(0),) * (len(basis) - 1), basis)

    @classmethod
    def infinity(cls, basis) -> "Value":
        return cls((), basis, infinite=True)

    # -- basic predicates -----------------------------------------------------

    def is_zero(self) -> bool:
        return not self.infinite and all(c == 0 for c in self.coeffs)

    def is_rational(self) -> bool:
        return not self.infinite and all(c == 0 for c in self.coeffs[1:])

    def as_fraction(self) -> Fraction:
        if not self.is_rational():
            raise ValueError("value is not rational")
        return self.coeffs[0]

    def sign(self) -> int:
        """Sign of the represented real number; exact and terminating."""
        if self.infinite:
            return 1
        if all(c == 0 for c in self.coeffs[1:]):
            c0 = self.coeffs[0]
            return (c0 > 0) - (c0 < 0)
        bits = 64
        while True:
            lo = hi = Fraction(0)
            for c, d in zip(self.coeffs, self.basis):
                if c == 0:
                    continue
                if d == 1:
                    lo += c
                    hi += c
                    continue
                a, b = _sqrt_interval(d, bits)
                if c > 0:
                    lo += c * a
                    hi += c * b
                else:
                    lo += c * b
                    hi += c * a
            if lo > 0:
                return 1
            if hi < 0:
                return -1
            bits *= 2

    # -- arithmetic -----------------------------------------------------------

    def _check_same_basis(self, other: "Value"):
        if self.basis != other.basis:
            raise ValueError("values built over different weight bases")

    def __add__(self, other: "Value") -> "Value":
        self._check_same_basis(other)
        if self.infinite or other.infinite:
            return Value.infinity(self.basis)
        return Value(tuple(a + b for a, b in zip(self.coeffs, other.coeffs)), self.basis)

    def __sub__(self, other: "Value") -> "Value":
        self._check_same_basis(other)
        if other.infinite:
            raise ValueError("cannot subtract infinity")
        if self.infinite:
            return Value.infinity(self.basis)
        return Value(tuple(a - b for a, b in zip(self.coeffs, other.coeffs)), self.basis)

    def scale(self, q) -> "Value":
        q = Fraction(q)
        if self.infinite:
            if q <= 0:
                raise ValueError("infinity may only be scaled by a positive rational")
            return self
        return Value(tuple(q * c for c in self.coeffs), self.basis)

    def __neg__(self) -> "Value":
        return self.scale(-1)

    def _basis_product(self, i: int, j: int) -> tuple[Fraction, int]:
        """Reduce sqrt(d_i)*sqrt(d_j) to q*sqrt(d); return (q, basis index of d)."""
        g, s = _squarefree_part(self.basis[i] * self.basis[j])
        try:
            k = self.basis.index(s)
        except ValueError:
            raise BasisNotClosed(
                f"sqrt({self.basis[i]})*sqrt({self.basis[j]}) needs sqrt({s}), "
                f"absent from basis {self.basis}"
            ) from None
        return Fraction(g), k

    def __mul__(self, other: "Value") -> "Value":
        self._check_same_basis(other)
        if self.infinite or other.infinite:
            s = other.sign() if self.infinite else self.sign()
            if s <= 0:
                raise ValueError("infinity times a non-positive value")
            return Value.infinity(self.basis)
        out = [Fraction(0)] * len(self.basis)
        for i, a in enumerate(self.coeffs):
            if a == 0:
                continue
            for j, b in enumerate(other.coeffs):
                if b == 0:
                    continue
                g, k = self._basis_product(i, j)
                out[k] += a * b * g
        return Value(tuple(out), self.basis)

    def inverse(self) -> "Value":
        """Multiplicative inverse within the span of the basis."""
        if self.infinite or self.is_zero():
            raise ZeroDivisionError("no inverse for zero or infinity")
        m = len(self.basis)
        # columns: self * sqrt(d_j) expressed over the basis
        mat = [[Fraction(0)] * m for _ in range(m)]
        for j in range(m):
            for i, a in enumerate(self.coeffs):
                if a == 0:
                    continue
                g, k = self._basis_product(i, j)
                mat[k][j] += a * g
        rhs = [Fraction(1)] + [Fraction(0)] * (m - 1)
        sol = _solve_exact(mat, rhs)
        if sol is None:
            raise ZeroDivisionError("multiplication matrix singular")
        return Value(tuple(sol), self.basis)

    def __truediv__(self, other: "Value") -> "Value":
        return self * other.inverse()

    # -- order ----------------------------------------------------------------

    def __eq__(self, other):
        if not isinstance(other, Value):
            return NotImplemented
        return (
            self.basis == other.basis
            and self.infinite == other.infinite
            and self.coeffs == other.coeffs
        )

    def __hash__(self):
        h = self._hash
        if h is None:
            h = hash((self.basis, self.infinite, self.coeffs))
            self._hash = h
        return h

    def __lt__(self, other: "Value") -> bool:
        self._check_same_basis(other)
        if self.infinite:
            return False
        if other.infinite:
            return True
        a, b = self.coeffs, other.coeffs
        if a[1:] == b[1:]:  # difference is rational: compare directly
            return a[0] < b[0]
        return (self - other).sign() < 0

    def __le__(self, other):
        return self == other or self < other

    def __gt__(self, other):
        return not self <= other

    def __ge__(self, other):
        return not self < other

    def floor(self) -> int:
        """Largest integer not exceeding this (finite) value."""
        if self.infinite:
            raise ValueError("floor of infinity")
        bits = 64
        while True:
            lo = hi = Fraction(0)
            for c, d in zip(self.coeffs, self.basis):
                if c == 0:
                    continue
                a, b = (Fraction(1), Fraction(1)) if d == 1 else _sqrt_interval(d, bits)
                lo += c * (a if c > 0 else b)
                hi += c * (b if c > 0 else a)
            flo, fhi = lo.__floor__(), hi.__floor__()
            if flo == fhi:
                return flo
            if fhi - flo == 1:
                gap = self - Value.rational(fhi, self.basis)
                return fhi if gap.sign() >= 0 else flo
            bits *= 2

    # -- presentation ---------------------------------------------------------

    def __float__(self):
        if self.infinite:
            return float("inf")
        return float(sum(float(c) * self.basis[i] ** 0.5 for i, c in enumerate(self.coeffs)))

    def __repr__(self):
        if self.infinite:
            return "Value(inf)"
        parts = []
        for c, d in zip(self.coeffs, self.basis):
            if c == 0:
                continue
            parts.append(str(c) if d == 1 else f"{c}*sqrt({d})")
        return "Value(" + (" + ".join(parts) if parts else "0") + ")"

    def to_json(self):
        if self.infinite:
            return "inf"
        return {"coeffs": [str(c) for c in self.coeffs], "basis": list(self.basis)}

    @classmethod
    def from_json(cls, data, basis=None) -> "Value":
        if data == "inf":
            if basis is None:
                raise ValueError("deserializing infinity needs a basis")
            return cls.infinity(basis)
        b = tuple(data.get("basis", basis or ()))
        return cls(tuple(Fraction(c) for c in data["coeffs"]), b)


def closure_basis(basis) -> tuple:
    """Smallest multiplicatively closed radical basis containing ``basis``.

    Closing under products makes the span a field, so inverses and
    quotients of values become representable.  The closure adds the
    squarefree parts of all subset products; a basis with at most one
    radical beyond 1 is already closed and comes back unchanged.
    """
    items = [d for d in basis if d != 1]
    out = {1}
    for d in items:
        out |= {_squarefree_part(d * e)[1] for e in out}
    return (1,) + tuple(sorted(out - {1}))


def embed_value(v: Value, basis) -> Value:
    """Re-express a value over a larger basis containing every radical used."""
    basis = tuple(basis)
    if v.basis == basis:
        return v
    if v.infinite:
        return Value.infinity(basis)
    out = [Fraction(0)] * len(basis)
    for c, d in zip(v.coeffs, v.basis):
        if c == 0:
            continue
        try:
            out[basis.index(d)] = out[basis.index(d)] + c
        except ValueError:
            raise BasisNotClosed(
                f"target basis {basis} lacks sqrt({d})"
            ) from None
    return Value(tuple(out), basis)


def _solve_exact(mat, rhs):
    """Solve a square rational system by elimination; None when singular."""
    n = len(mat)
    a = [row[:] + [rhs[i]] for i, row in enumerate(mat)]
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col] != 0), None)
        if piv is None:
            return None
        a[col], a[piv] = a[piv], a[col]
        inv = 1 / a[col][col]
        a[col] = [v * inv for v in a[col]]
        for r in range(n):
            if r != col and a[r][col] != 0:
                f = a[r][col]
                a[r] = [u - f * v for u, v in zip(a[r], a[col])]
    return [a[r][n] for r in range(n)]


def rational_rank(vectors) -> int:
    """Rank over the rationals of a list of coefficient vectors."""
    rows = [list(v) for v in vectors if any(c != 0 for c in v)]
    rank, col, width = 0, 0, (len(rows[0]) if rows else 0)
    while rank < len(rows) and col < width:
        piv = next((r for r in range(rank, len(rows)) if rows[r][col] != 0), None)
        if piv is None:
            col += 1
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        lead = rows[rank][col]
        rows[rank] = [v / lead for v in rows[rank]]
        for r in range(len(rows)):
            if r != rank and rows[r][col] != 0:
                f = rows[r][col]
                rows[r] = [u - f * v for u, v in zip(rows[r], rows[rank])]
        rank += 1
        col += 1
    return rank


class WeightSystem:
    """The values of the independent coordinates, over a radical basis.

    ``basis`` lists the squarefree integers under the radicals (first entry
    1); ``weights`` gives one coefficient vector per independent coordinate.
    Construction verifies positivity of every weight and linear independence
    over the rationals, which is what makes the minimal-value monomial of a
    series unique.
    """

    __slots__ = ("basis", "weights")

    def __init__(self, basis, weights):
        basis = tuple(int(d) for d in basis)
        if not basis or basis[0] != 1:
            raise ValueError("basis must start with 1")
        if len(set(basis)) != len(basis):
            raise ValueError("basis entries must be distinct")
        for d in basis:
            if d <= 0:
                raise ValueError("basis entries must be positive")
            g, s = _squarefree_part(d)
            if g != 1:
                raise ValueError(f"basis entry {d} is not squarefree")
        self.basis = basis
        ws = []
        for w in weights:
            v = w if isinstance(w, Value) else Value(tuple(Fraction(c) for c in w), basis)
            if v.basis != basis:
                raise ValueError("weight over a different basis")
            if v.sign() <= 0:
                raise ValueError(f"weight {v!r} is not positive")
            ws.append(v)
        self.weights = tuple(ws)
        if rational_rank([w.coeffs for w in self.weights]) != len(self.weights):
            raise ValueError("weights are linearly dependent over the rationals")

    @property
    def r(self) -> int:
        return len(self.weights)

    def zero(self) -> Value:
        return Value.rational(0, self.basis)

    def value(self, q) -> Value:
        """A rational constant as a Value over this basis."""
        return Value.rational(q, self.basis)

    def infinity(self) -> Value:
        return Value.infinity(self.basis)

    def monomial_value(self, exponents) -> Value:
        """Value of x^e for a rational exponent vector e."""
        exps = list(exponents)
        if len(exps) != self.r:
            raise ValueError("exponent vector has wrong length")
        out = self.zero()
        for e, w in zip(exps, self.weights):
            e = Fraction(e)
            if e != 0:
                out = out + w.scale(e)
        return out

    def express_in_weights(self, v: Value):
        """Write v as a rational combination of the weights, or None.

        Solves the linear system over the basis coordinates; the solution
        is unique by independence.
        """
        if v.infinite:
            return None
        m, r = len(self.basis), self.r
        if r == 0:
            return () if v.is_zero() else None
        # least-squares-free exact approach: solve on the span
        cols = [w.coeffs for w in self.weights]
        # Gaussian elimination on the m x r system cols^T c = v
        aug = [[cols[j][i] for j in range(r)] + [v.coeffs[i]] for i in range(m)]
        pivots = []
        row = 0
        for col in range(r):
            piv = next((k for k in range(row, m) if aug[k][col] != 0), None)
            if piv is None:
                continue
            aug[row], aug[piv] = aug[piv], aug[row]
            lead = aug[row][col]
            aug[row] = [u / lead for u in aug[row]]
            for k in range(m):
                if k != row and aug[k][col] != 0:
                    f = aug[k][col]
                    aug[k] = [u - f * t for u, t in zip(aug[k], aug[row])]
            pivots.append(col)
            row += 1
        sol = [Fraction(0)] * r
        for k, col in enumerate(pivots):
            sol[col] = aug[k][r]
        # consistency: rows past the pivots must be zero
        for k in range(row, m):
            if aug[k][r] != 0:
                return None
        check = self.monomial_value(sol)
        return tuple(sol) if check == v else None

    def to_json(self):
        return {
            "basis": list(self.basis),
            "weights": [[str(c) for c in w.coeffs] for w in self.weights],
        }

    @classmethod
    def from_json(cls, data) -> "WeightSystem":
        return cls(data["basis"], [[Fraction(c) for c in w] for w in data["weights"]])


def value_arith(a: Value, b: Value, op: str) -> Value:
    """Dispatch arithmetic by name: add, sub, scale (b rational), mul."""
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "scale":
        return a.scale(b.as_fraction())
    raise ValueError(f"unknown op {op!r}")


def vmin(*vals: Value) -> Value:
    out = vals[0]
    for v in vals[1:]:
        if v < out:
            out = v
    return out


def vmax(*vals: Value) -> Value:
    out = vals[0]
    for v in vals[1:]:
        if v > out:
            out = v
    return out
