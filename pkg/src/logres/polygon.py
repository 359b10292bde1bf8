"""Truncated Newton polygons for functions and integrable 1-forms.

A function (or 1-form) over the nested scope splits into levels along its
last dependent variable z.  Each level that is not certified recessive
contributes one cloud point: abscissa the level's explicit value, ordinate
the level index, flagged dominant when the level carries a unit (or
log-elementary) witness at its minimal exponent.  Two anchor points,
(0, gamma/nu(z)) and (gamma, 0), close off everything beyond the
truncation bound gamma.  The polygon is the positively convex hull of
cloud plus anchors: the region swept by translating the positive quadrant
to each point, convexified.

All geometry is exact.  Internally the ordinate is scaled by nu(z), which
puts both anchors at algebra elements; cross products multiply two such
elements, so they are evaluated in the multiplicative closure of the
basis, which is a field (and equals the basis whenever it holds at most
one radical).  The abscissa where the hull crosses a horizontal line —
the per-level entry bound tau_k — needs one division on the edge leaving
the top anchor; that quotient is taken in the closure too and projected
back when it fits.

The critical data of a polygon: delta, the least alpha such that the
line of slope -1/nu(z) through (alpha, 0) meets the polygon; the critical
segment, the intersection with that extreme line; and the critical height
chi, the level of the highest vertex on the segment, defined only when
delta < gamma.  chi is the control invariant that the uniformization
driver pushes down.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fractions import Fraction

from .errors import InsufficientPrecision
from .logforms import LevelPair, LogForm, level_decomposition
from .series import TruncatedSeries
from .values import Value, closure_basis, embed_value, vmin


@dataclass(frozen=True)
class CloudPoint:
    """One level's contribution: (abscissa, ordinate) with its dominance."""

    abscissa: Value
    ordinate: int
    dominant: bool
    level: int

    def scaled(self, nu_z: Value) -> Value:
        return nu_z.scale(self.ordinate)


@dataclass(frozen=True)
class Cloud:
    """The cloud of points of an object, up to the truncation bound.

    Holds one point per non-recessive level of index at most
    floor(gamma/nu(z)); higher levels only ever act through the anchors.
    """

    points: tuple
    gamma: Value
    nu_z: Value

    def __post_init__(self):
        seen = set()
        for p in self.points:
            if p.level in seen:
                raise ValueError(f"two cloud points for level {p.level}")
            seen.add(p.level)

    def anchors(self):
        """The two truncation anchors in (abscissa, scaled-height) form."""
        zero = Value.rational(0, self.gamma.basis)
        return ((zero, self.gamma), (self.gamma, zero))

    def dominant_part(self) -> "Cloud":
        return Cloud(
            tuple(p for p in self.points if p.dominant), self.gamma, self.nu_z
        )


@dataclass(frozen=True)
class Vertex:
    """A hull vertex; height is the nu(z)-scaled ordinate.

    Anchor-born vertices carry level None (the top anchor's ordinate
    gamma/nu(z) need not be an algebra element; its scaled height is).
    """

    abscissa: Value
    height: Value
    level: int | None
    anchor: bool

    def display_ordinate(self, nu_z: Value) -> float:
        if self.level is not None:
            return float(self.level)
        return float(self.height) / float(nu_z)


def _cross(o, a, b, cbasis):
    """Orientation of o->a->b over (abscissa, height) pairs; exact sign.

    The differences live in the span of the basis but their products need
    not, so the multiplication happens over the closure.
    """
    du1 = embed_value(a[0] - o[0], cbasis)
    dv1 = embed_value(a[1] - o[1], cbasis)
    du2 = embed_value(b[0] - o[0], cbasis)
    dv2 = embed_value(b[1] - o[1], cbasis)
    return (du1 * dv2 - dv1 * du2).sign()


class TruncPolygon:
    """Positively convex hull of a cloud and its anchors, with queries."""

    __slots__ = ("cloud", "gamma", "nu_z", "vertices", "_cbasis")

    def __init__(self, cloud: Cloud):
        self.cloud = cloud
        self.gamma = cloud.gamma
        self.nu_z = cloud.nu_z
        if not self.gamma.sign() > 0:
            raise ValueError("the truncation bound must be positive")
        if not self.nu_z.sign() > 0 or self.nu_z.infinite:
            raise ValueError("nu(z) must be positive and finite")
        self._cbasis = closure_basis(self.gamma.basis)
        self.vertices = self._build(cloud)

    # -- construction ---------------------------------------------------------

    def _build(self, cloud: Cloud):
        zero = Value.rational(0, self.gamma.basis)
        pts = [
            (zero, self.gamma, None, True),
            (self.gamma, zero, 0, True),
        ]
        for p in cloud.points:
            h = p.scaled(self.nu_z)
            if p.abscissa + h < self.gamma:  # beyond-the-line points are anchored
                pts.append((p.abscissa, h, p.level, False))
        pts.sort(key=lambda t: (t[0], t[1]))
        # one survivor per abscissa: the lowest, the rest sit on its ray
        chain = []
        for item in pts:
            if chain and item[0] == chain[-1][0]:
                continue
            chain.append(item)
        hull = []
        for item in chain:
            while len(hull) >= 2 and _cross(
                (hull[-2][0], hull[-2][1]),
                (hull[-1][0], hull[-1][1]),
                (item[0], item[1]),
                self._cbasis,
            ) <= 0:
                hull.pop()
            hull.append(item)
        if len(hull) >= 2 and hull[-1][1] == hull[-2][1]:
            hull.pop()  # horizontal final edge: the last point rides a ray
        return tuple(Vertex(u, h, lev, anc) for u, h, lev, anc in hull)

    # -- queries --------------------------------------------------------------

    def tau(self, k: int) -> Value:
        """Per-level entry bound: least abscissa of the polygon at level k.

        Exact.  On a cloud-to-cloud edge the interpolation weight is a
        ratio of level indices, hence rational; only the edge leaving the
        top anchor needs a division, taken in the closure of the basis.
        """
        if k < 0:
            raise ValueError("levels are non-negative")
        w = self.nu_z.scale(k)
        vs = self.vertices
        if not w < vs[0].height:
            return vs[0].abscissa
        for hi, lo in zip(vs, vs[1:]):
            if not w < lo.height:
                if w == lo.height:
                    return lo.abscissa
                if hi.level is not None:
                    t = Fraction(k - lo.level, hi.level - lo.level)
                    return lo.abscissa + (hi.abscissa - lo.abscissa).scale(t)
                # edge from the top anchor at (0, gamma): similar triangles
                cb = self._cbasis
                num = embed_value(self.gamma - w, cb)
                den = embed_value(self.gamma - lo.height, cb)
                out = embed_value(lo.abscissa, cb) * (num / den)
                return project_value(out, self.gamma.basis)
        return vs[-1].abscissa

    def tau_levels(self, top: int | None = None):
        if top is None:
            top = _grid_floor(self.gamma, self.nu_z)
        return tuple(self.tau(k) for k in range(top + 1))

    def contains(self, abscissa: Value, height: Value) -> bool:
        """Point membership, division-free: compare against the spanning edge."""
        zero = Value.rational(0, self.gamma.basis)
        if abscissa < zero or height < zero:
            return False
        vs = self.vertices
        if not height < vs[0].height:
            return not abscissa < vs[0].abscissa
        for hi, lo in zip(vs, vs[1:]):
            if not height < lo.height:
                return _cross(
                    (lo.abscissa, lo.height),
                    (hi.abscissa, hi.height),
                    (abscissa, height),
                    self._cbasis,
                ) <= 0
        return not abscissa < vs[-1].abscissa

    def contains_polygon(self, other: "TruncPolygon") -> bool:
        return all(self.contains(v.abscissa, v.height) for v in other.vertices)

    # -- support lines --------------------------------------------------------

    def _functional(self, v: Vertex, delta: Value) -> Value:
        """u + delta * ordinate over the closure basis."""
        cb = self._cbasis
        if v.level is not None:
            return embed_value(v.abscissa + delta.scale(v.level), cb)
        # top anchor: ordinate gamma/nu(z)
        return embed_value(v.abscissa, cb) + (
            embed_value(delta, cb) * embed_value(self.gamma, cb)
        ) / embed_value(self.nu_z, cb)

    def rho(self, delta: Value) -> Value:
        """Least rho with the slope -1/delta line through (rho, 0) touching.

        Over the closure basis; ``project_value`` drops the result back
        when a plain-basis number is wanted.
        """
        if not delta.sign() > 0:
            raise ValueError("slopes come from positive delta")
        return vmin(*(self._functional(v, delta) for v in self.vertices))

    def in_upper_halfplane(self, delta: Value, rho: Value) -> bool:
        """Whole polygon strictly above the slope -1/delta line at rho."""
        rho = embed_value(rho, self._cbasis)
        return all(
            (self._functional(v, delta) - rho).sign() > 0 for v in self.vertices
        )

    def lower_vertices(self, delta: Value, rho: Value):
        """Vertices strictly below the slope -1/delta line at rho."""
        rho = embed_value(rho, self._cbasis)
        return tuple(
            v
            for v in self.vertices
            if (self._functional(v, delta) - rho).sign() < 0
        )

    def closure(self) -> tuple:
        return self._cbasis


def project_value(v: Value, basis) -> Value:
    """Drop a closure value back to the original basis when nothing sticks out."""
    basis = tuple(basis)
    if v.basis == basis:
        return v
    if any(c != 0 for c, d in zip(v.coeffs, v.basis) if d not in basis):
        return v
    out = [Fraction(0)] * len(basis)
    for c, d in zip(v.coeffs, v.basis):
        if c != 0:
            out[basis.index(d)] = c
    return Value(tuple(out), basis)


@dataclass(frozen=True)
class CriticalData:
    """delta, the extreme slope -1/nu(z) contact, and its highest vertex."""

    delta: Value
    segment: tuple
    chi: int | None
    vertex: Vertex | None

    def is_terminal(self, gamma: Value) -> bool:
        return self.delta == gamma

    def attains_value(self, nu_value: Value) -> bool:
        """Equality case of delta >= value + chi*nu(z): the object's explicit
        value sits exactly at the critical vertex abscissa."""
        return self.vertex is not None and self.vertex.abscissa == nu_value


def critical_data(polygon: TruncPolygon, gamma=None, nu_z=None) -> CriticalData:
    """Contact of the polygon with its extreme slope -1/nu(z) line.

    delta never exceeds gamma because the anchors sit on that very line;
    the critical height exists only below gamma, and then every contact
    vertex is a genuine cloud vertex with an integer level.
    """
    if gamma is not None and gamma != polygon.gamma:
        raise ValueError("critical data must use the polygon's own bound")
    if nu_z is not None and nu_z != polygon.nu_z:
        raise ValueError("critical data must use the polygon's own nu(z)")
    delta = vmin(*(v.abscissa + v.height for v in polygon.vertices))
    segment = tuple(
        v for v in polygon.vertices if v.abscissa + v.height == delta
    )
    if delta == polygon.gamma:
        return CriticalData(delta, segment, None, None)
    top = segment[0]
    for v in segment[1:]:
        if v.height > top.height:
            top = v
    return CriticalData(delta, segment, top.level, top)


def _object_levels(obj, n_levels):
    """The first n z-levels of a series or 1-form, truncation-honest."""
    if isinstance(obj, TruncatedSeries):
        return obj.z_levels(n_levels=n_levels)
    if isinstance(obj, LogForm):
        return level_decomposition(obj, n_levels=n_levels)
    raise TypeError("expected a truncated series or a logarithmic 1-form")


def _classify_level(level, threshold):
    if isinstance(level, LevelPair):
        return level.classify(threshold)
    return level.classify_gamma_final(threshold)


def _grid_floor(gamma: Value, nu_z: Value) -> int:
    """floor(gamma/nu(z)), the highest level the polygon can reach."""
    cb = closure_basis(gamma.basis)
    return (embed_value(gamma, cb) / embed_value(nu_z, cb)).floor()


def build_cloud(obj, model, gamma: Value) -> Cloud:
    """Classify the levels of a function or 1-form into a cloud.

    Every level of index up to floor(gamma/nu(z)) is classified at its
    own threshold gamma - k*nu(z); certified recessive levels drop out,
    the rest contribute points.  A truncation too short to certify some
    level surfaces as InsufficientPrecision.
    """
    if not isinstance(obj, (TruncatedSeries, LogForm)):
        raise TypeError("expected a truncated series or a logarithmic 1-form")
    if obj.s == 0:
        raise ValueError("the object has no dependent variable to expand in")
    if gamma.sign() <= 0:
        raise ValueError("the truncation bound must be positive")
    nu_z = model.dep_values[obj.s - 1]
    h = _grid_floor(gamma, nu_z)
    levels = _object_levels(obj, h + 1)
    points = []
    for k in range(h + 1):
        threshold = gamma - nu_z.scale(k)
        cls = _classify_level(levels[k], threshold)
        if cls.kind == "recessive":
            continue
        points.append(CloudPoint(cls.value, k, cls.kind == "dominant", k))
    return Cloud(tuple(points), gamma, nu_z)


def build_polygons(obj, model, gamma: Value):
    """The polygon, its dominant part, and the per-level entry bounds."""
    cloud = build_cloud(obj, model, gamma)
    full = TruncPolygon(cloud)
    dom = TruncPolygon(cloud.dominant_part())
    h = _grid_floor(gamma, cloud.nu_z)
    taus = tuple(dom.tau(k) for k in range(h + 1))
    return full, dom, taus


class PreparednessReport:
    """Truthy when every level is final at its own entry bound."""

    __slots__ = ("ok", "offending", "taus")

    def __init__(self, ok, offending, taus):
        self.ok = bool(ok)
        self.offending = tuple(offending)
        self.taus = tuple(taus)

    def __bool__(self):
        return self.ok

    def __repr__(self):
        if self.ok:
            return "PreparednessReport(ok)"
        return f"PreparednessReport(offending levels {list(self.offending)})"


def is_gamma_prepared(obj, model, gamma: Value) -> PreparednessReport:
    """Check each level against the dominant polygon's entry bound.

    A level final at its truncation threshold gamma - k*nu(z) is final at
    the (no larger) entry bound tau_k as well: dominant stays dominant or
    turns recessive, recessive stays recessive.  A level that is neither
    passes exactly when its explicit value still clears tau_k strictly.
    Comparisons against quotient abscissas happen in the closure of the
    basis.
    """
    cloud = build_cloud(obj, model, gamma)
    dom = TruncPolygon(cloud.dominant_part())
    cb = dom.closure()
    h = _grid_floor(gamma, cloud.nu_z)
    levels = _object_levels(obj, h + 1)
    offending = []
    taus = []
    for k in range(h + 1):
        tau_k = dom.tau(k)
        taus.append(tau_k)
        threshold = gamma - cloud.nu_z.scale(k)
        cls = _classify_level(levels[k], threshold)
        if cls.kind in ("recessive", "dominant"):
            continue
        beta = embed_value(cls.value, cb)
        if not beta > embed_value(tau_k, cb):
            offending.append(k)
    return PreparednessReport(not offending, offending, taus)


# -- snapshots ---------------------------------------------------------------


def export_csv(cloud: Cloud, out=None) -> str:
    """Cloud table: level, exact abscissa, float abscissa, dominance."""
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["level", "abscissa_exact", "abscissa_float", "dominant"])
    for p in sorted(cloud.points, key=lambda p: p.level):
        w.writerow([p.level, repr(p.abscissa), float(p.abscissa), p.dominant])
    text = buf.getvalue()
    if out is not None:
        _write_text(out, text)
    return text


def _svg_path(vertices, sx, sy, height_px):
    cmds = []
    for i, v in enumerate(vertices):
        x = float(v.abscissa) * sx
        y = height_px - float(v.height) * sy
        cmds.append(f"{'M' if i == 0 else 'L'} {x:.2f} {y:.2f}")
    return " ".join(cmds)


def export_svg(full: TruncPolygon, dom: TruncPolygon, out=None) -> str:
    """Draw both polygons and the critical contact line of the full one."""
    gamma = float(full.gamma)
    width, height = 420.0, 420.0
    pad = 30.0
    sx = (width - 2 * pad) / gamma
    sy = (height - 2 * pad) / gamma
    base = height - 2 * pad
    crit = critical_data(full)
    d = float(crit.delta)
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" '
        f'height="{height:.0f}" viewBox="0 0 {width:.0f} {height:.0f}">',
        f'<rect width="{width:.0f}" height="{height:.0f}" fill="white"/>',
        f'<g transform="translate({pad},{pad})">',
        # axes
        f'<line x1="0" y1="{base:.1f}" x2="{width - 2 * pad:.1f}" '
        f'y2="{base:.1f}" stroke="black" stroke-width="1"/>',
        f'<line x1="0" y1="0" x2="0" y2="{base:.1f}" '
        f'stroke="black" stroke-width="1"/>',
        # critical line u + v = delta (scaled coordinates)
        f'<line x1="{d * sx:.1f}" y1="{base:.1f}" x2="0" '
        f'y2="{base - d * sy:.1f}" stroke="#999" '
        f'stroke-dasharray="2 3" stroke-width="1"/>',
        f'<path d="{_svg_path(full.vertices, sx, sy, base)}" '
        f'fill="none" stroke="#1f77b4" stroke-width="2"/>',
        f'<path d="{_svg_path(dom.vertices, sx, sy, base)}" '
        f'fill="none" stroke="#d62728" stroke-width="1.5" '
        f'stroke-dasharray="6 3"/>',
    ]
    for p in full.cloud.points:
        x = float(p.abscissa) * sx
        y = base - float(p.scaled(full.nu_z)) * sy
        fill = "#1f77b4" if p.dominant else "#aec7e8"
        lines.append(f'<circle cx="{x:.1f}" cy="{y:.1f}" r="3.5" fill="{fill}"/>')
    for v in full.vertices:
        if not v.anchor:
            continue
        x = float(v.abscissa) * sx
        y = base - float(v.height) * sy
        lines.append(
            f'<rect x="{x - 3:.1f}" y="{y - 3:.1f}" width="6" height="6" fill="#555"/>'
        )
    lines.append("</g></svg>")
    text = "\n".join(lines)
    if out is not None:
        _write_text(out, text)
    return text


def _write_text(out, text):
    if hasattr(out, "write"):
        out.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
