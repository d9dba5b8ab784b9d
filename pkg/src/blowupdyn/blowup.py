"""Blow-up of degenerate equilibria: polar (planar) and hyperspherical (4-D) charts.

A chart replaces the neighbourhood of a point by a radius ``r >= 0`` and
angles. With the time change ``dt = r dtau`` the field in chart variables is

    dr/dtau     = r * (u . F)
    dalpha/dtau = (d_alpha u . F) / |d_alpha u|^2

where ``u(alpha)`` is the unit direction and ``F`` the original field at the
chart image. These components are stored as numerators plus metric divisors;
``chart_jacobian @ components == r * F`` holds exactly (pullback identity).

When the chart is centred on a true equilibrium the angular components
vanish identically on ``r = 0``; the chart then records ``order = k``, the
number of further powers of ``r`` divided out, and all quantities on the
``r = 0`` sphere are taken from exact symbolic ``r``-derivatives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import expr as ex
from .hamsys import EquilibriumPoint, HamiltonianSystem, energy, simple_pendulum_torque, double_pendulum_torque
from .linalg import DEFAULT_TOL, Classification, classify, eigenvalues, is_degenerate
from .roots import damped_newton, grid_points, parallel_map, refine_singular_root

__all__ = [
    "BlowUpChart",
    "AngularEquilibrium",
    "BlowUpNode",
    "BlowUpError",
    "polar_chart",
    "hyperspherical_chart",
    "chart_from_field",
    "blowup_field",
    "angular_equilibria",
    "classify_angular",
    "recursive_blowup",
    "paper_fixture",
]

TWO_PI = 2.0 * math.pi
ANGLE_DEDUP = 1e-6
ANGULAR_RESIDUAL = 1e-9
SINGULAR_TOL = 1e-8
MAX_ORDER = 3
JET_TERMS = 4
DEFAULT_DEPTH = 3


class BlowUpError(ValueError):
    pass


def _full_circle(rng):
    return abs((rng[1] - rng[0]) - TWO_PI) < 1e-12


@dataclass(frozen=True, eq=False)
class BlowUpChart:
    """Blown-up vector field around ``center`` in (radial, *angles) variables."""

    center: np.ndarray
    dimension: int
    shifted: bool
    radial: str
    angles: tuple
    numerators: tuple | None  # (r*(u.F), d_alpha u . F, ...)
    metric: tuple | None  # divisors, one per component
    order: int = 0
    angle_ranges: tuple = ()
    source: str = "derived"
    system: HamiltonianSystem | None = None
    image: tuple | None = None  # state expressions in (radial, *angles)
    angular_override: tuple | None = None  # angular system on r=0, denominators cleared
    singular_override: tuple | None = None
    jacobian_override: np.ndarray | None = None
    column_order: str = "standard"
    published_points: tuple = ()
    notes: tuple = ()
    _c: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.dimension not in (2, 4):
            raise BlowUpError("chart dimension must be 2 or 4")
        if len(self.angles) != self.dimension - 1:
            raise BlowUpError("need dimension-1 angles")
        if not self.angle_ranges:
            object.__setattr__(self, "angle_ranges", tuple((0.0, TWO_PI) for _ in self.angles))
        self._prepare()

    # -- symbolic preparation -------------------------------------------------

    @property
    def variables(self) -> tuple:
        return (self.radial,) + tuple(self.angles)

    def _prepare(self):
        c = self._c
        angles = list(self.angles)
        if self.numerators is not None:
            comps = [n / d for n, d in zip(self.numerators, self.metric)]
            c["field"] = ex.compile_expressions(comps, self.variables)
            c["field_exprs"] = tuple(comps)
            k = self.order
            derivs = [_r_derivatives(n, self.radial, k + 1) for n in self.numerators]
            lim = [
                ex.substitute(d[k], {self.radial: 0.0}) / math.factorial(k) / m
                for d, m in zip(derivs, self.metric)
            ]
            rate = [
                ex.substitute(d[k + 1], {self.radial: 0.0}) / math.factorial(k + 1) / m
                for d, m in zip(derivs, self.metric)
            ]
            dlim = [ex.differentiate(e, a) for e in lim for a in angles]
            c["lim"] = ex.compile_expressions(lim, angles)
            c["rate"] = ex.compile_expressions(rate, angles)
            c["dlim"] = ex.compile_expressions(dlim, angles)
            cleared = [ex.substitute(d[k], {self.radial: 0.0}) for d in derivs[1:]]
            singular = list(self.metric[1:])
        else:
            cleared = list(self.angular_override)
            singular = list(self.singular_override or [ex.const(1.0)] * len(cleared))
        c["cleared_exprs"] = tuple(cleared)
        c["cleared"] = ex.compile_expressions(cleared, angles)
        c["cleared_jac"] = ex.compile_expressions(
            [ex.differentiate(e, a) for e in cleared for a in angles], angles
        )
        c["singular"] = ex.compile_expressions(singular, angles)
        if self.image is not None:
            c["image"] = ex.compile_expressions(self.image, self.variables)

    # -- numeric access -------------------------------------------------------

    def chart_map(self, r, angles) -> np.ndarray:
        """State-space image of a chart point."""
        if "image" not in self._c:
            raise BlowUpError("chart has no state-space image")
        return np.array(self._c["image"]([r, *angles]))

    def field(self, r, angles) -> np.ndarray:
        """(r dr/dt, r dalpha/dt, ...) before any extra division by r."""
        if "field" not in self._c:
            raise BlowUpError(f"{self.source} chart provides no field for r > 0")
        return np.array(self._c["field"]([r, *angles]))

    def desingularized(self, r, angles) -> np.ndarray:
        """Field divided by r**order; its r=0 limit comes from exact jets."""
        if r == 0.0:
            return np.array(self._c["lim"](list(angles)))
        return self.field(r, angles) / r**self.order

    def angular_system(self, angles) -> np.ndarray:
        return np.array(self._c["cleared"](list(angles)))

    def angular_system_jacobian(self, angles) -> np.ndarray:
        m = len(self.angles)
        return np.array(self._c["cleared_jac"](list(angles))).reshape(m, m)

    def singular_factors(self, angles) -> np.ndarray:
        return np.array(self._c["singular"](list(angles)))

    def linearization(self, angles) -> np.ndarray:
        """Jacobian of the desingularized field at (0, angles), order (r, angles)."""
        if self.jacobian_override is not None:
            return np.array(self.jacobian_override, dtype=float)
        if "lim" not in self._c:
            raise BlowUpError("chart cannot be linearized")
        n = self.dimension
        m = n - 1
        rate = np.array(self._c["rate"](list(angles)))
        dlim = np.array(self._c["dlim"](list(angles))).reshape(n, m)
        return np.column_stack([rate, dlim])

    def jet(self, terms: int = JET_TERMS) -> list:
        """Desingularized field as expressions, exact for order 0, else an r-jet."""
        if self.numerators is None:
            raise BlowUpError(f"{self.source} chart provides no field to blow up again")
        if self.order == 0:
            return list(self._c["field_exprs"])
        k = self.order
        r = ex.var(self.radial)
        out = []
        for n, m in zip(self.numerators, self.metric):
            d = _r_derivatives(n, self.radial, k + terms)
            acc = ex.const(0.0)
            for j in range(k, k + terms + 1):
                coeff = ex.substitute(d[j], {self.radial: 0.0}) / math.factorial(j) / m
                acc = acc + coeff * r ** (j - k)
            out.append(acc)
        return out


def _r_derivatives(e, r, upto):
    out = [e]
    for _ in range(upto):
        out.append(ex.differentiate(out[-1], r))
    return out


# ----------------------------------------------------------------- chart maps


def _directions(dim, angles):
    """Unit direction u(angles) and its analytic metric factors |d_alpha u|^2."""
    a = [ex.var(n) for n in angles]
    if dim == 2:
        (t,) = a
        u = [ex.cos(t), ex.sin(t)]
        metric = [ex.const(1.0)]
    else:
        t, f, e = a
        # slots follow state order (q1, q2, p1, p2):
        # q1 = sin t cos f sin e, p1 = sin t sin f sin e, q2 = cos t sin e, p2 = cos e
        u = [
            ex.sin(t) * ex.cos(f) * ex.sin(e),
            ex.cos(t) * ex.sin(e),
            ex.sin(t) * ex.sin(f) * ex.sin(e),
            ex.cos(e),
        ]
        metric = [ex.sin(e) ** 2, (ex.sin(t) * ex.sin(e)) ** 2, ex.const(1.0)]
    return u, metric


def blowup_field(
    field_exprs: Sequence[ex.Expression],
    variables: Sequence[str],
    center,
    shifted: bool = True,
    radial: str = "r",
    angles: Sequence[str] | None = None,
    system: HamiltonianSystem | None = None,
    source: str = "derived",
) -> BlowUpChart:
    """Blow up a 2-D or 4-D vector field (expressions in ``variables``)."""
    dim = len(variables)
    if dim not in (2, 4) or len(field_exprs) != dim:
        raise BlowUpError("blow-up needs a 2-D or 4-D field")
    if angles is None:
        angles = ("theta",) if dim == 2 else ("theta", "phi", "eta")
    angles = tuple(angles)
    center = np.asarray(center, dtype=float)
    base = center if shifted else np.zeros(dim)
    r = ex.var(radial)
    u, metric = _directions(dim, angles)
    image = tuple(ex.const(b) + r * ui for b, ui in zip(base, u))
    sub = [ex.substitute(f, dict(zip(variables, image))) for f in field_exprs]
    radial_num = r * _dot(u, sub)
    angular_num = [_dot([ex.differentiate(ui, a) for ui in u], sub) for a in angles]
    numerators = (radial_num, *angular_num)
    metric = (ex.const(1.0), *metric)
    ranges = ((0.0, TWO_PI),) if dim == 2 else ((0.0, TWO_PI), (0.0, TWO_PI), (0.0, math.pi))
    order = _vanishing_order(angular_num, radial, angles, ranges)
    return BlowUpChart(
        center=base,
        dimension=dim,
        shifted=shifted,
        radial=radial,
        angles=angles,
        numerators=numerators,
        metric=metric,
        order=order,
        angle_ranges=ranges,
        source=source,
        system=system,
        image=image,
    )


def _dot(a, b):
    acc = ex.const(0.0)
    for x, y in zip(a, b):
        acc = acc + x * y
    return acc


def _vanishing_order(numerators, radial, angles, ranges, samples=7):
    rng = np.random.default_rng(20240611)
    pts = [[rng.uniform(lo, hi) for lo, hi in ranges] for _ in range(samples)]
    derivs = [_r_derivatives(n, radial, MAX_ORDER) for n in numerators]
    mags = []
    for m in range(MAX_ORDER + 1):
        fn = ex.compile_expressions([ex.substitute(d[m], {radial: 0.0}) for d in derivs], angles)
        best = 0.0
        for p in pts:
            try:
                best = max(best, max(abs(v) for v in fn(p)))
            except ex.ExpressionError:
                continue
        mags.append(best)
    scale = 1.0 + max(mags)
    for m, v in enumerate(mags):
        if v > 1e-12 * scale:
            return m
    raise BlowUpError(f"angular field vanishes to order > {MAX_ORDER} on r=0")


def _check_degenerate(eq, force):
    if eq is not None and not eq.degenerate and not force:
        raise BlowUpError("equilibrium is not degenerate; blow-up unnecessary (use force=True)")


def polar_chart(
    sys: HamiltonianSystem, eq: EquilibriumPoint, shifted: bool = True, force: bool = False
) -> BlowUpChart:
    """Polar blow-up of a one-degree-of-freedom system around ``eq``."""
    if sys.dof != 1:
        raise BlowUpError("polar chart needs a one-degree-of-freedom system")
    _check_degenerate(eq, force)
    return blowup_field(
        sys.field_expressions, sys.state_names, eq.state, shifted=shifted, system=sys
    )


def hyperspherical_chart(
    sys: HamiltonianSystem, eq: EquilibriumPoint, shifted: bool = True, force: bool = False
) -> BlowUpChart:
    """Hyperspherical blow-up (R, theta, phi, eta) of a two-degree-of-freedom system."""
    if sys.dof != 2:
        raise BlowUpError("hyperspherical chart needs a two-degree-of-freedom system")
    _check_degenerate(eq, force)
    return blowup_field(
        sys.field_expressions, sys.state_names, eq.state, shifted=shifted, radial="R", system=sys
    )


def chart_from_field(
    components: Sequence[ex.Expression | str],
    radial: str = "r",
    angles: Sequence[str] = ("theta",),
    angle_ranges=None,
    source: str = "synthetic",
) -> BlowUpChart:
    """Chart whose (already desingularized) components are given directly."""
    comps = tuple(ex.parse(c) if isinstance(c, str) else c for c in components)
    dim = len(comps)
    return BlowUpChart(
        center=np.zeros(dim),
        dimension=dim,
        shifted=True,
        radial=radial,
        angles=tuple(angles),
        numerators=comps,
        metric=tuple(ex.const(1.0) for _ in comps),
        order=0,
        angle_ranges=tuple(angle_ranges) if angle_ranges else (),
        source=source,
    )


# ------------------------------------------------------------ angular points


@dataclass
class AngularEquilibrium:
    angles: tuple
    canonical: tuple
    radial: float = 0.0
    energy: float | None = None
    jacobian: np.ndarray | None = None
    eigenvalues: tuple = ()
    classification: Classification | None = None
    degenerate: bool = False
    residual: float = 0.0
    published: bool | None = None
    isolated: bool = True
    standard: dict | None = None  # r-first linearization when the chart uses another column order


def _wrap(x, lo):
    return lo + (x - lo) % TWO_PI


def _canonical(angles, dim):
    if dim == 2:
        return (angles[0] % TWO_PI,)
    t, f, e = angles
    e = (e + math.pi) % TWO_PI - math.pi
    if e < 0:
        # (theta, phi, eta) and (theta + pi, phi, -eta) name the same direction
        t, e = t + math.pi, -e
    return (t % TWO_PI, f % TWO_PI, e)


def _angle_distance(a, b):
    d = [abs((x - y + math.pi) % TWO_PI - math.pi) for x, y in zip(a, b)]
    return math.sqrt(sum(v * v for v in d))


def angular_equilibria(
    chart: BlowUpChart,
    grid: int = 16,
    tol: float = 1e-12,
    diagnostics: dict | None = None,
) -> list[AngularEquilibrium]:
    """Directions on the r=0 sphere where the angular field vanishes.

    Multi-start Newton on the angular system with denominators cleared;
    roots where a cleared denominator vanishes are coordinate singularities
    and are rejected. Duplicates modulo 2*pi are merged.
    """
    if grid < 8:
        raise ValueError("grid must be >= 8")
    ranges = chart.angle_ranges
    box = []
    for lo, hi in ranges:
        if _full_circle((lo, hi)):
            box.append((lo, hi - TWO_PI / grid))
        else:
            box.append((lo, hi))
    seeds = grid_points(box, grid)
    F = chart.angular_system
    J = chart.angular_system_jacobian

    def solve(seed):
        x, ok = damped_newton(F, J, seed, tol)
        if not ok:
            return None
        return refine_singular_root(F, J, x)

    raw = [x for x in parallel_map(solve, list(seeds)) if x is not None]
    kept, singular, outside = [], 0, 0
    for x in raw:
        wrapped = []
        inside = True
        for v, (lo, hi) in zip(x, ranges):
            w = _wrap(v, lo)
            if not _full_circle((lo, hi)) and w > hi + 1e-9:
                inside = False
            wrapped.append(w)
        if not inside:
            outside += 1
            continue
        if np.any(np.abs(chart.singular_factors(wrapped)) < SINGULAR_TOL):
            singular += 1
            continue
        res = float(np.max(np.abs(F(wrapped))))
        if res > ANGULAR_RESIDUAL:
            continue
        kept.append((tuple(float(w) for w in wrapped), res))
    kept.sort()
    unique = []
    for a, res in kept:
        if not any(_angle_distance(a, b) < ANGLE_DEDUP for b, _ in unique):
            unique.append((a, res))
    if diagnostics is not None:
        diagnostics.update(
            seeds=len(seeds),
            converged=len(raw),
            singular_rejected=singular,
            outside_range=outside,
            unique=len(unique),
        )
    out = []
    for a, res in unique:
        ae = AngularEquilibrium(
            angles=a,
            canonical=_canonical(a, chart.dimension),
            residual=res,
            isolated=_isolated(F, J, np.array(a), tol),
        )
        if chart.published_points:
            ae.published = any(_angle_distance(a, p) < 1e-8 for p in chart.published_points)
        out.append(classify_angular(chart, ae))
    return out


def _isolated(F, J, x, tol, h=1e-3):
    """False when the root lies on a curve of roots.

    Steps off the root along each null direction of the Jacobian and lets
    Newton pull the point back: an isolated (possibly multiple) root attracts
    it again, a continuum of roots stops it about ``h`` away.
    """
    jx = J(x)
    _, sv, vt = np.linalg.svd(jx)
    null = [vt[i] for i in range(len(sv)) if sv[i] < 1e-6 * max(1.0, sv[0])]
    for v in null:
        for sign in (1.0, -1.0):
            y, ok = damped_newton(F, J, x + sign * h * v, tol)
            if ok and np.linalg.norm(refine_singular_root(F, J, y) - x) > 0.25 * h:
                return False
    return True


def classify_angular(chart: BlowUpChart, ae: AngularEquilibrium, tol: float = DEFAULT_TOL) -> AngularEquilibrium:
    """Linearize the blown-up field at (0, angles) and classify."""
    J = chart.linearization(ae.angles)
    if chart.column_order == "printed":
        # columns (angles..., r), rows unchanged
        Jp = np.column_stack([J[:, 1:], J[:, :1]])
        eigs_std = eigenvalues(J)
        ae.standard = {
            "jacobian": J,
            "eigenvalues": eigs_std,
            "classification": _classification(eigs_std, tol),
        }
        J = Jp
    eigs = eigenvalues(J)
    ae.jacobian = J
    ae.eigenvalues = eigs
    ae.degenerate = is_degenerate(eigs, tol)
    ae.classification = _classification(eigs, tol)
    if chart.system is not None and chart.image is not None:
        ae.energy = energy(chart.system, chart.chart_map(0.0, ae.angles))
    return ae


def _classification(eigs, tol):
    if is_degenerate(eigs, tol):
        return Classification("Degenerate", summary="zero eigenvalue")
    return classify(eigs, tol)


# ----------------------------------------------------------------- recursion


@dataclass
class BlowUpNode:
    equilibrium: AngularEquilibrium
    status: str  # "resolved" | "unresolved"
    children: list = field(default_factory=list)
    chart: BlowUpChart | None = None
    message: str = ""

    @property
    def height(self) -> int:
        return 0 if not self.children and self.chart is None else 1 + max(
            (c.height for c in self.children), default=0
        )


def recursive_blowup(
    chart: BlowUpChart,
    ae: AngularEquilibrium,
    depth: int = DEFAULT_DEPTH,
    grid: int = 16,
    _level: int = 0,
) -> BlowUpNode:
    """Blow up degenerate angular equilibria again, up to ``depth`` levels."""
    if not ae.isolated:
        return BlowUpNode(ae, "unresolved", message="angular equilibria form a continuum")
    if not ae.degenerate:
        return BlowUpNode(ae, "resolved")
    if depth <= 0:
        return BlowUpNode(ae, "unresolved", message=f"unresolved after {_level} blow-ups")
    try:
        comps = chart.jet()
    except BlowUpError as exc:
        return BlowUpNode(ae, "unresolved", message=str(exc))
    level = _level + 1
    angle_names = ("psi",) if chart.dimension == 2 else ("theta", "phi", "eta")
    angle_names = tuple(f"{a}{level}" for a in angle_names)
    try:
        child = blowup_field(
            comps,
            chart.variables,
            (0.0, *ae.angles),
            shifted=True,
            radial=f"rho{level}",
            angles=angle_names,
            source=f"recursive:{level}",
        )
    except BlowUpError as exc:
        return BlowUpNode(ae, "unresolved", message=str(exc))
    kids = [
        recursive_blowup(child, a, depth - 1, grid, level) for a in angular_equilibria(child, grid)
    ]
    status = "resolved" if all(k.status == "resolved" for k in kids) else "unresolved"
    msg = "" if status == "resolved" else next(k.message for k in kids if k.status != "resolved")
    if not kids:
        msg = "no angular equilibria after blow-up"
    return BlowUpNode(ae, status, kids, child, msg)


# ------------------------------------------------------------------- fixtures

_POLAR_R = "-r*cos(theta)*(m^2*g*L^3*sin(r*sin(theta)) - m^2*g*L^3 - r*sin(theta))/(m*L^2)"
_POLAR_THETA = (
    "(m^2*g*L^3*sin(r*sin(theta))*sin(theta) - m^2*g*L^3*sin(theta)"
    " - sin(theta)^2*r + r)/(m*L^2)"
)
_ANGULAR_2DOF = (
    "-2*m*g*L*cos(phi)",
    "-2*m*g*L*sin(phi)*cos(theta)",
    "-2*m*g*L*cos(eta)*sin(theta)*sin(phi) + m*L*g*sin(eta)",
)
_ANGULAR_DENOMINATORS = ("sin(theta)*sin(eta)", "sin(eta)", "1")
_ATAN2 = math.atan(2.0)
PUBLISHED_ROOTS = (
    # (theta, phi, eta)
    (math.pi / 2, math.pi / 2, _ATAN2),
    (-math.pi / 2, math.pi / 2, -_ATAN2),
    (math.pi / 2, -math.pi / 2, -_ATAN2),
    (-math.pi / 2, -math.pi / 2, _ATAN2),
)


def _bind(text, params):
    return ex.bind(ex.parse(text), params)


def paper_fixture(name: str, m: float = 1.0, g: float = 1.0, L: float = 1.0):
    """Blow-up equations and matrices exactly as printed for the two pendulums.

    ``simple-eq7``: polar blow-up field of the torqued pendulum (unshifted);
    ``double-eq17``: angular system on R=0 for the double pendulum, with its
    denominators cleared; ``double-eq19``: the 4x4 Jacobian at those points.
    """
    params = {"m": m, "g": g, "L": L}
    if name == "simple-eq7":
        sys = simple_pendulum_torque(m, g, L, m * g * L)
        r, t = ex.var("r"), ex.var("theta")
        return BlowUpChart(
            center=np.zeros(2),
            dimension=2,
            shifted=False,
            radial="r",
            angles=("theta",),
            numerators=(_bind(_POLAR_R, params), _bind(_POLAR_THETA, params)),
            metric=(ex.const(1.0), ex.const(1.0)),
            order=0,
            source="fixture:simple-eq7",
            system=sys,
            image=(r * ex.cos(t), r * ex.sin(t)),
            column_order="printed",
            published_points=((0.0,),),
            notes=(
                "Jacobian columns ordered (theta, r) to match the printed matrix;"
                " the r-first linearization is reported under 'standard'",
            ),
        )
    if name == "double-eq17":
        sys = double_pendulum_torque(m, g, L)
        R = ex.var("R")
        u, _ = _directions(4, ("theta", "phi", "eta"))
        return BlowUpChart(
            center=np.zeros(4),
            dimension=4,
            shifted=False,
            radial="R",
            angles=("theta", "phi", "eta"),
            numerators=None,
            metric=None,
            angle_ranges=((-math.pi, math.pi), (-math.pi, math.pi), (-math.pi / 2, math.pi / 2)),
            source="fixture:double-eq17",
            system=sys,
            image=tuple(R * ui for ui in u),
            angular_override=tuple(_bind(e, params) for e in _ANGULAR_2DOF),
            singular_override=tuple(ex.parse(d) for d in _ANGULAR_DENOMINATORS),
            jacobian_override=paper_fixture("double-eq19", m, g, L),
            published_points=PUBLISHED_ROOTS,
            notes=("eta searched on the principal arctan branch (-pi/2, pi/2)",),
        )
    if name == "double-eq19":
        a = math.sqrt(5.0) * m * g * L
        return np.array(
            [
                [-a, 0.0, 0.0, 0.0],
                [0.0, a, 0.0, 0.0],
                [-1.0 / (2.0 * m * L**2), 0.0, a, 0.0],
                [0.0, 0.0, 0.0, a],
            ]
        )
    raise KeyError(f"unknown fixture {name!r}; expected simple-eq7, double-eq17 or double-eq19")


FIXTURES = ("simple-eq7", "double-eq17", "double-eq19")
