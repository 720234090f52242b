"""Model domains, phase points and event-driven free flight.

Three closed-form models are provided:

* :class:`Layered1D` -- a segment cut into layers with stiffness ``p_i``;
  the Hamiltonian is ``sqrt(p xi^2)``.
* :class:`GluedDisks` -- two flat unit disks glued along their boundary
  circles by a circle diffeomorphism ``chi``.
* :class:`Hemispheres` -- two round hemispheres of radii ``c_plus`` and
  ``c_minus`` glued along the equator.

All propagation is exact: a free flight is solved in closed form up to the
next boundary or interface event.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicSpline

TWO_PI = 2.0 * math.pi

GRAZING_TOL = 1e-8
CORNER_TOL = 1e-10


class NumericDegeneracy(ValueError):
    """Start point sits on an interface with a near tangential direction."""


class HitKind(enum.Enum):
    TRANSMISSIBLE = "transmissible"
    TOTAL_REFLECTION = "total_reflection"
    GRAZING = "grazing"
    SINGULAR = "singular"
    OUTER_BOUNDARY = "outer_boundary"


@dataclass(frozen=True)
class PhasePoint:
    """Point of the cotangent bundle in a region chart.

    ``region`` is the layer index (1D) or ``+1``/``-1`` (disks, hemispheres).
    ``x`` and ``xi`` are chart coordinates of the position and covector.
    """

    region: int
    x: tuple
    xi: tuple


@dataclass(frozen=True)
class InterfaceHit:
    """A classified boundary/interface event.

    Following the convention of the splitting laws, ``plus`` always refers
    to the side of approach and ``minus`` to the far side.  ``tau_plus`` and
    ``tau_minus`` are the conormal components in unit-conormal units;
    ``tau_tilde`` is only set at total reflection.
    """

    point: PhasePoint
    kind: HitKind
    time: float
    location: float
    far_location: float | None = None
    xi_y_plus: float = 0.0
    xi_y_minus: float = 0.0
    tau_plus: float = 1.0
    tau_minus: float | None = None
    tau_tilde: float | None = None
    interface: int | None = None

    @property
    def side(self) -> int:
        return self.point.region


# ---------------------------------------------------------------------------
# circle maps used as gluing diffeomorphisms


def _safe_inverse(f, df, y, lo, hi, tol=1e-12, maxiter=200):
    """Invert an increasing function by Newton steps kept inside a bracket."""
    y = np.asarray(y, dtype=float)
    lo = np.broadcast_to(np.asarray(lo, dtype=float), y.shape).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=float), y.shape).copy()
    s = 0.5 * (lo + hi)
    for _ in range(maxiter):
        r = f(s) - y
        lo = np.where(r < 0, s, lo)
        hi = np.where(r > 0, s, hi)
        step = r / df(s)
        s_new = s - step
        out = (s_new <= lo) | (s_new >= hi)
        s_new = np.where(out, 0.5 * (lo + hi), s_new)
        done = np.abs(s_new - s) <= tol * max(1.0, float(np.max(np.abs(y), initial=1.0)))
        s = s_new
        if np.all(done) or np.all(hi - lo <= tol):
            break
    return s


class CircleMap:
    """Strictly increasing degree-one map of the circle, ``chi(s + 2pi) = chi(s) + 2pi``."""

    def __call__(self, s):
        raise NotImplementedError

    def d1(self, s):
        raise NotImplementedError

    def d2(self, s):
        raise NotImplementedError

    def max_offset(self) -> float:
        """Upper bound on ``|chi(s) - s|``; used to bracket the inverse."""
        raise NotImplementedError

    def inverse(self, y):
        scalar = np.ndim(y) == 0
        y = np.asarray(y, dtype=float)
        m = self.max_offset() + 1e-9
        s = _safe_inverse(self, self.d1, y, y - m, y + m)
        return float(s) if scalar else s

    def is_identity(self) -> bool:
        return False


@dataclass(frozen=True)
class SineCircleMap(CircleMap):
    """``chi(s) = s + eps * sin(s + phi0)`` with ``|eps| < 1``."""

    eps: float = 0.3
    phi0: float = 0.0

    def __post_init__(self):
        if not abs(self.eps) < 1.0:
            raise ValueError("need |eps| < 1 for an increasing circle map")

    def __call__(self, s):
        return s + self.eps * np.sin(s + self.phi0)

    def d1(self, s):
        return 1.0 + self.eps * np.cos(s + self.phi0)

    def d2(self, s):
        return -self.eps * np.sin(s + self.phi0)

    def max_offset(self):
        return abs(self.eps)

    def is_identity(self):
        return self.eps == 0.0


class TableCircleMap(CircleMap):
    """Circle map given by samples of ``chi`` on ``[0, 2pi)``.

    The periodic part ``chi(s) - s`` is interpolated by a periodic cubic
    spline.
    """

    def __init__(self, s: Sequence[float], chi: Sequence[float]):
        s = np.asarray(s, dtype=float)
        chi = np.asarray(chi, dtype=float)
        order = np.argsort(s)
        s, chi = s[order], chi[order]
        offset = chi - s
        knots = np.append(s, s[0] + TWO_PI)
        vals = np.append(offset, offset[0])
        self._spline = CubicSpline(knots, vals, bc_type="periodic")
        self._s0 = s[0]
        grid = np.linspace(0, TWO_PI, 4097)
        if np.any(self.d1(grid) <= 0):
            raise ValueError("tabulated circle map is not strictly increasing")
        self._max = float(np.max(np.abs(self._spline(grid)))) + 1e-9

    def _wrap(self, s):
        return self._s0 + np.mod(np.asarray(s, dtype=float) - self._s0, TWO_PI)

    def __call__(self, s):
        return s + self._spline(self._wrap(s))

    def d1(self, s):
        return 1.0 + self._spline(self._wrap(s), 1)

    def d2(self, s):
        return self._spline(self._wrap(s), 2)

    def max_offset(self):
        return self._max


# ---------------------------------------------------------------------------
# free flight descriptors


@dataclass(frozen=True)
class Flight:
    """Closed-form geodesic segment starting at ``start`` for ``time`` units."""

    model: "ModelDomain"
    start: PhasePoint
    time: float
    end: PhasePoint
    data: tuple = field(default=(), repr=False)

    def at(self, tau: float) -> PhasePoint:
        return self.model._flight_at(self, tau)


class ModelDomain:
    """Common interface of the three model domains."""

    dim: int
    regions: tuple

    def cometric(self, p: PhasePoint) -> float:
        raise NotImplementedError

    def normalize(self, p: PhasePoint) -> tuple[PhasePoint, float]:
        """Scale the covector onto the unit cosphere; returns the scale used."""
        g = self.cometric(p)
        if g <= 0:
            raise ValueError("zero covector")
        lam = math.sqrt(g)
        if lam == 1.0:
            return p, 1.0
        return PhasePoint(p.region, p.x, tuple(v / lam for v in p.xi)), lam

    def is_on_shell(self, p: PhasePoint, tol: float = 1e-12) -> bool:
        return abs(self.cometric(p) - 1.0) <= tol

    def flight(self, p: PhasePoint) -> Flight:
        raise NotImplementedError

    def classify(self, flight: Flight) -> InterfaceHit:
        raise NotImplementedError

    def reflect(self, hit: InterfaceHit) -> PhasePoint:
        raise NotImplementedError

    def refract(self, hit: InterfaceHit) -> PhasePoint:
        raise NotImplementedError

    def density_ratio(self, hit: InterfaceHit) -> float:
        raise NotImplementedError

    def outer_amplitude(self, hit: InterfaceHit) -> float:
        raise NotImplementedError

    def embed(self, p: PhasePoint) -> tuple:
        """Coordinates used to decide whether two endpoints coincide."""
        return (float(p.region),) + tuple(p.x) + tuple(p.xi)

    def sample(self, rng: np.random.Generator) -> PhasePoint:
        raise NotImplementedError

    def _flight_at(self, flight: Flight, tau: float) -> PhasePoint:
        raise NotImplementedError

    # transverse variations (J, J') along a branch; None in 1D
    def jacobi_flight(self, region, jac, dt):
        return jac

    def jacobi_zeros(self, region, jac, length, include_start):
        return 0, False

    def jacobi_event(self, hit, refracted, jac):
        return jac


def free_flight(model: ModelDomain, p: PhasePoint):
    """First boundary/interface event of the forward geodesic through ``p``.

    Returns ``(hit, flight_time, path)``.  ``p`` need not be on-shell; the
    returned covectors carry the same scale, and the time is that of the
    unit-speed geodesic (the Hamiltonian is homogeneous of degree one).
    """
    q, lam = model.normalize(p)
    path = model.flight(q)
    hit = model.classify(path)
    if lam != 1.0:
        pt = hit.point
        hit = _replace_point(hit, PhasePoint(pt.region, pt.x, tuple(v * lam for v in pt.xi)))
    return hit, path.time, path


def _replace_point(hit, point):
    from dataclasses import replace

    return replace(hit, point=point)


def classify_hit(model: ModelDomain, raw: Flight) -> InterfaceHit:
    """Classify the end of a free flight produced by :func:`free_flight`."""
    return model.classify(raw)


# ---------------------------------------------------------------------------
# 1D layered segment


@dataclass(frozen=True)
class Layered1D(ModelDomain):
    """Segment ``[0, sum L_i]`` cut into layers of stiffness ``p_i``.

    ``b[i]`` is the interface weight at the interface between layers ``i``
    and ``i + 1`` as seen from layer ``i``; from the right it is ``1/b[i]``.
    ``ends`` holds ``"dirichlet"`` or ``"neumann"`` for the left/right end.
    """

    lengths: tuple
    stiffness: tuple
    b: tuple = ()
    ends: tuple = ("dirichlet", "dirichlet")

    dim = 1

    def __post_init__(self):
        object.__setattr__(self, "lengths", tuple(float(v) for v in self.lengths))
        object.__setattr__(self, "stiffness", tuple(float(v) for v in self.stiffness))
        n = len(self.lengths)
        b = tuple(float(v) for v in self.b) if len(self.b) else (1.0,) * (n - 1)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "ends", tuple(e.lower() for e in self.ends))
        if n == 0 or len(self.stiffness) != n or len(b) != n - 1:
            raise ValueError("need matching lengths/stiffness and n-1 interface weights")
        if min(self.lengths) <= 0 or min(self.stiffness) <= 0 or (b and min(b) <= 0):
            raise ValueError("lengths, stiffness and interface weights must be positive")
        if len(self.ends) != 2 or any(e not in ("dirichlet", "neumann") for e in self.ends):
            raise ValueError("ends must be dirichlet/neumann")

    @property
    def regions(self):
        return tuple(range(len(self.lengths)))

    @property
    def nodes(self) -> tuple:
        """Interface and end positions ``0 = X_0 < X_1 < ... < X_n``."""
        return (0.0,) + tuple(np.cumsum(self.lengths).tolist())

    @property
    def optical_length(self) -> float:
        return sum(L / math.sqrt(p) for L, p in zip(self.lengths, self.stiffness))

    def layer_of(self, x: float) -> int:
        X = self.nodes
        i = int(np.searchsorted(X, x, side="right")) - 1
        return min(max(i, 0), len(self.lengths) - 1)

    def cometric(self, p):
        return self.stiffness[p.region] * p.xi[0] ** 2

    def flight(self, p):
        i = p.region
        X = self.nodes
        x = p.x[0]
        direction = 1.0 if p.xi[0] > 0 else -1.0
        target = X[i + 1] if direction > 0 else X[i]
        t = (target - x) * direction / math.sqrt(self.stiffness[i])
        if t < 0:
            raise ValueError("phase point lies outside its layer")
        end = PhasePoint(i, (target,), p.xi)
        return Flight(self, p, t, end)

    def _flight_at(self, flight, tau):
        p = flight.start
        v = math.copysign(math.sqrt(self.stiffness[p.region]), p.xi[0])
        return PhasePoint(p.region, (p.x[0] + v * tau,), p.xi)

    def classify(self, flight):
        pt = flight.end
        i = pt.region
        right = pt.xi[0] > 0
        n = len(self.lengths)
        X = self.nodes
        if (right and i == n - 1) or (not right and i == 0):
            return InterfaceHit(pt, HitKind.OUTER_BOUNDARY, flight.time, pt.x[0],
                                interface=None)
        k = i if right else i - 1
        return InterfaceHit(pt, HitKind.TRANSMISSIBLE, flight.time, X[k + 1],
                            far_location=X[k + 1], tau_plus=1.0, tau_minus=1.0,
                            interface=k)

    def reflect(self, hit):
        pt = hit.point
        return PhasePoint(pt.region, pt.x, (-pt.xi[0],))

    def refract(self, hit):
        pt = hit.point
        j = pt.region + (1 if pt.xi[0] > 0 else -1)
        return PhasePoint(j, pt.x, (math.copysign(1.0 / math.sqrt(self.stiffness[j]), pt.xi[0]),))

    def density_ratio(self, hit):
        bk = self.b[hit.interface]
        return bk if hit.point.xi[0] > 0 else 1.0 / bk

    def outer_amplitude(self, hit):
        end = self.ends[1] if hit.point.xi[0] > 0 else self.ends[0]
        return -1.0 if end == "dirichlet" else 1.0

    def sample(self, rng):
        w = np.array([L / math.sqrt(p) for L, p in zip(self.lengths, self.stiffness)])
        i = int(rng.choice(len(w), p=w / w.sum()))
        X = self.nodes
        x = X[i] + rng.random() * self.lengths[i]
        sign = 1.0 if rng.random() < 0.5 else -1.0
        return PhasePoint(i, (x,), (sign / math.sqrt(self.stiffness[i]),))


# ---------------------------------------------------------------------------
# glued flat disks


def _wrap(s: float) -> float:
    s = math.fmod(s, TWO_PI)
    return s + TWO_PI if s < 0 else s


@dataclass(frozen=True)
class GluedDisks(ModelDomain):
    """Two flat unit disks; boundary point ``s_minus`` of the minus disk is
    glued to ``s_plus = chi(s_minus)`` of the plus disk.

    Positions are Cartesian in the unit disk, boundary points are labelled
    by arclength ``s``; ``u`` denotes the tangential covector component.
    """

    chi: CircleMap = field(default_factory=SineCircleMap)
    grazing_tol: float = GRAZING_TOL

    dim = 2
    regions = (1, -1)

    def cometric(self, p):
        return p.xi[0] ** 2 + p.xi[1] ** 2

    def flight(self, p):
        x, y = p.x
        dx, dy = p.xi
        xd = x * dx + y * dy
        r2 = x * x + y * y
        disc = xd * xd - r2 + 1.0
        if r2 >= 1.0 - 1e-15 and xd >= -1e-12:
            raise NumericDegeneracy("start on the boundary with outward or tangential direction")
        t = -xd + math.sqrt(max(disc, 0.0))
        hx, hy = x + dx * t, y + dy * t
        s = _wrap(math.atan2(hy, hx))
        end = PhasePoint(p.region, (math.cos(s), math.sin(s)), p.xi)
        return Flight(self, p, t, end, (s,))

    def _flight_at(self, flight, tau):
        p = flight.start
        return PhasePoint(p.region, (p.x[0] + p.xi[0] * tau, p.x[1] + p.xi[1] * tau), p.xi)

    def far_side(self, region: int, s: float, u: float):
        """Far-side boundary label, tangential component and density ratio."""
        if region == 1:
            s_o = self.chi.inverse(s)
            d1 = float(self.chi.d1(s_o))
            return _wrap(s_o), u * d1, d1
        d1 = float(self.chi.d1(s))
        return _wrap(float(self.chi(s))), u / d1, 1.0 / d1

    def classify(self, flight):
        pt = flight.end
        s = flight.data[0]
        c, sn = math.cos(s), math.sin(s)
        dx, dy = pt.xi
        u = -sn * dx + c * dy
        tau_p = math.sqrt(max(0.0, 1.0 - u * u))
        s_o, u_o, _ = self.far_side(pt.region, s, u)
        g_far = u_o * u_o
        common = dict(location=s, far_location=s_o, xi_y_plus=u, xi_y_minus=u_o, tau_plus=tau_p)
        if tau_p < self.grazing_tol:
            return InterfaceHit(pt, HitKind.GRAZING, flight.time, **common)
        if g_far < 1.0:
            tau_m = math.sqrt(1.0 - g_far)
            kind = HitKind.GRAZING if tau_m < self.grazing_tol else HitKind.TRANSMISSIBLE
            return InterfaceHit(pt, kind, flight.time, tau_minus=tau_m, **common)
        tau_t = math.sqrt(g_far - 1.0)
        kind = HitKind.GRAZING if tau_t < self.grazing_tol else HitKind.TOTAL_REFLECTION
        return InterfaceHit(pt, kind, flight.time, tau_tilde=tau_t, **common)

    def reflect(self, hit):
        pt = hit.point
        nx, ny = pt.x
        dx, dy = pt.xi
        dn = dx * nx + dy * ny
        return PhasePoint(pt.region, pt.x, (dx - 2 * dn * nx, dy - 2 * dn * ny))

    def refract(self, hit):
        if hit.tau_minus is None:
            raise ValueError("no refracted ray at total reflection")
        s, u, tau = hit.far_location, hit.xi_y_minus, hit.tau_minus
        c, sn = math.cos(s), math.sin(s)
        # inward direction: u * e(s) - tau * n(s)
        xi = (-u * sn - tau * c, u * c - tau * sn)
        return PhasePoint(-hit.point.region, (c, sn), xi)

    def density_ratio(self, hit):
        if hit.point.region == 1:
            return float(self.chi.d1(hit.far_location))
        return 1.0 / float(self.chi.d1(hit.location))

    def outer_amplitude(self, hit):
        raise ValueError("glued disks have no outer boundary")

    def sample(self, rng):
        region = 1 if rng.random() < 0.5 else -1
        r = math.sqrt(rng.random())
        a = TWO_PI * rng.random()
        th = TWO_PI * rng.random()
        return PhasePoint(region, (r * math.cos(a), r * math.sin(a)), (math.cos(th), math.sin(th)))

    @staticmethod
    def angular_momentum(p: PhasePoint) -> float:
        return p.x[0] * p.xi[1] - p.x[1] * p.xi[0]

    # --- transverse Jacobi fields (J, J') in the flat disk charts
    def jacobi_flight(self, region, jac, dt):
        J, dJ = jac
        return (J + dJ * dt, dJ)

    def jacobi_zeros(self, region, jac, length, include_start):
        J, dJ = jac
        if dJ == 0.0:
            return 0, False
        tz = -J / dJ
        lo_ok = tz >= 0.0 if include_start else tz > 0.0
        hit = lo_ok and tz < length
        degenerate = abs(tz - length) < 1e-9 or (tz != 0.0 and abs(tz) < 1e-9)
        return (1 if hit else 0), degenerate

    def jacobi_event(self, hit, refracted, jac):
        J, dJ = jac
        tau_a = hit.tau_plus
        ds = J / tau_a
        du = tau_a * dJ - J
        if not refracted:
            return (J, dJ - 2.0 * J / tau_a)
        u = hit.xi_y_plus
        if hit.point.region == 1:
            s_o = hit.far_location
            d1, d2 = float(self.chi.d1(s_o)), float(self.chi.d2(s_o))
            ds_o = ds / d1
            du_o = d1 * du + u * d2 / d1 * ds
        else:
            s = hit.location
            d1, d2 = float(self.chi.d1(s)), float(self.chi.d2(s))
            ds_o = d1 * ds
            du_o = du / d1 - u * d2 / (d1 * d1) * ds
        tau_o = hit.tau_minus
        return (tau_o * ds_o, du_o / tau_o - ds_o)


# ---------------------------------------------------------------------------
# glued hemispheres


@dataclass(frozen=True)
class Hemispheres(ModelDomain):
    """Round hemispheres of radii ``c_plus`` (north, region +1) and
    ``c_minus`` (south, region -1) glued along the equator.

    Chart: ``x = (longitude, colatitude)``, ``xi = (xi_lon, xi_colat)``; the
    cometric on side ``c`` is ``(xi_colat^2 + xi_lon^2 / sin^2 colat) / c^2``.
    """

    c_plus: float = 1.0
    c_minus: float = 1.0
    grazing_tol: float = GRAZING_TOL

    dim = 2
    regions = (1, -1)

    def __post_init__(self):
        if self.c_plus <= 0 or self.c_minus <= 0:
            raise ValueError("hemisphere scales must be positive")

    def radius(self, region: int) -> float:
        return self.c_plus if region == 1 else self.c_minus

    def cometric(self, p):
        c = self.radius(p.region)
        st = math.sin(p.x[1])
        return (p.xi[1] ** 2 + (p.xi[0] / st) ** 2) / (c * c)

    def to_cartesian(self, p: PhasePoint):
        """Unit-sphere position ``P`` and unit tangent ``V`` of an on-shell point."""
        phi, th = p.x
        c = self.radius(p.region)
        st, ct = math.sin(th), math.cos(th)
        sp, cp = math.sin(phi), math.cos(phi)
        vth = p.xi[1] / c
        vph = p.xi[0] / (c * st)
        P = (st * cp, st * sp, ct)
        V = (vth * ct * cp - vph * sp, vth * ct * sp + vph * cp, -vth * st)
        return P, V

    def from_cartesian(self, region, P, V, on_equator=False):
        c = self.radius(region)
        phi = math.atan2(P[1], P[0])
        th = math.pi / 2 if on_equator else math.acos(max(-1.0, min(1.0, P[2])))
        st, ct = math.sin(th), math.cos(th)
        sp, cp = math.sin(phi), math.cos(phi)
        vth = V[0] * ct * cp + V[1] * ct * sp - V[2] * st
        vph = -V[0] * sp + V[1] * cp
        return PhasePoint(region, (phi, th), (c * st * vph, c * vth))

    def flight(self, p):
        c = self.radius(p.region)
        P, V = self.to_cartesian(p)
        sgn = float(p.region)
        delta = math.atan2(sgn * V[2], sgn * P[2])
        alpha = delta + math.pi / 2
        if alpha <= 0.0:
            raise NumericDegeneracy("start on the equator heading out of its hemisphere")
        ca, sa = math.cos(alpha), math.sin(alpha)
        P1 = tuple(P[k] * ca + V[k] * sa for k in range(3))
        V1 = tuple(-P[k] * sa + V[k] * ca for k in range(3))
        end = self.from_cartesian(p.region, P1, V1, on_equator=True)
        return Flight(self, p, c * alpha, end, (P, V))

    def _flight_at(self, flight, tau):
        P, V = flight.data
        p = flight.start
        a = tau / self.radius(p.region)
        ca, sa = math.cos(a), math.sin(a)
        P1 = tuple(P[k] * ca + V[k] * sa for k in range(3))
        V1 = tuple(-P[k] * sa + V[k] * ca for k in range(3))
        return self.from_cartesian(p.region, P1, V1)

    def embed(self, p):
        P, V = self.to_cartesian(p)
        return (float(p.region),) + P + V

    def classify(self, flight):
        pt = flight.end
        c_a = self.radius(pt.region)
        c_o = self.radius(-pt.region)
        eta = pt.xi[0]
        g_a = (eta / c_a) ** 2
        g_o = (eta / c_o) ** 2
        tau_p = math.sqrt(max(0.0, 1.0 - g_a))
        common = dict(location=pt.x[0], far_location=pt.x[0], xi_y_plus=eta,
                      xi_y_minus=eta, tau_plus=tau_p)
        if tau_p < self.grazing_tol:
            return InterfaceHit(pt, HitKind.GRAZING, flight.time, **common)
        if g_o < 1.0:
            tau_m = math.sqrt(1.0 - g_o)
            kind = HitKind.GRAZING if tau_m < self.grazing_tol else HitKind.TRANSMISSIBLE
            return InterfaceHit(pt, kind, flight.time, tau_minus=tau_m, **common)
        tau_t = math.sqrt(g_o - 1.0)
        kind = HitKind.GRAZING if tau_t < self.grazing_tol else HitKind.TOTAL_REFLECTION
        return InterfaceHit(pt, kind, flight.time, tau_tilde=tau_t, **common)

    def reflect(self, hit):
        pt = hit.point
        return PhasePoint(pt.region, pt.x, (pt.xi[0], -pt.xi[1]))

    def refract(self, hit):
        if hit.tau_minus is None:
            raise ValueError("no refracted ray at total reflection")
        pt = hit.point
        c_o = self.radius(-pt.region)
        return PhasePoint(-pt.region, pt.x, (pt.xi[0], math.copysign(c_o * hit.tau_minus, pt.xi[1])))

    def density_ratio(self, hit):
        r = hit.point.region
        return self.radius(r) / self.radius(-r)

    def outer_amplitude(self, hit):
        raise ValueError("hemispheres have no outer boundary")

    def sample(self, rng):
        w = self.c_plus ** 2 / (self.c_plus ** 2 + self.c_minus ** 2)
        region = 1 if rng.random() < w else -1
        z = rng.random()
        th = math.acos(z) if region == 1 else math.pi - math.acos(z)
        phi = TWO_PI * rng.random()
        a = TWO_PI * rng.random()
        c = self.radius(region)
        return PhasePoint(region, (phi, th), (c * math.sin(th) * math.cos(a), c * math.sin(a)))

    def angular_momentum(self, p: PhasePoint) -> float:
        """Conserved longitude momentum normalised by the local radius."""
        return p.xi[0] / self.radius(p.region)

    # --- Jacobi fields on the round sphere: J'' + J / c^2 = 0
    def jacobi_flight(self, region, jac, dt):
        J, dJ = jac
        w = 1.0 / self.radius(region)
        cw, sw = math.cos(w * dt), math.sin(w * dt)
        return (J * cw + dJ / w * sw, -J * w * sw + dJ * cw)

    def jacobi_zeros(self, region, jac, length, include_start):
        J, dJ = jac
        w = 1.0 / self.radius(region)
        # J(t) = R cos(w t - delta); zeros at w t = delta + pi/2 + k pi
        delta = math.atan2(dJ / w, J)
        first = (delta + math.pi / 2) % math.pi
        count = 0
        degenerate = False
        a = first
        total = w * length
        if a == 0.0 and not include_start:
            a += math.pi
        while a < total:
            count += 1
            a += math.pi
        if abs(a - total) < 1e-9 or abs(a - math.pi - total) < 1e-9:
            degenerate = True
        return count, degenerate

    def jacobi_event(self, hit, refracted, jac):
        if not refracted:
            return jac
        J, dJ = jac
        r = hit.point.region
        m = (self.radius(-r) * hit.tau_minus) / (self.radius(r) * hit.tau_plus)
        return (m * J, dJ / m)
