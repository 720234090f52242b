"""Boundary-section dynamics of the glued disks.

A section point ``(s, u)`` is a boundary label ``s`` of the plus disk and a
tangential covector component ``u`` measured in plus-disk units.  On side
``PLUS`` it describes a chord leaving ``s`` inside the plus disk; on side
``MINUS`` the chord leaves the glued point ``chi^{-1}(s)`` inside the minus
disk, where its tangential component is ``u / psi(s)``.

All maps accept scalars or numpy arrays.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import TWO_PI, GluedDisks, PhasePoint
from .snell import total_reflection_coefficient, transmissible_coefficients

NEAR_GRAZING = 1e-12


class NotInYMinus(ValueError):
    pass


class Side(enum.Enum):
    PLUS = 1
    MINUS = -1


@dataclass(frozen=True)
class SectionPoint:
    s: float
    u: float
    side: Side = Side.PLUS
    near_grazing: bool = field(default=False, compare=False)


def _wrap(s):
    return np.mod(s, TWO_PI)


def psi(model: GluedDisks, s):
    """``1 / chi'(chi^{-1}(s))``: the half-width of the minus leaf space at ``s``."""
    return 1.0 / model.chi.d1(model.chi.inverse(s))


def rotation_angle(u):
    return 2.0 * np.arccos(u)


def p_plus_arrays(model: GluedDisks, s, u):
    return _wrap(s + rotation_angle(u)), u


def p_plus_inverse_arrays(model: GluedDisks, s, u):
    return _wrap(s - rotation_angle(u)), u


def p_minus_arrays(model: GluedDisks, s, u, strict=True):
    s_m = model.chi.inverse(s)
    beta = u * model.chi.d1(s_m)
    bad = np.abs(beta) >= 1.0
    if strict and np.any(bad):
        raise NotInYMinus("|u| >= psi(s): point is not in the minus section")
    s_m2 = s_m + rotation_angle(np.clip(beta, -1.0, 1.0))
    s2 = model.chi(s_m2)
    u2 = beta / model.chi.d1(s_m2)
    return _wrap(s2), u2


def p_minus_inverse_arrays(model: GluedDisks, s, u):
    s_m = model.chi.inverse(s)
    beta = u * model.chi.d1(s_m)
    if np.any(np.abs(beta) >= 1.0):
        raise NotInYMinus("|u| >= psi(s): point is not in the minus section")
    s_m2 = s_m - rotation_angle(beta)
    return _wrap(model.chi(s_m2)), beta / model.chi.d1(s_m2)


def leaf_parameter(model: GluedDisks, s, u):
    """``u / psi(s)``; constant along orbits of the minus map."""
    return u / psi(model, s)


def p_plus(model: GluedDisks, pt: SectionPoint) -> SectionPoint:
    if not abs(pt.u) < 1.0:
        raise ValueError("|u| must be < 1")
    s, u = p_plus_arrays(model, pt.s, pt.u)
    return SectionPoint(float(s), float(u), Side.PLUS, 1.0 - abs(u) < NEAR_GRAZING)


def p_minus(model: GluedDisks, pt: SectionPoint) -> SectionPoint:
    s, u = p_minus_arrays(model, pt.s, pt.u)
    ps = float(psi(model, s))
    return SectionPoint(float(s), float(u), Side.MINUS, ps - abs(float(u)) < NEAR_GRAZING)


def full_section_step(model: GluedDisks, pt: SectionPoint):
    """Chord on ``pt.side`` followed by the splitting at the arrival point.

    Returns ``[(child, amplitude), ...]``; the reflected child comes first.
    Both children share the same plus-unit coordinates and differ by side.
    """
    if pt.side is Side.PLUS:
        s1, u1 = p_plus_arrays(model, pt.s, pt.u)
        tau_a = math.sqrt(max(0.0, 1.0 - u1 * u1))
        u_far = u1 / float(psi(model, s1))
        b = 1.0 / float(psi(model, s1))
    else:
        s1, u1 = p_minus_arrays(model, pt.s, pt.u)
        beta = float(leaf_parameter(model, s1, u1))
        tau_a = math.sqrt(max(0.0, 1.0 - beta * beta))
        u_far = float(u1)
        b = float(psi(model, s1))
    s1, u1 = float(s1), float(u1)
    here = SectionPoint(s1, u1, pt.side)
    other = Side.MINUS if pt.side is Side.PLUS else Side.PLUS
    if abs(u_far) < 1.0:
        tau_o = math.sqrt(1.0 - u_far * u_far)
        r, t = transmissible_coefficients(b, tau_a, tau_o)
        return [(here, complex(r)), (SectionPoint(s1, u1, other), complex(t))]
    r = total_reflection_coefficient(b, tau_a, math.sqrt(u_far * u_far - 1.0))
    return [(here, complex(r))]


def full_section_step_weights(model: GluedDisks, s, u, side):
    """Vectorised child weights ``(|r|^2, |t|^2)`` for a batch of points on one side."""
    s = np.asarray(s, dtype=float)
    u = np.asarray(u, dtype=float)
    if side is Side.PLUS:
        s1, u1 = p_plus_arrays(model, s, u)
        ps = psi(model, s1)
        tau_a = np.sqrt(1.0 - u1 ** 2)
        u_far, b = u1 / ps, 1.0 / ps
    else:
        s1, u1 = p_minus_arrays(model, s, u)
        ps = psi(model, s1)
        tau_a = np.sqrt(1.0 - (u1 / ps) ** 2)
        u_far, b = u1, ps
    trans = np.abs(u_far) < 1.0
    tau_o = np.sqrt(np.where(trans, 1.0 - u_far ** 2, 1.0))
    r, t = transmissible_coefficients(b, tau_a, tau_o)
    r_tot = total_reflection_coefficient(b, tau_a, np.sqrt(np.where(trans, 1.0, u_far ** 2 - 1.0)))
    wr = np.where(trans, r ** 2, np.abs(r_tot) ** 2)
    wt = np.where(trans, t ** 2, 0.0)
    return wr, wt


# ---------------------------------------------------------------------------
# link to the flow picture


def section_to_phase(model: GluedDisks, pt: SectionPoint) -> PhasePoint:
    """Inward phase point on the boundary described by a section point."""
    if pt.side is Side.PLUS:
        s, u, region = pt.s, pt.u, 1
    else:
        s = float(model.chi.inverse(pt.s))
        u, region = pt.u * float(model.chi.d1(s)), -1
    tau = math.sqrt(1.0 - u * u)
    c, sn = math.cos(s), math.sin(s)
    return PhasePoint(region, (c, sn), (-u * sn - tau * c, u * c - tau * sn))


def chord_arrival(model: GluedDisks, pt: SectionPoint) -> SectionPoint:
    """Section coordinates of the chord end computed by the flow module."""
    hit = model.classify(model.flight(section_to_phase(model, pt)))
    s, u = hit.location, hit.xi_y_plus
    if pt.side is Side.MINUS:
        u = u / float(model.chi.d1(s))
        s = float(_wrap(model.chi(s)))
    return SectionPoint(s, u, pt.side)


# ---------------------------------------------------------------------------
# diagnostics


def area_jacobian(model: GluedDisks, fn, s, u, h=1e-4):
    """Jacobian determinant of a section map by Richardson-extrapolated central differences."""
    s = np.asarray(s, dtype=float)
    u = np.asarray(u, dtype=float)

    def partials(hh):
        def diff(a, b):
            ds = np.mod(a[0] - b[0] + math.pi, TWO_PI) - math.pi
            return ds / (2 * hh), (a[1] - b[1]) / (2 * hh)

        fs_s, fu_s = diff(fn(model, s + hh, u), fn(model, s - hh, u))
        fs_u, fu_u = diff(fn(model, s, u + hh), fn(model, s, u - hh))
        return np.stack([fs_s, fu_s, fs_u, fu_u])

    d1, d2 = partials(h), partials(h / 2)
    d = (4 * d2 - d1) / 3
    return d[0] * d[3] - d[2] * d[1]


@dataclass(frozen=True)
class GenericityReport:
    n_samples: int
    first_derivative_loci: int
    second_derivative_loci: int
    first_identically_one: bool
    second_identically_one: bool

    @property
    def violations(self) -> list:
        out = []
        if self.first_identically_one:
            out.append("chi' == 1 on every sample")
        if self.second_identically_one:
            out.append("chi'' == 1 on every sample")
        return out


def genericity_check(model: GluedDisks, n: int = 4096, tol: float = 1e-12) -> GenericityReport:
    """Count where ``chi' = 1`` and where ``chi'' = 1`` on a uniform grid.

    Both loci are reported; which one the genericity condition should
    constrain is left to the caller.
    """
    s = np.arange(n) * (TWO_PI / n)
    f1 = model.chi.d1(s) - 1.0
    f2 = model.chi.d2(s) - 1.0

    def crossings(f):
        sg = np.sign(np.where(np.abs(f) < tol, 0.0, f))
        nxt = np.roll(sg, -1)
        return int(np.sum((sg == 0) | (sg * nxt < 0)))

    ident1 = bool(np.all(np.abs(f1) < tol))
    ident2 = bool(np.all(np.abs(f2) < tol))
    return GenericityReport(n, crossings(f1), crossings(f2), ident1, ident2)


WORD_MAPS = {"+": p_plus_arrays, "-": p_minus_arrays}


def parse_word(word) -> list:
    """Accept ``"+-"`` / ``"+3-2"`` strings or ``[("+", 3), ("-", 2)]`` lists.

    Letters are applied left to right.
    """
    if isinstance(word, str):
        out, i = [], 0
        while i < len(word):
            c = word[i]
            if c not in WORD_MAPS:
                raise ValueError(f"bad word letter {c!r}")
            j = i + 1
            while j < len(word) and word[j].isdigit():
                j += 1
            out.append((c, int(word[i + 1:j]) if j > i + 1 else 1))
            i = j
        word = out
    word = [(c, int(k)) for c, k in word]
    if not word or any(k < 1 or c not in WORD_MAPS for c, k in word):
        raise ValueError("word must be a nonempty list of (+|-, power>=1)")
    return word


def word_map(model: GluedDisks, word, s, u):
    """Apply a word; entries that leave the minus domain come back as NaN."""
    s = np.array(s, dtype=float, copy=True)
    u = np.array(u, dtype=float, copy=True)
    for c, k in parse_word(word):
        for _ in range(k):
            if c == "+":
                s, u = p_plus_arrays(model, s, u)
            else:
                ok = np.abs(u) < psi(model, s)
                s, u = p_minus_arrays(model, s, np.where(ok, u, 0.0))
                s = np.where(ok, s, np.nan)
                u = np.where(ok, u, np.nan)
    return s, u


@dataclass(frozen=True)
class FixedPoint:
    s: float
    u: float
    residual: float
    min_singular: float

    @property
    def degenerate(self) -> bool:
        """True when ``DF - I`` is singular, i.e. the point lies on a curve of fixed points."""
        return self.min_singular < 1e-6


def _residual(model, word, s, u):
    s2, u2 = word_map(model, word, s, u)
    ds = np.mod(s2 - s + math.pi, TWO_PI) - math.pi
    return ds, u2 - u


def _jac(model, word, s, u, h=1e-7):
    a = np.array(_residual(model, word, np.array([s + h, s - h, s, s]),
                           np.array([u, u, u + h, u - h])))
    return np.array([[a[0, 0] - a[0, 1], a[0, 2] - a[0, 3]],
                     [a[1, 0] - a[1, 1], a[1, 2] - a[1, 3]]]) / (2 * h)


def periodic_point_scan(model: GluedDisks, word, resolution: int = 200,
                        u_max: float = 0.999, tol: float = 1e-10, dedupe: float = 1e-6):
    """Grid search plus Newton refinement for fixed points of a word map.

    The residual is evaluated on a ``resolution x resolution`` grid; every
    local minimum of its norm seeds a least-squares Newton iteration.
    Returns the refined fixed points sorted by ``(u, s)``.
    """
    with np.errstate(invalid="ignore"):
        return _scan(model, parse_word(word), resolution, u_max, tol, dedupe)


def _scan(model, word, resolution, u_max, tol, dedupe):
    ss = (np.arange(resolution) + 0.5) * (TWO_PI / resolution)
    uu = np.linspace(-u_max, u_max, resolution)
    S, U = np.meshgrid(ss, uu, indexing="ij")
    ds, du = _residual(model, word, S, U)
    norm = np.hypot(ds, du)
    norm = np.where(np.isnan(norm), np.inf, norm)
    padded = np.pad(norm, ((1, 1), (1, 1)), mode="wrap")
    padded[:, 0] = np.inf
    padded[:, -1] = np.inf
    is_min = np.ones_like(norm, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di or dj:
                nb = padded[1 + di:1 + di + resolution, 1 + dj:1 + dj + resolution]
                is_min &= norm <= nb
    is_min &= np.isfinite(norm)
    step = max(TWO_PI / resolution, 2 * u_max / resolution)
    seeds = np.argwhere(is_min & (norm < 50 * step))

    found: list[FixedPoint] = []
    for i, j in seeds:
        s, u = float(S[i, j]), float(U[i, j])
        ok = False
        for _ in range(50):
            r = np.array(_residual(model, word, s, u), dtype=float)
            if not np.all(np.isfinite(r)):
                break
            if np.hypot(*r) < tol:
                ok = True
                break
            J = _jac(model, word, s, u)
            if not np.all(np.isfinite(J)):
                break
            d = np.linalg.lstsq(J, -r, rcond=None)[0]
            s, u = float(np.mod(s + d[0], TWO_PI)), u + float(d[1])
            if abs(u) >= 1.0:
                break
        if not ok:
            continue
        sv = np.linalg.svd(_jac(model, word, s, u), compute_uv=False)
        res = float(np.hypot(*_residual(model, word, s, u)))
        if any(abs(math.remainder(s - q.s, TWO_PI)) < dedupe and abs(u - q.u) < dedupe for q in found):
            continue
        found.append(FixedPoint(s, u, res, float(sv[-1])))
    found.sort(key=lambda q: (q.u, q.s))
    return found


def section_orbit(model: GluedDisks, start: SectionPoint, n_steps: int, rng: np.random.Generator):
    """Random orbit of ``full_section_step``, each child picked with its weight.

    Rows are ``(step, side, s, u, amp_re, amp_im)`` where ``amp`` is the
    cumulative amplitude of the followed branch.
    """
    rows = [(0, start.side.value, start.s, start.u, 1.0, 0.0)]
    pt, amp = start, 1.0 + 0.0j
    for k in range(1, n_steps + 1):
        children = full_section_step(model, pt)
        w = np.array([abs(a) ** 2 for _, a in children])
        idx = 0 if len(children) == 1 else int(rng.random() >= w[0] / w.sum())
        pt, a = children[idx]
        amp *= a
        rows.append((k, pt.side.value, pt.s, pt.u, amp.real, amp.imag))
    return rows
