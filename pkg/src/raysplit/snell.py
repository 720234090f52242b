"""Reflection/refraction of covectors and the splitting amplitudes."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .geometry import HitKind, InterfaceHit, ModelDomain, PhasePoint


class GrazingInput(ValueError):
    pass


class TotalReflectionInput(ValueError):
    pass


class SplitKind(enum.Enum):
    TWO_WAY = "two_way"
    TOTAL_REFLECTION = "total_reflection"
    OUTER_BOUNDARY = "outer_boundary"


@dataclass(frozen=True)
class SplitOutcome:
    reflected: tuple  # (PhasePoint, amplitude)
    refracted: tuple | None
    kind: SplitKind
    b_used: float


def transmissible_coefficients(b, tau_plus, tau_minus):
    """Reflection and refraction amplitudes for a two-way split.

    Works elementwise on arrays.  ``b`` is the density ratio seen from the
    side of approach, ``tau_plus``/``tau_minus`` the conormal components on
    the approach and far side.
    """
    bt = b * tau_plus
    den = bt + tau_minus
    return (bt - tau_minus) / den, 2.0 * np.sqrt(bt * tau_minus) / den


def total_reflection_coefficient(b, tau_plus, tau_tilde):
    """Unit-modulus reflection amplitude at a point of total reflection."""
    bt = b * tau_plus
    return (bt - 1j * tau_tilde) / (bt + 1j * tau_tilde)


def _check(hit):
    if hit.kind in (HitKind.GRAZING, HitKind.SINGULAR):
        raise GrazingInput(f"cannot continue a {hit.kind.value} hit")


def reflect_covector(model: ModelDomain, hit: InterfaceHit) -> PhasePoint:
    _check(hit)
    return model.reflect(hit)


def refract_covector(model: ModelDomain, hit: InterfaceHit) -> PhasePoint:
    _check(hit)
    if hit.kind is not HitKind.TRANSMISSIBLE:
        raise TotalReflectionInput("no refracted trajectory at this hit")
    return model.refract(hit)


def boundary_density_ratio(model: ModelDomain, hit: InterfaceHit) -> float:
    """Ratio ``b`` of induced boundary densities, approach side over far side."""
    return model.density_ratio(hit)


def split_amplitudes(model: ModelDomain, hit: InterfaceHit, b: float | None = None) -> SplitOutcome:
    _check(hit)
    reflected = model.reflect(hit)
    if hit.kind is HitKind.OUTER_BOUNDARY:
        return SplitOutcome((reflected, model.outer_amplitude(hit)), None,
                            SplitKind.OUTER_BOUNDARY, 1.0)
    if b is None:
        b = model.density_ratio(hit)
    if hit.kind is HitKind.TOTAL_REFLECTION:
        r = total_reflection_coefficient(b, hit.tau_plus, hit.tau_tilde)
        return SplitOutcome((reflected, complex(r)), None, SplitKind.TOTAL_REFLECTION, b)
    r, t = transmissible_coefficients(b, hit.tau_plus, hit.tau_minus)
    return SplitOutcome((reflected, float(r)), (model.refract(hit), float(t)),
                        SplitKind.TWO_WAY, b)


def random_transmissible_hits(model: ModelDomain, rng: np.random.Generator, n: int):
    """Vectorised random transmissible hits ``(b, tau_plus, tau_minus)``.

    Hit locations and incidence angles are drawn uniformly; hits that turn
    out totally reflected or grazing are discarded, so fewer than ``n`` rows
    may come back.
    """
    from .geometry import GluedDisks, Hemispheres, Layered1D

    if isinstance(model, Layered1D):
        k = rng.integers(0, len(model.b), size=n)
        from_left = rng.random(n) < 0.5
        bk = np.asarray(model.b)[k]
        b = np.where(from_left, bk, 1.0 / bk)
        return b, np.ones(n), np.ones(n)
    plus = rng.random(n) < 0.5
    u = rng.uniform(-1.0, 1.0, n)
    if isinstance(model, GluedDisks):
        s = rng.uniform(0.0, 2 * math.pi, n)
        s_minus_of_plus = model.chi.inverse(s)
        d1 = np.where(plus, model.chi.d1(s_minus_of_plus), model.chi.d1(s))
        b = np.where(plus, d1, 1.0 / d1)
        u_far = np.where(plus, u * d1, u / d1)
        tau_p = np.sqrt(1.0 - u * u)
    elif isinstance(model, Hemispheres):
        c_a = np.where(plus, model.c_plus, model.c_minus)
        c_o = np.where(plus, model.c_minus, model.c_plus)
        eta = u * c_a
        b = c_a / c_o
        tau_p = np.sqrt(1.0 - u * u)
        u_far = eta / c_o
    else:
        raise TypeError(type(model))
    keep = (np.abs(u_far) < 1.0)
    tau_m = np.sqrt(np.clip(1.0 - u_far ** 2, 0.0, None))
    keep &= (tau_p > 1e-8) & (tau_m > 1e-8)
    return b[keep], tau_p[keep], tau_m[keep]
