"""Reference computations written independently of the package code.

Each oracle uses a different route to the same number (direct formulas,
numerical integration, dense scans) so that tests compare two
implementations rather than one implementation with itself.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq


def lemma_transmissible(b, tp, tm):
    from mpmath import mp, mpf, sqrt

    mp.dps = 40
    b, tp, tm = mpf(b), mpf(tp), mpf(tm)
    r = (b * tp - tm) / (b * tp + tm)
    t = 2 * sqrt(b * tp * tm) / (b * tp + tm)
    return float(r), float(t)


def hamilton_1d_time(p: float, x0: float, target: float) -> float:
    """Time for ``H = sqrt(p) |xi|`` to carry ``x0`` to ``target`` (integrated ODE)."""
    xi0 = 1.0 / math.sqrt(p)

    def rhs(t, y):
        x, xi = y
        return [p * xi / math.sqrt(p * xi * xi), 0.0]

    ev = lambda t, y: y[0] - target
    ev.terminal = True
    sol = solve_ivp(rhs, (0, 100), [x0, xi0], events=ev, rtol=1e-12, atol=1e-12)
    return float(sol.t_events[0][0])


def hemisphere_cometric(c, colat, xi_lon, xi_colat):
    """Round-sphere cometric of radius ``c`` written out from the metric tensor."""
    g = np.diag([c * c * math.sin(colat) ** 2, c * c])
    return float(np.array([xi_lon, xi_colat]) @ np.linalg.inv(g) @ np.array([xi_lon, xi_colat]))


def equator_length_ratio(c_a, c_b, h=1e-4):
    """Arclength of a short equator segment measured in each side's metric."""
    seg = lambda c: quad(lambda s: math.sqrt(c * c * math.sin(math.pi / 2) ** 2), 0, h)[0]
    return seg(c_a) / seg(c_b)


def chord_hit(x, y, dx, dy):
    """Exit point of a ray from inside the unit circle, by bisection on |x + t d|."""
    f = lambda t: (x + t * dx) ** 2 + (y + t * dy) ** 2 - 1.0
    t = brentq(f, 0.0, 3.0, xtol=1e-15)
    return t, math.atan2(y + t * dy, x + t * dx) % (2 * math.pi)


def circle_inverse(eps, y):
    return brentq(lambda s: s + eps * math.sin(s) - y, y - 1.0, y + 1.0, xtol=1e-15)


def two_layer_secular(sigma):
    """Dirichlet two-layer problem, L=(1,1), p=(1,4), continuity of f and p f'."""
    k1, k2 = sigma, sigma / 2.0
    return k1 * math.cos(k1) * math.sin(k2) + 4.0 * k2 * math.cos(k2) * math.sin(k1)


def two_layer_roots(sigma_max, step=1e-3):
    s = np.arange(step * 0.37, sigma_max, step)
    d = np.array([two_layer_secular(v) for v in s])
    idx = np.nonzero(np.sign(d[:-1]) * np.sign(d[1:]) < 0)[0]
    return np.array([brentq(two_layer_secular, s[i], s[i + 1], xtol=1e-15) for i in idx])


def plane_wave_transfer_matrix(p1, p2, lam):
    """Transfer matrix between (right, left) wave amplitudes for continuous f and p f'."""
    s = math.sqrt(lam)
    k1, k2 = s / math.sqrt(p1), s / math.sqrt(p2)
    M1 = np.array([[1, 1], [1j * p1 * k1, -1j * p1 * k1]])
    M2 = np.array([[1, 1], [1j * p2 * k2, -1j * p2 * k2]])
    T = np.linalg.solve(M2, M1)  # (A2, B2) = T (A1, B1)
    # incident from left, nothing incoming from right: B2 = 0
    R = -T[1, 0] / T[1, 1]
    Tr = T[0, 0] + T[0, 1] * R
    return R, Tr


def sine_diag_element(fn, j):
    """``int_0^pi (2/pi) sin^2(j x) fn(x) dx``."""
    return quad(lambda x: 2 / math.pi * math.sin(j * x) ** 2 * fn(x), 0, math.pi, limit=400)[0]


def sphere_jacobi(c, s):
    """Jacobi field on the radius-``c`` sphere with J(0)=0, J'(0)=1."""
    sol = solve_ivp(lambda t, y: [y[1], -y[0] / c ** 2], (0, s), [0.0, 1.0], rtol=1e-12, atol=1e-14)
    return float(sol.y[0, -1])
