"""Spectrum of the layered 1D transmissive operator.

On layer ``i`` the eigenproblem is ``-(p_i f')' = lam f``.  At the interface
between layers ``i`` and ``i+1`` the function is continuous and
``p_i f'_i = beta_i p_{i+1} f'_{i+1}`` with
``beta_i = sqrt(p_i / p_{i+1}) / b_i``.  The calibrated weight
``b_i = sqrt(p_i / p_{i+1})`` gives ``beta_i = 1``, i.e. continuity of the
flux ``p f'``, and makes the plane-wave reflection coefficient coincide with
the classical splitting amplitude.  The operator is self-adjoint for the
inner product ``sum_i w_i int_layer f g`` with ``w_{i+1} = w_i beta_i``.

Eigenvalues are written ``lam = sigma**2``; inside layer ``i`` an
eigenfunction is ``A_i sin(k_i (x - X_i) + C_i)`` with ``k_i = sigma/sqrt(p_i)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .geometry import Layered1D, PhasePoint
from .transfer import Observable, raised_cosine

GOLDEN = 0.5 * (3.0 - math.sqrt(5.0))


class RootBracketFailure(RuntimeError):
    def __init__(self, msg, interval):
        super().__init__(f"{msg} on sigma interval {interval}")
        self.interval = interval


class QuadratureNotConverged(RuntimeError):
    pass


class TruncationTailTooLarge(RuntimeError):
    def __init__(self, msg, bound):
        super().__init__(msg)
        self.bound = bound


# ---------------------------------------------------------------------------
# plane waves


def calibrate_b(p_plus: float, p_minus: float) -> float:
    """Interface weight for which the splitting amplitude equals the plane-wave one."""
    if p_plus <= 0 or p_minus <= 0:
        raise ValueError("stiffness must be positive")
    return math.sqrt(p_plus / p_minus)


def plane_wave_coefficients(p_left: float, p_right: float, b: float, lam: float, x0: float = 0.0):
    """Reflection/transmission of a unit wave incident from the left.

    Solves the 2x2 complex matching system at the interface ``x0`` for
    ``e^{i k1 x} + R e^{-i k1 x}`` on the left and ``T e^{i k2 x}`` on the
    right.  Amplitudes are referred to the interface.  Returns ``(R, T, flux_ratio)`` where ``flux_ratio`` multiplies
    ``|T|^2`` in the flux balance ``|R|^2 + flux_ratio |T|^2 = 1``.
    """
    sigma = math.sqrt(lam)
    beta = math.sqrt(p_left / p_right) / b
    k1, k2 = sigma / math.sqrt(p_left), sigma / math.sqrt(p_right)
    e1p, e1m, e2 = np.exp(1j * k1 * x0), np.exp(-1j * k1 * x0), np.exp(1j * k2 * x0)
    # unknowns (R, T): continuity and flux matching
    M = np.array([[e1m, -e2],
                  [-1j * k1 * p_left * e1m, -beta * 1j * k2 * p_right * e2]])
    rhs = np.array([-e1p, -1j * k1 * p_left * e1p])
    R, T = np.linalg.solve(M, rhs)
    # refer both amplitudes to the interface itself
    R, T = R * e1m / e1p, T * e2 / e1p
    flux = beta * math.sqrt(p_right) / math.sqrt(p_left)
    return complex(R), complex(T), flux


# ---------------------------------------------------------------------------
# secular problem


@dataclass(frozen=True)
class SecularProblem:
    lengths: tuple
    stiffness: tuple
    b: tuple
    ends: tuple
    beta: tuple
    weights: tuple

    @classmethod
    def from_model(cls, model: Layered1D) -> "SecularProblem":
        p = model.stiffness
        beta = tuple(math.sqrt(p[i] / p[i + 1]) / model.b[i] for i in range(len(p) - 1))
        w = [1.0]
        for bt in beta:
            w.append(w[-1] * bt)
        return cls(model.lengths, p, model.b, model.ends, beta, tuple(w))

    @property
    def nodes(self):
        return (0.0,) + tuple(np.cumsum(self.lengths).tolist())

    @property
    def optical_length(self) -> float:
        return sum(L / math.sqrt(p) for L, p in zip(self.lengths, self.stiffness))

    def start_angle(self) -> float:
        return 0.0 if self.ends[0] == "dirichlet" else 0.5 * math.pi

    def target_offset(self) -> float:
        return 0.5 * math.pi if self.ends[1] == "neumann" else math.pi

    def shoot(self, sigma):
        """Pruefer angle/amplitude at the left of every layer and at the right end.

        ``f = R sin(theta)`` and ``p f' / (sigma sqrt(p)) = R cos(theta)``.
        Returns ``(theta, R)`` of shape ``(n_layers + 1,) + sigma.shape``.
        """
        sigma = np.asarray(sigma, dtype=float)
        n = len(self.lengths)
        th = np.empty((n + 1,) + sigma.shape)
        R = np.empty_like(th)
        th[0] = self.start_angle()
        R[0] = 1.0
        for i in range(n):
            end = th[i] + sigma * self.lengths[i] / math.sqrt(self.stiffness[i])
            if i == n - 1:
                th[i + 1], R[i + 1] = end, R[i]
                break
            rho = self.beta[i] * math.sqrt(self.stiffness[i + 1] / self.stiffness[i])
            m = np.round(end / math.pi)
            phi = end - m * math.pi
            th[i + 1] = m * math.pi + np.arctan(rho * np.tan(phi))
            R[i + 1] = R[i] * np.sqrt(np.sin(end) ** 2 + (np.cos(end) / rho) ** 2)
        return th, R

    def secular(self, sigma):
        """Boundary mismatch at the right end; zero exactly at eigenvalues."""
        th, R = self.shoot(sigma)
        f = np.sin(th[-1]) if self.ends[1] == "dirichlet" else np.cos(th[-1])
        return R[-1] * f

    def count(self, sigma):
        """Number of eigenvalues ``sigma_j**2 < sigma**2`` from the oscillation angle."""
        th = self.shoot(sigma)[0][-1]
        c = self.target_offset()
        return np.maximum(np.ceil((th - c) / math.pi), 0).astype(int)


@dataclass(frozen=True)
class SpectralData:
    problem: SecularProblem
    sigma: np.ndarray       # sqrt of eigenvalues, sorted
    A: np.ndarray           # (n_eig, n_layers) amplitudes
    C: np.ndarray           # (n_eig, n_layers) phases at the left node
    K: np.ndarray           # (n_eig, n_layers) wavenumbers

    @property
    def lambdas(self) -> np.ndarray:
        return self.sigma ** 2

    def __len__(self):
        return len(self.sigma)

    def evaluate(self, x, idx=None) -> np.ndarray:
        """Eigenfunction values, shape ``(len(idx), len(x))``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        idx = np.arange(len(self)) if idx is None else np.atleast_1d(idx)
        X = self.problem.nodes
        lay = np.clip(np.searchsorted(X, x, side="right") - 1, 0, len(X) - 2)
        xl = np.asarray(X)[lay]
        A, C, K = self.A[idx][:, lay], self.C[idx][:, lay], self.K[idx][:, lay]
        return A * np.sin(K * (x - xl)[None, :] + C)


def _layer_norms(problem, sigma, theta, R):
    k = sigma[None, :] / np.sqrt(np.asarray(problem.stiffness))[:, None]
    L = np.asarray(problem.lengths)[:, None]
    th0 = theta[:-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        integ = 0.5 * L - (np.sin(2 * (th0 + k * L)) - np.sin(2 * th0)) / (4 * k)
    integ = np.where(k == 0, L * np.sin(th0) ** 2, integ)
    w = np.asarray(problem.weights)[:, None]
    return np.sum(w * R[:-1] ** 2 * integ, axis=0)


def solve_spectrum(prob: SecularProblem, lambda_max: float, xtol: float = 1e-14) -> SpectralData:
    """All eigenvalues below ``lambda_max`` with eigenfunction data.

    Roots of the secular function are bracketed on a grid of step
    ``pi / (8 L_opt)`` in ``sigma`` and polished by Brent's method.  The
    oscillation count is checked on every grid cell; cells where the sign
    pattern does not account for the count are re-solved on the monotone
    angle function.
    """
    if lambda_max <= 0:
        raise ValueError("lambda_max must be positive")
    smax = math.sqrt(lambda_max)
    step = math.pi / (8.0 * prob.optical_length)
    grid = step * (np.arange(int(smax / step) + 2) + GOLDEN)
    grid = np.concatenate([[0.0], grid[grid < smax], [smax]])
    D = prob.secular(grid)
    N = prob.count(grid)
    c = prob.target_offset()

    def angle_root(m, a, b):
        f = lambda s: float(prob.shoot(s)[0][-1]) - (c + m * math.pi)
        if f(a) > 0 or f(b) < 0:
            raise RootBracketFailure(f"oscillation angle does not bracket mode {m}", (a, b))
        return brentq(f, a, b, xtol=xtol, rtol=4 * np.finfo(float).eps)

    roots = []
    if prob.ends == ("neumann", "neumann"):
        roots.append(0.0)
    sec = lambda s: float(prob.secular(s))
    for i in range(len(grid) - 1):
        a, b = grid[i], grid[i + 1]
        n_exp = int(N[i + 1] - N[i])
        if a == 0.0:
            n_exp -= len(roots)
        if n_exp == 0:
            continue
        if n_exp == 1 and D[i] * D[i + 1] < 0:
            roots.append(brentq(sec, a, b, xtol=xtol, rtol=4 * np.finfo(float).eps))
            continue
        for m in range(int(N[i]), int(N[i + 1])):
            if m == 0 and roots and roots[0] == 0.0:
                continue
            roots.append(angle_root(m, a, b))
    sigma = np.array(sorted(roots))
    if len(sigma) != int(N[-1]):
        raise RootBracketFailure(f"found {len(sigma)} roots, count says {int(N[-1])}", (0.0, smax))

    theta, R = prob.shoot(sigma)
    norm = np.sqrt(_layer_norms(prob, sigma, theta, R))
    A = (R[:-1] / norm).T
    Cph = theta[:-1].T.copy()
    K = (sigma[None, :] / np.sqrt(np.asarray(prob.stiffness))[:, None]).T
    # sign convention: positive slope at the left end
    return SpectralData(prob, sigma, A, Cph, K)


def calibrated_model(lengths=(1.0, 1.0), stiffness=(1.0, 4.0), ends=("dirichlet", "dirichlet")) -> Layered1D:
    b = tuple(calibrate_b(stiffness[i], stiffness[i + 1]) for i in range(len(stiffness) - 1))
    return Layered1D(tuple(lengths), tuple(stiffness), b, tuple(ends))


def weyl_count(data: SpectralData, lam: float):
    """``(#{lam_j < lam}, sqrt(lam) L_opt / pi)``."""
    n = int(np.searchsorted(data.lambdas, lam, side="left"))
    return n, math.sqrt(lam) * data.problem.optical_length / math.pi


def weyl_slope(data: SpectralData, lo_frac: float = 0.25) -> float:
    """Least-squares slope of the counting function against ``sqrt(lam)``.

    Uses the midpoints between consecutive eigenvalues above ``lo_frac``
    of the largest one, where the count is ``j + 1/2`` on average.
    """
    lam = data.lambdas
    sel = lam >= lo_frac * lam[-1]
    sig = data.sigma[sel]
    j = np.nonzero(sel)[0] + 1
    slope, _ = np.polyfit(sig, j - 0.5, 1)
    return float(slope)


# ---------------------------------------------------------------------------
# multiplication observables


@dataclass(frozen=True)
class Multiplier:
    """Multiplication operator by ``a(x)``; ``breaks`` are points where ``a`` is not smooth."""

    a: Callable[[np.ndarray], np.ndarray]
    name: str = "a"
    breaks: tuple = ()

    def __call__(self, x):
        return self.a(np.asarray(x, dtype=float))

    def __mul__(self, other: "Multiplier") -> "Multiplier":
        return Multiplier(lambda x: self.a(x) * other.a(x), f"{self.name}*{other.name}",
                          tuple(sorted(set(self.breaks) | set(other.breaks))))

    def symbol(self) -> Observable:
        """Phase-space function constant in the covector."""
        return Observable(lambda p: float(self.a(np.array([p.x[0]]))[0]), name=self.name)


def taper(nodes, delta: float = 0.05) -> Multiplier:
    X = np.asarray(nodes)
    brk = tuple(sorted(set(X.tolist()) | {float(v) for v in X + delta} | {float(v) for v in X - delta}))
    return Multiplier(lambda x: raised_cosine(np.min(np.abs(x[..., None] - X), axis=-1), delta),
                      f"taper({delta})", brk)


def tapered_multiplier(prob: SecularProblem, a: Callable, name: str = "a", delta: float = 0.05,
                       breaks=()) -> Multiplier:
    return Multiplier(a, name, tuple(breaks)) * taper(prob.nodes, delta)


def identity_multiplier() -> Multiplier:
    return Multiplier(lambda x: np.ones_like(x), "1")


def _grid(prob: SecularProblem, kmax: float, breaks=(), per_period: int = 14, min_panel: int = 4):
    """Composite Gauss-Legendre nodes/weights (with layer weights) on the segment."""
    t, w = np.polynomial.legendre.leggauss(per_period)
    X = prob.nodes
    xs, ws = [], []
    for i in range(len(prob.lengths)):
        pts = sorted({X[i], X[i + 1]} | {b for b in breaks if X[i] < b < X[i + 1]})
        period = 2 * math.pi / max(2 * kmax / math.sqrt(prob.stiffness[i]), 1e-12)
        for lo, hi in zip(pts[:-1], pts[1:]):
            n = max(min_panel, int(math.ceil((hi - lo) / period)))
            edges = np.linspace(lo, hi, n + 1)
            h = np.diff(edges)[:, None]
            mid = (0.5 * (edges[:-1] + edges[1:]))[:, None]
            xs.append((mid + 0.5 * h * t).ravel())
            ws.append((0.5 * h * w * prob.weights[i]).ravel())
    return np.concatenate(xs), np.concatenate(ws)


def _element(data, a, j, k, per_period):
    kmax = max(data.sigma[j], data.sigma[k], 1.0)
    x, w = _grid(data.problem, kmax, a.breaks, per_period)
    phi = data.evaluate(x, [j, k])
    return float(np.sum(w * a(x) * phi[0] * phi[1]))


def matrix_element(data: SpectralData, a: Multiplier, j: int, k: int, tol: float = 1e-10) -> float:
    """``<a phi_j, phi_k>`` in the weighted inner product (0-based indices)."""
    prev = _element(data, a, j, k, 14)
    for per in (20, 28, 40):
        cur = _element(data, a, j, k, per)
        if abs(cur - prev) <= tol * max(1.0, abs(cur)):
            return cur
        prev = cur
    raise QuadratureNotConverged(f"matrix element ({j},{k}) did not settle: last change {abs(cur - prev):.3g}")


def matrix_table(data: SpectralData, a: Multiplier, n: int, chunk: int = 4096) -> np.ndarray:
    """Symmetric ``n x n`` table of ``<a phi_j, phi_k>`` for ``j, k < n``."""
    x, w = _grid(data.problem, max(data.sigma[n - 1], 1.0), a.breaks)
    wa = w * a(x)
    out = np.zeros((n, n))
    idx = np.arange(n)
    for s in range(0, len(x), chunk):
        phi = data.evaluate(x[s:s + chunk], idx)
        out += (phi * wa[s:s + chunk]) @ phi.T
    return 0.5 * (out + out.T)


def diagonal_elements(data: SpectralData, a: Multiplier, n: int, chunk: int = 4096) -> np.ndarray:
    x, w = _grid(data.problem, max(data.sigma[n - 1], 1.0), a.breaks)
    wa = w * a(x)
    out = np.zeros(n)
    idx = np.arange(n)
    for s in range(0, len(x), chunk):
        phi = data.evaluate(x[s:s + chunk], idx)
        out += (phi * phi) @ wa[s:s + chunk]
    return out


def phase_space_mean(prob: SecularProblem, a: Multiplier) -> float:
    """Liouville average of a multiplication symbol: ``sum int a p^{-1/2} / L_opt``."""
    X = prob.nodes
    t, w = np.polynomial.legendre.leggauss(40)
    total = 0.0
    for i in range(len(prob.lengths)):
        pts = sorted({X[i], X[i + 1]} | {b for b in a.breaks if X[i] < b < X[i + 1]})
        for lo, hi in zip(pts[:-1], pts[1:]):
            edges = np.linspace(lo, hi, 9)
            for e0, e1 in zip(edges[:-1], edges[1:]):
                xx = 0.5 * (e0 + e1) + 0.5 * (e1 - e0) * t
                total += 0.5 * (e1 - e0) * np.sum(w * a(xx)) / math.sqrt(prob.stiffness[i])
    return total / prob.optical_length


def local_weyl_average(data: SpectralData, a: Multiplier, N: int):
    """``((1/N) sum_{j<N} <a phi_j, phi_j>, phase-space mean of a)``."""
    if N > len(data):
        raise ValueError(f"only {len(data)} eigenpairs available")
    d = diagonal_elements(data, a, N)
    return float(np.mean(d)), phase_space_mean(data.problem, a)


def qe_variance(data: SpectralData, a: Multiplier, N: int) -> np.ndarray:
    """Curve ``V(n) = (1/n) sum_{j<n} |<a phi_j, phi_j> - mean|^2`` for ``n = 1..N``."""
    d = diagonal_elements(data, a, N)
    m = phase_space_mean(data.problem, a)
    return np.cumsum((d - m) ** 2) / np.arange(1, N + 1)


# ---------------------------------------------------------------------------
# averaging: quantum conjugation against the diagonal transfer operator


@dataclass(frozen=True)
class AveragingResult:
    quantum: float
    classical: float
    tail_bound: float
    classical_error: float
    window: tuple
    truncation: int

    @property
    def difference(self) -> float:
        return abs(self.quantum - self.classical)


def quantum_average(data: SpectralData, a: Multiplier, b: Multiplier, c: Multiplier, t: float,
                    window=(200, 1200), band: int = 200):
    """Windowed mean of ``<c U(-t) a U(t) b phi_j, phi_j>`` and a truncation-tail bound.

    ``U(t)`` multiplies ``phi_k`` by ``exp(-i t sigma_k)``.  Expansions are
    cut at ``M = window[1] + band`` eigenfunctions; the tail bound follows
    from Cauchy-Schwarz with the exactly computed norms ``||b phi_j||`` and
    ``||c phi_j||``.
    """
    j0, j1 = window
    M = min(j1 + band, len(data))
    if M <= j1:
        raise ValueError("not enough eigenpairs for the requested window")
    Am, Bm, Cm = (matrix_table(data, op, M) for op in (a, b, c))
    ph = np.exp(-1j * t * data.sigma[:M])
    mid = (np.conj(ph)[:, None] * Am) * ph[None, :]
    cols = mid @ Bm[:, j0:j1]
    vals = np.einsum("kj,kj->j", Cm[:, j0:j1], cols)
    quantum = float(np.mean(vals.real))

    nb2 = diagonal_elements(data, b * b, j1)[j0:j1]
    nc2 = diagonal_elements(data, c * c, j1)[j0:j1]
    qb = np.sqrt(np.clip(nb2 - np.sum(Bm[:, j0:j1] ** 2, axis=0), 0.0, None))
    qc = np.sqrt(np.clip(nc2 - np.sum(Cm[:, j0:j1] ** 2, axis=0), 0.0, None))
    xs = np.linspace(0.0, data.problem.nodes[-1], 20001)
    amax = float(np.max(np.abs(a(xs))))
    tail = amax * (qb * np.sqrt(nc2) + np.sqrt(nb2) * qc)
    return quantum, float(np.mean(tail)), M


def classical_average(model: Layered1D, a: Multiplier, b: Multiplier, c: Multiplier, t: float,
                      panels: int = 24, order: int = 8, merge_tol: float = 1e-7):
    """``int c b Xi_t^d(a) d omega`` by composite Gauss-Legendre over both directions.

    Returns the value and the change against a run with half the panels.
    """
    from .flow import PrunePolicy
    from .transfer import xi_diagonal

    sym = a.symbol()
    cb = c * b
    X = model.nodes
    policy = PrunePolicy(eps_amp=0.0, max_branches=2 ** 16, max_events=256)
    tt, ww = np.polynomial.legendre.leggauss(order)

    def run(npan):
        total = 0.0
        for i, (L, p) in enumerate(zip(model.lengths, model.stiffness)):
            edges = np.linspace(X[i], X[i + 1], npan + 1)
            for e0, e1 in zip(edges[:-1], edges[1:]):
                xx = 0.5 * (e0 + e1) + 0.5 * (e1 - e0) * tt
                wx = 0.5 * (e1 - e0) * ww * cb(xx)
                for x, wgt in zip(xx, wx):
                    if wgt == 0.0:
                        continue
                    for sgn in (1.0, -1.0):
                        start = PhasePoint(i, (float(x),), (sgn / math.sqrt(p),))
                        v, _ = xi_diagonal(model, sym, t, start, policy, merge_tol)
                        total += 0.5 * wgt * v / math.sqrt(p)
        return total / model.optical_length

    fine = run(panels)
    coarse = run(max(panels // 2, 1))
    return fine, abs(fine - coarse)


def averaging_check(model: Layered1D, data: SpectralData, a: Multiplier, b: Multiplier,
                    c: Multiplier, t: float, window=(200, 1200), band: int = 200,
                    tail_tol: float | None = None, panels: int = 24) -> AveragingResult:
    q, tail, M = quantum_average(data, a, b, c, t, window, band)
    if tail_tol is not None and tail > tail_tol:
        raise TruncationTailTooLarge(f"tail bound {tail:.3g} exceeds {tail_tol:.3g}", tail)
    cl, err = classical_average(model, a, b, c, t, panels)
    return AveragingResult(q, cl, tail, err, tuple(window), M)
