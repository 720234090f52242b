"""Monte-Carlo estimators of the classical and diagonal transfer operators.

``Xi_t^c f(y)`` sums ``f`` over the endpoints of all branches from ``y``
weighted by ``sum |amp|^2``; ``Xi_t^d`` uses the coherent group weight
``|sum i^theta amp|^2``.  The two differ only on recombining endpoints.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .flow import BranchTree, PrunePolicy, endpoint_set, evolve, sample_path
from .geometry import GluedDisks, Hemispheres, Layered1D, ModelDomain, PhasePoint


@dataclass(frozen=True)
class Observable:
    """Bounded function on the unit cosphere bundle."""

    fn: Callable[[PhasePoint], float]
    mean: float | None = None
    name: str = "f"
    support: str = "everywhere"

    def __call__(self, p: PhasePoint) -> float:
        return self.fn(p)

    def __add__(self, other):
        return Observable(lambda p: self.fn(p) + other.fn(p), None, f"({self.name}+{other.name})")

    def scaled(self, a: float) -> "Observable":
        return Observable(lambda p: a * self.fn(p),
                          None if self.mean is None else a * self.mean, f"{a}*{self.name}")


def constant(c: float = 1.0) -> Observable:
    return Observable(lambda p: c, mean=c, name=f"const({c})")


def raised_cosine(d, width):
    """0 at distance 0, 1 beyond ``width``; C^1 ramp in between."""
    d = np.clip(np.asarray(d, dtype=float) / width, 0.0, 1.0)
    return 0.5 * (1.0 - np.cos(np.pi * d))


def distance_to_interface(model: ModelDomain, p: PhasePoint) -> float:
    """Chart distance to the nearest interface or outer boundary."""
    if isinstance(model, Layered1D):
        return float(min(abs(p.x[0] - X) for X in model.nodes))
    if isinstance(model, GluedDisks):
        return 1.0 - math.hypot(*p.x)
    if isinstance(model, Hemispheres):
        return model.radius(p.region) * abs(math.pi / 2 - p.x[1])
    raise TypeError(type(model))


def tapered(model: ModelDomain, f: Observable, delta: float = 0.05) -> Observable:
    """Window ``f`` to vanish within ``delta`` of every interface and end."""
    return Observable(lambda p: f(p) * float(raised_cosine(distance_to_interface(model, p), delta)),
                      None, f"tapered({f.name})", support=f"distance>{delta}")


def angular_momentum_sq(model: ModelDomain) -> Observable:
    """Squared normalised angular momentum; conserved in the integrable controls."""
    if isinstance(model, GluedDisks):
        return Observable(lambda p: GluedDisks.angular_momentum(p) ** 2, mean=0.25, name="L^2")
    if isinstance(model, Hemispheres):
        return Observable(lambda p: model.angular_momentum(p) ** 2, mean=1.0 / 3.0, name="L^2")
    raise TypeError("angular momentum needs a two dimensional model")


def region_indicator(region: int, volume_fraction: float | None = None) -> Observable:
    return Observable(lambda p: 1.0 if p.region == region else 0.0, mean=volume_fraction,
                      name=f"1[region={region}]")


@dataclass
class LiouvilleSampler:
    """Draws starts from the normalised Liouville measure of a model.

    Sample ``i`` uses the generator seeded by child ``i`` of
    ``SeedSequence(seed)``, so any subset of samples is reproducible on
    its own.
    """

    model: ModelDomain
    seed: int = 0

    def generators(self, n: int):
        return [np.random.default_rng(s) for s in np.random.SeedSequence(self.seed).spawn(n)]

    def draw(self, n: int) -> list:
        return [self.model.sample(g) for g in self.generators(n)]


# ---------------------------------------------------------------------------


def _evolved(model, start, t, policy):
    tree = BranchTree.start(model, start)
    return evolve(model, tree, t, policy)


def xi_classical(model: ModelDomain, f: Observable, t: float, start: PhasePoint,
                 policy: PrunePolicy = PrunePolicy()) -> tuple[float, float]:
    """``(Xi_t^c f(start), lost_mass)``; the true value lies within
    ``lost_mass * sup|f|`` of the returned one."""
    tree = _evolved(model, start, t, policy)
    return _apply(tree, f, diagonal=False), tree.lost_mass


def xi_diagonal(model: ModelDomain, f: Observable, t: float, start: PhasePoint,
                policy: PrunePolicy = PrunePolicy(), merge_tol: float = 1e-7) -> tuple[float, float]:
    tree = _evolved(model, start, t, policy)
    return _apply(tree, f, diagonal=True, merge_tol=merge_tol), tree.lost_mass


def _apply(tree, f, diagonal, merge_tol=1e-7):
    if not diagonal:
        return float(sum(b.weight * f(b.point) for b in tree.branches if b.alive))
    groups = endpoint_set(tree.model, tree, merge_tol)
    return float(sum(g.w_diagonal * f(g.point) for g in groups))


def weight_sums(model, tree, merge_tol=1e-7) -> tuple[float, float]:
    groups = endpoint_set(model, tree, merge_tol)
    return (sum(g.w_classical for g in groups), sum(g.w_diagonal for g in groups))


# ---------------------------------------------------------------------------
# time averages


class QuadratureWarning(RuntimeWarning):
    pass


def _gl(T, n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * T * (x + 1.0), 0.5 * T * w


def _cesaro_tree(model, f, T, start, n_t, policy, diagonal):
    s, w = _gl(T, n_t)
    tree = BranchTree.start(model, start)
    vals = np.empty(n_t)
    for k in range(n_t):
        evolve(model, tree, float(s[k]), policy)
        vals[k] = _apply(tree, f, diagonal)
    return 2.0 / T ** 2 * float(np.sum(w * (T - s) * vals)), tree.lost_mass


def cesaro_average(model: ModelDomain, f: Observable, T: float, start: PhasePoint,
                   n_t: int = 64, policy: PrunePolicy = PrunePolicy(), diagonal: bool = False,
                   tol: float = 1e-3) -> dict:
    """Cesaro mean ``2/T^2 int_0^T (T - s) Xi_s f(start) ds`` on the branch tree.

    Gauss-Legendre with ``n_t`` nodes, checked against ``2 n_t`` nodes; the
    tree is evolved once through the nodes of each pass.
    """
    if T <= 0:
        raise ValueError("T must be positive")
    v1, lost1 = _cesaro_tree(model, f, T, start, n_t, policy, diagonal)
    v2, lost2 = _cesaro_tree(model, f, T, start, 2 * n_t, policy, diagonal)
    return {"value": v2, "coarse": v1, "lost_mass": max(lost1, lost2),
            "quadrature_ok": abs(v2 - v1) <= tol}


def path_averages(model: ModelDomain, f: Observable, T: float, start: PhasePoint,
                  rng: np.random.Generator, nodes: int = 6) -> tuple[float, float]:
    """Cesaro and plain time averages of ``f`` along one sampled branch.

    The branch is drawn with the classical weights, so both numbers are
    unbiased for the corresponding averages of ``Xi_s^c f``.  Integration
    is composite Gauss-Legendre on each free flight.
    """
    x, w = np.polynomial.legendre.leggauss(nodes)
    ces = plain = 0.0
    segs = sample_path(model, start, T, rng)
    end = 0.0
    for seg in segs:
        a, b = seg.t0, min(seg.t0 + seg.flight.time, T)
        if b <= a:
            continue
        h = 0.5 * (b - a)
        for xk, wk in zip(x, w):
            s = a + h * (xk + 1.0)
            v = f(seg.flight.at(s - seg.t0))
            ces += h * wk * (T - s) * v
            plain += h * wk * v
        end = b
    # a path stopped by a grazing hit contributes nothing afterwards
    return 2.0 * ces / T ** 2, plain / T


@dataclass
class ScanRow:
    T: float
    n_samples: int
    l1_dev: float
    q25: float
    q50: float
    q75: float
    mc_stderr: float
    lost_mass_mean: float
    deviations: np.ndarray
    plain_deviations: np.ndarray

    def csv_row(self):
        return (self.T, self.n_samples, self.l1_dev, self.q25, self.q50, self.q75,
                self.mc_stderr, self.lost_mass_mean)


SCAN_COLUMNS = ("T", "n_samples", "l1_dev", "q25", "q50", "q75", "mc_stderr", "lost_mass_mean")


def estimate_mean(model, f, n, seed=12345):
    vals = [f(p) for p in LiouvilleSampler(model, seed).draw(n)]
    return float(np.mean(vals))


def ergodicity_scan(model: ModelDomain, f: Observable, T_list, n_samples: int,
                    sampler: LiouvilleSampler | None = None, method: str = "sampled",
                    policy: PrunePolicy = PrunePolicy(), n_t: int = 64) -> list[ScanRow]:
    """Deviation of Cesaro averages from the phase-space mean over random starts.

    ``method="sampled"`` draws one classical branch per start (no pruning,
    no lost mass); ``method="tree"`` or ``"diagonal"`` evaluates the full
    branch tree with Gauss-Legendre nodes.  The same starts are used for
    every ``T``.
    """
    sampler = sampler or LiouvilleSampler(model)
    mean = f.mean if f.mean is not None else estimate_mean(model, f, 20000)
    gens = sampler.generators(n_samples)
    starts = [model.sample(g) for g in gens]
    rows = []
    for T in T_list:
        dev = np.empty(n_samples)
        pdev = np.empty(n_samples)
        lost = np.zeros(n_samples)
        for i, (p, g) in enumerate(zip(starts, gens)):
            if method == "sampled":
                rng = np.random.default_rng([sampler.seed, i, int(round(T * 1000))])
                c, a = path_averages(model, f, T, p, rng)
                pdev[i] = abs(a - mean)
            else:
                res = cesaro_average(model, f, T, p, n_t, policy, diagonal=(method == "diagonal"))
                c, lost[i] = res["value"], res["lost_mass"]
                pdev[i] = np.nan
            dev[i] = abs(c - mean)
        q25, q50, q75 = np.quantile(dev, [0.25, 0.5, 0.75])
        rows.append(ScanRow(float(T), n_samples, float(dev.mean()), float(q25), float(q50), float(q75),
                            float(dev.std(ddof=1) / math.sqrt(n_samples)), float(lost.mean()), dev, pdev))
    return rows


def median_stderr(values: np.ndarray, n_boot: int = 2000, seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, len(values), size=(n_boot, len(values)))
    return float(np.std(np.median(values[idx], axis=1), ddof=1))


# ---------------------------------------------------------------------------


def composed(model, f, t, s, start, policy, diagonal, merge_tol=1e-7):
    """``(Xi_t Xi_s f)(start)``: evolve by ``t``, then apply ``Xi_s`` at each endpoint."""
    tree = _evolved(model, start, t, policy)
    lost = tree.lost_mass
    inner_lost = 0.0
    if diagonal:
        items = [(g.w_diagonal, g.point) for g in endpoint_set(model, tree, merge_tol)]
    else:
        items = [(b.weight, b.point) for b in tree.branches if b.alive]
    total = 0.0
    for w, q in items:
        sub = _evolved(model, q, s, policy)
        total += w * _apply(sub, f, diagonal, merge_tol)
        inner_lost += w * sub.lost_mass
    return total, lost + inner_lost


def semigroup_check(model: ModelDomain, f: Observable, s: float, t: float, n_samples: int,
                    seed: int = 0, policy: PrunePolicy = PrunePolicy(), merge_tol: float = 1e-7) -> list[dict]:
    """Residual ``Xi_{t+s} f - Xi_t Xi_s f`` averaged over Liouville starts."""
    starts = LiouvilleSampler(model, seed).draw(n_samples)
    sup_f = 1.0
    out = []
    for variant, diag in (("classical", False), ("diagonal", True)):
        res = np.empty(n_samples)
        lost = np.empty(n_samples)
        for i, p in enumerate(starts):
            tree = _evolved(model, p, t + s, policy)
            direct = _apply(tree, f, diag, merge_tol)
            comp, lost_c = composed(model, f, t, s, p, policy, diag, merge_tol)
            res[i] = direct - comp
            lost[i] = tree.lost_mass + lost_c
            sup_f = max(sup_f, abs(f(p)))
        out.append({"s": s, "t": t, "variant": variant, "residual": float(res.mean()),
                    "stderr": float(res.std(ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else 0.0,
                    "abs_residual": float(np.abs(res).mean()),
                    "lost_bound": float(lost.mean() * sup_f)})
    return out


SEMIGROUP_COLUMNS = ("s", "t", "variant", "residual", "stderr")


# ---------------------------------------------------------------------------


def side_counts(start_region: int, kappa: str, model: ModelDomain) -> tuple[int, int]:
    """Number of completed free flights on the plus and minus side."""
    region = start_region
    plus = minus = 0
    for d in kappa:
        if region == 1:
            plus += 1
        else:
            minus += 1
        if d == "2":
            region = -region
    return plus, minus


def recombination_census(model: ModelDomain, t: float, n_samples: int, seed: int = 0,
                         policy: PrunePolicy = PrunePolicy(), merge_tol: float = 1e-7) -> dict:
    """Count endpoint groups with two or more branches over Liouville starts.

    Groups are split into *exchange* groups, whose members spent different
    numbers of full flights on a side, and *reordering* groups, whose
    members only visit the sides in a different order.
    """
    starts = LiouvilleSampler(model, seed).draw(n_samples)
    n_with = 0
    groups_total = exchange = reorder = 0
    dev_d = []
    for p in starts:
        tree = _evolved(model, p, t, policy)
        groups = endpoint_set(model, tree, merge_tol)
        rec = [g for g in groups if g.recombining]
        if rec:
            n_with += 1
        for g in rec:
            groups_total += 1
            counts = {side_counts(p.region, k, model) for _, _, k in g.members}
            if len(counts) > 1:
                exchange += 1
            else:
                reorder += 1
        wd = sum(g.w_diagonal for g in groups)
        dev_d.append(wd + tree.lost_mass - 1.0)
    return {"n_samples": n_samples, "starts_with_recombination": n_with,
            "recombining_groups": groups_total, "exchange_groups": exchange,
            "reordering_groups": reorder, "fraction": n_with / n_samples,
            "max_abs_wd_deviation": float(np.max(np.abs(dev_d))),
            "mean_wd_deviation": float(np.mean(dev_d))}
