"""Event-driven propagation of branching trajectories.

A :class:`BranchTree` holds every branch at a common time horizon.  Each
transmissible event spawns a reflected child (code digit ``0``) and a
refracted child (digit ``2``); forced reflections (total reflection, outer
boundary) append the marker ``R``.  Along each branch the transverse Jacobi
field is carried so that conjugate points can be counted; the Maslov
counter ``theta`` is minus that count.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import HitKind, ModelDomain, PhasePoint
from .snell import total_reflection_coefficient, transmissible_coefficients

log = logging.getLogger(__name__)


class BranchBudgetExceeded(RuntimeError):
    """Raised with the partial, flagged tree attached as ``.tree``."""

    def __init__(self, msg, tree):
        super().__init__(msg)
        self.tree = tree


class DegenerateJacobian(RuntimeWarning):
    pass


@dataclass(frozen=True)
class PrunePolicy:
    eps_amp: float = 1e-6
    max_branches: int = 2 ** 16
    max_events: int = 64
    strict: bool = True


class BranchState:
    """One branch: current free-flight segment plus accumulated data."""

    __slots__ = ("id", "parent", "seg_start", "t0", "flight", "amp", "conj", "kappa",
                 "jac", "alive", "lost_reason", "n_events", "point", "theta", "t")

    def __init__(self, id, parent, seg_start, t0, amp, conj, kappa, jac, n_events):
        self.id = id
        self.parent = parent
        self.seg_start = seg_start
        self.t0 = t0
        self.flight = None
        self.amp = amp
        self.conj = conj
        self.kappa = kappa
        self.jac = jac
        self.alive = True
        self.lost_reason = None
        self.n_events = n_events
        self.point = seg_start
        self.theta = -conj
        self.t = t0

    @property
    def weight(self) -> float:
        return abs(self.amp) ** 2

    def __repr__(self):
        return (f"BranchState(id={self.id}, t={self.t:.6g}, amp={self.amp:.6g}, "
                f"theta={self.theta}, kappa={self.kappa!r}, alive={self.alive})")


@dataclass
class BranchTree:
    model: ModelDomain
    root: PhasePoint
    branches: list
    horizon: float = 0.0
    lost_mass: float = 0.0
    prune_log: list = field(default_factory=list)
    events: list = field(default_factory=list)
    budget_exceeded: bool = False
    degenerate_count: int = 0
    record_events: bool = False
    _next_id: int = 1

    @classmethod
    def start(cls, model: ModelDomain, p: PhasePoint, record_events: bool = False) -> "BranchTree":
        p, _ = model.normalize(p)
        jac = None if model.dim == 1 else (0.0, 1.0)
        root = BranchState(0, -1, p, 0.0, 1.0 + 0j, 0, "", jac, 0)
        tree = cls(model, p, [root], record_events=record_events)
        if record_events:
            tree.events.append((0, -1, 0.0, p, root.amp, 0, "", "start"))
        return tree

    @property
    def alive(self):
        return [b for b in self.branches if b.alive]

    def total_weight(self) -> float:
        return sum(b.weight for b in self.branches if b.alive)

    def _new_id(self):
        i = self._next_id
        self._next_id += 1
        return i


def _count_zeros(model, br, length, tree):
    if br.jac is None:
        return 0
    include_start = not (br.t0 == 0.0 and br.n_events == 0)
    n, degenerate = model.jacobi_zeros(br.seg_start.region, br.jac, length, include_start)
    if degenerate:
        tree.degenerate_count += 1
        log.debug("DegenerateJacobian: conjugate point at an event time (branch %d)", br.id)
    return n


def _lose(tree, br, reason):
    br.alive = False
    br.lost_reason = reason
    tree.lost_mass += br.weight
    tree.prune_log.append((br.id, br.t0, reason, br.weight))


def evolve(model: ModelDomain, tree: BranchTree, t_target: float,
           policy: PrunePolicy = PrunePolicy()) -> BranchTree:
    """Advance every live branch to ``t_target`` (in place; also returned)."""
    if t_target < tree.horizon:
        raise ValueError("cannot evolve backwards")
    done = []
    stack = [b for b in tree.branches if b.alive]
    dead = [b for b in tree.branches if not b.alive]
    n_alive = len(stack)
    while stack:
        br = stack.pop()
        while True:
            if br.flight is None:
                br.flight = model.flight(br.seg_start)
            t_hit = br.t0 + br.flight.time
            if t_hit >= t_target:
                break
            if br.n_events >= policy.max_events:
                tree.budget_exceeded = True
                _lose(tree, br, "Budget")
                break
            hit = model.classify(br.flight)
            br.conj += _count_zeros(model, br, br.flight.time, tree)
            jac_end = None if br.jac is None else model.jacobi_flight(br.seg_start.region, br.jac, br.flight.time)
            kind = hit.kind
            if kind in (HitKind.GRAZING, HitKind.SINGULAR):
                br.t0 = t_hit
                _lose(tree, br, "Grazing" if kind is HitKind.GRAZING else "Singular")
                break
            reflected = model.reflect(hit)
            new_jac = None if jac_end is None else model.jacobi_event(hit, False, jac_end)
            if kind is HitKind.TRANSMISSIBLE:
                b = model.density_ratio(hit)
                r, t = transmissible_coefficients(b, hit.tau_plus, hit.tau_minus)
                if n_alive + 1 > policy.max_branches:
                    tree.budget_exceeded = True
                    br.t0 = t_hit
                    _lose(tree, br, "Budget")
                    break
                refr = model.refract(hit)
                jac2 = None if jac_end is None else model.jacobi_event(hit, True, jac_end)
                child = BranchState(tree._new_id(), br.id, refr, t_hit, br.amp * t, br.conj,
                                    br.kappa + "2", jac2, br.n_events + 1)
                n_alive += 1
                if tree.record_events:
                    tree.events.append((child.id, br.id, t_hit, refr, child.amp, -child.conj, "2", kind.value))
                if policy.eps_amp and child.weight < policy.eps_amp:
                    _lose(tree, child, "Pruned")
                    dead.append(child)
                    n_alive -= 1
                else:
                    stack.append(child)
                factor, digit = r, "0"
            elif kind is HitKind.TOTAL_REFLECTION:
                factor = complex(total_reflection_coefficient(model.density_ratio(hit), hit.tau_plus, hit.tau_tilde))
                digit = "R"
            else:
                factor, digit = model.outer_amplitude(hit), "R"
            old_id = br.id
            if digit == "0":
                br.parent, br.id = br.id, tree._new_id()
            br.amp = br.amp * factor
            br.seg_start, br.t0, br.flight = reflected, t_hit, None
            br.kappa += digit
            br.jac = new_jac
            br.n_events += 1
            if tree.record_events:
                tree.events.append((br.id, old_id if digit == "0" else br.parent, t_hit, reflected,
                                    br.amp, -br.conj, digit, kind.value))
            if policy.eps_amp and br.weight < policy.eps_amp:
                _lose(tree, br, "Pruned")
                n_alive -= 1
                break
        if br.alive:
            tau = t_target - br.t0
            br.point = br.flight.at(tau) if tau > 0 else br.seg_start
            extra = 0 if tau <= 0 else _count_zeros(model, br, tau, tree)
            br.theta = -(br.conj + extra)
            br.t = t_target
        done.append(br)
    tree.branches = sorted(done + dead, key=lambda b: b.id)
    tree.horizon = t_target
    if tree.budget_exceeded and policy.strict:
        raise BranchBudgetExceeded("branch or event budget exhausted", tree)
    return tree


@dataclass
class EndpointGroup:
    point: PhasePoint
    members: list  # (amp, theta, kappa)

    @property
    def w_classical(self) -> float:
        return sum(abs(a) ** 2 for a, _, _ in self.members)

    @property
    def w_diagonal(self) -> float:
        return abs(sum((1j) ** (th % 4) * a for a, th, _ in self.members)) ** 2

    @property
    def recombining(self) -> bool:
        return len(self.members) > 1


def endpoint_set(model: ModelDomain, tree: BranchTree, merge_tol: float = 1e-7) -> list:
    """Group live branches whose endpoints coincide within ``merge_tol``."""
    alive = [b for b in tree.branches if b.alive]
    if not alive:
        return []
    if len(alive) == 1:
        b = alive[0]
        return [EndpointGroup(b.point, [(b.amp, b.theta, b.kappa)])]
    emb = np.array([model.embed(b.point) for b in alive])
    parent = list(range(len(alive)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    if len(alive) > 64:
        from scipy.spatial import cKDTree

        pairs = cKDTree(emb).query_pairs(merge_tol)
    else:
        d = np.sqrt(((emb[:, None, :] - emb[None, :, :]) ** 2).sum(-1))
        ii, jj = np.nonzero(np.triu(d <= merge_tol, 1))
        pairs = zip(ii.tolist(), jj.tolist())
    for i, j in pairs:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    groups = {}
    for i, b in enumerate(alive):
        groups.setdefault(find(i), []).append(b)
    return [EndpointGroup(bs[0].point, [(b.amp, b.theta, b.kappa) for b in bs])
            for _, bs in sorted(groups.items())]


def jacobi_step(model: ModelDomain, branch: BranchState, event, refracted: bool):
    """Propagate ``branch.jac`` through its current flight and ``event``.

    Returns the new ``(J, J')`` and the number of conjugate points passed
    strictly inside the flight.
    """
    length = branch.flight.time if branch.flight is not None else event.time
    include_start = not (branch.t0 == 0.0 and branch.n_events == 0)
    n, _ = model.jacobi_zeros(branch.seg_start.region, branch.jac, length, include_start)
    jac = model.jacobi_flight(branch.seg_start.region, branch.jac, length)
    return model.jacobi_event(event, refracted, jac), n


# ---------------------------------------------------------------------------
# single-path utilities


@dataclass
class Segment:
    t0: float
    flight: object
    amp: complex


def follow_code(model: ModelDomain, start: PhasePoint, t: float, code: str):
    """Follow the branch with the given event code up to time ``t``.

    Returns the phase point at ``t`` or ``None`` if the events encountered
    do not match ``code``.
    """
    p, _ = model.normalize(start)
    t0 = 0.0
    k = 0
    while True:
        fl = model.flight(p)
        if t0 + fl.time >= t:
            return fl.at(t - t0) if k == len(code) else None
        if k >= len(code):
            return None
        hit = model.classify(fl)
        digit = code[k]
        if hit.kind is HitKind.TRANSMISSIBLE and digit in "02":
            p = model.reflect(hit) if digit == "0" else model.refract(hit)
        elif hit.kind in (HitKind.TOTAL_REFLECTION, HitKind.OUTER_BOUNDARY) and digit == "R":
            p = model.reflect(hit)
        else:
            return None
        t0 += fl.time
        k += 1


def sample_path(model: ModelDomain, start: PhasePoint, T: float, rng: np.random.Generator,
                max_events: int = 10 ** 6) -> list:
    """Random branch chosen with the classical weights ``|amp|^2`` at each split.

    The endpoint distribution of such a path at time ``t`` is exactly the
    classical transfer operator's weight distribution; grazing and singular
    hits end the path early.
    """
    p, _ = model.normalize(start)
    t0 = 0.0
    amp = 1.0 + 0j
    segs = []
    for _ in range(max_events):
        fl = model.flight(p)
        segs.append(Segment(t0, fl, amp))
        if t0 + fl.time >= T:
            break
        hit = model.classify(fl)
        if hit.kind in (HitKind.GRAZING, HitKind.SINGULAR):
            break
        if hit.kind is HitKind.TRANSMISSIBLE:
            r, tr = transmissible_coefficients(model.density_ratio(hit), hit.tau_plus, hit.tau_minus)
            if rng.random() < tr * tr:
                p, amp = model.refract(hit), amp * tr
            else:
                p, amp = model.reflect(hit), amp * r
        elif hit.kind is HitKind.TOTAL_REFLECTION:
            p = model.reflect(hit)
            amp *= total_reflection_coefficient(model.density_ratio(hit), hit.tau_plus, hit.tau_tilde)
        else:
            p, amp = model.reflect(hit), amp * model.outer_amplitude(hit)
        t0 += fl.time
    return segs


# ---------------------------------------------------------------------------
# finite-difference bundle oracle for Jacobi fields


def _rotate(model, p, angle):
    from .geometry import GluedDisks, Hemispheres

    if isinstance(model, GluedDisks):
        c, s = math.cos(angle), math.sin(angle)
        return PhasePoint(p.region, p.x, (c * p.xi[0] - s * p.xi[1], s * p.xi[0] + c * p.xi[1]))
    if isinstance(model, Hemispheres):
        P, V = model.to_cartesian(p)
        W = np.cross(P, V)
        V2 = np.cos(angle) * np.asarray(V) + np.sin(angle) * W
        return model.from_cartesian(p.region, P, tuple(V2))
    raise TypeError("no transverse directions for this model")


def _transverse(model, ref, other):
    from .geometry import GluedDisks, Hemispheres

    if isinstance(model, GluedDisks):
        dperp = (-ref.xi[1], ref.xi[0])
        return (other.x[0] - ref.x[0]) * dperp[0] + (other.x[1] - ref.x[1]) * dperp[1]
    P, V = model.to_cartesian(ref)
    P2, _ = model.to_cartesian(other)
    W = np.cross(P, V)
    return model.radius(ref.region) * float(np.dot(np.subtract(P2, P), W))


def fd_jacobi(model: ModelDomain, start: PhasePoint, code: str, t: float, h: float = 1e-6) -> float:
    """Transverse Jacobi field at time ``t`` by central differences over the
    initial direction, Richardson-extrapolated; the neighbours follow the
    same event code."""
    ref = follow_code(model, start, t, code)

    def central(step):
        a = follow_code(model, _rotate(model, start, step), t, code)
        b = follow_code(model, _rotate(model, start, -step), t, code)
        if a is None or b is None or a.region != ref.region:
            raise ValueError("neighbouring trajectory left the branch")
        return (_transverse(model, ref, a) - _transverse(model, ref, b)) / (2 * step)

    return (4 * central(h / 2) - central(h)) / 3


def jacobi_along(model: ModelDomain, start: PhasePoint, code: str, t: float):
    """Analytic ``(J, conjugate count)`` at time ``t`` along the coded branch."""
    p, _ = model.normalize(start)
    jac = (0.0, 1.0)
    t0 = 0.0
    k = 0
    conj = 0
    while True:
        fl = model.flight(p)
        include = not (k == 0)
        if t0 + fl.time >= t:
            n, _ = model.jacobi_zeros(p.region, jac, t - t0, include)
            return model.jacobi_flight(p.region, jac, t - t0)[0], conj + n
        hit = model.classify(fl)
        n, _ = model.jacobi_zeros(p.region, jac, fl.time, include)
        conj += n
        jac = model.jacobi_flight(p.region, jac, fl.time)
        refr = code[k] == "2"
        jac = model.jacobi_event(hit, refr, jac)
        p = model.refract(hit) if refr else model.reflect(hit)
        t0 += fl.time
        k += 1
