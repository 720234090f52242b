"""Command-line orchestration: ``raysplit run <subcommand> [options]``.

Each subcommand reads a config, writes one or more CSV files plus a JSON
manifest into the output directory and exits with 0 (success), 2 (invalid
input) or 3 (budget or tolerance failure).
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import disks, spectral1d, transfer
from .config import ConfigError, ExperimentConfig, load_config
from .flow import BranchBudgetExceeded, BranchTree, PrunePolicy, evolve
from .geometry import GluedDisks, Hemispheres, Layered1D, PhasePoint, SineCircleMap
from .io import write_csv, write_manifest

SUBCOMMANDS = ("trace", "transfer", "ergodicity", "semigroup", "poincare", "spectrum", "weyl",
               "localweyl", "qe", "averaging", "recombine")

# flag name -> config key
OVERRIDE_FLAGS = {
    "lambda-max": "run.lambda_max", "n-samples": "run.n_samples", "t": "run.t", "s": "run.s",
    "t-list": "run.t_list", "n-eig": "run.n_eig", "steps": "run.steps", "resolution": "run.resolution",
    "word": "run.word", "variant": "model.variant", "eps": "model.eps", "c-plus": "model.c_plus",
    "c-minus": "model.c_minus", "method": "run.method",
}


class ToleranceFailure(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# builders


def build_model(cfg: ExperimentConfig):
    v = cfg["model.variant"]
    if v == "layered1d":
        p = cfg["model.stiffness"]
        L = cfg["model.lengths"]
        if len(p) != len(L):
            raise ConfigError("model.lengths and model.stiffness differ in length")
        b = cfg["model.b"]
        if b == "calibrated":
            b = tuple(spectral1d.calibrate_b(p[i], p[i + 1]) for i in range(len(p) - 1))
        return Layered1D(L, p, b, cfg["model.ends"])
    if v == "disks":
        eps = 0.0 if cfg["model.chi"] == "identity" else cfg["model.eps"]
        return GluedDisks(SineCircleMap(eps, cfg["model.phi0"]), cfg["dynamics.grazing_tol"])
    return Hemispheres(cfg["model.c_plus"], cfg["model.c_minus"])


def build_policy(cfg: ExperimentConfig) -> PrunePolicy:
    return PrunePolicy(cfg["dynamics.eps_amp"], cfg["dynamics.max_branches"],
                       cfg["dynamics.max_events"], cfg["dynamics.strict"])


def _split(spec: str):
    name, _, arg = spec.partition(":")
    return name.strip().lower(), arg.strip()


def build_multiplier(prob: spectral1d.SecularProblem, spec: str, delta: float) -> spectral1d.Multiplier:
    name, arg = _split(spec)
    X = prob.nodes
    if name == "one":
        return spectral1d.identity_multiplier()
    if name == "taper":
        return spectral1d.taper(X, delta)
    if name == "indicator":
        i = int(arg or 0)
        if not 0 <= i < len(prob.lengths):
            raise ConfigError(f"no layer {i}")
        lo, hi = X[i], X[i + 1]
        return spectral1d.tapered_multiplier(prob, lambda x: ((x >= lo) & (x < hi)).astype(float),
                                             f"indicator:{i}", delta, (lo, hi))
    if name == "cos":
        k = float(arg or 1.0)
        return spectral1d.tapered_multiplier(prob, lambda x: np.cos(k * x), f"cos:{k}", delta)
    if name == "x2":
        return spectral1d.tapered_multiplier(prob, lambda x: x * x, "x2", delta)
    raise ConfigError(f"unknown 1D observable {spec!r}")


def build_observable(model, spec: str, delta: float = 0.05) -> transfer.Observable:
    name, arg = _split(spec)
    if name == "tapered":
        return transfer.tapered(model, build_observable(model, arg, delta), delta)
    if name == "constant":
        return transfer.constant(float(arg or 1.0))
    if name == "region":
        return transfer.region_indicator(int(arg or 1))
    if isinstance(model, Layered1D):
        return build_multiplier(spectral1d.SecularProblem.from_model(model), spec, delta).symbol()
    if name == "angular_momentum_sq":
        return transfer.angular_momentum_sq(model)
    if name == "abs_angular_momentum":
        L = transfer.angular_momentum_sq(model)
        return transfer.Observable(lambda p: math.sqrt(L(p)), None, "|L|")
    raise ConfigError(f"unknown observable {spec!r} for {type(model).__name__}")


_VARIANT = {Layered1D: "layered1d", GluedDisks: "disks", Hemispheres: "hemispheres"}


def _require(model, cls, sub):
    if not isinstance(model, cls):
        raise ConfigError(f"`{sub}` needs model.variant = {_VARIANT[cls]}")


# ---------------------------------------------------------------------------
# subcommands; each returns (outputs, lost_mass, results)


def cmd_trace(cfg, model, out, rng, pool):
    start = model.sample(rng)
    tree = BranchTree.start(model, start, record_events=True)
    evolve(model, tree, cfg["run.t"], build_policy(cfg))
    dim = len(start.x)
    header = (["branch_id", "parent_id", "t", "region"] + [f"x{i}" for i in range(dim)]
              + [f"xi{i}" for i in range(dim)] + ["amp_re", "amp_im", "theta", "kappa_digit", "event_kind"])
    rows = []
    for bid, parent, t, p, amp, theta, digit, kind in tree.events:
        rows.append([bid, parent, t, p.region, *p.x, *p.xi, complex(amp).real, complex(amp).imag,
                     theta, digit or "-", kind])
    for b in tree.branches:
        if b.alive:
            p = b.point
            rows.append([b.id, b.parent, tree.horizon, p.region, *p.x, *p.xi, b.amp.real, b.amp.imag,
                         b.theta, "-", "end"])
    path = os.path.join(out, "trace.csv")
    write_csv(path, header, rows)
    return {"trace": path}, tree.lost_mass, {"n_branches": len(tree.branches),
                                             "n_alive": len(tree.alive),
                                             "total_weight": tree.total_weight()}


def cmd_transfer(cfg, model, out, rng, pool):
    f = build_observable(model, cfg["observables.f"], cfg["observables.taper"])
    starts = transfer.LiouvilleSampler(model, cfg["run.seed"]).draw(cfg["run.n_samples"])
    policy = build_policy(cfg)
    tol = cfg["dynamics.merge_tol"]
    t = cfg["run.t"]

    def one(i):
        c, lc = transfer.xi_classical(model, f, t, starts[i], policy)
        d, _ = transfer.xi_diagonal(model, f, t, starts[i], policy, tol)
        return [i, t, c, d, lc]

    rows = list(pool.map(one, range(len(starts))))
    path = os.path.join(out, "transfer.csv")
    write_csv(path, ["sample", "t", "xi_classical", "xi_diagonal", "lost_mass"], rows)
    return {"transfer": path}, float(sum(r[4] for r in rows)), {}


def cmd_ergodicity(cfg, model, out, rng, pool):
    f = build_observable(model, cfg["observables.f"], cfg["observables.taper"])
    rows = transfer.ergodicity_scan(model, f, cfg["run.t_list"], cfg["run.n_samples"],
                                    transfer.LiouvilleSampler(model, cfg["run.seed"]),
                                    cfg["run.method"], build_policy(cfg), cfg["run.n_t"])
    path = os.path.join(out, "ergodicity.csv")
    write_csv(path, transfer.SCAN_COLUMNS + ("median_stderr",),
              [r.csv_row() + (transfer.median_stderr(r.deviations),) for r in rows])
    dpath = os.path.join(out, "ergodicity_samples.csv")
    drows = [[r.T, i, r.deviations[i], r.plain_deviations[i]] for r in rows for i in range(r.n_samples)]
    write_csv(dpath, ["T", "sample", "cesaro_deviation", "plain_deviation"], drows)
    lost = float(sum(r.lost_mass_mean * r.n_samples for r in rows))
    return {"scan": path, "samples": dpath}, lost, {"observable": f.name}


def cmd_semigroup(cfg, model, out, rng, pool):
    f = build_observable(model, cfg["observables.f"], cfg["observables.taper"])
    res = transfer.semigroup_check(model, f, cfg["run.s"], cfg["run.t"], cfg["run.n_samples"],
                                   cfg["run.seed"], build_policy(cfg), cfg["dynamics.merge_tol"])
    cols = transfer.SEMIGROUP_COLUMNS + ("abs_residual", "lost_bound")
    path = os.path.join(out, "semigroup.csv")
    write_csv(path, cols, [[r[c] for c in cols] for r in res])
    return {"semigroup": path}, float(sum(r["lost_bound"] for r in res)), {}


def cmd_poincare(cfg, model, out, rng, pool):
    _require(model, GluedDisks, "poincare")
    side = disks.Side.PLUS if cfg["run.start_side"] == "plus" else disks.Side.MINUS
    pt = disks.SectionPoint(cfg["run.start_s"] % (2 * math.pi), cfg["run.start_u"], side)
    if side is disks.Side.MINUS and abs(pt.u) >= float(disks.psi(model, pt.s)):
        raise ConfigError("start point is not in the minus section")
    rows = disks.section_orbit(model, pt, cfg["run.steps"], rng)
    opath = os.path.join(out, "orbit.csv")
    write_csv(opath, ["step", "side", "s", "u", "amp_re", "amp_im"], rows)
    fps = disks.periodic_point_scan(model, cfg["run.word"], cfg["run.resolution"])
    ppath = os.path.join(out, "periodic.csv")
    write_csv(ppath, ["s", "u", "residual", "min_singular", "degenerate"],
              [[q.s, q.u, q.residual, q.min_singular, q.degenerate] for q in fps])
    gen = disks.genericity_check(model)
    return {"orbit": opath, "periodic": ppath}, 0.0, {
        "n_fixed_points": len(fps), "n_degenerate": sum(q.degenerate for q in fps),
        "genericity": {"first_derivative_loci": gen.first_derivative_loci,
                       "second_derivative_loci": gen.second_derivative_loci,
                       "violations": gen.violations}}


def _spectrum(cfg, model):
    _require(model, Layered1D, "spectral subcommands")
    prob = spectral1d.SecularProblem.from_model(model)
    return prob, spectral1d.solve_spectrum(prob, cfg["run.lambda_max"])


def _need(data, n):
    if len(data) < n:
        raise ConfigError(f"only {len(data)} eigenvalues below lambda_max, need {n}; raise run.lambda_max")


def cmd_spectrum(cfg, model, out, rng, pool):
    prob, data = _spectrum(cfg, model)
    path = os.path.join(out, "spectrum.csv")
    write_csv(path, ["j", "lambda", "sqrt_lambda"],
              [[j + 1, lam, s] for j, (lam, s) in enumerate(zip(data.lambdas, data.sigma))])
    return {"spectrum": path}, 0.0, {"n_eigenvalues": len(data), "optical_length": prob.optical_length}


def cmd_weyl(cfg, model, out, rng, pool):
    prob, data = _spectrum(cfg, model)
    lam_max = cfg["run.lambda_max"]
    rows = []
    for lam in np.linspace(lam_max / 64, lam_max, 64):
        n, pred = spectral1d.weyl_count(data, lam)
        rows.append([lam, n, pred, (n - pred) / pred])
    path = os.path.join(out, "weyl.csv")
    write_csv(path, ["lambda", "count", "weyl_prediction", "rel_error"], rows)
    slope = spectral1d.weyl_slope(data)
    return {"weyl": path}, 0.0, {"slope": slope, "predicted_slope": prob.optical_length / math.pi}


def cmd_localweyl(cfg, model, out, rng, pool):
    prob, data = _spectrum(cfg, model)
    a = build_multiplier(prob, cfg["observables.a"], cfg["observables.taper"])
    rows = []
    for N in (int(n) for n in cfg["run.n_list"]):
        _need(data, N)
        avg, target = spectral1d.local_weyl_average(data, a, N)
        rows.append([N, avg, target, abs(avg - target)])
    path = os.path.join(out, "localweyl.csv")
    write_csv(path, ["N", "average", "target", "abs_deviation"], rows)
    return {"localweyl": path}, 0.0, {"observable": a.name}


def cmd_qe(cfg, model, out, rng, pool):
    prob, data = _spectrum(cfg, model)
    a = build_multiplier(prob, cfg["observables.a"], cfg["observables.taper"])
    N = cfg["run.n_eig"]
    _need(data, N)
    V = spectral1d.qe_variance(data, a, N)
    path = os.path.join(out, "qe.csv")
    write_csv(path, ["N", "variance"], [[n + 1, v] for n, v in enumerate(V)])
    return {"qe": path}, 0.0, {"observable": a.name}


def cmd_averaging(cfg, model, out, rng, pool):
    prob, data = _spectrum(cfg, model)
    d = cfg["observables.taper"]
    a, b, c = (build_multiplier(prob, cfg[f"observables.{k}"], d) for k in "abc")
    w = tuple(int(v) for v in cfg["run.window"])
    _need(data, w[1] + cfg["run.band"])
    try:
        res = spectral1d.averaging_check(model, data, a, b, c, cfg["run.t"], w, cfg["run.band"],
                                         cfg["dynamics.tail_tol"], cfg["run.panels"])
    except spectral1d.TruncationTailTooLarge as exc:
        raise ToleranceFailure(str(exc)) from None
    path = os.path.join(out, "averaging.csv")
    write_csv(path, ["t", "quantum", "classical", "tail_bound", "classical_error"],
              [[cfg["run.t"], res.quantum, res.classical, res.tail_bound, res.classical_error]])
    return {"averaging": path}, 0.0, {"difference": res.difference, "truncation": res.truncation}


def cmd_recombine(cfg, model, out, rng, pool):
    _require(model, Hemispheres, "recombine")
    res = transfer.recombination_census(model, cfg["run.t"], cfg["run.n_samples"], cfg["run.seed"],
                                        build_policy(cfg), cfg["dynamics.merge_tol"])
    cols = list(res)
    path = os.path.join(out, "recombine.csv")
    write_csv(path, ["t"] + cols, [[cfg["run.t"]] + [res[c] for c in cols]])
    return {"recombine": path}, 0.0, res


COMMANDS = {name: globals()[f"cmd_{name}"] for name in SUBCOMMANDS}


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="raysplit", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one experiment")
    run.add_argument("subcommand", choices=SUBCOMMANDS)
    run.add_argument("--config", help="INI-style experiment config")
    run.add_argument("--seed", type=int, help="overrides run.seed")
    run.add_argument("--out", help="output directory (default: run.out or $RAYSPLIT_OUT)")
    run.add_argument("--threads", type=int, default=1, help="worker threads for per-sample loops")
    run.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                     help="override any config key")
    for flag in OVERRIDE_FLAGS:
        run.add_argument(f"--{flag}", dest=f"ov_{flag.replace('-', '_')}", metavar="VALUE")
    return ap


def run(subcommand: str, config_path: str | None, overrides: dict | None = None,
        out: str | None = None, threads: int = 1) -> int:
    try:
        cfg = load_config(config_path, overrides)
        model = build_model(cfg)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"raysplit: invalid input: {exc}", file=sys.stderr)
        return 2
    out = out or os.environ.get("RAYSPLIT_OUT") or cfg["run.out"]
    os.makedirs(out, exist_ok=True)
    seed = cfg["run.seed"]
    rng = np.random.default_rng(seed)
    try:
        with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
            outputs, lost, results = COMMANDS[subcommand](cfg, model, out, rng, pool)
    except ConfigError as exc:
        print(f"raysplit: invalid input: {exc}", file=sys.stderr)
        return 2
    except (BranchBudgetExceeded, ToleranceFailure, spectral1d.QuadratureNotConverged,
            spectral1d.RootBracketFailure) as exc:
        print(f"raysplit: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    write_manifest(os.path.join(out, f"{subcommand}.manifest.json"), cfg, subcommand, seed,
                   outputs, lost, results)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {}
    for item in args.set:
        key, sep, val = item.partition("=")
        if not sep:
            print(f"raysplit: invalid input: --set {item!r} needs KEY=VALUE", file=sys.stderr)
            return 2
        overrides[key.strip()] = val.strip()
    for flag, key in OVERRIDE_FLAGS.items():
        v = getattr(args, f"ov_{flag.replace('-', '_')}")
        if v is not None:
            overrides[key] = v
    if args.seed is not None:
        overrides["run.seed"] = str(args.seed)
    return run(args.subcommand, args.config, overrides, args.out, args.threads)


if __name__ == "__main__":
    sys.exit(main())
