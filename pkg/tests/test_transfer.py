import math

import numpy as np
import pytest

from raysplit.flow import PrunePolicy
from raysplit.geometry import GluedDisks, Hemispheres, Layered1D, PhasePoint, SineCircleMap
from raysplit.transfer import (LiouvilleSampler, angular_momentum_sq, cesaro_average, constant,
                               ergodicity_scan, median_stderr, path_averages, recombination_census,
                               region_indicator, semigroup_check, side_counts, tapered, xi_classical,
                               xi_diagonal)

EXACT = PrunePolicy(eps_amp=0.0, max_branches=2 ** 16, max_events=64)
LAYER = Layered1D((1.0, 1.0), (1.0, 4.0), (0.5,))
DISKS = GluedDisks(SineCircleMap(0.3))
HEMI = Hemispheres(1.0, 0.5)
MODELS = pytest.mark.parametrize("model", [LAYER, DISKS, HEMI], ids=["layers", "disks", "hemispheres"])


@MODELS
def test_constant_is_preserved(model):
    for p in LiouvilleSampler(model, 3).draw(10):
        val, lost = xi_classical(model, constant(), 2.0, p, EXACT)
        assert lost == 0.0 and val == pytest.approx(1.0, abs=1e-12)


@MODELS
def test_zero_time_is_evaluation(model):
    f = tapered(model, constant())
    for p in LiouvilleSampler(model, 4).draw(10):
        assert xi_classical(model, f, 0.0, p)[0] == pytest.approx(f(p))
        assert xi_diagonal(model, f, 0.0, p)[0] == pytest.approx(f(p))


def test_layer_transmitted_fraction():
    p = PhasePoint(0, (0.5,), (1.0,))
    val, _ = xi_classical(LAYER, region_indicator(1), 0.6, p, EXACT)
    assert val == pytest.approx(8 / 9, abs=1e-15)


@MODELS
def test_positivity_and_linearity(model):
    f = tapered(model, region_indicator(1))
    g = constant(0.5)
    for p in LiouvilleSampler(model, 5).draw(5):
        a = xi_classical(model, f, 1.5, p, EXACT)[0]
        b = xi_classical(model, g, 1.5, p, EXACT)[0]
        ab = xi_classical(model, f.scaled(2.0) + g, 1.5, p, EXACT)[0]
        assert a >= 0.0
        assert ab == pytest.approx(2 * a + b, abs=1e-12)


def test_diagonal_equals_classical_without_recombination():
    f = tapered(DISKS, angular_momentum_sq(DISKS))
    for p in LiouvilleSampler(DISKS, 6).draw(8):
        c = xi_classical(DISKS, f, 1.5, p, EXACT)[0]
        d = xi_diagonal(DISKS, f, 1.5, p, EXACT)[0]
        assert d == pytest.approx(c, abs=1e-9)


def test_cesaro_of_constant():
    p = LiouvilleSampler(HEMI, 1).draw(1)[0]
    res = cesaro_average(HEMI, constant(2.0), 3.0, p, n_t=8, policy=EXACT)
    assert res["value"] == pytest.approx(2.0, abs=1e-12) and res["quadrature_ok"]
    c, a = path_averages(HEMI, constant(2.0), 30.0, p, np.random.default_rng(0))
    assert c == pytest.approx(2.0, abs=1e-12) and a == pytest.approx(2.0, abs=1e-12)


def test_sampler_reproducible_by_index():
    a = LiouvilleSampler(DISKS, 42).draw(5)
    b = LiouvilleSampler(DISKS, 42).draw(3)
    assert a[:3] == b
    assert LiouvilleSampler(DISKS, 43).draw(1) != a[:1]


def test_sampler_region_balance():
    pts = LiouvilleSampler(HEMI, 0).draw(4000)
    frac = np.mean([p.region == 1 for p in pts])
    # Liouville measure is proportional to area: 1 against 1/4
    assert frac == pytest.approx(0.8, abs=0.03)


@pytest.mark.parametrize("model", [Hemispheres(1.0, 1.0), GluedDisks(SineCircleMap(0.0))],
                         ids=["round-sphere", "identity-gluing"])
def test_integrable_controls_do_not_mix(model):
    f = angular_momentum_sq(model)
    for p in LiouvilleSampler(model, 2).draw(6):
        c, _ = path_averages(model, f, 40.0, p, np.random.default_rng(1))
        assert c == pytest.approx(f(p), abs=1e-9)


def test_scan_rows_shape():
    rows = ergodicity_scan(DISKS, angular_momentum_sq(DISKS), (5.0, 10.0), 8, LiouvilleSampler(DISKS, 0))
    assert [r.T for r in rows] == [5.0, 10.0]
    for r in rows:
        assert r.q25 <= r.q50 <= r.q75 and r.deviations.shape == (8,)
        assert np.all(np.isfinite(r.plain_deviations))
    assert median_stderr(rows[0].deviations) >= 0


def test_scan_tree_method_on_constant():
    rows = ergodicity_scan(LAYER, constant(1.0), (1.0,), 4, LiouvilleSampler(LAYER, 0), method="tree",
                           policy=EXACT, n_t=4)
    assert rows[0].l1_dev == pytest.approx(0.0, abs=1e-12)


def test_semigroup_on_layers():
    f = tapered(LAYER, region_indicator(1))
    for row in semigroup_check(LAYER, f, 0.7, 1.1, 10, policy=EXACT):
        assert abs(row["residual"]) < 1e-12


def test_side_counts():
    assert side_counts(1, "", HEMI) == (0, 0)
    assert side_counts(1, "02R", HEMI) == (2, 1)
    assert side_counts(-1, "22", HEMI) == (1, 1)


def test_census_finds_recombination_for_rational_ratio():
    out = recombination_census(HEMI, 4 * math.pi + 0.1, 10, seed=0)
    assert out["recombining_groups"] > 0
    assert out["exchange_groups"] + out["reordering_groups"] == out["recombining_groups"]


def test_irrational_ratio_has_no_exchange_recombination():
    # every recombining group for c-/c+ = sqrt(2) only reorders the same flights
    out = recombination_census(Hemispheres(1.0, math.sqrt(2)), 4 * math.pi + 0.1, 200, seed=1)
    assert out["exchange_groups"] == 0
    assert out["max_abs_wd_deviation"] < 1e-9
