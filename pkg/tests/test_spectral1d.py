import math

import numpy as np
import pytest

from raysplit.geometry import Layered1D, PhasePoint
from raysplit.snell import split_amplitudes
from raysplit.spectral1d import (Multiplier, SecularProblem, TruncationTailTooLarge, averaging_check,
                                 calibrate_b, calibrated_model, diagonal_elements, identity_multiplier,
                                 local_weyl_average, matrix_element, matrix_table, phase_space_mean,
                                 plane_wave_coefficients, qe_variance, solve_spectrum,
                                 tapered_multiplier, weyl_count, weyl_slope)

from . import oracles


@pytest.fixture(scope="module")
def two_layer():
    model = calibrated_model()
    return model, solve_spectrum(SecularProblem.from_model(model), 4e5)


def test_calibration_value():
    assert calibrate_b(1.0, 4.0) == 0.5
    with pytest.raises(ValueError):
        calibrate_b(0.0, 1.0)


@pytest.mark.parametrize("lam", [1.0, 37.0, 1e4])
def test_plane_wave_matches_transfer_matrix(lam):
    R, T, flux = plane_wave_coefficients(1.0, 4.0, 0.5, lam)
    R_ref, T_ref = oracles.plane_wave_transfer_matrix(1.0, 4.0, lam)
    assert R == pytest.approx(R_ref, abs=1e-14) and T == pytest.approx(T_ref, abs=1e-14)
    assert R == pytest.approx(-1 / 3, abs=1e-14)
    assert abs(R) ** 2 + flux * abs(T) ** 2 == pytest.approx(1.0, abs=1e-14)
    assert flux * abs(T) ** 2 == pytest.approx(8 / 9, abs=1e-14)


def test_plane_wave_equals_ray_splitting():
    m = calibrated_model()
    hit = m.classify(m.flight(PhasePoint(0, (0.5,), (1.0,))))
    r = split_amplitudes(m, hit).reflected[1]
    for x0 in (0.0, 1.0, 2.7):
        R, _, _ = plane_wave_coefficients(1.0, 4.0, 0.5, 9.0, x0)
        assert R == pytest.approx(r, abs=1e-14)


@pytest.mark.parametrize("ends,first", [(("dirichlet", "dirichlet"), [1, 4, 9, 16]),
                                        (("neumann", "neumann"), [0, 1, 4, 9, 16]),
                                        (("dirichlet", "neumann"), [0.25, 2.25, 6.25, 12.25])])
def test_single_layer_spectrum(ends, first):
    prob = SecularProblem.from_model(Layered1D((math.pi,), (1.0,), (), ends))
    data = solve_spectrum(prob, 17.0)
    assert np.allclose(data.lambdas, first, atol=1e-12)


def test_stiff_layer_scales_spectrum():
    data = solve_spectrum(SecularProblem.from_model(Layered1D((math.pi,), (4.0,))), 100.5)
    assert np.allclose(data.lambdas, 4 * np.arange(1, 6) ** 2, atol=1e-10)


def test_two_layer_roots_against_closed_form(two_layer):
    _, data = two_layer
    ref = oracles.two_layer_roots(60.0)
    assert np.allclose(data.sigma[:len(ref)], ref, atol=1e-11)


def test_count_is_monotone(two_layer):
    _, data = two_layer
    prob = data.problem
    s = np.linspace(0, 200, 5001)
    n = prob.count(s)
    assert np.all(np.diff(n) >= 0)
    assert prob.count(np.array([data.sigma[99] + 1e-9]))[0] == 100


def test_eigenfunction_interface_conditions(two_layer):
    _, data = two_layer
    A, C, K = data.A, data.C, data.K
    for j in (0, 10, 100, 250):
        left = A[j, 0] * math.sin(K[j, 0] + C[j, 0])
        assert left == pytest.approx(A[j, 1] * math.sin(C[j, 1]), abs=1e-10)
        flux_l = 1.0 * A[j, 0] * K[j, 0] * math.cos(K[j, 0] + C[j, 0])
        flux_r = 4.0 * A[j, 1] * K[j, 1] * math.cos(C[j, 1])
        assert flux_l == pytest.approx(flux_r, rel=1e-10, abs=1e-10)
        assert data.evaluate([0.0, 2.0], j)[0] == pytest.approx([0, 0], abs=1e-9)


def test_orthonormality(two_layer):
    _, data = two_layer
    G = matrix_table(data, identity_multiplier(), 200)
    assert np.max(np.abs(G - np.eye(200))) < 1e-10


def test_matrix_element_agrees_with_table(two_layer):
    _, data = two_layer
    a = Multiplier(lambda x: np.cos(x), "cos")
    T = matrix_table(data, a, 30)
    for j, k in ((0, 0), (3, 7), (29, 12)):
        assert matrix_element(data, a, j, k) == pytest.approx(T[j, k], abs=1e-10)


def test_single_layer_diagonal_against_quad():
    prob = SecularProblem.from_model(Layered1D((math.pi,), (1.0,)))
    data = solve_spectrum(prob, 401.0)
    a = Multiplier(lambda x: x * x, "x2")
    d = diagonal_elements(data, a, 20)
    for j in (1, 5, 20):
        assert d[j - 1] == pytest.approx(oracles.sine_diag_element(lambda x: x * x, j), abs=1e-10)


def test_weyl_law(two_layer):
    _, data = two_layer
    assert weyl_slope(data) == pytest.approx(data.problem.optical_length / math.pi, rel=1e-3)
    n, pred = weyl_count(data, 3e5)
    assert abs(n - pred) < 2


def test_phase_space_mean():
    prob = SecularProblem.from_model(calibrated_model())
    assert phase_space_mean(prob, identity_multiplier()) == pytest.approx(1.0, abs=1e-13)
    ind1 = Multiplier(lambda x: (x < 1).astype(float), "1[x<1]", (1.0,))
    # layer one has optical length 1 of the total 3/2
    assert phase_space_mean(prob, ind1) == pytest.approx(2 / 3, abs=1e-13)


def test_local_weyl_and_variance_shrink(two_layer):
    _, data = two_layer
    a = tapered_multiplier(data.problem, lambda x: np.cos(3 * x), "cos3")
    devs = [abs(np.subtract(*local_weyl_average(data, a, N))) for N in (25, 100)]
    assert devs[1] < devs[0]
    V = qe_variance(data, a, 100)
    assert V[-1] < V[9]


def test_small_averaging_check():
    model = calibrated_model()
    data = solve_spectrum(SecularProblem.from_model(model), 1.6e5)
    a = tapered_multiplier(data.problem, lambda x: (x < 1).astype(float), "ind1", breaks=(1.0,))
    one = identity_multiplier()
    res = averaging_check(model, data, a, one, one, 0.7, window=(50, 150), band=50, panels=8)
    assert res.difference < 0.02 and res.tail_bound < 1e-2
    with pytest.raises(TruncationTailTooLarge):
        averaging_check(model, data, a, a, one, 0.7, window=(50, 150), band=1, tail_tol=1e-12, panels=2)


def test_local_weyl_deviation_sequence_decreases():
    data = solve_spectrum(SecularProblem.from_model(calibrated_model()), 2e7)
    a = tapered_multiplier(data.problem, lambda x: (x < 1).astype(float), "layer0", breaks=(1.0,))
    devs = [abs(np.subtract(*local_weyl_average(data, a, N))) for N in (250, 500, 1000, 2000)]
    # four values give three consecutive ratios; all of them must be below one
    assert sum(b < a for a, b in zip(devs, devs[1:])) == 3
