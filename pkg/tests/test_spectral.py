"""Quadrature engine tests: parity, order, error estimates, sweeps, oracles."""

import math

import numpy as np
import pytest

from atomflux.greens import AtomParams, BathSpec, FrequencyGrid, atom_retarded_ft
from atomflux.spectral import (
    IntegrandError,
    cutoff_sweep,
    fit_log_slope,
    integrate_adaptive,
    integrate_spectrum,
)
from atomflux.flux import far_field_flux_integrand, radiated_power_density

TWO_PI = 2.0 * math.pi


def test_odd_integrands_vanish_exactly():
    g = FrequencyGrid(7.0, 64)
    assert integrate_spectrum(lambda k: k, g).value == 0.0
    assert integrate_spectrum(lambda k: k**3, g).value == 0.0
    assert integrate_spectrum(lambda k: k * np.exp(-(k**2)), g).value == 0.0


def test_gaussian_reference():
    g = FrequencyGrid(10.0, 256)
    res = integrate_spectrum(lambda k: np.exp(-(k**2)), g)
    assert res.value == pytest.approx(math.sqrt(math.pi) / TWO_PI, abs=1e-10)
    assert res.n_evals == 256 + 128
    assert res.est_error >= 0.0


def test_exact_for_cubics():
    g = FrequencyGrid(3.0, 32)
    res = integrate_spectrum(lambda k: 1.0 + 2.0 * k + 3.0 * k**2 + k**3, g)
    exact = (2.0 * 3.0 + 3.0 * (2.0 * 27.0 / 3.0)) / TWO_PI
    assert res.value == pytest.approx(exact, rel=1e-14)


def test_fourth_order_convergence():
    # quartic integrand is not exact; halving the step shrinks the error ~16x
    # once the h^4 boundary term dominates the h^5 stencil remainder
    exact = (2.0 * 2.0**5 / 5.0) / TWO_PI
    err = []
    for n in (128, 256, 512):
        res = integrate_spectrum(lambda k: k**4, FrequencyGrid(2.0, n))
        err.append(abs(res.value - exact))
    assert 10.0 < err[0] / err[1] < 26.0
    assert 10.0 < err[1] / err[2] < 26.0


def test_error_estimate_bounds_true_error():
    # smooth family: Gaussian and Lorentzian at resolutions where the error is
    # far above rounding
    cases = [
        (lambda k: np.exp(-(k**2) / 4.0), 8.0, 2.0 * math.erf(4.0) * math.sqrt(math.pi)),
        (lambda k: 1.0 / (1.0 + k**2), 10.0, 2.0 * math.atan(10.0)),
    ]
    for f, lam, plain_integral in cases:
        for n in (32, 64, 128):
            res = integrate_spectrum(f, FrequencyGrid(lam, n))
            true_err = abs(res.value - plain_integral / TWO_PI)
            assert true_err <= 10.0 * res.est_error


def test_lorentzian_sum_rule():
    # residue calculus: (1/pi) * integral of kappa * Im GR over the real line is 1
    p = AtomParams.from_damping(0.1, 1.0, 1.0)
    g = FrequencyGrid(1000.0, 2**17)
    res = integrate_spectrum(lambda k: k * np.imag(atom_retarded_ft(k, p)), g)
    assert 2.0 * res.value == pytest.approx(1.0, rel=0.01)


def test_nonfinite_integrand_names_offender():
    import re

    g = FrequencyGrid(2.0, 16)
    bad_kappa = float(g.values[3])

    def f(k):
        out = np.asarray(k, dtype=float).copy()
        out[k == bad_kappa] = np.inf
        return out

    with pytest.raises(IntegrandError, match=re.escape(repr(bad_kappa))):
        integrate_spectrum(f, g)


def test_adaptive_oracle_agrees():
    res = integrate_spectrum(lambda k: 1.0 / (1.0 + k**2), FrequencyGrid(10.0, 512))
    adaptive = integrate_adaptive(lambda k: 1.0 / (1.0 + k**2), 10.0)
    assert res.value == pytest.approx(adaptive, rel=1e-10)


def test_scalar_integrand_fallback():
    res = integrate_spectrum(lambda k: float(np.exp(-k * k)), FrequencyGrid(10.0, 64))
    assert res.value == pytest.approx(math.sqrt(math.pi) / TWO_PI, rel=1e-8)


def test_complex_integrand():
    g = FrequencyGrid(10.0, 128)
    res = integrate_spectrum(lambda k: np.exp(-(k**2)) * np.exp(1j * k), g)
    # FT of the Gaussian: sqrt(pi) e^{-1/4}
    expected = math.sqrt(math.pi) * math.exp(-0.25) / TWO_PI
    assert res.value.real == pytest.approx(expected, rel=1e-10)
    assert res.value.imag == 0.0  # odd imaginary part cancels pairwise
    assert isinstance(res.est_error, float)


def test_determinism_bitwise():
    g = FrequencyGrid(25.0, 2048)
    p = AtomParams.from_damping(0.02, 1.0, 1.0)
    f = lambda k: k**2 * np.imag(atom_retarded_ft(k, p))
    a = integrate_spectrum(f, g)
    b = integrate_spectrum(f, g)
    assert a.value == b.value and a.est_error == b.est_error


# ---------------------------------------------------------------------------
# cutoff sweeps and the log-slope diagnostic
# ---------------------------------------------------------------------------


def test_cutoff_sweep_log_growth_of_radiated_power():
    p = AtomParams.from_damping(0.1, 1.0, 1.0)
    vac = BathSpec.vacuum()
    results = cutoff_sweep(
        lambda k: radiated_power_density(k, p, vac),
        [10.0, 100.0, 1000.0],
        [2**13, 2**15, 2**17],
    )
    vals = [r.value for r in results]
    assert vals[0] < vals[1] < vals[2]
    # successive differences over equal log-steps approach the same slope
    d1, d2 = vals[1] - vals[0], vals[2] - vals[1]
    assert d2 / d1 == pytest.approx(1.0, abs=0.10)


def test_cutoff_sweep_cancelled_integrand_stays_zero():
    p = AtomParams.from_damping(0.1, 1.0, 1.0)
    vac = BathSpec.vacuum()
    r_obs = 50.0
    net = cutoff_sweep(
        lambda k: far_field_flux_integrand(r_obs, k, p, vac),
        [10.0, 100.0, 1000.0],
        [2**13, 2**15, 2**17],
    )
    p_r = cutoff_sweep(
        lambda k: radiated_power_density(k, p, vac),
        [10.0, 100.0, 1000.0],
        [2**13, 2**15, 2**17],
    )
    for nres, pres in zip(net, p_r):
        shell = 4.0 * math.pi * r_obs**2 * TWO_PI
        assert abs(shell * nres.value) <= 1e-10 * abs(pres.value)


def test_cutoff_sweep_even_lorentzian_monotone():
    results = cutoff_sweep(lambda k: 1.0 / (1.0 + k**2), [5.0, 20.0, 80.0, 320.0], 4096)
    vals = [r.value for r in results]
    assert all(a < b for a, b in zip(vals, vals[1:]))
    assert vals[-1] == pytest.approx(math.pi / TWO_PI, rel=1e-2)


def test_cutoff_sweep_requires_ascending():
    with pytest.raises(ValueError):
        cutoff_sweep(lambda k: k, [10.0, 10.0], 64)
    with pytest.raises(ValueError):
        cutoff_sweep(lambda k: k, [10.0, 5.0], 64)
    with pytest.raises(ValueError):
        cutoff_sweep(lambda k: k, [1.0, 2.0], [64, 64, 64])


def test_fit_log_slope_recovers_synthetic():
    lams = np.array([10.0, 100.0, 1000.0, 10000.0])
    vals = 0.3 + 0.045 * np.log(lams)
    slope, intercept, r2 = fit_log_slope(lams, vals)
    assert slope == pytest.approx(0.045, rel=1e-12)
    assert intercept == pytest.approx(0.3, rel=1e-12)
    assert r2 == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        fit_log_slope([1.0, 2.0], [1.0, 2.0])
