"""Far-field flux integrands, power budget closure, and the late-time Hadamard form."""

import math

import numpy as np
import pytest

from atomflux.greens import AtomParams, BathSpec, FrequencyGrid
from atomflux.spectral import integrate_adaptive
from atomflux.flux import (
    LateTimeMarginError,
    ObservationFrame,
    PowerBudget,
    corrected_hadamard_spectrum,
    dissipated_power_density,
    far_field_flux_integrand,
    far_field_flux_terms,
    interacting_hadamard_late,
    near_field_flux_integrand,
    power_budget,
    radiated_power_density,
)

VACUUM = BathSpec.vacuum()
TWO_PI = 2.0 * math.pi
FOUR_PI = 4.0 * math.pi


def test_pointwise_cancellation_random_samples():
    rng = np.random.default_rng(42)
    for _ in range(5):
        p = AtomParams.from_damping(float(rng.uniform(0.01, 0.5)), 1.0, float(rng.uniform(0.5, 2.0)))
        bath = VACUUM if rng.random() < 0.5 else BathSpec(float(rng.uniform(0.2, 5.0)))
        r = float(rng.uniform(0.5, 100.0))
        kap = rng.uniform(0.01, 60.0, 400) * rng.choice([-1.0, 1.0], 400)
        a, b, c = far_field_flux_terms(r, kap, p, bath)
        net = far_field_flux_integrand(r, kap, p, bath)
        scale = np.max(np.abs(np.stack([a, b, c])), axis=0)
        assert np.all(np.abs(net) <= 1e-12 * scale)


def test_radiation_constituent_matches_purely_radiated_density():
    # the radiation term of the shell-integrated flux reduces to the P_r
    # density: |exp(i k r)/(4 pi r)|^2 against the 4 pi r^2 shell area
    p = AtomParams.from_damping(0.07, 1.0, 1.0)
    bath = BathSpec(1.5)
    r = 37.0
    for kappa in (p.omega, 0.3, -2.2):
        _, _, radiation = far_field_flux_terms(r, kappa, p, bath)
        shell_flow = -FOUR_PI * r**2 * radiation
        expected = radiated_power_density(kappa, p, bath) / TWO_PI
        assert shell_flow == pytest.approx(expected, rel=1e-12)


def test_flux_integrand_even_in_kappa():
    p = AtomParams.from_damping(0.1, 1.0, 1.0)
    kap = np.linspace(0.05, 30.0, 300)
    for bath in (VACUUM, BathSpec(0.8)):
        f_pos = far_field_flux_integrand(3.0, kap, p, bath)
        f_neg = far_field_flux_integrand(3.0, -kap, p, bath)
        assert f_pos == pytest.approx(f_neg, abs=1e-25)


def test_near_field_reduces_to_far_field():
    p = AtomParams.from_damping(0.1, 1.0, 1.0)
    bath = BathSpec(1.0)
    kappa = 2.0
    # near-field extra terms scale like 1/(kappa r) relative to constituents
    for r, bound in ((5.0, 0.2), (500.0, 2e-3)):
        near = near_field_flux_integrand(r, kappa, p, bath)
        scale = np.max(np.abs(far_field_flux_terms(r, kappa, p, bath)))
        assert abs(near) <= bound * scale


@pytest.mark.parametrize("bath", [VACUUM, BathSpec(1.0), BathSpec(0.1)])
def test_power_budget_closures(bath):
    p = AtomParams.from_damping(0.01, 1.0, 1.0)
    grid = FrequencyGrid(100.0, 2**16)
    b = power_budget(p, bath, grid)
    assert b.closure_violations(rtol=1e-10) == []
    assert abs(b.net_far_field) <= 1e-10 * abs(b.p_r)
    assert b.p_r + b.p_cross == 0.0
    assert b.p_gamma + b.p_xi == 0.0
    assert abs(abs(b.p_gamma) - abs(b.p_r)) <= b.est_error
    assert b.p_r > 0.0  # outward flow
    assert b.p_gamma < 0.0  # recorded dissipation flow points out of the oscillator


def test_power_budget_positivity_pointwise():
    p = AtomParams.from_damping(0.2, 1.0, 1.0)
    kap = np.linspace(-80, 80, 4001)
    kap = kap[kap != 0.0]
    for bath in (BathSpec(0.5), BathSpec(50.0), VACUUM):
        assert np.all(radiated_power_density(kap, p, bath) >= 0.0)
        assert np.all(dissipated_power_density(kap, p, bath) <= 0.0)


def test_power_budget_against_adaptive_oracle():
    p = AtomParams.from_damping(0.01, 1.0, 1.0)
    grid = FrequencyGrid(100.0, 2**18)
    b = power_budget(p, VACUUM, grid)
    adaptive = integrate_adaptive(
        lambda k: radiated_power_density(k, p, VACUUM), 100.0, points=[-1.0, 1.0], limit=800
    )
    assert b.p_r == pytest.approx(adaptive, rel=1e-3)
    assert b.p_r > 0.0


def test_power_budget_cutoff_independence_of_closure():
    p = AtomParams.from_damping(0.1, 1.0, 1.0)
    vals = []
    for lam, n in ((10.0, 2**13), (100.0, 2**15), (1000.0, 2**17)):
        b = power_budget(p, VACUUM, FrequencyGrid(lam, n))
        assert b.closure_violations(1e-10) == []
        vals.append(b.p_r)
    assert vals[0] < vals[1] < vals[2]  # individual flows grow with the cutoff


def test_power_budget_r_independence():
    p = AtomParams.from_damping(0.05, 1.0, 1.0)
    grid = FrequencyGrid(50.0, 2**14)
    b1 = power_budget(p, VACUUM, grid, r=10.0)
    b2 = power_budget(p, VACUUM, grid, r=300.0)
    assert b1.p_r == b2.p_r
    assert abs(b1.net_far_field) <= 1e-10 * b1.p_r
    assert abs(b2.net_far_field) <= 1e-10 * b2.p_r


def test_power_budget_serialization():
    p = AtomParams.from_damping(0.05, 1.0, 1.0)
    b = power_budget(p, BathSpec(2.0), FrequencyGrid(20.0, 1024))
    row = b.csv_row()
    assert len(row.split(",")) == len(PowerBudget.CSV_COLUMNS)
    d = b.to_dict()
    assert d["Lambda"] == 20.0 and d["beta"] == 2.0
    assert d["P_xi"] == -d["P_gamma"]


# ---------------------------------------------------------------------------
# late-time interacting Hadamard function
# ---------------------------------------------------------------------------


def test_late_hadamard_is_real_and_finite():
    p = AtomParams.from_damping(0.05, 1.0, 1.0)
    frame = ObservationFrame(r=10.0, t=900.0, t_prime=899.3)
    val = interacting_hadamard_late(frame, p, BathSpec(1.0), FrequencyGrid(20.0, 4096))
    assert isinstance(val, float)
    assert math.isfinite(val)


def test_late_hadamard_equal_time_symmetric():
    p = AtomParams.from_damping(0.05, 1.0, 1.0)
    g = FrequencyGrid(20.0, 4096)
    f = ObservationFrame(r=12.0, t=900.0, t_prime=900.0)
    v = interacting_hadamard_late(f, p, VACUUM, g)
    assert math.isfinite(v)


def test_late_hadamard_exchange_invariance():
    p = AtomParams.from_damping(0.05, 1.0, 1.0)
    g = FrequencyGrid(20.0, 4096)
    dt = 0.7 / p.omega
    f1 = ObservationFrame(r=15.0, t=900.0, t_prime=900.0 - dt)
    f2 = ObservationFrame(r=15.0, t=900.0 - dt, t_prime=900.0)
    v1 = interacting_hadamard_late(f1, p, VACUUM, g)
    v2 = interacting_hadamard_late(f2, p, VACUUM, g)
    assert abs(v1 - v2) <= 1e-10 * abs(v1)


def test_late_hadamard_margin_enforced():
    p = AtomParams.from_damping(0.05, 1.0, 1.0)
    g = FrequencyGrid(20.0, 1024)
    early = ObservationFrame(r=10.0, t=50.0, t_prime=50.0)  # t < 20/gamma
    with pytest.raises(LateTimeMarginError, match="interacting_hadamard_direct"):
        interacting_hadamard_late(early, p, VACUUM, g)
    # diagnostic escape hatch
    val = interacting_hadamard_late(early, p, VACUUM, g, enforce_margin=False)
    assert math.isfinite(val)


def test_corrected_spectrum_real_even():
    p = AtomParams.from_damping(0.1, 1.0, 1.0)
    kap = np.linspace(0.05, 15.0, 200)
    for bath in (VACUUM, BathSpec(2.0)):
        b_pos = corrected_hadamard_spectrum(8.0, kap, p, bath)
        b_neg = corrected_hadamard_spectrum(8.0, -kap, p, bath)
        assert np.array_equal(b_pos, b_neg)
        assert np.isrealobj(b_pos)


def test_observation_frame_validation():
    with pytest.raises(ValueError):
        ObservationFrame(r=0.0, t=10.0, t_prime=10.0)
    f = ObservationFrame(r=2.0, t=500.0, t_prime=499.0)
    assert f.dt_obs == 1.0
    assert f.late_time_ok(gamma=0.1)
    assert not f.late_time_ok(gamma=0.001)
