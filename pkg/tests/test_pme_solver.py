import numpy as np
import pytest

from _oracles import pme_reference
from pdrelax.errors import ConfigurationError, DomainError, NumericFailure
from pdrelax.littlewood_paley import SpectralField, TorusGrid, random_band_field
from pdrelax.pme_solver import (SERIES_SWITCH, PmeConfig, PmeKernel, PmeState, darcy_velocity,
                                h1, simulate_pme, step_pme)
from pdrelax.system_model import EulerParams

G = TorusGrid(1, 64, 1.0)


def datum(grid, params, amp=0.1, seed=0, band=(1, 4)):
    pert = random_band_field(grid, band[0], band[1], np.random.default_rng(seed), amp)
    return PmeState(SpectralField(grid, values=params.rho_bar + pert.values), 0.0, params)


def test_h1_quadratic_pressure():
    p = EulerParams(2.0, 1.0, 1.0)
    rho = np.array([0.5, 0.9, 1.0, 1.0 + 1e-8, 1.3, 2.0])
    np.testing.assert_allclose(h1(rho, p), rho - 1.0, atol=1e-14)
    assert h1(1.0, p) == 0.0


def binomial_h1(rho, p, terms=12):
    # A rb^(g-1) sum_{k>=2} C(g, k) x^(k-1), x = (rho - rb)/rb
    x = (rho - p.rho_bar) / p.rho_bar
    total, coef = 0.0, p.gamma
    for k in range(2, terms):
        coef *= (p.gamma - k + 1) / k
        total += coef * x ** (k - 1)
    return p.A * p.rho_bar ** (p.gamma - 1) * total


@pytest.mark.parametrize("gamma", [1.4, 2.0, 3.0])
def test_h1_branches_agree(gamma):
    p = EulerParams(gamma, 0.7, 1.2)
    rb = p.rho_bar
    for off in (0.5, 0.999, 1.001, 1.5, 3.0, 100.0):
        for sign in (1, -1):
            rho = rb + sign * off * SERIES_SWITCH * rb
            assert abs(h1(rho, p) - binomial_h1(rho, p)) <= 1e-10


def test_h1_domain():
    with pytest.raises(DomainError):
        h1(np.array([1.0, 0.0]), EulerParams(2.0, 1.0, 1.0))


def test_constant_is_fixed():
    p = EulerParams(2.0, 0.5, 1.0)
    st = PmeState(SpectralField(G, values=np.full(G.shape, p.rho_bar)), 0.0, p)
    out = step_pme(st, 1e-2)
    assert np.array_equal(out.N_field.values, st.N_field.values)
    assert out.t == 1e-2


def test_linear_only_decay():
    p = EulerParams(2.0, 0.5, 1.0)  # P'(rho_bar) = 1
    x = G.coords[0]
    st = PmeState(SpectralField(G, values=1.0 + 0.1 * np.cos(3 * x)), 0.0, p)
    out = step_pme(st, 0.05, linear_only=True)
    np.testing.assert_allclose(out.N_field.values, 1.0 + 0.1 * np.exp(-9 * 0.05) * np.cos(3 * x),
                               atol=1e-14)


def test_mass_conserved_each_step():
    p = EulerParams(2.0, 0.5, 1.0)
    st = datum(G, p, amp=0.2)
    k = PmeKernel(p, G)
    Nh = st.N_field.coefficients
    m0 = np.sum(st.N_field.values)
    for _ in range(50):
        Nh = k.step(Nh, 1e-3)
        m = np.sum(np.fft.irfft(Nh, n=G.N))
        assert abs(m - m0) <= 1e-14 * abs(m0)


def test_time_order_two():
    p = EulerParams(2.0, 0.5, 1.0)
    st = datum(G, p, amp=0.2, seed=3)
    k = PmeKernel(p, G)
    T = 0.2

    def run(dt):
        Nh = st.N_field.coefficients.copy()
        for _ in range(int(round(T / dt))):
            Nh = k.step(Nh, dt)
        return np.fft.irfft(Nh, n=G.N)

    dts = [0.02, 0.01, 0.005]
    ref = run(dts[-1] / 16)
    errs = [np.max(np.abs(run(dt) - ref)) for dt in dts]
    slope = np.polyfit(np.log(dts), np.log(errs), 1)[0]
    assert abs(slope - 2.0) <= 0.3


def test_l2_deviation_decays():
    p = EulerParams(2.0, 0.5, 1.0)
    traj = simulate_pme(datum(G, p, amp=0.2), PmeConfig(G, 1e-3, 0.5))
    dev = traj.column("deviation_l2")
    assert np.all(np.diff(dev) <= 1e-15)
    assert dev[-1] < 0.5 * dev[0]
    mass = traj.column("mass")
    assert np.max(np.abs(mass - mass[0])) <= 1e-13 * mass[0]


@pytest.mark.parametrize("gamma", [2.0, 3.0, 1.4])
def test_matches_reference_integrator(gamma):
    p = EulerParams(gamma, 0.5, 1.0)
    st = datum(G, p, amp=0.1, seed=7)
    traj = simulate_pme(st, PmeConfig(G, 1e-3, 0.5, diag_every=100))
    ref = pme_reference(st.N_field.values, p, G.L_len, 0.5)
    got = traj.final.N_field.values
    assert np.max(np.abs(got - ref)) <= 1e-6
    assert traj.times[-1] == 0.5


def test_positivity_failure_keeps_trajectory():
    p = EulerParams(2.0, 0.5, 1.0)
    bad = PmeState(SpectralField(G, values=1.0 - 1.2 * np.cos(G.coords[0])), 0.0, p)
    with pytest.raises(NumericFailure) as info:
        simulate_pme(bad, PmeConfig(G, 1e-3, 0.1))
    assert info.value.trajectory is not None


def test_config_validation():
    with pytest.raises(ConfigurationError):
        PmeConfig(G, -1.0, 1.0)
    with pytest.raises(ConfigurationError):
        PmeConfig(G, 1e-3, 1.0, diag_every=0)
    p = EulerParams(2.0, 0.5, 1.0)
    with pytest.raises(ConfigurationError):
        simulate_pme(datum(G, p), PmeConfig(TorusGrid(1, 32), 1e-3, 0.1))
    with pytest.raises(ConfigurationError):
        step_pme(datum(G, p), 0.0)


def test_darcy_quadratic_pressure():
    p = EulerParams(2.0, 1.0, 1.0)
    x = G.coords[0]
    st = PmeState(SpectralField(G, values=1.0 + 0.1 * np.cos(x)), 0.0, p)
    (u,) = darcy_velocity(st)
    np.testing.assert_allclose(u.values, 0.2 * np.sin(x), atol=1e-13)


def test_darcy_chain_rule():
    p = EulerParams(1.4, 0.8, 1.0)
    st = datum(G, p, amp=0.1, seed=2)
    (u,) = darcy_velocity(st)
    n = st.N_field.values
    (dn,) = st.N_field.gradient()
    expected = -p.pressure_derivative(n) * dn.values / n
    np.testing.assert_allclose(u.values, expected, atol=1e-10)


def test_darcy_domain():
    p = EulerParams(2.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        darcy_velocity(PmeState(SpectralField(G, values=np.cos(G.coords[0])), 0.0, p))


def test_two_dimensional_mass():
    g = TorusGrid(2, 32, 1.0)
    p = EulerParams(2.0, 0.5, 1.0)
    traj = simulate_pme(datum(g, p, amp=0.1, band=(1, 3)), PmeConfig(g, 1e-3, 0.05, diag_every=10))
    mass = traj.column("mass")
    assert np.max(np.abs(mass - mass[0])) <= 1e-13 * mass[0]
    assert traj.column("B_dp")[-1] < traj.column("B_dp")[0]
