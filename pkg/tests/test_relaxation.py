import dataclasses

import numpy as np
import pytest

from pdrelax.errors import ConfigurationError, NumericFailure
from pdrelax.euler_solver import (EulerKernel, EulerState, SolverConfig, damped_mode, simulate,
                                  with_diagnostics)
from pdrelax.littlewood_paley import BesovIndex, SpectralField, TorusGrid, besov_norm
from pdrelax.pme_solver import PmeKernel
from pdrelax.relaxation import (ERROR_COLUMNS, X_SUMMANDS, SweepConfig, _ErrorColumns,
                                fit_loglog, matched_initial_data, original_velocity,
                                relaxation_run, run_sweep, sweep_config_dict, threshold,
                                uniform_bound_check, uniform_run, x_functional, x_norm_specs)
from pdrelax.system_model import rho_from_c

QUICK = SweepConfig(epsilons=(0.2, 0.1, 0.05), grid=TorusGrid(1, 256, 1.0), T=0.25)


@pytest.fixture(scope="module")
def quick_report():
    return run_sweep(QUICK)


def test_threshold_examples():
    assert threshold(0.2, 2) == 4
    assert threshold(0.25, 2) == 4
    assert threshold(0.05, 2) == 6
    assert threshold(1.0, 0) == 0
    with pytest.raises(ConfigurationError):
        threshold(0.0, 2)


def test_sweep_config_validation():
    with pytest.raises(ConfigurationError):
        SweepConfig(epsilons=())
    with pytest.raises(ConfigurationError):
        SweepConfig(velocity="random")
    with pytest.raises(ConfigurationError):
        SweepConfig(p=0.5)
    with pytest.raises(ConfigurationError):
        SweepConfig(epsilons=(0.05,), grid=TorusGrid(1, 64, 1.0))
    with pytest.raises(ConfigurationError):
        SweepConfig(band=(1, 200))


def zero_trajectory(eps, p=2.0):
    g = TorusGrid(1, 64, 1.0)
    cfgp = QUICK.params(eps)
    st = EulerState(SpectralField.zeros(g), (SpectralField.zeros(g),), 0.0, cfgp)
    J = threshold(eps, 2)
    cfg = with_diagnostics(SolverConfig(g, 1e-3, 0.01, rescaled=True), x_norm_specs(1, p, J))
    return simulate(st, cfg, eps), J


def test_x_vanishes_at_equilibrium():
    traj, J = zero_trajectory(0.1)
    X = x_functional(traj, 0.1, 2.0, J)
    assert set(X.summands) == set(X_SUMMANDS)
    assert np.all(X.total == 0.0)


def test_x_nondecreasing():
    cfg = dataclasses.replace(QUICK, grid=TorusGrid(1, 128, 1.0), epsilons=(0.1,))
    eps = 0.1
    state, _ = matched_initial_data(cfg, eps)
    J = threshold(eps, cfg.k_p)
    scfg = with_diagnostics(SolverConfig(cfg.grid, 1e-3, 0.1, rescaled=True), x_norm_specs(1, 2.0, J))
    X = x_functional(simulate(state, scfg, eps), eps, 2.0, J)
    for v in X.summands.values():
        assert np.all(np.diff(v) >= 0)
    np.testing.assert_allclose(X.times, np.arange(101) * 1e-3 / eps, rtol=1e-12)


def test_x_single_mode_low_sup():
    # at t=0 the low-frequency sup summand is the B^{1/2}_{2,1} norm of (c, eps v_tilde)
    g = TorusGrid(1, 64, 1.0)
    eps = 0.1
    x = g.coords[0]
    p = QUICK.params(eps)
    c = SpectralField(g, values=1e-3 * np.cos(x))
    v = SpectralField(g, values=2e-3 * np.sin(x))
    J = threshold(eps, 2)
    cfg = with_diagnostics(SolverConfig(g, 1e-4, 1e-4, rescaled=True), x_norm_specs(1, 2.0, J))
    traj = simulate(EulerState(c, (v,), 0.0, p), cfg, eps)
    X = x_functional(traj, eps, 2.0, J)
    idx = BesovIndex(0.5)
    expected = besov_norm(c, idx) + eps * besov_norm(v, idx)
    assert X.summands["low_sup"][0] == pytest.approx(expected, rel=1e-12)
    assert X.summands["c_low_int"][0] == 0.0


def test_matched_data():
    eps = 0.1
    for velocity in ("unscaled", "well-prepared", "ill-prepared"):
        cfg = dataclasses.replace(QUICK, velocity=velocity)
        e, p = matched_initial_data(cfg, eps)
        rho = rho_from_c(e.c_tilde.values + e.params.c_bar, e.params)
        assert np.max(np.abs(rho - p.N_field.values)) <= 1e-14
    wp = dataclasses.replace(QUICK, velocity="well-prepared")
    e, _ = matched_initial_data(wp, eps)
    un, _ = matched_initial_data(QUICK, eps)
    np.testing.assert_allclose(un.v[0].values, e.v[0].values / eps, rtol=1e-15)
    np.testing.assert_allclose(original_velocity(QUICK, eps)[0].values, e.v[0].values, rtol=1e-15)


@pytest.mark.parametrize("amp", [1e-2, 1e-3])
def test_well_prepared_damped_mode_small(amp):
    cfg = dataclasses.replace(QUICK, velocity="well-prepared", amplitude=amp)
    e, _ = matched_initial_data(cfg, 0.1)
    (W,) = damped_mode(e, 0.1, rescaled=True)
    assert np.max(np.abs(W.values)) <= amp ** 2


def test_self_comparison_vanishes():
    cfg = dataclasses.replace(QUICK, grid=TorusGrid(1, 128, 1.0), T=0.05)
    r = relaxation_run(cfg, 0.1, pme_reference=False)
    for col in ERROR_COLUMNS:
        assert r[col] <= 1e-13


def test_translation_invariance():
    cfg = dataclasses.replace(QUICK, grid=TorusGrid(1, 128, 1.0))
    eps, shift, dt = 0.1, 17, 1e-3
    e, p = matched_initial_data(cfg, eps)
    g = cfg.grid
    ek = EulerKernel(e.params, eps, g, rescaled=True)
    pk = PmeKernel(e.params, g)
    errs = _ErrorColumns(e.params, g, 2.0)

    def roll_hat(U):
        return np.fft.rfft(np.roll(np.fft.irfft(U, n=g.N, axis=-1), shift, axis=-1), axis=-1)

    U, Nh = e.spectral(), p.N_field.coefficients
    Ur, Nr = roll_hat(U), roll_hat(Nh)
    for _ in range(20):
        U, Nh = ek.if_rk4_step(U, dt), pk.step(Nh, dt)
        Ur, Nr = ek.if_rk4_step(Ur, dt), pk.step(Nr, dt)
    assert np.max(np.abs(roll_hat(U) - Ur)) <= 1e-10 * np.max(np.abs(U))
    a, b = errs(U, Nh), errs(Ur, Nr)
    for col in ERROR_COLUMNS:
        assert b[col] == pytest.approx(a[col], rel=1e-10)


def test_quick_sweep_rates(quick_report):
    r = quick_report
    assert r.slopes["int_rho"] == pytest.approx(1.0, abs=0.15)
    assert r.slopes["int_darcy"] == pytest.approx(1.0, abs=0.15)
    assert r.slopes["sup_rho"] > 0.6
    assert r.uniform_ratio <= 10
    assert [row["eps"] for row in r.rows] == [0.2, 0.1, 0.05]
    assert all(row["J"] == threshold(row["eps"], 2) for row in r.rows)
    d = r.to_dict()
    assert set(d["fit"]) == set(ERROR_COLUMNS)


@pytest.mark.parametrize("change", [{"amplitude": 5e-3}, {"k_p": 1}, {"k_p": 3}])
def test_slopes_stable(quick_report, change):
    other = run_sweep(dataclasses.replace(QUICK, **change))
    for col in ERROR_COLUMNS:
        assert abs(other.slopes[col] - quick_report.slopes[col]) <= 0.1


def test_rescaled_and_unscaled_x_agree(quick_report):
    for row in quick_report.rows:
        u = uniform_run(QUICK, row["eps"])
        assert u["X"] == pytest.approx(row["X"], rel=1e-8)
        assert u["T"] == pytest.approx(QUICK.T / row["eps"])


def test_single_epsilon_uniform_ratio():
    cfg = dataclasses.replace(QUICK, epsilons=(0.1,), grid=TorusGrid(1, 128, 1.0))
    rep = uniform_bound_check(cfg)
    assert rep.ratio == 1.0 and rep.passed
    r = run_sweep(cfg, fit=False)
    assert r.uniform_ratio == 1.0 and r.slopes == {}
    with pytest.raises(ConfigurationError):
        run_sweep(cfg, fit=True)


def test_fit_loglog():
    x = [0.2, 0.1, 0.05, 0.025]
    slope, intercept, resid = fit_loglog(x, [3 * e ** 1.5 for e in x])
    assert slope == pytest.approx(1.5, abs=1e-12)
    assert intercept == pytest.approx(np.log(3), abs=1e-12)
    assert resid <= 1e-12
    with pytest.raises(ConfigurationError):
        fit_loglog([0.1, 0.05], [1.0, 2.0])
    with pytest.raises(NumericFailure):
        with np.errstate(divide="ignore"):
            fit_loglog(x, [1.0, 0.0, 1.0, 1.0])


def test_sweep_config_dict():
    d = sweep_config_dict(QUICK)
    assert d["grid"] == {"d": 1, "N": 256, "L_len": 1.0}
    assert d["epsilons"] == (0.2, 0.1, 0.05)
