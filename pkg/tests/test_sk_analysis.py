import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import ortho_group

from _oracles import lyapunov_along_flow
from pdrelax.errors import ConfigurationError, PreconditionError
from pdrelax.randsys import random_system, sk_oracle, system_stream
from pdrelax.sk_analysis import (HypocoercivityParams, NoCertificateFound, dissipation_matrix,
                                 ellipticity_check, kalman_rank, lyapunov_matrix, lyapunov_search,
                                 lyapunov_value, m_omega, n_vbar, omega_samples, sk_condition)
from pdrelax.system_model import EulerParams, PartiallyDissipativeSystem, euler_system

EULER = euler_system(EulerParams(2.0, 0.5, 1.0))           # a = 1
EULER_HALF = euler_system(EulerParams(3.0, 1.0 / 12.0, 1.0))  # a = 1/2
EULER_2D = euler_system(EulerParams(2.0, 0.5, 1.0), d=2)


def _system(A, L, n1):
    return PartiallyDissipativeSystem(A_bar=np.asarray(A, float), T=None, L=np.asarray(L, float),
                                      n1=n1)


def test_m_omega_examples():
    a = EULER.A_bar[0][0, 1]
    np.testing.assert_array_equal(m_omega(EULER, [1.0]), [[0, a], [a, 0]])
    np.testing.assert_array_equal(m_omega(EULER, [-1.0]), -m_omega(EULER, [1.0]))
    np.testing.assert_array_equal(m_omega(EULER_2D, [1.0, 0.0]), EULER_2D.A_bar[0])


def test_m_omega_rejects_non_unit():
    with pytest.raises(ConfigurationError):
        m_omega(EULER_2D, [1.0, 1e-5])
    with pytest.raises(ConfigurationError):
        m_omega(EULER_2D, [1.0])


def test_kalman_rank_examples():
    L = np.diag([0.0, 1.0])
    assert kalman_rank(np.array([[0.0, 1.0], [1.0, 0.0]]), L) == 2
    assert kalman_rank(np.zeros((2, 2)), L) == 1
    rng = np.random.default_rng(0)
    assert kalman_rank(rng.standard_normal((3, 3)), np.eye(3)) == 3


def test_kalman_rank_shape_error():
    with pytest.raises(ConfigurationError):
        kalman_rank(np.zeros((2, 2)), np.zeros((3, 3)))


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_kalman_rank_rotation_invariant(seed):
    rng = np.random.default_rng(seed)
    s = random_system(rng, ["generic", "a21-kernel", "narrow-a21"][seed % 3])
    M = s.A_bar[0]
    Q = ortho_group.rvs(s.n, random_state=seed % (2 ** 31)) if s.n > 1 else np.eye(1)
    assert kalman_rank(Q @ M @ Q.T, Q @ s.L @ Q.T) == kalman_rank(M, s.L)


def test_sk_examples():
    rep = sk_condition(EULER)
    assert rep.sk_holds
    assert rep.kalman_ranks == (2, 2)
    assert rep.ellipticity_constant == pytest.approx(1.0)
    bad = _system(np.zeros((1, 2, 2)), np.diag([0.0, 1.0]), 1)
    assert not sk_condition(bad).sk_holds


def test_sk_empty_samples():
    with pytest.raises(ConfigurationError):
        sk_condition(EULER_2D, np.zeros((0, 2)))


def test_sk_2d_default_samples():
    rep = sk_condition(EULER_2D)
    assert rep.sk_holds and len(rep.kalman_ranks) == 64


def test_n_vbar_examples():
    assert n_vbar(EULER) == pytest.approx(1.0, abs=1e-14)
    assert n_vbar(EULER_HALF) == pytest.approx(0.25, abs=1e-14)
    zeroL = _system(EULER.A_bar, np.zeros((2, 2)), 1)
    assert n_vbar(zeroL) == 0.0


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), alpha=st.floats(0.01, 100.0))
def test_n_vbar_scaling(seed, alpha):
    s = random_system(np.random.default_rng(seed))
    p = HypocoercivityParams(tuple(np.random.default_rng(seed + 1).uniform(0.1, 2.0, s.n)))
    assert n_vbar(s, p.scaled(alpha)) == pytest.approx(alpha * n_vbar(s, p), rel=1e-9, abs=1e-10 * alpha)


def test_sk_iff_n_vbar_positive():
    systems, _, _ = system_stream(11, 200)
    for s in systems:
        rep = sk_condition(s)
        assert rep.sk_holds == (rep.n_vbar > 1e-10)


def test_sk_matches_oracle_small_batch():
    systems, results, _ = system_stream(5, 200)
    assert {r.sk_holds for r in results} == {True, False}
    for s, r in zip(systems, results):
        assert sk_condition(s).sk_holds == r.sk_holds


def test_oracle_sees_kernel_constructions():
    rng = np.random.default_rng(3)
    for kind in ("a21-kernel", "narrow-a21", "angle-kernel"):
        s = random_system(rng, kind, a11_zero=True)
        assert not sk_oracle(s).sk_holds
    s = random_system(rng, "common-eigvec")
    assert not sk_oracle(s).sk_holds


def test_angle_kernel_fails_at_one_antipodal_pair():
    s = random_system(np.random.default_rng(8), "angle-kernel", a11_zero=True)
    ranks = np.array(sk_condition(s).kalman_ranks)
    bad = np.flatnonzero(ranks < s.n)
    assert len(bad) == 2
    om = omega_samples(2)
    np.testing.assert_allclose(om[bad[0]], -om[bad[1]], atol=1e-15)


def test_ellipticity_examples():
    ok, c = ellipticity_check(EULER)
    assert ok and c == pytest.approx(1.0, rel=1e-14)
    ok, c = ellipticity_check(EULER_HALF)
    assert c == pytest.approx(0.25, rel=1e-14)
    A = np.zeros((1, 2, 2))
    A[0, 1, 1] = 1.0
    ok, c = ellipticity_check(_system(A, np.diag([0.0, 1.0]), 1))
    assert not ok and c == 0.0


def test_ellipticity_precondition():
    A = np.array([[[1.0, 1.0], [1.0, 0.0]]])
    with pytest.raises(PreconditionError):
        ellipticity_check(_system(A, np.diag([0.0, 1.0]), 1))


def test_ellipticity_equals_sk_small_batch():
    systems, _, _ = system_stream(21, 200, a11_zero=True)
    for s in systems:
        assert ellipticity_check(s)[0] == sk_condition(s).sk_holds


def test_lyapunov_value_example():
    z = np.array([1.0, 1j]) / np.sqrt(2.0)
    L_value, I_value = lyapunov_value(EULER, HypocoercivityParams((1.0, 1.0)), 1.0, [1.0], z)
    # x.y = sum x_i conj(y_i): Im((i/sqrt2) * (1/sqrt2)) = +1/2
    assert I_value == pytest.approx(0.5, abs=1e-15)
    assert L_value == pytest.approx(1.5, abs=1e-15)


def test_lyapunov_value_real_state():
    z = np.array([0.3, -1.2])
    _, I_value = lyapunov_value(EULER, HypocoercivityParams((1.0, 1.0)), 2.0, [1.0], z)
    assert I_value == 0.0


def test_lyapunov_value_zero_weights_exact():
    z = np.array([0.6 + 0.1j, -0.2 + 0.7j])
    assert lyapunov_value(EULER, (0.0, 0.0), 0.3, [1.0], z) == (float(np.vdot(z, z).real), 0.0)


def test_lyapunov_value_small_weights():
    z = np.array([1.0, 1j]) / np.sqrt(2.0)
    L_value, _ = lyapunov_value(EULER, HypocoercivityParams((1e-12, 1e-12)), 1.0, [1.0], z)
    assert L_value == pytest.approx(1.0, abs=1e-11)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), rho=st.floats(1e-3, 1e3))
def test_lyapunov_matrix_matches_value(seed, rho):
    rng = np.random.default_rng(seed)
    s = random_system(rng)
    p = HypocoercivityParams(tuple(rng.uniform(0.1, 1.0, s.n)))
    omega = omega_samples(s.d)[0]
    z = rng.standard_normal(s.n) + 1j * rng.standard_normal(s.n)
    P = lyapunov_matrix(s, p, rho, omega)
    assert np.allclose(P, P.conj().T, atol=1e-14)
    L_value, _ = lyapunov_value(s, p, rho, omega, z)
    assert np.real(np.vdot(z, P @ z)) == pytest.approx(L_value, rel=1e-10)


def test_lyapunov_search_euler_fixture():
    cert = lyapunov_search(EULER)
    assert cert.params.eps == (1.0, 0.5)
    assert cert.eta == 0.5
    assert cert.kappa == 0.227
    assert cert.worst_omega in ((1.0,), (-1.0,))
    d = cert.to_dict()
    assert set(d) == {"eps", "eta", "kappa", "worst_frequency"}


def test_lyapunov_search_2d():
    cert = lyapunov_search(EULER_2D, omegas=omega_samples(2, 16))
    assert cert.kappa > 0 and len(cert.params.eps) == 3


def test_lyapunov_search_requires_sk():
    bad = _system(np.zeros((1, 2, 2)), np.diag([0.0, 1.0]), 1)
    with pytest.raises(PreconditionError):
        lyapunov_search(bad)


def test_lyapunov_search_exhaustion():
    # only eta = 1 is offered, which violates the P <= 2 window at rho = 1
    with pytest.raises(NoCertificateFound) as info:
        lyapunov_search(EULER, etas=[4.0])
    assert info.value.worst_rho is not None


def test_certificate_eigen_conditions():
    cert = lyapunov_search(EULER)
    for rho in np.logspace(-3, 3, 32):
        for om in ([1.0], [-1.0]):
            P = lyapunov_matrix(EULER, cert.params, rho, om)
            ev = np.linalg.eigvalsh(P)
            assert 0.5 <= ev[0] and ev[-1] <= 2.0
            Q = dissipation_matrix(EULER, cert.params, rho, om)
            assert np.linalg.eigvalsh(Q)[-1] + 2 * cert.kappa * min(1.0, rho ** 2) <= 0.0


def test_certified_decay_random_states():
    cert = lyapunov_search(EULER)
    rng = np.random.default_rng(4)
    states = rng.standard_normal((100, 2)) + 1j * rng.standard_normal((100, 2))
    states /= np.linalg.norm(states, axis=1)[:, None]
    for rho in (1e-2, 0.3, 1.0, 5.0):
        m = min(1.0, rho ** 2)
        times = np.linspace(0.0, 10.0 / cert.kappa, 100)
        vals = lyapunov_along_flow(EULER, cert.params, rho, [1.0], states, times)
        assert np.all(np.diff(vals, axis=1) <= 1e-8)
        envelope = vals[:, :1] * np.exp(-cert.kappa * m * times)[None, :]
        assert np.all(vals <= envelope + 1e-8)
