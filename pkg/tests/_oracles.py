"""Independent reference computations shared by the test modules."""

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from pdrelax.sk_analysis import lyapunov_matrix, m_omega


def eig_propagator(B, t):
    """exp(-t B) through an eigendecomposition (B assumed diagonalizable)."""
    w, V = np.linalg.eig(B)
    return (V * np.exp(-t * w)) @ np.linalg.inv(V)


def euler_linear_modes(c0_hat, v0_hat, wavenumbers, a, epsilon, t):
    """Evolve the 1-d linearized system mode by mode.

    ``dc/dt = -i a k v``, ``dv/dt = -i a k c - v/eps``.
    """
    c = np.empty_like(c0_hat)
    v = np.empty_like(v0_hat)
    for i, k in enumerate(wavenumbers):
        B = np.array([[0.0, 1j * a * k], [1j * a * k, 1.0 / epsilon]])
        if abs(1.0 - 4.0 * (epsilon * a * k) ** 2) < 1e-6:
            E = expm(-t * B)
        else:
            E = eig_propagator(B, t)
        c[i], v[i] = E @ np.array([c0_hat[i], v0_hat[i]])
    return c, v


def lyapunov_along_flow(system, params, rho, omega, states, times):
    """Values of the Lyapunov form along exp(-tB) trajectories, shape (len(states), len(times))."""
    P = lyapunov_matrix(system, params, rho, omega)
    B = 1j * rho * m_omega(system, omega) + system.L
    out = np.empty((len(states), len(times)))
    props = [expm(-t * B) for t in times]
    for i, z in enumerate(states):
        for j, E in enumerate(props):
            y = E @ z
            out[i, j] = np.real(np.vdot(y, P @ y))
    return out


def pme_reference(N0_values, params, L_len, T, refine=2, rtol=1e-12):
    """Porous-media solution on a ``refine``-times finer grid by an adaptive explicit RK.

    The datum is spectrally interpolated; the result is restricted back to
    the coarse modes.  No integrating factor and no dealiasing are used.
    """
    N = N0_values.shape[-1]
    M = refine * N
    c = np.fft.rfft(N0_values)
    cf = np.zeros(M // 2 + 1, dtype=complex)
    cf[:N // 2] = c[:N // 2] * refine
    k = np.arange(M // 2 + 1) / L_len
    k2 = -(k ** 2)
    k2[-1] = 0.0

    def rhs(_, n):
        return np.fft.irfft(k2 * np.fft.rfft(params.pressure(n)), n=M)

    sol = solve_ivp(rhs, (0.0, T), np.fft.irfft(cf, n=M), method="DOP853", rtol=rtol,
                    atol=rtol * 1e-2)
    out = np.fft.rfft(sol.y[:, -1])[:N // 2 + 1] / refine
    out[-1] = 0.0
    return np.fft.irfft(out, n=N)
