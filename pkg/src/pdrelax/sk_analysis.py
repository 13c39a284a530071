"""Shizuta-Kawashima diagnostics and Lyapunov certificates.

Conventions
-----------
* ``omega`` samples are stored as an array of shape (S, d).
* The Hermitian product is linear in its first argument,
  ``x . y = sum_i x_i * conj(y_i)``.  With this choice the cross term
  built from ``L M^{q-1} Z`` and ``L M^q Z`` has the sign that makes the
  corrected functional decay along ``dZ/dt = -(i rho M + L) Z``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, PreconditionError, ValidationFailure
from .system_model import validate

RANK_TOL = 1e-10
NVBAR_TOL = 1e-10
ELLIPTIC_TOL = 1e-10
UNIT_TOL = 1e-12


@dataclass(frozen=True)
class HypocoercivityParams:
    """Weights ``eps[0..n-1]``; ``eps[0]`` only enters the Gram sum of :func:`n_vbar`."""

    eps: tuple

    def __post_init__(self):
        eps = tuple(float(e) for e in self.eps)
        if not eps or any(not (e > 0 and np.isfinite(e)) for e in eps):
            raise ConfigurationError("hypocoercivity weights must be positive and finite")
        object.__setattr__(self, "eps", eps)

    @classmethod
    def ones(cls, n):
        return cls((1.0,) * n)

    @classmethod
    def geometric(cls, eta, n):
        return cls(tuple(eta ** q for q in range(n)))

    def scaled(self, alpha):
        return HypocoercivityParams(tuple(alpha * e for e in self.eps))


@dataclass(frozen=True)
class SkReport:
    sk_holds: bool
    n_vbar: float
    worst_omega: tuple
    kalman_ranks: tuple
    ellipticity_constant: object  # float, or None when the A11 block is nonzero

    def to_dict(self):
        return {
            "sk_holds": self.sk_holds,
            "n_vbar": self.n_vbar,
            "worst_omega": list(self.worst_omega),
            "kalman_ranks": list(self.kalman_ranks),
            "ellipticity_constant": self.ellipticity_constant,
        }


@dataclass(frozen=True)
class LyapunovCertificate:
    params: HypocoercivityParams
    kappa: float
    eta: float
    worst_rho: float
    worst_omega: tuple

    def to_dict(self):
        return {
            "eps": list(self.params.eps),
            "eta": self.eta,
            "kappa": self.kappa,
            "worst_frequency": {"rho": self.worst_rho, "omega": list(self.worst_omega)},
        }


class NoCertificateFound(ValidationFailure):
    def __init__(self, message, worst_rho, worst_omega):
        super().__init__(message)
        self.worst_rho = worst_rho
        self.worst_omega = worst_omega


def omega_samples(d, count=64):
    """Unit directions: exactly {+1, -1} for d=1, ``count`` uniform angles for d=2."""
    if d == 1:
        return np.array([[1.0], [-1.0]])
    if d == 2:
        if count < 1:
            raise ConfigurationError("need at least one omega sample")
        theta = 2.0 * np.pi * np.arange(count) / count
        return np.stack([np.cos(theta), np.sin(theta)], axis=1)
    raise ConfigurationError(f"unsupported dimension {d}")


def _as_omegas(system, omegas):
    if omegas is None:
        return omega_samples(system.d)
    omegas = np.atleast_2d(np.asarray(omegas, dtype=float))
    if omegas.shape[0] == 0:
        raise ConfigurationError("omega sample set is empty")
    if omegas.shape[1] != system.d:
        raise ConfigurationError(f"omega samples must have {system.d} components")
    if np.any(np.abs(np.linalg.norm(omegas, axis=1) - 1.0) > UNIT_TOL):
        raise ConfigurationError("omega samples must be unit vectors")
    return omegas


def m_omega(system, omega):
    """M_omega = sum_k omega_k A_bar[k]."""
    omega = np.asarray(omega, dtype=float).reshape(-1)
    if omega.shape != (system.d,):
        raise ConfigurationError(f"omega must have {system.d} components")
    if abs(np.linalg.norm(omega) - 1.0) > UNIT_TOL:
        raise ConfigurationError("omega must be a unit vector")
    return np.tensordot(omega, system.A_bar, axes=(0, 0))


def _m_batch(system, omegas):
    return np.einsum("sk,kij->sij", omegas, system.A_bar)


def _kalman_stack(M, L):
    """[L; L M; ...; L M^{n-1}] for a batch of M with shape (..., n, n)."""
    n = L.shape[-1]
    blocks = []
    P = np.broadcast_to(np.eye(n), M.shape)
    for _ in range(n):
        blocks.append(L @ P)
        P = P @ M
    return np.concatenate(blocks, axis=-2)


def _rank_from_singular(sv, tol):
    smax = sv[..., :1]
    return np.sum(sv > tol * smax, axis=-1) * (smax[..., 0] > 0)


def kalman_rank(M, L, tol=RANK_TOL):
    """Rank of the Kalman matrix of the pair (M, L), threshold ``tol * sigma_max``."""
    M = np.asarray(M, dtype=float)
    L = np.asarray(L, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape != L.shape:
        raise ConfigurationError("kalman_rank needs square matrices of equal size")
    sv = np.linalg.svd(_kalman_stack(M, L), compute_uv=False)
    return int(_rank_from_singular(sv, tol))


def _gram_min(system, params, Ms):
    n = system.n
    L = system.L
    G = np.zeros_like(Ms)
    P = np.broadcast_to(np.eye(n), Ms.shape)
    for k in range(n):
        LP = L @ P
        G = G + params.eps[k] * np.swapaxes(LP, -1, -2) @ LP
        P = P @ Ms
    return np.linalg.eigvalsh(G)[..., 0]


def n_vbar(system, params=None, omegas=None):
    """min over sampled omega of lambda_min(sum_k eps_k (M^k)^T L^T L M^k)."""
    params = HypocoercivityParams.ones(system.n) if params is None else params
    if len(params.eps) != system.n:
        raise ConfigurationError(f"need {system.n} weights eps[0..n-1]")
    omegas = _as_omegas(system, omegas)
    return float(max(_gram_min(system, params, _m_batch(system, omegas)).min(), 0.0))


def ellipticity_check(system, omegas=None):
    """Strong ellipticity of xi -> A12(xi) L2^{-1} A21(xi).

    Returns ``(is_elliptic, constant)`` with the constant the minimum over
    sampled unit directions of the least eigenvalue of the symmetric part.
    """
    report = validate(system)
    if not report.struct_A11_zero:
        raise PreconditionError("ellipticity check requires a vanishing A11 block")
    if not report.L2_positive:
        raise PreconditionError("ellipticity check requires a positive L2 block")
    omegas = _as_omegas(system, omegas)
    n1 = system.n1
    Ms = _m_batch(system, omegas)
    A12 = Ms[:, :n1, n1:]
    A21 = Ms[:, n1:, :n1]
    S = A12 @ np.linalg.solve(system.L2, A21)
    const = float(np.linalg.eigvalsh(0.5 * (S + np.swapaxes(S, 1, 2)))[:, 0].min())
    return const > ELLIPTIC_TOL, const


def sk_condition(system, omegas=None):
    """Kalman-rank decision of the SK condition on sampled directions."""
    omegas = _as_omegas(system, omegas)
    Ms = _m_batch(system, omegas)
    sv = np.linalg.svd(_kalman_stack(Ms, system.L), compute_uv=False)
    ranks = _rank_from_singular(sv, RANK_TOL)
    gmin = _gram_min(system, HypocoercivityParams.ones(system.n), Ms)
    worst = int(np.argmin(gmin))
    ell = None
    rep = validate(system)
    if rep.struct_A11_zero and rep.L2_positive:
        ell = ellipticity_check(system, omegas)[1]
    return SkReport(
        sk_holds=bool(np.all(ranks == system.n)),
        n_vbar=float(max(gmin[worst], 0.0)),
        worst_omega=tuple(float(x) for x in omegas[worst]),
        kalman_ranks=tuple(int(r) for r in ranks),
        ellipticity_constant=ell,
    )


def _cross_terms(system, M):
    """G_q = (L M^q)^T (L M^{q-1}) for q = 1..n-1, stacked."""
    n = system.n
    L = system.L
    out = []
    P = np.eye(n)
    for _ in range(1, n):
        prev = L @ P
        P = P @ M
        out.append((L @ P).T @ prev)
    return np.array(out).reshape(n - 1, n, n)


def lyapunov_value(system, params, rho, omega, Zhat):
    """Return ``(L_value, I_value)`` for one frequency ``xi = rho * omega``.

    ``I = Im sum_q eps_q (L M^{q-1} Z) . (L M^q Z)`` and
    ``L_value = |Z|^2 + min(rho, 1/rho) * I``.  ``params`` may also be a
    plain sequence of nonnegative weights (zero weights switch ``I`` off).
    """
    if not rho > 0:
        raise ConfigurationError("rho must be positive")
    M = m_omega(system, omega)
    Z = np.asarray(Zhat, dtype=complex)
    if isinstance(params, HypocoercivityParams):
        eps = params.eps
    else:
        eps = tuple(float(e) for e in params)
        if any(not (e >= 0 and np.isfinite(e)) for e in eps):
            raise ConfigurationError("weights must be nonnegative and finite")
    if len(eps) != system.n:
        raise ConfigurationError(f"need {system.n} weights eps[0..n-1]")
    I_value = 0.0
    P = np.eye(system.n)
    for q in range(1, system.n):
        x = system.L @ P @ Z
        P = P @ M
        y = system.L @ P @ Z
        I_value += eps[q] * float(np.imag(np.sum(x * np.conj(y))))
    norm2 = float(np.real(np.vdot(Z, Z)))
    return norm2 + min(rho, 1.0 / rho) * I_value, I_value


def lyapunov_matrix(system, params, rho, omega):
    """Hermitian P with ``Z^* P Z = L_value``."""
    M = m_omega(system, omega)
    return _lyapunov_matrix(system, params.eps, rho, _cross_terms(system, M))


def _lyapunov_matrix(system, eps, rho, G):
    PI = np.zeros((system.n, system.n), dtype=complex)
    for q in range(1, system.n):
        PI += eps[q] * (G[q - 1] - G[q - 1].T) / 2j
    return np.eye(system.n) + min(rho, 1.0 / rho) * PI


def dissipation_matrix(system, params, rho, omega):
    """Q = -(B^* P + P B) with B = i rho M_omega + L; d/dt Z^*PZ = Z^*QZ."""
    P = lyapunov_matrix(system, params, rho, omega)
    B = 1j * rho * m_omega(system, omega) + system.L
    return -(B.conj().T @ P + P @ B)


def _floor_sig(x, digits=3):
    if x <= 0:
        return x
    e = np.floor(np.log10(x)) - (digits - 1)
    return float(np.floor(x / 10.0 ** e) * 10.0 ** e)


def lyapunov_search(system, rho_grid=None, omegas=None, etas=None):
    """Find eps_q = eta**q and kappa > 0 certifying decay of the functional.

    For every sampled ``(rho, omega)`` the certificate requires
    ``1/2 <= P <= 2`` and ``lambda_max(Q) + 2 kappa min(1, rho^2) <= 0``.
    Since the shift by ``2 kappa min(1, rho^2) I`` moves every eigenvalue
    of ``Q`` by the same amount, the largest admissible ``kappa`` is
    available in closed form; it is rounded down to three significant
    digits.
    """
    omegas = _as_omegas(system, omegas)
    if not sk_condition(system, omegas).sk_holds:
        raise PreconditionError("the SK condition fails; no Lyapunov certificate exists")
    rho_grid = np.logspace(-3, 3, 32) if rho_grid is None else np.asarray(rho_grid, float)
    if rho_grid.size == 0 or np.any(rho_grid <= 0):
        raise ConfigurationError("rho grid must be nonempty and positive")
    etas = [2.0 ** -j for j in range(1, 21)] if etas is None else list(etas)

    cases = []
    for omega in omegas:
        M = m_omega(system, omega)
        G = _cross_terms(system, M)
        for rho in rho_grid:
            B = 1j * rho * M + system.L
            cases.append((float(rho), tuple(float(w) for w in omega), G, B))

    worst = (None, None, -np.inf)
    for eta in etas:
        eps = tuple(eta ** q for q in range(system.n))
        kappa = np.inf
        arg = None
        ok = True
        worst_violation = (None, None, -np.inf)
        for rho, omega, G, B in cases:
            P = _lyapunov_matrix(system, eps, rho, G)
            ev = np.linalg.eigvalsh(P)
            qmax = np.linalg.eigvalsh(-(B.conj().T @ P + P @ B))[-1]
            violation = max(0.5 - ev[0], ev[-1] - 2.0, qmax)
            if violation >= 0:
                ok = False
                if violation > worst_violation[2]:
                    worst_violation = (rho, omega, violation)
                continue
            k = -qmax / (2.0 * min(1.0, rho * rho))
            if k < kappa:
                kappa, arg = k, (rho, omega)
        if ok:
            return LyapunovCertificate(
                params=HypocoercivityParams(eps),
                kappa=_floor_sig(float(kappa)),
                eta=eta,
                worst_rho=arg[0],
                worst_omega=arg[1],
            )
        worst = worst_violation
    raise NoCertificateFound(
        f"no certificate for eta in [{etas[-1]:g}, {etas[0]:g}]; "
        f"worst frequency rho={worst[0]!r}, omega={worst[1]!r}",
        worst_rho=worst[0],
        worst_omega=worst[1],
    )
