"""Eigenvalues of the linearized symbol and the overdamping picture.

We study ``dZ/dt = -B Z`` with ``B(xi, eps) = i sum_k xi_k A_bar[k] + L/eps``,
so the real part of an eigenvalue is a decay rate.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, NumericFailure
from .sk_analysis import ellipticity_check

RESIDUAL_TOL = 1e-8
REAL_TOL = 1e-8

ALL_REAL = "all-real"
MIXED = "mixed"
COMPLEX_PAIR = "complex-pair-present"


def symbol_matrix(system, xi, epsilon):
    xi = np.asarray(xi, dtype=float).reshape(-1)
    if xi.shape != (system.d,):
        raise ConfigurationError(f"xi must have {system.d} components")
    if not epsilon > 0:
        raise ConfigurationError("epsilon must be positive")
    return 1j * np.tensordot(xi, system.A_bar, axes=(0, 0)) + system.L / epsilon


TIE_TOL = 1e-10


def _sorted(lam):
    """Ascending real part; real parts equal to ``TIE_TOL`` are ordered by imaginary part."""
    lam = lam[np.lexsort((lam.imag, lam.real))]
    tol = TIE_TOL * (1.0 + np.max(np.abs(lam), initial=0.0))
    out, start = [], 0
    for i in range(1, len(lam) + 1):
        if i == len(lam) or lam[i].real - lam[i - 1].real > tol:
            group = lam[start:i]
            out.append(group[np.argsort(group.imag, kind="stable")])
            start = i
    return np.concatenate(out) if out else lam


def eigen_decay(B):
    """Eigenvalues of ``B`` sorted by real part, then imaginary part.

    Each eigenpair is checked against ``|B v - lambda v| <= 1e-8 |B|``.
    """
    B = np.asarray(B, dtype=complex)
    if B.ndim != 2 or B.shape[0] != B.shape[1]:
        raise ConfigurationError("eigen_decay needs a square matrix")
    try:
        lam, V = np.linalg.eig(B)
    except np.linalg.LinAlgError as exc:
        raise NumericFailure(f"eigensolver failed: {exc}", dump={"B": B}) from exc
    scale = max(np.linalg.norm(B, 2), np.finfo(float).tiny)
    res = np.linalg.norm(B @ V - V * lam, axis=0) / np.maximum(np.linalg.norm(V, axis=0), 1e-300)
    if not np.all(np.isfinite(lam)) or np.any(res > RESIDUAL_TOL * scale):
        raise NumericFailure("eigenpair residual check failed", dump={"B": B, "eigenvalues": lam})
    return _sorted(lam)


def is_real(lam):
    return np.abs(lam.imag) <= REAL_TOL * (1.0 + np.abs(lam))


def classify(lam):
    real = is_real(lam)
    if np.all(real):
        return ALL_REAL
    # a conjugate pair is present when some non-real eigenvalue has its mirror image
    for z in lam[~real]:
        if np.any(np.abs(lam - np.conj(z)) <= REAL_TOL * (1.0 + abs(z))):
            return COMPLEX_PAIR
    return MIXED


@dataclass(frozen=True)
class DispersionEntry:
    xi_norm: float
    eigenvalues: np.ndarray
    regime: str


@dataclass(frozen=True)
class DispersionCurve:
    entries: tuple
    epsilon: float
    omega: tuple
    transition: object  # (xi_lo, xi_hi) grid bracket, or None

    @property
    def xi(self):
        return np.array([e.xi_norm for e in self.entries])

    @property
    def eigenvalues(self):
        return np.array([e.eigenvalues for e in self.entries])

    @property
    def regimes(self):
        return [e.regime for e in self.entries]


def sweep(system, epsilon, xi_grid, omega=None):
    """Eigenvalues of B(|xi| omega, eps) along a grid of frequency magnitudes.

    The transition is the grid bracket ``(xi_prev, xi_star)`` where
    ``xi_star`` is the first grid point with a non-real eigenvalue.
    """
    xi_grid = np.asarray(xi_grid, dtype=float).reshape(-1)
    if xi_grid.size == 0:
        raise ConfigurationError("xi grid is empty")
    if omega is None:
        omega = np.eye(system.d)[0]
    omega = np.asarray(omega, dtype=float)
    entries = []
    transition = None
    for i, x in enumerate(xi_grid):
        lam = eigen_decay(symbol_matrix(system, x * omega, epsilon))
        regime = classify(lam)
        entries.append(DispersionEntry(float(x), lam, regime))
        if transition is None and regime != ALL_REAL:
            transition = (float(xi_grid[i - 1]) if i else float(x), float(x))
    return DispersionCurve(tuple(entries), float(epsilon), tuple(omega.tolist()), transition)


@dataclass(frozen=True)
class AsymptoticReport:
    slow_branch_ratio: float
    fast_branch_ratio: float
    points: int

    @property
    def passed(self):
        return (abs(self.slow_branch_ratio - 1.0) <= 0.05
                and abs(self.fast_branch_ratio - 1.0) <= 0.05)


def asymptotic_check(curve, epsilon, system):
    """Compare low-frequency branches with ``eps*c*xi^2`` and ``c_L/eps``.

    ``c`` is the ellipticity constant (``a^2`` for Euler) and ``c_L`` the
    smallest eigenvalue of sym(L2).  Only points with ``0 < eps*xi <= 0.1``
    are used; the worst ratio (farthest from one) is reported for each branch.
    """
    _, c_ell = ellipticity_check(system, np.array([curve.omega]))
    n1 = system.n1
    slow_worst, fast_worst, count = 1.0, 1.0, 0
    for e in curve.entries:
        if not (e.xi_norm > 0 and epsilon * e.xi_norm <= 0.1):
            continue
        count += 1
        re = np.sort(e.eigenvalues.real)
        slow = re[0] / (epsilon * c_ell * e.xi_norm ** 2)
        fast = re[n1] / (system.c_dissip / epsilon)
        if abs(slow - 1.0) > abs(slow_worst - 1.0):
            slow_worst = slow
        if abs(fast - 1.0) > abs(fast_worst - 1.0):
            fast_worst = fast
    if count == 0:
        raise ConfigurationError("curve has no points with 0 < eps*xi <= 0.1")
    return AsymptoticReport(float(slow_worst), float(fast_worst), count)
