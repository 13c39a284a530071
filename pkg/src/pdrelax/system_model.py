"""Partially dissipative symmetric hyperbolic systems.

A system is stored through its linearization about a constant state
``V_bar``: the flux matrices are affine in the perturbation ``Z``,

    A^k(V_bar + Z) = A_bar[k] + sum_m Z[m] * T[k, m],

and the damping acts through ``L`` whose first ``n1`` rows and columns
vanish.  The relaxation parameter ``epsilon`` is never stored in ``L``;
callers scale by ``1/epsilon`` where needed.

Spatial directions are indexed from 0 (``k in range(d)``).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError

SYMMETRY_TOL = 1e-12


def _frozen(a, dtype=float):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class EulerParams:
    """Isentropic pressure law P(rho) = A rho**gamma about a reference density."""

    gamma: float
    A: float
    rho_bar: float
    epsilon: float = 1.0

    def __post_init__(self):
        for name in ("gamma", "A", "rho_bar", "epsilon"):
            value = getattr(self, name)
            if not np.isfinite(value):
                raise ConfigurationError(f"{name} must be finite, got {value!r}")
        if self.gamma <= 1.0:
            raise ConfigurationError(f"gamma must exceed 1, got {self.gamma}")
        if self.A <= 0.0 or self.rho_bar <= 0.0 or self.epsilon <= 0.0:
            raise ConfigurationError("A, rho_bar and epsilon must be positive")

    @property
    def gamma_check(self):
        return 0.5 * (self.gamma - 1.0)

    @property
    def c_bar(self):
        return sound_speed(self.rho_bar, self)

    @property
    def wave_speed(self):
        """Linear sound speed ``gamma_check * c_bar``; its square is P'(rho_bar)."""
        return self.gamma_check * self.c_bar

    def with_epsilon(self, epsilon):
        return EulerParams(self.gamma, self.A, self.rho_bar, epsilon)

    def pressure(self, rho):
        return self.A * np.asarray(rho, dtype=float) ** self.gamma

    def pressure_derivative(self, rho, order=1):
        """d^order P / d rho^order evaluated at ``rho``."""
        coef = self.A
        for i in range(order):
            coef *= self.gamma - i
        return coef * np.asarray(rho, dtype=float) ** (self.gamma - order)


def _sound_coefficient(params):
    return np.sqrt(4.0 * params.gamma * params.A) / (params.gamma - 1.0)


def sound_speed(rho, params):
    """c = sqrt(4 gamma A)/(gamma - 1) * rho**((gamma - 1)/2)."""
    rho = np.asarray(rho, dtype=float)
    if np.any(~(rho > 0)):
        raise DomainError("density must be positive")
    out = _sound_coefficient(params) * rho ** (0.5 * (params.gamma - 1.0))
    return out if out.ndim else float(out)


def rho_from_c(c, params):
    """Inverse of :func:`sound_speed`."""
    c = np.asarray(c, dtype=float)
    if np.any(~(c > 0)):
        raise DomainError("sound speed must be positive")
    out = (c / _sound_coefficient(params)) ** (2.0 / (params.gamma - 1.0))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class HypothesisReport:
    symmetric_A: bool
    symmetric_T: bool
    L_block_structure: bool
    L2_positive: bool
    c_dissip: float
    struct_A11_zero: bool
    struct_T11_zero: bool

    @property
    def all_ok(self):
        return all((self.symmetric_A, self.symmetric_T, self.L_block_structure,
                    self.L2_positive, self.struct_A11_zero, self.struct_T11_zero))

    def to_dict(self):
        return {
            "symmetric_A": self.symmetric_A,
            "symmetric_T": self.symmetric_T,
            "L_block_structure": self.L_block_structure,
            "L2_positive": self.L2_positive,
            "c_dissip": self.c_dissip,
            "struct_A11_zero": self.struct_A11_zero,
            "struct_T11_zero": self.struct_T11_zero,
            "all_ok": self.all_ok,
        }


@dataclass(frozen=True, eq=False)
class PartiallyDissipativeSystem:
    """Affine symmetric system with partial damping.

    Parameters
    ----------
    A_bar : array_like, shape (d, n, n)
        Flux matrices at the reference state.
    T : array_like, shape (d, n, n, n)
        ``T[k, m]`` is the derivative of ``A^k`` with respect to ``Z[m]``.
    L : array_like, shape (n, n)
        Damping matrix (unscaled by epsilon).
    n1 : int
        Number of undamped components.
    """

    A_bar: np.ndarray
    T: np.ndarray
    L: np.ndarray
    n1: int
    _c_dissip: float = field(init=False, repr=False)

    def __post_init__(self):
        try:
            A_bar = _frozen(self.A_bar)
            L = _frozen(self.L)
            T = _frozen(self.T) if self.T is not None else None
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"non-numeric system matrices: {exc}") from exc
        if A_bar.ndim != 3 or A_bar.shape[1] != A_bar.shape[2]:
            raise ConfigurationError(f"A_bar must have shape (d, n, n), got {A_bar.shape}")
        d, n, _ = A_bar.shape
        if d not in (1, 2):
            raise ConfigurationError(f"dimension d must be 1 or 2, got {d}")
        if T is None:
            T = _frozen(np.zeros((d, n, n, n)))
        if T.shape != (d, n, n, n):
            raise ConfigurationError(f"T must have shape {(d, n, n, n)}, got {T.shape}")
        if L.shape != (n, n):
            raise ConfigurationError(f"L must have shape {(n, n)}, got {L.shape}")
        n1 = int(self.n1)
        if n1 != self.n1 or not 0 <= n1 < n:
            raise ConfigurationError(f"n1 must be an integer in [0, {n}), got {self.n1}")
        if not (np.all(np.isfinite(A_bar)) and np.all(np.isfinite(T)) and np.all(np.isfinite(L))):
            raise ConfigurationError("system matrices must be finite")
        object.__setattr__(self, "A_bar", A_bar)
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "n1", n1)
        L2 = L[n1:, n1:]
        object.__setattr__(self, "_c_dissip", float(np.linalg.eigvalsh(0.5 * (L2 + L2.T))[0]))

    @property
    def d(self):
        return self.A_bar.shape[0]

    @property
    def n(self):
        return self.A_bar.shape[1]

    @property
    def n2(self):
        return self.n - self.n1

    @property
    def L2(self):
        return self.L[self.n1:, self.n1:]

    @property
    def c_dissip(self):
        """Minimum eigenvalue of sym(L2); positive for admissible systems."""
        return self._c_dissip

    def blocks(self, M):
        """Split an n x n matrix into its (11, 12, 21, 22) blocks."""
        n1 = self.n1
        return M[:n1, :n1], M[:n1, n1:], M[n1:, :n1], M[n1:, n1:]


def _is_symmetric(M):
    scale = max(1.0, float(np.max(np.abs(M))) if M.size else 1.0)
    return bool(np.max(np.abs(M - np.swapaxes(M, -1, -2)), initial=0.0) <= SYMMETRY_TOL * scale)


def validate(system):
    """Check the structural hypotheses; violations are flagged, not raised."""
    n1 = system.n1
    L = system.L
    block_ok = bool(np.all(L[:n1, :] == 0) and np.all(L[:, :n1] == 0))
    A11 = system.A_bar[:, :n1, :n1]
    T11 = system.T[:, :n1, :n1, :n1]
    return HypothesisReport(
        symmetric_A=_is_symmetric(system.A_bar),
        symmetric_T=_is_symmetric(system.T),
        L_block_structure=block_ok,
        L2_positive=system.c_dissip > 0.0,
        c_dissip=system.c_dissip,
        struct_A11_zero=bool(np.all(A11 == 0)),
        struct_T11_zero=bool(np.all(T11 == 0)),
    )


def apply_A(system, Z, k):
    """Evaluate A^k(V_bar + Z) = A_bar[k] + sum_m Z[m] T[k, m]."""
    if not 0 <= k < system.d:
        raise ConfigurationError(f"direction index k={k} outside range(0, {system.d})")
    Z = np.asarray(Z, dtype=float)
    if Z.shape != (system.n,):
        raise ConfigurationError(f"Z must have shape ({system.n},), got {Z.shape}")
    return system.A_bar[k] + np.tensordot(Z, system.T[k], axes=(0, 0))


def euler_system(params, d=1):
    """Symmetrized damped isentropic Euler system in the variables (c_tilde, v).

    With ``g = gamma_check`` and ``a = g * c_bar``::

        A^k = a (e_0 e_k^T + e_k e_0^T)
        T[k, 0] = g (e_0 e_k^T + e_k e_0^T)       (dependence on c_tilde)
        T[k, m] = delta_{km} I  for m = 1..d      (transport by v)
        L = diag(0, 1, ..., 1)
    """
    if d not in (1, 2):
        raise ConfigurationError(f"dimension d must be 1 or 2, got {d}")
    n = 1 + d
    g = params.gamma_check
    a = params.wave_speed
    A_bar = np.zeros((d, n, n))
    T = np.zeros((d, n, n, n))
    for k in range(d):
        A_bar[k, 0, 1 + k] = A_bar[k, 1 + k, 0] = a
        T[k, 0, 0, 1 + k] = T[k, 0, 1 + k, 0] = g
        T[k, 1 + k] = np.eye(n)
    L = np.diag([0.0] + [1.0] * d)
    return PartiallyDissipativeSystem(A_bar=A_bar, T=T, L=L, n1=1)
