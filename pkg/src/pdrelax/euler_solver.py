"""Pseudo-spectral solver for the symmetrized damped isentropic Euler system.

Unknowns are the sound-speed perturbation ``c`` (``c_tilde``) and the
velocity ``v``.  Unrescaled equations::

    dc/dt = -v.grad c - g (c + c_bar) div v
    dv/dt = -v.grad v - g (c + c_bar) grad c - v / eps

with ``g = (gamma - 1)/2``.  The diffusively rescaled system (time
``t/eps``, velocity ``v/eps``) replaces the velocity equation by::

    dv/dt = -v.grad v - (g (c + c_bar) grad c + v) / eps**2

The damping term is integrated exactly (integrating factor) and the
remaining terms by classical RK4 in Lawson form, so the admissible time
step is set by the advective CFL bound only.  Products are evaluated in
physical space and dealiased with the 2/3 rule.
"""

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import expm

from .errors import CFLViolation, ConfigurationError, NumericFailure
from .fieldio import read_fields
from .littlewood_paley import (BesovIndex, SpectralField, besov_from_blocks, block_lp_norms,
                               forward, inverse, random_band_field)
from .system_model import euler_system, rho_from_c

SCHEMES = ("if-rk4", "linear-exact")
FIELDS = ("c", "v", "W")
PARTS = ("full", "low", "high")


@dataclass(frozen=True)
class NormSpec:
    """A Besov diagnostic column: norm of ``field`` (c, v or W) over ``part`` of the blocks.

    Vector fields are measured by the sum of their component norms.
    """

    name: str
    field: str
    s: float
    p: float = 2.0
    r: float = 1.0
    part: str = "full"
    J: object = None

    def __post_init__(self):
        if self.field not in FIELDS:
            raise ConfigurationError(f"unknown diagnostic field {self.field!r}")
        if self.part not in PARTS:
            raise ConfigurationError(f"unknown frequency part {self.part!r}")
        if self.part != "full" and self.J is None:
            raise ConfigurationError(f"diagnostic {self.name!r} needs a threshold J")
        BesovIndex(self.s, self.p, self.r)

    @property
    def index(self):
        return BesovIndex(self.s, self.p, self.r)


@dataclass(frozen=True)
class SolverConfig:
    grid: object
    dt: float
    T: float
    dealias: bool = True
    scheme: str = "if-rk4"
    rescaled: bool = False
    diag_every: int = 1
    diagnostics: tuple = ()
    damped_index: object = None
    snapshot_every: int = 0
    transport: bool = True
    cfl: float = 0.5

    def __post_init__(self):
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if not (self.T >= 0 and np.isfinite(self.T)):
            raise ConfigurationError(f"T must be nonnegative, got {self.T}")
        if self.scheme not in SCHEMES:
            raise ConfigurationError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if int(self.diag_every) < 1:
            raise ConfigurationError("diag_every must be a positive integer")
        object.__setattr__(self, "diagnostics", tuple(self.diagnostics))
        if self.damped_index is None:
            object.__setattr__(self, "damped_index", BesovIndex(self.grid.d / 2.0, 2.0, 1.0))

    @property
    def n_steps(self):
        """Number of steps; the last step is shortened so that ``t`` ends at ``T``."""
        return int(np.ceil(self.T / self.dt - 1e-12))


@dataclass(frozen=True)
class EulerState:
    c_tilde: SpectralField
    v: tuple
    t: float
    params: object

    def __post_init__(self):
        object.__setattr__(self, "v", tuple(self.v))
        grid = self.c_tilde.grid
        if len(self.v) != grid.d or any(f.grid != grid for f in self.v):
            raise ConfigurationError("velocity must have d components on the grid of c_tilde")

    @property
    def grid(self):
        return self.c_tilde.grid

    def density(self):
        return rho_from_c(self.c_tilde.values + self.params.c_bar, self.params)

    def spectral(self):
        return np.stack([self.c_tilde.coefficients] + [f.coefficients for f in self.v])

    @classmethod
    def from_spectral(cls, U, grid, t, params):
        fields = [SpectralField(grid, coefficients=u) for u in U]
        return cls(fields[0], tuple(fields[1:]), t, params)


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    mass: float
    energy: float
    norms: dict
    damped_mode_norm: float


@dataclass
class Trajectory:
    records: list
    final: object
    epsilon: float
    rescaled: bool
    snapshots: list = field(default_factory=list)

    @property
    def times(self):
        return np.array([r.t for r in self.records])

    def column(self, name):
        if name in ("mass", "energy", "damped_mode_norm"):
            return np.array([getattr(r, name) for r in self.records])
        try:
            return np.array([r.norms[name] for r in self.records])
        except KeyError:
            raise ConfigurationError(f"trajectory has no diagnostic column {name!r}") from None


class EulerKernel:
    """Spectral right-hand sides and time steppers for one (params, epsilon, grid)."""

    def __init__(self, params, epsilon, grid, rescaled=False, dealias=True, transport=True):
        if not epsilon > 0:
            raise ConfigurationError("epsilon must be positive")
        self.params = params
        self.epsilon = float(epsilon)
        self.grid = grid
        self.rescaled = bool(rescaled)
        self.transport = bool(transport)
        self.g = params.gamma_check
        self.c_bar = params.c_bar
        self.mask = grid.dealias_mask if dealias else np.ones(grid.spectral_shape, dtype=bool)
        self.ik = grid.derivative_symbols
        self.damping_rate = 1.0 / self.epsilon ** 2 if rescaled else 1.0 / self.epsilon
        self.pressure_scale = 1.0 / self.epsilon ** 2 if rescaled else 1.0
        self._factors = {}
        self._expm = {}

    # -- physical helpers -------------------------------------------------
    def to_physical(self, U):
        return inverse(U, self.grid)

    def gradients(self, U):
        """Physical derivatives d_j of every component, shape (d, ncomp, *shape)."""
        return np.stack([inverse(ik * U, self.grid) for ik in self.ik])

    # -- right-hand sides -------------------------------------------------
    def nonlinear(self, U):
        """All terms except the exact damping ``-rate * v``."""
        d = self.grid.d
        u = self.to_physical(U)
        if not np.all(np.isfinite(u)):
            raise NumericFailure("non-finite state in right-hand side", dump={"U": U})
        du = self.gradients(U)
        # without transport only the linear wave terms remain
        c = u[0] + self.c_bar if self.transport else self.c_bar
        out = np.empty_like(u)
        div_v = sum(du[j, 1 + j] for j in range(d))
        out[0] = -self.g * c * div_v
        for i in range(d):
            out[1 + i] = -self.pressure_scale * self.g * c * du[i, 0]
        if self.transport:
            out -= sum(u[1 + j] * du[j] for j in range(d))
        if not np.all(np.isfinite(out)):
            raise NumericFailure("non-finite values in nonlinear products", dump={"U": U})
        return forward(out, self.grid) * self.mask

    def rhs(self, U):
        dU = self.nonlinear(U)
        dU[1:] -= self.damping_rate * U[1:]
        return dU

    # -- integrating factor RK4 -------------------------------------------
    def factor(self, h):
        """Exact damping factor over time ``h`` as a per-component column."""
        if h not in self._factors:
            f = np.ones((1 + self.grid.d,) + (1,) * self.grid.d)
            f[1:] = np.exp(-self.damping_rate * h)
            self._factors[h] = f
        return self._factors[h]

    def if_rk4_step(self, U, h):
        E2 = self.factor(h / 2)
        E = self.factor(h)
        N = self.nonlinear
        k1 = N(U)
        k2 = N(E2 * (U + 0.5 * h * k1))
        k3 = N(E2 * U + 0.5 * h * k2)
        k4 = N(E * U + h * E2 * k3)
        return E * U + (h / 6.0) * (E * k1 + 2.0 * E2 * (k2 + k3) + k4)

    # -- linear exact propagator -----------------------------------------
    def linear_generator(self):
        """Per-mode matrix G(k) with dU/dt = G U for the linearized system."""
        d = self.grid.d
        n = 1 + d
        system = euler_system(self.params, d)
        shape = self.grid.spectral_shape
        k = [np.broadcast_to(kk, shape) for kk in self.grid.wavenumbers]
        ks = [np.where(self.grid.nyquist_free, kk, 0.0) for kk in k]
        B = np.zeros(shape + (n, n), dtype=complex)
        for j in range(d):
            B += 1j * ks[j][..., None, None] * system.A_bar[j]
        B += system.L * (1.0 / self.epsilon if not self.rescaled else 1.0)
        if self.rescaled:
            D = np.array([1.0] + [self.epsilon ** -2] * d)
            B = D[:, None] * B
        return -B

    def propagator(self, h):
        if h not in self._expm:
            G = self.linear_generator()
            self._expm[h] = expm(h * G.reshape((-1,) + G.shape[-2:])).reshape(G.shape)
        return self._expm[h]

    def linear_exact_step(self, U, h):
        if h == 0:
            return U.copy()
        P = self.propagator(h)
        Um = np.moveaxis(U, 0, -1)
        return np.moveaxis(np.einsum("...ij,...j->...i", P, Um), -1, 0)

    # -- diagnostics ------------------------------------------------------
    def max_speed(self, U):
        u = self.to_physical(U)
        wave = self.g * (np.max(np.abs(u[0])) + self.c_bar)
        if self.rescaled:
            wave /= self.epsilon
        vmax = np.max(np.sqrt(np.sum(u[1:] ** 2, axis=0)))
        return wave + vmax

    def cfl_limit(self, U, cfl=0.5):
        return cfl * self.grid.dx / self.max_speed(U)

    def damped_mode_values(self, U):
        """W = v/eps + g c grad c (unrescaled) or v + g c grad c (rescaled), physical."""
        u = self.to_physical(U)
        dc = np.stack([inverse(ik * U[0], self.grid) for ik in self.ik])
        scale = 1.0 if self.rescaled else 1.0 / self.epsilon
        return scale * u[1:] + self.g * (u[0] + self.c_bar) * dc


def _ensure_positive(kernel, U, t):
    c = kernel.to_physical(U[:1])[0] + kernel.c_bar
    if not np.all(np.isfinite(c)):
        raise NumericFailure(f"non-finite sound speed at t={t}", dump={"U": U})
    if np.min(c) <= 0:
        raise NumericFailure(f"sound speed lost positivity at t={t}", dump={"U": U})


def evaluate_norms(kernel, U, specs, damped_index):
    grid = kernel.grid
    js = grid.js
    cache = {}

    def fields(name):
        if name == "c":
            return U[:1]
        if name == "v":
            return U[1:]
        if "W" not in cache:
            cache["W"] = forward(kernel.damped_mode_values(U), grid)
        return cache["W"]

    def blocks(name, p):
        key = (name, p)
        if key not in cache:
            cache[key] = block_lp_norms(fields(name), grid, p)
        return cache[key]

    out = {}
    for spec in specs:
        b = blocks(spec.field, spec.p)
        mask = None
        if spec.part == "low":
            mask = js <= spec.J + 1
        elif spec.part == "high":
            mask = js >= spec.J
        out[spec.name] = float(np.sum(besov_from_blocks(b, js, spec.index, mask)))
    damped = float(np.sum(besov_from_blocks(blocks("W", damped_index.p), js, damped_index)))
    return out, damped


def _record(kernel, U, t, config):
    grid = kernel.grid
    u = kernel.to_physical(U)
    rho = rho_from_c(u[0] + kernel.c_bar, kernel.params)
    mass = float(np.sum(rho) * grid.cell_volume)
    energy = float(0.5 * np.sum(u ** 2) * grid.cell_volume)
    norms, damped = evaluate_norms(kernel, U, config.diagnostics, config.damped_index)
    return DiagnosticsRecord(t=float(t), mass=mass, energy=energy, norms=norms,
                             damped_mode_norm=damped)


def kernel_for(state, config, epsilon):
    return EulerKernel(state.params, epsilon, config.grid, rescaled=config.rescaled,
                       dealias=config.dealias, transport=config.transport)


def rhs(state, epsilon, rescaled=False):
    """Time derivative of ``(c_tilde, v)`` as a tuple of fields (c, v_1, ..., v_d)."""
    kernel = EulerKernel(state.params, epsilon, state.grid, rescaled=rescaled)
    dU = kernel.rhs(state.spectral())
    return tuple(SpectralField(state.grid, coefficients=u) for u in dU)


def step(state, config, epsilon):
    """One integrating-factor RK4 step of size ``config.dt``."""
    kernel = kernel_for(state, config, epsilon)
    U = state.spectral()
    limit = kernel.cfl_limit(U, config.cfl)
    if config.dt > limit:
        raise CFLViolation(f"dt={config.dt:g} exceeds the CFL limit {limit:g}", suggested_dt=limit)
    if config.scheme == "linear-exact":
        U = kernel.linear_exact_step(U, config.dt)
    else:
        U = kernel.if_rk4_step(U, config.dt)
    return EulerState.from_spectral(U, state.grid, state.t + config.dt, state.params)


def linear_exact_step(state, dt, epsilon, rescaled=False):
    """Advance the linearized system exactly, mode by mode."""
    kernel = EulerKernel(state.params, epsilon, state.grid, rescaled=rescaled)
    U = kernel.linear_exact_step(state.spectral(), dt)
    return EulerState.from_spectral(U, state.grid, state.t + dt, state.params)


def damped_mode(state, epsilon, rescaled=False):
    kernel = EulerKernel(state.params, epsilon, state.grid, rescaled=rescaled)
    W = kernel.damped_mode_values(state.spectral())
    return tuple(SpectralField(state.grid, values=w) for w in W)


def simulate(initial, config, epsilon):
    """Integrate from ``initial`` to ``initial.t + config.T``.

    Diagnostics are recorded at ``t0`` and every ``diag_every`` steps (and
    at the final time).  Aborts raise :class:`NumericFailure` carrying the
    partial trajectory.
    """
    if initial.grid != config.grid:
        raise ConfigurationError("initial state and solver config use different grids")
    kernel = kernel_for(initial, config, epsilon)
    U = initial.spectral().copy()
    t0 = initial.t
    traj = Trajectory(records=[], final=None, epsilon=float(epsilon), rescaled=config.rescaled)
    n = config.n_steps
    try:
        _ensure_positive(kernel, U, t0)
        _check_cfl(kernel, U, config)
        traj.records.append(_record(kernel, U, t0, config))
        if config.snapshot_every:
            traj.snapshots.append(EulerState.from_spectral(U, config.grid, t0, initial.params))
        for i in range(1, n + 1):
            h = config.dt if i < n else config.T - (n - 1) * config.dt
            if config.scheme == "linear-exact":
                U = kernel.linear_exact_step(U, h)
            else:
                U = kernel.if_rk4_step(U, h)
            t = t0 + (config.T if i == n else i * config.dt)
            if i % config.diag_every == 0 or i == n:
                _ensure_positive(kernel, U, t)
                _check_cfl(kernel, U, config)
                traj.records.append(_record(kernel, U, t, config))
            if config.snapshot_every and (i % config.snapshot_every == 0 or i == n):
                traj.snapshots.append(EulerState.from_spectral(U, config.grid, t, initial.params))
    except NumericFailure as exc:
        exc.trajectory = traj
        raise
    traj.final = EulerState.from_spectral(U, config.grid, t0 + config.T, initial.params)
    return traj


def _check_cfl(kernel, U, config):
    if config.scheme == "linear-exact":
        return
    limit = kernel.cfl_limit(U, config.cfl)
    if config.dt > limit:
        raise CFLViolation(f"dt={config.dt:g} exceeds the CFL limit {limit:g}",
                           suggested_dt=limit, dump={"U": U})


def init_data(kind, amplitude, seed, grid, params, k0=1, band=(1, 4), path=None):
    """Initial ``EulerState`` of the requested kind.

    ``mode``: ``c = amplitude * cos(k0 x_1)``, ``v = 0``.
    ``random-band``: independent random trigonometric polynomials on lattice
    shells ``band[0] <= |n| <= band[1]``, each with peak value ``amplitude``.
    ``custom-file``: components (c, v_1, ..., v_d) read from a field file
    and multiplied by ``amplitude``.
    """
    if not amplitude > 0:
        raise ConfigurationError("amplitude must be positive")
    cut = (grid.N - 1) // 3
    if kind == "mode":
        if not 1 <= k0 <= cut:
            raise ConfigurationError(f"mode k0={k0} not resolvable on N={grid.N}")
        c = SpectralField.from_function(grid, lambda *x: amplitude * np.cos(k0 * x[0] / grid.L_len))
        v = tuple(SpectralField.zeros(grid) for _ in range(grid.d))
    elif kind == "random-band":
        lo, hi = band
        if not 1 <= lo <= hi <= cut / np.sqrt(grid.d):
            raise ConfigurationError(f"band {band} not resolvable on N={grid.N}")
        rng = np.random.default_rng(seed)
        c = random_band_field(grid, lo, hi, rng, amplitude)
        v = tuple(random_band_field(grid, lo, hi, rng, amplitude) for _ in range(grid.d))
    elif kind == "custom-file":
        if path is None:
            raise ConfigurationError("custom-file initial data needs a path")
        comps = read_fields(path)
        if len(comps) != 1 + grid.d or comps[0].grid != grid:
            raise ConfigurationError(f"{path}: expected {1 + grid.d} components on {grid}")
        c = amplitude * comps[0]
        v = tuple(amplitude * f for f in comps[1:])
        c = c - c.mean()
    else:
        raise ConfigurationError(f"unknown initial data kind {kind!r}")
    return EulerState(c, v, 0.0, params)


def with_diagnostics(config, specs):
    return replace(config, diagnostics=tuple(config.diagnostics) + tuple(specs))
