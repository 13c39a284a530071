"""Pseudo-spectral solver for the porous-media equation dN/dt = Lap P(N).

With ``P(N) = P(rho_bar) + P'(rho_bar)(N - rho_bar) + H1(N)(N - rho_bar)``
the equation splits into the heat operator ``P'(rho_bar) Lap``, integrated
exactly per mode, and the remainder ``Lap(H1(N)(N - rho_bar))`` advanced
by a second-order Lawson (integrating factor Heun) step.  Both parts are
Laplacians, so the mean of ``N`` is preserved to the last bit.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError, NumericFailure
from .littlewood_paley import (BesovIndex, SpectralField, besov_from_blocks, block_lp_norms,
                               forward, inverse, lp_norm)

SERIES_SWITCH = 1e-6


def h1(rho, params):
    """H1(rho) = (P(rho) - P(rho_bar))/(rho - rho_bar) - P'(rho_bar).

    The pressure difference is formed as ``P(rho_bar) expm1(gamma log1p(delta/rho_bar))``
    to avoid cancellation; near ``rho_bar`` a second-order Taylor series
    replaces the difference quotient.
    """
    rho = np.asarray(rho, dtype=float)
    if np.any(~(rho > 0)):
        raise DomainError("density must be positive")
    rb = params.rho_bar
    delta = rho - rb
    near = np.abs(delta) <= SERIES_SWITCH * rb
    safe = np.where(near, 1.0, delta)
    dP = params.pressure(rb) * np.expm1(params.gamma * np.log1p(delta / rb))
    direct = dP / safe - params.pressure_derivative(rb)
    series = (0.5 * params.pressure_derivative(rb, 2) * delta
              + params.pressure_derivative(rb, 3) * delta ** 2 / 6.0)
    out = np.where(near, series, direct)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class PmeState:
    N_field: SpectralField
    t: float
    params: object

    @property
    def grid(self):
        return self.N_field.grid


@dataclass(frozen=True)
class PmeConfig:
    grid: object
    dt: float
    T: float
    diag_every: int = 1
    p: float = 2.0
    dealias: bool = True
    linear_only: bool = False
    snapshot_every: int = 0

    def __post_init__(self):
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if not (self.T >= 0 and np.isfinite(self.T)):
            raise ConfigurationError(f"T must be nonnegative, got {self.T}")
        if int(self.diag_every) < 1:
            raise ConfigurationError("diag_every must be a positive integer")

    @property
    def n_steps(self):
        return int(np.ceil(self.T / self.dt - 1e-12))


@dataclass(frozen=True)
class PmeRecord:
    t: float
    mass: float
    deviation_l2: float
    norms: dict


@dataclass
class PmeTrajectory:
    records: list
    final: object
    snapshots: list = field(default_factory=list)

    @property
    def times(self):
        return np.array([r.t for r in self.records])

    def column(self, name):
        if name in ("mass", "deviation_l2"):
            return np.array([getattr(r, name) for r in self.records])
        try:
            return np.array([r.norms[name] for r in self.records])
        except KeyError:
            raise ConfigurationError(f"trajectory has no diagnostic column {name!r}") from None


class PmeKernel:
    """Exact heat factor plus explicit remainder for one (params, grid)."""

    def __init__(self, params, grid, dealias=True, linear_only=False):
        self.params = params
        self.grid = grid
        self.rho_bar = params.rho_bar
        self.diffusivity = float(params.pressure_derivative(params.rho_bar))
        self.lap = grid.laplacian_symbol
        self.mask = grid.dealias_mask if dealias else np.ones(grid.spectral_shape, dtype=bool)
        self.linear_only = linear_only
        self._factors = {}

    def factor(self, h):
        if h not in self._factors:
            self._factors[h] = np.exp(self.diffusivity * self.lap * h)
        return self._factors[h]

    def density(self, Nh):
        n = inverse(Nh, self.grid)
        if not np.all(np.isfinite(n)):
            raise NumericFailure("non-finite density", dump={"N_hat": Nh})
        if np.min(n) <= 0:
            raise NumericFailure("density lost positivity", dump={"N_hat": Nh})
        return n

    def remainder(self, Nh):
        """Lap(H1(N)(N - rho_bar)) in spectral form."""
        n = self.density(Nh)
        delta = n - self.rho_bar
        return self.lap * forward(h1(n, self.params) * delta, self.grid) * self.mask

    def step(self, Nh, h):
        E = self.factor(h)
        if self.linear_only:
            out = E * Nh
        else:
            a1 = self.remainder(Nh)
            a2 = self.remainder(E * (Nh + h * a1))
            out = E * Nh + 0.5 * h * (E * a1 + a2)
        zero = (0,) * self.grid.d
        if out[zero] != Nh[zero]:
            raise NumericFailure("zero mode changed during a step", dump={"N_hat": Nh})
        return out


def step_pme(state, dt, linear_only=False):
    if not dt > 0:
        raise ConfigurationError("dt must be positive")
    kernel = PmeKernel(state.params, state.grid, linear_only=linear_only)
    Nh = kernel.step(state.N_field.coefficients, dt)
    return PmeState(SpectralField(state.grid, coefficients=Nh), state.t + dt, state.params)


def pme_norm_columns(d, p):
    return {
        "B_dp": BesovIndex(d / p, p, 1.0),
        "B_dp2": BesovIndex(d / p + 2.0, p, 1.0),
    }


def _record(kernel, Nh, t, config):
    g = kernel.grid
    n = inverse(Nh, g)
    dev = n - kernel.rho_bar
    blocks = block_lp_norms(forward(dev, g), g, config.p)
    norms = {name: float(besov_from_blocks(blocks, g.js, idx))
             for name, idx in pme_norm_columns(g.d, config.p).items()}
    return PmeRecord(t=float(t), mass=float(np.sum(n) * g.cell_volume),
                     deviation_l2=float(lp_norm(dev, g, 2.0)), norms=norms)


def simulate_pme(initial, config):
    """Integrate the porous-media equation with Besov diagnostics of ``N - rho_bar``."""
    if initial.grid != config.grid:
        raise ConfigurationError("initial state and config use different grids")
    kernel = PmeKernel(initial.params, config.grid, config.dealias, config.linear_only)
    Nh = np.array(initial.N_field.coefficients)
    t0 = initial.t
    traj = PmeTrajectory(records=[], final=None)
    n = config.n_steps
    try:
        kernel.density(Nh)
        traj.records.append(_record(kernel, Nh, t0, config))
        if config.snapshot_every:
            traj.snapshots.append(PmeState(SpectralField(config.grid, coefficients=Nh), t0,
                                           initial.params))
        for i in range(1, n + 1):
            h = config.dt if i < n else config.T - (n - 1) * config.dt
            Nh = kernel.step(Nh, h)
            t = t0 + (config.T if i == n else i * config.dt)
            if i % config.diag_every == 0 or i == n:
                traj.records.append(_record(kernel, Nh, t, config))
            if config.snapshot_every and (i % config.snapshot_every == 0 or i == n):
                traj.snapshots.append(PmeState(SpectralField(config.grid, coefficients=Nh), t,
                                               initial.params))
    except NumericFailure as exc:
        exc.trajectory = traj
        raise
    traj.final = PmeState(SpectralField(config.grid, coefficients=Nh), t0 + config.T,
                          initial.params)
    return traj


def darcy_velocity(state):
    """-grad P(N) / N, one field per direction."""
    n = state.N_field.values
    if np.any(~(n > 0)):
        raise DomainError("density must be positive")
    P = SpectralField(state.grid, values=state.params.pressure(n))
    return tuple(SpectralField(state.grid, values=-g.values / n) for g in P.gradient())
