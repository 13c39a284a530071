"""Relaxation of damped Euler toward the porous-media equation: epsilon sweeps.

For each ``eps`` the diffusively rescaled Euler system and the porous-media
equation are integrated in lockstep from matched data (``rho_tilde(0) = N(0)``),
and three error columns are accumulated at every step::

    sup_rho    sup_t |rho_tilde - N|_{B^{d/p-1}_{p,1}}
    int_rho    int_0^T |rho_tilde - N|_{B^{d/p+1}_{p,1}} dt
    int_darcy  int_0^T |v_tilde + grad P(rho_tilde)/rho_tilde|_{B^{d/p}_{p,1}} dt

Time integrals use the trapezoid rule on the step grid.

Initial velocity options (``N0`` the density datum, ``u0 = -grad P(N0)/N0``):

``unscaled``       the velocity of the unscaled system is ``u0`` for every eps,
                   i.e. ``v_tilde(0) = u0 / eps`` (default);
``well-prepared``  ``v_tilde(0) = u0`` (on the Darcy manifold);
``ill-prepared``   ``v_tilde(0) = 0``.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigurationError, NumericFailure
from .euler_solver import (DiagnosticsRecord, EulerKernel, EulerState, NormSpec, Trajectory,
                           evaluate_norms)
from .littlewood_paley import (BesovIndex, SpectralField, TorusGrid, besov_from_blocks,
                               block_lp_norms, forward, inverse, random_band_field)
from .pme_solver import PmeKernel, PmeState
from .system_model import EulerParams, rho_from_c, sound_speed

VELOCITY_OPTIONS = ("unscaled", "well-prepared", "ill-prepared")
ERROR_COLUMNS = ("sup_rho", "int_rho", "int_darcy")
X_SUMMANDS = ("low_sup", "high_sup", "c_low_int", "v_low_int", "high_int", "damped_int",
              "v_l2")


def threshold(epsilon, k_p):
    """J_eps = floor(-log2 eps) + k_p."""
    if not epsilon > 0:
        raise ConfigurationError("epsilon must be positive")
    return int(math.floor(-math.log2(epsilon))) + int(k_p)


@dataclass(frozen=True)
class SweepConfig:
    epsilons: tuple = (0.2, 0.1, 0.05, 0.025)
    p: float = 2.0
    k_p: int = 2
    gamma: float = 2.0
    A: float = 0.5
    rho_bar: float = 1.0
    grid: TorusGrid = field(default_factory=lambda: TorusGrid(1, 512, 1.0))
    amplitude: float = 1e-2
    seed: int = 1
    T: float = 1.0
    velocity: str = "unscaled"
    band: tuple = (1, 2)
    cfl: float = 0.5
    dt_eps2: float = 0.25
    uniform_T: object = None

    def __post_init__(self):
        eps = tuple(float(e) for e in self.epsilons)
        if not eps or any(not (e > 0 and np.isfinite(e)) for e in eps):
            raise ConfigurationError("epsilons must be positive")
        object.__setattr__(self, "epsilons", eps)
        object.__setattr__(self, "band", tuple(int(b) for b in self.band))
        if self.p < 1:
            raise ConfigurationError(f"p must be >= 1, got {self.p}")
        if self.velocity not in VELOCITY_OPTIONS:
            raise ConfigurationError(f"velocity must be one of {VELOCITY_OPTIONS}")
        if not (self.amplitude > 0 and self.T > 0 and self.cfl > 0 and self.dt_eps2 > 0):
            raise ConfigurationError("amplitude, T, cfl and dt_eps2 must be positive")
        if self.uniform_T is not None and not self.uniform_T > 0:
            raise ConfigurationError("uniform_T must be positive")
        self.params(1.0)
        lo, hi = self.band
        if not 1 <= lo <= hi <= (self.grid.N - 1) // 3 / np.sqrt(self.grid.d):
            raise ConfigurationError(f"band {self.band} not resolvable on N={self.grid.N}")
        for e in eps:
            J = threshold(e, self.k_p)
            if not self.grid.resolvable(J):
                raise ConfigurationError(
                    f"threshold J={J} for eps={e:g} outside resolvable range {self.grid.j_range}")

    def params(self, epsilon):
        return EulerParams(self.gamma, self.A, self.rho_bar, epsilon)


def density_datum(config):
    rng = np.random.default_rng(config.seed)
    pert = random_band_field(config.grid, config.band[0], config.band[1], rng, config.amplitude)
    if config.amplitude >= config.rho_bar:
        raise ConfigurationError("amplitude too large for a positive density")
    return SpectralField(config.grid, values=config.rho_bar + pert.values)


def darcy_profile(N0, params):
    P = SpectralField(N0.grid, values=params.pressure(N0.values))
    return tuple(SpectralField(N0.grid, values=-g.values / N0.values) for g in P.gradient())


def matched_initial_data(config, epsilon):
    """Rescaled Euler state and porous-media state sharing the density datum."""
    params = config.params(epsilon)
    N0 = density_datum(config)
    c0 = SpectralField(config.grid, values=sound_speed(N0.values, params) - params.c_bar)
    u0 = darcy_profile(N0, params)
    if config.velocity == "unscaled":
        v0 = tuple(SpectralField(config.grid, values=u.values / epsilon) for u in u0)
    elif config.velocity == "well-prepared":
        v0 = u0
    else:
        v0 = tuple(SpectralField.zeros(config.grid) for _ in u0)
    return EulerState(c0, v0, 0.0, params), PmeState(N0, 0.0, params)


def original_velocity(config, epsilon):
    """Velocity datum of the unscaled system (``eps * v_tilde(0)``)."""
    state, _ = matched_initial_data(config, epsilon)
    return tuple(SpectralField(config.grid, values=epsilon * f.values) for f in state.v)


# -- X functional ----------------------------------------------------------

def x_norm_specs(d, p, J):
    """Diagnostic columns needed by :func:`x_functional` at exponent ``p``, threshold ``J``."""
    tag = f"X[p={p:g},J={J}]"
    sp = d / p
    sh = d / 2.0 + 1.0
    return (
        NormSpec(f"{tag}.c_low", "c", sp, p, 1.0, "low", J),
        NormSpec(f"{tag}.v_low", "v", sp, p, 1.0, "low", J),
        NormSpec(f"{tag}.c_high", "c", sh, 2.0, 1.0, "high", J),
        NormSpec(f"{tag}.v_high", "v", sh, 2.0, 1.0, "high", J),
        NormSpec(f"{tag}.c_low2", "c", sp + 2.0, p, 1.0, "low", J),
        NormSpec(f"{tag}.v_low1", "v", sp + 1.0, p, 1.0, "low", J),
        NormSpec(f"{tag}.W", "W", sp, p, 1.0),
        NormSpec(f"{tag}.v", "v", sp, p, 1.0),
    )


@dataclass(frozen=True)
class XSeries:
    times: np.ndarray
    summands: dict
    epsilon: float

    @property
    def total(self):
        return sum(self.summands[k] for k in X_SUMMANDS)

    def final(self):
        return {k: float(v[-1]) for k, v in self.summands.items()}


def _running_max(a):
    return np.maximum.accumulate(a)


def _running_trapz(a, t):
    out = np.zeros_like(a)
    if len(a) > 1:
        out[1:] = np.cumsum(0.5 * (a[1:] + a[:-1]) * np.diff(t))
    return out


def x_functional(trajectory, epsilon, p, J):
    """Running value of the uniform-bound functional X_{p,eps}(t) in unscaled variables.

    The seven summands are the low-frequency sup of ``(c - c_bar, v)``, the
    eps-weighted high-frequency sup, the eps-weighted low-frequency ``L^1``
    norm of ``c`` two derivatives up, the low-frequency ``L^1`` norm of
    ``v`` one derivative up, the high-frequency ``L^1`` norm, the ``L^1``
    norm of the damped mode ``v/eps + g c grad c`` and ``eps^{-1/2}`` times
    the ``L^2`` norm of ``v``.  A rescaled trajectory is converted with
    ``t = tau/eps`` and ``v = eps * v_tilde``; times are returned in
    unscaled units.
    """
    tag = f"X[p={p:g},J={J}]"
    col = {k: trajectory.column(f"{tag}.{k}")
           for k in ("c_low", "v_low", "c_high", "v_high", "c_low2", "v_low1", "W", "v")}
    eps = float(epsilon)
    tau = trajectory.times
    if trajectory.rescaled:
        t = tau / eps
        vs = eps  # v = eps * v_tilde
    else:
        t = tau
        vs = 1.0
    s = {
        "low_sup": _running_max(col["c_low"] + vs * col["v_low"]),
        "high_sup": eps * _running_max(col["c_high"] + vs * col["v_high"]),
        "c_low_int": eps * _running_trapz(col["c_low2"], t),
        "v_low_int": _running_trapz(vs * col["v_low1"], t),
        "high_int": _running_trapz(col["c_high"] + vs * col["v_high"], t),
        "damped_int": _running_trapz(col["W"], t),
        "v_l2": eps ** -0.5 * np.sqrt(_running_trapz((vs * col["v"]) ** 2, t)),
    }
    return XSeries(times=t, summands=s, epsilon=eps)


def data_norm(c0, v0, p, J, epsilon):
    """|(c0, v0)|^{low}_{B^{d/p}_{p,1}} + eps |(c0, v0)|^{high}_{B^{d/2+1}_{2,1}} (unscaled v0)."""
    grid = c0.grid
    js = grid.js
    U = np.stack([c0.coefficients] + [f.coefficients for f in v0])
    low = besov_from_blocks(block_lp_norms(U, grid, p), js, BesovIndex(grid.d / p, p, 1), js <= J + 1)
    high = besov_from_blocks(block_lp_norms(U, grid, 2.0), js, BesovIndex(grid.d / 2 + 1, 2, 1),
                             js >= J)
    return float(np.sum(low) + epsilon * np.sum(high))


# -- lockstep runs -----------------------------------------------------------

CFL_MARGIN = 0.9


def _step_count(config, kernel, U, epsilon, horizon, rescaled):
    # margin below the CFL limit of the initial state: speeds may grow slightly
    limit = CFL_MARGIN * kernel.cfl_limit(U, config.cfl)
    stiff = config.dt_eps2 * (epsilon ** 2 if rescaled else epsilon)
    dt = min(limit, stiff)
    n = max(1, int(math.ceil(horizon / dt)))
    return n, horizon / n


class _ErrorColumns:
    def __init__(self, params, grid, p):
        self.params = params
        self.grid = grid
        self.p = p
        d = grid.d
        self.idx = {
            "sup_rho": BesovIndex(d / p - 1.0, p, 1.0),
            "int_rho": BesovIndex(d / p + 1.0, p, 1.0),
            "int_darcy": BesovIndex(d / p, p, 1.0),
        }

    def __call__(self, U, Nh):
        g = self.grid
        c = inverse(U[0], g) + self.params.c_bar
        rho = rho_from_c(c, self.params)
        n = inverse(Nh, g)
        blocks = block_lp_norms(forward(rho - n, g), g, self.p)
        P_hat = forward(self.params.pressure(rho), g)
        v = inverse(U[1:], g)
        resid = np.stack([v[i] + inverse(ik * P_hat, g) / rho for i, ik in enumerate(g.derivative_symbols)])
        rblocks = block_lp_norms(forward(resid, g), g, self.p)
        return {
            "sup_rho": float(besov_from_blocks(blocks, g.js, self.idx["sup_rho"])),
            "int_rho": float(besov_from_blocks(blocks, g.js, self.idx["int_rho"])),
            "int_darcy": float(np.sum(besov_from_blocks(rblocks, g.js, self.idx["int_darcy"]))),
        }


def relaxation_run(config, epsilon, pme_reference=True):
    """Lockstep rescaled-Euler / porous-media run for one ``eps``.

    Returns a dict with the three error columns, the X functional (final
    summands and total), the data norm and the time-step information.
    With ``pme_reference=False`` the porous-media solution is compared
    with itself (harness self-test, all error columns vanish).
    """
    params = config.params(epsilon)
    grid = config.grid
    J = threshold(epsilon, config.k_p)
    euler0, pme0 = matched_initial_data(config, epsilon)
    ek = EulerKernel(params, epsilon, grid, rescaled=True)
    pk = PmeKernel(params, grid)
    U = euler0.spectral().copy()
    Nh = np.array(pme0.N_field.coefficients)
    n, dt = _step_count(config, ek, U, epsilon, config.T, rescaled=True)
    errs = _ErrorColumns(params, grid, config.p)
    specs = x_norm_specs(grid.d, config.p, J)
    damped_index = BesovIndex(grid.d / config.p, config.p, 1.0)
    records = []
    sup_rho = 0.0
    ints = {"int_rho": 0.0, "int_darcy": 0.0}
    prev = None
    try:
        for i in range(n + 1):
            if i:
                U = ek.if_rk4_step(U, dt)
                Nh = pk.step(Nh, dt)
                limit = ek.cfl_limit(U, config.cfl)
                if dt > limit:
                    raise NumericFailure(f"CFL violated at eps={epsilon:g}, step {i}")
            t = i * dt
            if pme_reference:
                e = errs(U, Nh)
            else:
                e = errs(_euler_from_density(Nh, params, grid, U), Nh)
            sup_rho = max(sup_rho, e["sup_rho"])
            if prev is not None:
                for k in ints:
                    ints[k] += 0.5 * dt * (prev[k] + e[k])
            prev = e
            norms, damped = evaluate_norms(ek, U, specs, damped_index)
            records.append(DiagnosticsRecord(t, float("nan"), float("nan"), norms, damped))
    except NumericFailure as exc:
        raise NumericFailure(f"eps={epsilon:g}: {exc}", dump=exc.dump) from exc
    traj = Trajectory(records=records, final=None, epsilon=epsilon, rescaled=True)
    X = x_functional(traj, epsilon, config.p, J)
    dn = data_norm(euler0.c_tilde, original_velocity(config, epsilon), config.p, J, epsilon)
    return {
        "eps": float(epsilon),
        "J": J,
        "steps": n,
        "dt": dt,
        "sup_rho": sup_rho,
        "int_rho": ints["int_rho"],
        "int_darcy": ints["int_darcy"],
        "X": float(X.total[-1]),
        "data_norm": dn,
        "X_ratio": float(X.total[-1]) / dn,
        "X_summands": X.final(),
    }


def _euler_from_density(Nh, params, grid, U):
    """Euler-like spectral state whose density is exactly N and velocity the Darcy profile."""
    n = inverse(Nh, grid)
    c = sound_speed(n, params) - params.c_bar
    P_hat = forward(params.pressure(n), grid)
    v = [-inverse(ik * P_hat, grid) / n for ik in grid.derivative_symbols]
    return forward(np.stack([c] + v), grid)


def fit_loglog(x, y):
    """Least-squares slope of log y against log x; residual is the max deviation."""
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    if lx.size < 3:
        raise ConfigurationError("a rate fit needs at least three points")
    if not np.all(np.isfinite(ly)):
        raise NumericFailure("non-positive or non-finite values in rate fit")
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = float(np.max(np.abs(ly - (slope * lx + intercept))))
    return float(slope), float(intercept), resid


@dataclass
class RateReport:
    rows: list
    slopes: dict
    intercepts: dict
    residuals: dict
    uniform_ratio: float
    config: SweepConfig

    def to_dict(self):
        return {
            "rows": self.rows,
            "fit": {k: {"slope": self.slopes[k], "intercept": self.intercepts[k],
                        "residual": self.residuals[k]} for k in self.slopes},
            "uniform_ratio": self.uniform_ratio,
        }


def _run_all(fn, config, workers):
    if workers and workers > 1 and len(config.epsilons) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, [config] * len(config.epsilons), config.epsilons))
    return [fn(config, e) for e in config.epsilons]


def run_sweep(config, fit=True, workers=1):
    """Run every eps of the sweep and fit log-log slopes of the error columns."""
    rows = _run_all(relaxation_run, config, workers)
    slopes, intercepts, residuals = {}, {}, {}
    if fit:
        eps = [r["eps"] for r in rows]
        for col in ERROR_COLUMNS:
            slopes[col], intercepts[col], residuals[col] = fit_loglog(eps, [r[col] for r in rows])
    ratios = [r["X_ratio"] for r in rows]
    return RateReport(rows=rows, slopes=slopes, intercepts=intercepts, residuals=residuals,
                      uniform_ratio=max(ratios) / min(ratios), config=config)


# -- uniform bound in unscaled variables ------------------------------------

def uniform_run(config, epsilon):
    """Unscaled Euler run up to ``uniform_T`` (default ``T/eps``, the sweep window)."""
    params = config.params(epsilon)
    grid = config.grid
    J = threshold(epsilon, config.k_p)
    horizon = config.uniform_T if config.uniform_T is not None else config.T / epsilon
    state, _ = matched_initial_data(config, epsilon)
    v0 = original_velocity(config, epsilon)
    ek = EulerKernel(params, epsilon, grid, rescaled=False)
    U = np.stack([state.c_tilde.coefficients] + [f.coefficients for f in v0])
    n, dt = _step_count(config, ek, U, epsilon, horizon, rescaled=False)
    specs = x_norm_specs(grid.d, config.p, J)
    damped_index = BesovIndex(grid.d / config.p, config.p, 1.0)
    records = []
    for i in range(n + 1):
        if i:
            U = ek.if_rk4_step(U, dt)
            if dt > ek.cfl_limit(U, config.cfl):
                raise NumericFailure(f"CFL violated at eps={epsilon:g}, step {i}")
        norms, damped = evaluate_norms(ek, U, specs, damped_index)
        records.append(DiagnosticsRecord(i * dt, float("nan"), float("nan"), norms, damped))
    traj = Trajectory(records=records, final=None, epsilon=epsilon, rescaled=False)
    X = x_functional(traj, epsilon, config.p, J)
    dn = data_norm(state.c_tilde, v0, config.p, J, epsilon)
    return {"eps": float(epsilon), "J": J, "T": horizon, "steps": n, "X": float(X.total[-1]),
            "data_norm": dn, "ratio": float(X.total[-1]) / dn, "X_summands": X.final()}


@dataclass
class UniformBoundReport:
    rows: list
    ratio: float
    limit: float = 10.0

    @property
    def passed(self):
        return self.ratio <= self.limit

    def to_dict(self):
        return {"rows": self.rows, "ratio": self.ratio, "limit": self.limit, "passed": self.passed}


def uniform_bound_check(config, workers=1, limit=10.0):
    rows = _run_all(uniform_run, config, workers)
    r = [row["ratio"] for row in rows]
    return UniformBoundReport(rows=rows, ratio=max(r) / min(r), limit=limit)


def sweep_config_dict(config):
    d = asdict(config)
    d["grid"] = {"d": config.grid.d, "N": config.grid.N, "L_len": config.grid.L_len}
    return d
