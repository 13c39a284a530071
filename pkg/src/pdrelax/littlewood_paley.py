"""Homogeneous Littlewood-Paley analysis on the periodic torus.

The domain is ``[0, 2*pi*L_len)^d`` sampled with ``N`` points per axis, so
the frequency lattice is ``Z^d / L_len``.  Dyadic blocks use the smooth
cutoff ``chi`` (equal to 1 on ``|xi| <= 3/4`` and 0 on ``|xi| >= 4/3``)
and ``phi(xi) = chi(xi/2) - chi(xi)``.  The zero mode belongs to no
homogeneous block.

On the torus the low-frequency end of every homogeneous sum is truncated
at the lattice spacing ``1/L_len``; results match the whole-space norms
only for data whose active blocks sit inside :attr:`TorusGrid.j_range`.
"""

import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigurationError, DomainError

CHI_INNER = 0.75
CHI_OUTER = 4.0 / 3.0


ZERO_BLOCK_TOL = 1e-12


class OutOfRangeBlockWarning(UserWarning):
    """A dyadic block outside the resolvable range was requested."""


def _f(t):
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def _psi(t):
    a = _f(t)
    b = _f(1.0 - t)
    return a / (a + b)


def chi(r):
    """Radial low-pass profile, smooth and nonincreasing."""
    r0 = np.abs(np.asarray(r, dtype=float))
    r = np.atleast_1d(r0)
    t = np.clip((CHI_OUTER - r) / (CHI_OUTER - CHI_INNER), 0.0, 1.0)
    out = _psi(t)
    out[r <= CHI_INNER] = 1.0
    out[r >= CHI_OUTER] = 0.0
    return out.reshape(r0.shape) if r0.ndim else float(out[0])


def phi(r):
    """Annular profile ``chi(r/2) - chi(r)`` supported in ``3/4 <= r <= 8/3``."""
    r = np.asarray(r, dtype=float)
    out = chi(0.5 * r) - chi(r)
    return out if np.ndim(out) else float(out)


@dataclass(frozen=True)
class TorusGrid:
    d: int
    N: int
    L_len: float = 1.0

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ConfigurationError(f"d must be 1 or 2, got {self.d}")
        if int(self.N) != self.N or self.N < 4 or (int(self.N) & (int(self.N) - 1)):
            raise ConfigurationError(f"N must be a power of two >= 4, got {self.N}")
        if not (self.L_len > 0 and np.isfinite(self.L_len)):
            raise ConfigurationError(f"L_len must be positive, got {self.L_len}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "L_len", float(self.L_len))

    @property
    def shape(self):
        return (self.N,) * self.d

    @property
    def dx(self):
        return 2.0 * np.pi * self.L_len / self.N

    @property
    def cell_volume(self):
        return self.dx ** self.d

    @property
    def volume(self):
        return (2.0 * np.pi * self.L_len) ** self.d

    @cached_property
    def coords(self):
        """Physical coordinates, one broadcastable array per axis."""
        x = np.arange(self.N) * self.dx
        return tuple(x.reshape([-1 if a == i else 1 for a in range(self.d)]) for i in range(self.d))

    @cached_property
    def mode_index(self):
        """Integer lattice indices in rfftn layout, one broadcastable array per axis."""
        out = []
        for i in range(self.d):
            if i == self.d - 1:
                n = np.arange(self.N // 2 + 1, dtype=float)
            else:
                n = np.fft.fftfreq(self.N, 1.0 / self.N)
            out.append(n.reshape([-1 if a == i else 1 for a in range(self.d)]))
        return tuple(out)

    @cached_property
    def wavenumbers(self):
        return tuple(n / self.L_len for n in self.mode_index)

    @cached_property
    def kmag(self):
        return np.sqrt(sum(np.broadcast_to(k, self.spectral_shape) ** 2 for k in self.wavenumbers))

    @property
    def spectral_shape(self):
        return (self.N,) * (self.d - 1) + (self.N // 2 + 1,)

    @cached_property
    def nyquist_free(self):
        """Mask removing the Nyquist planes (needed for odd derivatives)."""
        m = np.ones(self.spectral_shape, dtype=bool)
        for n in self.mode_index:
            m &= np.broadcast_to(np.abs(n) != self.N // 2, self.spectral_shape)
        return m

    @cached_property
    def dealias_mask(self):
        """Two-thirds rule: keep |n_i| <= (N-1)//3 on every axis."""
        cut = (self.N - 1) // 3
        m = np.ones(self.spectral_shape, dtype=bool)
        for n in self.mode_index:
            m &= np.broadcast_to(np.abs(n) <= cut, self.spectral_shape)
        return m

    @cached_property
    def derivative_symbols(self):
        """``i k_axis`` with the Nyquist planes removed."""
        return tuple(np.where(self.nyquist_free, 1j * np.broadcast_to(k, self.spectral_shape), 0.0)
                     for k in self.wavenumbers)

    @cached_property
    def laplacian_symbol(self):
        return -self.kmag ** 2

    @property
    def k_min(self):
        return 1.0 / self.L_len

    @property
    def k_max(self):
        return np.sqrt(self.d) * (self.N // 2) / self.L_len

    @cached_property
    def j_range(self):
        """Inclusive range ``(j_lo, j_hi)`` of blocks meeting the lattice."""
        j_lo = int(np.floor(np.log2(3.0 * self.k_min / 8.0))) + 1
        j_hi = int(np.ceil(np.log2(4.0 * self.k_max / 3.0))) - 1
        return j_lo, j_hi

    @property
    def js(self):
        lo, hi = self.j_range
        return np.arange(lo, hi + 1)

    def resolvable(self, j):
        lo, hi = self.j_range
        return lo <= j <= hi

    @cached_property
    def _multipliers(self):
        return {}

    def block_multiplier(self, j):
        key = ("phi", int(j))
        if key not in self._multipliers:
            m = phi(self.kmag * 2.0 ** (-int(j)))
            m.setflags(write=False)
            self._multipliers[key] = m
        return self._multipliers[key]

    def lowpass_multiplier(self, j):
        key = ("chi", int(j))
        if key not in self._multipliers:
            m = chi(self.kmag * 2.0 ** (-int(j)))
            m.setflags(write=False)
            self._multipliers[key] = m
        return self._multipliers[key]

    @cached_property
    def block_stack(self):
        """All block multipliers over :attr:`js`, shape (len(js), *spectral_shape)."""
        s = np.stack([self.block_multiplier(j) for j in self.js])
        s.setflags(write=False)
        return s

    def halved(self):
        """Same sampling on a torus of half the period (frequency index doubling)."""
        return TorusGrid(self.d, self.N, self.L_len / 2.0)


def forward(values, grid):
    return np.fft.rfftn(values, axes=tuple(range(-grid.d, 0)))


def inverse(coeffs, grid):
    return np.fft.irfftn(coeffs, s=grid.shape, axes=tuple(range(-grid.d, 0)))


class SpectralField:
    """Real periodic field with lazily synchronized Fourier coefficients."""

    __slots__ = ("grid", "_values", "_coeffs")

    def __init__(self, grid, values=None, coefficients=None):
        if (values is None) == (coefficients is None):
            raise ConfigurationError("give exactly one of values or coefficients")
        self.grid = grid
        self._values = None
        self._coeffs = None
        if values is not None:
            v = np.array(values, dtype=float, copy=True)
            if v.shape != grid.shape:
                raise ConfigurationError(f"values must have shape {grid.shape}, got {v.shape}")
            v.setflags(write=False)
            self._values = v
        else:
            c = np.array(coefficients, dtype=complex, copy=True)
            if c.shape != grid.spectral_shape:
                raise ConfigurationError(f"coefficients must have shape {grid.spectral_shape}")
            c.setflags(write=False)
            self._coeffs = c

    @classmethod
    def from_function(cls, grid, func):
        return cls(grid, values=func(*grid.coords) * np.ones(grid.shape))

    @classmethod
    def zeros(cls, grid):
        return cls(grid, values=np.zeros(grid.shape))

    @property
    def values(self):
        if self._values is None:
            v = inverse(self._coeffs, self.grid)
            v.setflags(write=False)
            self._values = v
        return self._values

    @property
    def coefficients(self):
        if self._coeffs is None:
            c = forward(self._values, self.grid)
            c.setflags(write=False)
            self._coeffs = c
        return self._coeffs

    def mean(self):
        return float(np.mean(self.values))

    def gradient(self):
        return tuple(SpectralField(self.grid, coefficients=ik * self.coefficients)
                     for ik in self.grid.derivative_symbols)

    def __add__(self, other):
        return SpectralField(self.grid, values=self.values + _vals(other))

    def __sub__(self, other):
        return SpectralField(self.grid, values=self.values - _vals(other))

    def __mul__(self, other):
        return SpectralField(self.grid, values=self.values * _vals(other))

    __rmul__ = __mul__

    def __neg__(self):
        return SpectralField(self.grid, values=-self.values)

    def __repr__(self):
        return f"SpectralField(d={self.grid.d}, N={self.grid.N}, L_len={self.grid.L_len})"


def _vals(x):
    return x.values if isinstance(x, SpectralField) else x


@dataclass(frozen=True)
class BesovIndex:
    s: float
    p: float = 2.0
    r: float = 1.0

    def __post_init__(self):
        p, r = float(self.p), float(self.r)
        if not p >= 1.0:
            raise ConfigurationError(f"Lebesgue exponent must be >= 1, got {p}")
        if r not in (1.0, 2.0, np.inf):
            raise ConfigurationError(f"summation exponent must be 1, 2 or inf, got {r}")
        object.__setattr__(self, "s", float(self.s))
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "r", r)


@dataclass(frozen=True)
class FrequencySplit:
    J: int

    def check(self, grid):
        if not grid.resolvable(self.J):
            raise ConfigurationError(f"threshold J={self.J} outside resolvable range {grid.j_range}")
        return self


def lp_norm(values, grid, p):
    """Rectangle-rule L^p norm on the torus; ``values`` may carry leading batch axes."""
    axes = tuple(range(-grid.d, 0))
    a = np.abs(values)
    if p == np.inf:
        return np.max(a, axis=axes)
    if p == 2.0:
        return np.sqrt(np.sum(a * a, axis=axes) * grid.cell_volume)
    return (np.sum(a ** p, axis=axes) * grid.cell_volume) ** (1.0 / p)


def block_lp_norms(coeffs, grid, p):
    """``|Delta_j z|_{L^p}`` for every j in ``grid.js``.

    ``coeffs`` has shape ``(..., *spectral_shape)``; the result has shape
    ``(..., len(grid.js))``.
    """
    coeffs = np.asarray(coeffs)
    lead = coeffs.shape[:coeffs.ndim - grid.d]
    blocks = inverse(np.expand_dims(coeffs, -grid.d - 1) * grid.block_stack, grid)
    out = lp_norm(blocks, grid, p)
    return out.reshape(lead + (len(grid.js),))


def besov_from_blocks(block_norms, js, idx, mask=None):
    w = 2.0 ** (idx.s * np.asarray(js, dtype=float)) * block_norms
    if mask is not None:
        w = np.where(mask, w, 0.0)
    if idx.r == 1.0:
        return np.sum(w, axis=-1)
    if idx.r == 2.0:
        return np.sqrt(np.sum(w * w, axis=-1))
    return np.max(w, axis=-1, initial=0.0)


def dyadic_block(field, j):
    """Delta_j z; outside the resolvable range a zero field is returned with a warning."""
    if not field.grid.resolvable(j):
        warnings.warn(f"block j={j} outside resolvable range {field.grid.j_range}",
                      OutOfRangeBlockWarning, stacklevel=2)
        return SpectralField.zeros(field.grid)
    return SpectralField(field.grid, coefficients=field.coefficients * field.grid.block_multiplier(j))


def low_cut(field, j):
    """S_j z = chi(2^-j D) z (keeps the zero mode)."""
    if not field.grid.resolvable(j):
        warnings.warn(f"block j={j} outside resolvable range {field.grid.j_range}",
                      OutOfRangeBlockWarning, stacklevel=2)
        return SpectralField.zeros(field.grid)
    return SpectralField(field.grid, coefficients=field.coefficients * field.grid.lowpass_multiplier(j))


def besov_norm(field, idx):
    """Homogeneous Besov norm over the resolvable blocks."""
    g = field.grid
    return float(besov_from_blocks(block_lp_norms(field.coefficients, g, idx.p), g.js, idx))


def split_norms(field, idx_low, idx_high, J):
    """Low norm over blocks ``j <= J+1`` and high norm over ``j >= J``."""
    g = field.grid
    FrequencySplit(J).check(g)
    js = g.js
    if idx_low.p == idx_high.p:
        bl = bh = block_lp_norms(field.coefficients, g, idx_low.p)
    else:
        bl = block_lp_norms(field.coefficients, g, idx_low.p)
        bh = block_lp_norms(field.coefficients, g, idx_high.p)
    low = besov_from_blocks(bl, js, idx_low, mask=js <= J + 1)
    high = besov_from_blocks(bh, js, idx_high, mask=js >= J)
    return float(low), float(high)


def gradient_lp_norm(field, p):
    """L^p norm of the pointwise Euclidean gradient magnitude."""
    grads = np.stack([g.values for g in field.gradient()])
    return float(lp_norm(np.sqrt(np.sum(grads ** 2, axis=0)), field.grid, p))


def bernstein_check(field, j, p):
    """|grad Delta_j z|_p / (2^j |Delta_j z|_p)."""
    block = dyadic_block(field, j)
    denom = float(lp_norm(block.values, field.grid, p))
    if denom <= ZERO_BLOCK_TOL * float(lp_norm(field.values - field.mean(), field.grid, p)):
        raise DomainError(f"block j={j} of the field vanishes")
    return gradient_lp_norm(block, p) / (2.0 ** j * denom)


def dyadic_dilation(field):
    """The field ``z(2x)`` realized by keeping the samples on the half-period torus."""
    return SpectralField(field.grid.halved(), values=field.values)


def random_band_field(grid, k_lo, k_hi, rng, amplitude=1.0):
    """Random real trigonometric polynomial with ``k_lo <= |n| <= k_hi`` (lattice indices),
    scaled so that its maximum absolute value is ``amplitude``."""
    nmag = np.sqrt(sum(np.broadcast_to(n, grid.spectral_shape) ** 2 for n in grid.mode_index))
    band = (nmag >= k_lo) & (nmag <= k_hi) & grid.nyquist_free
    coeffs = np.zeros(grid.spectral_shape, dtype=complex)
    m = int(np.count_nonzero(band))
    coeffs[band] = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    values = inverse(coeffs, grid)
    peak = np.max(np.abs(values))
    if peak == 0.0:
        raise ConfigurationError(f"band [{k_lo}, {k_hi}] contains no lattice modes")
    return SpectralField(grid, values=values * (amplitude / peak))
