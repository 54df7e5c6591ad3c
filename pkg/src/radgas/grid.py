"""Periodic grids, discrete Fourier transforms and Fourier multipliers.

Transform convention: the forward transform is the unnormalized DFT

    F[k] = sum_x f[x] exp(-i xi_k . x),

the discrete analogue of ``int exp(-i x.xi) f(x) dx`` up to the cell volume,
and the inverse carries the ``1 / N**n`` factor.  With this convention the
discrete L2 norm satisfies

    dx**n * sum |f|**2 = (dx**n / N**n) * sum |F|**2.

Fields are plain float64 ndarrays of shape ``grid.shape``; vector fields
carry a leading axis of length ``grid.n``.  Spectral coefficients use the
full ``fftn`` layout in the public API; the ``rfft`` half layout is used
internally by the time stepper for speed.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, NamedTuple

import numpy as np
import scipy.fft as sfft

from .errors import GridError, SymmetryError

THREADS_ENV = "RADGAS_THREADS"

# imaginary residue allowed in an inverse transform, relative to the field
IMAG_TOLERANCE = 1e-10


def fft_workers() -> int:
    """Thread count for the FFT backend, read from ``RADGAS_THREADS``."""
    value = os.environ.get(THREADS_ENV, "").strip()
    if not value:
        return 1
    try:
        workers = int(value)
    except ValueError:
        raise GridError(f"{THREADS_ENV} must be an integer, got {value!r}") from None
    return workers if workers != 0 else 1


class Lattice(NamedTuple):
    """Frequency lattice arrays, broadcastable to the spectral shape.

    ``k`` holds the angular wavenumbers per axis, ``kd`` the same with the
    Nyquist entry zeroed (for odd-order derivative symbols) and ``k2`` is
    ``|xi|**2``.
    """

    k: tuple
    kd: tuple
    k2: np.ndarray


class Shells(NamedTuple):
    """Shell index per half-layout mode plus ``|xi|**2`` and its Nyquist-zeroed twin."""

    index: np.ndarray
    k2: np.ndarray
    kd2: np.ndarray


@dataclass(frozen=True)
class Grid:
    """Uniform periodic box ``[-L/2, L/2)**n`` with ``N`` points per axis."""

    n: int
    N: int
    L: float

    def __post_init__(self):
        if self.n not in (1, 2, 3):
            raise GridError(f"dimension must be 1, 2 or 3, got {self.n}")
        if int(self.N) != self.N or self.N < 4 or self.N % 2:
            raise GridError(f"N must be an even integer >= 4, got {self.N}")
        if not (np.isfinite(self.L) and self.L > 0):
            raise GridError(f"L must be positive, got {self.L}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "L", float(self.L))

    @property
    def dx(self) -> float:
        return self.L / self.N

    @property
    def shape(self) -> tuple:
        return (self.N,) * self.n

    @property
    def half_shape(self) -> tuple:
        return (self.N,) * (self.n - 1) + (self.N // 2 + 1,)

    @property
    def size(self) -> int:
        return self.N**self.n

    @property
    def volume(self) -> float:
        return self.L**self.n

    @property
    def cell_volume(self) -> float:
        return self.dx**self.n

    def _axis_shape(self, axis: int, length: int) -> tuple:
        shape = [1] * self.n
        shape[axis] = length
        return tuple(shape)

    @cached_property
    def coords(self) -> tuple:
        """Open-mesh coordinates, one broadcastable array per axis."""
        x = -0.5 * self.L + self.dx * np.arange(self.N)
        return tuple(x.reshape(self._axis_shape(j, self.N)) for j in range(self.n))

    @cached_property
    def radius2(self) -> np.ndarray:
        """``|x|**2`` measured from the box center."""
        r2 = np.zeros(self.shape)
        for xj in self.coords:
            r2 = r2 + xj**2
        return r2

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        return 2.0 * np.pi * sfft.fftfreq(self.N, d=self.dx)

    def _lattice(self, half: bool) -> Lattice:
        k_full = self.wavenumbers
        kd_full = k_full.copy()
        kd_full[self.N // 2] = 0.0
        ks, kds = [], []
        for j in range(self.n):
            if half and j == self.n - 1:
                kj = 2.0 * np.pi * sfft.rfftfreq(self.N, d=self.dx)
                kdj = kj.copy()
                kdj[-1] = 0.0
                length = self.N // 2 + 1
            else:
                kj, kdj, length = k_full, kd_full, self.N
            ks.append(kj.reshape(self._axis_shape(j, length)))
            kds.append(kdj.reshape(self._axis_shape(j, length)))
        k2 = sum(kj**2 for kj in ks)
        return Lattice(tuple(ks), tuple(kds), np.asarray(k2))

    @cached_property
    def lattice(self) -> Lattice:
        return self._lattice(half=False)

    @cached_property
    def half_lattice(self) -> Lattice:
        return self._lattice(half=True)

    @cached_property
    def half_weights(self) -> np.ndarray:
        """Multiplicity of each half-layout mode in the full spectrum."""
        m = self.N // 2 + 1
        w = np.full(m, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        return w.reshape(self._axis_shape(self.n - 1, m))

    @cached_property
    def shells(self) -> "Shells":
        """Grouping of half-layout modes by ``(|m|^2, |m_d|^2)``.

        ``m`` is the integer mode index and ``m_d`` the same with Nyquist
        entries zeroed.  Every radial symbol (and every seminorm weight) is
        constant on a shell, so linear-propagator norms reduce to sums over
        shells instead of over all ``N**n`` modes.
        """
        m_full = np.abs(sfft.fftfreq(self.N, d=1.0 / self.N)).astype(np.int64)
        a = np.zeros(self.half_shape, dtype=np.int64)
        b = np.zeros(self.half_shape, dtype=np.int64)
        for j in range(self.n):
            mj = np.arange(self.N // 2 + 1) if j == self.n - 1 else m_full
            mj = mj.reshape(self._axis_shape(j, mj.size))
            a = a + mj**2
            b = b + np.where(mj == self.N // 2, 0, mj**2)
        key = a * (self.n * (self.N // 2) ** 2 + 1) + b
        uniq, index = np.unique(key.ravel(), return_inverse=True)
        scale = (2.0 * np.pi / self.L) ** 2
        span = self.n * (self.N // 2) ** 2 + 1
        return Shells(index, scale * (uniq // span), scale * (uniq % span))

    def shell_power(self, F) -> np.ndarray:
        """``dx**n / N**n * sum |F|**2`` (with half-layout multiplicity) per shell."""
        sh = self.shells
        power = (np.abs(F) ** 2 * self.half_weights).ravel()
        return self.cell_volume / self.size * np.bincount(sh.index, power, sh.k2.size)

    def dealias_mask(self, half: bool = True) -> np.ndarray:
        """2/3-rule mask: keep modes with integer index ``|m| < N/3`` on every axis."""
        m_full = np.abs(sfft.fftfreq(self.N, d=1.0 / self.N))
        mask = np.ones(self.half_shape if half else self.shape, dtype=bool)
        for j in range(self.n):
            if half and j == self.n - 1:
                mj = np.arange(self.N // 2 + 1)
            else:
                mj = m_full
            keep = (3 * mj < self.N).reshape(self._axis_shape(j, mj.size))
            mask = mask & keep
        return mask

    @cached_property
    def dealias_half(self) -> np.ndarray:
        return self.dealias_mask(half=True)

    def check_field(self, f, name: str = "field") -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if f.shape != self.shape:
            raise GridError(f"{name} has shape {f.shape}, grid expects {self.shape}")
        return f

    def check_vector(self, v, name: str = "vector field") -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape != (self.n,) + self.shape:
            raise GridError(
                f"{name} has shape {v.shape}, grid expects {(self.n,) + self.shape}"
            )
        return v

    # -- fast real transforms (half layout) ---------------------------------

    def rfft(self, f: np.ndarray) -> np.ndarray:
        return sfft.rfftn(f, workers=fft_workers())

    def irfft(self, F: np.ndarray) -> np.ndarray:
        return sfft.irfftn(F, s=self.shape, workers=fft_workers())


@dataclass(frozen=True)
class Symbol:
    """A Fourier multiplier ``xi -> m(xi)`` applied diagonally.

    ``func`` receives a :class:`Lattice` and returns values broadcastable to
    the spectral shape.  ``even`` marks symbols that are real and even in
    ``xi``; those map real fields to real fields.
    """

    name: str
    func: Callable[[Lattice], np.ndarray]
    even: bool = True

    def on(self, grid: Grid, half: bool = False) -> np.ndarray:
        lat = grid.half_lattice if half else grid.lattice
        shape = grid.half_shape if half else grid.shape
        values = np.broadcast_to(self.func(lat), shape)
        if not np.all(np.isfinite(values)):
            raise GridError(f"symbol {self.name!r} is unbounded on the lattice")
        return values

    def at_zero(self, n: int):
        zeros = tuple(np.zeros(1) for _ in range(n))
        value = np.asarray(self.func(Lattice(zeros, zeros, np.zeros(1)))).ravel()[0]
        return value.item()

    def __mul__(self, other: "Symbol") -> "Symbol":
        f, g = self.func, other.func
        return Symbol(
            f"{self.name}*{other.name}",
            lambda lat: f(lat) * g(lat),
            even=self.even and other.even,
        )


def identity_symbol() -> Symbol:
    return Symbol("identity", lambda lat: np.ones_like(lat.k2))


def helmholtz_inverse() -> Symbol:
    """Symbol of ``(1 - Laplacian)**-1``."""
    return Symbol("(1-lap)^-1", lambda lat: 1.0 / (1.0 + lat.k2))


def laplacian_symbol() -> Symbol:
    return Symbol("lap", lambda lat: -lat.k2)


def partial_symbol(j: int) -> Symbol:
    return Symbol(f"d{j}", lambda lat: 1j * lat.kd[j], even=False)


def linear_symbol() -> Symbol:
    """Symbol of the linearized decoupled operator, ``-|xi|^2 / (1 + |xi|^2)``."""
    return Symbol("-k2/(1+k2)", lambda lat: -lat.k2 / (1.0 + lat.k2))


def semigroup_symbol(t: float) -> Symbol:
    return Symbol(f"G({t:g})", lambda lat: np.exp(-lat.k2 * t / (1.0 + lat.k2)))


def heat_symbol(t: float) -> Symbol:
    return Symbol(f"G0({t:g})", lambda lat: np.exp(-lat.k2 * t))


def forward_transform(grid: Grid, f) -> np.ndarray:
    """Unnormalized forward DFT of a real field (full layout).

    Phases are relative to the first sample ``x_0 = -L/2``, so a physical
    mode ``exp(i xi x)`` carries the extra factor ``exp(-i xi L/2)``.
    """
    f = grid.check_field(f)
    if not np.all(np.isfinite(f)):
        raise GridError("field contains non-finite values")
    return sfft.fftn(f, workers=fft_workers())


def inverse_transform(grid: Grid, F) -> np.ndarray:
    """Inverse DFT (with the ``1/N**n`` factor) of Hermitian coefficients.

    Imaginary residue up to ``IMAG_TOLERANCE`` times the field magnitude is
    discarded; anything larger raises :class:`SymmetryError`.
    """
    F = np.asarray(F)
    if F.shape != grid.shape:
        raise GridError(f"coefficients have shape {F.shape}, grid expects {grid.shape}")
    f = sfft.ifftn(F, workers=fft_workers())
    imag = np.max(np.abs(f.imag)) if f.size else 0.0
    scale = max(np.max(np.abs(f.real)), np.max(np.abs(F)) / grid.size, 1e-300)
    if imag > IMAG_TOLERANCE * scale:
        raise SymmetryError(
            f"coefficients are not Hermitian: imaginary residue {imag:.3e} "
            f"relative to magnitude {scale:.3e}"
        )
    return np.ascontiguousarray(f.real)


def apply_multiplier(grid: Grid, F, m) -> np.ndarray:
    """Pointwise ``m(xi) * F(xi)``; ``m`` is a :class:`Symbol` or an array."""
    F = np.asarray(F)
    if F.shape != grid.shape:
        raise GridError(f"coefficients have shape {F.shape}, grid expects {grid.shape}")
    values = m.on(grid) if isinstance(m, Symbol) else np.broadcast_to(m, grid.shape)
    if not np.all(np.isfinite(values)):
        raise GridError("multiplier is not bounded on the lattice")
    return values * F


def apply_symbol_real(grid: Grid, f, m: Symbol) -> np.ndarray:
    """Apply a real even symbol to a real field through the half layout."""
    f = grid.check_field(f)
    if not m.even:
        raise GridError(f"symbol {m.name!r} is not real and even")
    return grid.irfft(m.on(grid, half=True) * grid.rfft(f))


def gradient(grid: Grid, f) -> np.ndarray:
    f = grid.check_field(f)
    F = grid.rfft(f)
    lat = grid.half_lattice
    return np.stack([grid.irfft(1j * kd * F) for kd in lat.kd])


def divergence(grid: Grid, v) -> np.ndarray:
    v = grid.check_vector(v)
    lat = grid.half_lattice
    total = sum(1j * kd * grid.rfft(vj) for kd, vj in zip(lat.kd, v))
    return grid.irfft(total)


def laplacian(grid: Grid, f) -> np.ndarray:
    f = grid.check_field(f)
    return grid.irfft(-grid.half_lattice.k2 * grid.rfft(f))


def l2_from_spectrum(grid: Grid, F) -> float:
    """Discrete L2 norm of a field given its full-layout coefficients."""
    return float(np.sqrt(grid.cell_volume / grid.size * np.sum(np.abs(F) ** 2)))


def half_energy(grid: Grid, F, weight=None) -> float:
    """``dx**n * sum |f|**2`` from half-layout coefficients, optionally weighted."""
    power = np.abs(F) ** 2 * grid.half_weights
    if weight is not None:
        power = power * weight
    return float(grid.cell_volume / grid.size * np.sum(power))
