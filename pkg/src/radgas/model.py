"""The radiating-gas model in coupled and decoupled form.

Coupled form::

    u_t + sum_j d_j f_j(u) + div q = 0
    -grad div q + q + grad u = 0

Eliminating ``q = -(1 - Lap)^{-1} grad u`` gives the scalar equation

    u_t + sum_j d_j f_j(u) + u - (1 - Lap)^{-1} u = 0,

whose linear part has the symbol ``-|xi|^2 / (1 + |xi|^2)``.

Identities involving ``grad div`` versus ``Lap`` hold exactly only for
fields without Nyquist content, since odd derivatives zero that mode.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigError, RegimeError
from .grid import Grid, divergence, gradient
from .norms import l2_norm

FLUX_NAMES = ("burgers", "zero", "polynomial")


@dataclass(frozen=True)
class FluxSpec:
    """Polynomial fluxes ``f_j(u) = a_j u**2 + b_j u**3``.

    Both terms vanish to second order at ``u = 0``, so every instance
    satisfies ``f_j(0) = f_j'(0) = 0``.
    """

    name: str
    quadratic: tuple
    cubic: tuple

    def __post_init__(self):
        object.__setattr__(self, "quadratic", tuple(float(a) for a in self.quadratic))
        object.__setattr__(self, "cubic", tuple(float(b) for b in self.cubic))
        if len(self.quadratic) != len(self.cubic):
            raise ConfigError("quadratic and cubic coefficient lists differ in length")
        if not 1 <= len(self.quadratic) <= 3:
            raise ConfigError("flux needs one coefficient per axis (1 to 3 axes)")

    @classmethod
    def burgers(cls, n: int) -> "FluxSpec":
        return cls("burgers", (0.5,) * n, (0.0,) * n)

    @classmethod
    def zero(cls, n: int) -> "FluxSpec":
        return cls("zero", (0.0,) * n, (0.0,) * n)

    @classmethod
    def polynomial(cls, quadratic, cubic=None) -> "FluxSpec":
        quadratic = tuple(quadratic)
        cubic = tuple(cubic) if cubic is not None else (0.0,) * len(quadratic)
        return cls("polynomial", quadratic, cubic)

    @classmethod
    def from_name(cls, name: str, n: int, quadratic=None, cubic=None) -> "FluxSpec":
        name = name.strip().lower()
        if name == "burgers":
            return cls.burgers(n)
        if name == "zero":
            return cls.zero(n)
        if name == "polynomial":
            if quadratic is None:
                raise ConfigError("polynomial flux needs quadratic coefficients")
            flux = cls.polynomial(quadratic, cubic)
            if flux.n != n:
                raise ConfigError(f"polynomial flux has {flux.n} axes, grid has {n}")
            return flux
        raise ConfigError(f"unknown flux {name!r}; choose from {FLUX_NAMES}")

    @property
    def n(self) -> int:
        return len(self.quadratic)

    @property
    def is_zero(self) -> bool:
        return not any(self.quadratic) and not any(self.cubic)

    @property
    def has_cubic(self) -> bool:
        return any(self.cubic)

    def evaluate(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        u2, u3 = u * u, u * u * u
        return np.stack([a * u2 + b * u3 for a, b in zip(self.quadratic, self.cubic)])

    def derivative(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return np.stack(
            [2 * a * u + 3 * b * u * u for a, b in zip(self.quadratic, self.cubic)]
        )

    def vanishes_to_second_order(self) -> bool:
        zero = np.zeros(1)
        return bool(np.all(self.evaluate(zero) == 0) and np.all(self.derivative(zero) == 0))


def flux_divergence_hat(grid: Grid, U, flux: FluxSpec, dealias: bool = True):
    """Half-layout coefficients of ``sum_j d_j f_j(u)`` and the physical field.

    ``U`` holds the half-layout coefficients of ``u``.  With ``dealias`` the
    spectrum is truncated by the 2/3 rule before the product is formed and
    again after (exact for the quadratic term, approximate for the cubic).
    Returns ``(coefficients, u_used)`` where ``u_used`` is the physical field
    the fluxes were evaluated on.
    """
    mask = grid.dealias_half if dealias else None
    if mask is not None:
        U = U * mask
    u = grid.irfft(U)
    if flux.is_zero:
        return np.zeros(grid.half_shape, dtype=complex), u
    kd = grid.half_lattice.kd
    u2 = u * u
    F2 = grid.rfft(u2)
    sym2 = 1j * sum(a * kj for a, kj in zip(flux.quadratic, kd))
    out = sym2 * F2
    if flux.has_cubic:
        F3 = grid.rfft(u2 * u)
        out = out + 1j * sum(b * kj for b, kj in zip(flux.cubic, kd)) * F3
    if mask is not None:
        out = out * mask
    return out, u


def flux_divergence(grid: Grid, u, flux: FluxSpec, dealias: bool = True) -> np.ndarray:
    """``sum_j d_j f_j(u)`` in physical space."""
    u = grid.check_field(u)
    D, _ = flux_divergence_hat(grid, grid.rfft(u), flux, dealias)
    return grid.irfft(D)


def recover_q(grid: Grid, u) -> np.ndarray:
    """``q = -(1 - Lap)^{-1} grad u``."""
    u = grid.check_field(u)
    U = grid.rfft(u)
    lat = grid.half_lattice
    inv = 1.0 / (1.0 + lat.k2)
    return np.stack([grid.irfft(-1j * kd * inv * U) for kd in lat.kd])


def div_q(grid: Grid, u) -> np.ndarray:
    """``div q = -(1 - Lap)^{-1} Lap u``."""
    u = grid.check_field(u)
    k2 = grid.half_lattice.k2
    return grid.irfft(k2 / (1.0 + k2) * grid.rfft(u))


def linear_rhs(grid: Grid, u) -> np.ndarray:
    """``-u + (1 - Lap)^{-1} u``."""
    u = grid.check_field(u)
    k2 = grid.half_lattice.k2
    return grid.irfft(-k2 / (1.0 + k2) * grid.rfft(u))


def rhs_decoupled(grid: Grid, u, flux: FluxSpec, dealias: bool = True) -> np.ndarray:
    """``u_t = -sum_j d_j f_j(u) - u + (1 - Lap)^{-1} u``."""
    u = grid.check_field(u)
    U = grid.rfft(u)
    k2 = grid.half_lattice.k2
    with np.errstate(over="ignore", invalid="ignore"):
        D, _ = flux_divergence_hat(grid, U, flux, dealias)
        out = grid.irfft(-k2 / (1.0 + k2) * U - D)
    if not np.all(np.isfinite(out)):
        raise RegimeError("flux evaluation overflowed; data left the small-amplitude regime")
    return out


def coupled_residual(grid: Grid, u, u_t, q, flux: FluxSpec, dealias: bool = True):
    """Residuals ``(r1, r2)`` of the coupled system.

    ``r1 = u_t + sum_j d_j f_j(u) + div q`` and
    ``r2 = -grad div q + q + grad u``.
    """
    u = grid.check_field(u)
    u_t = grid.check_field(u_t, "u_t")
    q = grid.check_vector(q, "q")
    dq = divergence(grid, q)
    r1 = u_t + flux_divergence(grid, u, flux, dealias) + dq
    r2 = -gradient(grid, dq) + q + gradient(grid, u)
    return r1, r2


def mass(grid: Grid, u) -> float:
    """Discrete integral ``dx**n * sum(u)``, equal to ``dx**n`` times the zero mode."""
    return float(grid.cell_volume * np.sum(u))


def helmholtz_kernel(grid: Grid) -> np.ndarray:
    """Sampled kernel ``K`` of ``(1 - Lap)^{-1}``, centered in the box.

    Normalized as a density, so ``dx**n * sum(K)`` equals the symbol at zero.
    """
    k2 = grid.half_lattice.k2
    ones = np.zeros(grid.half_shape)
    ones[...] = 1.0 / (1.0 + k2)
    w = grid.irfft(ones)
    return np.fft.fftshift(w) / grid.cell_volume


@dataclass
class ModelState:
    grid: Grid
    t: float
    u: np.ndarray

    @cached_property
    def q(self) -> np.ndarray:
        return recover_q(self.grid, self.u)

    @property
    def mass(self) -> float:
        return mass(self.grid, self.u)


def trajectory_residuals(grid: Grid, times, fields, flux: FluxSpec, dealias: bool = True):
    """Coupled residuals along a sampled trajectory.

    ``u_t`` is reconstructed by centered differences (second order on a
    uniform sampling), ``q`` by :func:`recover_q`.  Returns arrays of the
    discrete L2 norms of ``r1`` and ``r2`` at interior samples.
    """
    times = np.asarray(times, dtype=float)
    r1_norms, r2_norms = [], []
    for i in range(1, len(times) - 1):
        u = fields[i]
        u_t = (fields[i + 1] - fields[i - 1]) / (times[i + 1] - times[i - 1])
        r1, r2 = coupled_residual(grid, u, u_t, recover_q(grid, u), flux, dealias)
        r1_norms.append(l2_norm(grid, r1))
        r2_norms.append(l2_norm(grid, r2))
    return np.array(r1_norms), np.array(r2_norms)
