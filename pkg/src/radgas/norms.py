"""Norm functionals on periodic grids.

Derivative seminorms follow the "totality of k-th order derivatives"
convention: ``||d^k f||**2`` sums ``||d_{j1}...d_{jk} f||**2`` over all
ordered index tuples, which in Fourier space is the weight ``|xi|**(2k)``.
The Nyquist entry is zeroed in each first-order factor, so the spectral
route agrees exactly with repeated application of :func:`radgas.grid.gradient`.
"""

from __future__ import annotations

import numpy as np

from .grid import Grid, gradient, half_energy


def kd2(grid: Grid) -> np.ndarray:
    """Half-layout ``|xi|**2`` built from the Nyquist-zeroed wavenumbers."""
    return sum(kd**2 for kd in grid.half_lattice.kd)


def l1_norm(grid: Grid, f) -> float:
    return float(grid.cell_volume * np.sum(np.abs(f)))


def l2_norm(grid: Grid, f) -> float:
    return float(np.sqrt(grid.cell_volume * np.sum(np.square(f))))


def linf_norm(grid: Grid, f) -> float:
    """Grid maximum; a lower bound of the true supremum."""
    return float(np.max(np.abs(f)))


def weighted_l1_norm(grid: Grid, f, gamma: float) -> float:
    """``int (1 + |x|)**gamma |f| dx`` with ``|x|`` from the box center."""
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    f = grid.check_field(f)
    if gamma == 0:
        return l1_norm(grid, f)
    weight = (1.0 + np.sqrt(grid.radius2)) ** gamma
    return float(grid.cell_volume * np.sum(weight * np.abs(f)))


def _spectra(grid: Grid, f) -> list:
    f = np.asarray(f, dtype=float)
    if f.shape == grid.shape:
        return [grid.rfft(f)]
    grid.check_vector(f)
    return [grid.rfft(fj) for fj in f]


def seminorm(grid: Grid, f, k: int) -> float:
    """``||d^k f||_{L2}``; vector fields sum over components."""
    if k < 0:
        raise ValueError("derivative order must be nonnegative")
    weight = kd2(grid) ** k if k else None
    return float(np.sqrt(sum(half_energy(grid, F, weight) for F in _spectra(grid, f))))


def sobolev_norm(grid: Grid, f, s: int, k: int = 0) -> float:
    """``||d^k f||_{H^s}``, i.e. ``sqrt(sum_{m=k}^{k+s} ||d^m f||**2)``.

    With ``k = 0`` this is the plain ``H^s`` norm.
    """
    if s < 0 or k < 0:
        raise ValueError("orders must be nonnegative")
    w2 = kd2(grid)
    weight = sum(w2**m for m in range(k, k + s + 1))
    return float(np.sqrt(sum(half_energy(grid, F, weight) for F in _spectra(grid, f))))


def seminorms(grid: Grid, f, orders) -> dict:
    """Several seminorms from one transform."""
    spectra = _spectra(grid, f)
    w2 = kd2(grid)
    out = {}
    for k in orders:
        weight = w2**k if k else None
        out[k] = float(np.sqrt(sum(half_energy(grid, F, weight) for F in spectra)))
    return out


def sup_derivative(grid: Grid, f) -> float:
    """``|| d_x f ||_{L^inf}`` as the grid max of the gradient magnitude."""
    g = gradient(grid, f)
    return float(np.sqrt(np.max(np.sum(g**2, axis=0))))
