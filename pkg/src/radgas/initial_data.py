"""Initial data families.

Gaussian widths are per-axis standard deviations: a bump of width ``w`` is
``A exp(-|x - c|^2 / (2 w^2))``.  A width counts as resolved when the core
``[c - 2w, c + 2w]`` holds at least ``MIN_POINTS`` samples per axis.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .grid import Grid

MIN_POINTS = 8

INITIAL_NAMES = ("gaussian", "gaussian_mixture", "band_limited_random",
                 "derivative_of_gaussian")


def check_resolved(grid: Grid, width: float) -> None:
    if not width > 0:
        raise ConfigError(f"width must be positive, got {width}")
    points = 4.0 * width / grid.dx
    if points < MIN_POINTS - 1e-9:
        raise ConfigError(
            f"width {width:g} spans {points:.2f} grid points over +-2 widths; "
            f"need at least {MIN_POINTS} (dx = {grid.dx:g})"
        )


def _center(grid: Grid, center) -> np.ndarray:
    c = np.zeros(grid.n) if center is None else np.asarray(center, dtype=float).ravel()
    if c.size == 1 and grid.n > 1:
        c = np.full(grid.n, c[0])
    if c.size != grid.n:
        raise ConfigError(f"center needs {grid.n} coordinates, got {c.size}")
    if np.any(np.abs(c) >= 0.5 * grid.L):
        raise ConfigError("center lies outside the box")
    return c


def _shifted_r2(grid: Grid, c) -> np.ndarray:
    return sum((xj - cj) ** 2 for xj, cj in zip(grid.coords, c))


def gaussian(grid: Grid, amplitude: float = 0.1, width: float = 2.0, center=None) -> np.ndarray:
    check_resolved(grid, width)
    c = _center(grid, center)
    return amplitude * np.exp(-_shifted_r2(grid, c) / (2.0 * width**2))


def parse_components(text: str, n: int) -> list:
    """Parse ``"amp width c1 .. cn; amp width c1 .. cn; ..."``."""
    comps = []
    for chunk in text.split(";"):
        parts = chunk.split()
        if not parts:
            continue
        if len(parts) != 2 + n:
            raise ConfigError(
                f"mixture component {chunk.strip()!r} needs amplitude, width and {n} center coordinates"
            )
        vals = [float(p) for p in parts]
        comps.append((vals[0], vals[1], tuple(vals[2:])))
    if not comps:
        raise ConfigError("gaussian mixture has no components")
    return comps


def gaussian_mixture(grid: Grid, components, amplitude: float = 1.0) -> np.ndarray:
    """Sum of Gaussian bumps, scaled by ``amplitude``.

    ``components`` is a list of ``(amp, width, center)`` or the string form
    accepted by :func:`parse_components`.
    """
    if isinstance(components, str):
        components = parse_components(components, grid.n)
    u = np.zeros(grid.shape)
    for amp, width, center in components:
        u = u + gaussian(grid, amp, width, center)
    return amplitude * u


def band_limited_random(grid: Grid, seed: int = 0, band: int = 8, amplitude: float = 0.1) -> np.ndarray:
    """Random real field with integer mode indices ``|m_j| <= band``.

    Scaled so that ``max |u| = amplitude``.
    """
    band = int(band)
    if not 1 <= band < grid.N // 2:
        raise ConfigError(f"band must lie in [1, {grid.N // 2 - 1}], got {band}")
    rng = np.random.default_rng(seed)
    F = rng.standard_normal(grid.half_shape) + 1j * rng.standard_normal(grid.half_shape)
    m = np.abs(np.fft.fftfreq(grid.N, 1.0 / grid.N))
    keep = np.ones(grid.half_shape, dtype=bool)
    for j in range(grid.n):
        mj = np.arange(grid.N // 2 + 1) if j == grid.n - 1 else m
        shape = [1] * grid.n
        shape[j] = mj.size
        keep &= (mj <= band).reshape(shape)
    u = grid.irfft(F * keep)
    peak = np.max(np.abs(u))
    return amplitude * u / peak if peak > 0 else u


def derivative_of_gaussian(grid: Grid, amplitude: float = 0.1, width: float = 2.0,
                           center=None, axis: int = 0) -> np.ndarray:
    """``amplitude * w * d/dx_axis`` of a unit Gaussian, by spectral differentiation.

    The spectral route leaves the zero mode exactly empty, so the discrete
    mass vanishes to roundoff.
    """
    if not 0 <= axis < grid.n:
        raise ConfigError(f"axis {axis} out of range for n={grid.n}")
    g = gaussian(grid, 1.0, width, center)
    kd = grid.half_lattice.kd[axis]
    F = 1j * kd * grid.rfft(g)
    F.flat[0] = 0.0
    return amplitude * width * grid.irfft(F)


def moments(grid: Grid, u) -> tuple:
    """``(offset, variance)`` of the density ``|u|``.

    ``offset`` is the distance of its centroid from the box center and
    ``variance`` the largest per-axis central second moment.  Used to
    model the data as a Gaussian for the box-validity horizon.
    """
    w = np.abs(grid.check_field(u))
    total = w.sum()
    if total == 0:
        return 0.0, 0.0
    means = [float((w * xj).sum() / total) for xj in grid.coords]
    var = max(float((w * (xj - mj) ** 2).sum() / total) for xj, mj in zip(grid.coords, means))
    return float(np.sqrt(sum(m * m for m in means))), var


def build(grid: Grid, name: str, params: dict) -> np.ndarray:
    """Construct initial data by family name."""
    name = name.strip().lower()
    p = dict(params)
    try:
        if name == "gaussian":
            return gaussian(grid, float(p.get("amplitude", 0.1)), float(p.get("width", 2.0)),
                            p.get("center"))
        if name == "gaussian_mixture":
            if "components" not in p:
                raise ConfigError("gaussian_mixture needs 'components'")
            return gaussian_mixture(grid, p["components"], float(p.get("amplitude", 1.0)))
        if name == "band_limited_random":
            return band_limited_random(grid, int(p.get("seed", 0)), int(p.get("band", 8)),
                                       float(p.get("amplitude", 0.1)))
        if name == "derivative_of_gaussian":
            return derivative_of_gaussian(grid, float(p.get("amplitude", 0.1)),
                                          float(p.get("width", 2.0)), p.get("center"),
                                          int(p.get("axis", 0)))
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad parameter for {name}: {exc}") from exc
    raise ConfigError(f"unknown initial data {name!r}; choose from {INITIAL_NAMES}")
