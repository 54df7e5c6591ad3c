import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import GRIDS, random_field, rel
from radgas.grid import Grid, gradient, laplacian
from radgas.initial_data import derivative_of_gaussian, gaussian
from radgas.integrator import geometric_times
from radgas.model import mass
from radgas.norms import l2_norm
from radgas.propagators import (DiffusionWave, box_validity_horizon, diffusion_wave,
                                heat_kernel, propagate_difference, propagate_G, propagate_heat,
                                verify_G_minus_G0, verify_heat_moment, verify_propagator_decay)


def _helm(g, f):
    k2 = g.half_lattice.k2
    return g.irfft(g.rfft(f) / (1 + k2))


def test_propagate_G_examples():
    g = Grid(1, 32, 2 * np.pi)
    f = random_field(g, 1)
    assert np.array_equal(propagate_G(g, f, 0.0), f)
    assert np.allclose(propagate_G(g, np.full(g.shape, 2.0), 5.0), 2.0, atol=1e-14)
    c = np.cos(g.coords[0])
    assert np.allclose(propagate_G(g, c, 2.0), math.exp(-1.0) * c, atol=1e-15)
    assert abs(math.exp(-1.0) - 0.367879) < 1e-6
    with pytest.raises(ValueError):
        propagate_G(g, f, -0.1)
    with pytest.raises(ValueError):
        propagate_heat(g, f, -1.0)


def test_semigroup_property(grid):
    f = random_field(grid, 2)
    assert rel(propagate_G(grid, propagate_G(grid, f, 0.4), 1.3), propagate_G(grid, f, 1.7)) < 1e-13
    assert rel(propagate_heat(grid, propagate_heat(grid, f, 0.2), 0.3),
               propagate_heat(grid, f, 0.5)) < 1e-13


def test_commutation_with_derivatives(grid):
    f = random_field(grid, 3)
    assert rel(gradient(grid, propagate_G(grid, f, 0.8)),
               np.stack([propagate_G(grid, gj, 0.8) for gj in gradient(grid, f)])) < 1e-12


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6), t=st.floats(0, 50), n=st.sampled_from([1, 2, 3]))
def test_G_contracts_L2(seed, t, n):
    g = GRIDS[n]
    f = random_field(g, seed)
    assert l2_norm(g, propagate_G(g, f, t)) <= l2_norm(g, f) * (1 + 1e-14)


def test_heat_of_gaussian_closed_form():
    g = Grid(2, 128, 60.0)
    s, t = 1.5, 2.0
    f = heat_kernel(g, s)
    out = propagate_heat(g, f, t)
    ref = heat_kernel(g, s + t)
    core = g.radius2 < 100
    assert np.max(np.abs(out[core] - ref[core]) / ref[core]) < 1e-8
    assert abs(mass(g, out) - mass(g, f)) < 1e-14
    assert np.array_equal(propagate_heat(g, f, 0), f)


def test_heat_kernel_identity_for_diffusion_wave():
    g = Grid(1, 512, 80.0)
    out = propagate_heat(g, heat_kernel(g, 1.0), 4.0)
    assert rel(out, heat_kernel(g, 5.0)) < 1e-12


def test_diffusion_wave_examples():
    g = Grid(2, 64, 40.0)
    u, q = diffusion_wave(g, 0.0, 3.0)
    assert not u.any() and not q.any()
    u, q = diffusion_wave(g, 2.0, 0.0)
    center = u[g.N // 2, g.N // 2]
    assert abs(center - 2.0 / (4 * np.pi)) < 1e-12
    assert abs(1 / (4 * np.pi) - 0.0795775) < 1e-7
    assert abs(mass(g, u) - 2.0) < 1e-10


@pytest.mark.parametrize("n", [1, 2, 3])
def test_diffusion_wave_l2_scaling(n):
    g = Grid(n, {1: 1024, 2: 256, 3: 96}[n], {1: 200.0, 2: 100.0, 3: 72.0}[n])
    dw = DiffusionWave(1.0, g)
    ts = np.array([3.0, 7.0, 15.0, 31.0])
    vals = [l2_norm(g, dw.evaluate(t)[0]) for t in ts]
    slope = np.polyfit(np.log1p(ts), np.log(vals), 1)[0]
    assert abs(slope + n / 4) < 0.01


def test_diffusion_wave_symmetric_and_q_identity():
    g = Grid(2, 64, 30.0)
    u, q = diffusion_wave(g, 1.3, 2.0)
    inner = u[1:, 1:]
    assert np.abs(inner - inner[::-1, :]).max() < 1e-12 * u.max()
    assert np.abs(inner - inner.T).max() < 1e-12 * u.max()
    # q* = -(1-Lap)^{-1} grad u* + (1-Lap)^{-1} Lap grad u*
    gu = gradient(g, u)
    rhs = np.stack([-_helm(g, gj) + _helm(g, laplacian(g, gj)) for gj in gu])
    assert np.abs(rhs - q).max() < 1e-11 * np.abs(q).max()


def test_box_validity_horizon_tail_rule():
    from scipy.special import erfc
    g = Grid(1, 256, 100.0)
    T = box_validity_horizon(g, 4.0, 5.0)
    sigma = math.sqrt(4.0 + 2 * T)
    assert abs(erfc((50.0 - 5.0) / (math.sqrt(2) * sigma)) - 1e-8) < 1e-12
    assert box_validity_horizon(g, 1.0, 60.0) == 0.0


def test_propagator_decay_narrow_gaussian_plateau():
    g = Grid(1, 2048, 512.0)
    phi = gaussian(g, 1.0, 0.5)
    horizon = box_validity_horizon(g, 0.25)
    times = geometric_times(horizon, 48)
    rep = verify_propagator_decay(g, phi, times, t_valid=horizon)
    assert rep.passed
    lo, hi = rep.window
    for e in rep.entries:
        r = e.ratios[(e.times >= lo) & (e.times <= hi)]
        assert r.max() / r.min() < 3
        assert np.isfinite(e.ratios[0]) and e.ratios[0] > 0   # t = 0: e^{-t/2} term
    assert set(rep.to_dict()["entries"][0]) >= {"t", "norm", "bound", "ratio", "verdict"}


def test_propagator_decay_zero_mass_is_faster():
    g = Grid(1, 2048, 512.0)
    times = geometric_times(800.0, 40)
    plain = verify_propagator_decay(g, gaussian(g, 1.0, 2.0), times)
    zero = verify_propagator_decay(g, derivative_of_gaussian(g, 1.0, 2.0), times)
    lo = plain.window[0]
    late = times >= lo
    grow = lambda e: np.polyfit(np.log1p(e.times[late]), np.log(e.norms[late]), 1)[0]
    assert grow(zero.entry(0)) < grow(plain.entry(0)) - 0.4


def test_propagator_decay_warns_beyond_horizon():
    g = Grid(1, 256, 64.0)
    with pytest.warns(UserWarning, match="box-validity"):
        verify_propagator_decay(g, gaussian(g, 1.0, 2.0), [0, 1, 10, 100], t_valid=20.0)


def test_G_minus_G0_single_mode_exact():
    g = Grid(1, 32, 2 * np.pi)
    c = np.cos(3 * g.coords[0])
    out = propagate_difference(g, c, 1.5)
    sym = math.exp(-9 * 1.5 / 10) - math.exp(-9 * 1.5)
    assert np.allclose(out, sym * c, atol=1e-15)


def test_G_minus_G0_gaussian_2d():
    g = Grid(2, 256, 256.0)
    u0 = gaussian(g, 1.0, 2.0)
    horizon = box_validity_horizon(g, 4.0)
    rep = verify_G_minus_G0(g, u0, geometric_times(horizon, 48), ks=(0,), t_valid=horizon)
    assert rep.entry(0).fit.exponent <= -1.4
    assert rep.passed


def test_G_minus_G0_zero_data():
    g = Grid(1, 64, 20.0)
    rep = verify_G_minus_G0(g, np.zeros(g.shape), geometric_times(10.0, 16))
    for e in rep.entries:
        assert not e.norms.any() and e.passed is None and e.note == "zero field"


def test_heat_moment_derivative_of_gaussian():
    g = Grid(1, 2048, 512.0)
    phi = derivative_of_gaussian(g, 1.0, 2.0)
    horizon = box_validity_horizon(g, 4.0)
    rep = verify_heat_moment(g, phi, geometric_times(horizon, 48), t_valid=horizon,
                             tolerance=0.05, two_sided=True)
    assert abs(rep.entry(0).fit.exponent + 0.75) < 0.05
    assert rep.passed


def test_heat_moment_closed_form_cross_check():
    # G0(t) d_x g_s = d_x g_{s+t}; its L2 norm is known exactly
    g = Grid(1, 1024, 200.0)
    phi = gradient(g, heat_kernel(g, 1.0))[0]
    for t in (2.0, 9.0):
        s = 1.0 + t
        exact = math.sqrt(1.0 / (8 * math.sqrt(2 * math.pi) * s**1.5))
        assert abs(l2_norm(g, propagate_heat(g, phi, t)) / exact - 1) < 1e-8


def test_heat_moment_shifted_difference():
    g = Grid(1, 2048, 512.0)
    phi = gaussian(g, 1.0, 2.0, [3.0]) - gaussian(g, 1.0, 2.0, [-3.0])
    phi = phi - mass(g, phi) / g.volume
    rep = verify_heat_moment(g, phi, geometric_times(900.0, 40), t_valid=900.0)
    assert rep.passed
    assert rep.entry(0).fit.exponent < -0.65


def test_heat_moment_zero_and_rejects_mass():
    g = Grid(1, 64, 20.0)
    rep = verify_heat_moment(g, np.zeros(g.shape), geometric_times(10.0, 12))
    assert all(e.passed is None for e in rep.entries)
    with pytest.raises(ValueError, match="zero-mass"):
        verify_heat_moment(g, gaussian(g, 1.0, 1.0), [0, 1])


def test_heat_EO1_bounded_ratio(grid):
    # |d^k G0(t) phi|_2 <= C_k t^{-k/2} |phi|_2 with C_k = sup_r r^k e^{-r^2}
    phi = random_field(grid, 11)
    for k in (1, 2):
        c = (k / (2 * math.e)) ** (k / 2)
        for t in (0.05, 0.5, 5.0):
            from radgas.norms import seminorm
            lhs = seminorm(grid, propagate_heat(grid, phi, t), k)
            assert lhs <= c * t ** (-k / 2) * l2_norm(grid, phi) * (1 + 1e-12)
