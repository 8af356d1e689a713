import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import kv

from chill_lab import core_math as cm
from chill_lab.errors import GridTooCoarse
from chill_lab.grid import Grid1D
from chill_lab.operators import (F_of, F_prime, FieldOperatorInput, d2, duhamel_step,
                                 heat_kernel_decay_constant, heat_kernel_mass, heat_kernel_profile,
                                 heat_kernel_Q, kernel_residual, nonlinear_remainder)
from chill_lab.pde import linear_step

# 60-digit reference values of the Fourier integral (computed once with mpmath)
Q_REFERENCE = [
    (0.1, 15.0, -2.02493858684440721826e-10),
    (10.0, 39.2, 1.82924608372576022832e-06),
]


def _inp(grid, u):
    return FieldOperatorInput.on(grid, u)


@pytest.mark.parametrize("c", [1.0, -1.0])
def test_F_vanishes_on_wells(c):
    g = Grid1D(10, 201)
    assert np.all(F_of(_inp(g, np.full(g.N, c))) == 0.0)


def test_F_on_profile_second_order():
    errs = []
    for N in (401, 801, 1601):
        g = Grid1D(20, N)
        errs.append(np.max(np.abs(F_of(_inp(g, cm.omega(g.x))))))
    assert 3.5 < errs[0] / errs[1] < 4.5
    assert 3.5 < errs[1] / errs[2] < 4.5


def test_grid_too_coarse():
    g = Grid1D(40, 64)
    with pytest.raises(GridTooCoarse):
        F_of(_inp(g, cm.omega(g.x)))


def test_F_prime_matches_differences(rng):
    g = Grid1D(10, 201)
    x = g.x
    eps = 1e-5
    for _ in range(20):
        a, b, c = rng.uniform(0.2, 1.0, 3)
        u = np.tanh(a * (x - c)) * 0.9
        v = np.exp(-b * x * x) * np.cos(c * x)
        inp = _inp(g, u)
        fd = (F_of(_inp(g, u + eps * v)) - F_of(_inp(g, u - eps * v))) / (2 * eps)
        ex = F_prime(inp, v)
        assert np.max(np.abs(fd - ex)) <= 1e-6 * np.max(np.abs(ex))


def test_F_prime_at_well_is_constant_coefficient():
    g = Grid1D(10, 201)
    v = np.cos(0.7 * g.x) * np.exp(-0.1 * g.x ** 2)
    d2v = d2(v, g.dx)
    ref = -d2(d2v, g.dx) + 4 * d2v - 4 * v
    assert np.allclose(F_prime(_inp(g, np.ones(g.N)), v), ref, atol=1e-9)


def test_linearisation_consistency():
    g = Grid1D(15, 601)
    u = cm.omega(g.x)
    v = np.sin(g.x)
    base = F_of(_inp(g, u))
    lin = F_prime(_inp(g, u), v)
    errs = []
    for eps in (1e-3, 5e-4):
        errs.append(np.max(np.abs(F_of(_inp(g, u + eps * v)) - base - eps * lin)))
    assert 3.5 < errs[0] / errs[1] < 4.5
    rem = nonlinear_remainder(_inp(g, u), 1e-3 * v)
    assert np.allclose(rem, F_of(_inp(g, u + 1e-3 * v)) - base - 1e-3 * lin)


def test_translation_mode():
    res = []
    for N in (401, 801):
        g = Grid1D(20, N)
        res.append(np.max(np.abs(F_prime(_inp(g, cm.omega(g.x)), cm.omega_p(g.x)))))
    assert res[0] / res[1] > 3.5


def test_kernel_residual_convergence():
    r = []
    for dx in (0.1, 0.05, 0.025):
        g = Grid1D.with_spacing(20, dx)
        r.append(kernel_residual(cm.omega_p(g.x), g))
    assert r[1] <= 1e-4 * 100  # below 1e-2 at dx = 0.05
    assert 3.5 <= r[0] / r[1] <= 4.5 and 3.5 <= r[1] / r[2] <= 4.5


def test_kernel_residual_non_kernel_element():
    r = []
    for dx in (0.05, 0.025):
        g = Grid1D.with_spacing(20, dx)
        r.append(kernel_residual(cm.omega_pp(g.x), g))
    assert min(r) > 0.1 and abs(r[0] / r[1] - 1) < 0.05


def test_kernel_residual_edge_cases():
    g = Grid1D(20, 801)
    assert kernel_residual(np.zeros(g.N), g) == 0.0
    with pytest.raises(ValueError):
        kernel_residual(np.zeros(401), Grid1D(10, 401))


@pytest.mark.parametrize("tau", [0.05, 0.1, 1.0, 10.0, 50.0])
def test_Q_at_origin_bessel(tau):
    # int_0^inf exp(-tau xi^4 - 4 tau xi^2) = (1/2) e^{2 tau} K_{1/4}(2 tau)
    ref = 0.5 * math.exp(2 * tau) * kv(0.25, 2 * tau) / math.pi
    assert heat_kernel_Q(tau, 0.0) == pytest.approx(ref, rel=1e-11)


@pytest.mark.parametrize("tau,y,ref", Q_REFERENCE)
def test_Q_tail_reference(tau, y, ref):
    assert heat_kernel_Q(tau, y) == pytest.approx(ref, rel=1e-8)


@given(st.floats(0.05, 20), st.floats(0, 40))
def test_Q_even_and_methods_agree(tau, y):
    a = heat_kernel_Q(tau, y)
    assert heat_kernel_Q(tau, -y) == a
    assert abs(heat_kernel_Q(tau, y, method="fourier") - a) <= 1e-10 * heat_kernel_Q(tau, 0.0)


@pytest.mark.parametrize("tau", [0.1, 1.0, 10.0])
def test_Q_mass(tau):
    assert heat_kernel_mass(tau) == pytest.approx(1.0, abs=1e-8)


def test_Q_rejects_nonpositive_time():
    with pytest.raises(ValueError):
        heat_kernel_Q(0.0, 1.0)


def test_decay_constant_finite():
    c, y = heat_kernel_decay_constant(1.0)
    assert np.isfinite(c) and c <= 10.0
    for tau in (0.1, 10.0):
        c, _ = heat_kernel_decay_constant(tau)
        assert np.isfinite(c)


def test_semigroup():
    dx = 0.05
    a = heat_kernel_profile(0.3, dx)
    b = heat_kernel_profile(0.5, dx)
    ab = np.convolve(a, b) * dx
    c = heat_kernel_profile(0.8, dx)
    mid = len(ab) // 2
    half = len(c) // 2
    assert np.max(np.abs(ab[mid - half:mid + half + 1] - c)) <= 1e-6 * c.max()


def test_duhamel_spike_and_linearity():
    g = Grid1D(10, 401)
    tau = 0.5
    spike = np.zeros(g.N)
    spike[g.N // 2] = 1 / g.dx
    out = duhamel_step(spike, tau, g)
    assert np.allclose(out, math.exp(-4 * tau) * heat_kernel_Q(tau, g.x), atol=1e-12)
    g1 = np.exp(-g.x ** 2)
    g2 = np.sin(g.x) * np.exp(-0.5 * g.x ** 2)
    assert np.allclose(duhamel_step(g1 + g2, tau, g),
                       duhamel_step(g1, tau, g) + duhamel_step(g2, tau, g), atol=1e-14)


def test_duhamel_matches_linear_pde():
    g = Grid1D(15, 601)
    v0 = np.exp(-g.x ** 2)
    tau = 0.5
    ref = duhamel_step(v0, tau, g)
    errs = []
    for n in (100, 200):
        v = v0.copy()
        for _ in range(n):
            v = linear_step(v, tau / n, g)
        errs.append(np.max(np.abs(v - ref)))
    assert errs[1] < 0.6 * errs[0]
    assert errs[1] < 5e-3
