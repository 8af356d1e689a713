import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import solve_banded
from scipy.optimize import brentq

from chill_lab import core_math as cm
from chill_lab.ansatz import AnsatzParams, assemble_z
from chill_lab.errors import BlowUpGuard, DomainTooSmall, GapCollapse
from chill_lab.pde import (EnergyReport, Grid1D, ScalarField, SolverConfig, apply_L0,
                           energy, energy_floor, implicit_bands, init_from_ansatz, run,
                           solve_implicit, step)
from chill_lab.toda import explicit_solution
from chill_lab.tracker import find_zeros


def dense_from_bands(bands):
    a, b, c, d, e = bands
    n = len(c)
    M = np.diag(c) + np.diag(b[1:], -1) + np.diag(a[2:], -2)
    M += np.diag(d[:-1], 1) + np.diag(e[:-2], 2)
    return M


@pytest.fixture(scope="module")
def small_grid():
    return Grid1D(8.0, 101)


def test_bands_match_operator(small_grid):
    # column j of I - dt L0 is (I - dt L0) e_j
    dt = 0.03
    M = dense_from_bands(implicit_bands(small_grid, dt))
    eye = np.eye(small_grid.N)
    ref = np.column_stack([eye[:, j] - dt * apply_L0(eye[:, j], small_grid)
                           for j in range(small_grid.N)])
    assert np.max(np.abs(M - ref)) <= 1e-12 * np.max(np.abs(ref))


@pytest.mark.parametrize("dt", [1e-4, 1e-2, 0.5])
def test_penta_solver_vs_scipy_and_dense(small_grid, dt, rng):
    bands = implicit_bands(small_grid, dt)
    a, b, c, d, e = bands
    n = len(c)
    ab = np.zeros((5, n))
    ab[0, 2:] = e[:-2]
    ab[1, 1:] = d[:-1]
    ab[2] = c
    ab[3, :-1] = b[1:]
    ab[4, :-2] = a[2:]
    rhs = rng.standard_normal(n)
    mine = solve_implicit(small_grid, dt, rhs)
    ref = solve_banded((2, 2), ab, rhs)
    dense = np.linalg.solve(dense_from_bands(bands), rhs)
    scale = np.max(np.abs(ref))
    assert np.max(np.abs(mine - ref)) <= 1e-10 * scale
    assert np.max(np.abs(mine - dense)) <= 1e-10 * scale


@given(st.floats(1e-5, 1.0), st.integers(0, 2**31 - 1))
def test_implicit_residual(dt, seed):
    g = Grid1D(6.0, 81)
    rhs = np.random.default_rng(seed).standard_normal(g.N)
    v = solve_implicit(g, dt, rhs)
    res = v - dt * apply_L0(v, g) - rhs
    assert np.max(np.abs(res)) <= 1e-9 * (1 + np.max(np.abs(v)))


@pytest.mark.parametrize("c", [-1.0, 1.0])
def test_pure_phases_are_fixed(c):
    g = Grid1D(10.0, 201)
    u = ScalarField(g, np.full(g.N, c), 0.0)
    for _ in range(5):
        u = step(u, 0.05)
    # only stencil round-off, of order eps / dx^4
    assert np.max(np.abs(u.u - c)) <= 1e4 * np.finfo(float).eps / g.dx ** 4
    assert energy(u) < 1e-20


def test_energy_of_profile_is_discretisation_error():
    errs = []
    for N in (401, 801):
        g = Grid1D(15.0, N)
        errs.append(energy(ScalarField(g, cm.omega(g.x))))
    # the profile is an exact critical point, so the discrete energy is O(dx^4)
    assert errs[0] < 1e-6
    assert errs[0] / errs[1] > 10


def test_energy_floor_scales():
    g = Grid1D(30.0, 1201)
    assert energy_floor(g) < 1e-15
    assert energy_floor(g.refined()) > energy_floor(g)
    assert energy_floor(g, 1.0) == pytest.approx(energy_floor(g) + 1e-12)


def test_single_kink_does_not_drift():
    g = Grid1D(20.0, 801)
    u = ScalarField(g, cm.omega(g.x - 0.3), 0.0)
    first = run(u, SolverConfig(t_end=2.0, n_snapshots=2, dt_rel=0)).final
    second = run(first, SolverConfig(t_end=12.0, n_snapshots=2, dt_rel=0))
    z1, z2 = find_zeros(first)[0], find_zeros(second.final)[0]
    assert abs(z2 - z1) / 10.0 <= 1e-6
    assert second.energy.rejected == 0


def test_first_order_in_time():
    g = Grid1D(20.0, 401)
    u0 = init_from_ansatz(2, 10.0, g)
    fin = [run(u0, SolverConfig(t_end=12.0, dt0=dt, dt_max=dt, growth=1.0,
                                n_snapshots=1)).final.u for dt in (0.02, 0.01, 0.005)]
    ratio = np.max(np.abs(fin[0] - fin[1])) / np.max(np.abs(fin[1] - fin[2]))
    assert 1.6 < ratio < 2.4


def test_init_matches_ansatz_zeros():
    g = Grid1D(30.0, 1201)
    u = init_from_ansatz(2, 10.0, g)
    assert u.t == 10.0
    z = find_zeros(u)
    params = AnsatzParams(2, 10.0)
    f = lambda s: float(assemble_z(params, np.array([s]))[0])
    ref = [brentq(f, zz - 0.2, zz + 0.2, xtol=1e-14) for zz in z]
    assert np.allclose(z, ref, atol=1e-6)
    assert np.allclose(z, -z[::-1], atol=1e-10)
    # corrections move the zeros away from the Toda positions, but not far
    assert np.allclose(z, explicit_solution(2, 10.0), atol=0.1)
    assert u.u[0] == pytest.approx(-1.0, abs=1e-8)
    assert u.u[-1] == pytest.approx(-1.0, abs=1e-8)


def test_init_k3_boundary_signs():
    g = Grid1D(35.0, 1401)
    u = init_from_ansatz(3, 30.0, g)
    assert len(find_zeros(u)) == 3
    assert u.u[0] == pytest.approx(-1.0, abs=1e-8)
    assert u.u[-1] == pytest.approx(1.0, abs=1e-8)


def test_init_rejects_small_domain_and_close_gaps():
    with pytest.raises(DomainTooSmall):
        init_from_ansatz(2, 10.0, Grid1D(10.0, 401))
    with pytest.raises(GapCollapse):
        init_from_ansatz(2, 10.0, Grid1D(30.0, 1201), min_gap=4.0)


def test_blow_up_guard():
    g = Grid1D(5.0, 101)
    with pytest.raises(BlowUpGuard):
        ScalarField(g, np.full(g.N, 1.6))
    bad = np.zeros(g.N)
    bad[3] = np.nan
    with pytest.raises(BlowUpGuard):
        ScalarField(g, bad)
    with pytest.raises(ValueError):
        ScalarField(g, np.zeros(g.N + 1))


@pytest.fixture(scope="module")
def short_run():
    g = Grid1D(30.0, 601)
    u0 = init_from_ansatz(2, 10.0, g)
    return u0, run(u0, SolverConfig(t_end=40.0, n_snapshots=10))


def test_short_run_energy_monotone(short_run):
    _, res = short_run
    assert res.energy.non_increasing(1e-9)
    assert res.energy.n_increase == 0
    assert np.all(res.energy.dissipation >= 0)


def test_short_run_keeps_symmetry(short_run):
    _, res = short_run
    for s in res.snapshots:
        assert np.max(np.abs(s.u - s.u[::-1])) <= 1e-8


def test_short_run_interfaces_separate(short_run):
    u0, res = short_run
    z0, z1 = find_zeros(u0), find_zeros(res.final)
    assert len(z1) == 2
    assert z1[1] - z1[0] > z0[1] - z0[0]
    assert [s.t for s in res.snapshots][-1] == 40.0


def test_snapshot_schedule():
    cfg = SolverConfig(t_end=100.0, n_snapshots=4, extra_times=(50.0, 500.0, 1.0))
    ts = cfg.snapshot_times(1.0)
    assert ts[-1] == 100.0
    assert 50.0 in ts and 500.0 not in ts and 1.0 not in ts
    assert np.all(np.diff(ts) > 0)
    assert np.allclose(np.diff(np.log(np.setdiff1d(ts, [50.0]))), np.log(100.0) / 4)
    lin = SolverConfig(t_end=2.0, n_snapshots=4).snapshot_times(0.0)
    assert np.allclose(lin, [0.5, 1.0, 1.5, 2.0])
    with pytest.raises(ValueError):
        cfg.snapshot_times(200.0)


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(dt0=0.0)
    with pytest.raises(ValueError):
        SolverConfig(growth=0.9)


def test_energy_report_floor():
    rep = EnergyReport(np.arange(3.0), np.array([1.0, 1.0 + 5e-10, 1.0]), np.zeros(3))
    assert rep.non_increasing(1e-9)
    rep = EnergyReport(np.arange(3.0), np.array([0.0, 1e-20, 0.0]), np.zeros(3), floor=1e-18)
    assert rep.non_increasing()
    rep = EnergyReport(np.arange(3.0), np.array([1.0, 1.1, 1.0]), np.zeros(3))
    assert not rep.non_increasing()


def test_callback_sees_every_snapshot():
    g = Grid1D(20.0, 401)
    u = ScalarField(g, cm.omega(g.x), 0.0)
    seen = []
    res = run(u, SolverConfig(t_end=1.0, n_snapshots=3), callback=lambda f: seen.append(f.t))
    assert seen == [s.t for s in res.snapshots]
