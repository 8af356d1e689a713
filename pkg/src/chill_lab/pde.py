"""Time integration of the fourth-order flow u_t = F(u) on a truncated interval.

The scheme is linearly implicit: the constant-coefficient operator
L0 = -D2^2 + a D2 - b I (the linearisation at u = +-1 for a = b = 4) is taken
implicitly and the remainder F(u) - L0 u explicitly.  With even reflection at
both ends the discrete D2 is symmetric for the trapezoid inner product, so the
semi-discrete system is an exact gradient flow of the trapezoid energy.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numba
import numpy as np

from . import core_math as cm
from .ansatz import AnsatzParams, assemble_z
from .errors import BlowUpGuard, DomainTooSmall, GapCollapse, LinearSolveFailure
from .grid import Grid1D
from .operators import FieldOperatorInput, F_of, chemical_potential
from .toda import explicit_gap_solution, explicit_solution

__all__ = ["Grid1D", "ScalarField", "SolverConfig", "EnergyReport", "RunResult",
           "init_from_ansatz", "step", "linear_step", "run", "energy", "energy_floor",
           "dissipation", "implicit_bands", "solve_implicit", "apply_L0"]

BLOW_UP = 1.5
#: clearance between the outermost interface and the boundary
DOMAIN_MARGIN = 12.0
#: default smallest admissible initial gap (see README for why not 4)
MIN_GAP = 3.0


@dataclass(frozen=True)
class ScalarField:
    """Samples of u on a grid at time ``t``."""
    grid: Grid1D
    u: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        if u.shape != (self.grid.N,):
            raise ValueError(f"expected {self.grid.N} samples, got shape {u.shape}")
        if not np.all(np.isfinite(u)):
            raise BlowUpGuard(f"non-finite samples at t={self.t}")
        if np.max(np.abs(u)) > BLOW_UP:
            raise BlowUpGuard(f"max|u| = {np.max(np.abs(u)):.3g} exceeds {BLOW_UP} at t={self.t}")
        object.__setattr__(self, "u", u)

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    def mirrored(self) -> "ScalarField":
        return ScalarField(self.grid, self.u[::-1].copy(), self.t)


@dataclass(frozen=True)
class SolverConfig:
    """Step-size schedule and output times.

    Parameters
    ----------
    t_end : float
        Final time (absolute, same clock as the ansatz).
    dt0, dt_max, growth : float
        Initial step, cap and geometric growth factor. The cap is further
        limited to ``dt_rel * t``.
    error_control : bool
        Reject and halve a step when the energy rises by more than
        ``energy_tol * |W|``.
    splitting : (float, float)
        Constants (a, b) of L0 = -D2^2 + a D2 - b.
    n_snapshots : int
        Number of log-spaced snapshot times in (t_start, t_end].
    extra_times : tuple
        Additional snapshot times merged into the schedule.
    energy_every : int
        Record the energy every this many steps (snapshots always record).
    """
    t_end: float = 5e3
    dt0: float = 1e-3
    dt_max: float = 0.05
    growth: float = 1.02
    error_control: bool = True
    splitting: tuple = (4.0, 4.0)
    n_snapshots: int = 200
    extra_times: tuple = ()
    dt_rel: float = 0.01
    energy_tol: float = 1e-9
    energy_every: int = 10
    trend_steps: int = 200
    max_steps: int = 10_000_000
    dt_min: float = 1e-10

    def __post_init__(self):
        if not (self.dt0 > 0 and self.dt_max > 0 and self.t_end > 0):
            raise ValueError("step sizes and t_end must be positive")
        if self.growth < 1.0:
            raise ValueError("growth factor must be >= 1")
        if self.n_snapshots < 1:
            raise ValueError("need at least one snapshot")

    def snapshot_times(self, t_start: float) -> np.ndarray:
        if self.t_end <= t_start:
            raise ValueError(f"t_end={self.t_end} must exceed the start time {t_start}")
        if t_start > 0:
            ts = np.geomspace(t_start, self.t_end, self.n_snapshots + 1)[1:]
        else:
            ts = np.linspace(t_start, self.t_end, self.n_snapshots + 1)[1:]
        extra = [s for s in self.extra_times if t_start < s <= self.t_end]
        ts = np.unique(np.concatenate([ts, extra, [self.t_end]]))
        return ts


@dataclass
class EnergyReport:
    """Energy and dissipation samples along a run."""
    t: np.ndarray
    energy: np.ndarray
    dissipation: np.ndarray
    max_rel_increase: float = 0.0
    n_increase: int = 0
    steps: int = 0
    rejected: int = 0
    floor: float = 0.0

    def non_increasing(self, tol: float = 1e-9) -> bool:
        """True when no recorded rise exceeds ``tol * |W|`` plus the round-off floor."""
        de = np.diff(self.energy)
        return bool(np.all(de <= tol * np.abs(self.energy[:-1]) + self.floor))

    def to_csv(self, path) -> None:
        data = np.column_stack([self.t, self.energy, self.dissipation])
        np.savetxt(path, data, delimiter=",", header="t,energy,dissipation",
                   comments="", fmt="%.17g")


@dataclass
class RunResult:
    snapshots: list
    energy: EnergyReport
    final: ScalarField

    def __iter__(self):
        return iter((self.snapshots, self.energy))


# ---------------------------------------------------------------------------
# initial data

def init_from_ansatz(k: int, T: float, grid: Grid1D, min_gap: float = MIN_GAP,
                     sigma: float = 1.0, alpha: float = 2.0) -> ScalarField:
    """Sample the corrected approximate solution at time ``T``."""
    if k >= 2:
        gaps = explicit_gap_solution(k, T)
        if np.min(gaps) < min_gap:
            raise GapCollapse(f"smallest gap {np.min(gaps):.3f} at T={T} is below {min_gap}")
        edge = explicit_solution(k, T)[-1]
    else:
        edge = 0.0
    if grid.L < edge + DOMAIN_MARGIN:
        raise DomainTooSmall(f"L={grid.L} but need at least {edge + DOMAIN_MARGIN:.3f}")
    params = AnsatzParams(k, T, sigma=sigma, alpha=alpha)
    u = assemble_z(params, grid.x)
    return ScalarField(grid, u, T)


# ---------------------------------------------------------------------------
# banded algebra

@numba.njit(cache=True)
def _penta_factor(a, b, c, d, e):
    # Doolittle LU of a pentadiagonal matrix stored by rows:
    # A[i, i-2] = a[i], A[i, i-1] = b[i], A[i, i] = c[i], A[i, i+1] = d[i], A[i, i+2] = e[i]
    n = c.shape[0]
    l2 = np.zeros(n)
    l1 = np.zeros(n)
    u0 = np.zeros(n)
    u1 = np.zeros(n)
    u2 = e.copy()
    for i in range(n):
        m2 = 0.0
        m1 = 0.0
        if i >= 2:
            m2 = a[i] / u0[i - 2]
        if i >= 1:
            s = b[i]
            if i >= 2:
                s -= m2 * u1[i - 2]
            m1 = s / u0[i - 1]
        p = c[i]
        if i >= 2:
            p -= m2 * u2[i - 2]
        if i >= 1:
            p -= m1 * u1[i - 1]
        q = d[i]
        if i >= 1:
            q -= m1 * u2[i - 1]
        l2[i] = m2
        l1[i] = m1
        u0[i] = p
        u1[i] = q
    return l2, l1, u0, u1, u2


@numba.njit(cache=True)
def _penta_solve(l2, l1, u0, u1, u2, r):
    n = r.shape[0]
    y = np.empty(n)
    for i in range(n):
        s = r[i]
        if i >= 1:
            s -= l1[i] * y[i - 1]
        if i >= 2:
            s -= l2[i] * y[i - 2]
        y[i] = s
    x = np.empty(n)
    for i in range(n - 1, -1, -1):
        s = y[i]
        if i + 1 < n:
            s -= u1[i] * x[i + 1]
        if i + 2 < n:
            s -= u2[i] * x[i + 2]
        x[i] = s / u0[i]
    return x


@lru_cache(maxsize=16)
def _d2_squared_bands(N: int, dx: float):
    """Rows of D2 @ D2 for the reflecting second difference, as five bands."""
    h2 = dx * dx
    lo = np.ones(N) / h2          # D2[i, i-1]
    di = -2.0 * np.ones(N) / h2   # D2[i, i]
    up = np.ones(N) / h2          # D2[i, i+1]
    up[0] = 2.0 / h2
    lo[-1] = 2.0 / h2
    lo[0] = 0.0
    up[-1] = 0.0
    # (D2 D2)[i, j] = sum_m D2[i, m] D2[m, j]
    a = np.zeros(N)
    b = np.zeros(N)
    c = np.zeros(N)
    d = np.zeros(N)
    e = np.zeros(N)
    a[2:] = lo[2:] * lo[1:-1]
    b[1:] = lo[1:] * di[:-1] + di[1:] * lo[1:]
    c[:] = di * di
    c[1:] += lo[1:] * up[:-1]
    c[:-1] += up[:-1] * lo[1:]
    d[:-1] = di[:-1] * up[:-1] + up[:-1] * di[1:]
    e[:-2] = up[:-2] * up[1:-1]
    return (a, b, c, d, e), (lo, di, up)


def implicit_bands(grid: Grid1D, dt: float, splitting=(4.0, 4.0)):
    """Five bands of I - dt L0 with L0 = -D2^2 + a D2 - b."""
    if grid.bc != "reflect":
        raise ValueError("the banded solver needs the reflecting boundary rule")
    sa, sb = splitting
    (a, b, c, d, e), (lo, di, up) = _d2_squared_bands(grid.N, grid.dx)
    A = dt * a
    B = dt * (b - sa * lo)
    C = 1.0 + dt * (c - sa * di + sb)
    D = dt * (d - sa * up)
    E = dt * e
    return A, B, C, D, E


@lru_cache(maxsize=64)
def _factor(N: int, L: float, dt: float, splitting: tuple):
    bands = implicit_bands(Grid1D(L, N), dt, splitting)
    fac = _penta_factor(*bands)
    u0 = fac[2]
    if not np.all(np.isfinite(u0)) or np.min(np.abs(u0)) == 0.0:
        raise LinearSolveFailure(f"singular pivot in the implicit matrix (dt={dt})")
    return fac


def solve_implicit(grid: Grid1D, dt: float, rhs, splitting=(4.0, 4.0)) -> np.ndarray:
    """Solve (I - dt L0) v = rhs with a cached factorisation."""
    if grid.bc != "reflect":
        raise ValueError("the banded solver needs the reflecting boundary rule")
    fac = _factor(grid.N, grid.L, float(dt), tuple(splitting))
    v = _penta_solve(*fac, np.ascontiguousarray(rhs, dtype=float))
    if not np.all(np.isfinite(v)):
        raise LinearSolveFailure("non-finite solution of the implicit system")
    return v


def apply_L0(v, grid: Grid1D, splitting=(4.0, 4.0)) -> np.ndarray:
    from .operators import d2
    sa, sb = splitting
    d2v = d2(v, grid.dx, grid.bc)
    return -d2(d2v, grid.dx, grid.bc) + sa * d2v - sb * np.asarray(v)


# ---------------------------------------------------------------------------
# stepping

def step(u: ScalarField, dt: float, cfg: SolverConfig | None = None) -> ScalarField:
    """One linearly implicit Euler step of size ``dt``."""
    cfg = cfg or SolverConfig()
    if dt <= 0:
        raise ValueError("dt must be positive")
    g = u.grid
    inp = FieldOperatorInput.on(g, u.u)
    rhs = u.u + dt * (F_of(inp) - apply_L0(u.u, g, cfg.splitting))
    return ScalarField(g, solve_implicit(g, dt, rhs, cfg.splitting), u.t + dt)


def linear_step(v, dt: float, grid: Grid1D, splitting=(4.0, 4.0)) -> np.ndarray:
    """Implicit Euler step of the linear problem v_t = L0 v."""
    return solve_implicit(grid, dt, v, splitting)


def energy(u: ScalarField) -> float:
    """Trapezoid quadrature of (u_xx - W'(u))^2 / 2."""
    w = chemical_potential(FieldOperatorInput.on(u.grid, u.u))
    return 0.5 * float(np.trapezoid(w * w, dx=u.grid.dx))


def energy_floor(grid: Grid1D, e0: float = 0.0) -> float:
    """Energy changes below this level are round-off.

    The discrete w carries an absolute error of a few eps / dx^2, which bounds
    the resolvable energy change; a 1e-12 fraction of the initial energy is
    added for long runs.
    """
    dw = 64.0 * np.finfo(float).eps / grid.dx ** 2
    return 2.0 * grid.L * dw * dw + 1e-12 * abs(e0)


def dissipation(u_old: ScalarField, u_new: ScalarField) -> float:
    """Trapezoid estimate of int |u_t|^2 from two consecutive states."""
    dt = u_new.t - u_old.t
    ut = (u_new.u - u_old.u) / dt
    return float(np.trapezoid(ut * ut, dx=u_new.grid.dx))


def run(u0: ScalarField, cfg: SolverConfig, callback=None) -> RunResult:
    """Integrate from ``u0.t`` to ``cfg.t_end``.

    The step grows by ``cfg.growth`` while the dissipation rate is below ten
    times its running trend and not increasing; it is capped by
    ``min(dt_max, dt_rel * t)`` and shortened to land on snapshot times.
    ``callback(field)`` is called at each snapshot.
    """
    times = cfg.snapshot_times(u0.t)
    u = u0
    dt = cfg.dt0
    e_now = energy(u)
    floor = energy_floor(u.grid, e_now)
    rec_t, rec_e, rec_d = [u.t], [e_now], [0.0]
    snaps = []
    trend = None
    d_prev = np.inf
    max_inc = 0.0
    n_inc = 0
    steps = rejected = 0
    since_rec = 0
    alpha = 1.0 / cfg.trend_steps
    for target in times:
        while u.t < target * (1 - 1e-14):
            if steps + rejected >= cfg.max_steps:
                raise BlowUpGuard(f"step budget {cfg.max_steps} exhausted at t={u.t}")
            cap = min(cfg.dt_max, max(cfg.dt_rel * u.t, cfg.dt0)) if cfg.dt_rel > 0 else cfg.dt_max
            dt = min(dt, cap)
            h = min(dt, target - u.t)
            # snap onto the target when the remainder would be a sliver
            if target - u.t - h < 1e-3 * h:
                h = target - u.t
            new = step(u, h, cfg)
            if h == target - u.t:
                new = ScalarField(new.grid, new.u, float(target))
            e_new = energy(new)
            rise = e_new - e_now - floor
            inc = rise / abs(e_now) if e_now != 0 else (np.inf if rise > 0 else 0.0)
            if cfg.error_control and inc > cfg.energy_tol and h > cfg.dt_min:
                rejected += 1
                dt = h / 2
                continue
            if inc > 0:
                max_inc = max(max_inc, inc)
                if inc > cfg.energy_tol:
                    n_inc += 1
            d_now = dissipation(u, new)
            trend = d_now if trend is None else (1 - alpha) * trend + alpha * d_now
            if d_now <= 10.0 * trend and d_now <= d_prev * (1 + 1e-3):
                dt = min(dt * cfg.growth, cap)
            d_prev = d_now
            u, e_now = new, e_new
            steps += 1
            since_rec += 1
            if since_rec >= cfg.energy_every:
                rec_t.append(u.t); rec_e.append(e_now); rec_d.append(d_now)
                since_rec = 0
        if rec_t[-1] != u.t:
            rec_t.append(u.t); rec_e.append(e_now); rec_d.append(d_prev)
            since_rec = 0
        snaps.append(u)
        if callback is not None:
            callback(u)
    rep = EnergyReport(np.array(rec_t), np.array(rec_e), np.array(rec_d),
                       max_inc, n_inc, steps, rejected, floor)
    return RunResult(snaps, rep, u)
