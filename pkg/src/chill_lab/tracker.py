"""Interface extraction from PDE snapshots and comparison with the log law."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BarycentricInterpolator
from scipy.optimize import brentq

from .core_math import SQRT2
from .errors import InterfaceCountChanged, NoZeros, WindowTooShort
from .toda import LOG_SCALE, explicit_constants, explicit_solution

MIN_SAMPLES = 20
#: tolerance on the slope of a middle interface whose predicted slope is 0
ZERO_SLOPE_TOL = 0.02


def _cubic_root(xs, us, lo, hi) -> float:
    # barycentric form returns the samples exactly at the nodes, so the bracket holds
    # explicit weights; scipy otherwise permutes the nodes at random, which moves the last bit
    wi = 1.0 / np.array([np.prod(xj - np.delete(xs, j)) for j, xj in enumerate(xs)])
    p = BarycentricInterpolator(xs, us, wi=wi)
    return brentq(lambda s: float(p(s)), lo, hi, xtol=1e-15)


def find_zeros(u, x=None) -> np.ndarray:
    """Sign changes of ``u`` refined by cubic interpolation through 4 samples.

    ``u`` is a ScalarField or an array of samples on ``x``.
    """
    if x is None:
        x, vals = u.grid.x, u.u
    else:
        vals = np.asarray(u, dtype=float)
        x = np.asarray(x, dtype=float)
    n = len(vals)
    # compare signs, not products, which underflow for subnormal samples
    sg = np.sign(vals)
    zeros = []
    i = 0
    while i < n - 1:
        if vals[i] == 0.0:
            # exact zero on a node counts once, and only if the sign changes across it
            left = sg[i - 1] if i > 0 else -sg[i + 1]
            if left * sg[i + 1] < 0:
                zeros.append(x[i])
            i += 1
            continue
        if sg[i] * sg[i + 1] < 0:
            j0 = min(max(i - 1, 0), n - 4)
            sl = slice(j0, j0 + 4)
            zeros.append(_cubic_root(x[sl], vals[sl], x[i], x[i + 1]))
        i += 1
    if not zeros:
        raise NoZeros("field has constant sign")
    return np.array(zeros)


@dataclass
class InterfaceTrack:
    """Per-interface positions at the snapshot times."""
    t: np.ndarray
    gamma: np.ndarray          # shape (M, k)
    association: np.ndarray    # zero index assigned to each interface

    @property
    def k(self) -> int:
        return self.gamma.shape[1]

    @property
    def gaps(self) -> np.ndarray:
        return np.diff(self.gamma, axis=1)

    def at(self, t: float) -> np.ndarray:
        """Positions at ``t`` by linear interpolation in ln t."""
        lt = np.log(self.t)
        return np.array([np.interp(np.log(t), lt, g) for g in self.gamma.T])

    def window(self, t_a: float, t_b: float) -> "InterfaceTrack":
        m = (self.t >= t_a * (1 - 1e-12)) & (self.t <= t_b * (1 + 1e-12))
        return InterfaceTrack(self.t[m], self.gamma[m], self.association[m])

    def to_csv(self, path) -> None:
        head = "t," + ",".join(f"gamma_{j}" for j in range(1, self.k + 1))
        np.savetxt(path, np.column_stack([self.t, self.gamma]), delimiter=",",
                   header=head, comments="", fmt="%.17g")


def track(snapshots, times=None) -> InterfaceTrack:
    """Follow the zeros of a snapshot sequence.

    ``snapshots`` holds ScalarFields, or arrays of zero positions together
    with ``times``.
    """
    ts, rows, assoc = [], [], []
    prev = None
    for m, snap in enumerate(snapshots):
        if times is None:
            t, z = snap.t, find_zeros(snap)
        else:
            t, z = times[m], np.sort(np.asarray(snap, dtype=float))
        if prev is not None and len(z) != len(prev):
            raise InterfaceCountChanged(
                f"zero count changed from {len(prev)} to {len(z)} at t={t}", m, t)
        if prev is None:
            idx = np.arange(len(z))
        else:
            # greedy nearest neighbour, closest pairs first
            dist = np.abs(prev[:, None] - z[None, :])
            idx = -np.ones(len(z), dtype=int)
            used = np.zeros(len(z), dtype=bool)
            for flat in np.argsort(dist, axis=None):
                j, c = divmod(int(flat), len(z))
                if idx[j] < 0 and not used[c]:
                    idx[j] = c
                    used[c] = True
            half_gap = np.min(np.diff(prev)) / 2 if len(prev) > 1 else np.inf
            if np.any(np.diff(z[idx]) <= 0) or np.any(np.abs(z[idx] - prev) >= half_gap):
                raise InterfaceCountChanged(f"interface association lost at t={t}", m, t)
        pos = z[idx]
        ts.append(t)
        rows.append(pos)
        assoc.append(idx)
        prev = pos
    if not rows:
        raise ValueError("no snapshots")
    t = np.array(ts, dtype=float)
    if np.any(np.diff(t) <= 0):
        raise ValueError("snapshot times must increase")
    return InterfaceTrack(t, np.array(rows), np.array(assoc))


@dataclass
class LogFit:
    """Least-squares fits gamma_j ~ c_j ln t + b_j and eta_j ~ c ln t + b."""
    window: tuple
    n_samples: int
    slope: np.ndarray
    intercept: np.ndarray
    rms: np.ndarray
    gap_slope: np.ndarray
    gap_intercept: np.ndarray
    gap_rms: np.ndarray


def _ols(lt, y):
    A = np.column_stack([lt, np.ones_like(lt)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    return coef[0], coef[1], np.sqrt(np.mean(resid ** 2, axis=0))


def default_window(T: float, t_end: float) -> tuple:
    return (max(10.0 * T, t_end / 100.0), t_end)


def fit_log_law(tr: InterfaceTrack, window=None, T: float | None = None) -> LogFit:
    """OLS fit of positions and gaps against ln t inside ``window``."""
    if window is None:
        window = default_window(T if T is not None else tr.t[0], tr.t[-1])
    t_a, t_b = window
    if T is not None and t_a < 10.0 * T * (1 - 1e-12):
        raise WindowTooShort(f"window start {t_a} precedes 10 T = {10 * T}")
    if t_a < tr.t[0] * (1 - 1e-9) or t_b > tr.t[-1] * (1 + 1e-9) or t_b <= t_a:
        raise WindowTooShort(f"window {window} not inside [{tr.t[0]}, {tr.t[-1]}]")
    sub = tr.window(t_a, t_b)
    if len(sub.t) < MIN_SAMPLES:
        raise WindowTooShort(f"{len(sub.t)} samples in window, need {MIN_SAMPLES}")
    lt = np.log(sub.t)
    c, b, r = _ols(lt, sub.gamma)
    if sub.k > 1:
        gc, gb, gr = _ols(lt, sub.gaps)
    else:
        gc = gb = gr = np.zeros(0)
    return LogFit((t_a, t_b), len(sub.t), np.atleast_1d(c), np.atleast_1d(b),
                  np.atleast_1d(r), np.atleast_1d(gc), np.atleast_1d(gb), np.atleast_1d(gr))


def expected_slopes(k: int) -> np.ndarray:
    j = np.arange(1, k + 1)
    return (j - (k + 1) / 2.0) / (2.0 * SQRT2)


@dataclass
class Grade:
    rows: list
    gap_rows: list = field(default_factory=list)

    @property
    def max_rel_err(self) -> float:
        vals = [r["rel_err"] for r in self.rows if r["rel_err"] is not None]
        return max(vals) if vals else 0.0

    @property
    def passed(self) -> bool:
        return all(r["pass"] for r in self.rows)

    def to_text(self) -> str:
        return json.dumps({"interfaces": self.rows, "gaps": self.gap_rows}, indent=2)


def grade(fit: LogFit, k: int, rel_tol: float = 0.10) -> Grade:
    """Compare fitted slopes with (j - (k+1)/2) / (2 sqrt2).

    Intercepts are reported next to a_j + slope_j ln 1152 but never graded.
    Interfaces with zero predicted slope are graded by ``|c_j| <= 0.02``.
    """
    exp = expected_slopes(k)
    icpt = exp * np.log(LOG_SCALE) + (explicit_constants(k) if k > 1 else 0.0)
    rows = []
    for j in range(k):
        c = float(fit.slope[j])
        if exp[j] == 0.0:
            rel, ok = None, abs(c) <= ZERO_SLOPE_TOL
        else:
            rel = abs(c - exp[j]) / abs(exp[j])
            ok = rel <= rel_tol
        rows.append({"j": j + 1, "slope": c, "slope_expected": float(exp[j]),
                     "rel_err": rel, "intercept": float(fit.intercept[j]),
                     "intercept_expected": float(np.atleast_1d(icpt)[j]),
                     "rms": float(fit.rms[j]), "pass": bool(ok)})
    gap_rows = []
    g_exp = 1.0 / (2.0 * SQRT2)
    for i, c in enumerate(fit.gap_slope):
        rel = abs(c - g_exp) / g_exp
        gap_rows.append({"i": i + 2, "slope": float(c), "slope_expected": g_exp,
                         "rel_err": float(rel), "intercept": float(fit.gap_intercept[i]),
                         "rms": float(fit.gap_rms[i]), "pass": bool(rel <= rel_tol)})
    return Grade(rows, gap_rows)


def decay_exponent(tr: InterfaceTrack, k: int, window=None) -> float:
    """Empirical exponent p in |gap - exact gap| ~ t^p (reported, not graded)."""
    window = window or (tr.t[0], tr.t[-1])
    sub = tr.window(*window)
    dev = np.array([np.max(np.abs(sub.gaps[m] - np.diff(explicit_solution(k, t))))
                    for m, t in enumerate(sub.t)])
    ok = dev > 0
    if ok.sum() < 2:
        return float("nan")
    p, _ = np.polyfit(np.log(sub.t[ok]), np.log(dev[ok]), 1)
    return float(p)
