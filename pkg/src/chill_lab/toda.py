"""Interface ODE systems: the Cahn-Hilliard Toda system, its gap form, the
exact logarithmic solution, the linearisation spectrum, the Allen-Cahn
comparison system and an embedded Runge-Kutta integrator.

Indices are 1-based in docstrings (gamma_1 < ... < gamma_k) and 0-based in
arrays. Neighbours outside 1..k sit at -inf / +inf, so their exponential
terms are simply left out.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GapCollapse, OrderingViolated, StepSizeUnderflow

SQRT2 = np.sqrt(2.0)
#: interaction constant of the Cahn-Hilliard system
TODA_COEFFICIENT = 384.0
#: time scale inside the logarithm of the exact solution; kept independent of
#: TODA_COEFFICIENT so that the residual check actually tests the pair
LOG_SCALE = 1152.0
#: left-hand side normalisation, the integral of (omega')^2
MASS = 2.0 * SQRT2 / 3.0
#: interaction constant of the Allen-Cahn comparison system
AC_COEFFICIENT = 12.0 * SQRT2

KINDS = ("CH_full", "CH_gaps", "AC_comparison")


# ---------------------------------------------------------------------------
# state containers

@dataclass(frozen=True)
class InterfaceVector:
    """Ordered interface positions.

    Parameters
    ----------
    gamma : array_like
        Positions, strictly increasing.
    symmetric : bool
        Also require ``gamma_j = -gamma_{k+1-j}`` to 1e-12.
    """
    gamma: np.ndarray
    symmetric: bool = False

    def __post_init__(self):
        g = np.array(self.gamma, dtype=float)
        g.setflags(write=False)
        object.__setattr__(self, "gamma", g)
        check_ordered(g)
        if self.symmetric and np.max(np.abs(g + g[::-1]), initial=0.0) > 1e-12:
            raise ValueError("interface vector is not symmetric")

    @property
    def k(self) -> int:
        return len(self.gamma)

    @property
    def gaps(self) -> np.ndarray:
        return np.diff(self.gamma)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.gamma, dtype=dtype)

    def __len__(self):
        return len(self.gamma)


def check_ordered(gamma) -> np.ndarray:
    """Return gamma as an array, raising OrderingViolated unless increasing."""
    g = np.asarray(gamma, dtype=float)
    if g.ndim != 1 or len(g) < 1:
        raise ValueError("interface vector must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(g)):
        raise OrderingViolated("non-finite interface position")
    if len(g) > 1 and np.any(np.diff(g) <= 0):
        raise OrderingViolated(f"interfaces not strictly increasing: {g}")
    return g


# ---------------------------------------------------------------------------
# right-hand sides

def ch_terms(gamma, coefficient=None) -> np.ndarray:
    """The four interaction terms of each Cahn-Hilliard equation, shape (k, 4)."""
    c = TODA_COEFFICIENT if coefficient is None else coefficient
    g = check_ordered(gamma)
    k = len(g)
    terms = np.zeros((k, 4))
    d1 = np.diff(g)                 # gamma_{j+1} - gamma_j
    d2 = g[2:] - g[:-2]             # gamma_{j+2} - gamma_j
    # -e^{-sqrt2 (g_j - g_{j-2})}
    terms[2:, 0] = -np.exp(-SQRT2 * d2)
    # +2 e^{-2 sqrt2 (g_j - g_{j-1})}
    terms[1:, 1] = 2.0 * np.exp(-2.0 * SQRT2 * d1)
    # -2 e^{-2 sqrt2 (g_{j+1} - g_j)}
    terms[:-1, 2] = -2.0 * np.exp(-2.0 * SQRT2 * d1)
    # +e^{-sqrt2 (g_{j+2} - g_j)}
    terms[:-2, 3] = np.exp(-SQRT2 * d2)
    return c * terms


def ch_rhs(gamma, coefficient=None) -> np.ndarray:
    """Velocities gamma' of the Cahn-Hilliard Toda system.

    Solves ``(2 sqrt2 / 3) gamma_j' = R_j(gamma)`` for gamma'.
    ``coefficient`` defaults to the module constant read at call time.
    """
    return ch_terms(gamma, coefficient).sum(axis=1) / MASS


def gap_rhs(eta, coefficient=None) -> np.ndarray:
    """Gap velocities eta_i' (i = 2..k) written directly in gap variables.

    ``eta[m]`` is the gap ``gamma_{m+2} - gamma_{m+1}`` (0-based m). Gaps
    with indices outside 2..k are infinite.
    """
    c = TODA_COEFFICIENT if coefficient is None else coefficient
    eta = np.asarray(eta, dtype=float)
    if np.any(eta <= 0):
        raise GapCollapse(f"non-positive gap: {eta}")
    n = len(eta)
    # pad with +inf on both sides so e^{-inf} = 0 drops the boundary terms
    e = np.concatenate([[np.inf, np.inf], eta, [np.inf, np.inf]])
    i = np.arange(2, n + 2)
    with np.errstate(invalid="ignore"):
        out = (-2.0 * np.exp(-2 * SQRT2 * e[i - 1]) + 4.0 * np.exp(-2 * SQRT2 * e[i])
               - 2.0 * np.exp(-2 * SQRT2 * e[i + 1])
               - np.exp(-SQRT2 * (e[i] + e[i + 1]))
               + np.exp(-SQRT2 * (e[i - 1] + e[i - 2]))
               - np.exp(-SQRT2 * (e[i] + e[i - 1]))
               + np.exp(-SQRT2 * (e[i + 1] + e[i + 2])))
    return c * out / MASS


def ac_rhs(rho, coefficient=None) -> np.ndarray:
    """Velocities of the one-dimensional Allen-Cahn comparison system."""
    c = AC_COEFFICIENT if coefficient is None else coefficient
    r = check_ordered(rho)
    e = np.exp(-SQRT2 * np.diff(r))
    out = np.zeros(len(r))
    out[:-1] += e
    out[1:] -= e
    return c * out


# ---------------------------------------------------------------------------
# exact solution

def algebraic_x0(k: int) -> np.ndarray:
    """x_i = (i - 1)(k - i + 1) / 2 for i = 2..k."""
    i = np.arange(2, k + 1)
    return (i - 1) * (k - i + 1) / 2.0


def explicit_constants(k: int) -> np.ndarray:
    """Offsets a_1..a_k of the exact solution (antisymmetric, zero sum).

    ``a_i = (1 / (2 sqrt2)) * sum_{l=i+1}^{k-i+1} ln[(l-1)(k-l+1)/2]`` for
    ``2 i <= k``, mirrored with a sign change.
    """
    if k < 1:
        raise ValueError("k must be positive")
    a = np.zeros(k)
    for i in range(1, k // 2 + 1):
        l = np.arange(i + 1, k - i + 2)
        a[i - 1] = np.sum(np.log((l - 1) * (k - l + 1) / 2.0)) / (2.0 * SQRT2)
        a[k - i] = -a[i - 1]
    return a


def _admissible(k: int, t: float):
    if t <= 0:
        raise GapCollapse(f"time must be positive, got {t}")
    if k >= 2:
        gaps = explicit_gap_solution(k, t, _check=False)
        if np.any(gaps <= 0):
            raise GapCollapse(f"explicit solution has non-positive gap at t={t}")


def explicit_solution(k: int, t: float) -> np.ndarray:
    """Exact logarithmic solution gamma^0(t) of the Cahn-Hilliard system."""
    _admissible(k, t)
    i = np.arange(1, k + 1)
    return (i - (k + 1) / 2.0) * np.log(LOG_SCALE * t) / (2.0 * SQRT2) + explicit_constants(k)


def explicit_solution_derivative(k: int, t: float) -> np.ndarray:
    """d gamma^0 / dt."""
    i = np.arange(1, k + 1)
    return (i - (k + 1) / 2.0) / (2.0 * SQRT2 * t)


def explicit_gap_solution(k: int, t: float, _check: bool = True) -> np.ndarray:
    """Gaps eta_i^0(t), i = 2..k, of the exact solution."""
    if t <= 0:
        raise GapCollapse(f"time must be positive, got {t}")
    gaps = np.log(LOG_SCALE * t) / (2.0 * SQRT2) - np.log(algebraic_x0(k)) / SQRT2
    if _check and np.any(gaps <= 0):
        raise GapCollapse(f"explicit solution has non-positive gap at t={t}")
    return gaps


def ac_explicit_gap_solution(k: int, t: float) -> np.ndarray:
    """Gaps of the expanding logarithmic solution of the reversed-time
    Allen-Cahn system: (1/sqrt2) ln(48 t / (j (k - j))), j = 1..k-1."""
    if t <= 0:
        raise GapCollapse(f"time must be positive, got {t}")
    j = np.arange(1, k)
    gaps = np.log(2.0 * SQRT2 * AC_COEFFICIENT * t / (j * (k - j))) / SQRT2
    if np.any(gaps <= 0):
        raise GapCollapse(f"Allen-Cahn solution has non-positive gap at t={t}")
    return gaps


def ac_explicit_solution(k: int, t: float) -> np.ndarray:
    """Zero-mean positions with the gaps of :func:`ac_explicit_gap_solution`."""
    g = np.concatenate([[0.0], np.cumsum(ac_explicit_gap_solution(k, t))])
    return g - g.mean()


def admissibility_threshold(k: int, min_gap: float = 0.0) -> float:
    """Smallest t for which every exact gap exceeds ``min_gap``."""
    xmax = np.max(algebraic_x0(k))
    return np.exp(2.0 * SQRT2 * (min_gap + np.log(xmax) / SQRT2)) / LOG_SCALE


def toda_residual(k: int, t: float) -> float:
    """Relative residual of the exact solution in the Cahn-Hilliard system.

    ``max_i |(2 sqrt2/3) gamma_i' - R_i(gamma^0)|`` divided by the largest
    single interaction term, so the value is scale free.
    """
    g = explicit_solution(k, t)
    terms = ch_terms(g)
    lhs = MASS * explicit_solution_derivative(k, t)
    scale = np.max(np.abs(terms))
    return float(np.max(np.abs(lhs - terms.sum(axis=1))) / scale)


# ---------------------------------------------------------------------------
# linearisation

def _monomials(i: int):
    """(coefficient, a, b) triples of the quadratic polynomial H_i."""
    return ((-2.0, i - 1, i - 1), (4.0, i, i), (-2.0, i + 1, i + 1),
            (-1.0, i, i + 1), (1.0, i - 1, i - 2), (-1.0, i - 1, i),
            (1.0, i + 1, i + 2))


def H_poly(x: dict, i: int) -> float:
    """Evaluate H_i; ``x`` maps indices 2..k to values, anything else is 0."""
    return sum(c * x.get(a, 0.0) * x.get(b, 0.0) for c, a, b in _monomials(i))


def H_gradient(x: dict, i: int, k: int) -> np.ndarray:
    """Analytic gradient of H_i with respect to (x_2, ..., x_k)."""
    grad = np.zeros(k - 1)
    for c, a, b in _monomials(i):
        if 2 <= a <= k:
            grad[a - 2] += c * x.get(b, 0.0)
        if 2 <= b <= k:
            grad[b - 2] += c * x.get(a, 0.0)
    return grad


def jacobian_H(k: int) -> np.ndarray:
    """Matrix with entries (dH_{l+1} / dx_{j+1}) x_{j+1} at the exact point."""
    if k < 2:
        raise ValueError("k must be at least 2")
    x0 = algebraic_x0(k)
    x = {i: x0[i - 2] for i in range(2, k + 1)}
    rows = [H_gradient(x, i, k) * x0 for i in range(2, k + 1)]
    return np.array(rows)


def jacobian_eigenvalues(k: int) -> np.ndarray:
    """Eigenvalues of :func:`jacobian_H`, real parts sorted ascending."""
    lam = np.linalg.eigvals(jacobian_H(k))
    if np.max(np.abs(lam.imag), initial=0.0) > 1e-8 * np.max(np.abs(lam)):
        raise ArithmeticError("unexpected complex spectrum")
    return np.sort(lam.real)


def expected_eigenvalues(k: int) -> np.ndarray:
    """T_m (T_m + 1) with T_m = m (m + 1) / 2, m = 1..k-1."""
    m = np.arange(1, k)
    T = m * (m + 1) / 2.0
    return T * (T + 1)


# ---------------------------------------------------------------------------
# integration

@dataclass(frozen=True)
class TodaSystemSpec:
    """Which interface system to integrate.

    ``reverse_time`` flips the direction of the flow. The Allen-Cahn
    comparison system is attractive, so its expanding branch is the
    ancient one; by default it is integrated in reversed time.
    """
    kind: str
    k: int
    reverse_time: bool | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown system kind {self.kind!r}; expected one of {KINDS}")
        if self.k < 2:
            raise ValueError("k must be at least 2")
        if self.reverse_time is None:
            object.__setattr__(self, "reverse_time", self.kind == "AC_comparison")

    def velocity(self, gamma: np.ndarray) -> np.ndarray:
        if self.kind == "CH_full":
            v = ch_rhs(gamma)
        elif self.kind == "AC_comparison":
            v = ac_rhs(gamma)
        else:
            eta = np.diff(gamma)
            deta = gap_rhs(eta)
            # centre of mass is conserved; rebuild gamma' from the gap velocities
            v = np.concatenate([[0.0], np.cumsum(deta)])
            v -= v.mean()
        return -v if self.reverse_time else v


@dataclass
class TodaTrajectory:
    """Samples of an integrated interface system."""
    t: np.ndarray
    gamma: np.ndarray
    steps: int = 0
    rejected: int = 0
    n_eval: int = 0
    max_error_ratio: float = 0.0
    spec: TodaSystemSpec | None = field(default=None, repr=False)

    @property
    def gaps(self) -> np.ndarray:
        return np.diff(self.gamma, axis=1)

    def to_csv(self, path) -> None:
        k = self.gamma.shape[1]
        header = "t," + ",".join(f"gamma_{j}" for j in range(1, k + 1))
        np.savetxt(path, np.column_stack([self.t, self.gamma]), delimiter=",",
                   header=header, comments="", fmt="%.17g")


# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200,
                187 / 2100, 1 / 40])
_E = _B5 - _B4


def integrate_toda(spec: TodaSystemSpec, gamma_init, t0: float, t1: float,
                   tol: float = 1e-10, n_samples: int = 200, h0: float | None = None,
                   max_steps: int = 1_000_000) -> TodaTrajectory:
    """Integrate an interface system from t0 to t1 with Dormand-Prince 5(4).

    The independent variable is ``s = ln t``; output is sampled at
    ``n_samples`` log-spaced times including both ends.

    Parameters
    ----------
    spec : TodaSystemSpec
    gamma_init : array_like
        Strictly increasing initial positions (length ``spec.k``).
    t0, t1 : float
        ``0 < t0 < t1``.
    tol : float
        Local error tolerance (absolute and relative).

    Raises
    ------
    GapCollapse
        An accepted state has a non-positive gap.
    StepSizeUnderflow
        The step size dropped below round-off level.
    """
    if not 0 < t0 < t1:
        raise ValueError("integrate_toda requires 0 < t0 < t1")
    y = check_ordered(gamma_init).copy()
    if len(y) != spec.k:
        raise ValueError(f"expected {spec.k} positions, got {len(y)}")

    s0, s1 = np.log(t0), np.log(t1)
    s_out = np.linspace(s0, s1, max(n_samples, 2))

    def rhs(s, yy):
        return np.exp(s) * spec.velocity(yy)

    s = s0
    f = rhs(s, y)
    n_eval = 1
    if h0 is None:
        scale = tol + tol * np.abs(y)
        d0 = np.max(np.abs(y) / scale)
        d1 = np.max(np.abs(f) / scale)
        h = 0.01 * d0 / d1 if d0 > 1e-5 and d1 > 1e-5 else 1e-6
        h = min(h, s1 - s0)
    else:
        h = h0

    out_t = [t0]
    out_y = [y.copy()]
    next_out = 1
    steps = rejected = 0
    max_ratio = 0.0
    while next_out < len(s_out):
        if steps + rejected > max_steps:
            raise StepSizeUnderflow("maximum number of steps exceeded")
        target = s_out[next_out]
        hit = s + h >= target - 1e-14 * max(1.0, abs(target))
        hh = target - s if hit else h
        if hh <= 1e-14 * max(1.0, abs(s)):
            raise StepSizeUnderflow(f"step size {hh:.3e} underflow at t={np.exp(s):.6g}")
        K = [f]
        try:
            for st in range(1, 7):
                yst = y + hh * sum(a * kk for a, kk in zip(_A[st], K))
                K.append(rhs(s + _C[st] * hh, yst))
        except (OrderingViolated, GapCollapse):
            # a stage left the ordered region: shrink and retry
            h = 0.25 * hh
            rejected += 1
            continue
        n_eval += 6
        y_new = y + hh * sum(b * kk for b, kk in zip(_B5, K) if b != 0.0)
        err = hh * sum(e * kk for e, kk in zip(_E, K))
        scale = tol + tol * np.maximum(np.abs(y), np.abs(y_new))
        ratio = float(np.max(np.abs(err) / scale))
        if ratio <= 1.0:
            if np.any(np.diff(y_new) <= 0):
                raise GapCollapse(f"gap collapsed at t={np.exp(s + hh):.6g}")
            s += hh
            y = y_new
            f = K[6]
            steps += 1
            max_ratio = max(max_ratio, ratio)
            if hit:
                out_t.append(np.exp(s_out[next_out]))
                out_y.append(y.copy())
                s = s_out[next_out]
                next_out += 1
            fac = 5.0 if ratio == 0 else min(5.0, 0.9 * ratio ** -0.2)
            # a clipped step says nothing about the natural step size
            h = max(h, hh * fac) if hit else hh * fac
        else:
            rejected += 1
            h = hh * max(0.2, 0.9 * ratio ** -0.2)
    return TodaTrajectory(np.array(out_t), np.array(out_y), steps, rejected, n_eval,
                          max_ratio, spec)
