"""Corrected multi-interface ansatz, its error term and the weighted norm.

Conventions
-----------
Interface indices ``i`` are 1-based (``1..k``), pair indices ``i`` of the
first correctors run over ``1..k-1``. Functions named ``*_centred`` take the
interface-centred coordinate ``y = x - gamma_i``; everything else takes the
global coordinate ``x``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import core_math as cm
from .core_math import SQRT2, OMEGA_PRIME_NORM2
from .errors import GapCollapse, InnerIntegralUnstable
from .toda import explicit_solution, explicit_solution_derivative

#: half-width of the Chebyshev panels used for the second corrector
SECOND_CORRECTOR_HALF_WIDTH = 40.0


@dataclass(frozen=True)
class AnsatzParams:
    """Parameters of the approximate solution at one instant.

    Parameters
    ----------
    k : int
        Number of interfaces (``k = 1`` is accepted for tests).
    t : float
        Time.
    gamma : array_like, optional
        Interface positions; defaults to the exact Toda solution at ``t``.
    sigma, alpha : float
        Weight exponents, ``0 < sigma < sqrt2`` and ``alpha > 1``.
    gamma_of_t : callable, optional
        Family ``t -> gamma`` used for time derivatives. Defaults to the exact
        solution when ``gamma`` is not given, otherwise to a frozen ``gamma``.
    gamma_ref : array_like, optional
        Positions defining the regions of the weight; defaults to ``gamma``.
    """
    k: int
    t: float
    gamma: np.ndarray | None = None
    sigma: float = 1.0
    alpha: float = 2.0
    gamma_of_t: Callable | None = field(default=None, compare=False, repr=False)
    gamma_ref: np.ndarray | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be positive")
        if self.t <= 0:
            raise ValueError("t must be positive")
        if not 0.0 < self.sigma < SQRT2:
            raise ValueError(f"sigma must lie in (0, sqrt 2), got {self.sigma}")
        if not self.alpha > 1.0:
            raise ValueError(f"alpha must exceed 1, got {self.alpha}")
        if self.gamma is None:
            if self.k == 1:
                g = np.zeros(1)
            else:
                g = explicit_solution(self.k, self.t)
            fam = self.gamma_of_t
            if fam is None:
                fam = (lambda s, k=self.k: explicit_solution(k, s)) if self.k > 1 \
                    else (lambda s: np.zeros(1))
            object.__setattr__(self, "gamma_of_t", fam)
        else:
            g = np.array(self.gamma, dtype=float)
            if len(g) != self.k:
                raise ValueError(f"gamma has {len(g)} entries, expected {self.k}")
            if self.gamma_of_t is None:
                frozen = g.copy()
                object.__setattr__(self, "gamma_of_t", lambda s: frozen)
        if np.any(np.diff(g) <= 0):
            raise GapCollapse(f"non-positive gap in {g}")
        object.__setattr__(self, "gamma", g)
        ref = g if self.gamma_ref is None else np.array(self.gamma_ref, dtype=float)
        object.__setattr__(self, "gamma_ref", ref)

    @property
    def gaps(self) -> np.ndarray:
        """eta_2..eta_k."""
        return np.diff(self.gamma)

    def eta(self, i: int) -> float:
        """Gap eta_i = gamma_i - gamma_{i-1}; infinite outside 2..k."""
        if 2 <= i <= self.k:
            return float(self.gamma[i - 1] - self.gamma[i - 2])
        return np.inf

    def at_time(self, t: float) -> "AnsatzParams":
        """The same family evaluated at another time."""
        return AnsatzParams(self.k, t, self.gamma_of_t(t), self.sigma, self.alpha,
                            self.gamma_of_t, None)


# ---------------------------------------------------------------------------
# piecewise Chebyshev interpolants

class PiecewiseChebyshev:
    """Piecewise Chebyshev expansion on contiguous panels."""

    def __init__(self, edges: np.ndarray, coef: np.ndarray):
        self.edges = np.asarray(edges, dtype=float)
        self.coef = np.asarray(coef, dtype=float)

    @staticmethod
    def nodes(edges: np.ndarray, degree: int) -> np.ndarray:
        """Chebyshev points of the first kind on every panel, shape (npan, deg+1)."""
        n = degree + 1
        u = np.cos(np.pi * (2 * np.arange(n) + 1) / (2 * n))[::-1]
        mid = 0.5 * (edges[1:] + edges[:-1])
        half = 0.5 * (edges[1:] - edges[:-1])
        return mid[:, None] + half[:, None] * u[None, :]

    @classmethod
    def from_values(cls, edges, values: np.ndarray) -> "PiecewiseChebyshev":
        """Coefficients from samples at :meth:`nodes` (discrete orthogonality)."""
        n = values.shape[1]
        u = np.cos(np.pi * (2 * np.arange(n) + 1) / (2 * n))[::-1]
        T = np.polynomial.chebyshev.chebvander(u, n - 1)          # (n, n)
        coef = (2.0 / n) * values @ T
        coef[:, 0] *= 0.5
        return cls(edges, coef)

    @classmethod
    def fit(cls, f: Callable, edges, degree: int) -> "PiecewiseChebyshev":
        x = cls.nodes(np.asarray(edges, dtype=float), degree)
        return cls.from_values(edges, np.asarray(f(x.ravel())).reshape(x.shape))

    def _locate(self, x):
        idx = np.clip(np.searchsorted(self.edges, x, side="right") - 1, 0, len(self.edges) - 2)
        lo, hi = self.edges[idx], self.edges[idx + 1]
        u = (2.0 * x - lo - hi) / (hi - lo)
        return idx, u

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        shape = x.shape
        x = x.ravel()
        idx, u = self._locate(x)
        c = self.coef[idx]
        # vectorised Clenshaw recurrence
        b1 = np.zeros_like(u)
        b2 = np.zeros_like(u)
        for m in range(c.shape[1] - 1, 0, -1):
            b1, b2 = 2.0 * u * b1 - b2 + c[:, m], b1
        out = u * b1 - b2 + c[:, 0]
        return out.reshape(shape)

    def panel_integrals(self) -> np.ndarray:
        half = 0.5 * np.diff(self.edges)
        m = np.arange(self.coef.shape[1])
        mf = m.astype(float)
        w = np.zeros_like(mf)
        even = m % 2 == 0
        w[even] = 2.0 / (1.0 - mf[even] ** 2)
        return half * (self.coef @ w)

    def antiderivative(self, anchor: float = 0.0) -> "PiecewiseChebyshev":
        """Continuous antiderivative vanishing at ``anchor`` (a panel edge)."""
        half = 0.5 * np.diff(self.edges)
        integ = np.polynomial.chebyshev.chebint(self.coef.T, lbnd=-1).T * half[:, None]
        # each panel integral starts from zero at its left edge; add offsets
        totals = np.polynomial.chebyshev.chebval(1.0, integ.T)
        offsets = np.concatenate([[0.0], np.cumsum(totals)[:-1]])
        j = int(np.argmin(np.abs(self.edges - anchor)))
        cum_at_edges = np.concatenate([[0.0], np.cumsum(totals)])
        offsets = offsets - cum_at_edges[j]
        integ[:, 0] += offsets
        return PiecewiseChebyshev(self.edges, integ)


# ---------------------------------------------------------------------------
# the corrector set

@dataclass
class SecondCorrector:
    """Cached evaluators of the second corrector of one interface."""
    d: float
    K: PiecewiseChebyshev          # xi_tilde = omega' * K
    orth_defect: float             # G^+(0) + G^-(0), ideally 0


class Ansatz:
    """Corrector set and assembled approximate solution for ``params``.

    Parameters
    ----------
    params : AnsatzParams
    degree : int
        Chebyshev degree per unit panel of the second correctors.
    quad_tol : float
        Absolute tolerance of the projection quadratures.
    """

    def __init__(self, params: AnsatzParams, degree: int = 24, quad_tol: float = 1e-13):
        self.p = params
        self.k = params.k
        self.gamma = params.gamma
        self.degree = degree
        self.quad_tol = quad_tol
        self._second: dict[int, SecondCorrector] = {}
        self._d: dict[int, float] = {}

    # -- first correctors ---------------------------------------------------
    def _pair_ok(self, i: int) -> bool:
        return 1 <= i <= self.k - 1

    def xi_first(self, i: int, x):
        """First corrector xi_i (pair i, i+1) at global x; 0 outside 1..k-1."""
        x = np.asarray(x, dtype=float)
        if not self._pair_ok(i):
            return np.zeros_like(x)
        gi, gj = self.gamma[i - 1], self.gamma[i]
        eta = gj - gi
        if eta <= 0:
            raise GapCollapse(f"gap {i + 1} is {eta}")
        a = SQRT2 * (x - gi)
        b = SQRT2 * (x - gj)
        return 6.0 / np.expm1(SQRT2 * eta) * cm.psi_difference(a, b)

    def xi_source(self, i: int, x):
        """6 f^-_i f^+_{i+1}, the right-hand side of the first corrector ODE."""
        x = np.asarray(x, dtype=float)
        if not self._pair_ok(i):
            return np.zeros_like(x)
        return -6.0 * cm.one_minus_omega(x - self.gamma[i - 1]) \
            * cm.one_plus_omega(x - self.gamma[i])

    def xi_first_xx(self, i: int, x):
        """Second derivative of xi_i through its defining equation."""
        return 2.0 * self.xi_first(i, x) + self.xi_source(i, x)

    # -- projected source ----------------------------------------------------
    def i_hat(self, i: int, x):
        """Î_{1,i} + Î_{2,i} at global x."""
        x = np.asarray(x, dtype=float)
        y = x - self.gamma[i - 1]
        om_m = cm.one_minus_omega(y)
        om_p = cm.one_plus_omega(y)
        out = np.zeros_like(x)
        if i < self.k:
            fplus = cm.one_plus_omega(x - self.gamma[i])
            out = out + 3.0 * om_m ** 2 * fplus - 3.0 * om_m * om_p * self.xi_first(i, x)
        if i > 1:
            fminus = -cm.one_minus_omega(x - self.gamma[i - 2])
            out = out + 3.0 * om_p ** 2 * fminus + 3.0 * om_m * om_p * self.xi_first(i - 1, x)
        return out

    def _breaks(self, i: int):
        pts = [0.0]
        if i > 1:
            pts.append(-self.p.eta(i))
        if i < self.k:
            pts.append(self.p.eta(i + 1))
        return pts

    def d_coefficient(self, i: int) -> float:
        """Projection coefficient d_i of Î_{1,i} + Î_{2,i} onto omega'."""
        if i not in self._d:
            g = self.gamma[i - 1]
            res = cm.integrate(lambda y: self.i_hat(i, y + g) * cm.omega_p(y),
                               -np.inf, np.inf, abs_tol=self.quad_tol, rel_tol=1e-12,
                               breakpoints=self._breaks(i))
            self._d[i] = res.value / OMEGA_PRIME_NORM2
        return self._d[i]

    def i_tilde_centred(self, i: int, y):
        """Projected source Ĩ_i at the centred coordinate y."""
        y = np.asarray(y, dtype=float)
        return self.i_hat(i, y + self.gamma[i - 1]) - self.d_coefficient(i) * cm.omega_p(y)

    def i_tilde(self, i: int, x):
        """Ĩ_i(x - gamma_i), i.e. the projected source placed at its interface."""
        return self.i_tilde_centred(i, np.asarray(x, dtype=float) - self.gamma[i - 1])

    def orthogonality(self, i: int) -> float:
        """Quadrature of Ĩ_i omega' over the line (zero by construction)."""
        g = self.gamma[i - 1]
        d = self.d_coefficient(i)
        return cm.integrate(
            lambda y: (self.i_hat(i, y + g) - d * cm.omega_p(y)) * cm.omega_p(y),
            -np.inf, np.inf, abs_tol=self.quad_tol, rel_tol=1e-12,
            breakpoints=self._breaks(i)).value

    # -- second correctors ---------------------------------------------------
    def _build_second(self, i: int) -> SecondCorrector:
        Y = SECOND_CORRECTOR_HALF_WIDTH
        edges = np.arange(-Y, Y + 0.5, 1.0)
        src = PiecewiseChebyshev.fit(
            lambda y: self.i_tilde_centred(i, y) * cm.omega_p(y), edges, self.degree)
        P = src.antiderivative(anchor=-Y)          # int_{-Y}^{s}
        total = P(np.array([Y]))[0]
        # analytic tails beyond +-Y: the integrand decays like e^{-2 sqrt2 |y|}
        tail_r = float(src(np.array([Y]))[0]) / (2.0 * SQRT2)
        tail_l = float(src(np.array([-Y]))[0]) / (2.0 * SQRT2)
        nodes = PiecewiseChebyshev.nodes(edges, self.degree)
        Pn = P(nodes)
        g_minus = tail_l + Pn                       # int_{-inf}^{s}
        g_plus = tail_r + (total - Pn)              # int_{s}^{inf}
        g_plus0 = tail_r + total - P(np.array([0.0]))[0]
        g_minus0 = tail_l + P(np.array([0.0]))[0]
        scale = tail_r + tail_l + float(np.sum(np.abs(src.panel_integrals())))
        defect = g_plus0 + g_minus0
        if scale > 0 and abs(defect) > 1e-8 * scale:
            raise InnerIntegralUnstable(
                f"interface {i}: projected source not orthogonal (defect {defect:.3e})")
        inv = 1.0 / cm.omega_p(nodes) ** 2
        R = np.where(nodes >= 0.0, -g_plus * inv, g_minus * inv)
        K = PiecewiseChebyshev.from_values(edges, R).antiderivative(anchor=0.0)
        return SecondCorrector(self.d_coefficient(i), K, float(defect))

    def second(self, i: int) -> SecondCorrector:
        if i not in self._second:
            self._second[i] = self._build_second(i)
        return self._second[i]

    def xi_second_centred(self, i: int, y):
        """Second corrector xi~_i at centred y (zero for |y| > 40)."""
        y = np.asarray(y, dtype=float)
        sc = self.second(i)
        Y = SECOND_CORRECTOR_HALF_WIDTH
        inside = np.abs(y) <= Y
        yc = np.clip(y, -Y, Y)
        return np.where(inside, cm.omega_p(yc) * sc.K(yc), 0.0)

    def xi_second_centred_yy(self, i: int, y):
        """Second derivative of xi~_i through its defining equation."""
        y = np.asarray(y, dtype=float)
        return cm.d2W(cm.omega(y)) * self.xi_second_centred(i, y) + self.i_tilde_centred(i, y)

    def xi_hat(self, i: int, x):
        """xi~_i translated to its interface: xi^_i(x) = xi~_i(x - gamma_i)."""
        return self.xi_second_centred(i, np.asarray(x, dtype=float) - self.gamma[i - 1])

    # -- assembly ------------------------------------------------------------
    def _sign(self, j: int) -> float:
        return 1.0 if j % 2 == 1 else -1.0

    def constant(self) -> float:
        return (1.0 + (-1.0) ** self.k) / 2.0

    def z(self, x, stage: int = 2):
        """Approximate solution; ``stage=1`` gives the uncorrected sum."""
        x = np.asarray(x, dtype=float)
        out = -self.constant() * np.ones_like(x)
        for j in range(1, self.k + 1):
            out = out + self._sign(j) * cm.omega(x - self.gamma[j - 1])
        if stage >= 2:
            out = out - self.corrector_sum(x)
        return out

    def corrector_sum(self, x):
        """sum_j s_j xi_j + sum_j s_j xi^_j with s_j = (-1)^{j+1}."""
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for j in range(1, self.k):
            out = out + self._sign(j) * self.xi_first(j, x)
        for j in range(1, self.k + 1):
            out = out + self._sign(j) * self.xi_hat(j, x)
        return out

    def z_xx(self, x, stage: int = 2):
        """Second derivative of :meth:`z`, assembled from the defining ODEs."""
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for j in range(1, self.k + 1):
            out = out + self._sign(j) * cm.omega_pp(x - self.gamma[j - 1])
        if stage >= 2:
            for j in range(1, self.k):
                out = out - self._sign(j) * self.xi_first_xx(j, x)
            for j in range(1, self.k + 1):
                out = out - self._sign(j) * self.xi_second_centred_yy(j, x - self.gamma[j - 1])
        return out

    def w(self, x, stage: int = 2):
        """Chemical-potential-like field w = z_xx - W'(z)."""
        return self.z_xx(x, stage) - cm.dW(self.z(x, stage))

    def F(self, x, h: float = 1e-3, stage: int = 2):
        """F(z) = -w_xx + W''(z) w at x (w_xx by Richardson differences)."""
        x = np.asarray(x, dtype=float)
        wxx = cm.derivative(lambda s: self.w(s, stage), x, order=2, h=h)
        return -wxx + cm.d2W(self.z(x, stage)) * self.w(x, stage)


def build(params: AnsatzParams, **kw) -> Ansatz:
    return Ansatz(params, **kw)


# ---------------------------------------------------------------------------
# module-level operations

def xi_first(i: int, params: AnsatzParams, x):
    return Ansatz(params).xi_first(i, x)


def i_tilde(i: int, params: AnsatzParams, x, ansatz: Ansatz | None = None):
    """Ĩ_i at the interface-centred coordinate x."""
    return (ansatz or Ansatz(params)).i_tilde_centred(i, x)


def d_coefficient(i: int, params: AnsatzParams, ansatz: Ansatz | None = None) -> float:
    return (ansatz or Ansatz(params)).d_coefficient(i)


def xi_second(i: int, params: AnsatzParams, x, ansatz: Ansatz | None = None):
    """xi~_i at the interface-centred coordinate x."""
    return (ansatz or Ansatz(params)).xi_second_centred(i, x)


def assemble_z(params: AnsatzParams, x, stage: int = 2, ansatz: Ansatz | None = None):
    return (ansatz or Ansatz(params)).z(x, stage)


def d_leading(params: AnsatzParams, i: int) -> float:
    """Leading-order value 12 sqrt2 (e^{-sqrt2 eta_i} - e^{-sqrt2 eta_{i+1}})."""
    return 12.0 * SQRT2 * (np.exp(-SQRT2 * params.eta(i)) - np.exp(-SQRT2 * params.eta(i + 1)))


class ErrorField:
    """Error term E = -z_t + F(z) for a family of ansatz parameters.

    The profile part of z_t is differentiated analytically through gamma'(t)
    (exact for the logarithmic solution, central differences otherwise); the
    corrector part uses a central time difference with step ``rel_dt * t``.
    """

    def __init__(self, params: AnsatzParams, rel_dt: float = 1e-4, h: float = 1e-3,
                 gamma_dot=None, **kw):
        self.p = params
        self.h = h
        self.ans = Ansatz(params, **kw)
        dt = rel_dt * params.t
        self.ans_plus = Ansatz(params.at_time(params.t + dt), **kw) if params.k > 1 else None
        self.ans_minus = Ansatz(params.at_time(params.t - dt), **kw) if params.k > 1 else None
        self.dt = dt
        if gamma_dot is None:
            if params.gamma_of_t is not None and params.k > 1 and _is_exact(params):
                gamma_dot = explicit_solution_derivative(params.k, params.t)
            else:
                gp = np.asarray(params.gamma_of_t(params.t + dt))
                gm = np.asarray(params.gamma_of_t(params.t - dt))
                gamma_dot = (gp - gm) / (2.0 * dt)
        self.gamma_dot = np.asarray(gamma_dot, dtype=float)

    def z_t(self, x):
        x = np.asarray(x, dtype=float)
        a = self.ans
        out = np.zeros_like(x)
        for j in range(1, a.k + 1):
            out = out - a._sign(j) * cm.omega_p(x - a.gamma[j - 1]) * self.gamma_dot[j - 1]
        if self.ans_plus is not None:
            dc = (self.ans_plus.corrector_sum(x) - self.ans_minus.corrector_sum(x)) / (2 * self.dt)
            out = out - dc
        return out

    def __call__(self, x):
        return -self.z_t(x) + self.ans.F(x, h=self.h)


def _is_exact(params: AnsatzParams) -> bool:
    ref = explicit_solution(params.k, params.t)
    return np.allclose(params.gamma, ref, rtol=0, atol=1e-14) and np.allclose(
        params.gamma_of_t(params.t * 1.5), explicit_solution(params.k, params.t * 1.5),
        rtol=0, atol=1e-14)


def error_E(params: AnsatzParams, x, **kw):
    return ErrorField(params, **kw)(x)


def phi_weight(params: AnsatzParams, x):
    """Weight Phi(t, x) built on the reference positions ``gamma_ref``.

    On the nearest-midpoint region of interface j the weight is
    ``t^{-3/4 - sigma/(8 sqrt2)} [(|x - g_{j-1}| + 1)^{-alpha} + (|x - g_{j+1}| + 1)^{-alpha}]``
    with absent neighbours contributing nothing. For the single-interface
    test case the interface itself supplies the tail.
    """
    x = np.asarray(x, dtype=float)
    g = params.gamma_ref
    k = len(g)
    pre = params.t ** (-0.75 - params.sigma / (8.0 * SQRT2))
    a = params.alpha
    if k == 1:
        return pre * (np.abs(x - g[0]) + 1.0) ** (-a)
    mids = 0.5 * (g[1:] + g[:-1])
    region = np.searchsorted(mids, x, side="right")      # 0-based interface index
    out = np.zeros_like(x)
    left = region - 1
    right = region + 1
    has_l = left >= 0
    has_r = right <= k - 1
    out = out + np.where(has_l, (np.abs(x - g[np.clip(left, 0, k - 1)]) + 1.0) ** (-a), 0.0)
    out = out + np.where(has_r, (np.abs(x - g[np.clip(right, 0, k - 1)]) + 1.0) ** (-a), 0.0)
    return pre * out


@dataclass(frozen=True)
class WeightedNorm:
    """Discrete sup of |E| / Phi with its sampling metadata."""
    value: float
    argmax: float
    lo: float
    hi: float
    spacing: float
    n_points: int


def weighted_error_norm(params: AnsatzParams, spacing: float = 0.05, margin: float = 15.0,
                        error_field: ErrorField | None = None) -> WeightedNorm:
    """sup over [gamma_1 - margin, gamma_k + margin] of |E| / Phi."""
    if spacing > 0.05:
        raise ValueError("grid spacing must not exceed 0.05")
    g = params.gamma
    lo, hi = g[0] - margin, g[-1] + margin
    n = int(np.ceil((hi - lo) / spacing)) + 1
    x = np.linspace(lo, hi, n)
    ef = error_field or ErrorField(params)
    ratio = np.abs(ef(x)) / phi_weight(params, x)
    m = int(np.argmax(ratio))
    return WeightedNorm(float(ratio[m]), float(x[m]), float(lo), float(hi),
                        float(x[1] - x[0]), n)


# ---------------------------------------------------------------------------
# projection integrals against omega (omega')^2

def projection_integrals(ans: Ansatz, i: int) -> dict:
    """Measured and leading-order values of the omega (omega')^2 projections.

    Keys map to ``(measured, leading)`` pairs; pairs whose neighbour is absent
    are omitted. ``case_one_g1``/``case_one_g2`` integrate over
    ``[-eta_i/2, eta_{i+1}/2]``; the others over the line.
    """
    p = ans.p
    g = ans.gamma[i - 1]
    eta_l, eta_r = p.eta(i), p.eta(i + 1)
    wgt = lambda y: cm.omega(y) * cm.omega_p(y) ** 2
    lo = -0.5 * eta_l if np.isfinite(eta_l) else -np.inf
    hi = 0.5 * eta_r if np.isfinite(eta_r) else np.inf
    q = lambda f, a, b: cm.integrate(lambda y: f(y) * wgt(y), a, b, abs_tol=1e-15,
                                     rel_tol=1e-11, breakpoints=[0.0]).value
    out = {}
    c = 4.0 * SQRT2 / 3.0
    if i > 1:
        g1 = lambda y: -cm.one_minus_omega(y + eta_l)
        out["case_one_g1"] = (q(g1, lo, hi), c * np.exp(-SQRT2 * eta_l))
        out["case_two_xi_prev"] = (q(lambda y: ans.xi_first(i - 1, y + g), -np.inf, np.inf),
                                   -0.5 * c * np.exp(-SQRT2 * eta_l))
    if i < ans.k:
        g2 = lambda y: cm.one_plus_omega(y - eta_r)
        out["case_one_g2"] = (q(g2, lo, hi), c * np.exp(-SQRT2 * eta_r))
        out["case_two_xi"] = (q(lambda y: ans.xi_first(i, y + g), -np.inf, np.inf),
                              0.5 * c * np.exp(-SQRT2 * eta_r))
    lead3 = 0.5 * c * (np.exp(-SQRT2 * eta_l) + np.exp(-SQRT2 * eta_r))
    out["case_three"] = (q(lambda y: ans.xi_second_centred(i, y), -np.inf, np.inf), lead3)
    return out
