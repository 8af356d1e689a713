"""Double-well potential, heteroclinic profile, stable helpers, quadrature
and finite-difference stencils.

Everything here is a pure function of its arguments and works on scalars
or numpy arrays alike.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import expit

from .errors import NonConvergence

SQRT2 = np.sqrt(2.0)
#: integral of (omega')^2 over the real line
OMEGA_PRIME_NORM2 = 2.0 * SQRT2 / 3.0
#: |x| beyond which the profile is returned as exactly +-1
SATURATION = 40.0


# ---------------------------------------------------------------------------
# potential

def eval_potential(s, order: int = 0):
    """Evaluate W(s) = (1 - s^2)^2 / 4 or one of its first three derivatives.

    Parameters
    ----------
    s : float or ndarray
        Sample value(s).
    order : {0, 1, 2, 3}
        Derivative order.
    """
    s = np.asarray(s, dtype=float)
    if order == 0:
        out = 0.25 * (1.0 - s * s) ** 2
    elif order == 1:
        out = s * s * s - s
    elif order == 2:
        out = 3.0 * s * s - 1.0
    elif order == 3:
        out = 6.0 * s
    else:
        raise ValueError(f"potential derivative order must be 0..3, got {order}")
    return out[()] if out.ndim == 0 else out


def W(s):
    return eval_potential(s, 0)


def dW(s):
    return eval_potential(s, 1)


def d2W(s):
    return eval_potential(s, 2)


def d3W(s):
    return eval_potential(s, 3)


# ---------------------------------------------------------------------------
# profile

def one_minus_omega(x):
    """1 - omega(x), accurate to full relative precision for large x."""
    return 2.0 * expit(-SQRT2 * np.asarray(x, dtype=float))


def one_plus_omega(x):
    """1 + omega(x), accurate to full relative precision for very negative x."""
    return 2.0 * expit(SQRT2 * np.asarray(x, dtype=float))


def eval_profile(x, order: int = 0):
    """The heteroclinic omega(x) = tanh(x / sqrt 2) and derivatives up to 3.

    Values saturate to exactly +-1 (derivatives to 0) for ``|x| > 40``.
    Derivatives use the product form ``omega' = (1-omega)(1+omega)/sqrt 2``
    so they keep relative accuracy in the tails.
    """
    x = np.asarray(x, dtype=float)
    sat = np.abs(x) > SATURATION
    if order == 0:
        out = np.tanh(x / SQRT2)
        out = np.where(sat, np.sign(x), out)
    else:
        p = 2.0 * SQRT2 * expit(SQRT2 * x) * expit(-SQRT2 * x)
        if order == 1:
            out = p
        elif order == 2:
            out = -SQRT2 * np.tanh(x / SQRT2) * p
        elif order == 3:
            w = np.tanh(x / SQRT2)
            out = (3.0 * w * w - 1.0) * p
        else:
            raise ValueError(f"profile derivative order must be 0..3, got {order}")
        out = np.where(sat, 0.0, out)
    return out[()] if out.ndim == 0 else out


def omega(x):
    return eval_profile(x, 0)


def omega_p(x):
    return eval_profile(x, 1)


def omega_pp(x):
    return eval_profile(x, 2)


def omega_ppp(x):
    return eval_profile(x, 3)


def profile_tail_error(x, side: str = "+"):
    """Remainder of the two-term tail expansion of the profile.

    For ``side='+'`` this is ``|omega(x) - 1 + 2 e^{-sqrt2 x} - 2 e^{-2 sqrt2 x}|``,
    for ``side='-'`` the mirror ``|omega(x) + 1 - 2 e^{sqrt2 x} + 2 e^{2 sqrt2 x}|``.
    Evaluated through the exact rational form ``2 q^3 / (1 + q)`` to avoid
    cancellation.
    """
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) <= 1.0):
        raise ValueError("profile_tail_error requires |x| > 1")
    if side in ("+", "plus", 1, +1):
        q = np.exp(-SQRT2 * x)
    elif side in ("-", "minus", -1):
        q = np.exp(SQRT2 * x)
    else:
        raise ValueError(f"side must be '+' or '-', got {side!r}")
    out = 2.0 * q ** 3 / (1.0 + q)
    return out[()] if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# stable exponential / logarithm helpers

def log1pexp(a):
    """log(1 + e^a) without overflow."""
    return np.logaddexp(0.0, np.asarray(a, dtype=float))


def _log1p_over(v):
    """log(1 + v) / v for v in [0, 1], with the removable point v = 0."""
    v = np.asarray(v, dtype=float)
    small = v < 1e-4
    vs = np.where(small, v, 0.0)
    series = 1.0 - vs / 2.0 + vs * vs / 3.0 - vs ** 3 / 4.0
    safe = np.where(small, 1.0, v)
    return np.where(small, series, np.log1p(safe) / safe)


def softcap(a):
    """e^{-a} log(1 + e^{a}), finite for all real a.

    Tends to ``a e^{-a}`` for large positive a and to 1 for large negative a.
    """
    a = np.asarray(a, dtype=float)
    pos = a > 0
    ap = np.where(pos, a, 0.0)
    an = np.where(pos, 0.0, a)
    # a > 0: e^{-a}(a + log1p(e^{-a})); a <= 0: log1p(v)/v with v = e^{a}
    vp = np.exp(-ap)
    out = np.where(pos, vp * (ap + np.log1p(vp)), _log1p_over(np.exp(an)))
    return out[()] if out.ndim == 0 else out


def softcap_mirror(a):
    """e^{a} log(1 + e^{-a}), the companion of :func:`softcap`."""
    return softcap(-np.asarray(a, dtype=float))


def _chi(u):
    """1 - psi(u) for u >= 0, where psi(u) = softcap(-u) - softcap(u).

    With v = e^{-u}: chi = (v - log1p v)/v + v (u + log1p v). The first term
    is evaluated by its Taylor series when v is small.
    """
    u = np.asarray(u, dtype=float)
    v = np.exp(-u)
    small = v < 0.1
    vs = np.where(small, v, 0.0)
    n = np.arange(1, 18)
    series = np.sum(((-1.0) ** (n + 1))[:, None] * vs.ravel()[None, :] ** n[:, None]
                    / (n[:, None] + 1.0), axis=0).reshape(v.shape)
    vd = np.where(small, 1.0, v)
    direct = (vd - np.log1p(vd)) / vd
    return np.where(small, series, direct) + v * (u + np.log1p(v))


def psi_odd(u):
    """psi(u) = e^{u} log(1 + e^{-u}) - e^{-u} log(1 + e^{u}); odd, in (-1, 1)."""
    u = np.asarray(u, dtype=float)
    out = np.sign(u) * (1.0 - _chi(np.abs(u)))
    return out[()] if out.ndim == 0 else out


def psi_difference(a, b):
    """psi(a) - psi(b) for a >= b, free of cancellation in the tails."""
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    both_pos = b >= 0
    both_neg = a <= 0
    out = np.empty(a.shape)
    m = both_pos
    out[m] = _chi(b[m]) - _chi(a[m])
    m = both_neg & ~both_pos
    out[m] = _chi(-a[m]) - _chi(-b[m])
    m = ~both_pos & ~both_neg
    out[m] = 2.0 - _chi(a[m]) - _chi(-b[m])
    return out[()] if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# adaptive Gauss-Kronrod quadrature

# 15-point Kronrod abscissae (non-negative half) and weights, with the
# embedded 7-point Gauss weights at the odd-indexed Kronrod nodes.
_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327])

_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])          # 15 nodes ascending
_WK = np.concatenate([_WGK[:-1], _WGK[::-1]])
_WG15 = np.zeros(15)
_WG15[[1, 3, 5]] = _WG[:3]
_WG15[7] = _WG[3]
_WG15[[9, 11, 13]] = _WG[2::-1]

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class QuadResult:
    """Outcome of :func:`integrate`."""
    value: float
    error: float
    converged: bool
    n_eval: int
    n_panels: int

    def __iter__(self):
        # allows ``value, err = integrate(...)``
        yield self.value
        yield self.error


def _map_for(a: float, b: float):
    """Return (g, lo, hi) with g(s) = f(x(s)) x'(s) on the finite s-interval."""
    if np.isfinite(a) and np.isfinite(b):
        return (lambda s: (s, np.ones_like(s))), a, b
    if np.isfinite(a):
        return (lambda s: (a + s / (1.0 - s), 1.0 / (1.0 - s) ** 2)), 0.0, 1.0
    if np.isfinite(b):
        return (lambda s: (b - s / (1.0 - s), 1.0 / (1.0 - s) ** 2)), 0.0, 1.0
    raise ValueError("internal: doubly infinite piece")


def _gk15(g, lo, hi):
    c = 0.5 * (lo + hi)
    h = 0.5 * (hi - lo)
    fv = g(c + h * _NODES)
    resk = np.dot(_WK, fv)
    resg = np.dot(_WG15, fv)
    reskh = 0.5 * resk
    resabs = abs(h) * np.dot(_WK, np.abs(fv))
    resasc = abs(h) * np.dot(_WK, np.abs(fv - reskh))
    err = abs((resk - resg) * h)
    if resasc != 0.0 and err != 0.0:
        err = resasc * min(1.0, (200.0 * err / resasc) ** 1.5)
    if resabs > np.finfo(float).tiny / (50.0 * _EPS):
        err = max(50.0 * _EPS * resabs, err)
    return resk * h, err, resabs


def integrate(f: Callable, a: float, b: float, abs_tol: float = 1e-12,
              rel_tol: float = 1e-10, max_subdivisions: int = 2000,
              breakpoints=None, raise_on_failure: bool = True) -> QuadResult:
    """Adaptive G7K15 quadrature of ``f`` over ``[a, b]``.

    Either end may be infinite; half-lines are mapped onto ``[0, 1)`` with
    ``x = s / (1 - s)`` and the full line is split at 0 (or at the supplied
    breakpoints). ``f`` must accept and return numpy arrays.

    Parameters
    ----------
    f : callable
        Vectorised integrand.
    a, b : float
        Limits, ``a < b``; ``-inf`` / ``inf`` allowed.
    abs_tol, rel_tol : float
        Target ``error <= max(abs_tol, rel_tol * |value|)``.
    max_subdivisions : int
        Upper bound on the number of panels.
    breakpoints : sequence of float, optional
        Interior points where the integrand changes character.
    raise_on_failure : bool
        Raise :class:`NonConvergence` instead of returning ``converged=False``.

    Returns
    -------
    QuadResult
    """
    if not a < b:
        raise ValueError("integrate requires a < b")
    cuts = sorted(set(float(p) for p in (breakpoints or ()) if a < p < b))
    if not np.isfinite(a) and not np.isfinite(b) and not cuts:
        cuts = [0.0]
    edges = [a] + cuts + [b]

    panels = []     # heap of (-err, id, piece, lo, hi, val, resabs)
    pieces = []
    n_eval = 0
    for left, right in zip(edges[:-1], edges[1:]):
        mapping, lo, hi = _map_for(left, right)

        def g(s, mapping=mapping):
            x, jac = mapping(s)
            return np.asarray(f(x), dtype=float) * jac
        pieces.append(g)
        val, err, rabs = _gk15(g, lo, hi)
        n_eval += 15
        heapq.heappush(panels, (-err, len(panels), len(pieces) - 1, lo, hi, val, rabs))

    counter = len(panels)
    while True:
        total = sum(p[5] for p in panels)
        err = sum(-p[0] for p in panels)
        # never ask for less than the accumulated round-off of the panel sums
        floor = 100.0 * _EPS * sum(p[6] for p in panels)
        target = max(abs_tol, rel_tol * abs(total), floor)
        if err <= target:
            return QuadResult(float(total), float(err), True, n_eval, len(panels))
        if len(panels) >= max_subdivisions:
            if raise_on_failure:
                raise NonConvergence(
                    f"quadrature error {err:.3e} > {target:.3e} after {len(panels)} panels")
            return QuadResult(float(total), float(err), False, n_eval, len(panels))
        popped = heapq.heappop(panels)
        neg_err, _, k, lo, hi = popped[:5]
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            if raise_on_failure:
                raise NonConvergence("quadrature panel width reached machine precision")
            heapq.heappush(panels, popped)
            return QuadResult(float(total), float(err), False, n_eval, len(panels))
        for l2, h2 in ((lo, mid), (mid, hi)):
            val, e, rabs = _gk15(pieces[k], l2, h2)
            n_eval += 15
            counter += 1
            heapq.heappush(panels, (-e, counter, k, l2, h2, val, rabs))


# ---------------------------------------------------------------------------
# finite-difference stencils

def fd_weights(x0: float, nodes, m: int) -> np.ndarray:
    """Fornberg weights for derivatives 0..m at ``x0`` from ``nodes``.

    Returns an array of shape ``(m + 1, len(nodes))``.
    """
    nodes = np.asarray(nodes, dtype=float)
    n = len(nodes)
    c = np.zeros((m + 1, n))
    c1 = 1.0
    c4 = nodes[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = nodes[i] - x0
        for j in range(i):
            c3 = nodes[i] - nodes[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[k, i] = c1 * (k * c[k - 1, i - 1] - c5 * c[k, i - 1]) / c2
                c[0, i] = -c1 * c5 * c[0, i - 1] / c2
            for k in range(mn, 0, -1):
                c[k, j] = (c4 * c[k, j] - k * c[k - 1, j]) / c3
            c[0, j] = c4 * c[0, j] / c3
        c1 = c2
    return c


@dataclass(frozen=True)
class Stencils:
    """Second-order accurate difference weights on a uniform grid.

    ``central(order)`` returns ``(offsets, weights)`` so that
    ``sum(w * u[i + off]) ~ u^{(order)}(x_i)``; ``one_sided(order, side)``
    does the same with offsets ``0..n`` (``side=+1``) or ``-n..0``.
    """
    dx: float

    def central(self, order: int):
        if order not in (1, 2, 3, 4):
            raise ValueError("central stencils exist for orders 1..4")
        half = (order + 1) // 2
        offsets = np.arange(-half, half + 1)
        w = fd_weights(0.0, offsets, order)[order] / self.dx ** order
        return offsets, w

    def one_sided(self, order: int, side: int = 1):
        if order not in (1, 2, 3, 4):
            raise ValueError("one-sided stencils exist for orders 1..4")
        offsets = np.arange(order + 2) * (1 if side > 0 else -1)
        w = fd_weights(0.0, offsets, order)[order] / self.dx ** order
        return offsets, w

    def apply(self, u, order: int):
        """Central difference on the interior points of ``u`` (edges are NaN)."""
        u = np.asarray(u, dtype=float)
        off, w = self.central(order)
        h = off[-1]
        out = np.full_like(u, np.nan)
        acc = np.zeros(len(u) - 2 * h)
        for o, c in zip(off, w):
            acc += c * u[h + o:len(u) - h + o]
        out[h:len(u) - h] = acc
        return out


def derivative(f: Callable, x, order: int = 2, h: float = 1e-3, richardson: bool = True):
    """Central-difference derivative of a pointwise callable.

    With ``richardson=True`` the O(h^2) estimates at ``h`` and ``h/2`` are
    combined into an O(h^4) one.
    """
    x = np.asarray(x, dtype=float)

    def d(hh):
        off, w = Stencils(hh).central(order)
        return sum(c * np.asarray(f(x + o * hh)) for o, c in zip(off, w))

    if not richardson:
        return d(h)
    return (4.0 * d(h / 2.0) - d(h)) / 3.0
