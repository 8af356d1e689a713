"""Nonlinear operator of the flow, its linearisation, the kernel check and
the constant-coefficient heat kernel."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate as sci_integrate

from . import core_math as cm
from .core_math import Stencils
from .errors import GridTooCoarse, NonConvergence
from .grid import Grid1D

MAX_DX = 0.25
#: truncation level of the Fourier integrand
FOURIER_CUTOFF = 1e-18
#: |y| * xi_max above which the Fourier integral uses cosine-weighted panels
FILON_PHASE = 50.0


@dataclass(frozen=True)
class FieldOperatorInput:
    """Samples of a field on a uniform grid plus boundary handling."""
    u: np.ndarray
    dx: float
    bc: str = "reflect"

    @classmethod
    def on(cls, grid: Grid1D, u) -> "FieldOperatorInput":
        return cls(np.asarray(u, dtype=float), grid.dx, grid.bc)


def _check(dx: float, n: int):
    if dx > MAX_DX:
        raise GridTooCoarse(f"grid spacing {dx} exceeds {MAX_DX}")
    if n < 5:
        raise GridTooCoarse("need at least 5 samples for fourth-order stencils")


def d2(u: np.ndarray, dx: float, bc: str = "reflect") -> np.ndarray:
    """Second-order second difference with the chosen boundary rule."""
    u = np.asarray(u, dtype=float)
    out = np.empty_like(u)
    out[1:-1] = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / dx ** 2
    if bc == "reflect":
        out[0] = 2.0 * (u[1] - u[0]) / dx ** 2
        out[-1] = 2.0 * (u[-2] - u[-1]) / dx ** 2
    elif bc == "onesided":
        _, w = Stencils(dx).one_sided(2, 1)
        out[0] = w @ u[:4]
        out[-1] = w @ u[-1:-5:-1]
    else:
        raise ValueError(f"unknown boundary mode {bc!r}")
    return out


def chemical_potential(inp: FieldOperatorInput) -> np.ndarray:
    """w = u_xx - W'(u)."""
    _check(inp.dx, len(inp.u))
    return d2(inp.u, inp.dx, inp.bc) - cm.dW(inp.u)


def F_of(inp: FieldOperatorInput) -> np.ndarray:
    """F(u) = -(w)_xx + W''(u) w with w = u_xx - W'(u)."""
    w = chemical_potential(inp)
    return -d2(w, inp.dx, inp.bc) + cm.d2W(inp.u) * w


def F_prime(inp: FieldOperatorInput, v) -> np.ndarray:
    """Directional derivative F'(u)[v] (exact Jacobian of :func:`F_of`)."""
    u = inp.u
    v = np.asarray(v, dtype=float)
    w = chemical_potential(inp)
    q = d2(v, inp.dx, inp.bc) - cm.d2W(u) * v
    return -d2(q, inp.dx, inp.bc) + cm.d2W(u) * q + cm.d3W(u) * w * v


def nonlinear_remainder(inp: FieldOperatorInput, phi) -> np.ndarray:
    """N(phi) = F(u + phi) - F(u) - F'(u)[phi]."""
    phi = np.asarray(phi, dtype=float)
    shifted = FieldOperatorInput(inp.u + phi, inp.dx, inp.bc)
    return F_of(shifted) - F_of(inp) - F_prime(inp, phi)


def kernel_residual(phi, grid: Grid1D) -> float:
    """max |[-d_xx + W''(omega)]^2 phi| on ``grid``."""
    _check(grid.dx, grid.N)
    if grid.L < 20.0:
        raise ValueError("kernel check needs the grid to cover |x| <= 20")
    phi = np.asarray(phi, dtype=float)
    pot = cm.d2W(cm.omega(grid.x))

    def L(f):
        return -d2(f, grid.dx, grid.bc) + pot * f

    return float(np.max(np.abs(L(L(phi)))))


# ---------------------------------------------------------------------------
# heat kernel of u_t = -u_yyyy + 4 u_yy

def _xi_max(tau: float) -> float:
    # tau (xi^4 + 4 xi^2) = ln(1 / cutoff)
    c = np.log(1.0 / FOURIER_CUTOFF) / tau
    return float(np.sqrt(-2.0 + np.sqrt(4.0 + c)))


def _saddle(tau: float, y: float) -> complex:
    """Saddle of the Fourier phase on the branch that starts at xi = 0.

    Roots of 4 tau xi^3 + 8 tau xi = i y; for small y / tau three of them are
    purely imaginary and the relevant one is the lowest.
    """
    roots = np.roots([4.0 * tau, 0.0, 8.0 * tau, -1j * y])
    ok = [r for r in roots if r.imag >= -1e-12 and r.real >= -1e-12 * abs(r)]
    r = min(ok, key=lambda r: r.imag)
    return complex(max(r.real, 0.0), r.imag)


def _q_contour(tau: float, y: float) -> float:
    y = abs(y)
    xs = _saddle(tau, y) if y > 0 else 0j
    c = xs.imag

    def g(u):
        xi = u + 1j * c
        return -tau * (xi ** 4 + 4.0 * xi ** 2) + 1j * xi * y

    peak = np.exp(g(np.array([xs.real])).real)[0]
    if peak == 0.0:
        return 0.0
    # integrand decays like exp(-tau u^4); stop where it is negligible
    umax = xs.real + (np.log(1e20) / tau) ** 0.25 + 1.0
    res = cm.integrate(lambda u: np.exp(g(u)).real, 0.0, umax,
                       abs_tol=1e-15 * peak, rel_tol=1e-12, max_subdivisions=4000,
                       breakpoints=[xs.real] if xs.real > 0 else None)
    return res.value / np.pi


def _q_fourier(tau: float, y: float) -> float:
    xm = _xi_max(tau)
    f = lambda xi: np.exp(-tau * (xi ** 4 + 4.0 * xi ** 2))
    if abs(y) * xm <= FILON_PHASE:
        res = cm.integrate(lambda xi: f(xi) * np.cos(xi * y), 0.0, xm,
                           abs_tol=1e-15, rel_tol=1e-12)
        return res.value / np.pi
    val, err = sci_integrate.quad(f, 0.0, xm, weight="cos", wvar=abs(y),
                                  epsabs=1e-15, epsrel=1e-12, limit=500)
    if not np.isfinite(val):
        raise NonConvergence("cosine-weighted quadrature failed")
    return val / np.pi


def heat_kernel_Q(tau: float, y, method: str = "contour"):
    """Q(tau, y) = (1/pi) int_0^inf exp(-tau (xi^4 + 4 xi^2)) cos(xi y) d xi.

    Parameters
    ----------
    tau : float
        Positive time.
    y : float or ndarray
    method : {'contour', 'fourier'}
        ``'contour'`` integrates along the horizontal line through the saddle
        point, which keeps relative accuracy far in the tails; ``'fourier'``
        truncates the real-axis integral at the 1e-18 level and switches to
        cosine-weighted (Filon-type) panels for large phases.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    fn = {"contour": _q_contour, "fourier": _q_fourier}[method]
    y = np.asarray(y, dtype=float)
    out = np.array([fn(tau, float(v)) for v in y.ravel()]).reshape(y.shape)
    return out[()] if out.ndim == 0 else out


def heat_kernel_mass(tau: float) -> float:
    """Quadrature of Q(tau, .) over the line."""
    return 2.0 * cm.integrate(lambda y: heat_kernel_Q(tau, y), 0.0, np.inf,
                              abs_tol=1e-12, rel_tol=1e-11).value


def heat_kernel_decay_constant(tau: float, n: int = 400) -> tuple[float, float]:
    """Smallest C with |Q| <= C tau^{-1/4} exp(-tau^{-1/4}|y|) on the sampling set.

    The set is ``0 <= y <= 50 tau^{1/4}``; returns ``(C, y_at_max)``.
    """
    s = tau ** 0.25
    y = np.linspace(0.0, 50.0 * s, n)
    ratio = np.abs(heat_kernel_Q(tau, y)) * s * np.exp(y / s)
    m = int(np.argmax(ratio))
    return float(ratio[m]), float(y[m])


def heat_kernel_profile(tau: float, dx: float, rel_cut: float = 1e-17) -> np.ndarray:
    """Samples of Q(tau, m dx) for m = -M..M, truncated once negligible."""
    q0 = heat_kernel_Q(tau, 0.0)
    vals = [q0]
    m = 1
    while True:
        v = heat_kernel_Q(tau, m * dx)
        vals.append(v)
        # the envelope decays monotonically; stop after a run of tiny values
        if m > 4 and max(abs(x) for x in vals[-4:]) < rel_cut * q0:
            break
        m += 1
    half = np.array(vals)
    return np.concatenate([half[:0:-1], half])


def duhamel_step(g, tau: float, grid: Grid1D) -> np.ndarray:
    """Convolution of ``g`` with e^{-4 tau} Q(tau, .) on ``grid``.

    ``g`` is treated as zero outside the grid.
    """
    _check(grid.dx, grid.N)
    g = np.asarray(g, dtype=float)
    kern = np.exp(-4.0 * tau) * heat_kernel_profile(tau, grid.dx) * grid.dx
    full = np.convolve(g, kern, mode="full")
    off = (len(kern) - 1) // 2
    return full[off:off + len(g)]
