"""Finite-dimensional model geometry behind the transforms.

Fiber metrics on the transform targets:

    M1: identity (flat L2 target)
    M2: diag(4, q1^-6)                     on R_{>0} x R
    M3: diag(4, q1^2, q1^-6)               on R_{>0} x R x R
    M4: 4x4 with a coupled (q2, q3) block  on R_{>0} x R x R x R

plus the complete geometry of the half-plane (R_{>0} x R, 4dx^2 + x^-6 dy^2):
geodesic spray, exact trajectories via the incomplete integral
F(u) = int_0^u z^6 / sqrt(1 - z^6) dz, the two-case boundary value solver,
Gauss curvature -3/x^2, a geodesic-distance lower bound, and the sectional
curvature of metric M2 on curve space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson, quad
from scipy.interpolate import CubicSpline

from .curve_core import DiscreteCurve, build_frame, ds_derivative, integrate_ds
from .errors import (
    DegeneratePlane,
    DomainExit,
    NoConvergence,
    NonPositive,
    OutOfRange,
)
from .metric_suite import MetricId, metric_eval

# -- fiber metrics ----------------------------------------------------------


def _as2d(q, dim):
    q = np.asarray(q, dtype=float)
    squeeze = q.ndim == 1
    q = np.atleast_2d(q)
    if q.shape[-1] != dim:
        raise ValueError(f"expected last axis {dim}, got {q.shape}")
    return q, squeeze


def _check_pattern(metric_id, q1):
    if np.any(q1 <= 0.0):
        raise NonPositive(f"{metric_id.value}: q1 must be positive "
                          f"(min {np.min(q1):.3e})")


def g_matrix(metric_id, q) -> np.ndarray:
    """Fiber metric as (..., d, d) matrices at the points q."""
    metric_id = MetricId.parse(metric_id)
    d = metric_id.fiber_dim
    q, squeeze = _as2d(q, d)
    _check_pattern(metric_id, q[:, 0])
    n = q.shape[0]
    g = np.zeros((n, d, d))
    q1 = q[:, 0]
    if metric_id is MetricId.M1:
        g[:, 0, 0] = 1.0
        g[:, 1, 1] = 1.0
    elif metric_id is MetricId.M2:
        g[:, 0, 0] = 4.0
        g[:, 1, 1] = q1 ** -6
    elif metric_id is MetricId.M3:
        g[:, 0, 0] = 4.0
        g[:, 1, 1] = q1 ** 2
        g[:, 2, 2] = q1 ** -6
    else:
        q4 = q[:, 3]
        g[:, 0, 0] = 4.0
        g[:, 1, 1] = q1 ** 2 + q4 ** 2 * q1 ** -6
        g[:, 1, 2] = g[:, 2, 1] = -q4 * q1 ** -4
        g[:, 2, 2] = q1 ** -2
        g[:, 3, 3] = q1 ** -6
    return g[0] if squeeze else g


def g_inv_matrix(metric_id, q) -> np.ndarray:
    """Closed-form inverse of the fiber metric, (..., d, d)."""
    metric_id = MetricId.parse(metric_id)
    d = metric_id.fiber_dim
    q, squeeze = _as2d(q, d)
    _check_pattern(metric_id, q[:, 0])
    n = q.shape[0]
    gi = np.zeros((n, d, d))
    q1 = q[:, 0]
    if metric_id is MetricId.M1:
        gi[:, 0, 0] = 1.0
        gi[:, 1, 1] = 1.0
    elif metric_id is MetricId.M2:
        gi[:, 0, 0] = 0.25
        gi[:, 1, 1] = q1 ** 6
    elif metric_id is MetricId.M3:
        gi[:, 0, 0] = 0.25
        gi[:, 1, 1] = q1 ** -2
        gi[:, 2, 2] = q1 ** 6
    else:
        # (q2, q3) block has determinant exactly 1
        q4 = q[:, 3]
        gi[:, 0, 0] = 0.25
        gi[:, 1, 1] = q1 ** -2
        gi[:, 1, 2] = gi[:, 2, 1] = q4 * q1 ** -4
        gi[:, 2, 2] = q1 ** 2 + q4 ** 2 * q1 ** -6
        gi[:, 3, 3] = q1 ** 6
    return gi[0] if squeeze else gi


def g_apply(metric_id, q, h) -> np.ndarray:
    """Lower an index: g_q(h, .)."""
    g = g_matrix(metric_id, q)
    h = np.asarray(h, dtype=float)
    if g.ndim == 2:
        return g @ h
    return np.einsum("kij,kj->ki", g, h)


def g_eval(metric_id, q, h, k):
    """g_q(h, k) pointwise (scalar or per-sample array)."""
    gh = g_apply(metric_id, q, h)
    k = np.asarray(k, dtype=float)
    if gh.ndim == 1:
        return float(gh @ k)
    return np.einsum("ki,ki->k", gh, k)


def g_inv(metric_id, q, p) -> np.ndarray:
    """Raise an index: g_q^{-1}(p, .)."""
    gi = g_inv_matrix(metric_id, q)
    p = np.asarray(p, dtype=float)
    if gi.ndim == 2:
        return gi @ p
    return np.einsum("kij,kj->ki", gi, p)


def g_inv_quad(metric_id, q, p):
    """g_q^{-1}(p, p) pointwise."""
    gp = g_inv(metric_id, q, p)
    p = np.asarray(p, dtype=float)
    if gp.ndim == 1:
        return float(gp @ p)
    return np.einsum("ki,ki->k", gp, p)


def g_grad(metric_id, q, p) -> np.ndarray:
    """Gradient of q -> g_q^{-1}(p, p) in q (same shape as q).

    Only q1 (all metrics) and q4 (M4) carry dependence.
    """
    metric_id = MetricId.parse(metric_id)
    d = metric_id.fiber_dim
    q, squeeze = _as2d(q, d)
    p, _ = _as2d(p, d)
    _check_pattern(metric_id, q[:, 0])
    q1 = q[:, 0]
    out = np.zeros_like(q)
    if metric_id is MetricId.M1:
        pass
    elif metric_id is MetricId.M2:
        out[:, 0] = 6.0 * q1 ** 5 * p[:, 1] ** 2
    elif metric_id is MetricId.M3:
        out[:, 0] = -2.0 * q1 ** -3 * p[:, 1] ** 2 + 6.0 * q1 ** 5 * p[:, 2] ** 2
    else:
        q4 = q[:, 3]
        p2, p3, p4 = p[:, 1], p[:, 2], p[:, 3]
        out[:, 0] = (-2.0 * q1 ** -3 * p2 ** 2
                     - 8.0 * q4 * q1 ** -5 * p2 * p3
                     + (2.0 * q1 - 6.0 * q4 ** 2 * q1 ** -7) * p3 ** 2
                     + 6.0 * q1 ** 5 * p4 ** 2)
        out[:, 3] = 2.0 * q1 ** -4 * p2 * p3 + 2.0 * q4 * q1 ** -6 * p3 ** 2
    return out[0] if squeeze else out


# -- the singular integral F and its arclength sibling ----------------------

def _psi(z):
    """(1 - z^6)/(1 - z) = 1 + z + z^2 + z^3 + z^4 + z^5."""
    return 1.0 + z * (1.0 + z * (1.0 + z * (1.0 + z * (1.0 + z))))


def F_integral(u: float) -> float:
    """F(u) = int_0^u z^6 / sqrt(1 - z^6) dz, absolute error < 1e-10.

    The endpoint singularity at z = 1 is removed by the substitution
    z = 1 - t^2, under which the integrand becomes 2 z^6 / sqrt(psi(z)).
    """
    if not -1e-12 <= u <= 1.0 + 1e-12:
        raise OutOfRange(f"F is defined on [0, 1]; got {u}")
    u = min(max(u, 0.0), 1.0)
    if u <= 0.9:
        val, _ = quad(lambda z: z ** 6 / np.sqrt(1.0 - z ** 6), 0.0, u,
                      epsabs=1e-13, epsrel=1e-13, limit=200)
        return val
    head, _ = quad(lambda z: z ** 6 / np.sqrt(1.0 - z ** 6), 0.0, 0.9,
                   epsabs=1e-13, epsrel=1e-13, limit=200)
    tail, _ = quad(lambda t: 2.0 * (1.0 - t * t) ** 6 / np.sqrt(_psi(1.0 - t * t)),
                   np.sqrt(1.0 - u), np.sqrt(0.1),
                   epsabs=1e-13, epsrel=1e-13, limit=200)
    return head + tail


class _Tables:
    """Dense spline tables for F and the arclength integral
    Phi(u) = int_0^u dz / sqrt(1 - z^6), parameterized by s = sqrt(1 - u)
    so the endpoint is resolved.  Built lazily once per process."""

    def __init__(self, m: int = 4001):
        s = np.linspace(0.0, 1.0, m)
        z = 1.0 - s * s
        root = np.sqrt(_psi(z))
        f_int = 2.0 * z ** 6 / root          # dF in -s direction
        p_int = 2.0 / root                   # dPhi in -s direction
        cf = cumulative_simpson(f_int, x=s, initial=0.0)
        cp = cumulative_simpson(p_int, x=s, initial=0.0)
        self.A = float(cf[-1])               # F(1)
        self.phi1 = float(cp[-1])            # Phi(1)
        self._f = CubicSpline(s, self.A - cf)
        self._phi = CubicSpline(s, self.phi1 - cp)
        # ascending-u arrays for inverse interpolation of Phi
        self._u_asc = z[::-1]
        self._phi_asc = (self.phi1 - cp)[::-1]

    def F(self, u):
        u = np.clip(u, 0.0, 1.0)
        return self._f(np.sqrt(1.0 - u))

    def dF(self, u):
        # huge-but-finite at u = 1 so safeguarded Newton steps stay defined
        u = np.asarray(u, dtype=float)
        return u ** 6 / np.sqrt(np.maximum(1.0 - u ** 6, 1e-300))

    def phi(self, u):
        u = np.clip(u, 0.0, 1.0)
        return self._phi(np.sqrt(1.0 - u))

    def phi_inverse(self, val):
        """Solve Phi(u) = val for u in [0, 1] (vectorized)."""
        val = np.clip(val, 0.0, self.phi1)
        u = np.interp(val, self._phi_asc, self._u_asc)
        for _ in range(3):  # Newton polish; dPhi/du = 1/sqrt(1-u^6)
            u = np.clip(u + (val - self.phi(u)) * np.sqrt(np.maximum(1.0 - u ** 6, 0.0)),
                        0.0, 1.0)
        return u


_tables: _Tables | None = None


def tables() -> _Tables:
    global _tables
    if _tables is None:
        _tables = _Tables()
    return _tables


# -- geodesics of (R_{>0} x R, 4dx^2 + x^-6 dy^2) ---------------------------

def spray2(p, v):
    """Geodesic acceleration (xdd, ydd) = (-3/4 x^-7 yd^2, 6 x^-1 xd yd)."""
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    x = p[..., 0]
    if np.any(x <= 0.0):
        raise DomainExit("spray evaluated at x <= 0")
    xd, yd = v[..., 0], v[..., 1]
    return np.stack([-0.75 * x ** -7 * yd ** 2, 6.0 * xd * yd / x], axis=-1)


def integrate_spray2(p0, v0, T: float, steps: int):
    """RK4 integration of the plane spray; supports stacked fibers.

    Returns (times, positions, velocities) with leading time axis.  Raises
    DomainExit (with the last in-domain time) if any fiber reaches x <= 0.
    """
    p = np.atleast_2d(np.asarray(p0, dtype=float)).copy()
    v = np.atleast_2d(np.asarray(v0, dtype=float)).copy()
    dt = T / steps
    times = np.linspace(0.0, T, steps + 1)
    ps = np.empty((steps + 1,) + p.shape)
    vs = np.empty_like(ps)
    ps[0], vs[0] = p, v

    def acc(pp, vv):
        return spray2(pp, vv)

    for j in range(steps):
        try:
            k1p, k1v = v, acc(p, v)
            k2p, k2v = v + 0.5 * dt * k1v, acc(p + 0.5 * dt * k1p, v + 0.5 * dt * k1v)
            k3p, k3v = v + 0.5 * dt * k2v, acc(p + 0.5 * dt * k2p, v + 0.5 * dt * k2v)
            k4p, k4v = v + dt * k3v, acc(p + dt * k3p, v + dt * k3v)
        except DomainExit as exc:
            raise DomainExit("geodesic left x > 0", exit_time=times[j],
                             partial=(times[: j + 1], ps[: j + 1], vs[: j + 1])) from exc
        p = p + (dt / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        v = v + (dt / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        if np.any(p[..., 0] <= 0.0):
            raise DomainExit("geodesic left x > 0", exit_time=times[j + 1],
                             partial=(times[: j + 1], ps[: j + 1], vs[: j + 1]))
        ps[j + 1], vs[j + 1] = p, v
    return times, ps, vs


@dataclass(frozen=True)
class Trajectory2:
    """Trajectory y(x) of a plane geodesic: kind 'ray' or 'arc'.

    For arcs, C > 0 is the trajectory constant: the branch through the
    initial point is y(x) = y0 + sgn * (2/C^4) (F(Cx) - F(Cx0)) on
    0 < x <= 1/C, the apex sits at x = 1/C, and the other branch is the
    reflection about the apex level.
    """

    kind: str
    x0: float
    y0: float
    C: float = np.nan
    sgn: float = 0.0
    apex: tuple[float, float] | None = None

    def y_of_x(self, x):
        tab = tables()
        if self.kind == "ray":
            return np.full_like(np.asarray(x, dtype=float), self.y0)
        x = np.asarray(x, dtype=float)
        if np.any((x <= 0) | (self.C * x > 1.0 + 1e-12)):
            raise OutOfRange("x outside (0, 1/C]")
        return self.y0 + self.sgn * (2.0 / self.C ** 4) * (
            tab.F(self.C * x) - tab.F(self.C * self.x0))


def trajectory2(p0, v0) -> Trajectory2:
    """Closed-form trajectory through p0 with velocity v0.

    The constant uses the conserved quantities C1 = yd/x^6 and
    C2^2 = xd^2 + C1^2 x^6 / 4 (C2 is xd continued to the y-axis), giving
    C = (|C1| / (2 C2))^{1/3}; the apex is at x = 1/C.
    """
    x0, y0 = float(p0[0]), float(p0[1])
    xd0, yd0 = float(v0[0]), float(v0[1])
    if x0 <= 0.0:
        raise DomainExit("x0 must be positive")
    if yd0 == 0.0:
        return Trajectory2(kind="ray", x0=x0, y0=y0)
    c1 = yd0 / x0 ** 6
    c2 = np.hypot(xd0, 0.5 * c1 * x0 ** 3)
    C = (abs(c1) / (2.0 * c2)) ** (1.0 / 3.0)
    if xd0 == 0.0:
        sgn = np.sign(yd0)   # at the apex; treat as the ascending branch
    else:
        sgn = np.sign(yd0 / xd0)
    tab = tables()
    apex_y = y0 + sgn * (2.0 / C ** 4) * (tab.A - tab.F(C * x0))
    return Trajectory2(kind="arc", x0=x0, y0=y0, C=C, sgn=sgn,
                       apex=(1.0 / C, apex_y))


@dataclass(frozen=True)
class FiberGeodesic:
    """Solved point-to-point geodesic in the half plane, unit time."""

    length: float
    case: str                      # 'point' | 'ray' | 'arc1' | 'arc2'
    times: np.ndarray
    points: np.ndarray             # (K, 2)
    velocities: np.ndarray         # (K, 2), d/dt at unit total time
    C: float = np.nan
    xbar: float = np.nan


def _solve_case1(x0, x1, dy, tol=1e-12, max_iter=200):
    """Find C in (0, 1/x1] with (2/C^4)(F(C x1) - F(C x0)) = dy."""
    tab = tables()

    def f(C):
        return (2.0 / C ** 4) * (tab.F(C * x1) - tab.F(C * x0)) - dy

    lo, hi = 1e-9 / x1, 1.0 / x1
    if f(hi) < 0.0:       # guard: numerically at the case boundary
        return hi
    # bisect to a relative bracket of 1e-3, then Newton
    it = 0
    while (hi - lo) > 1e-3 * hi:
        mid = 0.5 * (lo + hi)
        if f(mid) < 0.0:
            lo = mid
        else:
            hi = mid
        it += 1
        if it > max_iter:
            raise NoConvergence("case-1 bisection stalled")
    C = 0.5 * (lo + hi)
    for _ in range(60):
        val = f(C)
        if abs(val) < tol * max(1.0, abs(dy)):
            return C
        dF1 = tab.dF(min(C * x1, 1.0 - 1e-15))
        dF0 = tab.dF(C * x0)
        der = (-8.0 / C ** 5) * (tab.F(C * x1) - tab.F(C * x0)) \
            + (2.0 / C ** 4) * (dF1 * x1 - dF0 * x0)
        step = val / der if der != 0 else 0.0
        newC = C - step
        if not (lo <= newC <= hi) or step == 0.0:
            if val < 0.0:
                lo = C
            else:
                hi = C
            newC = 0.5 * (lo + hi)
        else:
            if val < 0.0:
                lo = C
            else:
                hi = C
        C = newC
        if hi - lo < 1e-16 * hi:
            return C
    return C


def _solve_case2(x0, x1, dy, tol=1e-12, max_iter=200):
    """Find the apex abscissa xbar >= x1 with
    2 xbar^4 (2A - F(x0/xbar) - F(x1/xbar)) = dy."""
    tab = tables()

    def f(xb):
        return 2.0 * xb ** 4 * (2.0 * tab.A - tab.F(x0 / xb) - tab.F(x1 / xb)) - dy

    lo = x1
    hi = x1 * 2.0
    it = 0
    while f(hi) < 0.0:
        lo, hi = hi, hi * 2.0
        it += 1
        if it > 200:
            raise NoConvergence("case-2 bracket expansion failed")
    while (hi - lo) > 1e-3 * hi:
        mid = 0.5 * (lo + hi)
        if f(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    xb = 0.5 * (lo + hi)
    for _ in range(60):
        val = f(xb)
        if abs(val) < tol * max(1.0, abs(dy)):
            return xb
        der = 8.0 * xb ** 3 * (2.0 * tab.A - tab.F(x0 / xb) - tab.F(x1 / xb)) \
            + 2.0 * xb ** 2 * (tab.dF(x0 / xb) * x0 + tab.dF(x1 / xb) * x1)
        step = val / der if der != 0 else 0.0
        new = xb - step
        if not (lo <= new <= hi) or step == 0.0:
            if val < 0.0:
                lo = xb
            else:
                hi = xb
            new = 0.5 * (lo + hi)
        else:
            if val < 0.0:
                lo = xb
            else:
                hi = xb
        xb = new
        if hi - lo < 1e-16 * hi:
            return xb
    return xb


def fiber_distance(p0, p1) -> float:
    """Geodesic distance in the half plane (no path construction)."""
    return _solve_fiber(p0, p1, full=False)


def bvp2(p0, p1, samples: int = 33) -> FiberGeodesic:
    """Unique geodesic between two points of the half plane, returned as
    `samples` uniform time samples on [0, 1] with constant g-speed."""
    return _solve_fiber(p0, p1, full=True, samples=samples)


def _solve_fiber(p0, p1, full: bool, samples: int = 33):
    x0, y0 = float(p0[0]), float(p0[1])
    x1, y1 = float(p1[0]), float(p1[1])
    if x0 <= 0.0 or x1 <= 0.0:
        raise NonPositive("fiber points need x > 0")
    tab = tables()
    K = int(samples)

    if x0 == x1 and y0 == y1:
        if not full:
            return 0.0
        times = np.linspace(0.0, 1.0, K)
        pts = np.tile([x0, y0], (K, 1))
        return FiberGeodesic(length=0.0, case="point", times=times,
                             points=pts, velocities=np.zeros((K, 2)))

    # symmetry normalization: swap endpoints so x0 <= x1 (time reversal),
    # then reflect y so dy >= 0; order matters, the swap re-labels y too
    swap = x0 > x1
    if swap:
        x0, x1, y0, y1 = x1, x0, y1, y0
    flip = y1 < y0
    if flip:
        y0, y1 = -y0, -y1
    dy = y1 - y0

    if dy == 0.0:
        length = 2.0 * (x1 - x0)
        if not full:
            return length
        times = np.linspace(0.0, 1.0, K)
        xs = x0 + (x1 - x0) * times
        pts = np.stack([xs, np.full(K, y0)], axis=1)
        vel = np.tile([x1 - x0, 0.0], (K, 1))
        return _denormalize(FiberGeodesic(length=length, case="ray",
                                          times=times, points=pts,
                                          velocities=vel), flip, swap)

    thresh = 2.0 * x1 ** 4 * (tab.A - tab.F(x0 / x1))
    if dy <= thresh * (1.0 + 1e-12):
        C = _solve_case1(x0, x1, dy)
        case = "arc1"
        xbar = 1.0 / C
    else:
        xbar = _solve_case2(x0, x1, dy)
        C = 1.0 / xbar
        case = "arc2"

    phi0 = tab.phi(min(C * x0, 1.0))
    phi1 = tab.phi(min(C * x1, 1.0))
    if case == "arc1":
        length = (2.0 / C) * (phi1 - phi0)
    else:
        length = (2.0 / C) * (2.0 * tab.phi1 - phi0 - phi1)
    if not full:
        return length

    times = np.linspace(0.0, 1.0, K)
    ell = length * times
    F0 = tab.F(C * x0)
    if case == "arc1":
        u = tab.phi_inverse(phi0 + 0.5 * C * ell)
        xs = u / C
        ys = y0 + (2.0 / C ** 4) * (tab.F(u) - F0)
        branch_desc = np.zeros(K, dtype=bool)
    else:
        ell_apex = (2.0 / C) * (tab.phi1 - phi0)
        branch_desc = ell > ell_apex
        target = np.where(branch_desc,
                          2.0 * tab.phi1 - (phi0 + 0.5 * C * ell),
                          phi0 + 0.5 * C * ell)
        u = tab.phi_inverse(target)
        xs = u / C
        ybar = y0 + (2.0 / C ** 4) * (tab.A - F0)
        ys = np.where(branch_desc,
                      ybar + (2.0 / C ** 4) * (tab.A - tab.F(u)),
                      y0 + (2.0 / C ** 4) * (tab.F(u) - F0))
    # exact endpoints (the root solve already matches them to tolerance)
    xs[0], ys[0] = x0, y0
    xs[-1], ys[-1] = x1, y1
    root = np.sqrt(np.maximum(1.0 - u ** 6, 0.0))
    dxdl = np.where(branch_desc, -0.5 * root, 0.5 * root)
    dydl = C ** 3 * xs ** 6
    vel = length * np.stack([dxdl, dydl], axis=1)
    geo = FiberGeodesic(length=length, case=case, times=times,
                        points=np.stack([xs, ys], axis=1),
                        velocities=vel, C=C, xbar=1.0 / C)
    return _denormalize(geo, flip, swap)


def _denormalize(geo: FiberGeodesic, flip: bool, swap: bool) -> FiberGeodesic:
    pts = geo.points.copy()
    vel = geo.velocities.copy()
    if swap:
        pts = pts[::-1].copy()
        vel = -vel[::-1].copy()
    if flip:
        pts[:, 1] = -pts[:, 1]
        vel[:, 1] = -vel[:, 1]
    return FiberGeodesic(length=geo.length, case=geo.case, times=geo.times,
                         points=pts, velocities=vel, C=geo.C, xbar=geo.xbar)


# -- curvature --------------------------------------------------------------

def scal2(p) -> float:
    """Gauss curvature of the half-plane metric: -3 / x^2."""
    x = float(np.asarray(p, dtype=float).reshape(-1)[0])
    if x <= 0.0:
        raise NonPositive("scal2 needs x > 0")
    return -3.0 / x ** 2


def curvature_quadratic(q1, h, k):
    """g_q(R^g(h,k)k, h) = -12 / q1^8 * (h1 k2 - h2 k1)^2 (pointwise)."""
    q1 = np.asarray(q1, dtype=float)
    h = np.asarray(h, dtype=float)
    k = np.asarray(k, dtype=float)
    det = h[..., 0] * k[..., 1] - h[..., 1] * k[..., 0]
    return -12.0 / q1 ** 8 * det ** 2


def dist2_lower_bound(p0, p1) -> float:
    """Lower bound for the half-plane geodesic distance:

        2 sqrt( dx^2 + dy^2 / ( sqrt(2) (x0^4 + x1^4 + |dy|/(2A))^{3/2} ) )

    Tight on y-constant rays and for coincident x in the short-distance
    limit.  (The rescaling constant is sqrt(2) = 2^{1/2}: with
    r = 2^{-1/12} X^{-1/4} one has r^6 = 2^{-1/2} X^{-3/2}.)
    """
    x0, y0 = float(p0[0]), float(p0[1])
    x1, y1 = float(p1[0]), float(p1[1])
    if x0 <= 0.0 or x1 <= 0.0:
        raise NonPositive("lower bound needs x > 0")
    dy = abs(y1 - y0)
    X = x0 ** 4 + x1 ** 4 + dy / (2.0 * tables().A)
    return 2.0 * np.sqrt((x0 - x1) ** 2 + dy ** 2 / (np.sqrt(2.0) * X ** 1.5))


def sectional_curvature_m2(curve: DiscreteCurve, h, k,
                           gram_tol: float = 1e-12) -> float:
    """Sectional curvature of metric M2 for the plane spanned by (h, k):

        -3 int ( <D_s h, v><D_s^2 k, n> - <D_s k, v><D_s^2 h, n> )^2 ds
        -----------------------------------------------------------------
                  G(h,h) G(k,k) - G(h,k)^2

    Always <= 0; raises DegeneratePlane when the Gram determinant is
    numerically zero (e.g. k parallel to h modulo the kernel).
    """
    frame = build_frame(curve)
    h = np.asarray(h, dtype=float)
    k = np.asarray(k, dtype=float)
    ghh = metric_eval(MetricId.M2, curve, h, h, frame)
    gkk = metric_eval(MetricId.M2, curve, k, k, frame)
    ghk = metric_eval(MetricId.M2, curve, h, k, frame)
    gram = ghh * gkk - ghk ** 2
    if gram <= gram_tol * max(ghh * gkk, 1e-300):
        raise DegeneratePlane("plane spanned by (h, k) is degenerate")
    dsh = ds_derivative(curve, h, frame)
    dsk = ds_derivative(curve, k, frame)
    ds2h = ds_derivative(curve, dsh, frame)
    ds2k = ds_derivative(curve, dsk, frame)
    a1h = np.einsum("ki,ki->k", dsh, frame.v)
    a1k = np.einsum("ki,ki->k", dsk, frame.v)
    b2h = np.einsum("ki,ki->k", ds2h, frame.n)
    b2k = np.einsum("ki,ki->k", ds2k, frame.n)
    w = a1h * b2k - a1k * b2h
    numerator = -3.0 * integrate_ds(curve, w ** 2, frame)
    return numerator / gram
