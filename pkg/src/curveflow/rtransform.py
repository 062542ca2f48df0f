"""The four curve transforms, their inverses and differentials, the
closedness/derivative constraints cutting out their images, constraint
gradients, and orthogonal projections onto image tangent spaces.

Transform components per metric (q1 is always sqrt(|c'|)-based and positive):

    M1: sqrt(|c'|) (2, 4 kappa^{1/4})          convex curves only
    M2: (sqrt(|c'|), kappa |c'|^2)
    M3: (sqrt(|c'|), alpha, kappa |c'|^2)
    M4: (sqrt(|c'|), alpha, D_s|c'|, kappa |c'|^2)

For M3/M4 the alpha component stores the real-valued lift (not mod 2pi);
for closed curves the winding number is carried alongside so that wrapped
differences are single-valued.

Discretization conventions: the derivative constraint uses forward
differences (matching the Hamiltonian module bit for bit), the closedness
constraint uses the quadrature of the grid (periodic trapezoid = left
Riemann sum on closed grids), and all constraint gradients are the exact
adjoints of those discrete functionals, so they satisfy finite-difference
identities to solver precision.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.linalg import solve_banded

from .curve_core import CurveFrame, DiscreteCurve, build_frame, ds_derivative, trapezoid_weights
from .errors import NonPositive, OffImage, SingularSystem
from .metric_suite import EPS_CONVEX, MetricId, _require_convex
from .pointwise_geometry import g_eval, g_inv


@dataclass(frozen=True)
class RPoint:
    """Sampled map into the transform target R^d_+ for one metric."""

    metric_id: MetricId
    q: np.ndarray
    closed: bool
    winding: int | None = None

    def __post_init__(self):
        mid = MetricId.parse(self.metric_id)
        object.__setattr__(self, "metric_id", mid)
        q = np.ascontiguousarray(np.asarray(self.q, dtype=float))
        if q.ndim != 2 or q.shape[1] != mid.fiber_dim:
            raise ValueError(f"q must be (N, {mid.fiber_dim}) for {mid.value}")
        q.setflags(write=False)
        object.__setattr__(self, "q", q)

    @property
    def n_samples(self) -> int:
        return self.q.shape[0]

    @property
    def theta_step(self) -> float:
        n = self.n_samples
        return 2.0 * np.pi / n if self.closed else 2.0 * np.pi / (n - 1)

    def with_q(self, q) -> "RPoint":
        return RPoint(self.metric_id, q, self.closed, self.winding)


@dataclass(frozen=True)
class ConstraintValue:
    """h_diff: per-sample derivative-compatibility residuals (None for
    M1/M2); h_cl: the planar closedness gap, equal to c(2pi) - c(0) of the
    reconstructed curve."""

    h_diff: np.ndarray | None
    h_cl: np.ndarray


def check_pattern(rpoint: RPoint) -> None:
    q = rpoint.q
    if np.any(q[:, 0] <= 0.0):
        raise NonPositive("q1 must be positive everywhere")
    if rpoint.metric_id is MetricId.M1 and np.any(q[:, 1] <= 0.0):
        raise NonPositive("M1 requires q2 > 0 (convexity)")


# -- forward / inverse / differential ---------------------------------------

def r_forward(metric_id, curve: DiscreteCurve,
              frame: CurveFrame | None = None,
              eps_convex: float = EPS_CONVEX) -> RPoint:
    metric_id = MetricId.parse(metric_id)
    if frame is None:
        frame = build_frame(curve)
    root = np.sqrt(frame.speed)
    if metric_id is MetricId.M1:
        _require_convex(frame, eps_convex)
        q = np.stack([2.0 * root, 4.0 * frame.kappa ** 0.25 * root], axis=1)
    elif metric_id is MetricId.M2:
        q = np.stack([root, frame.kappa * frame.speed ** 2], axis=1)
    elif metric_id is MetricId.M3:
        q = np.stack([root, frame.alpha, frame.kappa * frame.speed ** 2], axis=1)
    else:
        ds_speed = ds_derivative(curve, frame.speed, frame)
        q = np.stack([root, frame.alpha, ds_speed,
                      frame.kappa * frame.speed ** 2], axis=1)
    winding = frame.winding if (curve.closed and
                                metric_id in (MetricId.M3, MetricId.M4)) else None
    return RPoint(metric_id, q, curve.closed, winding)


def _alpha_of(rpoint: RPoint) -> np.ndarray:
    """The turning angle encoded by an RPoint (cumulative for M1/M2)."""
    q = rpoint.q
    dth = rpoint.theta_step
    mid = rpoint.metric_id
    if mid is MetricId.M1:
        w = 2.0 ** -6 * q[:, 0] ** -2 * q[:, 1] ** 4
        return cumulative_trapezoid(w, dx=dth, initial=0.0)
    if mid is MetricId.M2:
        w = q[:, 1] * q[:, 0] ** -2
        return cumulative_trapezoid(w, dx=dth, initial=0.0)
    return q[:, 1]


def _speed_of(rpoint: RPoint) -> np.ndarray:
    """|c'| encoded by an RPoint (includes the M1 inversion constant)."""
    q1 = rpoint.q[:, 0]
    if rpoint.metric_id is MetricId.M1:
        return 2.0 ** -2 * q1 ** 2
    return q1 ** 2


def r_inverse(metric_id, rpoint: RPoint | None = None) -> DiscreteCurve:
    """Reconstruct the curve (translation representative starting at the
    origin) by cumulative trapezoid integration of |c'| exp(i alpha)."""
    if rpoint is None:
        rpoint = metric_id
    elif MetricId.parse(metric_id) is not rpoint.metric_id:
        raise ValueError("metric id does not match the RPoint")
    check_pattern(rpoint)
    speed = _speed_of(rpoint)
    alpha = _alpha_of(rpoint)
    dth = rpoint.theta_step
    integrand = speed[:, None] * np.stack([np.cos(alpha), np.sin(alpha)], axis=1)
    pts = cumulative_trapezoid(integrand, dx=dth, initial=0.0, axis=0)
    return DiscreteCurve(pts, rpoint.closed)


def dr(metric_id, curve: DiscreteCurve, h,
       frame: CurveFrame | None = None,
       eps_convex: float = EPS_CONVEX) -> np.ndarray:
    """Differential of the transform at c applied to the field h."""
    metric_id = MetricId.parse(metric_id)
    if frame is None:
        frame = build_frame(curve)
    h = np.asarray(h, dtype=float)
    dsh = ds_derivative(curve, h, frame)
    ds2h = ds_derivative(curve, dsh, frame)
    a1 = np.einsum("ki,ki->k", dsh, frame.v)
    b1 = np.einsum("ki,ki->k", dsh, frame.n)
    a2 = np.einsum("ki,ki->k", ds2h, frame.v)
    b2 = np.einsum("ki,ki->k", ds2h, frame.n)
    root = np.sqrt(frame.speed)
    if metric_id is MetricId.M1:
        _require_convex(frame, eps_convex)
        return np.stack([a1 * root, frame.kappa ** -0.75 * b2 * root], axis=1)
    if metric_id is MetricId.M2:
        return np.stack([0.5 * a1 * root, b2 * frame.speed ** 2], axis=1)
    if metric_id is MetricId.M3:
        return np.stack([0.5 * a1 * root, b1, b2 * frame.speed ** 2], axis=1)
    return np.stack([0.5 * a1 * root, b1,
                     frame.speed * a2 + frame.speed * frame.kappa * b1,
                     b2 * frame.speed ** 2], axis=1)


# -- constraints ------------------------------------------------------------

def _forward_diff(f: np.ndarray, dth: float, closed: bool,
                  wrap_offset: float = 0.0) -> np.ndarray:
    """(f_{k+1} - f_k)/dth; closed grids wrap, adding wrap_offset at the
    seam (2 pi winding for angle lifts).  Open grids return N-1 values."""
    if closed:
        nxt = np.roll(f, -1)
        nxt[-1] += wrap_offset
        return (nxt - f) / dth
    return (f[1:] - f[:-1]) / dth


def _winding_of(rpoint: RPoint) -> int:
    if rpoint.winding is not None:
        return rpoint.winding
    if not rpoint.closed or rpoint.metric_id in (MetricId.M1, MetricId.M2):
        return 0
    # infer from the derivative constraint: q2' ~ q1^-2 q3 predicts the seam
    q = rpoint.q
    dth = rpoint.theta_step
    pred = q[-1, 1] + dth * q[-1, 2] / q[-1, 0] ** 2 if rpoint.metric_id is MetricId.M3 \
        else q[-1, 1] + dth * q[-1, 3] / q[-1, 0] ** 2
    return int(round((pred - q[0, 1]) / (2.0 * np.pi)))


def constraints(metric_id, rpoint: RPoint | None = None) -> ConstraintValue:
    """Evaluate the image constraints at an RPoint.

    h_cl equals the endpoint gap c(2pi) - c(0) of r_inverse(q) under the
    grid quadrature (for M1 this includes the 2^-2 inversion constant, so
    the zero set is unchanged but the value is the geometric gap).
    h_diff uses forward differences: for M3 the per-sample form
    q1^-2 q3 - (q2^{k+1} - q2^k)/dtheta, for M4 the stacked pair
    (q3 - 2 q1^-1 q1', q4 - q1^2 q2').
    """
    if rpoint is None:
        rpoint = metric_id
    check_pattern(rpoint)
    q = rpoint.q
    dth = rpoint.theta_step
    mid = rpoint.metric_id
    n = rpoint.n_samples
    tau = trapezoid_weights(n, rpoint.closed)
    alpha = _alpha_of(rpoint)
    scale = 2.0 ** -2 if mid is MetricId.M1 else 1.0
    h_cl = scale * np.array([
        np.sum(tau * q[:, 0] ** 2 * np.cos(alpha)) * dth,
        np.sum(tau * q[:, 0] ** 2 * np.sin(alpha)) * dth,
    ])
    h_diff = None
    if mid is MetricId.M3:
        wrap = 2.0 * np.pi * _winding_of(rpoint)
        d2 = _forward_diff(q[:, 1], dth, rpoint.closed, wrap)
        head = q if rpoint.closed else q[:-1]
        h_diff = head[:, 2] * head[:, 0] ** -2 - d2
    elif mid is MetricId.M4:
        wrap = 2.0 * np.pi * _winding_of(rpoint)
        d1 = _forward_diff(q[:, 0], dth, rpoint.closed)
        d2 = _forward_diff(q[:, 1], dth, rpoint.closed, wrap)
        head = q if rpoint.closed else q[:-1]
        h_diff = np.concatenate([head[:, 2] - 2.0 * head[:, 0] ** -1 * d1,
                                 head[:, 3] - head[:, 0] ** 2 * d2])
    return ConstraintValue(h_diff=h_diff, h_cl=h_cl)


def closure_scale(rpoint: RPoint) -> float:
    """Length-like scale sum q1^2 dtheta used for relative tolerances."""
    tau = trapezoid_weights(rpoint.n_samples, rpoint.closed)
    return float(np.sum(tau * rpoint.q[:, 0] ** 2) * rpoint.theta_step)


def is_on_image(rpoint: RPoint, tol: float = 1e-8) -> bool:
    val = constraints(rpoint)
    ok = np.linalg.norm(val.h_cl) <= tol * closure_scale(rpoint)
    if val.h_diff is not None:
        ok = ok and np.max(np.abs(val.h_diff)) <= tol * max(
            1.0, np.max(np.abs(rpoint.q[:, 2])))
    return bool(ok)


# -- exact discrete constraint gradients ------------------------------------

def _adjoint_cumtrapz(u: np.ndarray, dth: float) -> np.ndarray:
    """Transpose of w -> cumulative_trapezoid(w, initial=0) applied to u.

    With alpha_k = dth * (w_0/2 + w_1 + ... + w_{k-1} + w_k/2), the
    adjoint is a reverse cumulative sum: the discrete tail integral."""
    n = u.shape[0]
    tail = np.concatenate([np.cumsum(u[::-1])[::-1][1:], [0.0]])
    out = dth * (0.5 * u + tail)
    out[0] = dth * 0.5 * tail[0]
    return out


def weighted_inner(metric_id, q_array, a, b, closed: bool) -> float:
    """The L2(g) pairing sum tau_k g_{q_k}(a_k, b_k) dtheta."""
    n = q_array.shape[0]
    dth = 2.0 * np.pi / n if closed else 2.0 * np.pi / (n - 1)
    tau = trapezoid_weights(n, closed)
    vals = g_eval(metric_id, q_array, np.asarray(a, float), np.asarray(b, float))
    return float(np.sum(tau * vals) * dth)


def constraint_gradients(metric_id, rpoint: RPoint | None = None) -> list[np.ndarray]:
    """L2(g)-gradients of the two closedness constraint components.

    These are the exact adjoints of the discrete constraints() functional
    (tail integrals realized as reverse cumulative sums), so directional
    derivatives match finite differences to solver precision; on closed
    grids they agree with the continuum formulas to quadrature order, and
    for M3 exactly.
    """
    if rpoint is None:
        rpoint = metric_id
    check_pattern(rpoint)
    q = rpoint.q
    mid = rpoint.metric_id
    n = rpoint.n_samples
    dth = rpoint.theta_step
    tau = trapezoid_weights(n, rpoint.closed)
    alpha = _alpha_of(rpoint)
    scale = 2.0 ** -2 if mid is MetricId.M1 else 1.0
    q1 = q[:, 0]
    grads = []
    for trig, dtrig in ((np.cos, lambda a: -np.sin(a)),
                        (np.sin, np.cos)):
        e = np.zeros_like(q)
        e[:, 0] = scale * 2.0 * q1 * trig(alpha) * tau * dth
        m = scale * q1 ** 2 * dtrig(alpha) * tau * dth  # multiplier of d(alpha)
        if mid in (MetricId.M3, MetricId.M4):
            e[:, 1] = m
        else:
            t = _adjoint_cumtrapz(m, dth)  # multiplier of d(alpha'-density)
            if mid is MetricId.M1:
                e[:, 0] += t * (-2.0) * 2.0 ** -6 * q1 ** -3 * q[:, 1] ** 4
                e[:, 1] = t * 4.0 * 2.0 ** -6 * q1 ** -2 * q[:, 1] ** 3
            else:
                e[:, 0] += t * (-2.0) * q[:, 1] * q1 ** -3
                e[:, 1] = t * q1 ** -2
        grads.append(g_inv(mid, q, e / (tau * dth)[:, None]))
    return grads


# -- cyclic elliptic solve ---------------------------------------------------

def elliptic_solve(a, b, f, dtheta: float, a_on_edges: bool = False) -> np.ndarray:
    """Solve the periodic equation -(a u')' + b u = f with the conservative
    second-order stencil

        -(a_{k+1/2}(u_{k+1}-u_k) - a_{k-1/2}(u_k-u_{k-1}))/dtheta^2 + b_k u_k = f_k

    via a cyclic banded factorization (Sherman-Morrison on the corners).
    With a_on_edges=True, a[k] is taken as the edge value a_{k+1/2};
    otherwise edges are arithmetic means of node values.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    f = np.asarray(f, dtype=float)
    n = f.shape[0]
    if np.any(a <= 0.0) or np.any(b < 0.0):
        raise ValueError("need a > 0 and b >= 0")
    ae = a if a_on_edges else 0.5 * (a + np.roll(a, -1))  # ae[k] = a_{k+1/2}
    inv = 1.0 / dtheta ** 2
    diag = (ae + np.roll(ae, 1)) * inv + b
    upper = -ae * inv                    # couples k to k+1
    lower = -np.roll(ae, 1) * inv        # couples k to k-1

    corner = upper[-1]                   # coupling (n-1, 0) and (0, n-1)
    gamma = -diag[0]
    d = diag.copy()
    d[0] -= gamma
    d[-1] -= corner * corner / gamma

    ab = np.zeros((3, n))
    ab[0, 1:] = upper[:-1]
    ab[1, :] = d
    ab[2, :-1] = lower[1:]
    rhs = np.stack([f, np.zeros(n)], axis=1)
    rhs[0, 1] = gamma
    rhs[-1, 1] = corner
    try:
        sol = solve_banded((1, 1), ab, rhs)
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise SingularSystem(str(exc)) from exc
    y, z = sol[:, 0], sol[:, 1]
    denom = 1.0 + z[0] + (corner / gamma) * z[-1]
    if denom == 0.0 or not np.all(np.isfinite(sol)):
        raise SingularSystem("cyclic correction is singular")
    factor = (y[0] + (corner / gamma) * y[-1]) / denom
    u = y - factor * z
    resid = (-(ae * (np.roll(u, -1) - u) - np.roll(ae, 1) * (u - np.roll(u, 1)))
             * inv + b * u - f)
    if not np.all(np.isfinite(u)) or np.max(np.abs(resid)) > 1e-8 * max(
            1.0, np.max(np.abs(f))):
        raise SingularSystem("cyclic banded solve failed to converge")
    return u


# -- orthogonal projection onto the image tangent space ----------------------

def _project_op_m3(q: np.ndarray, h: np.ndarray, dth: float) -> np.ndarray:
    """Exact discrete orthogonal projection onto the tangent space of the
    derivative constraint {k3 = 2 q1^-1 q3 k1 + q1^2 (D+ k2)}, D+ the
    cyclic forward difference.  Reduces to a periodic elliptic solve
    q1^2 k2 - D-(A D+ k2) = q1^2 h2 - D-(G), with
    A = q1^6/(q1^8+q3^2) on edges and G = (2 q1^3 q3 h1 - q1^4 h3)/(q1^8+q3^2)."""
    q1, q3 = q[:, 0], q[:, 2]
    h1, h2, h3 = h[:, 0], h[:, 1], h[:, 2]
    denom = q1 ** 8 + q3 ** 2
    A = q1 ** 6 / denom
    G = (2.0 * q1 ** 3 * q3 * h1 - q1 ** 4 * h3) / denom
    f = q1 ** 2 * h2 + (G - np.roll(G, 1)) / dth
    k2 = elliptic_solve(A, q1 ** 2, f, dth, a_on_edges=True)
    u = (np.roll(k2, -1) - k2) / dth
    k1 = (2.0 * q1 ** 8 * h1 + q1 * q3 * h3 - q1 ** 3 * q3 * u) / (2.0 * denom)
    k3 = 2.0 * q3 / q1 * k1 + q1 ** 2 * u
    return np.stack([k1, k2, k3], axis=1)


def _remove_span(metric_id, q, closed, h, basis):
    """Subtract the L2(g)-orthogonal projection of h onto span(basis)."""
    m = len(basis)
    gram = np.empty((m, m))
    rhs = np.empty(m)
    for i in range(m):
        rhs[i] = weighted_inner(metric_id, q, h, basis[i], closed)
        for j in range(i, m):
            gram[i, j] = gram[j, i] = weighted_inner(metric_id, q,
                                                     basis[i], basis[j], closed)
    beta = np.linalg.solve(gram, rhs)
    out = h.copy()
    for i in range(m):
        out -= beta[i] * basis[i]
    return out


def project_image(metric_id, rpoint: RPoint | None = None, h=None,
                  image_tol: float = 1e-3) -> np.ndarray:
    """L2(g)-orthogonal projection of an ambient tangent h onto the tangent
    space of the image of the transform (closed curves).

    M1/M2: subtract the span of the two closedness gradients.  M3: project
    onto the derivative-constraint tangent space by the elliptic solve,
    then subtract the span of the projected closedness gradients.  M4 is
    not supported.  Raises OffImage when the constraints at q exceed
    image_tol relative to the closure scale.
    """
    if h is None:
        rpoint, h = metric_id, rpoint
        metric_id = rpoint.metric_id
    metric_id = MetricId.parse(metric_id)
    if metric_id is not rpoint.metric_id:
        raise ValueError("metric id does not match the RPoint")
    if metric_id is MetricId.M4:
        raise NotImplementedError("M4 image projection is not provided")
    if not rpoint.closed:
        raise OffImage("projection is defined on closed-curve images")
    val = constraints(rpoint)
    if np.linalg.norm(val.h_cl) > image_tol * closure_scale(rpoint):
        raise OffImage(f"|H_cl| = {np.linalg.norm(val.h_cl):.3e} too large")
    if val.h_diff is not None and np.max(np.abs(val.h_diff)) > image_tol * max(
            1.0, float(np.max(np.abs(rpoint.q[:, 2])))):
        raise OffImage("derivative constraint residual too large")
    h = np.asarray(h, dtype=float)
    q = rpoint.q
    grads = constraint_gradients(rpoint)
    if metric_id in (MetricId.M1, MetricId.M2):
        return _remove_span(metric_id, q, rpoint.closed, h, grads)
    p_h = _project_op_m3(q, h, rpoint.theta_step)
    basis = [_project_op_m3(q, g, rpoint.theta_step) for g in grads]
    return _remove_span(metric_id, q, rpoint.closed, p_h, basis)


# -- tangent lift helper ------------------------------------------------------

def tangent_from_free(rpoint: RPoint, k1: np.ndarray, k2: np.ndarray) -> np.ndarray:
    """Assemble an M3 derivative-constraint tangent from its two free
    components (k3 fixed by the forward-difference relation)."""
    q = rpoint.q
    dth = rpoint.theta_step
    u = (np.roll(k2, -1) - k2) / dth
    k3 = 2.0 * q[:, 2] / q[:, 0] * k1 + q[:, 0] ** 2 * u
    return np.stack([k1, k2, k3], axis=1)


# -- file format ------------------------------------------------------------

def rpoint_to_dict(rpoint: RPoint) -> dict:
    data = {"metric": rpoint.metric_id.value, "closed": bool(rpoint.closed),
            "q": [[float(x) for x in row] for row in rpoint.q]}
    if rpoint.winding is not None:
        data["winding"] = int(rpoint.winding)
    return data


def rpoint_from_dict(data: dict) -> RPoint:
    return RPoint(MetricId.parse(data["metric"]),
                  np.array(data["q"], dtype=float),
                  bool(data["closed"]),
                  data.get("winding"))


def save_rpoint(rpoint: RPoint, path) -> None:
    with open(path, "w") as fh:
        json.dump(rpoint_to_dict(rpoint), fh)
        fh.write("\n")


def load_rpoint(path) -> RPoint:
    with open(path) as fh:
        return rpoint_from_dict(json.load(fh))
