"""Geodesic initial/boundary value solvers and distances per metric.

Dispatch:
    M1  flat transform target: straight-line interpolation / rays, exact.
    M2  pointwise fiber geodesics of the half-plane model, exact per theta.
    M3  RATTLE on the constrained transform-space system; boundary value
        problems by momentum shooting over a reduced Fourier basis.
    M4  transforms only (no boundary solver).

Inputs are centered (the metrics ignore translations); M1/M2 inputs are
additionally rotation-normalized to the ds-mean-zero turning angle section.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .constrained_hamiltonian import (
    HamiltonianState,
    SimulationResult,
    project_consistent,
    project_to_manifold,
    simulate,
)
from .curve_core import (
    DiscreteCurve,
    build_frame,
    center,
    curve_length,
    integrate_ds,
    normalize_rotation,
    save_curve,
    trapezoid_weights,
)
from .errors import CurveflowError, DomainExit, ShootingStall, SingularVerticalOperator
from .metric_suite import MetricId, apply_L
from .pointwise_geometry import bvp2, fiber_distance, g_apply, integrate_spray2, tables
from .rtransform import (
    RPoint,
    dr,
    project_image,
    r_forward,
    r_inverse,
    weighted_inner,
)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("CURVEFLOW_THREADS", "1")))
    except ValueError:
        return 1


@dataclass
class GeodesicPath:
    """Time-indexed sequence of curves with per-step diagnostics."""

    metric_id: MetricId
    times: np.ndarray
    curves: list
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_snapshots(self) -> int:
        return len(self.curves)

    def export(self, outdir) -> None:
        """JSON manifest + per-snapshot curve files + diagnostics CSV."""
        os.makedirs(outdir, exist_ok=True)
        files = []
        for j, c in enumerate(self.curves):
            name = f"curve_{j:04d}.json"
            save_curve(c, os.path.join(outdir, name))
            files.append(name)
        manifest = {
            "metric": self.metric_id.value,
            "times": [float(t) for t in self.times],
            "curves": files,
        }
        with open(os.path.join(outdir, "manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=1)
            fh.write("\n")
        scalars = {k: np.asarray(v) for k, v in self.diagnostics.items()
                   if np.ndim(v) == 1 and len(np.asarray(v)) == len(self.times)}
        if scalars:
            header = "t," + ",".join(scalars)
            data = np.stack([np.asarray(self.times)]
                            + [scalars[k] for k in scalars], axis=1)
            np.savetxt(os.path.join(outdir, "diagnostics.csv"), data,
                       delimiter=",", header=header, comments="")


@dataclass
class DistanceResult:
    """Geodesic distance plus the provable lower bounds."""

    value: float
    lower_bounds: dict
    details: dict = field(default_factory=dict)

    def __float__(self):
        return float(self.value)


def _prep(metric_id, curve: DiscreteCurve) -> DiscreteCurve:
    metric_id = MetricId.parse(metric_id)
    out = center(curve)
    if metric_id in (MetricId.M1, MetricId.M2):
        out = normalize_rotation(out)
    return out


def _prep_pair(metric_id, curve: DiscreteCurve, velocity):
    """Normalize a (curve, velocity) pair by the same Euclidean motion:
    centering shifts only the curve; the section rotation acts on both."""
    metric_id = MetricId.parse(metric_id)
    out = center(curve)
    u = np.asarray(velocity, dtype=float)
    if metric_id in (MetricId.M1, MetricId.M2):
        frame = build_frame(out)
        phi = -integrate_ds(out, frame.alpha, frame) / curve_length(out, frame)
        rot = np.array([[np.cos(phi), -np.sin(phi)],
                        [np.sin(phi), np.cos(phi)]])
        out = out.with_points(out.points @ rot.T)
        u = u @ rot.T
    return out, u


def _require(cond, message):
    if not cond:
        raise CurveflowError(message)


def _sqrt_length_bound(c0, c1, factor: float) -> float:
    return factor * abs(np.sqrt(curve_length(c1)) - np.sqrt(curve_length(c0)))


# -- boundary value problems --------------------------------------------------

def geodesic_bvp(metric_id, c0: DiscreteCurve, c1: DiscreteCurve, K: int = 17,
                 T: float = 1.0, **options) -> GeodesicPath:
    """Geodesic connecting c0 to c1, returned as K snapshots on [0, T]."""
    metric_id = MetricId.parse(metric_id)
    _require(c0.n_samples == c1.n_samples and c0.closed == c1.closed,
             "endpoint curves must share the sampling grid")
    if metric_id is MetricId.M1:
        _require(not c0.closed, "M1 boundary solver works on open curves")
        return _bvp_flat(c0, c1, K, T)
    if metric_id is MetricId.M2:
        _require(not c0.closed, "M2 boundary solver works on open curves")
        return _bvp_fiberwise(c0, c1, K, T)
    if metric_id is MetricId.M3:
        _require(c0.closed, "M3 works on closed curves")
        return _bvp_shooting(c0, c1, K, T, **options)
    raise CurveflowError("no boundary solver for the full H2 transform (M4)")


def _bvp_flat(c0, c1, K, T) -> GeodesicPath:
    c0, c1 = _prep(MetricId.M1, c0), _prep(MetricId.M1, c1)
    q0 = r_forward(MetricId.M1, c0)
    q1 = r_forward(MetricId.M1, c1)
    times = np.linspace(0.0, T, K)
    qs = np.empty((K,) + q0.q.shape)
    curves = []
    for j, t in enumerate(times):
        s = t / T
        qs[j] = (1.0 - s) * q0.q + s * q1.q
        curves.append(r_inverse(RPoint(MetricId.M1, qs[j], False)))
    dist = _flat_distance(q0.q, q1.q, q0.theta_step, closed=False)
    return GeodesicPath(MetricId.M1, times, curves,
                        {"rspace": qs, "distance": dist,
                         "energy": dist ** 2 / T})


def _flat_distance(qa, qb, dth, closed) -> float:
    tau = trapezoid_weights(qa.shape[0], closed)
    return float(np.sqrt(np.sum(tau[:, None] * (qb - qa) ** 2) * dth))


def path_energy_rspace(path: GeodesicPath) -> float:
    """Time quadrature of the squared transform-space speed (M1 paths)."""
    qs = path.diagnostics["rspace"]
    times = np.asarray(path.times)
    dth = 2.0 * np.pi / (qs.shape[1] - (0 if path.curves[0].closed else 1))
    tau = trapezoid_weights(qs.shape[1], path.curves[0].closed)
    e = 0.0
    for j in range(len(times) - 1):
        dt = times[j + 1] - times[j]
        dq = (qs[j + 1] - qs[j]) / dt
        e += float(np.sum(tau[:, None] * dq ** 2) * dth) * dt
    return e


def _fiber_bvp_batch(p0s, p1s, K):
    """Solve the half-plane boundary problem for every theta fiber."""
    nthreads = _threads()
    idx = range(p0s.shape[0])

    def one(k):
        return bvp2(p0s[k], p1s[k], samples=K)

    if nthreads > 1:
        with ThreadPoolExecutor(max_workers=nthreads) as pool:
            return list(pool.map(one, idx))
    return [one(k) for k in idx]


def _bvp_fiberwise(c0, c1, K, T) -> GeodesicPath:
    c0, c1 = _prep(MetricId.M2, c0), _prep(MetricId.M2, c1)
    q0 = r_forward(MetricId.M2, c0)
    q1 = r_forward(MetricId.M2, c1)
    geos = _fiber_bvp_batch(q0.q, q1.q, K)
    times = np.linspace(0.0, T, K)
    n = q0.n_samples
    qs = np.empty((K, n, 2))
    for k, geo in enumerate(geos):
        qs[:, k, :] = geo.points
    curves = [r_inverse(RPoint(MetricId.M2, qs[j], False)) for j in range(K)]
    lengths = np.array([geo.length for geo in geos])
    tau = trapezoid_weights(n, False)
    dist = float(np.sqrt(np.sum(tau * lengths ** 2) * q0.theta_step))
    vel0 = np.stack([geo.velocities[0] / T for geo in geos])
    return GeodesicPath(MetricId.M2, times, curves,
                        {"rspace": qs, "fiber_lengths": lengths,
                         "distance": dist, "initial_velocity_rspace": vel0})


def _fourier_basis(n: int, modes: int) -> np.ndarray:
    th = 2.0 * np.pi * np.arange(n) / n
    cols = [np.ones(n)]
    for m in range(1, modes + 1):
        cols.append(np.cos(m * th))
        cols.append(np.sin(m * th))
    return np.stack(cols, axis=1)          # (n, 2*modes+1)


def _shooting_state(q0: RPoint, xi: np.ndarray, basis: np.ndarray,
                    T: float) -> HamiltonianState:
    nb = basis.shape[1]
    u1 = basis @ xi[:nb]
    u2 = basis @ xi[nb:]
    dth = q0.theta_step
    du2 = (np.roll(u2, -1) - u2) / dth
    u3 = 2.0 * q0.q[:, 2] / q0.q[:, 0] * u1 + q0.q[:, 0] ** 2 * du2
    v = np.stack([u1, u2, u3], axis=1)
    p_raw = g_apply(MetricId.M3, q0.q, v) / dth
    return project_consistent(q0, p_raw)


def _bvp_shooting(c0, c1, K, T, dt: float = 1e-2, modes: int = 10,
                  max_modes: int = 24, tol: float = 1e-4,
                  max_iter: int = 40) -> GeodesicPath:
    """Momentum shooting for the constrained transform-space system.

    The unknown initial momentum is parameterized by the first Fourier
    modes of the two free tangent components at q0; the residual is the
    endpoint gap projected to the image tangent space at the target,
    minimized by damped Gauss-Newton with a forward-difference Jacobian.
    On a stall the mode count is enlarged and the solve continues.
    """
    c0, c1 = center(c0), center(c1)
    q0 = project_to_manifold(r_forward(MetricId.M3, c0))
    q1 = project_to_manifold(r_forward(MetricId.M3, c1))
    if q0.winding != q1.winding:
        raise CurveflowError(
            f"winding numbers differ ({q0.winding} vs {q1.winding}); "
            "no geodesic within the image")
    # nearest 2 pi branch of the angle lift
    shift = 2.0 * np.pi * round(float(np.mean(q1.q[:, 1] - q0.q[:, 1]))
                                / (2.0 * np.pi))
    target_q = q1.q.copy()
    target_q[:, 1] -= shift
    target = RPoint(MetricId.M3, target_q, True, q1.winding)

    dth = q0.theta_step
    tau = trapezoid_weights(q0.n_samples, True)
    dq_full = target.q - q0.q
    scale = np.sqrt(weighted_inner(MetricId.M3, q0.q, dq_full, dq_full, True))
    steps = max(2, int(round(T / dt)))

    def residual(xi, basis):
        state = _shooting_state(q0, xi, basis, T)
        sim = simulate(state, T, T / steps)
        gap = sim.qs[-1] - target.q
        proj = project_image(target, gap)
        w = np.sqrt(np.stack([4.0 * np.ones_like(tau), target.q[:, 0] ** 2,
                              target.q[:, 0] ** -6], axis=1)
                    * (tau * dth)[:, None])
        return (proj * w).ravel(), sim

    def initial_guess(basis):
        delta = project_image(q0, dq_full, image_tol=1.0) / T
        nb = basis.shape[1]
        xi = np.empty(2 * nb)
        xi[:nb] = np.linalg.lstsq(basis, delta[:, 0], rcond=None)[0]
        xi[nb:] = np.linalg.lstsq(basis, delta[:, 1], rcond=None)[0]
        return xi

    basis = _fourier_basis(q0.n_samples, modes)
    xi = initial_guess(basis)
    r, sim = residual(xi, basis)
    rn = np.linalg.norm(r)
    best = (rn, xi.copy(), basis, sim)
    lam = 1e-3
    it = 0
    while it < max_iter:
        if rn <= tol * scale:
            break
        # forward-difference Jacobian in the reduced parameter space
        J = np.empty((r.size, xi.size))
        eps = 1e-6 * max(1.0, np.linalg.norm(xi))
        for a in range(xi.size):
            xp = xi.copy()
            xp[a] += eps
            J[:, a] = (residual(xp, basis)[0] - r) / eps
        # Levenberg-Marquardt: the endpoint map has sloppy high-frequency
        # directions, so undamped Gauss-Newton steps leave the trust region
        jtj = J.T @ J
        jtr = J.T @ r
        diag = np.diag(np.maximum(np.diag(jtj), 1e-14))
        improved = False
        for _ in range(12):
            step = np.linalg.solve(jtj + lam * diag, -jtr)
            rc, simc = residual(xi + step, basis)
            if np.linalg.norm(rc) < rn:
                xi = xi + step
                r, rn, sim = rc, np.linalg.norm(rc), simc
                lam = max(lam / 3.0, 1e-10)
                improved = True
                break
            lam *= 10.0
            if lam > 1e8:      # quadratic model exhausted: basis floor reached
                break
        it += 1
        if rn < best[0]:
            best = (rn, xi.copy(), basis, sim)
        if not improved:
            if basis.shape[1] < 2 * max_modes + 1:
                old_nb = basis.shape[1]
                modes = min(max_modes, (old_nb - 1) // 2 + 4)
                basis = _fourier_basis(q0.n_samples, modes)
                pad = basis.shape[1] - old_nb
                xi = np.concatenate([xi[:old_nb], np.zeros(pad),
                                     xi[old_nb:], np.zeros(pad)])
                r, sim = residual(xi, basis)
                rn = np.linalg.norm(r)
                lam = 1e-3
            else:
                path = _path_from_simulation(sim, K, T)
                path.diagnostics["endpoint_mismatch"] = rn
                path.diagnostics["mismatch_scale"] = scale
                raise ShootingStall("shooting stalled before reaching tolerance",
                                    best_path=path, residual=rn)
    rn, xi, basis, sim = best
    path = _path_from_simulation(sim, K, T)
    path.diagnostics["endpoint_mismatch"] = rn
    path.diagnostics["mismatch_scale"] = scale
    path.diagnostics["modes"] = (basis.shape[1] - 1) // 2
    if rn > tol * scale:
        raise ShootingStall("shooting did not reach tolerance",
                            best_path=path, residual=rn)
    return path


def _path_from_simulation(sim: SimulationResult, K: int, T: float,
                          recenter: bool = True) -> GeodesicPath:
    total = sim.qs.shape[0] - 1
    idx = np.unique(np.round(np.linspace(0, total, K)).astype(int))
    times = sim.times[idx]
    curves = []
    for j in idx:
        c = r_inverse(RPoint(MetricId.M3, sim.qs[j], True, sim.winding))
        curves.append(center(c) if recenter else c)
    return GeodesicPath(MetricId.M3, times, curves,
                        {"rspace": sim.qs[idx], "energy": sim.energy[idx],
                         "constraint_norm": sim.constraint_norm[idx],
                         "hidden_norm": sim.hidden_norm[idx],
                         "times_full": sim.times,
                         "energy_full": sim.energy,
                         "constraint_norm_full": sim.constraint_norm})


# -- initial value problems ----------------------------------------------------

def geodesic_ivp(metric_id, c0: DiscreteCurve, u0, T: float,
                 steps: int = 200, snapshots: int = 33,
                 rk4_substeps: int = 10) -> GeodesicPath:
    """Geodesic from c0 with initial velocity field u0, integrated to time T."""
    metric_id = MetricId.parse(metric_id)
    u0 = np.asarray(u0, dtype=float)
    _require(u0.shape == c0.points.shape, "u0 must match the curve grid")
    if metric_id is MetricId.M1:
        _require(not c0.closed, "M1 initial value solver works on open curves")
        return _ivp_flat(c0, u0, T, snapshots)
    if metric_id is MetricId.M2:
        _require(not c0.closed, "M2 initial value solver works on open curves")
        return _ivp_fiberwise(c0, u0, T, snapshots, rk4_substeps)
    if metric_id is MetricId.M3:
        _require(c0.closed, "M3 works on closed curves")
        return _ivp_rattle(c0, u0, T, steps, snapshots)
    raise CurveflowError("no initial value solver for the full H2 transform (M4)")


def _ivp_flat(c0, u0, T, K) -> GeodesicPath:
    c0, u0 = _prep_pair(MetricId.M1, c0, u0)
    q0 = r_forward(MetricId.M1, c0)
    d = dr(MetricId.M1, c0, u0)
    neg = d < -1e-300
    exit_time = np.inf
    if np.any(neg):
        exit_time = float(np.min(q0.q[neg] / -d[neg]))
    times = np.linspace(0.0, T, K)
    live = times[times < exit_time]
    curves = []
    qs = np.empty((live.size,) + q0.q.shape)
    for j, t in enumerate(live):
        qs[j] = q0.q + t * d
        curves.append(r_inverse(RPoint(MetricId.M1, qs[j], False)))
    if exit_time <= T:
        raise DomainExit(
            f"geodesic leaves the space (component reaches 0) at t = {exit_time:.6g}",
            exit_time=exit_time,
            partial=GeodesicPath(MetricId.M1, live, curves, {"rspace": qs}))
    return GeodesicPath(MetricId.M1, times, curves,
                        {"rspace": qs, "exit_time": exit_time})


def _ivp_fiberwise(c0, u0, T, K, substeps) -> GeodesicPath:
    c0, u0 = _prep_pair(MetricId.M2, c0, u0)
    q0 = r_forward(MetricId.M2, c0)
    v0 = dr(MetricId.M2, c0, u0)
    steps = max(1, (K - 1) * substeps)
    try:
        t_all, ps, _vs = integrate_spray2(q0.q, v0, T, steps)
    except DomainExit as exc:
        t_part, ps, _ = exc.partial
        idx = np.arange(0, ps.shape[0], substeps)
        curves = [r_inverse(RPoint(MetricId.M2, ps[j], False)) for j in idx]
        raise DomainExit(str(exc), exit_time=exc.exit_time,
                         partial=GeodesicPath(MetricId.M2, t_part[idx], curves,
                                              {"rspace": ps[idx]})) from exc
    idx = np.arange(0, steps + 1, substeps)
    curves = [r_inverse(RPoint(MetricId.M2, ps[j], False)) for j in idx]
    return GeodesicPath(MetricId.M2, t_all[idx], curves, {"rspace": ps[idx]})


def remove_translation_component(c0: DiscreteCurve, u0) -> np.ndarray:
    """Subtract the ds-mean: the L2(ds) projection off the constant fields
    (the metric kernel itself pairs to zero against everything, so the
    quotient is realized in the L2 geometry)."""
    frame = build_frame(c0)
    mean = integrate_ds(c0, np.asarray(u0, float), frame) / curve_length(c0, frame)
    return np.asarray(u0, float) - mean


def _ivp_rattle(c0, u0, T, steps, K) -> GeodesicPath:
    c0 = center(c0)
    u0 = remove_translation_component(c0, u0)
    frame = build_frame(c0)
    q0 = project_to_manifold(r_forward(MetricId.M3, c0, frame))
    qdot = dr(MetricId.M3, c0, u0, frame)
    p_raw = g_apply(MetricId.M3, q0.q, qdot) / q0.theta_step
    state = project_consistent(q0, p_raw)
    sim = simulate(state, T, T / steps)
    return _path_from_simulation(sim, K, T)


# -- distances ------------------------------------------------------------------

def distance(metric_id, c0: DiscreteCurve, c1: DiscreteCurve,
             **options) -> DistanceResult:
    """Geodesic distance (exact for M1/M2; solver-based for M3) together
    with the provable square-root-of-length lower bounds."""
    metric_id = MetricId.parse(metric_id)
    _require(c0.n_samples == c1.n_samples and c0.closed == c1.closed,
             "curves must share the sampling grid")
    if metric_id is MetricId.M1:
        a, b = _prep(metric_id, c0), _prep(metric_id, c1)
        qa = r_forward(MetricId.M1, a)
        qb = r_forward(MetricId.M1, b)
        val = _flat_distance(qa.q, qb.q, qa.theta_step, a.closed)
        return DistanceResult(val, {"sqrt_length": _sqrt_length_bound(a, b, 2.0)})
    if metric_id is MetricId.M2:
        a, b = _prep(metric_id, c0), _prep(metric_id, c1)
        qa = r_forward(MetricId.M2, a)
        qb = r_forward(MetricId.M2, b)
        lengths = np.array([fiber_distance(qa.q[k], qb.q[k])
                            for k in range(qa.n_samples)])
        tau = trapezoid_weights(qa.n_samples, a.closed)
        val = float(np.sqrt(np.sum(tau * lengths ** 2) * qa.theta_step))
        bounds = {"sqrt_length": _sqrt_length_bound(a, b, 2.0),
                  "pointwise_integral": _m2_integral_bound(qa.q, qb.q,
                                                           qa.theta_step, tau)}
        return DistanceResult(val, bounds, {"fiber_lengths": lengths})
    if metric_id is MetricId.M3:
        path = geodesic_bvp(MetricId.M3, c0, c1, K=5, **options)
        val = _rspace_path_length(path)
        return DistanceResult(val, {}, {"endpoint_mismatch":
                                        path.diagnostics["endpoint_mismatch"]})
    raise CurveflowError("no distance solver for the full H2 transform (M4)")


def _m2_integral_bound(qa, qb, dth, tau) -> float:
    """Integral of the squared pointwise half-plane lower bound (with the
    corrected rescaling constant sqrt(2))."""
    A = tables().A
    dy = np.abs(qb[:, 1] - qa[:, 1])
    X = qa[:, 0] ** 4 + qb[:, 0] ** 4 + dy / (2.0 * A)
    integrand = 4.0 * ((qa[:, 0] - qb[:, 0]) ** 2
                       + dy ** 2 / (np.sqrt(2.0) * X ** 1.5))
    return float(np.sqrt(np.sum(tau * integrand) * dth))


def _rspace_path_length(path: GeodesicPath) -> float:
    qs = path.diagnostics["rspace"]
    times = np.asarray(path.times)
    total = 0.0
    for j in range(len(times) - 1):
        mid = 0.5 * (qs[j] + qs[j + 1])
        dq = qs[j + 1] - qs[j]
        total += np.sqrt(weighted_inner(MetricId.M3, mid, dq, dq, True))
    return float(total)


# -- horizontality ---------------------------------------------------------------

def vertical_operator_matrix(curve: DiscreteCurve, metric_id=MetricId.M3) -> np.ndarray:
    """Dense matrix of zeta -> <L_c(zeta c'), v> on scalar samples."""
    frame = build_frame(curve)
    cp = frame.speed[:, None] * frame.v
    n = curve.n_samples
    mat = np.empty((n, n))
    for k in range(n):
        zeta = np.zeros(n)
        zeta[k] = 1.0
        lw = apply_L(metric_id, curve, zeta[:, None] * cp, frame)
        mat[:, k] = np.einsum("ki,ki->k", lw, frame.v)
    return mat


def horizontal_project(curve: DiscreteCurve, h, metric_id=MetricId.M3) -> np.ndarray:
    """Remove the reparameterization (vertical) part: h - zeta c' with
    <L_c(h - zeta c'), v> = 0."""
    metric_id = MetricId.parse(metric_id)
    frame = build_frame(curve)
    h = np.asarray(h, dtype=float)
    lh = apply_L(metric_id, curve, h, frame)
    rhs = np.einsum("ki,ki->k", lh, frame.v)
    mat = vertical_operator_matrix(curve, metric_id)
    try:
        zeta = np.linalg.solve(mat, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularVerticalOperator("vertical operator is singular") from exc
    if not np.all(np.isfinite(zeta)):
        raise SingularVerticalOperator("vertical solve produced non-finite values")
    return h - zeta[:, None] * (frame.speed[:, None] * frame.v)


def horizontality_residual(curve: DiscreteCurve, u,
                           metric_id=MetricId.M3, relative: bool = False) -> float:
    """sup |<L_c u, v>|, optionally relative to sup |L_c u| (the
    normalization used by the projection contract)."""
    frame = build_frame(curve)
    lu = apply_L(metric_id, curve, np.asarray(u, float), frame)
    resid = float(np.max(np.abs(np.einsum("ki,ki->k", lu, frame.v))))
    if relative:
        scale = float(np.max(np.abs(lu)))
        return resid / scale if scale > 0.0 else 0.0
    return resid


def shape_geodesic(c0: DiscreteCurve, h, T: float, steps: int = 200,
                   snapshots: int = 33) -> GeodesicPath:
    """Horizontal geodesic: the initial velocity is projected to the
    horizontal space first, and the reparameterization momentum
    <L_c c_t, v> is monitored (not enforced) along the path, both in
    absolute terms and relative to sup |L_c c_t|."""
    h_hor = horizontal_project(c0, h)
    path = geodesic_ivp(MetricId.M3, c0, h_hor, T, steps=steps,
                        snapshots=snapshots)
    times = np.asarray(path.times)
    resid = np.empty(len(path.curves))
    resid_rel = np.empty(len(path.curves))
    stack = np.stack([c.points for c in path.curves])
    for j, c in enumerate(path.curves):
        if j == 0:
            ct = (stack[1] - stack[0]) / (times[1] - times[0])
        elif j == len(path.curves) - 1:
            ct = (stack[-1] - stack[-2]) / (times[-1] - times[-2])
        else:
            ct = (stack[j + 1] - stack[j - 1]) / (times[j + 1] - times[j - 1])
        frame = build_frame(c)
        lu = apply_L(MetricId.M3, c, ct, frame)
        resid[j] = float(np.max(np.abs(np.einsum("ki,ki->k", lu, frame.v))))
        scale = float(np.max(np.abs(lu)))
        resid_rel[j] = resid[j] / scale if scale > 0.0 else 0.0
    path.diagnostics["horizontality"] = resid
    path.diagnostics["horizontality_rel"] = resid_rel
    return path
