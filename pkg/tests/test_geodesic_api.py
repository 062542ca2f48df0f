import json

import numpy as np
import pytest

from conftest import circle, convex_arc, smooth_field, wavy_curve
from curveflow import curve_core as cc
from curveflow import geodesic_api as ga
from curveflow import metric_suite as ms
from curveflow import pointwise_geometry as pg
from curveflow import rtransform as rt
from curveflow.errors import CurveflowError, DomainExit


def open_circle(n, r=1.0):
    th = (2 * np.pi / (n - 1)) * np.arange(n)
    return cc.DiscreteCurve(r * np.stack([np.cos(th), np.sin(th)], 1), False)


def m1_distance_formula(c0, c1):
    """Independent evaluation of the closed-form distance integrand."""
    f0 = cc.build_frame(c0)
    f1 = cc.build_frame(c1)
    integrand = (16 * (np.sqrt(f1.speed) * f1.kappa ** 0.25
                       - np.sqrt(f0.speed) * f0.kappa ** 0.25) ** 2
                 + 4 * (np.sqrt(f1.speed) - np.sqrt(f0.speed)) ** 2)
    tau = cc.trapezoid_weights(c0.n_samples, c0.closed)
    return float(np.sqrt(np.sum(tau * integrand) * c0.theta_step))


def test_m1_identical_curves():
    c = open_circle(96)
    d = ga.distance("M1", c, c)
    assert d.value == 0.0
    path = ga.geodesic_bvp("M1", c, c, K=5)
    for snap in path.curves:
        assert np.abs(snap.points - path.curves[0].points).max() < 1e-12


def test_m1_distance_matches_theorem_integrand():
    for seeds in ((3, 4), (5, 6)):
        c0 = convex_arc(128, seed=seeds[0])
        c1 = cc.DiscreteCurve(convex_arc(128, seed=seeds[1]).points * 1.3, False)
        d = ga.distance("M1", c0, c1)
        assert abs(d.value - m1_distance_formula(c0, c1)) < 1e-10
        assert d.value >= d.lower_bounds["sqrt_length"] - 1e-12


def test_m1_circle_family_bvp():
    # circle -> circle geodesic stays within circles: transform components
    # remain grid-constant along the path and kappa stays constant
    c0, c1 = open_circle(128, 1.0), open_circle(128, 4.0)
    path = ga.geodesic_bvp("M1", c0, c1, K=9)
    qs = path.diagnostics["rspace"]
    for j in range(9):
        # theta-constant to discretization accuracy (open-grid endpoint
        # stencils differ from the interior at fourth order)
        assert qs[j].std(axis=0).max() / np.abs(qs[j]).max() < 1e-3
        f = cc.build_frame(path.curves[j])
        assert f.kappa.std() / f.kappa.mean() < 1e-3
    e = ga.path_energy_rspace(path)
    d = ga.distance("M1", c0, c1)
    assert abs(e - d.value ** 2) / d.value ** 2 < 1e-6
    # q-components are linear in t: midpoint equals the average of the ends
    assert np.abs(qs[4] - 0.5 * (qs[0] + qs[-1])).max() < 1e-12


def test_m1_ivp_exit_time():
    c = open_circle(96)
    u0 = -0.25 * c.points  # shrinking field: transform components decay
    cp, up = ga._prep_pair(ms.MetricId.M1, c, u0)
    q0 = rt.r_forward("M1", cp)
    d = rt.dr("M1", cp, up)
    expected_exit = np.min(np.where(d < 0, q0.q / -d, np.inf))
    with pytest.raises(DomainExit) as exc:
        ga.geodesic_ivp("M1", c, u0, T=2 * expected_exit, steps=64, snapshots=65)
    assert abs(exc.value.exit_time - expected_exit) < 1e-9
    assert exc.value.partial.n_snapshots >= 1
    # zero velocity: constant path
    path = ga.geodesic_ivp("M1", c, np.zeros((96, 2)), T=1.0, snapshots=5)
    assert np.abs(path.curves[-1].points - path.curves[0].points).max() < 1e-12


def test_m2_bvp_distance_and_initial_velocity():
    c0, c1 = open_circle(96, 1.0), open_circle(96, 2.0)
    d = ga.distance("M2", c0, c1)
    path = ga.geodesic_bvp("M2", c0, c1, K=9)
    assert abs(path.diagnostics["distance"] - d.value) < 1e-12
    assert d.value >= d.lower_bounds["sqrt_length"] - 1e-12
    assert d.value >= d.lower_bounds["pointwise_integral"] - 1e-9
    # shooting the boundary solver's initial velocity through the fiber
    # initial value problem reproduces the endpoint
    q0 = path.diagnostics["rspace"][0]
    q1 = path.diagnostics["rspace"][-1]
    v0 = path.diagnostics["initial_velocity_rspace"]
    _, ps, _ = pg.integrate_spray2(q0, v0, 1.0, 2000)
    assert np.abs(ps[-1] - q1).max() < 1e-6


def test_m2_ivp_runs_and_exits():
    c = open_circle(64)
    u0 = smooth_field(64, seed=3, closed=False) * 0.1
    path = ga.geodesic_ivp("M2", c, u0, T=0.5, snapshots=6)
    assert path.n_snapshots == 6
    # strong shrinking velocity leaves x > 0 in finite time
    u_bad = -2.0 * c.points
    with pytest.raises(DomainExit) as exc:
        ga.geodesic_ivp("M2", c, u_bad, T=5.0, snapshots=11)
    assert exc.value.exit_time is not None


def test_m3_ivp_second_initial_velocity():
    n = 64
    th = (2 * np.pi / n) * np.arange(n)
    c = circle(n)
    u0 = -(np.sin(th) ** 2)[:, None] * np.stack([np.cos(th), np.sin(th)], 1)
    path = ga.geodesic_ivp("M3", c, u0, T=1.0, steps=100, snapshots=11)
    assert path.diagnostics["constraint_norm_full"].max() < 1e-9
    assert len(path.curves) == 11
    # snapshots stay centered and regular
    for snap in path.curves[::5]:
        assert np.abs(cc.centroid(snap)).max() < 1e-9
        cc.build_frame(snap)


def test_m3_shooting_bvp_small():
    n = 32
    th = (2 * np.pi / n) * np.arange(n)
    c0 = circle(n)
    c1 = cc.DiscreteCurve(np.stack([1.15 * np.cos(th), 0.87 * np.sin(th)], 1), True)
    path = ga.geodesic_bvp("M3", c0, c1, K=5, T=1.0, dt=0.05, modes=4,
                           tol=5e-3, max_iter=25)
    rel = path.diagnostics["endpoint_mismatch"] / path.diagnostics["mismatch_scale"]
    assert rel <= 5e-3
    # endpoints reproduce the data
    assert np.abs(path.curves[0].points - cc.center(c0).points).max() < 1e-2
    assert np.abs(path.curves[-1].points - cc.center(c1).points).max() < 5e-2
    # the distance wrapper reports the transform-space path length
    d = ga.distance("M3", c0, c1, T=1.0, dt=0.05, modes=4, tol=5e-3,
                    max_iter=25)
    assert d.value > 0.0
    assert d.details["endpoint_mismatch"] <= 5e-3 * path.diagnostics["mismatch_scale"]


def test_m3_winding_mismatch_rejected():
    n = 64
    th = (2 * np.pi / n) * np.arange(n)
    c0 = circle(n)
    double = cc.DiscreteCurve(np.stack([np.cos(2 * th), np.sin(2 * th)], 1), True)
    with pytest.raises(CurveflowError):
        ga.geodesic_bvp("M3", c0, double, K=3, T=1.0)


def test_distance_symmetry_and_triangle():
    c0 = convex_arc(96, seed=11)
    c1 = cc.DiscreteCurve(convex_arc(96, seed=12).points * 0.8, False)
    c2 = cc.DiscreteCurve(convex_arc(96, seed=13).points * 1.2, False)
    for mid in ("M1", "M2"):
        dab = ga.distance(mid, c0, c1).value
        dba = ga.distance(mid, c1, c0).value
        assert abs(dab - dba) < 1e-9
    # triangle inequality holds exactly for the flat metric
    dac = ga.distance("M1", c0, c2).value
    dab = ga.distance("M1", c0, c1).value
    dbc = ga.distance("M1", c1, c2).value
    assert dac <= dab + dbc + 1e-12


def test_m4_has_no_solvers():
    c = wavy_curve(64, seed=1)
    with pytest.raises(CurveflowError):
        ga.distance("M4", c, c)
    with pytest.raises(CurveflowError):
        ga.geodesic_bvp("M4", c, c, K=3)


def test_horizontal_project_examples():
    n = 128
    th = (2 * np.pi / n) * np.arange(n)
    c = circle(n)
    f = cc.build_frame(c)
    # corrected closed-form horizontal field: a = cos 2t, b = (8/7) sin 2t
    hstar = np.cos(2 * th)[:, None] * f.n + (8.0 / 7.0) * np.sin(2 * th)[:, None] * f.v
    lh = ms.apply_L("M3", c, hstar, f)
    scale = np.abs(lh).max()
    hp = ga.horizontal_project(c, hstar)
    assert ga.horizontality_residual(c, hp) < 1e-8 * scale
    assert np.abs(hp - hstar).max() < 5e-3 * np.abs(hstar).max()
    # projection is idempotent
    assert np.abs(ga.horizontal_project(c, hp) - hp).max() < 1e-9
    # a purely vertical field projects to (numerically) nothing
    cp = f.speed[:, None] * f.v
    out = ga.horizontal_project(c, cp)
    assert np.abs(out).max() < 1e-8


def test_shape_geodesic_monitoring():
    n = 64
    th = (2 * np.pi / n) * np.arange(n)
    c = circle(n)
    h = -np.stack([2 - np.cos(2 * th), 2 * np.sin(2 * th)], 1)
    path = ga.shape_geodesic(c, h, T=0.3, steps=120, snapshots=13)
    rel = path.diagnostics["horizontality_rel"]
    assert rel.max() <= 10.0 * rel[0]
    zero = ga.shape_geodesic(c, np.zeros((n, 2)), T=0.1, steps=20, snapshots=5)
    assert np.abs(zero.curves[-1].points - zero.curves[0].points).max() < 1e-10


def test_path_export(tmp_path):
    c0, c1 = open_circle(64, 1.0), open_circle(64, 2.0)
    path = ga.geodesic_bvp("M2", c0, c1, K=5)
    out = tmp_path / "path"
    path.export(out)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["metric"] == "M2"
    assert len(manifest["curves"]) == 5
    loaded = cc.load_curve(out / manifest["curves"][2])
    assert loaded.n_samples == 64


def test_grid_mismatch_rejected():
    with pytest.raises(CurveflowError):
        ga.distance("M1", open_circle(64), open_circle(96))


def test_m2_fiber_threads_env(monkeypatch):
    c0, c1 = open_circle(48, 1.0), open_circle(48, 1.5)
    ref = ga.geodesic_bvp("M2", c0, c1, K=5)
    monkeypatch.setenv("CURVEFLOW_THREADS", "4")
    par = ga.geodesic_bvp("M2", c0, c1, K=5)
    assert np.abs(par.diagnostics["rspace"] - ref.diagnostics["rspace"]).max() == 0.0


def test_m2_distance_matches_time_quadrature():
    c0, c1 = open_circle(96, 1.0), open_circle(96, 2.2)
    d = ga.distance("M2", c0, c1)
    path = ga.geodesic_bvp("M2", c0, c1, K=257)
    qs = path.diagnostics["rspace"]
    times = np.asarray(path.times)
    tau = cc.trapezoid_weights(96, False)
    dth = 2 * np.pi / 95
    length = 0.0
    for j in range(len(times) - 1):
        mid = 0.5 * (qs[j] + qs[j + 1])
        dq = qs[j + 1] - qs[j]
        g = np.stack([4 * np.ones(96), mid[:, 0] ** -6], 1)
        length += np.sqrt(np.sum(tau * np.sum(g * dq ** 2, axis=1)) * dth)
    assert abs(length - d.value) / d.value < 1e-4
