"""Slow-variable reduction: cubic fixed points and the effective potential."""

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from spincavity import (
    AdiabaticModel,
    Stability,
    adiabatic_fixed_points,
    adiabatic_rhs,
    drive_from_power,
    find_folds,
    potential,
    steady_roots,
)
from spincavity import PhysicalParams, SpinClusters
from spincavity.errors import ParameterError


def _model(c=30.0, kappa=1.0, gamma_par=1e-4, eta=0.01):
    return AdiabaticModel(cooperativity=c, kappa=kappa, gamma_par=gamma_par,
                          eta=eta)


def test_origin_is_always_reported_first():
    points = adiabatic_fixed_points(_model())
    assert points[0] == (0.0, Stability.DEGENERATE)
    assert adiabatic_rhs(_model(), 0.0) == 0.0


def test_rhs_matches_the_written_out_terms():
    rng = np.random.default_rng(5)
    for _ in range(50):
        c = rng.uniform(0.0, 80.0)
        kappa = rng.uniform(0.5, 3.0)
        gpar = rng.uniform(1e-5, 1e-2)
        eta = rng.uniform(1e-3, 1.0)
        x = rng.uniform(1e-8, 2.0)
        model = AdiabaticModel(cooperativity=c, kappa=kappa,
                               gamma_par=gpar, eta=eta)
        terms = (-8.0 * c * kappa ** 2 * x ** 2.5 / eta,
                 8.0 * c * kappa * x ** 2,
                 -2.0 * kappa * gpar * (1.0 + c) * x ** 1.5 / eta,
                 2.0 * gpar * x)
        got = adiabatic_rhs(model, x)
        scale = max(abs(t) for t in terms)
        assert abs(got - sum(terms)) <= 1e-13 * scale


def test_uncoupled_cavity_has_a_single_driven_point():
    model = AdiabaticModel(cooperativity=0.0, kappa=2.0, gamma_par=0.3,
                           eta=0.7)
    points = adiabatic_fixed_points(model)
    assert len(points) == 2
    x, stab = points[1]
    assert x == pytest.approx((0.7 / 2.0) ** 2, rel=1e-12)
    assert stab is Stability.STABLE


def test_fixed_points_agree_with_the_full_steady_state():
    rng = np.random.default_rng(42)
    for _ in range(5):
        kappa = 10.0 ** rng.uniform(-1.0, 1.0)
        gperp = kappa * 10.0 ** -rng.uniform(0.5, 1.5)
        gpar = gperp * 1e-4 * 10.0 ** rng.uniform(0.0, 1.0)
        c = rng.uniform(10.0, 80.0)
        g = np.sqrt(c * kappa * gperp)
        clusters = SpinClusters.homogeneous(g)
        params = PhysicalParams(kappa=kappa, gamma_perp=gperp,
                                gamma_par=gpar, omega_coll=g, eta=0.0)
        fl, fu = find_folds(params, clusters, (1e-15, 1e6))
        eta = drive_from_power(np.sqrt(fl * fu), kappa)
        roots = sorted(steady_roots(params.with_drive(eta), clusters),
                       key=lambda rs: rs[0])
        model = AdiabaticModel(cooperativity=c, kappa=kappa,
                               gamma_par=gpar, eta=eta)
        driven = adiabatic_fixed_points(model)[1:]
        assert len(driven) == len(roots) == 3
        for (xr, sr), (xa, sa) in zip(roots, driven):
            assert xa == pytest.approx(xr, rel=1e-10)
            assert sr is sa


def test_potential_is_zero_at_the_origin(toy_folds):
    eta = drive_from_power(np.sqrt(toy_folds[0] * toy_folds[1]), 1.0)
    model = _model(eta=eta)
    grid = np.linspace(0.0, 2e-4, 201)
    v = potential(model, grid)
    assert v[0] == 0.0
    assert np.all(np.isfinite(v))


def test_stable_points_sit_in_potential_wells(toy_folds):
    eta = drive_from_power(np.sqrt(toy_folds[0] * toy_folds[1]), 1.0)
    model = _model(eta=eta)
    points = adiabatic_fixed_points(model)[1:]
    grid = np.linspace(0.0, 1.6 * points[-1][0], 801)
    v = potential(model, grid)
    for x, stab in points:
        i = int(np.argmin(np.abs(grid - x)))
        window = v[max(0, i - 2):i + 3]
        if stab is Stability.STABLE:
            assert v[i] == window.min()
        else:
            assert v[i] == window.max()


def test_potential_slope_is_minus_the_rhs(toy_folds):
    eta = drive_from_power(np.sqrt(toy_folds[0] * toy_folds[1]), 1.0)
    model = _model(eta=eta)
    grid = np.linspace(0.0, 2e-4, 2001)
    v = potential(model, grid)
    h = grid[1] - grid[0]
    slope = (v[2:] - v[:-2]) / (2.0 * h)
    rhs = np.array([adiabatic_rhs(model, x) for x in grid[1:-1]])
    scale = np.max(np.abs(rhs))
    assert np.all(np.abs(slope + rhs) < 1e-6 * scale + 1e-4 * np.abs(rhs))


def test_uncoupled_potential_matches_the_closed_form():
    model = AdiabaticModel(cooperativity=0.0, kappa=2.0, gamma_par=0.3,
                           eta=0.7)
    grid = np.linspace(0.0, 0.5, 41)
    v = potential(model, grid)
    reference = (4.0 * 2.0 * 0.3 / (5.0 * 0.7)) * grid ** 2.5 \
        - 0.3 * grid ** 2
    assert np.max(np.abs(v - reference)) < 1e-9


def test_potential_never_increases_along_the_flow(toy_folds):
    eta = drive_from_power(np.sqrt(toy_folds[0] * toy_folds[1]), 1.0)
    model = _model(eta=eta)
    points = adiabatic_fixed_points(model)[1:]
    x_max = points[-1][0]
    for x0 in (0.3 * points[0][0], 2.0 * points[1][0], 1.5 * x_max):
        sol = solve_ivp(lambda t, y: [adiabatic_rhs(model, max(y[0], 0.0))],
                        (0.0, 2e4), [x0], method="LSODA",
                        t_eval=np.linspace(0.0, 2e4, 400),
                        rtol=1e-10, atol=1e-16)
        vals = np.clip(sol.y[0], 0.0, None)
        grid = np.unique(vals)
        assert grid.size > 2
        v_grid = potential(model, grid)
        v = np.interp(vals, grid, v_grid)
        drops = np.diff(v)
        assert np.all(drops <= 1e-12 * np.abs(v_grid).max())


def test_model_validation():
    with pytest.raises(ParameterError):
        AdiabaticModel(cooperativity=-1.0, kappa=1.0, gamma_par=1e-4,
                       eta=0.1)
    with pytest.raises(ParameterError):
        AdiabaticModel(cooperativity=1.0, kappa=0.0, gamma_par=1e-4,
                       eta=0.1)
    with pytest.raises(ParameterError):
        AdiabaticModel(cooperativity=1.0, kappa=1.0, gamma_par=1e-4,
                       eta=0.0)
