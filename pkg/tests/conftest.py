"""Shared fixtures: the narrow-cavity working point, a monostable variant,
and dimensionless toy systems fast enough for property loops."""

import numpy as np
import pytest

from spincavity import (
    EnsembleSpec,
    IntegratorConfig,
    PhysicalParams,
    SpinClusters,
    discretize,
    find_folds,
)

TWO_PI = 2.0 * np.pi

KAPPA = TWO_PI * 0.44e6
GAMMA_PERP = TWO_PI * 0.40e6
GAMMA_PAR = TWO_PI * 6.25e-4
OMEGA_STRONG = TWO_PI * 12.6e6
WIDTH = TWO_PI * 5.3e6
TRUNCATION = TWO_PI * 21.2e6

KAPPA_WIDE = TWO_PI * 1.2e6
OMEGA_WEAK = TWO_PI * 9.6e6


def _spec(count=201):
    return EnsembleSpec(q=1.39, delta_width=WIDTH, cluster_count=count,
                        truncation=TRUNCATION)


@pytest.fixture(scope="session")
def strong_point():
    """Bistable working point: 201 clusters, collective C near 95."""
    params = PhysicalParams(kappa=KAPPA, gamma_perp=GAMMA_PERP,
                            gamma_par=GAMMA_PAR, omega_coll=OMEGA_STRONG,
                            eta=0.0)
    return params, discretize(_spec(), OMEGA_STRONG)


@pytest.fixture(scope="session")
def strong_folds(strong_point):
    params, clusters = strong_point
    return find_folds(params, clusters, (1e-12, 1e6))


@pytest.fixture(scope="session")
def weak_point():
    """Wider cavity, weaker coupling: single-valued response everywhere."""
    params = PhysicalParams(kappa=KAPPA_WIDE, gamma_perp=GAMMA_PERP,
                            gamma_par=GAMMA_PAR, omega_coll=OMEGA_WEAK,
                            eta=0.0)
    return params, discretize(_spec(), OMEGA_WEAK)


@pytest.fixture(scope="session")
def toy_bistable():
    # kappa is the time unit; C = 30 keeps the three branches well separated
    g = np.sqrt(30.0 * 1.0 * 0.2)
    params = PhysicalParams(kappa=1.0, gamma_perp=0.2, gamma_par=1e-4,
                            omega_coll=g, eta=0.0)
    return params, SpinClusters.homogeneous(g)


@pytest.fixture(scope="session")
def toy_folds(toy_bistable):
    params, clusters = toy_bistable
    return find_folds(params, clusters, (1e-12, 1e3))


@pytest.fixture(scope="session")
def toy_slow():
    # same cooperativity, gamma_par another decade down for overlap checks
    g = np.sqrt(30.0 * 1.0 * 0.2)
    params = PhysicalParams(kappa=1.0, gamma_perp=0.2, gamma_par=1e-5,
                            omega_coll=g, eta=0.0)
    return params, SpinClusters.homogeneous(g)


@pytest.fixture()
def toy_config():
    # toy quenches need the handoff pushed out so the fast ring-down is over
    return IntegratorConfig(rel_tol=1e-8, abs_tol=1e-14, handoff_time=5000.0)
