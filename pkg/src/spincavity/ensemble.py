"""Spectral discretization of an inhomogeneously broadened spin ensemble.

The ensemble is described by a q-Gaussian frequency density and is reduced
to M spin clusters on a uniform detuning grid.  Each cluster j carries a
collective coupling g_j with sum_j g_j^2 = omega_coll^2 held exactly, so the
collective coupling strength is independent of the grid resolution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True)
class EnsembleSpec:
    """Continuum description of the spin frequency distribution.

    Parameters
    ----------
    q : float
        Tail-weight parameter of the q-Gaussian density, 1 < q < 3.
    delta_width : float
        Width parameter of the density [rad/s].
    center_offset : float
        Ensemble center relative to the drive frequency [rad/s].  The
        detuning grid is laid out around this offset.
    cluster_count : int
        Number of clusters M; must be odd so one cluster sits exactly at
        the ensemble center.
    truncation : float
        Half-window W [rad/s] outside which the density is cut; the
        discrete weights are renormalized over the window.
    """

    q: float
    delta_width: float
    center_offset: float = 0.0
    cluster_count: int = 1001
    truncation: float | None = None

    def __post_init__(self):
        if not 1.0 < self.q < 3.0:
            raise ParameterError(f"q must lie in (1, 3), got {self.q}")
        if self.delta_width <= 0.0:
            raise ParameterError("delta_width must be positive")
        if self.cluster_count < 1 or self.cluster_count % 2 == 0:
            raise ParameterError(
                f"cluster_count must be a positive odd integer, got {self.cluster_count}"
            )
        if self.truncation is None:
            # default window: eight density widths either side of center
            object.__setattr__(self, "truncation", 8.0 * self.delta_width)
        elif self.truncation <= 0.0:
            raise ParameterError("truncation must be positive")


@dataclass(frozen=True)
class SpinClusters:
    """Discrete cluster couplings g_j and detunings theta_j [rad/s].

    theta is strictly increasing; g entries are nonnegative.  Instances
    normally come from :func:`discretize`, but tests and degenerate setups
    may build them directly (e.g. a single resonant cluster).
    """

    g: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        theta = np.asarray(self.theta, dtype=float)
        if g.shape != theta.shape or g.ndim != 1:
            raise ParameterError("g and theta must be 1-d arrays of equal length")
        if np.any(g < 0.0):
            raise ParameterError("cluster couplings must be nonnegative")
        if g.size > 1 and np.any(np.diff(theta) <= 0.0):
            raise ParameterError("theta must be strictly increasing")
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "theta", theta)

    def __len__(self):
        return self.g.size

    @classmethod
    def homogeneous(cls, omega_coll: float, theta: float = 0.0) -> "SpinClusters":
        """Single cluster carrying the whole collective coupling."""
        return cls(g=np.array([omega_coll]), theta=np.array([theta]))

    @classmethod
    def empty(cls) -> "SpinClusters":
        """No spins; the cavity responds linearly."""
        return cls(g=np.array([]), theta=np.array([]))


def q_gaussian_density(omega, spec: EnsembleSpec):
    """Unnormalized q-Gaussian density at angular frequency omega.

    rho(omega) = [1 - (1 - q) (omega - omega_s)^2 / delta^2]^(1/(1-q))
    with peak value 1 at the ensemble center omega_s.  Only density ratios
    ever enter the discretization, so no normalization constant is applied.
    """
    u = (np.asarray(omega, dtype=float) - spec.center_offset) / spec.delta_width
    base = 1.0 - (1.0 - spec.q) * u * u
    return base ** (1.0 / (1.0 - spec.q))


def discretize(spec: EnsembleSpec, omega_coll: float) -> SpinClusters:
    """Reduce the continuum density to M clusters on a uniform detuning grid.

    The grid spans [center - W, center + W] with M points (M odd, so the
    center is on the grid).  Couplings follow the density through
    g_j = omega_coll * sqrt(rho_j / sum_l rho_l), which enforces
    sum_j g_j^2 = omega_coll^2 exactly.
    """
    if omega_coll <= 0.0:
        raise ParameterError("omega_coll must be positive to discretize an ensemble")
    m = spec.cluster_count
    offsets = np.linspace(-spec.truncation, spec.truncation, m)
    theta = spec.center_offset + offsets
    rho = q_gaussian_density(theta, spec)
    weights = rho / rho.sum()
    g = omega_coll * np.sqrt(weights)
    return SpinClusters(g=g, theta=theta)


def cooperativity(clusters: SpinClusters, kappa: float, gamma_perp: float):
    """Per-cluster and collective cooperativities.

    C_j = g_j^2 / [kappa * gamma_perp * (1 + theta_j^2 / gamma_perp^2)]

    Returns (C_j array, C_coll = sum_j C_j).
    """
    if kappa <= 0.0 or gamma_perp <= 0.0:
        raise ParameterError("kappa and gamma_perp must be positive")
    c = clusters.g**2 / (kappa * gamma_perp * (1.0 + (clusters.theta / gamma_perp) ** 2))
    return c, float(c.sum())
