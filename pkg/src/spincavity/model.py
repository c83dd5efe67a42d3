"""Mean-field model of a driven cavity coupled to clustered spins.

State variables are the cavity amplitude a (complex), one collective
coherence sigma^-_j per spin cluster (complex) and one inversion
sigma^z_j per cluster (real, in [-1, 0]).  With drive amplitude eta,
cavity detuning delta_c and cluster detunings theta_j the equations of
motion are

    da/dt        = -(kappa + i delta_c) a + sum_j g_j sigma^-_j + eta
    dsigma^-_j/dt = -(gamma_perp + i theta_j) sigma^-_j + g_j sigma^z_j a
    dsigma^z_j/dt = -gamma_par (1 + sigma^z_j) - 4 g_j Re(sigma^-_j conj(a))

All rates and frequencies are angular [rad/s]; drive power is a photon
flux p_in = eta^2 / kappa.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .ensemble import SpinClusters
from .errors import ParameterError, RateOrderingWarning


@dataclass(frozen=True)
class PhysicalParams:
    """Rates and drive of the cavity-ensemble system, all angular [rad/s].

    kappa      : cavity field decay rate (half linewidth)
    gamma_perp : transverse spin decay rate, 1/T2
    gamma_par  : longitudinal spin decay rate, 1/T1
    omega_coll : collective coupling strength of the full ensemble
    eta        : drive amplitude (real, nonnegative)
    delta_c    : cavity detuning from the drive
    """

    kappa: float
    gamma_perp: float
    gamma_par: float
    omega_coll: float
    eta: float
    delta_c: float = 0.0

    def __post_init__(self):
        if self.kappa <= 0.0:
            raise ParameterError("kappa must be positive")
        if self.gamma_perp <= 0.0:
            raise ParameterError("gamma_perp must be positive")
        if self.gamma_par < 0.0:
            raise ParameterError("gamma_par must be nonnegative")
        if self.omega_coll < 0.0:
            raise ParameterError("omega_coll must be nonnegative")
        if self.eta < 0.0:
            raise ParameterError("eta must be nonnegative")
        if not self.gamma_par < self.gamma_perp < self.kappa:
            warnings.warn(
                "rate ordering gamma_par < gamma_perp < kappa violated "
                f"(gamma_par={self.gamma_par:g}, gamma_perp={self.gamma_perp:g}, "
                f"kappa={self.kappa:g}); results may leave the slow-spin regime",
                RateOrderingWarning,
                stacklevel=2,
            )

    def with_drive(self, eta: float) -> "PhysicalParams":
        """Copy of the parameters at a different drive amplitude."""
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RateOrderingWarning)
            return replace(self, eta=eta)


@dataclass
class SystemState:
    """Instantaneous mean-field state (a, sigma^-_j, sigma^z_j)."""

    a: complex
    sigma_minus: np.ndarray
    sigma_z: np.ndarray

    def __post_init__(self):
        self.sigma_minus = np.asarray(self.sigma_minus, dtype=complex)
        self.sigma_z = np.asarray(self.sigma_z, dtype=float)
        if self.sigma_minus.shape != self.sigma_z.shape or self.sigma_minus.ndim != 1:
            raise ParameterError("sigma_minus and sigma_z must be 1-d arrays of equal length")

    @property
    def intensity(self) -> float:
        return float(abs(self.a) ** 2)


@dataclass
class Trajectory:
    """Sampled time evolution.

    Reduced records (intensity |a|^2 and the cooperativity-weighted mean
    inversion) are always stored; full SystemState snapshots are kept only
    when the producer was asked for them.  The sigma bounds are tracked at
    every accepted integrator step, not just at the stored samples.
    """

    times: np.ndarray
    intensity: np.ndarray
    inversion: np.ndarray
    states: list | None = None
    sigma_z_min: float = 0.0
    sigma_z_max: float = -1.0
    sigma_minus_abs_max: float = 0.0
    n_steps: int = 0
    n_rejected: int = 0

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.intensity = np.asarray(self.intensity, dtype=float)
        self.inversion = np.asarray(self.inversion, dtype=float)
        if self.times.ndim != 1:
            raise ParameterError("times must be a 1-d array")
        if self.intensity.shape != self.times.shape or self.inversion.shape != self.times.shape:
            raise ParameterError("intensity and inversion must match times in length")
        if self.times.size > 1 and np.any(np.diff(self.times) < 0.0):
            raise ParameterError("times must be ascending")

    def __len__(self):
        return self.times.size

    @classmethod
    def concatenate(cls, parts: list["Trajectory"]) -> "Trajectory":
        """Join consecutive trajectory segments, dropping duplicated joints."""
        if not parts:
            raise ParameterError("nothing to concatenate")
        keep = [parts[0]]
        times = [parts[0].times]
        intensity = [parts[0].intensity]
        inversion = [parts[0].inversion]
        states = list(parts[0].states) if parts[0].states is not None else None
        for seg in parts[1:]:
            start = 0
            if times[-1].size and seg.times.size and seg.times[0] <= times[-1][-1]:
                start = 1
            times.append(seg.times[start:])
            intensity.append(seg.intensity[start:])
            inversion.append(seg.inversion[start:])
            if states is not None and seg.states is not None:
                states.extend(seg.states[start:])
            else:
                states = None
            keep.append(seg)
        return cls(
            times=np.concatenate(times),
            intensity=np.concatenate(intensity),
            inversion=np.concatenate(inversion),
            states=states,
            sigma_z_min=min(p.sigma_z_min for p in keep),
            sigma_z_max=max(p.sigma_z_max for p in keep),
            sigma_minus_abs_max=max(p.sigma_minus_abs_max for p in keep),
            n_steps=sum(p.n_steps for p in keep),
            n_rejected=sum(p.n_rejected for p in keep),
        )


def maxwell_bloch_rhs(state: SystemState, params: PhysicalParams, clusters: SpinClusters) -> SystemState:
    """Time derivative of the mean-field equations at the given state.

    Pure function; safe to call concurrently.  Raises on a cluster-count
    mismatch between the state and the ensemble.
    """
    if len(state.sigma_z) != len(clusters):
        raise ParameterError(
            f"state carries {len(state.sigma_z)} clusters, ensemble has {len(clusters)}"
        )
    a = state.a
    da = -(params.kappa + 1j * params.delta_c) * a + np.sum(clusters.g * state.sigma_minus) + params.eta
    dsm = -(params.gamma_perp + 1j * clusters.theta) * state.sigma_minus + clusters.g * state.sigma_z * a
    dsz = -params.gamma_par * (1.0 + state.sigma_z) - 4.0 * clusters.g * np.real(
        state.sigma_minus * np.conj(a)
    )
    return SystemState(a=complex(da), sigma_minus=dsm, sigma_z=dsz)


def drive_from_power(p_in: float, kappa: float) -> float:
    """Drive amplitude eta for an input photon flux p_in = eta^2 / kappa."""
    if p_in < 0.0:
        raise ParameterError("input power must be nonnegative")
    if kappa <= 0.0:
        raise ParameterError("kappa must be positive")
    return float(np.sqrt(p_in * kappa))


def power_from_drive(eta: float, kappa: float) -> float:
    """Input photon flux corresponding to drive amplitude eta."""
    if eta < 0.0:
        raise ParameterError("eta must be nonnegative")
    if kappa <= 0.0:
        raise ParameterError("kappa must be positive")
    return float(eta * eta / kappa)


def transmission(intensity, eta: float, kappa: float):
    """Normalized transmitted intensity |T|^2 = |a|^2 kappa^2 / eta^2.

    Accepts scalar or array |a|^2.  Undefined at zero drive.
    """
    if eta <= 0.0:
        raise ParameterError("transmission is undefined at zero drive")
    out = np.asarray(intensity) * (kappa / eta) ** 2
    return float(out) if out.ndim == 0 else out


def to_db(value):
    """Power ratio expressed in decibels, 10 log10(value)."""
    return 10.0 * np.log10(value)


def from_db(value_db):
    """Inverse of :func:`to_db`."""
    return 10.0 ** (np.asarray(value_db) / 10.0)
