"""One-dimensional intensity flow left after the fast degrees of freedom
are eliminated, for a resonant ensemble acting as a single collective spin:
right-hand side, fixed points, and the potential landscape."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalFailure, ParameterError
from .steady import Stability

# Tolerances for classifying cubic roots in the field amplitude.
_REAL_TOL = 1e-9
_MERGE_TOL = 1e-9
_SIMPSON_TOL = 1e-10  # absolute, per panel
_SIMPSON_DEPTH = 48


@dataclass(frozen=True)
class AdiabaticModel:
    """Collective-spin reduction of the driven system.

    cooperativity is the dimensionless collective value; kappa and
    gamma_par are rates [rad/s]; eta is the drive amplitude [sqrt(1/s)].
    """

    cooperativity: float
    kappa: float
    gamma_par: float
    eta: float

    def __post_init__(self):
        for name in ("kappa", "gamma_par", "eta"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ParameterError(f"{name} must be finite and positive, "
                                     f"got {value!r}")
        if not (np.isfinite(self.cooperativity) and self.cooperativity >= 0):
            raise ParameterError("cooperativity must be finite and "
                                 f"nonnegative, got {self.cooperativity!r}")


def adiabatic_rhs(model: AdiabaticModel, x):
    """d|a|^2/dt of the reduced flow at intensity x >= 0.

    Fractional powers go through sqrt(x) so x = 0 is exact.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ParameterError("intensity must be nonnegative")
    c, kap, gpar, eta = (model.cooperativity, model.kappa,
                         model.gamma_par, model.eta)
    amp = np.sqrt(x)
    a2, a3, a4 = x, x * amp, x * x
    a5 = a4 * amp
    out = (-8 * c * kap ** 2 * a5 / eta + 8 * c * kap * a4
           - 2 * kap * gpar * (1 + c) * a3 / eta + 2 * gpar * a2)
    return out if out.ndim else float(out)


def rhs_slope(model: AdiabaticModel, x):
    """d(adiabatic_rhs)/dx, the stability discriminator."""
    x = np.asarray(x, dtype=float)
    c, kap, gpar, eta = (model.cooperativity, model.kappa,
                         model.gamma_par, model.eta)
    amp = np.sqrt(x)
    out = (-20 * c * kap ** 2 * x * amp / eta + 16 * c * kap * x
           - 3 * kap * gpar * (1 + c) * amp / eta + 2 * gpar)
    return out if out.ndim else float(out)


def adiabatic_fixed_points(model: AdiabaticModel):
    """All nonnegative fixed points as (x, stability), ascending in x.

    The origin is always present and reported degenerate; it never takes
    part in bistability bookkeeping. The driven fixed points are roots of
    a cubic in the field amplitude.
    """
    c, kap, gpar, eta = (model.cooperativity, model.kappa,
                         model.gamma_par, model.eta)
    coeffs = np.array([4 * c * kap, -4 * c * eta,
                       gpar * (1 + c), -gpar * eta / kap])
    roots = np.roots(coeffs)
    if not np.all(np.isfinite(roots)):
        raise NumericalFailure("cubic root extraction produced non-finite "
                               "values", record={"coefficients": coeffs})
    scale = max(abs(r) for r in roots) if roots.size else 0.0
    real = sorted(float(r.real) for r in roots
                  if abs(r.imag) <= _REAL_TOL * scale and r.real > 0)

    # A double root is a fold and gets the degenerate label.
    merged: list[tuple[float, bool]] = []
    for amp in real:
        if merged and amp - merged[-1][0] <= _MERGE_TOL * amp:
            merged[-1] = (0.5 * (merged[-1][0] + amp), True)
        else:
            merged.append((amp, False))

    points = [(0.0, Stability.DEGENERATE)]
    for amp, doubled in merged:
        x = amp * amp
        if doubled:
            label = Stability.DEGENERATE
        else:
            label = (Stability.STABLE if rhs_slope(model, x) < 0
                     else Stability.UNSTABLE)
        points.append((x, label))
    return points


def _simpson(f, a, fa, b, fb, fm, tol, depth):
    # Iterative adaptive Simpson; accepts a panel when halving moves the
    # estimate by no more than 15*tol.
    m = 0.5 * (a + b)
    whole = (b - a) / 6 * (fa + 4 * fm + fb)
    stack = [(a, fa, b, fb, m, fm, whole, tol, depth)]
    total = 0.0
    while stack:
        a, fa, b, fb, m, fm, s, tol, depth = stack.pop()
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = (m - a) / 6 * (fa + 4 * flm + fm)
        right = (b - m) / 6 * (fm + 4 * frm + fb)
        if depth <= 0 or abs(left + right - s) <= 15 * tol:
            total += left + right + (left + right - s) / 15
        else:
            stack.append((a, fa, m, fm, lm, flm, left, tol / 2, depth - 1))
            stack.append((m, fm, b, fb, rm, frm, right, tol / 2, depth - 1))
    return total


def potential(model: AdiabaticModel, x_grid):
    """V on the grid, where V(x) = -integral of the rhs from 0 to x.

    Gauge: V(0) = 0. Accumulates panel by panel between grid points, so a
    finer grid only subdivides, never re-integrates from the origin. Panel
    tolerance is absolute; when V is far below that scale the accuracy
    comes from grid density, so sample the decades you care about.
    """
    grid = np.asarray(x_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ParameterError("grid must be a nonempty 1-d array")
    if np.any(grid < 0) or np.any(np.diff(grid) <= 0):
        raise ParameterError("grid must be nonnegative and ascending")

    f = lambda x: float(adiabatic_rhs(model, x))
    values = np.empty_like(grid)
    acc = 0.0
    prev = 0.0
    f_prev = 0.0
    for i, x in enumerate(grid):
        if x > prev:
            f_x = f(x)
            fm = f(0.5 * (prev + x))
            acc += _simpson(f, prev, f_prev, x, f_x, fm,
                            _SIMPSON_TOL, _SIMPSON_DEPTH)
            prev, f_prev = x, f_x
        values[i] = -acc
    return values
