"""Steady-state branch structure of the driven cavity-ensemble system.

Eliminating the fast variables turns the steady-state problem into a
scalar root problem in the intracavity intensity x = |a|^2:

    F(x) = x |D(x)|^2 - eta^2,
    D(x) = (kappa + i delta_c) - sum_j g_j^2 sigma^z_j(x) / (gamma_perp + i theta_j),

with sigma^z_j(x) the saturated steady inversion of cluster j at fixed x.
Every root of F is a steady intensity; the sign of dF/dx classifies its
stability.  The input-output curve p(x) = x |D(x)|^2 / kappa is a fixed
function of the configuration, so fold (turning) powers are located as the
local extrema of p rather than by counting roots power by power.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .ensemble import SpinClusters, cooperativity
from .errors import NumericalFailure, ParameterError
from .model import PhysicalParams, drive_from_power

# scan design: log-spaced intensity grid relative to the bare-cavity
# intensity eta^2/kappa^2, refined by bisection to 1e-12 relative
SCAN_DECADES = (-12.0, 4.0)
SCAN_POINTS = 400
ROOT_REL_TOL = 1e-12
DEDUPE_REL_TOL = 1e-9
_CHUNK = 256


class Stability(Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    DEGENERATE = "degenerate"


@dataclass
class BranchPoint:
    """One point of a bistability diagram branch."""

    p_in: float
    intensity: float
    transmission: float
    stability: Stability
    inversion_summary: float


@dataclass
class BistabilityDiagram:
    """Up/down sweep branches plus the unstable middle segment and folds."""

    up_branch: list
    down_branch: list
    unstable_branch: list
    fold_lower: float | None
    fold_upper: float | None

    @property
    def bistable(self) -> bool:
        return self.fold_lower is not None and self.fold_upper is not None


def sigma_z_steady(x, g, theta, gamma_perp: float, gamma_par: float):
    """Steady inversion of a cluster held at fixed intensity x.

    sigma^z = -[1 + 4 g^2 x gamma_perp / (gamma_par (gamma_perp^2 + theta^2))]^(-1)

    Broadcasts over x and over cluster arrays.  Written in a form that
    stays finite for gamma_par = 0 (fully frozen longitudinal decay).
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0):
        raise ParameterError("intensity must be nonnegative")
    relax = gamma_par * (gamma_perp**2 + np.asarray(theta, dtype=float) ** 2)
    pump = 4.0 * np.asarray(g, dtype=float) ** 2 * gamma_perp * x
    total = relax + pump
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(total > 0.0, -relax / np.where(total > 0.0, total, 1.0), -1.0)
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class _Response:
    """Precomputed per-cluster constants for fast F(x) evaluation."""

    kappa: float
    delta_c: float
    eta: float
    wr: np.ndarray  # g^2 gamma_perp / (gamma_perp^2 + theta^2)
    wi: np.ndarray  # -g^2 theta / (gamma_perp^2 + theta^2)
    sat: np.ndarray  # 4 g^2 gamma_perp / (gamma_par (gamma_perp^2 + theta^2))
    c: np.ndarray
    c_coll: float


def _response(params: PhysicalParams, clusters: SpinClusters) -> _Response:
    if params.gamma_par <= 0.0:
        raise ParameterError("steady-state branch analysis requires gamma_par > 0")
    denom = params.gamma_perp**2 + clusters.theta**2
    g2 = clusters.g**2
    c, c_coll = cooperativity(clusters, params.kappa, params.gamma_perp)
    return _Response(
        kappa=params.kappa,
        delta_c=params.delta_c,
        eta=params.eta,
        wr=g2 * params.gamma_perp / denom,
        wi=-g2 * clusters.theta / denom,
        sat=4.0 * g2 * params.gamma_perp / (params.gamma_par * denom),
        c=c,
        c_coll=c_coll,
    )


def _denominator(resp: _Response, x: np.ndarray):
    """D(x) = Dr + i Di and its x-derivative, chunked to bound temporaries."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    dr = np.empty_like(x)
    di = np.empty_like(x)
    ddr = np.empty_like(x)
    ddi = np.empty_like(x)
    for k in range(0, x.size, _CHUNK):
        blk = x[k : k + _CHUNK]
        inv = 1.0 / (1.0 + resp.sat[:, None] * blk[None, :])
        dr[k : k + _CHUNK] = resp.kappa + resp.wr @ inv
        di[k : k + _CHUNK] = resp.delta_c + resp.wi @ inv
        inv *= inv
        ddr[k : k + _CHUNK] = -(resp.wr * resp.sat) @ inv
        ddi[k : k + _CHUNK] = -(resp.wi * resp.sat) @ inv
    return dr, di, ddr, ddi


def _f_and_slope(resp: _Response, x):
    """F(x) = x |D|^2 - eta^2 and dF/dx (the stability discriminant)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    dr, di, ddr, ddi = _denominator(resp, x)
    mag2 = dr * dr + di * di
    f = x * mag2 - resp.eta**2
    slope = mag2 + 2.0 * x * (dr * ddr + di * ddi)
    return f, slope


def _power_curve(resp: _Response, x):
    """Input flux p(x) at which x is a steady intensity, and dp/dx * kappa."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    dr, di, ddr, ddi = _denominator(resp, x)
    mag2 = dr * dr + di * di
    return x * mag2 / resp.kappa, mag2 + 2.0 * x * (dr * ddr + di * ddi)


def _classify(slope: float) -> Stability:
    if slope > 0.0:
        return Stability.STABLE
    if slope < 0.0:
        return Stability.UNSTABLE
    return Stability.DEGENERATE


def _bisect_brackets(resp: _Response, lo, hi, f_lo):
    """Geometric bisection of sign-change brackets, vectorized over brackets."""
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    neg = f_lo < 0.0
    for _ in range(80):
        mid = np.sqrt(lo * hi)
        f_mid, _ = _f_and_slope(resp, mid)
        go_right = (f_mid < 0.0) == neg
        exact = f_mid == 0.0
        lo = np.where(go_right & ~exact, mid, lo)
        hi = np.where(~go_right | exact, mid, hi)
        lo = np.where(exact, mid, lo)
        if np.all(hi - lo <= ROOT_REL_TOL * hi):
            break
    return 0.5 * (lo + hi)


def _scan_roots(resp: _Response, grid: np.ndarray):
    f, _ = _f_and_slope(resp, grid)
    sign = np.sign(f)
    on_grid = list(grid[sign == 0.0])
    idx = np.nonzero(sign[:-1] * sign[1:] < 0.0)[0]
    if idx.size:
        roots = _bisect_brackets(resp, grid[idx], grid[idx + 1], f[idx])
        on_grid.extend(roots.tolist())
    return sorted(on_grid)


def steady_roots(params: PhysicalParams, clusters: SpinClusters):
    """All steady intensities at the configured drive, with stability labels.

    Returns a sorted list of (x, Stability) pairs.  At eta = 0 the dark
    state x = 0 is the unique steady state.  An even root count that
    survives one rescan at 10x density (and is not a fold tangency) is
    reported as a numerical failure carrying the scan record.
    """
    if params.eta == 0.0:
        return [(0.0, Stability.STABLE)]
    resp = _response(params, clusters)
    x_ref = (params.eta / params.kappa) ** 2
    merged = False
    for points in (SCAN_POINTS, 10 * SCAN_POINTS):
        grid = x_ref * np.logspace(SCAN_DECADES[0], SCAN_DECADES[1], points)
        roots = _scan_roots(resp, grid)
        deduped = []
        for r in roots:
            if deduped and r - deduped[-1] <= DEDUPE_REL_TOL * r:
                deduped[-1] = 0.5 * (deduped[-1] + r)
                merged = True
            else:
                deduped.append(r)
        if len(deduped) % 2 == 1 or merged:
            _, slopes = _f_and_slope(resp, np.array(deduped))
            return [(r, _classify(s)) for r, s in zip(deduped, slopes)]
    raise NumericalFailure(
        "even steady-state root count after densified rescan",
        record={"grid": grid, "roots": deduped, "eta": params.eta},
    )


def asymptotes(c_coll: float):
    """(low-drive, high-drive) transmission limits for collective cooperativity."""
    if c_coll < 0.0:
        raise ParameterError("collective cooperativity must be nonnegative")
    return 1.0 / (1.0 + c_coll) ** 2, 1.0


def _fold_points(params: PhysicalParams, clusters: SpinClusters, power_window):
    """Local extrema of the input-output curve p(x) inside the power window.

    Returns a list of (x, p, kind) with kind "max" (a fold terminating the
    low branch) or "min" (a fold terminating the high branch).
    """
    p_lo, p_hi = power_window
    if not 0.0 < p_lo < p_hi:
        raise ParameterError("power window must satisfy 0 < p_lo < p_hi")
    resp = _response(params, clusters)

    lo_roots = steady_roots(params.with_drive(drive_from_power(p_lo, params.kappa)), clusters)
    hi_roots = steady_roots(params.with_drive(drive_from_power(p_hi, params.kappa)), clusters)
    x_lo = min(r for r, _ in lo_roots) / 100.0
    x_hi = max(r for r, _ in hi_roots) * 100.0
    decades = np.log10(x_hi / x_lo)
    n = int(min(4000, max(400, 120 * decades)))
    grid = np.logspace(np.log10(x_lo), np.log10(x_hi), n)

    _, q = _power_curve(resp, grid)
    sign = np.sign(q)
    idx = np.nonzero(sign[:-1] * sign[1:] < 0.0)[0]
    folds = []
    for i in idx:
        a, b = grid[i], grid[i + 1]
        qa = q[i]
        for _ in range(90):
            m = np.sqrt(a * b)
            _, qm = _power_curve(resp, np.array([m]))
            if qm[0] == 0.0:
                a = b = m
                break
            if (qm[0] < 0.0) == (qa < 0.0):
                a, qa = m, qm[0]
            else:
                b = m
            if b - a <= 1e-14 * b:
                break
        x_star = 0.5 * (a + b)
        p_star, _ = _power_curve(resp, np.array([x_star]))
        kind = "max" if q[i] > 0.0 else "min"
        if p_lo <= p_star[0] <= p_hi:
            folds.append((float(x_star), float(p_star[0]), kind))
    return folds


def find_folds(params: PhysicalParams, clusters: SpinClusters, power_window):
    """Fold powers (fold_lower, fold_upper) inside the window, None if absent.

    fold_upper is the drive at which the low-transmission branch
    disappears (the upward jump of a rising sweep); fold_lower is where
    the saturated branch disappears (the downward jump).  A monostable
    configuration yields (None, None).
    """
    folds = _fold_points(params, clusters, power_window)
    maxima = [p for _, p, kind in folds if kind == "max"]
    minima = [p for _, p, kind in folds if kind == "min"]
    fold_upper = max(maxima) if maxima else None
    fold_lower = min(minima) if minima else None
    return fold_lower, fold_upper


def _branch_points(resp: _Response, p, roots, pick) -> BranchPoint:
    stable = [(r, s) for r, s in roots if s is Stability.STABLE]
    if not stable:
        raise NumericalFailure(f"no stable steady state found at p_in={p:g}")
    x, s = pick(stable)
    return _make_point(resp, p, x, s)


def _make_point(resp: _Response, p, x, stability) -> BranchPoint:
    if x > 0.0:
        inv_sum = float(-np.sum(resp.c / (1.0 + resp.sat * x)))
    else:
        inv_sum = float(-np.sum(resp.c))
    eta2 = p * resp.kappa
    return BranchPoint(
        p_in=float(p),
        intensity=float(x),
        transmission=float(x * resp.kappa**2 / eta2),
        stability=stability,
        inversion_summary=inv_sum,
    )


def hysteresis_sweep(powers, params: PhysicalParams, clusters: SpinClusters) -> BistabilityDiagram:
    """Quasi-static up and down power sweeps with branch continuation.

    The up branch starts from the smallest stable root at the lowest
    power and follows the nearest stable root (log-intensity distance) as
    the power rises; the down branch runs the same continuation in
    reverse from the largest root.  Unstable middle roots are collected
    separately.  Fold powers are located over the swept window.
    """
    powers = np.asarray(powers, dtype=float)
    if powers.size == 0:
        raise ParameterError("power grid must not be empty")
    if np.any(powers <= 0.0):
        raise ParameterError("powers must be positive")
    if powers.size > 1 and np.any(np.diff(powers) <= 0.0):
        raise ParameterError("powers must be strictly ascending")

    per_power = []
    for p in powers:
        pp = params.with_drive(drive_from_power(float(p), params.kappa))
        per_power.append((_response(pp, clusters), steady_roots(pp, clusters)))

    def _continue(order, seed_pick):
        points = []
        x_prev = None
        for i in order:
            resp, roots = per_power[i]
            stable = [(r, s) for r, s in roots if s is Stability.STABLE]
            if not stable:
                raise NumericalFailure(f"no stable steady state at p_in={powers[i]:g}")
            if x_prev is None:
                x, s = seed_pick(stable)
            else:
                x, s = min(stable, key=lambda rs: abs(np.log(rs[0]) - np.log(x_prev)))
            x_prev = x
            points.append(_make_point(resp, powers[i], x, s))
        return points

    up = _continue(range(len(powers)), lambda st: st[0])
    down = _continue(range(len(powers) - 1, -1, -1), lambda st: st[-1])
    down.reverse()

    unstable = []
    for i, (resp, roots) in enumerate(per_power):
        for r, s in roots:
            if s is Stability.UNSTABLE:
                unstable.append(_make_point(resp, powers[i], r, s))

    if powers.size > 1:
        fold_lower, fold_upper = find_folds(params, clusters, (powers[0], powers[-1]))
    else:
        fold_lower = fold_upper = None
    return BistabilityDiagram(
        up_branch=up,
        down_branch=down,
        unstable_branch=unstable,
        fold_lower=fold_lower,
        fold_upper=fold_upper,
    )
