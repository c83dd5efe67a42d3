"""Adaptive embedded Runge-Kutta stepper shared by all time integration.

Dormand-Prince 5(4) pair with PI step-size control and a quartic dense
output, operating on flat real or complex state vectors. The stepper is
deliberately free of model knowledge: callers hand in a right-hand side
``rhs(t, y) -> dy/dt`` and get back samples on the times they asked for.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import StiffnessError

# Butcher tableau of the Dormand-Prince 5(4) pair. The last A row equals
# the 5th-order weights, so the final stage is reusable as the first
# stage of the next step (FSAL).
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = np.array([
    [0, 0, 0, 0, 0, 0],
    [1 / 5, 0, 0, 0, 0, 0],
    [3 / 40, 9 / 40, 0, 0, 0, 0],
    [44 / 45, -56 / 15, 32 / 9, 0, 0, 0],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0, 0],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656, 0],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
])
_B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
# Difference between the 5th- and embedded 4th-order weights.
_E = np.array([71 / 57600, 0, -71 / 16695, 71 / 1920,
               -17253 / 339200, 22 / 525, -1 / 40])
# Dense-output matrix: y(t0 + th*h) = y0 + h * (K^T P) @ [th, th^2, th^3, th^4].
_P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608,
     -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933,
     87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304,
     -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408,
     701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883,
     -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

_SAFETY = 0.9
_MIN_FACTOR = 0.1
_MAX_FACTOR = 5.0
# PI exponents 0.7/k and 0.4/k for a pair of order k = 5.
_PI_ALPHA = 0.14
_PI_BETA = 0.08
_MIN_STEP = 1e-18  # seconds; below this the problem is declared stiff


@dataclass
class SolveResult:
    """Samples and bookkeeping from a single integration run."""

    times: np.ndarray
    states: np.ndarray  # shape (len(times), n)
    t_final: float
    y_final: np.ndarray
    n_steps: int
    n_rejected: int
    stopped_early: bool


def _error_norm(err, y0, y1, rel_tol, abs_tol):
    scale = abs_tol + rel_tol * np.maximum(np.abs(y0), np.abs(y1))
    return float(np.sqrt(np.mean(np.abs(err / scale) ** 2)))


def _initial_step(rhs, t0, y0, f0, rel_tol, abs_tol, max_step):
    scale = abs_tol + rel_tol * np.abs(y0)
    d0 = float(np.sqrt(np.mean(np.abs(y0 / scale) ** 2)))
    d1 = float(np.sqrt(np.mean(np.abs(f0 / scale) ** 2)))
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    y1 = y0 + h0 * f0
    f1 = rhs(t0 + h0, y1)
    d2 = float(np.sqrt(np.mean(np.abs((f1 - f0) / scale) ** 2))) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, max_step)


def solve(rhs, t0, y0, t1, *, rel_tol=1e-8, abs_tol=1e-10, max_step=np.inf,
          first_step=None, sample_times=None, accept=None):
    """Integrate dy/dt = rhs(t, y) from t0 to t1 (t1 > t0).

    Parameters
    ----------
    sample_times : array or None
        Ascending times in [t0, t1] at which to record the solution via
        dense output. None records every accepted step instead.
    accept : callable or None
        Called as accept(t, y) after each accepted step. A truthy return
        stops the integration at that point (result flags stopped_early).

    Raises
    ------
    StiffnessError
        If error control drives the step below the underflow floor. The
        samples collected so far ride along on the exception record.
    """
    if not t1 > t0:
        raise ValueError(f"t1 must exceed t0, got [{t0}, {t1}]")
    y = np.asarray(y0).copy()
    if y.ndim != 1:
        raise ValueError("state must be a flat vector")

    if sample_times is not None:
        samples = np.asarray(sample_times, dtype=float).copy()
        # allow endpoint rounding dust from t0 + duration style arithmetic
        dust = 32.0 * np.finfo(float).eps * max(abs(t0), abs(t1))
        if samples.size and (np.any(np.diff(samples) < 0)
                             or samples[0] < t0 - dust
                             or samples[-1] > t1 + dust):
            raise ValueError("sample_times must ascend within [t0, t1]")
        np.clip(samples, t0, t1, out=samples)
    else:
        samples = None

    out_t: list[float] = []
    out_y: list[np.ndarray] = []
    next_sample = 0

    def record_upto(t_prev, h, y_prev, K, t_new, y_new):
        # Emit dense-output samples that fall inside the accepted step.
        nonlocal next_sample
        while next_sample < samples.size and samples[next_sample] <= t_new:
            ts = samples[next_sample]
            if ts == t_new:
                out_y.append(y_new.copy())
            else:
                th = (ts - t_prev) / h
                powers = np.array([th, th ** 2, th ** 3, th ** 4])
                out_y.append(y_prev + h * ((K.T @ _P) @ powers))
            out_t.append(float(ts))
            next_sample += 1

    f = rhs(t0, y)
    f = np.asarray(f)
    K = np.empty((7, y.size), dtype=np.result_type(y.dtype, f.dtype, float))
    y = y.astype(K.dtype, copy=False)
    K[0] = f

    h = first_step if first_step is not None else _initial_step(
        rhs, t0, y, K[0], rel_tol, abs_tol, max_step)
    h = min(h, max_step, t1 - t0)

    t = t0
    n_steps = 0
    n_rejected = 0
    err_old = 1e-4
    stopped = False

    if samples is None:
        out_t.append(t)
        out_y.append(y.copy())
    elif samples.size and samples[0] == t0:
        out_t.append(t)
        out_y.append(y.copy())
        next_sample = 1

    while t < t1:
        if t1 - t < _MIN_STEP:
            break  # float dust at the right endpoint, not stiffness
        h = min(h, t1 - t)
        if h < _MIN_STEP:
            raise StiffnessError(
                f"step size underflow at t={t:.6e} s (h={h:.3e}); "
                "the problem is stiff on this horizon, use the slaved "
                "integrator for long-time dynamics",
                record=SolveResult(np.array(out_t), np.array(out_y), t,
                                   y.copy(), n_steps, n_rejected, False))

        # Non-finite stage values are legal here: they reject the step.
        with np.errstate(over="ignore", invalid="ignore"):
            for i in range(1, 7):
                K[i] = rhs(t + _C[i] * h, y + h * (K[:i].T @ _A[i, :i]))
            y_new = y + h * (K.T @ _B)
            err_vec = h * (K.T @ _E)
            err = _error_norm(err_vec, y, y_new, rel_tol, abs_tol)

        if not np.isfinite(err) or err > 1.0:
            n_rejected += 1
            fac = _MIN_FACTOR if not np.isfinite(err) else \
                max(_MIN_FACTOR, _SAFETY * err ** -0.2)
            h *= fac
            continue

        t_new = t + h
        if samples is not None:
            record_upto(t, h, y, K, t_new, y_new)
        else:
            out_t.append(t_new)
            out_y.append(y_new.copy())

        fac = _SAFETY * err ** -_PI_ALPHA * err_old ** _PI_BETA
        err_old = max(err, 1e-10)
        h_next = h * min(_MAX_FACTOR, max(_MIN_FACTOR, fac))

        K[0] = K[6]  # FSAL
        t, y = t_new, y_new
        n_steps += 1
        h = min(h_next, max_step)

        if accept is not None and accept(t, y):
            stopped = True
            break

    if samples is not None and not stopped:
        # Samples stranded by endpoint rounding sit at ~t1; emit y there.
        while next_sample < samples.size:
            out_t.append(float(samples[next_sample]))
            out_y.append(y.copy())
            next_sample += 1

    return SolveResult(np.array(out_t), np.array(out_y), t, y.copy(),
                       n_steps, n_rejected, stopped)
