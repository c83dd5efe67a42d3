import numpy as np
import pytest

from spincavity.errors import NumericalFailure, StiffnessError
from spincavity.integrate import solve


def test_exponential_decay_meets_the_tolerance():
    res = solve(lambda t, y: -y, 0.0, np.array([1.0 + 0j]), 1.0,
                rel_tol=1e-10, abs_tol=1e-14)
    assert abs(res.y_final[0] - np.exp(-1.0)) < 1e-9
    assert res.t_final == 1.0
    assert not res.stopped_early


def test_driven_relaxation_to_the_closed_form():
    samples = np.linspace(0.0, 5.0, 21)
    res = solve(lambda t, y: 1.0 - y, 0.0, np.array([0.0 + 0j]), 5.0,
                rel_tol=1e-10, abs_tol=1e-14, sample_times=samples)
    exact = 1.0 - np.exp(-samples)
    assert np.array_equal(res.times, samples)
    assert np.max(np.abs(res.states[:, 0] - exact)) < 1e-9


def test_phase_rotation_preserves_magnitude():
    res = solve(lambda t, y: 1j * 3.0 * y, 0.0, np.array([1.0 + 0j]), 10.0,
                rel_tol=1e-10, abs_tol=1e-14)
    assert abs(abs(res.y_final[0]) - 1.0) < 1e-7


def test_accepted_steps_respect_max_step():
    res = solve(lambda t, y: -y, 0.0, np.array([1.0 + 0j]), 2.0,
                rel_tol=1e-6, abs_tol=1e-10, max_step=0.05)
    gaps = np.diff(res.times)
    assert np.all(gaps <= 0.05 * (1.0 + 1e-12))


def test_first_step_is_honoured():
    res = solve(lambda t, y: -y, 0.0, np.array([1.0 + 0j]), 1.0,
                rel_tol=1e-6, abs_tol=1e-10, first_step=1e-4)
    assert res.times[1] - res.times[0] == pytest.approx(1e-4, rel=1e-12)


def test_sample_outside_the_span_is_rejected():
    with pytest.raises(Exception):
        solve(lambda t, y: -y, 0.0, np.array([1.0 + 0j]), 1.0,
              sample_times=np.array([0.5, 2.0]))


def test_accept_callback_stops_the_run():
    res = solve(lambda t, y: -y, 0.0, np.array([1.0 + 0j]), 50.0,
                rel_tol=1e-8, abs_tol=1e-12,
                accept=lambda t, y: t > 0.5)
    assert res.stopped_early
    assert 0.5 < res.t_final < 50.0


def test_blowup_raises_stiffness_error_with_a_record():
    with pytest.raises(StiffnessError) as err:
        solve(lambda t, y: y * y, 0.0, np.array([1.0 + 0j]), 2.0,
              rel_tol=1e-8, abs_tol=1e-10)
    record = err.value.record
    assert isinstance(err.value, NumericalFailure)
    assert 0.9 < record.t_final < 1.1
    assert record.times[-1] == record.t_final
    assert 100 < record.n_steps < 5000
    assert not record.stopped_early


def test_repeat_runs_are_bit_identical():
    def rhs(t, y):
        return np.array([1j * y[0] - 0.3 * y[1], y[0] * 0.1 - y[1]])

    y0 = np.array([1.0 + 0.5j, -0.2 + 0j])
    first = solve(rhs, 0.0, y0, 8.0, rel_tol=1e-9, abs_tol=1e-12)
    second = solve(rhs, 0.0, y0, 8.0, rel_tol=1e-9, abs_tol=1e-12)
    assert np.array_equal(first.times, second.times)
    assert np.array_equal(first.states, second.states)
    assert first.n_steps == second.n_steps
    assert first.n_rejected == second.n_rejected
