import math

import numpy as np
import pytest

from oftsolve.schedule import DegenerateRatioError, TimeStepSchedule, build_schedule, step_sizes, uniform_schedule


def test_parameters_row1():
    s = build_schedule(5e-2, 0.5, 20.0)
    assert s.a == pytest.approx(20 / 9)
    assert s.b == pytest.approx(1.0225)
    assert abs(s.N - 103) <= 1
    assert abs(s.N - 102) <= 2


def test_row2_count_is_smallest_reaching_T():
    s = build_schedule(5e-3, 5e-2, 20.0)
    expected = math.ceil(math.log(10) / math.log1p(9 * 5e-3 / 20))
    assert s.N == expected == 1025


def test_row2_example_count():
    # listed count for this row; not reachable together with t_{N-1} < T
    s = build_schedule(5e-3, 5e-2, 20.0)
    assert abs(s.N - 1309) <= 2


@pytest.mark.parametrize("dt0,dtT,T", [(5e-2, 0.5, 20), (5e-3, 5e-2, 20), (1e-3, 0.2, 50), (0.01, 0.011, 3)])
def test_invariants(dt0, dtT, T):
    s = build_schedule(dt0, dtT, T)
    n = np.arange(s.N + 1)
    np.testing.assert_allclose(s.nodes, s.a * (s.b**n - 1), rtol=1e-12, atol=1e-15)
    assert s.nodes[0] == 0.0
    assert np.all(np.diff(s.nodes) > 0)
    assert s.nodes[1] == pytest.approx(dt0, rel=1e-12)
    assert s.nodes[-1] >= T > s.nodes[-2]


def test_degenerate_ratio():
    with pytest.raises(DegenerateRatioError):
        build_schedule(0.1, 0.1, 10)
    with pytest.raises(DegenerateRatioError):
        build_schedule(0.2, 0.1, 10)
    with pytest.raises(ValueError):
        build_schedule(0.1, 1.0, 1.0)


def test_step_sizes_geometric():
    s = build_schedule(5e-2, 0.5, 20.0)
    dt = step_sizes(s)
    assert np.all(dt > 0)
    np.testing.assert_allclose(dt[1:] / dt[:-1], s.b, rtol=1e-12)
    np.testing.assert_allclose(dt, np.diff(s.nodes), rtol=1e-10)
    assert 9.5 <= dt[-1] / dt[0] <= 10.5


def test_step_sizes_doubling():
    s = TimeStepSchedule(a=1.0, b=2.0, nodes=np.array([0.0, 1.0, 3.0, 7.0]), dt0=1, dtT=4, T=7)
    np.testing.assert_allclose(step_sizes(s), [1, 2, 4])


def test_uniform_limit():
    s = build_schedule(0.01, 0.01 * (1 + 1e-9), 1.0)
    np.testing.assert_allclose(step_sizes(s), 0.01, rtol=1e-6)
    u = uniform_schedule(0.1, 5)
    np.testing.assert_allclose(step_sizes(u), 0.1)


def test_n_steps_override_keeps_parameters():
    s = build_schedule(5e-3, 5e-2, 20.0, n_steps=1308)
    assert s.N == 1308
    assert s.a == pytest.approx(20 / 9)
    assert s.t_final == pytest.approx(39.80, abs=0.01)
