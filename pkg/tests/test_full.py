import numpy as np
import pytest

from intersense.full import (
    OutcomeDurationTable,
    myopic_duration,
    myopic_interference,
    myopic_objective,
    myopic_table,
    optimal_two_channel,
)
from intersense.markov import joint_metrics
from intersense.optimize import GridSpec, InfeasibleError
from intersense.renewal import ChannelParams, expected_free_time_from_free
from intersense.sensing import SensingErrorModel

C1, C2 = ChannelParams(0.4e-3, 0.6e-3), ChannelParams(0.7e-3, 0.3e-3)
CHS = [C1, C2]
ERRS = [SensingErrorModel()] * 2
TS = 10.0


def _lim(f):
    return [f * c.utilization for c in CHS]


def test_table_validation_and_order():
    with pytest.raises(ValueError):
        OutcomeDurationTable({(0, 0): 1.0, (1, 1): 2.0})
    with pytest.raises(ValueError):
        OutcomeDurationTable({})
    with pytest.raises(ValueError):
        OutcomeDurationTable.from_array([5.0, 20.0, 20.0, 20.0], 2, t_s=10.0)
    t = OutcomeDurationTable.from_array([10.0, 1.0, 2.0, 3.0], 2)
    assert list(t) == [(0, 0), (0, 1), (1, 0), (1, 1)]
    assert t[(1, 0)] == 2.0 and len(t) == 4
    assert np.array_equal(t.as_array(), [10.0, 1.0, 2.0, 3.0])
    assert "10: 2" in repr(t)


def test_myopic_objective_components():
    t = np.array([50.0, 200.0])
    # single sensed-free channel: (t - interference - overhead) / t
    d1 = expected_free_time_from_free(C1, t)
    want = (t - (t - d1) - d1 * TS / t) / t
    assert np.allclose(myopic_objective([C1], [ERRS[0]], (1,), TS, t), want)
    # sensed-busy channel is charged its undiscovered free time
    assert np.all(myopic_objective([C1], [ERRS[0]], (0,), TS, t) < 0)
    assert np.allclose(myopic_interference(C1, ERRS[0], t), t - d1)


def test_myopic_reference_table():
    table, choices = myopic_table(CHS, ERRS, TS, _lim(0.1))
    assert all(c.feasible for c in choices.values())
    assert table[(0, 0)] == pytest.approx(TS)
    assert table[(0, 1)] == pytest.approx(129.54, rel=1e-3)
    assert table[(1, 0)] == pytest.approx(179.1, rel=1e-3)
    assert table[(1, 1)] == pytest.approx(203.5, rel=1e-3)
    for omega, c in choices.items():
        for ch, err, s, lim in zip(CHS, ERRS, omega, _lim(0.1)):
            if s:
                assert myopic_interference(ch, err, c.duration) / c.duration <= lim + 1e-12


def test_myopic_unaffected_by_relaxed_limit():
    a, _ = myopic_table(CHS, ERRS, TS, _lim(0.1))
    b, _ = myopic_table(CHS, ERRS, TS, _lim(0.4))
    assert np.allclose(a.as_array(), b.as_array())


def test_myopic_infeasible_falls_back():
    errs = [SensingErrorModel(0.0, 0.9)] * 2
    c = myopic_duration(CHS, errs, (1, 1), TS, _lim(0.05))
    assert not c.feasible and c.duration == pytest.approx(TS)
    with pytest.raises(ValueError):
        myopic_duration(CHS, ERRS, (1,), TS, _lim(0.1))


def test_optimal_beats_myopic_and_respects_limits():
    opt = optimal_two_channel(C1, C2, TS, _lim(0.1))
    tab, _ = myopic_table(CHS, ERRS, TS, _lim(0.1))
    assert opt.R > joint_metrics(CHS, tab, TS).R
    assert np.all(opt.interference <= np.array(_lim(0.1)) * (1 + 1e-12))
    assert opt.table[(0, 0)] == TS
    assert opt.R == pytest.approx(joint_metrics(CHS, opt.table, TS).R)


def test_optimal_infeasible():
    grid = GridSpec(TS, 2000.0, 500.0, refine_levels=0)
    with pytest.raises(InfeasibleError):
        optimal_two_channel(C1, C2, TS, [1e-9, 1e-9], grid)
