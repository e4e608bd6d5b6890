import warnings

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from intersense.sensing import (
    DetectorSpec,
    SensingErrorModel,
    check_sensing_time,
    inverse_q,
    required_sensing_time,
)


def _q_inv_mp(p):
    # Q(x) = erfc(x / sqrt 2) / 2, inverted with high precision
    mpmath.mp.dps = 40
    return float(mpmath.findroot(lambda x: mpmath.erfc(x / mpmath.sqrt(2)) / 2 - p, 0))


@pytest.mark.parametrize("p", [1e-6, 0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 0.999])
def test_inverse_q_against_mpmath(p):
    assert inverse_q(p) == pytest.approx(_q_inv_mp(p), rel=1e-9, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(min_value=1e-9, max_value=1 - 1e-9))
def test_inverse_q_symmetry(p):
    assert inverse_q(p) == pytest.approx(-inverse_q(1 - p), abs=1e-8)


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 2.0])
def test_inverse_q_domain(p):
    with pytest.raises(ValueError):
        inverse_q(p)


def test_required_sensing_time_against_mpmath():
    det = DetectorSpec(sampling_freq=6e6, snr=0.1)
    fa, md = 0.1, 0.1
    mpmath.mp.dps = 40
    bracket = mpmath.mpf(_q_inv_mp(fa)) - mpmath.mpf(_q_inv_mp(1 - md)) * mpmath.sqrt(1 + 2 * mpmath.mpf("0.1"))
    want = float(2 / mpmath.mpf(6e6) * bracket**2 / mpmath.mpf("0.1") ** 2)
    assert required_sensing_time(det, fa, md) == pytest.approx(want, rel=1e-9)


def test_sensing_time_grows_with_stricter_targets():
    det = DetectorSpec(1e6, 0.5)
    assert required_sensing_time(det, 0.01, 0.01) > required_sensing_time(det, 0.1, 0.1)


def test_error_model_validation():
    assert SensingErrorModel().perfect
    assert not SensingErrorModel(0.1, 0.0).perfect
    for fa, md in [(1.0, 0.0), (0.0, -0.1), (1.5, 0.2)]:
        with pytest.raises(ValueError):
            SensingErrorModel(fa, md)
    with pytest.raises(ValueError):
        DetectorSpec(0.0, 1.0)
    with pytest.raises(ValueError):
        DetectorSpec(1.0, -1.0)


def test_check_sensing_time_warns():
    with pytest.warns(UserWarning):
        check_sensing_time(1.0, [5.0, 2.0])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        check_sensing_time(0.01, [5.0, 1.0])
