"""Rate fitting and spectral-decay bookkeeping."""

import numpy as np
import pytest

from dielsem.validation import fit_rate, spatial_decay_ok


def test_fit_rate_recovers_exact_slope():
    dts = np.array([0.1, 0.05, 0.025, 0.0125])
    errs = 3.0 * dts**2
    slope, se = fit_rate(dts, errs)
    assert slope == pytest.approx(2.0, abs=1e-12)
    assert se == pytest.approx(0.0, abs=1e-10)


def test_fit_rate_stderr_with_noise():
    rng = np.random.default_rng(0)
    dts = np.array([0.1, 0.05, 0.025, 0.0125, 0.00625])
    errs = 3.0 * dts**2 * np.exp(rng.normal(0, 0.05, dts.size))
    slope, se = fit_rate(dts, errs)
    assert abs(slope - 2.0) < 3 * se + 0.2
    assert se > 0.0


def test_spatial_decay_floor_exclusion():
    # clean decay passes
    assert spatial_decay_ok([1.0, 0.1, 0.01, 1e-3])
    # stagnation below the floor band is excused
    assert spatial_decay_ok([1.0, 0.05, 1e-4, 9e-5])
    # stagnation far above the floor fails
    assert not spatial_decay_ok([1.0, 0.9, 1e-4, 1e-6])
