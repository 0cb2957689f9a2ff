"""Recompute the frozen constants used across the suite with mpmath."""

import mpmath as mp
import pytest

from test_rope_core import THETA63_BASE_10000, THETA63_BASE_500
from test_scaling_laws import (
    BETA0_4K_16K,
    BOUND_1E6,
    BOUND_80K,
    BOUND_120K,
    PERIOD_45,
    PERIOD_46,
    PIVOTS_4096,
    PIVOTS_16384,
)
from test_variants import THETA63_NTK8, ZETA63

mp.mp.dps = 40


def two_pi_pow(base, num, den):
    return 2 * mp.pi * mp.power(base, mp.mpf(num) / den)


@pytest.mark.parametrize(
    "frozen, exact",
    [
        (THETA63_BASE_10000, lambda: mp.power(10000, mp.mpf(-126) / 128)),
        (THETA63_BASE_500, lambda: mp.power(500, mp.mpf(-126) / 128)),
        (THETA63_NTK8, lambda: mp.power(80000, mp.mpf(-126) / 128)),
        (PERIOD_45, lambda: two_pi_pow(10000, 90, 128)),
        (PERIOD_46, lambda: two_pi_pow(10000, 92, 128)),
        (BOUND_1E6, lambda: two_pi_pow(10**6, 92, 128)),
        (BOUND_80K, lambda: two_pi_pow(80000, 92, 128)),
        (BOUND_120K, lambda: two_pi_pow(120000, 92, 128)),
        (BETA0_4K_16K, lambda: mp.power(
            10000, mp.log(16384 / (2 * mp.pi)) / mp.log(4096 / (2 * mp.pi)))),
        (ZETA63, lambda: (mp.mpf("0.4") + mp.mpf(126) / 128) / mp.mpf("1.4")),
    ],
)
def test_frozen_scalar(frozen, exact):
    assert frozen == pytest.approx(float(exact()), rel=1e-15)


@pytest.mark.parametrize("length, frozen", [(4096, PIVOTS_4096), (16384, PIVOTS_16384)])
def test_frozen_pivots(length, frozen):
    exact = (2 * length / mp.pi, length / mp.pi, length / (2 * mp.pi))
    assert frozen == pytest.approx(tuple(float(x) for x in exact), rel=1e-15)
