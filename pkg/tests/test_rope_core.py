import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ropescale.rope_core import (
    ConfigurationError,
    DimensionError,
    OrderingError,
    RopeConfig,
    angles_for,
    apply_rotation,
    attention_score_complex,
    attention_score_real,
    relative_phase,
    rotary_angles,
)

# 40-digit mpmath evaluations of base ** (-126/128)
THETA63_BASE_10000 = 1.154781984689458179666e-4
THETA63_BASE_500 = 2.203948296545364327643e-3


class TestConfig:
    @pytest.mark.parametrize("d", [0, 1, 3, 127])
    def test_rejects_bad_head_dim(self, d):
        with pytest.raises(ConfigurationError):
            RopeConfig(head_dim=d)

    @pytest.mark.parametrize("base", [1.0, 0.5, -3.0, float("inf")])
    def test_rejects_bad_base(self, base):
        with pytest.raises(ConfigurationError):
            RopeConfig(base=base)

    def test_tune_len_not_shorter_than_train(self):
        with pytest.raises(ConfigurationError):
            RopeConfig(train_len=4096, tune_len=2048)
        assert RopeConfig(train_len=4096).effective_tune_len == 4096


class TestAngles:
    def test_first_angle_is_one(self):
        for d, base in [(2, 2.0), (128, 10000.0), (64, 1e6)]:
            assert angles_for(d, base).theta[0] == 1.0

    def test_last_angle_base_10000(self):
        theta = rotary_angles(RopeConfig()).theta
        assert theta[63] == pytest.approx(THETA63_BASE_10000, rel=1e-13)

    def test_last_angle_base_500(self):
        theta = rotary_angles(RopeConfig(base=500.0)).theta
        assert theta[63] == pytest.approx(THETA63_BASE_500, rel=1e-13)

    @given(
        d=st.integers(1, 128).map(lambda x: 2 * x),
        base=st.floats(1.001, 1e9, allow_nan=False),
    )
    def test_monotone_and_period_product(self, d, base):
        a = angles_for(d, base)
        assert np.all(np.diff(a.theta) < 0) or d == 2
        assert np.all(np.diff(a.period) > 0) or d == 2
        np.testing.assert_allclose(a.period * a.theta, 2 * math.pi, rtol=1e-12)

    def test_angles_read_only(self):
        a = rotary_angles(RopeConfig())
        with pytest.raises(ValueError):
            a.theta[0] = 2.0


class TestRotation:
    def test_position_zero_is_identity(self, rng):
        a = angles_for(16, 10000.0)
        v = rng.normal(size=16)
        np.testing.assert_array_equal(apply_rotation(v, 0, a), v)

    def test_quarter_turn(self):
        a = angles_for(2, 10000.0)
        out = apply_rotation([1.0, 0.0], math.pi / 2, a)
        np.testing.assert_allclose(out, [0.0, 1.0], atol=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            apply_rotation(np.ones(6), 3, angles_for(8, 10000.0))

    def test_rotated_dot_depends_on_offset_only(self):
        a = angles_for(4, 10000.0)
        v = np.array([1.0, 0.0, 1.0, 0.0])
        dots = [
            apply_rotation(v, t + 7, a) @ apply_rotation(v, t, a) for t in (0, 10, 1000, 12345)
        ]
        np.testing.assert_allclose(dots, dots[0], rtol=1e-12)

    @settings(max_examples=200)
    @given(
        seed=st.integers(0, 2**32 - 1),
        pos=st.integers(0, 2**20),
        d=st.sampled_from([2, 4, 64, 128]),
    )
    def test_isometry(self, seed, pos, d):
        v = np.random.default_rng(seed).uniform(-1, 1, d)
        out = apply_rotation(v, pos, angles_for(d, 10000.0))
        assert np.linalg.norm(out) == pytest.approx(np.linalg.norm(v), rel=1e-10)

    def test_rotated_vectors_reproduce_score(self, rng):
        a = angles_for(64, 10000.0)
        q, k = rng.uniform(-1, 1, 64), rng.uniform(-1, 1, 64)
        via_rotation = apply_rotation(q, 900, a) @ apply_rotation(k, 37, a)
        assert via_rotation == pytest.approx(attention_score_real(q, k, 900, 37, a).total, rel=1e-10)


class TestScores:
    def test_same_position_is_dot_product(self, rng):
        a = angles_for(32, 10000.0)
        q, k = rng.normal(size=32), rng.normal(size=32)
        assert attention_score_real(q, k, 55, 55, a).total == pytest.approx(q @ k, rel=1e-14)
        assert attention_score_complex(q, k, 55, 55, a) == pytest.approx(q @ k, rel=1e-12)

    def test_single_active_pair(self):
        a = angles_for(8, 10000.0)
        q = np.zeros(8)
        q[0] = 1.0
        for delta in (1, 5, 100, 4097):
            assert attention_score_real(q, q, delta + 3, 3, a).total == pytest.approx(
                math.cos(delta), abs=1e-15
            )

    def test_zero_key(self, rng):
        a = angles_for(8, 10000.0)
        assert attention_score_complex(rng.normal(size=8), np.zeros(8), 10, 2, a) == 0.0

    def test_real_matches_complex_d8(self, rng):
        a = angles_for(8, 10000.0)
        q, k = rng.uniform(-1, 1, 8), rng.uniform(-1, 1, 8)
        c = attention_score_complex(q, k, 100, 3, a)
        assert attention_score_real(q, k, 100, 3, a).total == pytest.approx(c, rel=1e-9)

    def test_breakdown_sums_to_total(self, rng):
        a = angles_for(128, 10000.0)
        q, k = rng.normal(size=128), rng.normal(size=128)
        b = attention_score_real(q, k, 9000, 11, a)
        assert b.per_dim.shape == (64,)
        assert math.fsum(b.per_dim) == pytest.approx(b.total, rel=1e-10)

    def test_ordering_error(self):
        a = angles_for(4, 10000.0)
        with pytest.raises(OrderingError):
            attention_score_real(np.ones(4), np.ones(4), 3, 4, a)
        with pytest.raises(OrderingError):
            attention_score_complex(np.ones(4), np.ones(4), 3, 4, a)
        with pytest.raises(OrderingError):
            relative_phase(0, 1, a)

    def test_fractional_positions_accepted(self, rng):
        a = angles_for(8, 10000.0)
        q, k = rng.normal(size=8), rng.normal(size=8)
        assert attention_score_real(q, k, 2.5, 0.5, a).total == pytest.approx(
            attention_score_real(q, k, 2, 0, a).total, rel=1e-12
        )


class TestRelativePhase:
    def test_zero_offset(self):
        np.testing.assert_array_equal(relative_phase(9, 9, angles_for(16, 10000.0)), 0.0)

    def test_full_period_offset(self):
        a = angles_for(16, 10000.0)
        for n in range(8):
            assert relative_phase(a.period[n], 0, a)[n] == pytest.approx(2 * math.pi, abs=1e-9)

    def test_last_pair_at_4096(self):
        phase = relative_phase(4096, 0, rotary_angles(RopeConfig()))
        assert phase[63] == pytest.approx(4096 * THETA63_BASE_10000, rel=1e-12)
        assert phase[63] == pytest.approx(0.47300, abs=5e-6)
