"""Rotary position embedding math: angle schedules, rotation, and logits.

Positions enter the score functions only through their difference, so a
logit computed at (t + k, s + k) is bit-identical to the one at (t, s).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np


class ConfigurationError(ValueError):
    """Invalid RoPE configuration (odd head size, base <= 1, bad lengths)."""


class DimensionError(ValueError):
    """Vector length does not match the configured head size."""


class OrderingError(ValueError):
    """Key position lies after the query position."""


@dataclass(frozen=True)
class RopeConfig:
    head_dim: int = 128
    base: float = 10000.0
    train_len: int = 4096
    tune_len: Optional[int] = None

    def __post_init__(self):
        if isinstance(self.head_dim, bool) or int(self.head_dim) != self.head_dim:
            raise ConfigurationError(f"head_dim must be an integer, got {self.head_dim!r}")
        if self.head_dim < 2 or self.head_dim % 2:
            raise ConfigurationError(f"head_dim must be even and >= 2, got {self.head_dim}")
        if not math.isfinite(self.base) or self.base <= 1:
            raise ConfigurationError(f"base must be > 1, got {self.base}")
        if self.train_len < 1:
            raise ConfigurationError(f"train_len must be >= 1, got {self.train_len}")
        if self.tune_len is not None and self.tune_len < self.train_len:
            raise ConfigurationError(
                f"tune_len ({self.tune_len}) must be >= train_len ({self.train_len})"
            )

    @property
    def pairs(self) -> int:
        return self.head_dim // 2

    @property
    def effective_tune_len(self) -> int:
        return self.train_len if self.tune_len is None else self.tune_len


@dataclass(frozen=True)
class RotaryAngles:
    """Per-pair rotation speeds (radians per token) and their periods (tokens)."""

    theta: np.ndarray
    period: np.ndarray

    def __len__(self):
        return len(self.theta)

    @property
    def head_dim(self) -> int:
        return 2 * len(self.theta)


@dataclass(frozen=True)
class ScoreBreakdown:
    total: float
    per_dim: np.ndarray


def angles_for(head_dim: int, base: float) -> RotaryAngles:
    """Angle schedule ``base ** (-2n/d)`` for n = 0 .. d/2 - 1."""
    n = np.arange(head_dim // 2, dtype=np.float64)
    exponent = 2.0 * n / head_dim
    theta = np.exp(-exponent * math.log(base))
    period = 2.0 * math.pi * np.exp(exponent * math.log(base))
    theta.setflags(write=False)
    period.setflags(write=False)
    return RotaryAngles(theta=theta, period=period)


def rotary_angles(config: RopeConfig) -> RotaryAngles:
    return angles_for(config.head_dim, config.base)


def _as_head(v, angles: RotaryAngles) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] != angles.head_dim:
        raise DimensionError(
            f"expected a vector of length {angles.head_dim}, got shape {arr.shape}"
        )
    return arr


def _check_order(t, s):
    if s > t:
        raise OrderingError(f"key position {s} is after query position {t}")
    if s < 0:
        raise OrderingError(f"positions must be non-negative, got s={s}")


def apply_rotation(v, position, angles: RotaryAngles) -> np.ndarray:
    """Rotate each pair (v[2n], v[2n+1]) by ``position * theta_n``."""
    v = _as_head(v, angles)
    phase = position * angles.theta
    c, s = np.cos(phase), np.sin(phase)
    x, y = v[0::2], v[1::2]
    out = np.empty_like(v)
    out[0::2] = x * c - y * s
    out[1::2] = x * s + y * c
    return out


def relative_phase(t, s, angles: RotaryAngles) -> np.ndarray:
    _check_order(t, s)
    return (t - s) * angles.theta


def pair_terms(q: np.ndarray, k: np.ndarray, phase: np.ndarray) -> np.ndarray:
    """Real part of each complex-pair product for the given relative phases."""
    qa, qb = q[..., 0::2], q[..., 1::2]
    ka, kb = k[..., 0::2], k[..., 1::2]
    return (qa * ka + qb * kb) * np.cos(phase) + (qa * kb - qb * ka) * np.sin(phase)


def attention_score_real(q, k, t, s, angles: RotaryAngles) -> ScoreBreakdown:
    q = _as_head(q, angles)
    k = _as_head(k, angles)
    per_dim = pair_terms(q, k, relative_phase(t, s, angles))
    return ScoreBreakdown(total=float(per_dim.sum()), per_dim=per_dim)


def attention_score_complex(q, k, t, s, angles: RotaryAngles) -> float:
    """Same logit via complex pairs, rotating query and key separately."""
    q = _as_head(q, angles)
    k = _as_head(k, angles)
    _check_order(t, s)
    qc = q[0::2] + 1j * q[1::2]
    kc = k[0::2] + 1j * k[1::2]
    rq = qc * np.exp(1j * (t * angles.theta))
    rk = kc * np.exp(1j * (s * angles.theta))
    return float(np.sum(rq * np.conj(rk)).real)
