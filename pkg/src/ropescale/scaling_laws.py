"""Closed-form extrapolation predictors for RoPE bases and context lengths.

All quantities are analytic; nothing here is fitted to measurements.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .rope_core import ConfigurationError, RopeConfig

VANILLA_BASE = 10000.0
TWO_PI = 2.0 * math.pi


class Branch(str, enum.Enum):
    LARGER_BASE = "LargerBase"
    SMALLER_OR_EQUAL_BASE = "SmallerOrEqualBase"


@dataclass(frozen=True)
class Pivots:
    """Bases at which every pair's trained phase reaches pi/2, pi and 2*pi."""

    quarter: float
    half: float
    full: float

    @property
    def exact(self) -> tuple[float, float, float]:
        return (self.quarter, self.half, self.full)

    @property
    def rounded(self) -> tuple[int, int, int]:
        return tuple(int(math.floor(b + 0.5)) for b in self.exact)

    def flags(self, base: float) -> tuple[bool, bool, bool]:
        return tuple(base <= b for b in self.exact)


@dataclass(frozen=True)
class ScalingReport:
    config: RopeConfig
    critical_dim: int
    critical_dim_updated: int
    pivots: Pivots
    critical_base: float
    extrapolation_bound: float
    branch: Branch
    pivot_flags: tuple[bool, bool, bool]

    def to_dict(self) -> dict:
        c = self.config
        return {
            "config": {
                "d": c.head_dim,
                "base": c.base,
                "train_len": c.train_len,
                "tune_len": c.effective_tune_len,
            },
            "critical_dim": self.critical_dim,
            "critical_dim_updated": self.critical_dim_updated,
            "critical_base": self.critical_base,
            "pivots": list(self.pivots.exact),
            "pivots_rounded": list(self.pivots.rounded),
            "pivot_flags": list(self.pivot_flags),
            "extrapolation_bound": self.extrapolation_bound,
            "branch": self.branch.value,
        }


def period(n: int, config: RopeConfig) -> float:
    if not 0 <= n < config.pairs:
        raise IndexError(f"pair index {n} out of range [0, {config.pairs})")
    return TWO_PI * math.exp((2.0 * n / config.head_dim) * math.log(config.base))


def critical_dimension(d: int, base: float, context: float) -> int:
    """Number of leading dimensions whose rotation completes a period within ``context``.

    ``2 * ceil((d/2) * log_base(context / 2pi))``, clamped to ``[0, d]``.
    """
    if context < 1:
        raise ConfigurationError(f"context length must be >= 1, got {context}")
    if base <= 1:
        raise ConfigurationError(f"base must be > 1, got {base}")
    raw = 2 * math.ceil((d / 2) * math.log(context / TWO_PI) / math.log(base))
    return min(max(raw, 0), d)


def smaller_base_pivots(length: float) -> Pivots:
    if length < 1:
        raise ConfigurationError(f"length must be >= 1, got {length}")
    return Pivots(quarter=2 * length / math.pi, half=length / math.pi, full=length / TWO_PI)


def extrapolation_bound(d: int, base: float, critical_dim: int) -> float:
    """Period of the first under-trained pair under ``base``, in tokens."""
    if not 0 <= critical_dim <= d:
        raise ConfigurationError(f"critical_dim must lie in [0, {d}], got {critical_dim}")
    if base <= 1:
        raise ConfigurationError(f"base must be > 1, got {base}")
    return TWO_PI * math.exp((critical_dim / d) * math.log(base))


def critical_base(train_len: float, tune_len: float) -> float:
    if train_len <= TWO_PI:
        raise ConfigurationError(
            f"train_len must exceed 2*pi (~6.28) for a critical base, got {train_len}"
        )
    if tune_len < train_len:
        raise ConfigurationError(f"tune_len ({tune_len}) must be >= train_len ({train_len})")
    exponent = math.log(tune_len / TWO_PI) / math.log(train_len / TWO_PI)
    try:
        return VANILLA_BASE**exponent
    except OverflowError:
        raise ConfigurationError(
            f"critical base for train_len={train_len}, tune_len={tune_len} overflows a double"
        ) from None


def extended_law(config: RopeConfig) -> ScalingReport:
    tune = config.effective_tune_len
    d = config.head_dim
    beta0 = critical_base(config.train_len, tune)
    d_extra = critical_dimension(d, VANILLA_BASE, config.train_len)
    if config.base > beta0:
        branch = Branch.LARGER_BASE
        d_updated = d_extra
        bound = extrapolation_bound(d, config.base, d_extra)
    else:
        branch = Branch.SMALLER_OR_EQUAL_BASE
        d_updated = critical_dimension(d, config.base, tune)
        bound = float(tune)
    pivots = smaller_base_pivots(tune)
    return ScalingReport(
        config=config,
        critical_dim=d_extra,
        critical_dim_updated=d_updated,
        pivots=pivots,
        critical_base=beta0,
        extrapolation_bound=bound,
        branch=branch,
        pivot_flags=pivots.flags(config.base),
    )
