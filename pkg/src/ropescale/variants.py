"""Extrapolation strategies expressed as hooks on a single scoring pipeline.

Every variant contributes up to four things:

* a position map (real-valued positions per dimension pair),
* an angle schedule evaluated at the query position,
* a per-pair multiplicative decay,
* a post-sum scale.

A ``VariantSpec`` or a sequence of them (a stack) is passed to :func:`score`.
In a stack, position maps and angle schedules are applied in order, decays and
scales multiply, and the log-length scale is always applied last.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Union

import numpy as np

from . import scaling_laws
from .rope_core import (
    DimensionError,
    OrderingError,
    RopeConfig,
    RotaryAngles,
    ScoreBreakdown,
    angles_for,
    pair_terms,
)


class SpecificationError(ValueError):
    """A variant spec is missing a required parameter or has an invalid one."""


class Kind(str, enum.Enum):
    VANILLA = "vanilla"
    BASE_SCALED = "base-scaled"
    LINEAR_PI = "linear-pi"
    NTK_FIXED = "ntk-fixed"
    NTK_DYNAMIC = "ntk-dynamic"
    LOG_SCALED = "log-scaled"
    XPOS = "xpos"
    TRUNCATED = "truncated"
    POSITION_CLAMP = "position-clamp"


# parameters each kind consumes; anything else on the spec is ignored
_REQUIRED = {
    Kind.VANILLA: (),
    Kind.BASE_SCALED: ("base",),
    Kind.LINEAR_PI: ("lam",),
    Kind.NTK_FIXED: ("alpha",),
    Kind.NTK_DYNAMIC: (),
    Kind.LOG_SCALED: (),
    Kind.XPOS: (),
    Kind.TRUNCATED: ("keep_dims",),
    Kind.POSITION_CLAMP: ("clamp_index",),
}

_JSON_KEYS = {
    "kind": "kind",
    "base": "base",
    "lambda": "lam",
    "alpha": "alpha",
    "gamma": "gamma",
    "t_extra_ref": "t_extra_ref",
    "keep_dims": "keep_dims",
    "clamp_index": "clamp_index",
}


@dataclass(frozen=True)
class VariantSpec:
    """A named extrapolation strategy and its parameters.

    ``base`` of ``None`` means "use the config's base". ``t_extra_ref`` of
    ``None`` means "use the predicted extrapolation bound for the config"
    (which is the tuning length when the base has no finite bound).
    """

    kind: Kind = Kind.VANILLA
    base: Optional[float] = None
    lam: Optional[float] = None
    alpha: Optional[float] = None
    gamma: float = 0.4
    t_extra_ref: Optional[float] = None
    keep_dims: Optional[int] = None
    clamp_index: Optional[int] = None
    label: Optional[str] = None

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", Kind(self.kind))
        except ValueError:
            raise SpecificationError(f"unknown variant kind {self.kind!r}") from None
        for name in _REQUIRED[self.kind]:
            if getattr(self, name) is None:
                raise SpecificationError(f"{self.kind.value} requires parameter {name!r}")
        if self.base is not None and self.base <= 1:
            raise SpecificationError(f"base must be > 1, got {self.base}")
        if self.kind is Kind.LINEAR_PI and self.lam <= 0:
            raise SpecificationError(f"lambda must be positive, got {self.lam}")
        if self.kind is Kind.NTK_FIXED and self.alpha < 1:
            raise SpecificationError(f"alpha must be >= 1, got {self.alpha}")
        if self.t_extra_ref is not None and self.t_extra_ref <= 1:
            raise SpecificationError(f"t_extra_ref must be > 1, got {self.t_extra_ref}")
        if self.kind is Kind.TRUNCATED and (self.keep_dims < 2 or self.keep_dims % 2):
            raise SpecificationError(f"keep_dims must be even and >= 2, got {self.keep_dims}")
        if self.kind is Kind.POSITION_CLAMP and self.clamp_index < 1:
            raise SpecificationError(f"clamp_index must be positive, got {self.clamp_index}")

    @property
    def name(self) -> str:
        return self.label or to_shorthand(self)

    def to_dict(self) -> dict:
        out = {"kind": self.kind.value}
        for key, attr in _JSON_KEYS.items():
            if key == "kind":
                continue
            value = getattr(self, attr)
            if value is None or (attr == "gamma" and self.kind is not Kind.XPOS):
                continue
            out[key] = value
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "VariantSpec":
        unknown = sorted(set(data) - set(_JSON_KEYS))
        if unknown:
            raise SpecificationError(f"unknown variant field(s): {', '.join(unknown)}")
        if "kind" not in data:
            raise SpecificationError("variant object needs a 'kind'")
        return cls(**{_JSON_KEYS[k]: v for k, v in data.items()})

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "VariantSpec":
        return cls.from_dict(json.loads(text))


Variant = Union[VariantSpec, Sequence[VariantSpec]]


def _stack(variant: Variant) -> tuple[VariantSpec, ...]:
    if isinstance(variant, VariantSpec):
        return (variant,)
    stack = tuple(variant)
    if not stack:
        return (VariantSpec(),)
    return stack


# -- shorthand ---------------------------------------------------------------

_SHORTHAND_PARAM = {
    Kind.BASE_SCALED: ("base",),
    Kind.LINEAR_PI: ("lam",),
    Kind.NTK_FIXED: ("alpha", "base"),
    Kind.NTK_DYNAMIC: ("t_extra_ref", "base"),
    Kind.LOG_SCALED: ("t_extra_ref", "base"),
    Kind.XPOS: ("gamma", "t_extra_ref"),
    Kind.TRUNCATED: ("keep_dims",),
    Kind.POSITION_CLAMP: ("clamp_index",),
}
_ALIASES = {"base": Kind.BASE_SCALED, "ntk": Kind.NTK_FIXED, "dynamic-ntk": Kind.NTK_DYNAMIC,
            "log": Kind.LOG_SCALED, "clamp": Kind.POSITION_CLAMP, "pi": Kind.LINEAR_PI}
_INT_PARAMS = {"keep_dims", "clamp_index"}


def parse_variant(text: str) -> tuple[VariantSpec, ...]:
    """Parse ``kind[:param[,param]]``, with ``+`` joining stacked variants.

    Examples: ``vanilla``, ``base:500``, ``ntk-fixed:8``, ``linear-pi:4``,
    ``truncated:92``, ``position-clamp:4096``, ``xpos:0.4``,
    ``base:500+log-scaled``.
    """
    specs = []
    for part in text.split("+"):
        part = part.strip()
        name, _, params = part.partition(":")
        name = name.strip().lower().replace("_", "-")
        kind = _ALIASES.get(name)
        if kind is None:
            try:
                kind = Kind(name)
            except ValueError:
                raise SpecificationError(f"unknown variant kind {name!r} in {text!r}") from None
        values = [p.strip() for p in params.split(",")] if params else []
        slots = _SHORTHAND_PARAM.get(kind, ())
        if len(values) > len(slots):
            raise SpecificationError(f"too many parameters for {kind.value}: {part!r}")
        kwargs = {}
        for slot, raw in zip(slots, values):
            try:
                kwargs[slot] = int(raw) if slot in _INT_PARAMS else float(raw)
            except ValueError:
                raise SpecificationError(f"bad parameter {raw!r} in {part!r}") from None
        specs.append(VariantSpec(kind=kind, **kwargs))
    return tuple(specs)


def _fmt(x) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def to_shorthand(spec: VariantSpec) -> str:
    slots = _SHORTHAND_PARAM.get(spec.kind, ())
    values = [getattr(spec, s) for s in slots]
    while values and values[-1] is None:
        values.pop()
    if any(v is None for v in values):
        return spec.kind.value
    return spec.kind.value + (":" + ",".join(_fmt(v) for v in values) if values else "")


# -- schedule pieces ---------------------------------------------------------


def dynamic_ntk_alpha(t: float, t_extra_ref: float) -> float:
    """``max(1, 2 ** (ceil(log2(t / t_extra_ref)) + 1) - 1)``."""
    if t < 1 or t_extra_ref <= 0:
        raise SpecificationError(f"need t >= 1 and t_extra_ref > 0, got {t}, {t_extra_ref}")
    return float(max(1, 2 ** (math.ceil(math.log2(t / t_extra_ref)) + 1) - 1))


def log_scale_factor(t: float, t_extra_ref: float) -> float:
    if t < 1 or t_extra_ref <= 1:
        raise SpecificationError(f"need t >= 1 and t_extra_ref > 1, got {t}, {t_extra_ref}")
    return max(1.0, math.log(t) / math.log(t_extra_ref))


def xpos_zeta(n, d: int, gamma: float = 0.4):
    return (gamma + 2.0 * np.asarray(n, dtype=np.float64) / d) / (gamma + 1.0)


def xpos_decay(n, rel: float, config: RopeConfig, gamma: float, t_extra_ref: float):
    """Soft-window damping ``zeta_n ** (rel / t_extra_ref)`` for pair ``n``."""
    n_arr = np.asarray(n)
    if np.any(n_arr < 0) or np.any(n_arr >= config.pairs):
        raise IndexError(f"pair index {n} out of range [0, {config.pairs})")
    out = xpos_zeta(n_arr, config.head_dim, gamma) ** (rel / t_extra_ref)
    return float(out) if out.ndim == 0 else out


def reference_length(spec: VariantSpec, config: RopeConfig) -> float:
    """``t_extra_ref`` for ``spec``, defaulting to the predicted bound under its base."""
    if spec.t_extra_ref is not None:
        return float(spec.t_extra_ref)
    base = spec.base if spec.base is not None else config.base
    return scaling_laws.extended_law(replace(config, base=base)).extrapolation_bound


def tail_start(config: RopeConfig) -> int:
    """First pair index beyond the vanilla critical dimension at the training length."""
    return scaling_laws.critical_dimension(
        config.head_dim, scaling_laws.VANILLA_BASE, config.train_len
    ) // 2


def mapped_position(variant: Variant, t: float, config: Optional[RopeConfig] = None):
    """Position seen by the head pairs and by the tail pairs: ``(head, tail)``.

    Tail pairs are those at or beyond the critical dimension; only a position
    clamp treats them differently.
    """
    head = tail = float(t)
    for spec in _stack(variant):
        if spec.kind is Kind.LINEAR_PI:
            head, tail = head / spec.lam, tail / spec.lam
        elif spec.kind is Kind.POSITION_CLAMP:
            tail = min(tail, float(spec.clamp_index))
    return head, tail


def _positions_per_pair(variant: Variant, t: float, config: RopeConfig) -> np.ndarray:
    head, tail = mapped_position(variant, t, config)
    pos = np.full(config.pairs, head)
    if head != tail:
        pos[tail_start(config):] = tail
    return pos


def effective_base(variant: Variant, config: RopeConfig, t: float) -> float:
    base = config.base
    for spec in _stack(variant):
        if spec.base is not None:
            base = spec.base
        if spec.kind is Kind.NTK_FIXED:
            base = base * spec.alpha
        elif spec.kind is Kind.NTK_DYNAMIC:
            base = base * dynamic_ntk_alpha(max(t, 1), reference_length(spec, config))
    return base


def effective_angles(variant: Variant, config: RopeConfig, t: float) -> RotaryAngles:
    return angles_for(config.head_dim, effective_base(variant, config, t))


# -- scoring -----------------------------------------------------------------


@dataclass(frozen=True)
class ScoreRequest:
    q: np.ndarray
    k: np.ndarray
    t: float
    s: float
    config: RopeConfig
    variant: Variant = VariantSpec()

    def __post_init__(self):
        if self.s > self.t or self.s < 0:
            raise OrderingError(f"need 0 <= s <= t, got t={self.t}, s={self.s}")


class _Plan:
    """Position-independent parts of a variant resolved against a config."""

    def __init__(self, variant: Variant, config: RopeConfig):
        self.config = config
        self.stack = _stack(variant)
        pairs = config.pairs
        self.keep = np.ones(pairs, dtype=bool)
        self.scale = 1.0
        self.xpos = []  # (zeta, t_ref)
        self.log_refs = []
        self.dynamic = any(s.kind is Kind.NTK_DYNAMIC for s in self.stack)
        for spec in self.stack:
            if spec.kind is Kind.TRUNCATED:
                if spec.keep_dims > config.head_dim:
                    raise SpecificationError(
                        f"keep_dims {spec.keep_dims} exceeds head_dim {config.head_dim}"
                    )
                self.keep[spec.keep_dims // 2:] = False
                self.scale *= math.sqrt(config.head_dim / spec.keep_dims)
            elif spec.kind is Kind.XPOS:
                zeta = xpos_zeta(np.arange(pairs), config.head_dim, spec.gamma)
                self.xpos.append((zeta, reference_length(spec, config)))
            elif spec.kind is Kind.LOG_SCALED:
                self.log_refs.append(reference_length(spec, config))
        self.clamp_tail = tail_start(config)
        self.static_angles = None if self.dynamic else effective_angles(self.stack, config, 1)

    def angles(self, t: float) -> RotaryAngles:
        if self.static_angles is not None:
            return self.static_angles
        return effective_angles(self.stack, self.config, t)

    def per_dim(self, q: np.ndarray, k: np.ndarray, t: float, s: float) -> np.ndarray:
        theta = self.angles(t).theta
        rel = _positions_per_pair(self.stack, t, self.config) - _positions_per_pair(
            self.stack, s, self.config
        )
        terms = pair_terms(q, k, rel * theta)
        for zeta, t_ref in self.xpos:
            terms = terms * zeta ** ((t - s) / t_ref)
        terms = np.where(self.keep, terms, 0.0)
        post = self.scale
        for t_ref in self.log_refs:
            post *= log_scale_factor(max(t, 1), t_ref)
        return terms * post if post != 1.0 else terms


def _as_rows(v, config: RopeConfig) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim not in (1, 2) or arr.shape[-1] != config.head_dim:
        raise DimensionError(
            f"expected vectors of length {config.head_dim}, got shape {arr.shape}"
        )
    return arr


def score(request: ScoreRequest) -> ScoreBreakdown:
    """Logit under a variant, with per-pair terms already carrying every factor.

    Dropped (truncated) pairs contribute zero, so ``per_dim.sum() == total``.
    """
    plan = _Plan(request.variant, request.config)
    q = _as_rows(request.q, request.config)
    k = _as_rows(request.k, request.config)
    if q.ndim != 1 or k.ndim != 1:
        raise DimensionError("score takes single vectors; use score_many for batches")
    per_dim = plan.per_dim(q, k, request.t, request.s)
    return ScoreBreakdown(total=float(per_dim.sum()), per_dim=per_dim)


def score_many(q, k, t, s, config: RopeConfig, variant: Variant = VariantSpec()) -> np.ndarray:
    """Per-pair terms for rows of ``q`` and ``k`` at one ``(t, s)``; shape (N, d/2)."""
    if s > t or s < 0:
        raise OrderingError(f"need 0 <= s <= t, got t={t}, s={s}")
    plan = _Plan(variant, config)
    q = np.atleast_2d(_as_rows(q, config))
    k = np.atleast_2d(_as_rows(k, config))
    return plan.per_dim(q, k, t, s)


# -- catalog -----------------------------------------------------------------

CATALOG_BASES = (500, 652, 1304, 2608, 10000, 40000, 80000, 120000, 160000, 400000,
                 600000, 1000000)


def list_variants() -> list[VariantSpec]:
    """Preset specs with the parameters used in the reference experiments.

    Reference-length variants leave ``t_extra_ref`` unset so it resolves to the
    predicted bound for whatever config they are scored under; for bases with no
    finite bound that is the tuning length.
    """
    out = [VariantSpec(kind=Kind.VANILLA, label="vanilla")]
    out += [VariantSpec(kind=Kind.BASE_SCALED, base=float(b), label=f"base={b}")
            for b in CATALOG_BASES]
    out += [
        VariantSpec(kind=Kind.NTK_FIXED, alpha=8.0, label="ntk-fixed:8"),
        VariantSpec(kind=Kind.LINEAR_PI, lam=2.0, label="linear-pi:2"),
        VariantSpec(kind=Kind.LINEAR_PI, lam=4.0, label="linear-pi:4"),
        VariantSpec(kind=Kind.NTK_DYNAMIC, label="ntk-dynamic"),
        VariantSpec(kind=Kind.LOG_SCALED, label="log-scaled"),
        VariantSpec(kind=Kind.XPOS, gamma=0.4, label="xpos:0.4"),
        VariantSpec(kind=Kind.TRUNCATED, keep_dims=92, label="truncated:92"),
        VariantSpec(kind=Kind.POSITION_CLAMP, clamp_index=4096, label="position-clamp:4096"),
    ]
    return out


def catalog_entry(label: str) -> VariantSpec:
    for spec in list_variants():
        if spec.label == label:
            return spec
    raise KeyError(label)

