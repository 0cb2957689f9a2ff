"""Phase coverage and reliable/OOD decomposition of attention logits.

Synthetic probes stand in for model activations. Seed 0 is reserved for the
all-ones probe, whose per-pair term at distance ``rel`` is ``2*cos(rel*theta_n)``.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import scaling_laws
from .rope_core import RopeConfig, attention_score_real, rotary_angles
from .variants import Variant, VariantSpec, score_many

TRACE_COLUMNS = ("rel", "reliable_mean", "ood_mean", "total_mean")
COVERAGE_COLUMNS = ("pair", "theta", "period", "class", "unseen")
ALL_ONES_SEED = 0


class PhaseClass(str, enum.Enum):
    FULL_PERIOD = "FullPeriod"
    REACHED_PI = "ReachedPi"
    REACHED_HALF_PI = "ReachedHalfPi"
    PARTIAL = "Partial"


@dataclass(frozen=True)
class CoverageReport:
    context_len: int
    theta: np.ndarray
    period: np.ndarray
    per_dim_class: tuple[PhaseClass, ...]

    @property
    def covered_count(self) -> int:
        return 2 * sum(c is PhaseClass.FULL_PERIOD for c in self.per_dim_class)

    @property
    def first_uncovered_pair(self) -> Optional[int]:
        for n, c in enumerate(self.per_dim_class):
            if c is not PhaseClass.FULL_PERIOD:
                return n
        return None

    def rows(self) -> list[dict]:
        return [
            {
                "pair": n,
                "theta": float(self.theta[n]),
                "period": float(self.period[n]),
                "class": c.value,
                "unseen": c is not PhaseClass.FULL_PERIOD,
            }
            for n, c in enumerate(self.per_dim_class)
        ]

    def to_dict(self) -> dict:
        return {
            "context_len": self.context_len,
            "covered_count": self.covered_count,
            "first_uncovered_pair": self.first_uncovered_pair,
            "pairs": self.rows(),
        }


@dataclass(frozen=True)
class AttentionTrace:
    rel_distances: np.ndarray
    reliable_mean: np.ndarray
    ood_mean: np.ndarray
    total_mean: np.ndarray
    d_split: int
    # signed maxima over the samples at each distance
    reliable_max: np.ndarray
    ood_max: np.ndarray

    def rows(self) -> list[dict]:
        return [
            {
                "rel": int(r),
                "reliable_mean": float(a),
                "ood_mean": float(b),
                "total_mean": float(c),
            }
            for r, a, b, c in zip(
                self.rel_distances, self.reliable_mean, self.ood_mean, self.total_mean
            )
        ]

    def to_dict(self) -> dict:
        return {
            "d_split": self.d_split,
            "rows": self.rows(),
            "reliable_max": [float(x) for x in self.reliable_max],
            "ood_max": [float(x) for x in self.ood_max],
        }


def phase_coverage(config: RopeConfig, context_len: int) -> CoverageReport:
    if context_len < 1:
        raise ValueError(f"context_len must be >= 1, got {context_len}")
    angles = rotary_angles(config)
    max_phase = context_len * angles.theta
    classes = []
    for phase in max_phase:
        if phase >= 2 * math.pi:
            classes.append(PhaseClass.FULL_PERIOD)
        elif phase >= math.pi:
            classes.append(PhaseClass.REACHED_PI)
        elif phase >= math.pi / 2:
            classes.append(PhaseClass.REACHED_HALF_PI)
        else:
            classes.append(PhaseClass.PARTIAL)
    return CoverageReport(
        context_len=context_len,
        theta=angles.theta,
        period=angles.period,
        per_dim_class=tuple(classes),
    )


def ood_split(q, k, t, s, config: RopeConfig, d_split: int) -> tuple[float, float]:
    """Split the vanilla logit into the first ``d_split`` dimensions and the rest."""
    if d_split < 0 or d_split > config.head_dim or d_split % 2:
        raise ValueError(f"d_split must be even and in [0, {config.head_dim}], got {d_split}")
    per_dim = attention_score_real(q, k, t, s, rotary_angles(config)).per_dim
    cut = d_split // 2
    return float(per_dim[:cut].sum()), float(per_dim[cut:].sum())


def unseen_phase_flags(config: RopeConfig, rel: int) -> np.ndarray:
    """Pairs whose phase at distance ``rel`` never occurred during training.

    A pair whose full period fits in the training length has seen every phase.
    Otherwise the trained arc is ``[0, train_len * theta_n]``.
    """
    if rel < 1:
        raise ValueError(f"rel must be >= 1, got {rel}")
    angles = rotary_angles(config)
    arc_end = config.train_len * angles.theta
    phase = np.mod(rel * angles.theta, 2 * math.pi)
    return (angles.period > config.train_len) & (phase > arc_end)


def probe_vectors(seed: int, sample_count: int, d: int, rel: int) -> tuple[np.ndarray, np.ndarray]:
    """Query/key rows for one distance; independent of evaluation order."""
    if seed == ALL_ONES_SEED:
        ones = np.ones((sample_count, d))
        return ones, ones
    rng = np.random.default_rng([seed, rel])
    q = rng.uniform(-1.0, 1.0, size=(sample_count, d))
    k = rng.uniform(-1.0, 1.0, size=(sample_count, d))
    return q, k


def score_trace(
    config: RopeConfig,
    variant: Variant = VariantSpec(),
    max_len: int = 32768,
    stride: int = 256,
    sample_count: int = 16,
    seed: int = 42,
    threads: int = 1,
) -> AttentionTrace:
    """Mean logits at ``rel = stride, 2*stride, ... <= max_len`` split at the critical dimension.

    Each distance is scored with the query at position ``rel`` and the key at 0.
    """
    if stride < 1 or sample_count < 1:
        raise ValueError("stride and sample_count must be >= 1")
    d_split = scaling_laws.critical_dimension(
        config.head_dim, scaling_laws.VANILLA_BASE, config.train_len
    )
    cut = d_split // 2
    rels = np.arange(stride, max_len + 1, stride, dtype=np.int64)

    def one(rel):
        q, k = probe_vectors(seed, sample_count, config.head_dim, int(rel))
        terms = score_many(q, k, int(rel), 0, config, variant)
        reliable = terms[:, :cut].sum(axis=1)
        ood = terms[:, cut:].sum(axis=1)
        total = terms.sum(axis=1)
        return reliable.mean(), ood.mean(), total.mean(), reliable.max(), ood.max()

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, rels))
    else:
        results = [one(r) for r in rels]
    cols = np.array(results, dtype=np.float64).reshape(len(rels), 5).T
    return AttentionTrace(
        rel_distances=rels,
        reliable_mean=cols[0],
        ood_mean=cols[1],
        total_mean=cols[2],
        d_split=d_split,
        reliable_max=cols[3],
        ood_max=cols[4],
    )


# -- serialization -----------------------------------------------------------


def _cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def rows_to_csv(rows: list[dict], columns) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row[c]) for c in columns])
    return buf.getvalue()


def trace_to_csv(trace: AttentionTrace) -> str:
    return rows_to_csv(trace.rows(), TRACE_COLUMNS)


def coverage_to_csv(report: CoverageReport) -> str:
    return rows_to_csv(report.rows(), COVERAGE_COLUMNS)


def trace_from_csv(text: str) -> list[dict]:
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != TRACE_COLUMNS:
        raise ValueError(f"unexpected trace columns {reader.fieldnames}")
    return [
        {"rel": int(r["rel"]), **{c: float(r[c]) for c in TRACE_COLUMNS[1:]}} for r in reader
    ]


def coverage_from_csv(text: str) -> list[dict]:
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != COVERAGE_COLUMNS:
        raise ValueError(f"unexpected coverage columns {reader.fieldnames}")
    return [
        {
            "pair": int(r["pair"]),
            "theta": float(r["theta"]),
            "period": float(r["period"]),
            "class": PhaseClass(r["class"]).value,
            "unseen": r["unseen"] == "true",
        }
        for r in reader
    ]


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"
