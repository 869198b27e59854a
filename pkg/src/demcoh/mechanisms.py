"""Reference data curators and learners, from maximally leaky (publish
everything in the clear) to strongly private (per-bit randomized
response), plus the report container they exchange.

Curators are order-invariant by construction: the harness shuffles the
input multiset before the wrapped mechanism sees it.  Learners receive
the report alone; their interface has no dataset parameter, so nothing
about the split can leak to them.  Instances are immutable; the audit
harness constructs a fresh one per trial anyway, so user-supplied
mechanism functions need no thread safety of their own.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field

import numpy as np

from .core import Dataset, FeatureValue, Lens, NULL, Predictor, Record, mask_record
from .errors import (
    ConfigError,
    EncodingError,
    HypothesisError,
    LearnerIncompatibilityError,
    SchemaError,
)

REPORT_KINDS = ("clear-records", "noisy-histogram", "rr-records", "subsample-records")

#: Per-bit budgets above this are treated as "release exactly": the flip
#: probability underflows to ~2e-22, unobservable at desk scale.
RR_EPSILON_CAP = 50.0


@dataclass(frozen=True)
class Report:
    """The curator's output: a tagged, JSON-serializable payload."""

    kind: str
    schema: tuple[str, ...]
    records: tuple[Record, ...] | None = None
    histogram_key: tuple[str, ...] | None = None
    histogram: dict[tuple[FeatureValue, ...], float] | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in REPORT_KINDS:
            raise ConfigError(f"unknown report kind {self.kind!r}")
        if (self.histogram is None) != (self.histogram_key is None):
            raise ConfigError("histogram and histogram_key must come together")

    def to_json_dict(self) -> dict:
        out: dict = {"kind": self.kind, "schema": list(self.schema), "meta": dict(self.meta)}
        if self.records is not None:
            out["records"] = [list(r.features) for r in self.records]
        if self.histogram is not None:
            out["histogram"] = {
                "key_features": list(self.histogram_key),
                "cells": [
                    [list(cell), count]
                    for cell, count in sorted(
                        self.histogram.items(),
                        key=lambda kv: tuple("" if v is None else v for v in kv[0]),
                    )
                ],
            }
        return out

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "Report":
        records = None
        if "records" in data:
            records = tuple(Record(tuple(row)) for row in data["records"])
        histogram = None
        histogram_key = None
        if "histogram" in data:
            histogram_key = tuple(data["histogram"]["key_features"])
            histogram = {
                tuple(cell): float(count)
                for cell, count in data["histogram"]["cells"]
            }
        return cls(
            kind=data["kind"],
            schema=tuple(data["schema"]),
            records=records,
            histogram_key=histogram_key,
            histogram=histogram,
            meta=dict(data.get("meta", {})),
        )


@dataclass(frozen=True)
class Curator:
    """A randomized map from an input half-dataset to a report."""

    name: str
    params: dict
    fn: Callable[[Dataset, np.random.Generator], Report]

    def run(self, dataset: Dataset, rng: np.random.Generator) -> Report:
        perm = rng.permutation(len(dataset))
        shuffled = Dataset(
            dataset.schema, tuple(dataset.records[int(i)] for i in perm)
        )
        return self.fn(shuffled, rng)


@dataclass(frozen=True)
class Learner:
    """Builds a confidence-rated predictor from a curator report alone."""

    name: str
    params: dict
    fn: Callable[[Report, np.random.Generator], Predictor]

    def run(self, report: Report, rng: np.random.Generator) -> Predictor:
        return self.fn(report, rng)


def clear_release() -> Curator:
    """Publishes the input record multiset as-is."""

    def fn(dataset: Dataset, rng: np.random.Generator) -> Report:
        return Report(kind="clear-records", schema=dataset.schema, records=dataset.records)

    return Curator("clear-release", {}, fn)


def randomized_response(epsilon: float, features: list[str] | None = None) -> Curator:
    """Per-record, per-binary-feature flip with probability 1/(e^eps + 1).

    ``epsilon`` is the per-bit budget; with k randomized bits the whole
    map is (k * epsilon)-DP per record, reported honestly as
    meta["effective_epsilon"].  Every randomized feature must carry "0" or
    "1".  When ``features`` is given, the remaining features are
    suppressed to null in the report rather than released in the clear.
    """
    if epsilon <= 0:
        raise HypothesisError(f"epsilon must be positive, got {epsilon}")
    flip_p = 1.0 / (math.exp(min(epsilon, RR_EPSILON_CAP)) + 1.0)

    def fn(dataset: Dataset, rng: np.random.Generator) -> Report:
        if features is None:
            keep = list(range(len(dataset.schema)))
        else:
            keep = [dataset.feature_index(name) for name in features]
        n, k = len(dataset), len(keep)
        flips = rng.random((n, k)) < flip_p if n and k else np.zeros((n, k), bool)
        out = []
        for row, record in enumerate(dataset.records):
            vals: list[FeatureValue] = [NULL] * len(dataset.schema)
            for col, i in enumerate(keep):
                v = record.features[i]
                if v not in ("0", "1"):
                    raise EncodingError(
                        f"feature {dataset.schema[i]!r} carries {v!r}; randomized "
                        "response needs binary '0'/'1' values"
                    )
                if flips[row, col]:
                    v = "1" if v == "0" else "0"
                vals[i] = v
            out.append(Record(tuple(vals)))
        return Report(
            kind="rr-records",
            schema=dataset.schema,
            records=tuple(out),
            meta={
                "epsilon_per_bit": epsilon,
                "effective_epsilon": epsilon * k,
                "flip_probability": flip_p,
            },
        )

    return Curator("randomized-response", {"epsilon": epsilon, "features": features}, fn)


def _laplace_noise(rng: np.random.Generator, scale: float) -> float:
    # Inverse CDF from one uniform draw; tail precision loss beyond the
    # ~1e-16 quantile is accepted.
    u = max(float(rng.random()), 2.0 ** -53)
    v = u - 0.5
    if v < 0:
        return scale * math.log1p(2.0 * v)
    return -scale * math.log1p(-2.0 * v)


def laplace_histogram(
    epsilon: float, lens: Lens, domains: Mapping[str, list[str]]
) -> Curator:
    """Releases the exact histogram of lens-restricted records plus
    independent Laplace(2/epsilon) noise per cell.

    Sensitivity is 2 under the substitute-one neighboring relation on
    fixed-size datasets.  Every cell of the declared domain product gets a
    noisy count; publishing only occupied cells would leak membership.
    """
    if epsilon <= 0:
        raise HypothesisError(f"epsilon must be positive, got {epsilon}")
    scale = 2.0 / epsilon

    def fn(dataset: Dataset, rng: np.random.Generator) -> Report:
        key_idx = sorted(lens.indices(dataset.schema))
        key_names = tuple(dataset.schema[i] for i in key_idx)
        for name in key_names:
            if name not in domains:
                raise SchemaError(
                    f"feature {name!r} has no declared finite domain"
                )
        exact = Counter(
            tuple(r.features[i] for i in key_idx) for r in dataset.records
        )
        cells = {}
        for combo in itertools.product(*(list(domains[n]) for n in key_names)):
            cells[tuple(combo)] = exact.get(tuple(combo), 0) + _laplace_noise(rng, scale)
        return Report(
            kind="noisy-histogram",
            schema=dataset.schema,
            histogram_key=key_names,
            histogram=cells,
            meta={"epsilon": epsilon, "noise_scale": scale},
        )

    return Curator(
        "laplace-histogram",
        {"epsilon": epsilon, "lens": sorted(lens.features), "domains": dict(domains)},
        fn,
    )


def subsample_release(k: int) -> Curator:
    """Publishes a uniformly chosen k-subset of the input in the clear."""
    if k < 1:
        raise ConfigError(f"subsample size must be >= 1, got {k}")

    def fn(dataset: Dataset, rng: np.random.Generator) -> Report:
        if k > len(dataset):
            raise ConfigError(
                f"subsample size {k} exceeds the curator input size {len(dataset)}"
            )
        idx = rng.permutation(len(dataset))[:k]
        return Report(
            kind="subsample-records",
            schema=dataset.schema,
            records=tuple(dataset.records[int(i)] for i in idx),
            meta={"k": k},
        )

    return Curator("subsample", {"k": k}, fn)


def memorizing_learner(lens: Lens | None = None) -> Learner:
    """Predicts +1 exactly on records whose lens view matches a released
    record's lens view, -1 otherwise.

    Byte-wise matching per feature, with null distinct from every string:
    exactly the semantics a re-identification guess needs.
    """

    def fn(report: Report, rng: np.random.Generator) -> Predictor:
        if report.records is None:
            raise LearnerIncompatibilityError(
                f"a {report.kind!r} report carries no records to memorize"
            )
        schema = report.schema
        keep = (lens if lens is not None else Lens.full(schema)).indices(schema)
        released = frozenset(mask_record(r, keep).features for r in report.records)

        def h(record: Record) -> float:
            return 1.0 if mask_record(record, keep).features in released else -1.0

        return Predictor("memorizing", h)

    return Learner(
        "memorizing",
        {"lens": sorted(lens.features) if lens is not None else None},
        fn,
    )


def histogram_threshold_learner(
    target: Callable[[Mapping[str, FeatureValue]], bool],
    lens: Lens | None = None,
) -> Learner:
    """Confidence from the report's smoothed conditional frequency of a
    target cell class, given the query's visible key features.

    h(x) = 2 p_hat - 1 with add-one smoothing over the binary target;
    noisy counts are floored at zero before aggregation.  A query whose
    key matches no report mass gets p_hat = 1/2, i.e. prediction 0
    (maximal uncertainty).

    Histogram reports are consumed directly; record-carrying reports are
    tabulated over ``lens`` (full lens when omitted) first.
    """

    def fn(report: Report, rng: np.random.Generator) -> Predictor:
        schema = report.schema
        if report.histogram is not None:
            key_names = report.histogram_key
            cells = {c: max(0.0, v) for c, v in report.histogram.items()}
        elif report.records is not None:
            keep = sorted(
                (lens if lens is not None else Lens.full(schema)).indices(schema)
            )
            key_names = tuple(schema[i] for i in keep)
            counted = Counter(
                tuple(r.features[i] for i in keep) for r in report.records
            )
            cells = {c: float(v) for c, v in counted.items()}
        else:  # pragma: no cover - report kinds always carry one payload
            raise LearnerIncompatibilityError(
                f"a {report.kind!r} report carries neither records nor a histogram"
            )
        key_pos = {name: i for i, name in enumerate(key_names)}
        entries = [
            (cell, count, bool(target(dict(zip(key_names, cell)))))
            for cell, count in cells.items()
        ]

        def h(record: Record) -> float:
            visible = [
                (key_pos[name], value)
                for name, value in zip(schema, record.features)
                if name in key_pos and value is not None
            ]
            total = 0.0
            hit = 0.0
            for cell, count, is_target in entries:
                if all(cell[i] == v for i, v in visible):
                    total += count
                    if is_target:
                        hit += count
            p_hat = (hit + 1.0) / (total + 2.0)
            v = 2.0 * p_hat - 1.0
            return min(1.0, max(-1.0, v))

        return Predictor("histogram-threshold", h)

    return Learner(
        "histogram-threshold",
        {"lens": sorted(lens.features) if lens is not None else None},
        fn,
    )


def constant_learner(c: float) -> Learner:
    """Ignores the report and predicts c everywhere: the degenerate but
    perfectly coherent baseline."""
    if not -1.0 <= c <= 1.0:
        raise ConfigError(f"constant prediction must lie in [-1, 1], got {c}")

    def fn(report: Report, rng: np.random.Generator) -> Predictor:
        return Predictor("constant", lambda record: c)

    return Learner("constant", {"value": c}, fn)
