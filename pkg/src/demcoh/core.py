"""Datasets, lenses, subpopulations, random half-splits, and empirical
prediction distributions.

A record is an ordered tuple of feature values where any feature may be
the distinguished null symbol (``None`` here), which is distinguishable
from every string including the empty string.  Datasets keep multiset
semantics: duplicate rows are distinct sample points.

All container types are immutable after construction and safe to share
across threads; the split sampler takes an explicit generator so
concurrent callers never contend on shared randomness.
"""

from __future__ import annotations

from collections.abc import Callable, Iterable, Iterator, Sequence
from dataclasses import dataclass

import numpy as np

from .errors import EmptySupportError, OddDatasetError, SchemaError

#: The distinguished null feature value.
NULL = None

FeatureValue = str | None

#: Slack beyond which an out-of-range prediction is an error, not round-off.
PREDICTION_ROUND_OFF = 1e-9


@dataclass(frozen=True)
class Record:
    """One row: an ordered tuple of feature values, ``None`` meaning null."""

    features: tuple[FeatureValue, ...]

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        for v in self.features:
            if v is not None and not isinstance(v, str):
                raise SchemaError(
                    f"feature values must be str or None, got {type(v).__name__}"
                )


@dataclass(frozen=True)
class Dataset:
    """An ordered multiset of records sharing one schema."""

    schema: tuple[str, ...]
    records: tuple[Record, ...]

    def __post_init__(self):
        object.__setattr__(self, "schema", tuple(self.schema))
        object.__setattr__(self, "records", tuple(self.records))
        if len(set(self.schema)) != len(self.schema):
            raise SchemaError("duplicate feature names in schema")
        arity = len(self.schema)
        for r in self.records:
            if len(r.features) != arity:
                raise SchemaError(
                    f"record arity {len(r.features)} does not match schema arity {arity}"
                )

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[Record]:
        return iter(self.records)

    def feature_index(self, name: str) -> int:
        try:
            return self.schema.index(name)
        except ValueError:
            raise SchemaError(f"unknown feature {name!r}") from None

    @classmethod
    def from_rows(cls, schema: Sequence[str], rows: Iterable[Sequence[FeatureValue]]) -> "Dataset":
        return cls(tuple(schema), tuple(Record(tuple(row)) for row in rows))


@dataclass(frozen=True)
class Lens:
    """The set of feature names a predictor is allowed to see.

    Both the full lens and the empty lens are legal.
    """

    features: frozenset[str]

    def __post_init__(self):
        object.__setattr__(self, "features", frozenset(self.features))

    @classmethod
    def full(cls, schema: Sequence[str]) -> "Lens":
        return cls(frozenset(schema))

    @classmethod
    def empty(cls) -> "Lens":
        return cls(frozenset())

    def indices(self, schema: Sequence[str]) -> frozenset[int]:
        """Indices of the lens features within ``schema``."""
        missing = self.features - set(schema)
        if missing:
            raise SchemaError(f"lens references unknown features: {sorted(missing)}")
        return frozenset(i for i, name in enumerate(schema) if name in self.features)


@dataclass(frozen=True)
class Subpopulation:
    """A named, deterministic membership test over records."""

    name: str
    predicate: Callable[[Record], bool]


@dataclass(frozen=True)
class Collection:
    """A finite ordered list of subpopulations with unique names."""

    subpopulations: tuple[Subpopulation, ...]

    def __post_init__(self):
        object.__setattr__(self, "subpopulations", tuple(self.subpopulations))
        if len(self.subpopulations) < 1:
            raise SchemaError("a collection needs at least one subpopulation")
        names = [s.name for s in self.subpopulations]
        if len(set(names)) != len(names):
            raise SchemaError("subpopulation names must be unique within a collection")

    def __len__(self) -> int:
        return len(self.subpopulations)

    def __iter__(self) -> Iterator[Subpopulation]:
        return iter(self.subpopulations)


@dataclass(frozen=True)
class Split:
    """A partition of a dataset into two equal halves by record index."""

    dataset: Dataset
    index_set_a: frozenset[int]

    def __post_init__(self):
        object.__setattr__(self, "index_set_a", frozenset(self.index_set_a))
        n = len(self.dataset)
        if n < 2 or n % 2:
            raise OddDatasetError(f"cannot half-split a dataset of size {n}")
        if len(self.index_set_a) != n // 2:
            raise SchemaError(
                f"index set has {len(self.index_set_a)} entries, expected {n // 2}"
            )
        if any(i < 0 or i >= n for i in self.index_set_a):
            raise SchemaError("split index out of range")

    @property
    def side_a(self) -> Dataset:
        recs = self.dataset.records
        return Dataset(self.dataset.schema, tuple(recs[i] for i in range(len(recs)) if i in self.index_set_a))

    @property
    def side_b(self) -> Dataset:
        recs = self.dataset.records
        return Dataset(self.dataset.schema, tuple(recs[i] for i in range(len(recs)) if i not in self.index_set_a))


@dataclass(frozen=True)
class Predictor:
    """A deterministic confidence-rated map from records to [-1, 1].

    Outputs that drift past the boundary by at most numeric round-off are
    clamped; larger excursions raise.
    """

    name: str
    fn: Callable[[Record], float]

    def evaluate(self, record: Record) -> float:
        v = float(self.fn(record))
        if v < -1.0 or v > 1.0:
            if v < -1.0 - PREDICTION_ROUND_OFF or v > 1.0 + PREDICTION_ROUND_OFF:
                raise ValueError(
                    f"predictor {self.name!r} returned {v}, outside [-1, 1]"
                )
            v = -1.0 if v < -1.0 else 1.0
        return v


@dataclass(frozen=True, eq=False)
class EmpiricalDistribution:
    """The uniform distribution over a sorted multiset of predictions."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.sort(np.asarray(self.values, dtype=np.float64))
        if vals.size < 1:
            raise EmptySupportError("an empirical distribution needs at least one value")
        if vals[0] < -1.0 or vals[-1] > 1.0:
            raise ValueError("prediction values must lie in [-1, 1]")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def count(self) -> int:
        return int(self.values.size)

    def cdf(self, p: float) -> float:
        """Fraction of values <= p; right-continuous and nondecreasing."""
        return float(np.searchsorted(self.values, p, side="right")) / self.values.size

    def mean(self) -> float:
        return float(self.values.mean())


def mask_record(record: Record, keep: frozenset[int]) -> Record:
    """Null out every feature whose index is not in ``keep``."""
    return Record(tuple(v if i in keep else NULL for i, v in enumerate(record.features)))


def restrict_lens(dataset: Dataset, lens: Lens) -> Dataset:
    """Replace features outside the lens with the null symbol.

    Same arity and record order; idempotent.
    """
    keep = lens.indices(dataset.schema)
    if len(keep) == len(dataset.schema):
        return dataset
    return Dataset(dataset.schema, tuple(mask_record(r, keep) for r in dataset.records))


def restrict_subpop(dataset: Dataset, subpop: Subpopulation) -> Dataset:
    """Keep the subsequence of records the membership test accepts.

    Predicates see the raw, unrestricted record: the audit intersects with
    the subpopulation before applying any lens.
    """
    return Dataset(
        dataset.schema,
        tuple(r for r in dataset.records if subpop.predicate(r)),
    )


def random_split(dataset: Dataset, rng: np.random.Generator) -> Split:
    """Uniformly random half-split; deterministic given the generator state.

    Odd sizes are a hard error: silently flooring would change the split
    law the audit's guarantees are stated for.
    """
    n = len(dataset)
    if n < 2 or n % 2:
        raise OddDatasetError(f"cannot half-split a dataset of size {n}")
    perm = rng.permutation(n)
    return Split(dataset, frozenset(int(i) for i in perm[: n // 2]))


def empirical_distribution(predictor: Predictor, dataset: Dataset) -> EmpiricalDistribution:
    """The multiset of predictions on a dataset, with multiplicity."""
    if len(dataset) == 0:
        raise EmptySupportError(
            "cannot form a prediction distribution over an empty dataset"
        )
    vals = np.fromiter(
        (predictor.evaluate(r) for r in dataset.records),
        dtype=np.float64,
        count=len(dataset),
    )
    return EmpiricalDistribution(vals)
