import csv

import numpy as np
import pytest

from demcoh.core import (
    Collection,
    Dataset,
    EmpiricalDistribution,
    Lens,
    Predictor,
    Subpopulation,
)
from demcoh.mechanisms import Learner


def make_distinct_dataset(n: int) -> Dataset:
    """n pairwise-distinct single-feature records '0', '1', ..."""
    return Dataset.from_rows(("id",), [(str(i),) for i in range(n)])


def make_binary_dataset(n: int) -> Dataset:
    """Balanced single-bit dataset: n/2 zeros then n/2 ones."""
    assert n % 2 == 0
    return Dataset.from_rows(
        ("bit",), [("0",) for _ in range(n // 2)] + [("1",) for _ in range(n // 2)]
    )


def everyone() -> Subpopulation:
    return Subpopulation("everyone", lambda record: True)


def everyone_collection() -> Collection:
    return Collection((everyone(),))


def fixed_learner(predictor: Predictor) -> Learner:
    """A learner that ignores the report and returns a premade predictor."""
    return Learner("fixed", {}, lambda report, rng: predictor)


def ed(values) -> EmpiricalDistribution:
    return EmpiricalDistribution(np.asarray(values, dtype=float))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def distinct200_csv(tmp_path_factory):
    """CSV fixture of 200 pairwise-distinct records."""
    path = tmp_path_factory.mktemp("data") / "distinct200.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id"])
        for i in range(200):
            writer.writerow([str(i)])
    return str(path)
