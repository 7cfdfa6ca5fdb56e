"""Domain types, validation, fold assignment, and tabular ingestion.

The observational unit is ``(W, A, Y)``: a covariate row, a discrete treatment
arm, and a bounded real outcome. Every estimator in this package consumes a
validated :class:`Dataset` together with a :class:`NuisanceMatrix` of
out-of-fold nuisance predictions.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import pandas as pd

from .errors import FoldError, SchemaError

# Propensities are floored/capped at storage so that no downstream division
# can hit an exact zero; statistically meaningful clipping happens later.
PI_FLOOR = 1e-12
ROW_SUM_TOL = 1e-6


@dataclass(frozen=True)
class Schema:
    """Column-role map used to turn a table of columns into a Dataset.

    ``arms`` optionally declares the full treatment arm set (defaults to the
    arms observed in the data); ``n_folds`` declares the expected number of
    folds when a fold column is supplied.
    """

    outcome: str
    treatment: str
    covariates: Sequence[str]
    fold: str | None = None
    arms: Sequence[int] | None = None
    outcome_bound: float | None = None
    n_folds: int | None = None


@dataclass(frozen=True)
class Dataset:
    """Validated observations plus a fold assignment.

    ``treatment`` holds canonical arm codes ``0..n_arms-1``; ``arms`` maps a
    code back to the originally supplied arm label. ``fold_id`` takes values
    in ``1..n_folds``. All arrays are read-only after construction.
    """

    covariates: np.ndarray
    treatment: np.ndarray
    outcome: np.ndarray
    fold_id: np.ndarray
    arms: tuple
    outcome_bound: float

    def __post_init__(self):
        for arr in (self.covariates, self.treatment, self.outcome, self.fold_id):
            arr.setflags(write=False)

    @property
    def n(self) -> int:
        return self.outcome.shape[0]

    @property
    def n_covariates(self) -> int:
        return self.covariates.shape[1]

    @property
    def n_arms(self) -> int:
        return len(self.arms)

    @property
    def n_folds(self) -> int:
        return int(self.fold_id.max())

    def arm_indicator(self, arm: int) -> np.ndarray:
        """Boolean mask of rows assigned to the given arm code."""
        return self.treatment == arm

    def fold_indices(self) -> list[np.ndarray]:
        """Row indices per fold, ordered by fold label 1..J."""
        return [np.flatnonzero(self.fold_id == j) for j in range(1, self.n_folds + 1)]

    def to_columns(self) -> dict[str, np.ndarray]:
        """Columns (with original arm labels) that re-validate to this Dataset."""
        arms = np.asarray(self.arms)
        cols = {f"w_{k}": self.covariates[:, k] for k in range(self.n_covariates)}
        cols["treatment"] = arms[self.treatment]
        cols["outcome"] = self.outcome
        cols["fold"] = self.fold_id
        return cols

    def default_schema(self) -> Schema:
        return Schema(
            outcome="outcome",
            treatment="treatment",
            covariates=[f"w_{k}" for k in range(self.n_covariates)],
            fold="fold",
            arms=self.arms,
            outcome_bound=self.outcome_bound,
            n_folds=self.n_folds,
        )


def _get_column(raw, name: str) -> np.ndarray:
    if isinstance(raw, pd.DataFrame):
        if name not in raw.columns:
            raise SchemaError(f"missing column {name!r}")
        return raw[name].to_numpy()
    try:
        return np.asarray(raw[name])
    except KeyError as exc:
        raise SchemaError(f"missing column {name!r}") from exc


def validate_dataset(raw, schema: Schema) -> Dataset:
    """Validate a table of columns against a schema and build a Dataset.

    Rejects non-finite outcomes or covariates, treatment values outside the
    declared arm set, outcomes exceeding the declared bound, and fold
    structures with empty folds. Re-validating ``Dataset.to_columns()`` with
    ``Dataset.default_schema()`` reproduces the dataset.
    """
    outcome = _get_column(raw, schema.outcome).astype(float)
    if outcome.ndim != 1 or outcome.size == 0:
        raise SchemaError("outcome column must be a nonempty 1-d column")
    n = outcome.shape[0]
    if not np.all(np.isfinite(outcome)):
        raise ValueError("outcome contains non-finite values")

    if schema.outcome_bound is not None:
        bound = float(schema.outcome_bound)
        if bound <= 0 or not np.isfinite(bound):
            raise ValueError("outcome bound must be a positive finite number")
        if np.abs(outcome).max() > bound:
            raise ValueError(f"outcome exceeds declared bound {bound}")
    else:
        bound = float(max(np.abs(outcome).max(), 1e-12))

    cov_cols = []
    for name in schema.covariates:
        col = _get_column(raw, name).astype(float)
        if col.shape != (n,):
            raise SchemaError(f"covariate column {name!r} has wrong length")
        if not np.all(np.isfinite(col)):
            raise ValueError(f"covariate column {name!r} contains non-finite values")
        cov_cols.append(col)
    covariates = np.column_stack(cov_cols) if cov_cols else np.empty((n, 0))

    treat_raw = _get_column(raw, schema.treatment)
    treat_float = np.asarray(treat_raw, dtype=float)
    if not np.all(np.isfinite(treat_float)):
        raise ValueError("treatment contains non-finite values")
    if np.any(treat_float != np.round(treat_float)):
        raise ValueError("treatment values must be integers")
    treat_int = treat_float.astype(int)
    if schema.arms is not None:
        arms = tuple(sorted(int(a) for a in schema.arms))
        if len(set(arms)) != len(arms):
            raise ValueError("declared arm set contains duplicates")
    else:
        arms = tuple(int(a) for a in np.unique(treat_int))
    arm_to_code = {a: k for k, a in enumerate(arms)}
    unknown = set(np.unique(treat_int)) - set(arms)
    if unknown:
        raise ValueError(f"treatment values outside declared arm set: {sorted(unknown)}")
    treatment = np.array([arm_to_code[a] for a in treat_int], dtype=np.int64)

    if schema.fold is not None:
        fold_float = np.asarray(_get_column(raw, schema.fold), dtype=float)
        if fold_float.shape != (n,):
            raise SchemaError(f"fold column {schema.fold!r} has wrong length")
        if np.any(~np.isfinite(fold_float)) or np.any(fold_float != np.round(fold_float)):
            raise FoldError("fold labels must be integers")
        fold_id = fold_float.astype(np.int64)
        n_folds = schema.n_folds if schema.n_folds is not None else int(fold_id.max())
    else:
        fold_id = np.ones(n, dtype=np.int64)
        n_folds = schema.n_folds if schema.n_folds is not None else 1
        if n_folds != 1:
            raise FoldError("n_folds > 1 requires a fold column (or use assign_folds)")
    if n_folds < 1:
        raise FoldError("fold count must be at least 1")
    if fold_id.min() < 1 or fold_id.max() > n_folds:
        raise FoldError(f"fold labels must lie in 1..{n_folds}")
    counts = np.bincount(fold_id, minlength=n_folds + 1)[1:]
    if np.any(counts == 0):
        empty = [j + 1 for j in range(n_folds) if counts[j] == 0]
        raise FoldError(f"empty folds: {empty}")
    if n < 2 * n_folds:
        raise FoldError(f"need n >= 2*J, got n={n}, J={n_folds}")

    return Dataset(
        covariates=covariates,
        treatment=treatment,
        outcome=outcome,
        fold_id=fold_id,
        arms=arms,
        outcome_bound=bound,
    )


def assign_folds(n: int, n_folds: int, rng: np.random.Generator) -> np.ndarray:
    """Random exhaustive partition of ``0..n-1`` into folds labelled 1..J.

    A seeded shuffle of the indices followed by round-robin slicing; fold
    sizes differ by at most one and the result is deterministic given the
    generator state.
    """
    if not 1 <= n_folds <= n:
        raise FoldError(f"need 1 <= J <= n, got J={n_folds}, n={n}")
    perm = rng.permutation(n)
    fold_id = np.empty(n, dtype=np.int64)
    fold_id[perm] = np.arange(n) % n_folds + 1
    return fold_id


def with_folds(data: Dataset, fold_id: np.ndarray) -> Dataset:
    """Copy of the dataset with a replacement fold assignment."""
    fold_id = np.asarray(fold_id, dtype=np.int64).copy()
    if fold_id.shape != (data.n,):
        raise FoldError("fold assignment has wrong length")
    counts = np.bincount(fold_id)
    if fold_id.min() < 1 or np.any(counts[1:] == 0):
        raise FoldError("fold labels must be 1..J with every fold nonempty")
    if data.n < 2 * fold_id.max():
        raise FoldError("need n >= 2*J")
    return Dataset(
        covariates=data.covariates.copy(),
        treatment=data.treatment.copy(),
        outcome=data.outcome.copy(),
        fold_id=fold_id,
        arms=data.arms,
        outcome_bound=data.outcome_bound,
    )


@dataclass(frozen=True)
class NuisanceMatrix:
    """Out-of-fold nuisance predictions, one column per arm.

    ``mu[i, a]`` is the outcome-regression prediction for arm ``a`` at row
    ``i`` produced by the learner that never saw row ``i``'s fold; ``pi[i, a]``
    is the analogous propensity prediction. ``source`` records whether the
    entries came from the built-in learners or from external columns.
    """

    mu: np.ndarray
    pi: np.ndarray
    source: str

    def __post_init__(self):
        self.mu.setflags(write=False)
        self.pi.setflags(write=False)

    @property
    def n(self) -> int:
        return self.mu.shape[0]

    @property
    def n_arms(self) -> int:
        return self.mu.shape[1]

    def fingerprint(self) -> str:
        """SHA-256 digest of the stored predictions (bitwise identity check)."""
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.mu).tobytes())
        h.update(np.ascontiguousarray(self.pi).tobytes())
        h.update(self.source.encode())
        return h.hexdigest()


def validate_nuisances(
    data: Dataset, mu: np.ndarray, pi: np.ndarray, source: str
) -> NuisanceMatrix:
    """Range- and shape-check nuisance predictions and freeze them."""
    mu = np.asarray(mu, dtype=float).copy()
    pi = np.asarray(pi, dtype=float).copy()
    shape = (data.n, data.n_arms)
    if mu.shape != shape or pi.shape != shape:
        raise ValueError(f"nuisance matrices must have shape {shape}")
    if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(pi))):
        raise ValueError("nuisance predictions contain non-finite values")
    if np.abs(mu).max() > data.outcome_bound * (1 + 1e-9):
        raise ValueError("outcome-regression predictions exceed the outcome bound")
    if pi.min() <= 0.0 or pi.max() >= 1.0:
        raise ValueError("propensity predictions must lie strictly inside (0, 1)")
    row_sums = pi.sum(axis=1)
    if data.n_arms > 1 and np.any(np.abs(row_sums - 1.0) > ROW_SUM_TOL):
        raise ValueError("propensity rows must sum to 1 when all arms are supplied")
    return NuisanceMatrix(mu=mu, pi=pi, source=source)


def external_nuisance_matrix(
    data: Dataset,
    raw,
    mu_cols: Sequence[str] | None = None,
    pi_cols: Sequence[str] | None = None,
) -> NuisanceMatrix:
    """Build a NuisanceMatrix from external table columns.

    Column ``mu_k`` / ``pi_k`` corresponds to the k-th arm in the canonical
    (sorted) arm order. Defaults to names ``mu_0, mu_1, ...`` and
    ``pi_0, pi_1, ...``.
    """
    if mu_cols is None:
        mu_cols = [f"mu_{k}" for k in range(data.n_arms)]
    if pi_cols is None:
        pi_cols = [f"pi_{k}" for k in range(data.n_arms)]
    if len(mu_cols) != data.n_arms or len(pi_cols) != data.n_arms:
        raise SchemaError(
            f"expected {data.n_arms} mu and pi columns, got {len(mu_cols)} and {len(pi_cols)}"
        )
    mu = np.column_stack([_get_column(raw, c).astype(float) for c in mu_cols])
    pi = np.column_stack([_get_column(raw, c).astype(float) for c in pi_cols])
    return validate_nuisances(data, mu, pi, source="external")


def load_csv(path) -> pd.DataFrame:
    """Read a CSV file with a header row of column names."""
    frame = pd.read_csv(path)
    if frame.shape[1] == 0:
        raise SchemaError(f"{path}: no columns found")
    return frame
