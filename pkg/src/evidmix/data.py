"""Dataset loading, synthetic generators, splitting and standardization.

A :class:`RegressionDataset` is an immutable bundle of a feature matrix,
a target vector, an optional train/val/test assignment and optional
standardization statistics.  Statistics are always computed on the train
split only; targets are standardized alongside features so losses are
scale-free, and metrics convert back to original units.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .exceptions import DataError, DimensionError, DomainError, SchemaError

TRAIN, VAL, TEST = 0, 1, 2
_SPLIT_NAMES = {TRAIN: "train", VAL: "val", TEST: "test"}

SYNTHETIC_KINDS = ("cubic", "heteroscedastic_bimodal", "linear")


@dataclass(frozen=True, eq=False)
class RegressionDataset:
    """Features, targets, split assignment and standardization metadata."""

    features: np.ndarray
    targets: np.ndarray
    split: np.ndarray | None = None
    feature_means: np.ndarray | None = None
    feature_stds: np.ndarray | None = None
    target_mean: float | None = None
    target_std: float | None = None
    metadata: dict | None = None

    def __post_init__(self):
        f = np.asarray(self.features, dtype=float)
        t = np.asarray(self.targets, dtype=float)
        if f.ndim != 2:
            raise DimensionError(f"features must be 2-D, got shape {f.shape}")
        if t.shape != (f.shape[0],):
            raise DimensionError(
                f"targets shape {t.shape} does not match {f.shape[0]} rows")
        if f.shape[0] == 0:
            raise DataError("dataset is empty")
        object.__setattr__(self, "features", f)
        object.__setattr__(self, "targets", t)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def standardized(self) -> bool:
        return self.target_std is not None

    def rows(self, which: int) -> np.ndarray:
        if self.split is None:
            raise DataError("dataset has no split assignment")
        return np.flatnonzero(self.split == which)

    def subset(self, which: int) -> tuple[np.ndarray, np.ndarray]:
        idx = self.rows(which)
        return self.features[idx], self.targets[idx]

    def destandardize_targets(self, z) -> np.ndarray:
        if not self.standardized:
            raise DataError("dataset is not standardized")
        return np.asarray(z, dtype=float) * self.target_std + self.target_mean

    def manifest(self) -> dict:
        """Provenance record: enough to audit how the data was prepared."""
        out = {
            "n_samples": int(self.n_samples),
            "n_features": int(self.n_features),
            "metadata": dict(self.metadata or {}),
        }
        if self.split is not None:
            out["split_counts"] = {
                name: int(np.sum(self.split == code))
                for code, name in _SPLIT_NAMES.items()
            }
        if self.standardized:
            out["standardization"] = {
                "feature_means": self.feature_means.tolist(),
                "feature_stds": self.feature_stds.tolist(),
                "target_mean": self.target_mean,
                "target_std": self.target_std,
            }
        return out


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------

def load_delimited(path, target_column, delimiter=",",
                   has_header=True) -> RegressionDataset:
    """Load a delimited text file into a dataset, row order preserved.

    ``delimiter=None`` splits on arbitrary whitespace.  ``target_column``
    is a column name when the file has a header, otherwise a 0-based
    index.  Non-numeric cells raise :class:`DataError` naming the row and
    column.
    """
    try:
        with open(path, newline="") as fh:
            if delimiter is None:
                rows = [line.split() for line in fh if line.strip()]
            else:
                rows = [r for r in csv.reader(fh, delimiter=delimiter) if r]
    except OSError as exc:
        raise DataError(f"cannot read dataset file {path}: {exc}") from exc
    if not rows:
        raise DataError(f"dataset file {path} is empty")

    if has_header:
        header = [c.strip() for c in rows[0]]
        body = rows[1:]
        if target_column not in header:
            raise SchemaError(
                f"target column {target_column!r} not found; "
                f"available columns: {header}")
        target_idx = header.index(target_column)
    else:
        body = rows
        target_idx = int(target_column)
        if not body or not (0 <= target_idx < len(body[0])):
            raise SchemaError(
                f"target column index {target_idx} out of range "
                f"for {len(body[0]) if body else 0} columns")
    if not body:
        raise DataError(f"dataset file {path} has no data rows")

    width = len(body[0])
    values = np.empty((len(body), width))
    for i, row in enumerate(body):
        if len(row) != width:
            raise SchemaError(
                f"row {i + 1} has {len(row)} cells, expected {width}")
        for j, cell in enumerate(row):
            try:
                values[i, j] = float(cell)
            except ValueError:
                raise DataError(
                    f"non-numeric cell {cell!r} at row {i + 1}, "
                    f"column {j + 1}") from None

    mask = np.ones(width, dtype=bool)
    mask[target_idx] = False
    return RegressionDataset(
        features=values[:, mask],
        targets=values[:, target_idx],
        metadata={"source": str(path), "target_column": str(target_column)},
    )


# ---------------------------------------------------------------------------
# Synthetic generators
# ---------------------------------------------------------------------------

def make_synthetic(kind, n, noise_params=None, x_range=(-4.0, 4.0),
                   seed=0) -> RegressionDataset:
    """Generate a single-feature dataset with a known ground truth.

    Kinds
    -----
    cubic
        ``y = x^3 + eps``, homoscedastic; ``noise_params={"sd": 3.0}``.
    heteroscedastic_bimodal
        ``y = x^3 + eps`` where each point's noise scale is drawn from
        two values; ``noise_params={"sd_low": 0.05, "sd_high": 0.5,
        "mix": 0.5}`` (``mix`` is the probability of the high scale).
    linear
        ``y = slope * x + intercept + eps``;
        ``noise_params={"slope": 2.0, "intercept": 0.0, "sd": 0.1}``.
    """
    if kind not in SYNTHETIC_KINDS:
        raise DomainError(f"unknown synthetic kind {kind!r}; "
                          f"choose from {SYNTHETIC_KINDS}")
    if n < 10:
        raise DomainError(f"n must be >= 10, got {n}")
    lo, hi = float(x_range[0]), float(x_range[1])
    if not lo < hi:
        raise DomainError(f"invalid x_range {x_range}")
    params = dict(noise_params or {})
    rng = np.random.default_rng(seed)
    x = rng.uniform(lo, hi, size=n)

    if kind == "linear":
        slope = float(params.pop("slope", 2.0))
        intercept = float(params.pop("intercept", 0.0))
        sd = float(params.pop("sd", 0.1))
        if sd < 0:
            raise DomainError(f"sd must be >= 0, got {sd}")
        y = slope * x + intercept + sd * rng.standard_normal(n)
        formula = f"y = {slope}*x + {intercept} + N(0, {sd}^2)"
    elif kind == "cubic":
        sd = float(params.pop("sd", 3.0))
        if sd < 0:
            raise DomainError(f"sd must be >= 0, got {sd}")
        y = x ** 3 + sd * rng.standard_normal(n)
        formula = f"y = x^3 + N(0, {sd}^2)"
    else:  # heteroscedastic_bimodal
        sd_low = float(params.pop("sd_low", 0.05))
        sd_high = float(params.pop("sd_high", 0.5))
        mix = float(params.pop("mix", 0.5))
        if not (0.0 <= mix <= 1.0) or sd_low < 0 or sd_high < 0:
            raise DomainError(
                f"invalid noise params sd_low={sd_low} sd_high={sd_high} "
                f"mix={mix}")
        scale = np.where(rng.random(n) < mix, sd_high, sd_low)
        y = x ** 3 + scale * rng.standard_normal(n)
        formula = (f"y = x^3 + N(0, s^2), s in {{{sd_low}, {sd_high}}} "
                   f"with P(s={sd_high}) = {mix}")
    if params:
        raise DomainError(f"unknown noise params for {kind}: "
                          f"{sorted(params)}")

    return RegressionDataset(
        features=x[:, None],
        targets=y,
        metadata={"source": f"synthetic:{kind}", "formula": formula,
                  "seed": int(seed), "n": int(n), "x_range": [lo, hi]},
    )


# ---------------------------------------------------------------------------
# Splitting and standardization
# ---------------------------------------------------------------------------

def _largest_remainder_counts(n: int, fractions) -> np.ndarray:
    exact = np.asarray(fractions, dtype=float) * n
    base = np.floor(exact).astype(int)
    short = n - base.sum()
    order = np.argsort(-(exact - base), kind="stable")
    base[order[:short]] += 1
    return base


def split(data: RegressionDataset, fractions=(0.8, 0.1, 0.1),
          seed=0) -> RegressionDataset:
    """Assign every row to train/val/test, deterministically for a seed.

    Fractions must be positive and sum to 1; counts follow the largest
    remainder rule so the assignment is exhaustive and disjoint.
    """
    fractions = np.asarray(fractions, dtype=float)
    if fractions.shape != (3,) or np.any(fractions <= 0):
        raise DomainError(f"fractions must be 3 positive values, "
                          f"got {fractions}")
    if abs(fractions.sum() - 1.0) > 1e-9:
        raise DomainError(f"fractions must sum to 1, got {fractions.sum()!r}")
    counts = _largest_remainder_counts(data.n_samples, fractions)
    perm = np.random.default_rng(seed).permutation(data.n_samples)
    assignment = np.empty(data.n_samples, dtype=np.int8)
    start = 0
    for code, count in zip((TRAIN, VAL, TEST), counts):
        assignment[perm[start:start + count]] = code
        start += count
    meta = dict(data.metadata or {})
    meta["split"] = {"fractions": fractions.tolist(), "seed": int(seed)}
    return replace(data, split=assignment, metadata=meta)


def standardize(data: RegressionDataset) -> RegressionDataset:
    """Zero-mean, unit-std features and targets, statistics from train rows.

    Constant feature columns keep their offset removed but are left
    unscaled (std treated as 1).
    """
    idx = data.rows(TRAIN)
    f_mean = data.features[idx].mean(axis=0)
    f_std = data.features[idx].std(axis=0)
    f_std = np.where(f_std < 1e-12, 1.0, f_std)
    t_mean = float(data.targets[idx].mean())
    t_std = float(data.targets[idx].std())
    if t_std < 1e-12:
        t_std = 1.0
    return replace(
        data,
        features=(data.features - f_mean) / f_std,
        targets=(data.targets - t_mean) / t_std,
        feature_means=f_mean,
        feature_stds=f_std,
        target_mean=t_mean,
        target_std=t_std,
    )
