"""Metrics and experiment harnesses.

RMSE and predictive NLL are reported in original target units (the NLL
adds ``log(target_std)`` back per sample).  The component sweep trains one
model per component count per trial, sharing trial seeds across counts so
comparisons are paired.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import core
from .estimator import MixtureEvidentialRegressor
from .exceptions import DimensionError, DomainError
from .training import predict_with_uncertainty

TRIAL_SEED_STRIDE = 1000


def rmse(pred, truth) -> float:
    """Root mean squared error."""
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape or pred.ndim != 1 or pred.size < 1:
        raise DimensionError(
            f"pred and truth must be equal-length 1-D vectors, got "
            f"{pred.shape} and {truth.shape}")
    return float(np.sqrt(np.mean((pred - truth) ** 2)))


def nll_metric(y, gamma, nu, alpha, beta, weights, target_std=1.0) -> float:
    """Mean negative log predictive density, original target units.

    ``y`` and the per-sample mixture parameters live in the standardized
    target scale; ``target_std`` converts the density back to original
    units by adding ``log(target_std)`` per sample.
    """
    if target_std <= 0:
        raise DomainError(f"target_std must be > 0, got {target_std}")
    ll = core.mixture_loglik_kernel(y, gamma, nu, alpha, beta, weights)
    return float(-np.mean(ll) + np.log(target_std))


@dataclass(frozen=True)
class MetricReport:
    """Held-out metrics of one trial."""

    rmse: float
    nll: float
    n_test: int
    trial_id: int


@dataclass(frozen=True)
class SweepRow:
    n_components: int
    mean_rmse: float
    std_rmse: float
    mean_nll: float
    std_nll: float
    n_trials: int
    errors: tuple = ()


@dataclass(frozen=True)
class SweepReport:
    """Per-component-count aggregate metrics, rows sorted by count."""

    rows: tuple

    def best_n_components(self) -> int:
        """Count with the lowest mean NLL (the model-selection criterion)."""
        ok = [r for r in self.rows if np.isfinite(r.mean_nll)]
        if not ok:
            raise DomainError("sweep produced no successful rows")
        return min(ok, key=lambda r: r.mean_nll).n_components


def evaluate_estimator(est: MixtureEvidentialRegressor, X_test,
                       y_test, trial_id=0) -> MetricReport:
    """RMSE and NLL of a fitted estimator on held-out data (original units)."""
    y_test = np.asarray(y_test, dtype=float)
    pred = est.predict(X_test)
    nll = float(-est.marginal_log_likelihood(X_test, y_test).mean())
    return MetricReport(rmse=rmse(pred, y_test), nll=nll,
                        n_test=int(y_test.size), trial_id=int(trial_id))


def run_trial(X, y, n_components, trial_seed, test_fraction=0.1,
              **estimator_kwargs) -> MetricReport:
    """One benchmark trial: random train/test split, fit, evaluate.

    The estimator carves its own validation subset out of the train part;
    the split here only reserves the held-out test rows.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = y.size
    n_test = max(1, int(round(test_fraction * n)))
    perm = np.random.default_rng(trial_seed).permutation(n)
    test_idx, train_idx = perm[:n_test], perm[n_test:]
    est = MixtureEvidentialRegressor(n_components=n_components,
                                     random_state=trial_seed,
                                     **estimator_kwargs)
    est.fit(X[train_idx], y[train_idx])
    return evaluate_estimator(est, X[test_idx], y[test_idx],
                              trial_id=trial_seed)


def trial_seeds(base_seed: int, n_trials: int) -> list[int]:
    """Deterministic per-trial seeds derived from one base seed."""
    return [base_seed + TRIAL_SEED_STRIDE * t for t in range(n_trials)]


def benchmark(X, y, n_components, n_trials=20, base_seed=0,
              test_fraction=0.1, on_trial=None, **estimator_kwargs):
    """Repeated random-split benchmark: per-trial reports plus failures.

    Failed trials are recorded and skipped; aggregation is over successes.
    Returns ``(reports, errors)`` where errors is a list of
    ``(trial_seed, message)`` pairs.
    """
    reports, errors = [], []
    for seed in trial_seeds(base_seed, n_trials):
        try:
            report = run_trial(X, y, n_components, seed,
                               test_fraction=test_fraction,
                               **estimator_kwargs)
            reports.append(report)
            if on_trial is not None:
                on_trial(report)
        except Exception as exc:  # noqa: BLE001 - collected per contract
            errors.append((seed, f"{type(exc).__name__}: {exc}"))
    return reports, errors


def aggregate(reports) -> dict:
    """Mean and std of RMSE / NLL over trial reports (std 0 for one trial)."""
    if not reports:
        raise DomainError("no successful trials to aggregate")
    r = np.array([rep.rmse for rep in reports])
    n = np.array([rep.nll for rep in reports])
    return {
        "n_trials": len(reports),
        "rmse_mean": float(r.mean()),
        "rmse_std": float(r.std()),
        "nll_mean": float(n.mean()),
        "nll_std": float(n.std()),
    }


def component_sweep(X, y, k_values, n_trials=5, base_seed=0,
                    test_fraction=0.1, **estimator_kwargs) -> SweepReport:
    """Train one model per component count per trial with shared seeds.

    Per-cell failures are recorded in the row and the sweep continues.
    Rows come back sorted by component count.
    """
    k_values = sorted(set(int(k) for k in k_values))
    if not k_values:
        raise DomainError("k_values must be nonempty")
    rows = []
    for k in k_values:
        reports, errors = benchmark(X, y, k, n_trials=n_trials,
                                    base_seed=base_seed,
                                    test_fraction=test_fraction,
                                    **estimator_kwargs)
        if reports:
            agg = aggregate(reports)
            rows.append(SweepRow(
                n_components=k, mean_rmse=agg["rmse_mean"],
                std_rmse=agg["rmse_std"], mean_nll=agg["nll_mean"],
                std_nll=agg["nll_std"], n_trials=agg["n_trials"],
                errors=tuple(errors)))
        else:
            rows.append(SweepRow(
                n_components=k, mean_rmse=float("nan"),
                std_rmse=float("nan"), mean_nll=float("nan"),
                std_nll=float("nan"), n_trials=0, errors=tuple(errors)))
    return SweepReport(rows=tuple(rows))


def ood_report(weights, in_domain, out_domain) -> dict:
    """Mean epistemic uncertainty inside vs outside the training range."""
    in_domain = np.asarray(in_domain, dtype=float)
    out_domain = np.asarray(out_domain, dtype=float)
    if in_domain.size == 0 or out_domain.size == 0:
        raise DomainError("both batches must be nonempty")
    epi_in = predict_with_uncertainty(weights, in_domain).epistemic
    epi_out = predict_with_uncertainty(weights, out_domain).epistemic
    mean_in = float(epi_in.mean())
    mean_out = float(epi_out.mean())
    return {
        "mean_epistemic_in": mean_in,
        "mean_epistemic_out": mean_out,
        "ratio": mean_out / mean_in,
    }
