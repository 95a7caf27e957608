"""Scikit-learn estimator wrapping the mixture evidential model.

:class:`MixtureEvidentialRegressor` follows the sklearn contract
(``get_params``/``set_params``/``clone``, fit attributes with trailing
underscores), so it drops into pipelines, ``cross_val_score`` and grid
searches.  Standardization of features and target happens inside ``fit``;
predictions and uncertainties come back in original target units.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from . import core
from .data import TRAIN, VAL, RegressionDataset, standardize
from .exceptions import DataError
from .network import NetworkSpec, load_checkpoint, save_checkpoint
from .training import TrainConfig, predict_with_uncertainty, train


class MixtureEvidentialRegressor(BaseEstimator, RegressorMixin):
    """Evidential regressor with a Student-t mixture predictive density.

    Parameters
    ----------
    n_components : int, default=1
        Number of mixture components (1 recovers the classic
        single-Gaussian evidential model).
    hidden_layers : tuple of int, default=(64, 64)
        Trunk layer widths.
    activation : {"relu", "tanh"}, default="relu"
    lam : float, default=0.01
        Weight of the evidence penalty in the loss.
    learning_rate : float, default=1e-3
    batch_size : int, default=64
    max_epochs : int, default=200
    patience : int, default=20
        Early-stopping patience on the validation loss.
    val_fraction : float, default=0.1
        Fraction of the training data carved out for validation.
    freeze_responsibilities : bool, default=False
        Treat responsibilities as constants in the loss gradient.
    random_state : int, default=0

    Attributes
    ----------
    weights_ : NetworkWeights
        Trained parameters (standardized space).
    report_ : TrainReport
        Loss curves, best epoch, wall time.
    mixing_ : ndarray of shape (n_components,)
        Mixing-coefficient estimate over the training data.
    n_features_in_ : int
    """

    def __init__(self, n_components=1, hidden_layers=(64, 64),
                 activation="relu", lam=0.01, learning_rate=1e-3,
                 batch_size=64, max_epochs=200, patience=20,
                 val_fraction=0.1, freeze_responsibilities=False,
                 random_state=0):
        self.n_components = n_components
        self.hidden_layers = hidden_layers
        self.activation = activation
        self.lam = lam
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.val_fraction = val_fraction
        self.freeze_responsibilities = freeze_responsibilities
        self.random_state = random_state

    # ------------------------------------------------------------------
    def fit(self, X, y):
        """Standardize, carve out a validation split, and train."""
        X, y = check_X_y(X, y, y_numeric=True)
        if not (0.0 < self.val_fraction < 0.5):
            raise ValueError(
                f"val_fraction must be in (0, 0.5), got {self.val_fraction}")
        # two-way assignment: everything is train except the val carve-out
        rng = np.random.default_rng(self.random_state)
        n_val = max(1, int(round(self.val_fraction * X.shape[0])))
        assignment = np.full(X.shape[0], TRAIN, dtype=np.int8)
        assignment[rng.permutation(X.shape[0])[:n_val]] = VAL
        ds = RegressionDataset(features=X, targets=y, split=assignment)
        ds = standardize(ds)

        spec = NetworkSpec(
            input_dim=X.shape[1],
            hidden_layers=tuple(self.hidden_layers),
            activation=self.activation,
            n_components=self.n_components,
        )
        cfg = TrainConfig(
            n_components=self.n_components,
            lam=self.lam,
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            max_epochs=self.max_epochs,
            patience=self.patience,
            seed=self.random_state,
            freeze_responsibilities=self.freeze_responsibilities,
        )
        self.weights_, self.report_ = train(spec, ds, cfg)
        self.mixing_ = self.report_.mixing
        self.feature_means_ = ds.feature_means
        self.feature_stds_ = ds.feature_stds
        self.target_mean_ = ds.target_mean
        self.target_std_ = ds.target_std
        self.n_features_in_ = X.shape[1]
        return self

    # ------------------------------------------------------------------
    def _transform(self, X):
        check_is_fitted(self, "weights_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, expected "
                f"{self.n_features_in_}")
        return (X - self.feature_means_) / self.feature_stds_

    def predict(self, X):
        """Point predictions in original target units."""
        report = predict_with_uncertainty(self.weights_, self._transform(X))
        return report.prediction * self.target_std_ + self.target_mean_

    def predict_uncertainty(self, X):
        """Predictions plus uncertainty decomposition, original units.

        Variance-like quantities (aleatoric, epistemic) are rescaled by
        the squared target std.
        """
        report = predict_with_uncertainty(self.weights_, self._transform(X))
        s2 = self.target_std_ ** 2
        return {
            "prediction": report.prediction * self.target_std_ + self.target_mean_,
            "aleatoric": report.aleatoric * s2,
            "aleatoric_mean": report.aleatoric_mean * s2,
            "epistemic": report.epistemic * s2,
            "responsibilities": report.responsibilities,
            "mixing": report.mixing,
        }

    def marginal_log_likelihood(self, X, y):
        """Per-sample log predictive density of ``y``, original units."""
        check_is_fitted(self, "weights_")
        y = np.asarray(y, dtype=float)
        report = predict_with_uncertainty(self.weights_, self._transform(X))
        y_std = (y - self.target_mean_) / self.target_std_
        ll = core.mixture_loglik_kernel(
            y_std, report.prediction, report.nu, report.alpha, report.beta,
            report.responsibilities)
        return ll - np.log(self.target_std_)

    # ------------------------------------------------------------------
    def save(self, path):
        """Persist weights plus preprocessing so predictions reproduce."""
        check_is_fitted(self, "weights_")
        save_checkpoint(path, self.weights_, extra={
            "params": self.get_params(),
            "preprocessing": {
                "feature_means": self.feature_means_.tolist(),
                "feature_stds": self.feature_stds_.tolist(),
                "target_mean": self.target_mean_,
                "target_std": self.target_std_,
            },
        })

    @classmethod
    def load(cls, path) -> "MixtureEvidentialRegressor":
        weights, extra = load_checkpoint(path)
        if "preprocessing" not in extra:
            raise DataError(
                f"checkpoint {path} lacks preprocessing metadata; "
                "was it saved by MixtureEvidentialRegressor.save?")
        params = dict(extra.get("params", {}))
        if "hidden_layers" in params:
            params["hidden_layers"] = tuple(params["hidden_layers"])
        est = cls(**params)
        prep = extra["preprocessing"]
        est.weights_ = weights
        est.feature_means_ = np.asarray(prep["feature_means"], dtype=float)
        est.feature_stds_ = np.asarray(prep["feature_stds"], dtype=float)
        est.target_mean_ = float(prep["target_mean"])
        est.target_std_ = float(prep["target_std"])
        est.n_features_in_ = weights.spec.input_dim
        return est
