"""scikit-learn style wrappers around the synthesizers and the ensemble engine.

The estimators follow the usual conventions: hyperparameters in
``__init__``, learned state in trailing-underscore attributes set by
``fit``, and ``get_params``/``set_params``/``clone`` from ``BaseEstimator``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .ensemble import measure_ensemble, prepare, tally
from .errors import Infeasible, InvalidInput
from .micro_model import MicroModel, state_breakdown
from .presets import chsh_value
from .synthesis import ChshTarget, eta_threshold, synthesize_chsh, synthesize_product


def _check_correlations(X) -> np.ndarray:
    X = check_array(X, dtype=float, ensure_min_samples=2, ensure_min_features=2)
    if X.shape != (2, 2):
        raise InvalidInput(f"expected a 2x2 correlation table, got shape {X.shape}")
    return X


class ProductModelSynthesizer(BaseEstimator):
    """Fit a micro-model to the single-observable Born statistics of a state.

    Parameters
    ----------
    detection : float, default=1.0
        Detection probability assigned to every class and observable.
    """

    def __init__(self, detection=1.0):
        self.detection = detection

    def fit(self, rho, observables):
        self.model_ = synthesize_product(rho, list(observables), self.detection)
        self.n_classes_ = self.model_.n_classes
        return self

    def predict_proba(self, properties):
        """Detection-conditional probability of each property (``nan`` if never detected)."""
        check_is_fitted(self, "model_")
        out = []
        for F in properties:
            c = state_breakdown(self.model_, F).conditional
            out.append(np.nan if c is None else c)
        return np.array(out)


class ChshModelSynthesizer(BaseEstimator):
    """Fit a local micro-model to a 2x2 table of detection-conditional correlations.

    Parameters
    ----------
    eta : float, default=1.0
        Per-side detection efficiency the model must have.

    Attributes
    ----------
    feasible_ : bool
        False when no local model with this efficiency exists.
    model_ : MicroModel or None
    conditional_, unconditional_ : ndarray of shape (2, 2) or None
    """

    def __init__(self, eta=1.0):
        self.eta = eta

    def fit(self, X, y=None):
        X = _check_correlations(X)
        try:
            result = synthesize_chsh(ChshTarget(X, self.eta))
        except Infeasible:
            self.feasible_ = False
            self.model_ = None
            self.conditional_ = self.unconditional_ = None
            return self
        self.feasible_ = True
        self.model_ = result.model
        self.conditional_ = result.conditional
        self.unconditional_ = result.unconditional
        return self

    def predict(self, X=None):
        check_is_fitted(self, "feasible_")
        if not self.feasible_:
            raise Infeasible("the fitted targets admit no local model at this efficiency")
        return self.conditional_.copy()

    def chsh_values(self):
        """(conditional S, unconditional S) of the fitted model."""
        check_is_fitted(self, "feasible_")
        if not self.feasible_:
            return None
        return chsh_value(self.conditional_), chsh_value(self.unconditional_)


class DetectionThresholdEstimator(BaseEstimator):
    def __init__(self, tol=0.005):
        self.tol = tol

    def fit(self, X, y=None):
        X = _check_correlations(X)
        result = eta_threshold(X, self.tol)
        self.eta_threshold_ = result.eta
        self.probes_ = result.probes
        self.n_bisection_solves_ = result.n_bisection_solves
        return self


class EnsembleSimulator(TransformerMixin, BaseEstimator):
    """Prepare a seeded ensemble from a model, then tally properties on it.

    ``transform`` returns one row per property with the simulated overall,
    detection and detection-conditional frequencies.
    """

    def __init__(self, n_objects=10_000, seed=0):
        self.n_objects = n_objects
        self.seed = seed

    def fit(self, model: MicroModel, y=None):
        if not isinstance(model, MicroModel):
            raise InvalidInput("EnsembleSimulator.fit expects a MicroModel")
        self.model_ = model.check()
        self.objects_ = prepare(model, self.n_objects, self.seed)
        return self

    def transform(self, properties):
        check_is_fitted(self, "objects_")
        rows = []
        self.tallies_ = []
        for F in properties:
            records = measure_ensemble(self.objects_, F.observable, self.model_, self.seed)
            t = tally(self.objects_, records, F)
            self.tallies_.append(t)
            cond = t.freq_conditional
            rows.append([float(t.freq_total), float(t.freq_detect), np.nan if cond is None else float(cond)])
        return np.array(rows).reshape(-1, 3)
