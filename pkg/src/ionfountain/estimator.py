"""scikit-learn style wrapper: calibrate on ``fit``, predict recapture for parameter rows."""

from __future__ import annotations

from dataclasses import replace

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .experiments import InitialDistribution, calibrate_reflector, monte_carlo
from .recapture import RecaptureCriterion
from .scenario import Scenario, baseline_scenario


class FountainModel(ClassifierMixin, BaseEstimator):
    """Recapture classifier over control parameters.

    ``fit`` calibrates the reflector of the default stack to the target
    turning point and round-trip time. Each row of ``X`` then gives values
    for ``features`` (parameter paths understood by
    :meth:`Scenario.with_parameter`); ``predict`` returns 1 where the ion
    starting at rest is recaptured, ``predict_proba`` the thermal Monte
    Carlo estimate.

    Parameters
    ----------
    features : tuple of str
    extraction_voltage, reflector_voltage : float
        Volts.
    target_z_turn, target_tof : float
        Calibration targets in m and s.
    dt : float
    max_distance, max_speed : float
        Recapture box.
    rf_force_scale : float
        Axial RF field scale in V/m; 0 disables the RF force.
    temperature : float
        For ``predict_proba``.
    n_trials : int
    random_state : int
    """

    def __init__(
        self,
        features=("pulse_duration",),
        extraction_voltage=-200.0,
        reflector_voltage=7.5,
        target_z_turn=55e-3,
        target_tof=6.3e-6,
        dt=2e-9,
        max_distance=100e-6,
        max_speed=50.0,
        rf_force_scale=0.0,
        temperature=0.5e-3,
        n_trials=100,
        random_state=0,
    ):
        self.features = features
        self.extraction_voltage = extraction_voltage
        self.reflector_voltage = reflector_voltage
        self.target_z_turn = target_z_turn
        self.target_tof = target_tof
        self.dt = dt
        self.max_distance = max_distance
        self.max_speed = max_speed
        self.rf_force_scale = rf_force_scale
        self.temperature = temperature
        self.n_trials = n_trials
        self.random_state = random_state

    def _template(self) -> Scenario:
        s = baseline_scenario(
            calibrated=False,
            extraction_voltage=self.extraction_voltage,
            reflector_voltage=self.reflector_voltage,
        )
        s = s.with_parameter("sim.dt", self.dt)
        return replace(s, criterion=RecaptureCriterion(self.max_distance, self.max_speed))

    def fit(self, X=None, y=None):
        """Calibrate the reflector. ``X`` and ``y`` are accepted for API symmetry and ignored."""
        template = self._template()
        cal = calibrate_reflector(template, self.target_z_turn, self.target_tof)
        scenario = replace(template, stack=cal.stack)
        scenario = scenario.with_parameter("pulse_duration", cal.tof)
        if self.rf_force_scale:
            scenario = scenario.with_parameter("rf_force.scale", self.rf_force_scale)
        self.calibration_ = cal
        self.scenario_ = scenario
        self.z_turn_ = cal.z_turn
        self.tof_ = cal.tof
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = len(self.features)
        return self

    def _row_scenarios(self, X):
        check_is_fitted(self, "scenario_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        for row in X:
            s = self.scenario_
            for path, value in zip(self.features, row):
                s = s.with_parameter(path, float(value))
            yield s

    def predict(self, X):
        return np.array([int(s.outcome().recaptured) for s in self._row_scenarios(X)])

    def predict_proba(self, X):
        dist = InitialDistribution("thermal", self.temperature)
        p = np.array([
            monte_carlo(s, dist, self.n_trials, seed=self.random_state).point
            for s in self._row_scenarios(X)
        ])
        return np.column_stack([1.0 - p, p])
