import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from ionfountain.estimator import FountainModel


@pytest.fixture(scope="module")
def model():
    return FountainModel(n_trials=8, random_state=3).fit()


def test_fit_calibrates(model):
    assert model.z_turn_ == pytest.approx(55e-3, abs=20e-6)
    assert model.tof_ == pytest.approx(6.3e-6, abs=2e-9)
    assert model.calibration_.converged
    assert list(model.classes_) == [0, 1]


def test_predict_pulse_durations(model):
    y = model.predict([[model.tof_], [6.0e-6], [model.tof_ + 2e-6]])
    assert y.tolist() == [1, 0, 0]


def test_predict_proba(model):
    p = model.predict_proba([[model.tof_], [6.0e-6]])
    assert p.shape == (2, 2)
    assert np.allclose(p.sum(axis=1), 1.0)
    assert p[0, 1] == 1.0 and p[1, 1] == 0.0


def test_two_features():
    m = FountainModel(features=("pulse_duration", "voltage.R")).fit()
    assert m.n_features_in_ == 2
    assert m.predict([[m.tof_, 7.5], [m.tof_, 12.0]]).tolist() == [1, 0]
    with pytest.raises(ValueError):
        m.predict([[m.tof_]])


def test_params_and_clone():
    m = FountainModel(reflector_voltage=7.6, n_trials=5)
    params = m.get_params()
    assert params["reflector_voltage"] == 7.6 and params["n_trials"] == 5
    c = clone(m)
    assert c.get_params() == params and c is not m
    m.set_params(dt=1e-9)
    assert m.dt == 1e-9


def test_not_fitted():
    with pytest.raises(NotFittedError):
        FountainModel().predict([[6.3e-6]])
