import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from cgoptics.errors import OutsideDomain
from cgoptics.estimator import CGOApproximation


@pytest.fixture(scope="module")
def fitted():
    return CGOApproximation(model="L1", eps=0.05).fit()


def test_params_and_clone():
    est = CGOApproximation(model="S1", eps=0.1, G=6)
    assert est.get_params()["G"] == 6
    c = clone(est.set_params(eps=0.2))
    assert c.eps == 0.2 and not hasattr(c, "solution_")


def test_predict_shape_and_initial_data(fitted):
    x = np.linspace(-0.3, 0.3, 9)
    X = np.column_stack([np.zeros_like(x), x])
    v = fitted.predict(X)
    assert v.shape == (9, 2)
    want = 0.1 * np.exp(1j * (x + 40j * x ** 2) / 0.05)
    assert np.allclose(v[:, 0], want, atol=1e-12)
    assert np.all(v[:, 1] == 0)


def test_score_is_negative_residual(fitted):
    X = np.array([[0.1, 0.1], [0.2, 0.25]])
    assert fitted.score(X) >= -1e-10
    assert fitted.score(X, fitted.predict(X)) == 0.0


def test_input_validation(fitted):
    with pytest.raises(ValueError):
        fitted.predict(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        fitted.predict([[np.nan, 0.0]])
    with pytest.raises(OutsideDomain):
        fitted.predict([[0.5, 10.0]])
    with pytest.raises(NotFittedError):
        CGOApproximation().predict([[0.0, 0.0]])
