"""scikit-learn style wrapper around the asymptotic solution."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .assembler import AsymptoticSolution
from .models import get_model
from .phase import build_phases
from .transport import solve_transport


class CGOApproximation(BaseEstimator):
    """Approximate solution ``v^eps(t, x)`` of a registry model.

    ``fit`` builds the phases and solves the transport equations; ``predict``
    takes rows ``(t, x)`` and returns the complex state, shape (n, N).
    """

    def __init__(self, model="S1", eps=0.05, G=8, s0=None, n_steps=400,
                 e_outside="identity"):
        self.model = model
        self.eps = eps
        self.G = G
        self.s0 = s0
        self.n_steps = n_steps
        self.e_outside = e_outside

    def _check_X(self, X):
        X = check_array(X, dtype=np.float64, ensure_min_samples=1)
        if X.shape[1] != 2:
            raise ValueError(f"X must have two columns (t, x), got {X.shape[1]}")
        self.spec_.model.check_domain(X[:, 0], X[:, 1])
        return X

    def fit(self, X=None, y=None):
        spec = get_model(self.model) if isinstance(self.model, str) else self.model
        self.spec_ = spec
        s0 = self.s0 if self.s0 is not None else spec.defaults.get("s0")
        self.phase_ = build_phases(spec.model, spec.init, n_steps=self.n_steps, s0=s0)
        self.transport_ = solve_transport(spec.model, self.phase_, G=self.G)
        self.solution_ = AsymptoticSolution(spec.model, self.phase_, self.transport_,
                                            e_outside=self.e_outside)
        self.n_features_in_ = 2
        if X is not None:
            self._check_X(X)
        return self

    def predict(self, X):
        check_is_fitted(self, "solution_")
        X = self._check_X(X)
        return self.solution_(X[:, 0], X[:, 1], self.eps)

    def residual(self, X):
        """``L(v)`` at the rows of X."""
        check_is_fitted(self, "solution_")
        X = self._check_X(X)
        ps = self.solution_.profiles(X[:, 0], X[:, 1])
        return self.solution_.residual(ps, self.eps)

    def score(self, X, y=None):
        """Negative sup error against ``y``, or negative sup residual when y is None."""
        if y is None:
            return -float(np.max(np.abs(self.residual(X))))
        y = np.asarray(y, complex).reshape(len(X), -1)
        return -float(np.max(np.abs(self.predict(X) - y)))
