"""scikit-learn style wrappers around the fluctuation statistic and the limit sampler."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_array, check_is_fitted

from ._validation import DEFAULT_BUDGET, check_count, check_power, check_time
from .circulant import (
    ROUTES,
    expected_trace_power_exact,
    fluctuation_values,
    resolve_centering,
    spectral_traces,
)
from .limit import CONVENTIONS, CovarianceKernel, kernel_matrix


class TraceFluctuationTransformer(TransformerMixin, BaseEstimator):
    """Map first-row entry vectors to ``w_p`` values, one column per power.

    Rows of ``X`` are samples ``(b_0(t), ..., b_{n-1}(t))`` at a common time
    ``t``. ``fit`` fixes the centering constant for each power: the exact
    expectation when it can be enumerated, otherwise the mean trace of ``X``.
    """

    def __init__(self, powers=(2,), t=1.0, centering="auto", route="spectral",
                 budget=DEFAULT_BUDGET):
        self.powers = powers
        self.t = t
        self.centering = centering
        self.route = route
        self.budget = budget

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        powers = tuple(check_power(p) for p in self.powers)
        if not powers:
            raise ValueError("powers must not be empty")
        if self.route not in ROUTES:
            raise ValueError(f"route must be one of {ROUTES}, got {self.route!r}")
        t = check_time(self.t)
        n = X.shape[1]
        modes, centers = [], []
        for p in powers:
            mode = resolve_centering(self.centering, n, p, self.budget)
            if mode == "exact":
                c = expected_trace_power_exact(n, p, t, self.budget)
            else:
                c = float(spectral_traces(X, p).mean())
            modes.append(mode)
            centers.append(c)
        self.n_features_in_ = n
        self.powers_ = powers
        self.centering_modes_ = tuple(modes)
        self.centering_ = np.array(centers)
        return self

    def transform(self, X):
        check_is_fitted(self, "centering_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} entries per row, fitted with {self.n_features_in_}")
        cols = [fluctuation_values(X, p, c, self.route, self.budget)
                for p, c in zip(self.powers_, self.centering_)]
        return np.column_stack(cols)

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "powers_")
        return np.array([f"w_{p}" for p in self.powers_], dtype=object)


class GaussianLimitSampler(BaseEstimator):
    """Exact draws from the limit Gaussian family at fixed ``(p, t)`` labels.

    ``fit`` builds and certifies the kernel matrix; ``sample`` returns an
    ``(n_samples, len(labels))`` array.
    """

    def __init__(self, labels=((2, 1.0),), convention="normalized"):
        self.labels = labels
        self.convention = convention

    def fit(self, X=None, y=None):
        if self.convention not in CONVENTIONS:
            raise ValueError(f"convention must be one of {CONVENTIONS}")
        self.kernel_ = CovarianceKernel(self.convention)
        self.kernel_matrix_ = kernel_matrix(self.labels, self.kernel_)
        self.labels_ = self.kernel_matrix_.labels
        self.covariance_ = self.kernel_matrix_.matrix
        return self

    def sample(self, n_samples=1, random_state=None):
        check_is_fitted(self, "kernel_matrix_")
        n_samples = check_count(n_samples, "n_samples")
        rng = check_random_state(random_state)
        z = rng.standard_normal((n_samples, self.kernel_matrix_.rank))
        return z @ self.kernel_matrix_.factor.T
