"""scikit-learn style estimators wrapping the binned fits.

Each estimator takes the support lower bound ``s_min`` as a hyperparameter,
``fit`` accepts anything :func:`tailbin.validation.check_binned_sample` does,
and ``score`` returns the binned log-likelihood so model selection utilities
that maximize a score work unchanged.

>>> from tailbin import ParetoEstimator, fixture
>>> est = ParetoEstimator(s_min=20).fit(fixture("all", 1996))
>>> round(est.k_, 3)
0.972
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import estimation
from .distributions import bin_probs, survival
from .estimation import LOGNORMAL_MIN_BINS, FitResult, log_likelihood
from .gof import GofReport, gof_pvalue, ks_distance
from .numerics import RngStream, multinomial_sample
from .validation import check_s_min, check_truncated

__all__ = ["ParetoEstimator", "ZipfEstimator", "LognormalEstimator"]


class _BinnedTailEstimator(BaseEstimator):
    _family = None
    _min_bins = 2

    def _estimator_name(self):
        raise NotImplementedError

    def _fit_truncated(self, t):
        raise NotImplementedError

    def fit(self, X, y=None):
        s_min = check_s_min(self.s_min)
        t = check_truncated(X, s_min, self._min_bins)
        result = self._fit_truncated(t)
        self.result_ = result
        self.params_ = result.params
        self.loglik_ = result.loglik
        self.r2_ = result.r2_centered
        self.n_ = result.n
        self.boundaries_ = t.boundaries
        self._set_param_attrs(result)
        return self

    def _set_param_attrs(self, result: FitResult):
        self.k_ = result.params.k

    def _truncated(self, X):
        check_is_fitted(self, "result_")
        return check_truncated(X, self.result_.s_min, 2)

    def predict_proba(self, X=None) -> np.ndarray:
        """Bin probabilities for the bins at or above ``s_min`` (of ``X`` or the fitted data)."""
        check_is_fitted(self, "result_")
        b = self.boundaries_ if X is None else self._truncated(X).boundaries
        return bin_probs(self.params_, b)

    def survival_function(self, s):
        check_is_fitted(self, "result_")
        return survival(self.params_, s)

    def score(self, X, y=None) -> float:
        t = self._truncated(X)
        return log_likelihood(self.params_, t)

    def ks_distance(self, X) -> float:
        t = self._truncated(X)
        return ks_distance(self.result_, t)

    def gof(self, X, replicates: int = 10_000, seed: int = 0) -> GofReport:
        """Bootstrap p-value of this model family and estimator on ``X``."""
        t = self._truncated(X)
        return gof_pvalue(self.result_.family, self.result_.estimator, t, replicates, seed)

    def sample(self, n: int, random_state=0, stream_id: int = 0) -> np.ndarray:
        """Multinomial bin counts of ``n`` draws from the fitted model."""
        check_is_fitted(self, "result_")
        return multinomial_sample(RngStream(random_state, stream_id), n, self.predict_proba())


class ParetoEstimator(_BinnedTailEstimator):
    """Pareto (type I) exponent by binned maximum likelihood or constrained OLS.

    Parameters
    ----------
    s_min : int
        Support lower bound; must be one of the bin boundaries.
    method : {"mle", "ols"}
        ``"ols"`` regresses log empirical survival on ``ln(s_min / b)`` without
        an intercept, so the fitted survival is exactly 1 at ``s_min``.
    """

    _family = "pareto"

    def __init__(self, s_min=20, method="mle"):
        self.s_min = s_min
        self.method = method

    def _fit_truncated(self, t):
        if self.method == "mle":
            return estimation.fit_pareto_mle(t)
        if self.method == "ols":
            return estimation.fit_pareto_ols(t)
        raise ValueError(f"method must be 'mle' or 'ols', got {self.method!r}")


class ZipfEstimator(_BinnedTailEstimator):
    """Pareto with the exponent fixed at 1; ``fit`` only records the likelihood."""

    _family = "zipf"

    def __init__(self, s_min=20):
        self.s_min = s_min

    def _fit_truncated(self, t):
        return estimation.fit_zipf(t)


class LognormalEstimator(_BinnedTailEstimator):
    """Lognormal law for ``S - s_min`` fitted by binned maximum likelihood."""

    _family = "lognormal"
    _min_bins = LOGNORMAL_MIN_BINS

    def __init__(self, s_min=20, verify=True):
        self.s_min = s_min
        self.verify = verify

    def _fit_truncated(self, t):
        return estimation.fit_lognormal_mle(t, verify=self.verify)

    def _set_param_attrs(self, result):
        self.mu_ = result.params.mu
        self.sigma_ = result.params.sigma
