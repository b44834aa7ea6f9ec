"""Model comparison: Vuong's normalized likelihood ratio and the nested k = 1 test."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .binned_data import TruncatedSample
from .distributions import bin_probs
from .estimation import FitResult, fit_pareto_mle, fit_zipf
from .numerics import erf, erf_inv, erfc

__all__ = ["VuongReport", "LrtReport", "DegenerateComparison", "vuong_test", "zipf_lrt",
           "vuong_threshold", "DEFAULT_ALPHA"]

DEFAULT_ALPHA = 0.1
VARIANCE_FLOOR = 1e-14


class DegenerateComparison(ValueError):
    """The per-observation log-likelihood ratio has (numerically) zero variance."""


@dataclass(frozen=True)
class VuongReport:
    model_a: str
    model_b: str
    r: float
    r_n: float
    sigma2: float
    p_value: float
    winner: str  # A | B | undecided
    alpha: float

    def as_dict(self) -> dict:
        return {"model_a": self.model_a, "model_b": self.model_b, "r": self.r, "r_n": self.r_n,
                "sigma2": self.sigma2, "p_value": self.p_value, "winner": self.winner,
                "alpha": self.alpha}


@dataclass(frozen=True)
class LrtReport:
    r_abs: float
    statistic: float
    p_value: float
    k_hat: float

    def as_dict(self) -> dict:
        return {"r_abs": self.r_abs, "statistic": self.statistic, "p_value": self.p_value,
                "k_hat": self.k_hat}


def vuong_threshold(alpha: float) -> float:
    """``T`` with ``1 - erf(T) = alpha``."""
    return erf_inv(1.0 - alpha)


def _label(f: FitResult) -> str:
    return f.family if f.estimator in ("mle", "fixed") else f"{f.family}-{f.estimator}"


def vuong_test(fit_a: FitResult, fit_b: FitResult, t: TruncatedSample,
               alpha: float = DEFAULT_ALPHA) -> VuongReport:
    """Compare two fitted models on the same truncated sample.

    ``r_n > 0`` favours ``fit_a``. Raises :class:`DegenerateComparison` when the
    models assign (almost) the same log-probability differences to every firm.
    """
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    for f in (fit_a, fit_b):
        if f.s_min != t.s_min:
            raise ValueError(f"fit s_min={f.s_min} but sample s_min={t.s_min}")
        if f.estimator == "ols":
            raise ValueError("Vuong comparisons use maximum-likelihood (or fixed) fits only")
    b, h = t.boundaries, t.counts
    n = float(t.n)
    used = h > 0
    with np.errstate(divide="ignore"):
        diff = np.log(bin_probs(fit_a.params, b)[used]) - np.log(bin_probs(fit_b.params, b)[used])
    h = h[used]
    r = float(np.sum(h * diff))
    sigma2 = float(np.sum(h * (diff - r / n) ** 2) / n)
    if not sigma2 >= VARIANCE_FLOOR:
        raise DegenerateComparison(
            f"log-likelihood ratio variance {sigma2:.3g} below {VARIANCE_FLOOR:g}; models indistinguishable"
        )
    r_n = r / math.sqrt(2.0 * n * sigma2)
    p = 1.0 - erf(abs(r_n))
    T = vuong_threshold(alpha)
    winner = "A" if r_n >= T else "B" if r_n <= -T else "undecided"
    return VuongReport(_label(fit_a), _label(fit_b), r, r_n, sigma2, p, winner, alpha)


def zipf_lrt(t: TruncatedSample, pareto_fit: FitResult | None = None) -> LrtReport:
    """Likelihood ratio test of ``k = 1`` within the Pareto family (chi-squared, 1 dof)."""
    pareto = pareto_fit if pareto_fit is not None else fit_pareto_mle(t)
    r = pareto.loglik - fit_zipf(t).loglik
    r_abs = abs(r)
    # upper chi2(1) tail at 2|R| equals erfc(sqrt(|R|))
    return LrtReport(r_abs, 2.0 * r_abs, float(erfc(math.sqrt(r_abs))), pareto.params.k)
