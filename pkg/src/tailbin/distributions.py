"""Pareto (type I), Zipf and shifted-lognormal survival functions on binned supports.

All bin probabilities are differences of survival values, so the likelihood,
the goodness-of-fit sampler and the plots share one representation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .binned_data import BinScheme

__all__ = [
    "ParetoParams",
    "LognormalParams",
    "pareto_survival",
    "lognormal_survival",
    "survival",
    "bin_probs",
    "discrete_pmf",
]

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class ParetoParams:
    k: float
    s_min: int

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError(f"Pareto exponent must be positive, got {self.k}")
        if not self.s_min > 0:
            raise ValueError(f"Pareto s_min must be positive, got {self.s_min}")

    @classmethod
    def zipf(cls, s_min: int) -> "ParetoParams":
        return cls(1.0, s_min)


@dataclass(frozen=True)
class LognormalParams:
    """``S - s_min`` is lognormal with log-mean ``mu`` and log-sd ``sigma``."""

    mu: float
    sigma: float
    s_min: int

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"lognormal sigma must be positive, got {self.sigma}")


def _check_support(s, s_min):
    if np.any(np.asarray(s) < s_min):
        raise ValueError(f"survival evaluated below s_min={s_min}")


def pareto_survival(p: ParetoParams, s):
    """``(s_min / s) ** k`` for ``s >= s_min``."""
    _check_support(s, p.s_min)
    out = np.exp(p.k * np.log(p.s_min / np.asarray(s, dtype=float)))
    return float(out) if np.ndim(out) == 0 else out


def lognormal_z(mu, sigma, s_min, s):
    with np.errstate(divide="ignore"):
        return (np.log(np.asarray(s, dtype=float) - s_min) - mu) / (sigma * _SQRT2)


def lognormal_survival(p: LognormalParams, s):
    """``erfc(z) / 2`` with ``z = (ln(s - s_min) - mu) / (sigma sqrt 2)``; 1 at ``s_min``."""
    _check_support(s, p.s_min)
    z = lognormal_z(p.mu, p.sigma, p.s_min, s)
    out = np.where(np.asarray(s) == p.s_min, 1.0, 0.5 * special.erfc(z))
    return float(out) if np.ndim(out) == 0 else out


def survival(dist, s):
    if isinstance(dist, ParetoParams):
        return pareto_survival(dist, s)
    if isinstance(dist, LognormalParams):
        return lognormal_survival(dist, s)
    raise TypeError(f"unsupported distribution {type(dist).__name__}")


def _resolve_boundaries(scheme, j):
    b = scheme.as_array() if isinstance(scheme, BinScheme) else np.asarray(scheme, dtype=float)
    if j is None:
        return b
    if not 0 <= j < len(b):
        raise ValueError(f"bin index {j} out of range")
    return b[j:]


def bin_probs(dist, scheme, j: int | None = None) -> np.ndarray:
    """Probabilities of bins ``j..m`` under ``dist``; the last bin is open-ended.

    ``scheme`` is a :class:`BinScheme` (then ``j`` selects the first bin) or the
    boundary array ``b_j..b_m`` itself.
    """
    b = _resolve_boundaries(scheme, j)
    if b[0] != dist.s_min:
        raise ValueError(f"first boundary {b[0]:g} does not equal s_min={dist.s_min}")
    if isinstance(dist, ParetoParams):
        return pareto_bin_probs(np.array([dist.k]), b)[0]
    if isinstance(dist, LognormalParams):
        return lognormal_bin_probs(np.array([dist.mu]), np.array([dist.sigma]), b)[0]
    raise TypeError(f"unsupported distribution {type(dist).__name__}")


def pareto_bin_probs(k, b) -> np.ndarray:
    """Rows of Pareto bin probabilities, one row per exponent in ``k``."""
    k = np.asarray(k, dtype=float)[:, None]
    log_sf = k * np.log(b[0] / b)  # ln P(S >= b_i)
    # P(b_i <= S < b_{i+1}) = S_i (1 - (b_i / b_{i+1})^k), computed in log space
    probs = np.empty((k.shape[0], len(b)))
    probs[:, :-1] = np.exp(log_sf[:, :-1]) * -np.expm1(k * np.log(b[:-1] / b[1:]))
    probs[:, -1] = np.exp(log_sf[:, -1])
    return probs


def lognormal_bin_probs(mu, sigma, b) -> np.ndarray:
    mu = np.asarray(mu, dtype=float)[:, None]
    sigma = np.asarray(sigma, dtype=float)[:, None]
    z = lognormal_z(mu, sigma, b[0], b[1:])
    sf = np.concatenate([np.ones((mu.shape[0], 1)), 0.5 * special.erfc(z)], axis=1)
    probs = np.empty_like(sf)
    probs[:, :-1] = sf[:, :-1] - sf[:, 1:]
    # first bin as 1 - P(S >= b_{j+1}) = erfc(-z)/2 keeps full precision
    probs[:, 0] = 0.5 * special.erfc(-z[:, 0])
    probs[:, -1] = sf[:, -1]
    return probs


def discrete_pmf(dist, s: int) -> float:
    """``P(S = s) = P(S >= s) - P(S >= s + 1)`` for integer ``s >= s_min``."""
    if s < dist.s_min:
        raise ValueError(f"s={s} below s_min={dist.s_min}")
    return float(survival(dist, s) - survival(dist, s + 1))
