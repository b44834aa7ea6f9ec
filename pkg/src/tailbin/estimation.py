"""Fitting Pareto, Zipf and shifted-lognormal models to truncated binned samples.

Every solver works on a batch of count rows sharing one set of boundaries, so
the bootstrap in :mod:`tailbin.gof` refits thousands of synthetic samples with
exactly the code that fits the observed one.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from .binned_data import TruncatedSample, survival_array
from .distributions import (
    LognormalParams,
    ParetoParams,
    lognormal_bin_probs,
    lognormal_z,
    pareto_bin_probs,
    survival,
)
from .numerics import bisect_many

logger = logging.getLogger(__name__)

__all__ = [
    "FitResult",
    "FitError",
    "log_likelihood",
    "fit_pareto_ols",
    "fit_pareto_mle",
    "fit_zipf",
    "fit_lognormal_mle",
    "fit",
    "r_squared_centered",
]

PARETO_BRACKET = (0.01, 50.0)
K_TOL = 1e-12
LOGNORMAL_MIN_BINS = 4
SIGMA_FLOOR = 1e-6
_SQRT2 = math.sqrt(2.0)
_SQRTPI = math.sqrt(math.pi)


class FitError(RuntimeError):
    """Estimation failed; ``details`` carries diagnostics for reports."""

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details


@dataclass(frozen=True)
class FitResult:
    family: str  # pareto | zipf | lognormal
    estimator: str  # ols | mle | fixed
    params: ParetoParams | LognormalParams
    loglik: float
    r2_centered: float
    s_min: int
    n: int
    warnings: tuple[str, ...] = field(default=())

    @property
    def k(self):
        return getattr(self.params, "k", None)

    @property
    def mu(self):
        return getattr(self.params, "mu", None)

    @property
    def sigma(self):
        return getattr(self.params, "sigma", None)

    def bin_probs(self, boundaries) -> np.ndarray:
        from .distributions import bin_probs
        return bin_probs(self.params, np.asarray(boundaries, dtype=float))

    def summary(self) -> dict:
        out = {"family": self.family, "estimator": self.estimator, "s_min": self.s_min,
               "n": self.n, "loglik": self.loglik, "r2_centered": self.r2_centered}
        if isinstance(self.params, ParetoParams):
            out["k"] = self.params.k
        else:
            out["mu"] = self.params.mu
            out["sigma"] = self.params.sigma
        if self.warnings:
            out["warnings"] = list(self.warnings)
        return out


# ---------------------------------------------------------------- likelihoods


def _weighted_log(H, P):
    """Row sums of ``h * ln p`` with ``0 * ln 0 = 0``."""
    with np.errstate(divide="ignore"):
        logp = np.log(P)
    return np.where(H > 0, H * logp, 0.0).sum(axis=-1)


def pareto_loglik_batch(k, H, b):
    return _weighted_log(H, pareto_bin_probs(k, b))


def lognormal_loglik_batch(mu, sigma, H, b):
    return _weighted_log(H, lognormal_bin_probs(mu, sigma, b))


def _bin_probs_for(dist, b):
    if isinstance(dist, ParetoParams):
        return pareto_bin_probs(np.array([dist.k]), b)[0]
    return lognormal_bin_probs(np.array([dist.mu]), np.array([dist.sigma]), b)[0]


def log_likelihood(dist, t: TruncatedSample) -> float:
    """Binned log-likelihood of ``t`` conditional on ``S >= s_min``."""
    if dist.s_min != t.s_min:
        raise ValueError(f"distribution s_min={dist.s_min} but sample s_min={t.s_min}")
    p = _bin_probs_for(dist, t.boundaries)
    h = t.counts
    bad = np.flatnonzero((p <= 0) & (h > 0))
    if bad.size:
        b = int(t.boundaries[bad[0]])
        raise FitError(f"zero model probability for the nonempty bin starting at {b}", bin=b)
    return float(_weighted_log(h, p))


# ----------------------------------------------------------------------- Pareto


def pareto_foc_batch(k, H, b):
    """Derivative of the Pareto binned log-likelihood in ``k``, one value per row."""
    k = np.asarray(k, dtype=float)[:, None]
    log_b = np.log(b)
    n = H.sum(axis=1)
    ratio = np.exp(k * (log_b[:-1] - log_b[1:]))  # (b_i / b_{i+1})^k
    one_minus = -np.expm1(k * (log_b[:-1] - log_b[1:]))
    term = (log_b[:-1] - ratio * log_b[1:]) / one_minus
    return n * log_b[0] - H[:, -1] * log_b[-1] - (H[:, :-1] * term).sum(axis=1)


def pareto_mle_batch(H, b, bracket=PARETO_BRACKET, tol=K_TOL):
    """Root of the Pareto first-order condition for each row of ``H``.

    Returns ``(k, ok)``; rows without a sign change on ``bracket`` get ``nan``.
    """
    H = np.atleast_2d(np.asarray(H, dtype=float))
    lo = np.full(H.shape[0], bracket[0])
    hi = np.full(H.shape[0], bracket[1])
    return bisect_many(lambda k: pareto_foc_batch(k, H, b), lo, hi, tol)


def pareto_ols_batch(H, b):
    """Through-the-origin regression of log empirical survival on ``ln(s_min / b)``.

    Returns ``(k, n_points)``; boundaries with zero empirical survival are dropped.
    """
    H = np.atleast_2d(np.asarray(H, dtype=float))
    x = np.log(b[0] / b)
    sf = survival_array(H)
    pos = sf > 0
    with np.errstate(divide="ignore"):
        y = np.where(pos, np.log(np.where(pos, sf, 1.0)), 0.0)
    xx = np.where(pos, x * x, 0.0).sum(axis=1)
    xy = np.where(pos, x * y, 0.0).sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        k = np.where(xx > 0, xy / xx, np.nan)
    return k, pos.sum(axis=1)


# -------------------------------------------------------------------- lognormal


def lognormal_grad_batch(mu, sigma, H, b):
    """Gradient of the lognormal binned log-likelihood in ``(mu, sigma)``.

    Shape ``(rows, 2)``. Bin probabilities are differences of survival values,
    with survival pinned to 1 at ``s_min``.
    """
    mu = np.asarray(mu, dtype=float)[:, None]
    sigma = np.asarray(sigma, dtype=float)[:, None]
    z = lognormal_z(mu, sigma, b[0], b[1:])
    dens = np.exp(-z * z) / _SQRTPI  # -d(erfc(z)/2)/dz
    rows = mu.shape[0]
    zeros = np.zeros((rows, 1))
    dsf_mu = np.concatenate([zeros, dens / (sigma * _SQRT2)], axis=1)
    dsf_sigma = np.concatenate([zeros, dens * z / sigma], axis=1)
    P = lognormal_bin_probs(mu[:, 0], sigma[:, 0], b)

    def dp(dsf):
        out = np.empty_like(dsf)
        out[:, :-1] = dsf[:, :-1] - dsf[:, 1:]
        out[:, -1] = dsf[:, -1]
        return out

    w = np.where(H > 0, H / np.where(P > 0, P, 1.0), 0.0)
    return np.stack([(w * dp(dsf_mu)).sum(axis=1), (w * dp(dsf_sigma)).sum(axis=1)], axis=1)


def lognormal_start(H, b):
    """Count-weighted mean and sd of ``ln(midpoint - s_min)``; the open bin uses ``2 b_m``."""
    H = np.atleast_2d(np.asarray(H, dtype=float))
    mids = np.empty(len(b))
    mids[:-1] = 0.5 * (b[:-1] + b[1:])
    mids[-1] = 2.0 * b[-1]
    x = np.log(mids - b[0])
    w = H / H.sum(axis=1, keepdims=True)
    mu = (w * x).sum(axis=1)
    sd = np.sqrt((w * (x - mu[:, None]) ** 2).sum(axis=1))
    return mu, np.maximum(sd, 0.1)


def _newton_lognormal(mu, sigma, H, b, tol, max_iter=100):
    """Damped Newton on the lognormal first-order conditions, vectorized over rows.

    The Jacobian is a central finite difference of the analytic gradient.
    """
    n = H.sum(axis=1)
    L = lognormal_loglik_batch(mu, sigma, H, b)
    active = np.ones(len(mu), dtype=bool)
    for _ in range(max_iter):
        g = lognormal_grad_batch(mu, sigma, H, b)
        gnorm = np.hypot(g[:, 0], g[:, 1])
        active &= ~(gnorm <= tol * n)
        if not active.any():
            break
        idx = np.flatnonzero(active)
        m, s, Ha, ga = mu[idx], sigma[idx], H[idx], g[idx]
        hm = 1e-6 * np.maximum(1.0, np.abs(m))
        hs = 1e-6 * s
        g_mp = lognormal_grad_batch(m + hm, s, Ha, b)
        g_mm = lognormal_grad_batch(m - hm, s, Ha, b)
        g_sp = lognormal_grad_batch(m, s + hs, Ha, b)
        g_sm = lognormal_grad_batch(m, s - hs, Ha, b)
        J00 = (g_mp[:, 0] - g_mm[:, 0]) / (2 * hm)
        J11 = (g_sp[:, 1] - g_sm[:, 1]) / (2 * hs)
        J01 = 0.5 * ((g_mp[:, 1] - g_mm[:, 1]) / (2 * hm) + (g_sp[:, 0] - g_sm[:, 0]) / (2 * hs))
        # shift to negative definite where needed (Levenberg style)
        top = 0.5 * (J00 + J11) + np.sqrt(0.25 * (J00 - J11) ** 2 + J01 ** 2)
        shift = np.where(top >= 0, top + 1e-3 * (np.abs(J00) + np.abs(J11) + 1.0), 0.0)
        A00, A11 = J00 - shift, J11 - shift
        det = A00 * A11 - J01 * J01
        d_mu = -(A11 * ga[:, 0] - J01 * ga[:, 1]) / det
        d_sigma = -(-J01 * ga[:, 0] + A00 * ga[:, 1]) / det
        # keep sigma positive
        limit = np.where(d_sigma < 0, 0.9 * s / np.maximum(-d_sigma, 1e-300), np.inf)
        step = np.minimum(1.0, limit)
        L_old = L[idx]
        done = np.zeros(len(idx), dtype=bool)
        new_m, new_s, new_L = m.copy(), s.copy(), L_old.copy()
        for _ in range(40):
            cand_m = m + step * d_mu
            cand_s = s + step * d_sigma
            cand_L = lognormal_loglik_batch(cand_m, cand_s, Ha, b)
            good = ~done & np.isfinite(cand_L) & (cand_L >= L_old - 1e-12 * np.abs(L_old))
            new_m = np.where(good, cand_m, new_m)
            new_s = np.where(good, cand_s, new_s)
            new_L = np.where(good, cand_L, new_L)
            done |= good
            if done.all():
                break
            step = np.where(done, step, 0.5 * step)
        stalled = ~done
        mu[idx], sigma[idx], L[idx] = new_m, new_s, new_L
        if stalled.any():
            # no ascent step exists at machine precision: stop iterating these rows
            active[idx[stalled]] = False
    g = lognormal_grad_batch(mu, sigma, H, b)
    converged = np.hypot(g[:, 0], g[:, 1]) <= tol * n
    return mu, sigma, L, converged


def _grid_refine_lognormal(h, b, tol):
    """Fallback for one row: coarse grid, Nelder-Mead polish, then Newton again."""
    n = h.sum()
    mu0, s0 = lognormal_start(h, b)
    mus = np.linspace(mu0[0] - 10.0, mu0[0] + 10.0, 81)
    sigmas = np.geomspace(0.05, 20.0, 81)
    M, S = np.meshgrid(mus, sigmas, indexing="ij")
    Hrep = np.broadcast_to(h, (M.size, len(h)))
    with np.errstate(all="ignore"):
        L = lognormal_loglik_batch(M.ravel(), S.ravel(), Hrep, b)
    L = np.where(np.isfinite(L), L, -np.inf)
    best = int(np.argmax(L))
    start = np.array([M.ravel()[best], math.log(S.ravel()[best])])

    def neg(theta):
        with np.errstate(all="ignore"):
            val = lognormal_loglik_batch(theta[:1], np.exp(theta[1:]), h[None, :], b)[0]
        return -val if np.isfinite(val) else np.inf

    res = optimize.minimize(neg, start, method="Nelder-Mead",
                            options={"xatol": 1e-10, "fatol": 1e-12 * n, "maxiter": 4000})
    mu = np.array([res.x[0]])
    sigma = np.array([math.exp(res.x[1])])
    mu, sigma, L, ok = _newton_lognormal(mu, sigma, h[None, :].copy(), b, tol)
    return mu[0], sigma[0], L[0], bool(ok[0]), (start[0], math.exp(start[1]))


def lognormal_mle_batch(H, b, tol=1e-8):
    """Solve the lognormal first-order conditions for each row of ``H``.

    Returns ``(mu, sigma, loglik, ok)``. Rows where Newton fails get a grid
    search plus local refinement; rows that still fail have ``ok = False``.
    """
    H = np.atleast_2d(np.asarray(H, dtype=float))
    mu, sigma = lognormal_start(H, b)
    mu, sigma, L, ok = _newton_lognormal(mu.copy(), sigma.copy(), H, b, tol)
    for r in np.flatnonzero(~ok):
        m, s, l, good, _ = _grid_refine_lognormal(H[r], b, tol)
        if good or l > L[r]:
            mu[r], sigma[r], L[r], ok[r] = m, s, l, good
    ok &= sigma > SIGMA_FLOOR
    return mu, sigma, L, ok


# ----------------------------------------------------------------- public fits


def _r2(y, yhat):
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        raise FitError("R^2 undefined: fewer than 2 distinct log-survival values")
    return 1.0 - float(np.sum((y - yhat) ** 2)) / ss_tot


def _positive_survival_points(t: TruncatedSample):
    sf = survival_array(t.counts)
    keep = sf > 0
    return t.boundaries[keep], np.log(sf[keep])


def r_squared_centered(fit: FitResult, t: TruncatedSample) -> float:
    """Centered R^2 of log model survival against log empirical survival at the boundaries."""
    if fit.s_min != t.s_min:
        raise ValueError(f"fit s_min={fit.s_min} but sample s_min={t.s_min}")
    return _r2_for(fit.params, t)


def _r2_for(params, t):
    b, y = _positive_survival_points(t)
    with np.errstate(divide="ignore"):
        yhat = np.log(np.asarray(survival(params, b), dtype=float))
    return _r2(y, yhat)


def _finish(family, estimator, params, t, warnings=()):
    loglik = log_likelihood(params, t)
    try:
        r2 = _r2_for(params, t)
    except FitError:
        r2 = float("nan")
        warnings = tuple(warnings) + ("r2 undefined",)
    return FitResult(family, estimator, params, loglik, r2, t.s_min, t.n, tuple(warnings))


def fit_pareto_ols(t: TruncatedSample) -> FitResult:
    H = t.counts[None, :]
    k, npts = pareto_ols_batch(H, t.boundaries)
    warnings = []
    if npts[0] < t.n_bins:
        warnings.append(f"OLS used {int(npts[0])} of {t.n_bins} boundaries (zero empirical survival)")
    if not np.isfinite(k[0]):
        raise FitError("OLS needs at least one boundary above s_min with positive survival")
    if not k[0] > 0:
        raise FitError(f"OLS exponent is not positive (k={k[0]:g})")
    return _finish("pareto", "ols", ParetoParams(float(k[0]), t.s_min), t, warnings)


def fit_pareto_mle(t: TruncatedSample, bracket=PARETO_BRACKET) -> FitResult:
    H = t.counts[None, :]
    b = t.boundaries
    k, ok = pareto_mle_batch(H, b, bracket)
    if not ok[0]:
        f_lo, f_hi = pareto_foc_batch(np.array(bracket), np.vstack([H, H]), b)
        raise FitError(
            f"Pareto FOC has no sign change on k in [{bracket[0]}, {bracket[1]}] "
            f"(FOC values {f_lo:.6g}, {f_hi:.6g}); data are degenerate",
            bracket=list(bracket), foc=[float(f_lo), float(f_hi)],
        )
    warnings = []
    if k[0] > 0.99 * bracket[1] or k[0] < 1.01 * bracket[0]:
        warnings.append("degenerate: k at bracket edge")
    elif t.n - t.counts[0] <= 1:
        warnings.append("degenerate: at most one observation above the first bin")
    return _finish("pareto", "mle", ParetoParams(float(k[0]), t.s_min), t, warnings)


def fit_zipf(t: TruncatedSample) -> FitResult:
    return _finish("zipf", "fixed", ParetoParams.zipf(t.s_min), t)


def fit_lognormal_mle(t: TruncatedSample, verify: bool = True) -> FitResult:
    """Binned lognormal MLE. With ``verify``, the solution is checked against a
    50x50 grid of nearby parameter values."""
    if t.n_bins < LOGNORMAL_MIN_BINS:
        raise FitError(f"lognormal fit needs at least {LOGNORMAL_MIN_BINS} bins, got {t.n_bins}")
    H = t.counts[None, :]
    b = t.boundaries
    mu, sigma, L, ok = lognormal_mle_batch(H, b)
    if not ok[0]:
        if sigma[0] <= SIGMA_FLOOR:
            raise FitError(f"lognormal sigma collapsed to {sigma[0]:.3g}")
        raise FitError("lognormal MLE did not converge",
                       best={"mu": float(mu[0]), "sigma": float(sigma[0]), "loglik": float(L[0])})
    params = LognormalParams(float(mu[0]), float(sigma[0]), t.s_min)
    if verify:
        best = verification_grid_max(params, t)
        if best > L[0]:
            raise FitError("lognormal solution is beaten by a nearby grid point",
                           loglik=float(L[0]), grid_best=float(best))
    return _finish("lognormal", "mle", params, t)


def verification_grid_max(params: LognormalParams, t: TruncatedSample, size=50, rel=0.05) -> float:
    """Largest log-likelihood over a ``size x size`` grid around ``params``."""
    du = rel * max(1.0, abs(params.mu))
    ds = rel * params.sigma
    mus = np.linspace(params.mu - du, params.mu + du, size)
    sigmas = np.linspace(params.sigma - ds, params.sigma + ds, size)
    M, S = np.meshgrid(mus, sigmas, indexing="ij")
    H = np.broadcast_to(t.counts, (M.size, t.n_bins))
    return float(lognormal_loglik_batch(M.ravel(), S.ravel(), H, t.boundaries).max())


FITTERS = {
    ("pareto", "ols"): fit_pareto_ols,
    ("pareto", "mle"): fit_pareto_mle,
    ("zipf", "fixed"): fit_zipf,
    ("lognormal", "mle"): fit_lognormal_mle,
}


def fit(t: TruncatedSample, family: str, estimator: str | None = None) -> FitResult:
    """Dispatch on ``(family, estimator)``; the estimator defaults to the family's usual one."""
    if estimator is None:
        estimator = {"pareto": "mle", "zipf": "fixed", "lognormal": "mle"}.get(family)
    try:
        fn = FITTERS[(family, estimator)]
    except KeyError:
        raise ValueError(f"unsupported family/estimator {family}/{estimator}") from None
    return fn(t)


def refit_batch(family: str, estimator: str, H, b):
    """Refit a batch of count rows; returns ``(params_rows, ok)``.

    ``params_rows`` is ``k`` for Pareto/Zipf and ``(mu, sigma)`` for lognormal.
    """
    H = np.atleast_2d(np.asarray(H, dtype=float))
    if (family, estimator) == ("zipf", "fixed"):
        return np.ones(H.shape[0]), np.ones(H.shape[0], dtype=bool)
    if (family, estimator) == ("pareto", "mle"):
        return pareto_mle_batch(H, b)
    if (family, estimator) == ("pareto", "ols"):
        k, _ = pareto_ols_batch(H, b)
        return k, np.isfinite(k) & (k > 0)
    if (family, estimator) == ("lognormal", "mle"):
        mu, sigma, _, ok = lognormal_mle_batch(H, b)
        return np.stack([mu, sigma], axis=1), ok
    raise ValueError(f"unsupported family/estimator {family}/{estimator}")


def model_survival_batch(family: str, params_rows, b):
    """Model survival at boundaries ``b`` for each row of fitted parameters."""
    if family in ("pareto", "zipf"):
        k = np.asarray(params_rows, dtype=float)[:, None]
        return np.exp(k * np.log(b[0] / b))
    mu, sigma = params_rows[:, :1], params_rows[:, 1:]
    z = lognormal_z(mu, sigma, b[0], b[1:])
    return np.concatenate([np.ones((len(mu), 1)), 0.5 * special.erfc(z)], axis=1)
