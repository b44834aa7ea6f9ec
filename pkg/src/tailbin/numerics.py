"""Special functions, bracketed root finding and seeded multinomial sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

RNG_ALGORITHM = "numpy.PCG64 via SeedSequence(seed, spawn_key=(stream_id,))"
DEFAULT_ROOT_TOL = 1e-10


class RootBracketError(ValueError):
    """The function does not change sign on the given bracket."""

    def __init__(self, message, f_lo=None, f_hi=None):
        super().__init__(message)
        self.f_lo = f_lo
        self.f_hi = f_hi


def erf(z):
    return special.erf(z) if np.ndim(z) else math.erf(float(z))


def erfc(z):
    return special.erfc(z) if np.ndim(z) else math.erfc(float(z))


def erf_inv(p):
    p = float(p)
    if not abs(p) < 1.0:
        raise ValueError(f"erf_inv needs |p| < 1, got {p}")
    x = float(special.erfinv(p))
    # one Newton polish step against math.erf
    return x - (math.erf(x) - p) / (2.0 / math.sqrt(math.pi) * math.exp(-x * x))


def solve_root_bracketed(f, lo: float, hi: float, tol: float = DEFAULT_ROOT_TOL) -> float:
    """Root of a continuous scalar ``f`` on ``[lo, hi]`` (Brent's method, bisection-safeguarded)."""
    f_lo, f_hi = f(lo), f(hi)
    if f_lo == 0.0:
        return float(lo)
    if f_hi == 0.0:
        return float(hi)
    if np.sign(f_lo) == np.sign(f_hi):
        raise RootBracketError(
            f"no sign change on [{lo}, {hi}]: f(lo)={f_lo:.6g}, f(hi)={f_hi:.6g}", f_lo, f_hi
        )
    return float(optimize.brentq(f, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=500))


def bisect_many(f, lo, hi, tol: float = DEFAULT_ROOT_TOL):
    """Vectorized bisection for a batch of decreasing-or-increasing scalar problems.

    ``f`` maps an array of ``x`` (one per problem) to an array of values. Returns
    ``(roots, ok)`` where ``ok`` marks problems that had a sign change; roots of
    the others are ``nan``.
    """
    lo0, hi0 = np.broadcast_arrays(np.asarray(lo, dtype=float), np.asarray(hi, dtype=float))
    f_lo, f_hi = f(lo0), f(hi0)
    ok = (np.sign(f_lo) != np.sign(f_hi)) | (f_lo == 0) | (f_hi == 0)
    # orient so that f(neg) < 0 <= f(pos)
    flip = f_lo > 0
    neg_end, pos_end = np.where(flip, hi0, lo0), np.where(flip, lo0, hi0)
    width = float(np.max(np.abs(hi0 - lo0))) if lo0.size else 0.0
    n_iter = int(np.ceil(np.log2(max(width, tol) / tol))) + 1
    for _ in range(n_iter):
        mid = 0.5 * (neg_end + pos_end)
        below = f(mid) < 0
        neg_end = np.where(below, mid, neg_end)
        pos_end = np.where(below, pos_end, mid)
    roots = 0.5 * (neg_end + pos_end)
    roots = np.where(f_lo == 0, lo0, np.where(f_hi == 0, hi0, roots))
    return np.where(ok, roots, np.nan), ok


@dataclass(frozen=True)
class RngStream:
    """Independent random stream ``stream_id`` derived from a master ``seed``."""

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=int(self.seed) & (2**64 - 1), spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.PCG64(ss))


def multinomial_sample(rng, n: int, probs) -> np.ndarray:
    """Draw multinomial counts by sequential conditional binomials.

    ``rng`` is an :class:`RngStream` or a numpy ``Generator``.
    """
    probs = np.asarray(probs, dtype=float)
    if n < 0:
        raise ValueError("n must be nonnegative")
    if np.any(probs < 0):
        raise ValueError("probabilities must be nonnegative")
    if abs(probs.sum() - 1.0) > 1e-9:
        raise ValueError(f"probabilities sum to {probs.sum():.12g}, not 1")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    counts = np.zeros(len(probs), dtype=np.int64)
    left, mass = int(n), 1.0
    for i, p in enumerate(probs[:-1]):
        if left == 0:
            break
        q = min(max(p / mass, 0.0), 1.0) if mass > 0 else 0.0
        counts[i] = gen.binomial(left, q)
        left -= counts[i]
        mass -= p
    counts[-1] += left
    return counts
