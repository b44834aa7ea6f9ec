"""Input validation helpers: coerce user input into :class:`BinnedSample`."""

from __future__ import annotations

import numpy as np

from .binned_data import BinnedSample, BinScheme, TruncatedSample, truncate


def check_binned_sample(X, label=None) -> BinnedSample:
    """Accept a BinnedSample, a ``(boundaries, counts)`` pair, a two-column array
    of ``(lower, count)`` rows, or a DataFrame with ``lower`` and ``count`` columns."""
    if isinstance(X, BinnedSample):
        return X
    if isinstance(X, TruncatedSample):
        return X.parent
    if hasattr(X, "columns") and {"lower", "count"} <= set(X.columns):
        return BinnedSample(BinScheme(tuple(X["lower"])), tuple(X["count"]), label or {})
    if isinstance(X, tuple) and len(X) == 2 and np.ndim(X[0]) == 1:
        boundaries, counts = X
        return BinnedSample(BinScheme(tuple(boundaries)), tuple(counts), label or {})
    arr = np.asarray(X)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(
            "expected a BinnedSample, (boundaries, counts) or an array of shape (n_bins, 2); "
            f"got shape {arr.shape}"
        )
    if not np.all(np.equal(np.mod(arr, 1), 0)):
        raise ValueError("boundaries and counts must be integers")
    return BinnedSample(BinScheme(tuple(arr[:, 0].astype(int))), tuple(arr[:, 1].astype(int)),
                        label or {})


def check_truncated(X, s_min: int, min_bins: int = 2) -> TruncatedSample:
    if isinstance(X, TruncatedSample) and X.s_min == s_min:
        if X.n_bins < min_bins:
            raise ValueError(f"{X.n_bins} bins remain above s_min={s_min}; need {min_bins}")
        return X
    return truncate(check_binned_sample(X), s_min, min_bins)


def check_s_min(s_min) -> int:
    if isinstance(s_min, bool) or int(s_min) != s_min or s_min <= 0:
        raise ValueError(f"s_min must be a positive integer, got {s_min!r}")
    return int(s_min)
