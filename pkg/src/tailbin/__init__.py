"""Fit and test Pareto, Zipf and lognormal laws on binned size distributions."""

__version__ = "0.1.0"

from .binned_data import (  # noqa: E402
    BinnedDataError,
    BinnedSample,
    BinScheme,
    TruncatedSample,
    empirical_survival,
    fixture,
    parse_binned_csv,
    to_csv,
    truncate,
)
from .compare import DegenerateComparison, LrtReport, VuongReport, vuong_test, zipf_lrt  # noqa: E402
from .distributions import (  # noqa: E402
    LognormalParams,
    ParetoParams,
    bin_probs,
    discrete_pmf,
    lognormal_survival,
    pareto_survival,
)
from .estimation import (  # noqa: E402
    FitError,
    FitResult,
    fit,
    fit_lognormal_mle,
    fit_pareto_mle,
    fit_pareto_ols,
    fit_zipf,
    log_likelihood,
    r_squared_centered,
)
from .estimators import LognormalEstimator, ParetoEstimator, ZipfEstimator  # noqa: E402
from .gof import GofReport, gof_pvalue, ks_distance  # noqa: E402
