"""One-sided paired Wilcoxon signed-rank test with exact enumeration of sign patterns."""

from __future__ import annotations

import numpy as np
from scipy.stats import rankdata, wilcoxon

from ..errors import UndefinedMetricError

EXACT_LIMIT = 20


def signed_rank_statistic(diffs: np.ndarray) -> tuple[float, np.ndarray]:
    """W+ and the average ranks of |d| after zeros are discarded."""

    d = np.asarray(diffs, dtype=np.float64)
    d = d[d != 0.0]
    if d.size == 0:
        raise UndefinedMetricError("Every paired difference is zero.")
    ranks = rankdata(np.abs(d))
    return float(ranks[d > 0].sum()), ranks


def wilcoxon_one_sided(diffs) -> float:
    """p-value for the alternative that method A beats method B (diffs = A - B).

    Up to ``EXACT_LIMIT`` non-zero differences every sign assignment is enumerated;
    beyond that the normal approximation from scipy is used.
    """

    observed, ranks = signed_rank_statistic(np.asarray(diffs, dtype=np.float64))
    n = ranks.size
    if n > EXACT_LIMIT:
        d = np.asarray(diffs, dtype=np.float64)
        return float(wilcoxon(d[d != 0.0], alternative="greater", method="approx").pvalue)
    patterns = (np.arange(2**n)[:, None] >> np.arange(n)) & 1
    totals = patterns @ ranks
    return float(np.mean(totals >= observed - 1e-9))
