"""
Probability computations for independent Poisson counts.

All masses are evaluated in log space and exponentiated once, at
accumulation time, through ``logsumexp``. Infinite sums over counts are
truncated at a bound where the remaining tail mass of every involved process
is below ``tol``.
"""
import logging
import math
from itertools import combinations
from typing import Dict, FrozenSet, Iterable, Optional

import numpy as np
from scipy.special import gammaln, logsumexp, xlogy
from scipy.stats import poisson

from wtapool.config import settings
from wtapool.errors import DomainError
from wtapool.models import ComparisonProbs, Rates

logger = logging.getLogger(__name__)


def _check_rate(lam: float):
    if not math.isfinite(lam) or lam <= 0:
        raise DomainError(f"Poisson rate must be positive and finite, got {lam}")


def resolve_tol(tol: Optional[float]) -> float:
    tol = settings.tail_tol if tol is None else tol
    if not 0 < tol <= settings.max_tail_tol:
        raise DomainError(f"tol must lie in (0, {settings.max_tail_tol}], got {tol}")
    return tol


def poisson_logpmf(lam: float, y):
    """Log of e^{-lam} lam^y / y!, elementwise over y."""
    _check_rate(lam)
    y = np.asarray(y)
    if np.any(y < 0):
        raise DomainError(f"counts must be non-negative, got {y}")
    return xlogy(y, lam) - lam - gammaln(y + 1)


def poisson_pmf(lam: float, y: int) -> float:
    """Poisson mass at a single count."""
    return float(np.exp(poisson_logpmf(lam, y)))


def truncation_point(rates: Iterable[float], tol: float) -> int:
    """
    Smallest count bound y_max such that prob(Y_i > y_max) < tol / len(rates)
    for every rate. Any truncated sum over counts 0..y_max then misses at
    most ``tol`` of joint tail mass.
    """
    rates = list(rates)
    share = tol / len(rates)
    y_max = 1
    for lam in rates:
        _check_rate(lam)
        bound = int(poisson.isf(share, lam))
        # isf may land one short when the survival function is flat
        while poisson.sf(bound, lam) >= share:
            bound += 1
        y_max = max(y_max, bound)
    return y_max


def _log_tables(lam: float, y: np.ndarray):
    """log pmf(y) and log CDF(y - 1) on the count grid."""
    log_pmf = poisson_logpmf(lam, y)
    log_cdf_below = poisson.logcdf(y - 1, lam)
    return log_pmf, log_cdf_below


def _prob_first_exceeds(lam_x: float, lam_y: float, y: np.ndarray) -> float:
    """prob(Y_x > Y_y) as one log-space sum over the value of Y_x."""
    log_pmf_x, _ = _log_tables(lam_x, y)
    _, log_cdf_y = _log_tables(lam_y, y)
    return float(np.exp(logsumexp(log_pmf_x + log_cdf_y)))


def compare(lambda_a: float, lambda_b: float, tol: Optional[float] = None) -> ComparisonProbs:
    """
    Probabilities that Y_a exceeds, trails or ties Y_b.

    The tie mass and the probability that the lower-rate count exceeds the
    higher-rate one are summed directly; the remaining outcome is the
    complement. Evaluating in this canonical orientation makes
    ``compare(a, b).p_gt == compare(b, a).p_lt`` hold exactly.
    """
    _check_rate(lambda_a)
    _check_rate(lambda_b)
    tol = resolve_tol(tol)
    y = np.arange(truncation_point((lambda_a, lambda_b), tol) + 1)

    log_pmf_a, _ = _log_tables(lambda_a, y)
    log_pmf_b, _ = _log_tables(lambda_b, y)
    p_eq = float(np.exp(logsumexp(log_pmf_a + log_pmf_b)))

    if lambda_a == lambda_b:
        p_gt = p_lt = max(0.0, (1.0 - p_eq) / 2.0)
    else:
        low, high = sorted((lambda_a, lambda_b))
        p_upset = _prob_first_exceeds(low, high, y)
        p_favorite = max(0.0, 1.0 - p_eq - p_upset)
        if lambda_a > lambda_b:
            p_gt, p_lt = p_favorite, p_upset
        else:
            p_gt, p_lt = p_upset, p_favorite

    odds_ratio = p_gt / p_lt if p_lt > 0 else math.inf
    return ComparisonProbs(p_gt=p_gt, p_lt=p_lt, p_eq=p_eq, odds_ratio=odds_ratio)


def argmax_set_distribution(
    rates, chosen: Iterable[int], tol: Optional[float] = None
) -> Dict[FrozenSet[int], float]:
    """
    Distribution of the set of chosen processes attaining the maximum count.

    Args:
        rates: Rates (or sequence of floats) for all m processes
        chosen: Non-empty collection of 0-based process indices
        tol: Residual tail mass tolerance

    Returns:
        Mapping from each non-empty subset S of ``chosen`` to the probability
        that S is exactly the set of chosen processes with the highest count.
    """
    rates = Rates.coerce(rates)
    chosen = sorted(set(chosen))
    if not chosen:
        raise DomainError("chosen set must be non-empty")
    if chosen[0] < 0 or chosen[-1] >= rates.m:
        raise DomainError(f"chosen indices {chosen} outside 0..{rates.m - 1}")
    tol = resolve_tol(tol)
    if len(chosen) == 1:
        return {frozenset(chosen): 1.0}

    lambdas = [rates.lambdas[i] for i in chosen]
    y = np.arange(truncation_point(lambdas, tol) + 1)
    tables = {i: _log_tables(rates.lambdas[i], y) for i in chosen}

    result = {}
    for size in range(1, len(chosen) + 1):
        for subset in combinations(chosen, size):
            log_terms = np.zeros_like(y, dtype=float)
            for i in chosen:
                log_pmf, log_cdf_below = tables[i]
                log_terms = log_terms + (log_pmf if i in subset else log_cdf_below)
            result[frozenset(subset)] = float(np.exp(logsumexp(log_terms)))
    logger.debug(f"argmax distribution over {chosen}: {len(result)} sets, y_max={y[-1]}")
    return result
