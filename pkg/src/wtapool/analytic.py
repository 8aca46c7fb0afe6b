"""
Closed-form results for Poisson-picking and winners-take-all pools.

Covers the reply of one agent to greedy opponents (and the favorite/underdog
boundary curves it induces), two-agent best responses, and symmetric
equilibria of two-option pools. The latter are the odd-multiplicity roots in
(0, 1) of a polynomial in s1 whose coefficients depend only on the odds
ratio c; roots are isolated exactly with a Sturm sequence over rationals.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import bisect

from wtapool.config import settings
from wtapool.dist import compare
from wtapool.errors import ConsistencyError, DomainError
from wtapool.game import PayoffTensor, deviation_payoffs, exact_payoff_tensor, two_outcome_distribution
from wtapool.models import (
    BoundaryPoint,
    EquilibriumKind,
    GreedyResponse,
    OutcomeDistribution,
    ProbePoint,
    ProbeReport,
    Rates,
    SymmetricEqPolynomial,
    SymmetricEquilibrium,
    TwoAgentBestResponse,
    verdict_for_gap,
)

logger = logging.getLogger(__name__)

Poly = List[Fraction]


# ---------------------------------------------------------------------------
# Greedy opponents
# ---------------------------------------------------------------------------

def greedy_best_response(n: int, rates, favorite: int) -> GreedyResponse:
    """
    Reply of the last agent when the other n-1 agents all pick ``favorite``.

    Only the best alternative matters: it is the highest-rate process other
    than the favorite (lowest index on ties). Deviating is uniquely optimal
    when prob(Y_dev > Y_fav) > prob(Y_dev < Y_fav) / (n - 1).
    """
    rates = Rates.coerce(rates)
    if n < 2:
        raise DomainError(f"a pool needs at least two agents, got {n}")
    if not 0 <= favorite < rates.m:
        raise DomainError(f"favorite {favorite} outside 0..{rates.m - 1}")
    if rates.lambdas[favorite] < max(rates.lambdas):
        raise DomainError(f"process {favorite} does not have the highest rate in {rates.lambdas}")

    others = [j for j in range(rates.m) if j != favorite]
    deviant = max(others, key=lambda j: (rates.lambdas[j], -j))
    probs = compare(rates.lambdas[deviant], rates.lambdas[favorite])
    gap = probs.p_gt - probs.p_lt / (n - 1)
    return GreedyResponse(
        verdict=verdict_for_gap(gap, settings.indifference_tol),
        favorite=favorite,
        deviant=deviant,
        threshold_gap=gap,
    )


def greedy_best_response_general(n: int, outcome: OutcomeDistribution) -> GreedyResponse:
    """Greedy-opponent reply for a general two-option winners-take-all pool."""
    if outcome.m != 2:
        raise DomainError(f"general greedy analysis needs two options, got {outcome.m}")
    if n < 2:
        raise DomainError(f"a pool needs at least two agents, got {n}")
    favorite = 0 if outcome.first_block_probability(0) >= outcome.first_block_probability(1) else 1
    deviant = 1 - favorite
    upset = outcome.weight_of({deviant}, {favorite})
    expected = outcome.weight_of({favorite}, {deviant})
    gap = upset - expected / (n - 1)
    return GreedyResponse(
        verdict=verdict_for_gap(gap, settings.indifference_tol),
        favorite=favorite,
        deviant=deviant,
        threshold_gap=gap,
    )


def odds_ratio_from_outcome(outcome: OutcomeDistribution) -> float:
    """c = prob(X = {1}{2}) / prob(X = {2}{1}) for a two-option pool."""
    if outcome.m != 2:
        raise DomainError(f"odds ratio needs two options, got {outcome.m}")
    upset = outcome.weight_of({1}, {0})
    if upset == 0:
        return math.inf
    return outcome.weight_of({0}, {1}) / upset


def _boundary_point(n: int, lambda1: float) -> BoundaryPoint:
    def gap(lambda2: float) -> float:
        probs = compare(lambda2, lambda1)
        return probs.p_gt - probs.p_lt / (n - 1)

    low, high = lambda1 * 1e-9, lambda1
    g_low, g_high = gap(low), gap(high)
    if np.sign(g_low) == np.sign(g_high) or g_low == 0 or g_high == 0:
        logger.debug(f"No boundary for n={n}, lambda1={lambda1}: gap {g_low:.3e} .. {g_high:.3e}")
        return BoundaryPoint(n=n, lambda1=lambda1, lambda2=None)
    root = bisect(gap, low, high, xtol=settings.bisection_xtol)
    return BoundaryPoint(n=n, lambda1=lambda1, lambda2=float(root))


def boundary_curve(n: int, lambda1_grid: Sequence[float], workers: Optional[int] = None) -> List[BoundaryPoint]:
    """
    Favorite/underdog boundary: for each lambda1, the lambda2 at which
    prob(Y2 > Y1) = prob(Y2 < Y1) / (n - 1).

    For n = 2 the boundary is the diagonal.
    """
    if n < 2:
        raise DomainError(f"a pool needs at least two agents, got {n}")
    grid = [float(x) for x in lambda1_grid]
    if any(not math.isfinite(x) or x <= 0 for x in grid):
        raise DomainError("lambda1 grid values must be positive and finite")
    if n == 2:
        return [BoundaryPoint(n=2, lambda1=x, lambda2=x) for x in grid]
    with ThreadPoolExecutor(max_workers=workers or settings.ensemble_workers) as executor:
        return list(executor.map(lambda x: _boundary_point(n, x), grid))


# ---------------------------------------------------------------------------
# Two agents
# ---------------------------------------------------------------------------

def two_agent_best_response(tensor: PayoffTensor, tol: Optional[float] = None) -> TwoAgentBestResponse:
    """Best replies to each pure choice of the other agent in a two-agent pool."""
    if tensor.n != 2:
        raise DomainError(f"two-agent best responses need n=2, got n={tensor.n}")
    tol = settings.indifference_tol if tol is None else tol
    responses = {}
    for k in range(tensor.m):
        values = []
        for j in range(tensor.m):
            counts = [0] * tensor.m
            counts[j] += 1
            counts[k] += 1
            values.append(tensor.payoff(counts, j))
        best = max(values)
        responses[k] = [j for j, v in enumerate(values) if v >= best - tol]

    common = set.intersection(*(set(r) for r in responses.values()))
    return TwoAgentBestResponse(responses=responses, dominant=sorted(common) if common else None)


# ---------------------------------------------------------------------------
# Two options, n >= 3 agents
# ---------------------------------------------------------------------------

def _equilibrium_poly(n: int, c: Fraction) -> Poly:
    """Exact power-basis coefficients (constant first) of the payoff-difference polynomial."""
    coeffs = [Fraction(0)] * n

    def add(weight: Fraction, k: int, r: int):
        # weight * s^k * (1 - s)^r
        for i in range(r + 1):
            coeffs[k + i] += weight * math.comb(r, i) * (-1) ** i

    for k in range(1, n - 1):
        add(math.comb(n - 1, k) * (c * n / (k + 1) - Fraction(n, n - k)), k, n - 1 - k)
    add(c * (n - 1) - 1, 0, n - 1)
    add(c - (n - 1), n - 1, 0)
    return coeffs


def _trim(p: Poly) -> Poly:
    p = list(p)
    while len(p) > 1 and p[-1] == 0:
        p.pop()
    return p


def _evaluate(p: Poly, x: Fraction) -> Fraction:
    value = Fraction(0)
    for coeff in reversed(p):
        value = value * x + coeff
    return value


def _derivative(p: Poly) -> Poly:
    return _trim([i * p[i] for i in range(1, len(p))] or [Fraction(0)])


def _remainder(a: Poly, b: Poly) -> Poly:
    a = _trim(a)
    b = _trim(b)
    while len(a) >= len(b) and any(a):
        factor = a[-1] / b[-1]
        shift = len(a) - len(b)
        for i, coeff in enumerate(b):
            a[shift + i] -= factor * coeff
        a = _trim(a[:-1] if a[-1] == 0 and len(a) > 1 else a)
    return a


def _sturm_sequence(p: Poly) -> List[Poly]:
    sequence = [_trim(p), _derivative(p)]
    while len(sequence[-1]) > 1 or sequence[-1][0] != 0:
        rem = _remainder(sequence[-2], sequence[-1])
        if not any(rem):
            break
        sequence.append([-coeff for coeff in rem])
        if len(rem) == 1:
            break
    return sequence


def _sign_changes(sequence: List[Poly], x: Fraction) -> int:
    signs = [v > 0 for v in (_evaluate(q, x) for q in sequence) if v != 0]
    return sum(1 for a, b in zip(signs, signs[1:]) if a != b)


def _split_point(p: Poly, low: Fraction, high: Fraction) -> Fraction:
    """A point strictly inside (low, high) where p does not vanish."""
    for num, den in ((1, 2), (1, 3), (2, 3), (1, 5), (4, 5)):
        x = low + (high - low) * Fraction(num, den)
        if _evaluate(p, x) != 0:
            return x
    raise ConsistencyError(f"polynomial vanishes on every split point of ({low}, {high})")


def _isolate_roots(p: Poly, low: Fraction, high: Fraction) -> List[Tuple[Fraction, Fraction]]:
    """Intervals (a, b), with p(a), p(b) non-zero, each holding exactly one distinct root."""
    sequence = _sturm_sequence(p)
    pending = [(low, high)]
    isolated = []
    while pending:
        a, b = pending.pop()
        count = _sign_changes(sequence, a) - _sign_changes(sequence, b)
        if count == 0:
            continue
        if count == 1:
            isolated.append((a, b))
            continue
        mid = _split_point(p, a, b)
        pending.extend([(mid, b), (a, mid)])
    return sorted(isolated)


def _refine(p: Poly, a: Fraction, b: Fraction, xtol: float) -> float:
    """Exact bisection of a strict sign change down to width xtol."""
    sign_a = _evaluate(p, a) > 0
    while b - a > xtol:
        mid = (a + b) / 2
        value = _evaluate(p, mid)
        if value == 0:
            return float(mid)
        if (value > 0) == sign_a:
            a = mid
        else:
            b = mid
    return float((a + b) / 2)


def _odd_multiplicity_roots(p: Poly, xtol: float) -> List[float]:
    """Roots in (0, 1) across which p strictly changes sign."""
    roots = []
    for a, b in _isolate_roots(p, Fraction(0), Fraction(1)):
        if (_evaluate(p, a) > 0) != (_evaluate(p, b) > 0):
            roots.append(_refine(p, a, b, xtol))
        else:
            logger.debug(f"Even-multiplicity root in ({float(a)}, {float(b)}) skipped")
    return roots


def _check_two_option_args(n: int, c: float):
    if n < 3:
        raise DomainError(f"two-option symmetric analysis needs n >= 3, got {n}")
    if not math.isfinite(c) or c <= 0:
        raise DomainError(f"odds ratio must be positive and finite, got {c}")


def symmetric_eq_polynomial(n: int, c: float) -> SymmetricEqPolynomial:
    """
    Polynomial in s1 whose sign is that of u(option 1) - u(option 2) when
    everyone else plays (s1, 1 - s1), divided by prob(Y1 < Y2).
    """
    _check_two_option_args(n, c)
    coeffs = _equilibrium_poly(n, Fraction(c))
    return SymmetricEqPolynomial(n=n, c=c, coeffs=[float(x) for x in coeffs])


def verify_symmetric_root(n: int, c: float, s1: float) -> float:
    """
    u(option 1) - u(option 2) against n-1 opponents playing (s1, 1 - s1),
    computed through an exact payoff tensor of the tie-free pool with odds c.
    """
    tensor = exact_payoff_tensor(n, two_outcome_distribution(c))
    payoffs = deviation_payoffs(tensor, [s1, 1.0 - s1])
    return float(payoffs[0] - payoffs[1])


def _attach_verification(n: int, c: float, eq: SymmetricEquilibrium, tol: float) -> SymmetricEquilibrium:
    gap = verify_symmetric_root(n, c, eq.s1)
    if eq.kind is EquilibriumKind.PURE_FAVORITE:
        ok = gap >= -tol
    elif eq.kind is EquilibriumKind.PURE_UNDERDOG:
        ok = gap <= tol
    else:
        ok = abs(gap) < tol
    if not ok:
        logger.warning(f"Root s1={eq.s1:.12f} (n={n}, c={c}) fails the payoff check: gap={gap:.3e}")
    return eq.model_copy(update={"payoff_gap": gap, "is_equilibrium": ok})


def symmetric_equilibria_two_process(n: int, c: float, verify: bool = True) -> List[SymmetricEquilibrium]:
    """
    Symmetric equilibria of a two-option pool with n >= 3 agents and odds ratio c.

    Outside 1/(n-1) < c < n-1 everyone picks the same option. Inside, the
    candidates are the odd-multiplicity roots of the polynomial in (0, 1);
    each is refined to ``root_xtol`` and, when ``verify`` is set, checked
    against the payoff oracle (non-equilibrium roots are flagged, not dropped).
    """
    _check_two_option_args(n, c)
    exact_c = Fraction(c)
    poly = _equilibrium_poly(n, exact_c)
    float_poly = [float(x) for x in poly]

    def residual(s1: float) -> float:
        return float(np.polynomial.polynomial.polyval(s1, float_poly))

    if exact_c >= n - 1:
        found = [SymmetricEquilibrium(s1=1.0, kind=EquilibriumKind.PURE_FAVORITE, residual=residual(1.0))]
    elif exact_c * (n - 1) <= 1:
        found = [SymmetricEquilibrium(s1=0.0, kind=EquilibriumKind.PURE_UNDERDOG, residual=residual(0.0))]
    else:
        roots = _odd_multiplicity_roots(poly, settings.root_xtol)
        if not roots:
            raise ConsistencyError(
                f"no odd-multiplicity root in (0, 1) for n={n}, c={c}, although the "
                "polynomial changes sign between the endpoints"
            )
        found = [SymmetricEquilibrium(s1=s1, kind=EquilibriumKind.INTERIOR, residual=residual(s1)) for s1 in roots]

    if verify:
        found = [_attach_verification(n, c, eq, settings.verify_tol) for eq in found]
    return found


def closed_form_s1(n: int, c: float) -> float:
    """
    Symmetric equilibrium weight on option 1 from the closed forms for n = 3
    and n = 4.
    """
    _check_two_option_args(n, c)
    if n not in (3, 4):
        raise DomainError(f"closed forms exist for n=3 and n=4 only, got n={n}")
    if c >= n - 1:
        return 1.0
    if c * (n - 1) <= 1:
        return 0.0
    if n == 3:
        return (2 * c - 1) / (c + 1)
    # Root in (0, 1) of (c-1) s^2 - (3c+1) s + (3c-1), in the form that stays finite at c = 1
    discriminant = (3 * c + 1) ** 2 - 4 * (c - 1) * (3 * c - 1)
    return 2 * (3 * c - 1) / ((3 * c + 1) + math.sqrt(discriminant))


def s1_curve(n: int, c_grid: Sequence[float], workers: Optional[int] = None) -> List[ProbePoint]:
    """Symmetric equilibrium weight on option 1 across a grid of odds ratios."""

    def _point(c: float) -> ProbePoint:
        roots = [eq.s1 for eq in symmetric_equilibria_two_process(n, c, verify=False)]
        return ProbePoint(
            c=c,
            s1=roots[0] if len(roots) == 1 else None,
            roots=roots,
            root_count=len(roots),
            limit_share=c / (1.0 + c),
        )

    with ThreadPoolExecutor(max_workers=workers or settings.ensemble_workers) as executor:
        return list(executor.map(_point, [float(c) for c in c_grid]))


def conjecture_probe(n: int, c_grid: Sequence[float], workers: Optional[int] = None) -> ProbeReport:
    """
    Evidence on whether the interior symmetric equilibrium is unique and
    strictly increasing in c. Violations are reported as findings.
    """
    if n < 3:
        raise DomainError(f"probe needs n >= 3, got {n}")
    grid = [float(c) for c in c_grid]
    if not grid:
        raise DomainError("c grid is empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise DomainError("c grid must be strictly increasing")
    if grid[0] * (n - 1) <= 1 or grid[-1] >= n - 1:
        raise DomainError(f"c grid must lie strictly inside (1/{n - 1}, {n - 1})")

    points = s1_curve(n, grid, workers=workers)
    findings = []
    for point in points:
        if point.root_count != 1:
            findings.append(f"c={point.c}: {point.root_count} interior equilibria {point.roots}")
    unique = not findings

    increasing = True
    for prev, cur in zip(points, points[1:]):
        if prev.s1 is not None and cur.s1 is not None and cur.s1 <= prev.s1:
            increasing = False
            findings.append(f"s1 not increasing between c={prev.c} ({prev.s1}) and c={cur.c} ({cur.s1})")

    for finding in findings:
        logger.warning(f"Probe n={n}: {finding}")
    logger.info(f"Probe n={n}: {len(points)} points, unique={unique}, increasing={increasing}")
    return ProbeReport(n=n, points=points, unique=unique, increasing=increasing, findings=findings)
