"""
Winners-take-all pools and their Poisson-picking specialization.

Every agent stakes one unit and picks an option; a random ordered partition
ranks the options, and the agents whose option lies in the first block
containing any chosen option split the pool. The game is anonymous, so
expected payoffs are stored per count vector (how many agents picked each
option) rather than per agent profile.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from functools import cached_property
from itertools import combinations, combinations_with_replacement, product
from typing import Dict, FrozenSet, Iterator, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from wtapool.config import settings
from wtapool.dist import poisson_logpmf, resolve_tol, truncation_point
from wtapool.errors import CapacityError, DomainError
from wtapool.models import MixedStrategy, OrderedPartition, OutcomeDistribution, Rates

logger = logging.getLogger(__name__)

CountVector = Tuple[int, ...]


def iter_ordered_partitions(m: int) -> Iterator[Tuple[FrozenSet[int], ...]]:
    """Yield every ordered partition of {0..m-1} as a tuple of blocks."""

    def _extend(remaining: Tuple[int, ...]):
        if not remaining:
            yield ()
            return
        for size in range(1, len(remaining) + 1):
            for block in combinations(remaining, size):
                rest = tuple(x for x in remaining if x not in block)
                for tail in _extend(rest):
                    yield (frozenset(block),) + tail

    yield from _extend(tuple(range(m)))


def count_vectors(n: int, m: int) -> np.ndarray:
    """
    All ways n anonymous agents can spread over m options.

    Returns:
        Integer array of shape (C(n+m-1, m-1), m), rows in lexicographic order
    """
    total = math.comb(n + m - 1, m - 1)
    if total > settings.max_count_vectors:
        raise CapacityError(
            f"{total} count vectors for n={n}, m={m} exceeds max_count_vectors="
            f"{settings.max_count_vectors}"
        )
    rows = {
        tuple(np.bincount(combo, minlength=m)) for combo in combinations_with_replacement(range(m), n)
    }
    return np.array(sorted(rows), dtype=int).reshape(-1, m)


def realized_payoffs(profile: Sequence[int], partition: OrderedPartition) -> np.ndarray:
    """
    Net payoff of every agent for one realized ranking.

    Args:
        profile: Option picked by each agent (0-based), length n >= 2
        partition: Realized ranking of the options

    Returns:
        Array of length n: winners get n / #winners - 1, everyone else -1
    """
    choices = np.asarray(profile, dtype=int)
    n = len(choices)
    if n < 2:
        raise DomainError(f"a pool needs at least two agents, got {n}")
    if choices.min() < 0 or choices.max() >= partition.m:
        raise DomainError(f"choices {choices.tolist()} outside 0..{partition.m - 1}")

    winners = partition.winning_set(frozenset(choices.tolist()))
    is_winner = np.isin(choices, list(winners))
    num_winners = int(is_winner.sum())
    if num_winners == n:
        return np.zeros(n)
    return np.where(is_winner, n / num_winners - 1.0, -1.0)


def induced_outcome_distribution(rates, tol: Optional[float] = None) -> OutcomeDistribution:
    """
    Exact distribution of the level-set ranking induced by independent Poisson draws.

    For a ranking (R_1, ..., R_k) the weight is the probability that every
    process in R_l draws a common value y_l with y_1 > y_2 > ... > y_k. This
    is accumulated from the last block upwards, one cumulative log-sum per
    block. Weights are renormalized to absorb the truncated tail (< tol).
    """
    rates = Rates.coerce(rates)
    m = rates.m
    if m > settings.max_exact_processes:
        raise CapacityError(
            f"m={m} exceeds max_exact_processes={settings.max_exact_processes}; "
            "use the Monte Carlo payoff tensor instead"
        )
    tol = resolve_tol(tol)
    y = np.arange(truncation_point(rates.lambdas, tol) + 1)
    log_pmf = np.stack([poisson_logpmf(lam, y) for lam in rates.lambdas])

    support = []
    for blocks in iter_ordered_partitions(m):
        log_acc = None
        for block in reversed(blocks):
            log_term = log_pmf[sorted(block)].sum(axis=0)
            if log_acc is not None:
                log_below = np.concatenate(([-np.inf], np.logaddexp.accumulate(log_acc)[:-1]))
                log_term = log_term + log_below
            log_acc = log_term
        weight = float(np.exp(logsumexp(log_acc)))
        if weight > 0:
            support.append((blocks, weight))

    total = math.fsum(w for _, w in support)
    logger.debug(f"Induced outcome distribution: m={m}, {len(support)} rankings, tail={1 - total:.3e}")
    return OutcomeDistribution(
        support=[(OrderedPartition(blocks=blocks), w / total) for blocks, w in support]
    )


def two_outcome_distribution(c: float) -> OutcomeDistribution:
    """
    Two-option pool without ties where option 1 beats option 2 with odds c.

    prob(X = {1}{2}) = c / (1 + c) and prob(X = {2}{1}) = 1 / (1 + c).
    """
    if not math.isfinite(c) or c <= 0:
        raise DomainError(f"odds ratio must be positive and finite, got {c}")
    first = c / (1.0 + c)
    return OutcomeDistribution(support=[
        (OrderedPartition(blocks=(frozenset({0}), frozenset({1}))), first),
        (OrderedPartition(blocks=(frozenset({1}), frozenset({0}))), 1.0 - first),
    ])


class PayoffTensor:
    """
    Expected payoff of each option for every count vector of an n-agent pool.

    ``payoffs[r, j]`` is the expected net payoff of an agent who picked option
    j when the agents are spread as ``counts[r]``; it is NaN where
    ``counts[r, j] == 0``. Monte Carlo tensors also carry per-entry standard
    errors.
    """

    def __init__(self, n: int, m: int, counts: np.ndarray, payoffs: np.ndarray,
                 stderr: Optional[np.ndarray] = None):
        counts = np.array(counts, dtype=int)
        payoffs = np.array(payoffs, dtype=float)
        if counts.shape != payoffs.shape or counts.shape[1] != m:
            raise DomainError(f"counts {counts.shape} and payoffs {payoffs.shape} disagree with m={m}")
        if np.any(counts.sum(axis=1) != n):
            raise DomainError(f"every count vector must sum to n={n}")
        self.n = n
        self.m = m
        self.counts = counts
        self.payoffs = payoffs
        self.stderr = None if stderr is None else np.array(stderr, dtype=float)
        self._index = {tuple(row): r for r, row in enumerate(counts.tolist())}
        if len(self._index) != len(counts):
            raise DomainError("duplicate count vectors in payoff tensor")

        self.counts.setflags(write=False)
        self.payoffs.setflags(write=False)
        if self.stderr is not None:
            self.stderr.setflags(write=False)

    def __len__(self) -> int:
        return len(self.counts)

    def row_of(self, counts) -> int:
        try:
            return self._index[tuple(int(k) for k in counts)]
        except KeyError:
            raise DomainError(f"count vector {tuple(counts)} not in tensor (n={self.n}, m={self.m})")

    def payoff(self, counts, j: int) -> float:
        """Expected payoff of an agent on option j under the given count vector."""
        row = self.row_of(counts)
        if self.counts[row, j] == 0:
            raise DomainError(f"no agent picked option {j} in {tuple(counts)}")
        return float(self.payoffs[row, j])

    def entries(self) -> Iterator[Tuple[CountVector, Dict[int, float], Optional[Dict[int, float]]]]:
        for r, row in enumerate(self.counts.tolist()):
            present = [j for j, k in enumerate(row) if k > 0]
            payoffs = {j: float(self.payoffs[r, j]) for j in present}
            stderr = None
            if self.stderr is not None:
                stderr = {j: float(self.stderr[r, j]) for j in present}
            yield tuple(row), payoffs, stderr

    def check_invariants(self, tol: float = 1e-10):
        """Raise DomainError unless every entry is zero-sum and bounded below by -1."""
        filled = np.where(self.counts > 0, self.payoffs, 0.0)
        imbalance = np.abs((self.counts * filled).sum(axis=1))
        if imbalance.max() > tol:
            worst = int(imbalance.argmax())
            raise DomainError(f"count vector {tuple(self.counts[worst])} is not zero-sum ({imbalance[worst]:.3e})")
        if np.any(filled < -1.0 - tol):
            raise DomainError("payoff below -1: an agent cannot lose more than its stake")

    @cached_property
    def deviation_table(self) -> "DeviationTable":
        return DeviationTable(self)


def exact_payoff_tensor(n: int, outcome: OutcomeDistribution) -> PayoffTensor:
    """
    Expected payoffs for every count vector, summed over the outcome support.

    For a set of chosen options the winning set under each ranking is fixed,
    so it is computed once per chosen set and shared by all count vectors
    with that support.
    """
    if n < 2:
        raise DomainError(f"a pool needs at least two agents, got {n}")
    m = outcome.m
    counts = count_vectors(n, m)
    weights = outcome.weights()
    partitions = [p for p, _ in outcome.support]
    logger.info(f"Exact payoff tensor: n={n}, m={m}, {len(counts)} count vectors, {len(partitions)} rankings")

    winner_masks: Dict[FrozenSet[int], np.ndarray] = {}
    payoffs = np.full(counts.shape, np.nan)
    for r, k in enumerate(counts):
        chosen = frozenset(np.flatnonzero(k).tolist())
        mask = winner_masks.get(chosen)
        if mask is None:
            mask = np.zeros((len(partitions), m))
            for s, partition in enumerate(partitions):
                mask[s, list(partition.winning_set(chosen))] = 1.0
            winner_masks[chosen] = mask
        num_winners = mask @ k
        per_outcome = n * mask / num_winners[:, None] - 1.0
        expected = weights @ per_outcome
        cols = sorted(chosen)
        payoffs[r, cols] = expected[cols]
    return PayoffTensor(n, m, counts, payoffs)


def _mc_chunk(n: int, lambdas: np.ndarray, counts: np.ndarray, size: int, seed_seq) -> Tuple[np.ndarray, np.ndarray]:
    """Payoff sums and sums of squares over one chunk of joint Poisson draws."""
    generator = np.random.Generator(np.random.Philox(seed_seq))
    draws = generator.poisson(lambdas, size=(size, len(lambdas)))
    sums = np.zeros(counts.shape)
    sums_sq = np.zeros(counts.shape)
    winners: Dict[Tuple[int, ...], np.ndarray] = {}
    for r, k in enumerate(counts):
        cols = tuple(np.flatnonzero(k).tolist())
        win = winners.get(cols)
        if win is None:
            sub = draws[:, cols]
            win = (sub == sub.max(axis=1, keepdims=True)).astype(float)
            winners[cols] = win
        num_winners = win @ k[list(cols)]
        realized = n * win / num_winners[:, None] - 1.0
        sums[r, list(cols)] = realized.sum(axis=0)
        sums_sq[r, list(cols)] = np.square(realized).sum(axis=0)
    return sums, sums_sq


def mc_payoff_tensor(n: int, rates, samples: Optional[int] = None, seed: int = 0,
                     workers: Optional[int] = None) -> PayoffTensor:
    """
    Monte Carlo payoff tensor with per-entry standard errors.

    One pool of joint count draws is shared by every count vector (common
    random numbers). Draws come in fixed-size chunks, each from its own
    Philox stream spawned from ``seed``; chunk results are combined in chunk
    order, so the output is bit-identical regardless of thread scheduling.
    """
    rates = Rates.coerce(rates)
    samples = settings.mc_samples if samples is None else samples
    if samples < settings.mc_min_samples:
        raise DomainError(f"samples must be at least {settings.mc_min_samples}, got {samples}")
    if n < 2:
        raise DomainError(f"a pool needs at least two agents, got {n}")

    counts = count_vectors(n, rates.m)
    chunk = settings.mc_chunk_size
    sizes = [chunk] * (samples // chunk) + ([samples % chunk] if samples % chunk else [])
    streams = np.random.SeedSequence(seed).spawn(len(sizes))
    lambdas = rates.as_array()
    logger.info(f"Monte Carlo payoff tensor: n={n}, m={rates.m}, {samples} samples in {len(sizes)} chunks, seed={seed}")

    with ThreadPoolExecutor(max_workers=workers or settings.mc_workers, thread_name_prefix="mc") as executor:
        results = list(executor.map(lambda job: _mc_chunk(n, lambdas, counts, *job), zip(sizes, streams)))

    sums = np.zeros(counts.shape)
    sums_sq = np.zeros(counts.shape)
    for chunk_sums, chunk_sq in results:
        sums += chunk_sums
        sums_sq += chunk_sq
    mean = sums / samples
    variance = np.maximum(sums_sq - samples * np.square(mean), 0.0) / (samples - 1)
    stderr = np.sqrt(variance / samples)

    present = counts > 0
    return PayoffTensor(n, rates.m, counts, np.where(present, mean, np.nan),
                        stderr=np.where(present, stderr, np.nan))


def as_simplex(strategy, m: int) -> np.ndarray:
    """Validate a mixed strategy (MixedStrategy or sequence) and return it as an array."""
    if isinstance(strategy, MixedStrategy):
        probs = strategy.as_array()
    else:
        probs = np.asarray(strategy, dtype=float)
    if probs.shape != (m,):
        raise DomainError(f"strategy of length {probs.shape} for m={m} options")
    if np.any(~np.isfinite(probs)) or np.any(probs < -settings.simplex_tol) \
            or abs(probs.sum() - 1.0) > settings.simplex_tol:
        raise DomainError(f"strategy {probs.tolist()} is not on the probability simplex")
    return np.clip(probs, 0.0, None)


def opponent_count_distribution(strategies: Sequence[np.ndarray], m: int) -> Dict[CountVector, float]:
    """Distribution of the count vector produced by independent mixed strategies."""
    dist: Dict[CountVector, float] = {tuple([0] * m): 1.0}
    for probs in strategies:
        step: Dict[CountVector, float] = {}
        for counts, q in dist.items():
            for j in np.flatnonzero(probs > 0):
                nxt = list(counts)
                nxt[j] += 1
                key = tuple(nxt)
                step[key] = step.get(key, 0.0) + q * probs[j]
        dist = step
    return dist


def expected_payoff(strategy_profile: Sequence, tensor: PayoffTensor, agent: int) -> float:
    """
    Expected payoff of one agent under independent mixed strategies.

    The other agents' choices are collapsed into a count-vector distribution
    by direct enumeration; the focal agent's option is then added to each
    count vector and looked up in the tensor.
    """
    if len(strategy_profile) != tensor.n:
        raise DomainError(f"profile has {len(strategy_profile)} strategies for n={tensor.n}")
    if not 0 <= agent < tensor.n:
        raise DomainError(f"agent index {agent} outside 0..{tensor.n - 1}")
    strategies = [as_simplex(s, tensor.m) for s in strategy_profile]
    focal = strategies[agent]
    others = strategies[:agent] + strategies[agent + 1:]

    terms = []
    for counts, q in opponent_count_distribution(others, tensor.m).items():
        for j in np.flatnonzero(focal > 0):
            with_focal = list(counts)
            with_focal[j] += 1
            terms.append(q * focal[j] * tensor.payoff(with_focal, j))
    return math.fsum(terms)


class DeviationTable:
    """
    Payoff of each pure option against n-1 opponents, arranged for fast
    evaluation: ``payoff_matrix[j, r]`` is the payoff of option j when the
    opponents are spread as ``opponent_counts[r]``.
    """

    def __init__(self, tensor: PayoffTensor):
        self.n = tensor.n
        self.m = tensor.m
        self.opponent_counts = count_vectors(tensor.n - 1, tensor.m)
        self.multinomial = np.array([
            math.factorial(tensor.n - 1) / math.prod(math.factorial(int(k)) for k in row)
            for row in self.opponent_counts
        ])
        self.payoff_matrix = np.empty((tensor.m, len(self.opponent_counts)))
        for r, row in enumerate(self.opponent_counts):
            for j in range(tensor.m):
                with_focal = row.copy()
                with_focal[j] += 1
                self.payoff_matrix[j, r] = tensor.payoff(with_focal, j)

    def against_symmetric(self, s: np.ndarray) -> np.ndarray:
        """Payoff of each option when all n-1 opponents play s."""
        probs = self.multinomial * np.prod(np.power(s, self.opponent_counts), axis=1)
        return self.payoff_matrix @ probs

    @cached_property
    def _profile_rows(self) -> np.ndarray:
        lookup = {tuple(row): r for r, row in enumerate(self.opponent_counts.tolist())}
        return np.array([
            lookup[tuple(np.bincount(profile, minlength=self.m))]
            for profile in product(range(self.m), repeat=self.n - 1)
        ], dtype=int)

    def against_profile(self, opponents: Sequence[np.ndarray]) -> np.ndarray:
        """Payoff of each option against heterogeneous opponents."""
        if self.m ** (self.n - 1) > settings.max_opponent_profiles:
            dist = opponent_count_distribution(opponents, self.m)
            lookup = {tuple(row): r for r, row in enumerate(self.opponent_counts.tolist())}
            q = np.zeros(len(self.opponent_counts))
            for counts, p in dist.items():
                q[lookup[counts]] = p
            return self.payoff_matrix @ q
        joint = np.asarray(opponents[0], dtype=float)
        for probs in opponents[1:]:
            joint = np.multiply.outer(joint, probs).ravel()
        q = np.bincount(self._profile_rows, weights=joint, minlength=len(self.opponent_counts))
        return self.payoff_matrix @ q


def deviation_payoffs(tensor: PayoffTensor, s) -> np.ndarray:
    """Payoff of each pure option against n-1 opponents all playing s."""
    return tensor.deviation_table.against_symmetric(as_simplex(s, tensor.m))


def payoff_tensor_for_rates(n: int, rates, samples: Optional[int] = None, seed: int = 0,
                            tol: Optional[float] = None) -> PayoffTensor:
    """
    Exact tensor from the induced outcome distribution, or a Monte Carlo
    tensor when ``samples`` is given.
    """
    rates = Rates.coerce(rates)
    if samples is not None:
        return mc_payoff_tensor(n, rates, samples=samples, seed=seed)
    return exact_payoff_tensor(n, induced_outcome_distribution(rates, tol))
