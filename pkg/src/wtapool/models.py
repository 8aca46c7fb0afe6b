"""
Data models for wtapool.

Domain types shared by the probability, game, analytic and solver modules,
plus the wire documents the CLI emits. Indices are 0-based throughout the
library; serialized documents use the 1-based labels of the text.
"""
import math
from enum import Enum
from typing import Dict, FrozenSet, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from scipy.stats import entropy

from wtapool.errors import DomainError

PROB_SUM_TOL = 1e-12
SIMPLEX_TOL = 1e-9
SEED_BOUND = 2 ** 64


class Rates(BaseModel):
    """Poisson rates of the m processes, in events per time unit."""

    model_config = ConfigDict(frozen=True)

    lambdas: Tuple[float, ...] = Field(min_length=2, description="Rate of each process")

    @field_validator("lambdas")
    @classmethod
    def _positive_finite(cls, value):
        for lam in value:
            if not math.isfinite(lam) or lam <= 0:
                raise ValueError(f"rates must be positive and finite, got {lam}")
        return value

    @classmethod
    def coerce(cls, value) -> "Rates":
        """Build Rates from a Rates instance or any sequence of floats."""
        if isinstance(value, Rates):
            return value
        try:
            return cls(lambdas=tuple(float(v) for v in value))
        except (ValidationError, TypeError) as e:
            raise DomainError(f"Invalid rates {value!r}: {e}") from e

    @property
    def m(self) -> int:
        return len(self.lambdas)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.lambdas, dtype=float)


class ComparisonProbs(BaseModel):
    """Outcome probabilities for two independent Poisson counts Y_a, Y_b."""

    p_gt: float = Field(ge=0.0, le=1.0, description="prob(Y_a > Y_b)")
    p_lt: float = Field(ge=0.0, le=1.0, description="prob(Y_a < Y_b)")
    p_eq: float = Field(ge=0.0, le=1.0, description="prob(Y_a = Y_b)")
    odds_ratio: float = Field(description="p_gt / p_lt")

    @model_validator(mode="after")
    def _normalized(self):
        total = self.p_gt + self.p_lt + self.p_eq
        if abs(total - 1.0) > PROB_SUM_TOL:
            raise ValueError(f"comparison probabilities sum to {total!r}")
        return self


class OrderedPartition(BaseModel):
    """Ranking of the options: disjoint non-empty blocks, best block first."""

    model_config = ConfigDict(frozen=True)

    blocks: Tuple[FrozenSet[int], ...] = Field(min_length=1, description="Blocks, best first")

    @field_validator("blocks")
    @classmethod
    def _is_partition(cls, value):
        seen = set()
        for block in value:
            if not block:
                raise ValueError("ordered partitions cannot contain empty blocks")
            if seen & block:
                raise ValueError(f"blocks overlap on {sorted(seen & block)}")
            seen |= block
        if seen != set(range(len(seen))):
            raise ValueError(f"blocks must cover 0..{len(seen) - 1}, got {sorted(seen)}")
        return value

    @property
    def m(self) -> int:
        return sum(len(block) for block in self.blocks)

    def winning_set(self, chosen: FrozenSet[int]) -> FrozenSet[int]:
        """Chosen options in the first block that contains any chosen option."""
        for block in self.blocks:
            hit = block & chosen
            if hit:
                return hit
        raise DomainError(f"chosen set {sorted(chosen)} is outside the ground set")


class OutcomeDistribution(BaseModel):
    """Finite-support distribution over ordered partitions of the options."""

    support: List[Tuple[OrderedPartition, float]] = Field(min_length=1)

    @model_validator(mode="after")
    def _check_support(self):
        sizes = {partition.m for partition, _ in self.support}
        if len(sizes) != 1:
            raise ValueError(f"partitions over different ground sets: sizes {sorted(sizes)}")
        if any(weight <= 0 for _, weight in self.support):
            raise ValueError("outcome weights must be positive")
        total = math.fsum(weight for _, weight in self.support)
        if abs(total - 1.0) > PROB_SUM_TOL:
            raise ValueError(f"outcome weights sum to {total!r}")
        return self

    @property
    def m(self) -> int:
        return self.support[0][0].m

    def weights(self) -> np.ndarray:
        return np.array([weight for _, weight in self.support])

    def weight_of(self, *blocks) -> float:
        """Total weight of the partition given as a sequence of blocks (0 if absent)."""
        target = tuple(frozenset(b) for b in blocks)
        return math.fsum(w for p, w in self.support if p.blocks == target)

    def first_block_probability(self, j: int) -> float:
        """Chance that option j lands in the first block."""
        return math.fsum(w for p, w in self.support if j in p.blocks[0])


class GreedyVerdict(str, Enum):
    UNIQUELY_FAVORITE = "UNIQUELY_FAVORITE"
    UNIQUELY_DEVIATE = "UNIQUELY_DEVIATE"
    INDIFFERENT = "INDIFFERENT"


class GreedyResponse(BaseModel):
    """Best reply of the last agent when every other agent picks the favorite."""

    verdict: GreedyVerdict
    favorite: int = Field(ge=0, description="Option picked by the other n-1 agents")
    deviant: int = Field(ge=0, description="Best alternative to the favorite")
    threshold_gap: float = Field(description="p_gt(deviant) - p_lt(deviant) / (n-1)")

    @model_validator(mode="after")
    def _verdict_matches_gap(self):
        gap = self.threshold_gap
        if (self.verdict is GreedyVerdict.UNIQUELY_DEVIATE and gap <= 0) or \
                (self.verdict is GreedyVerdict.UNIQUELY_FAVORITE and gap >= 0):
            raise ValueError(f"verdict {self.verdict.value} inconsistent with gap {self.threshold_gap!r}")
        return self


def verdict_for_gap(gap: float, tol: float = 1e-12) -> GreedyVerdict:
    if gap > tol:
        return GreedyVerdict.UNIQUELY_DEVIATE
    if gap < -tol:
        return GreedyVerdict.UNIQUELY_FAVORITE
    return GreedyVerdict.INDIFFERENT


class BoundaryPoint(BaseModel):
    """One point of a favorite/underdog boundary curve."""

    n: int = Field(ge=2)
    lambda1: float = Field(gt=0)
    lambda2: Optional[float] = Field(default=None, description="None when the bracket has no sign change")


class TwoAgentBestResponse(BaseModel):
    """Best replies of one agent to each pure choice of the other."""

    responses: Dict[int, List[int]] = Field(description="Opponent choice -> best replies")
    dominant: Optional[List[int]] = Field(default=None, description="Replies optimal against every choice")


class SymmetricEqPolynomial(BaseModel):
    """Payoff-difference polynomial in s(1), divided by prob(Y1 < Y2)."""

    n: int = Field(ge=3)
    c: float = Field(gt=0)
    coeffs: List[float] = Field(description="Power-basis coefficients, constant term first")

    @model_validator(mode="after")
    def _endpoints(self):
        if len(self.coeffs) != self.n:
            raise ValueError(f"expected {self.n} coefficients, got {len(self.coeffs)}")
        at_zero = self.c * (self.n - 1) - 1
        at_one = self.c - (self.n - 1)
        scale = max(1.0, abs(self.c) * self.n)
        if abs(self.evaluate(0.0) - at_zero) > 1e-10 * scale:
            raise ValueError("polynomial value at s=0 is not c(n-1)-1")
        if abs(self.evaluate(1.0) - at_one) > 1e-10 * scale:
            raise ValueError("polynomial value at s=1 is not c-(n-1)")
        return self

    def evaluate(self, s):
        return np.polynomial.polynomial.polyval(s, self.coeffs)


class EquilibriumKind(str, Enum):
    PURE_FAVORITE = "PURE_FAVORITE"
    PURE_UNDERDOG = "PURE_UNDERDOG"
    INTERIOR = "INTERIOR"


class SymmetricEquilibrium(BaseModel):
    """Symmetric equilibrium of a two-option pool, as the weight s1 on option 1."""

    s1: float = Field(ge=0.0, le=1.0)
    kind: EquilibriumKind
    residual: float = Field(description="Polynomial value at s1")
    payoff_gap: Optional[float] = Field(default=None, description="u(1) - u(2) from the payoff oracle")
    is_equilibrium: Optional[bool] = Field(default=None)

    @model_validator(mode="after")
    def _interior(self):
        if self.kind is EquilibriumKind.INTERIOR:
            if not 0.0 < self.s1 < 1.0:
                raise ValueError(f"interior equilibrium at s1={self.s1}")
            if abs(self.residual) >= 1e-9:
                raise ValueError(f"interior residual {self.residual!r} too large")
        return self


class ProbePoint(BaseModel):
    c: float = Field(gt=0)
    s1: Optional[float] = None
    roots: List[float] = Field(default_factory=list)
    root_count: int = 0
    limit_share: float = Field(description="c / (1 + c)")


class ProbeReport(BaseModel):
    """Numerical evidence on uniqueness and monotonicity of s1(c)."""

    n: int
    points: List[ProbePoint]
    unique: bool
    increasing: bool
    findings: List[str] = Field(default_factory=list)


class MixedStrategy(BaseModel):
    """Probability vector over the m options."""

    probs: List[float] = Field(min_length=1)

    @field_validator("probs")
    @classmethod
    def _on_simplex(cls, value):
        if any(not math.isfinite(p) or p < -SIMPLEX_TOL for p in value):
            raise ValueError(f"negative or non-finite probability in {value}")
        total = math.fsum(value)
        if abs(total - 1.0) > SIMPLEX_TOL:
            raise ValueError(f"probabilities sum to {total!r}")
        return [max(p, 0.0) for p in value]

    @classmethod
    def from_array(cls, probs) -> "MixedStrategy":
        return cls(probs=[float(p) for p in probs])

    @classmethod
    def pure(cls, m: int, j: int) -> "MixedStrategy":
        probs = [0.0] * m
        probs[j] = 1.0
        return cls(probs=probs)

    @classmethod
    def uniform(cls, m: int) -> "MixedStrategy":
        return cls(probs=[1.0 / m] * m)

    @property
    def m(self) -> int:
        return len(self.probs)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=float)


class EquilibriumResult(BaseModel):
    """Strategy profile with its certified regret and solver diagnostics."""

    profile: List[MixedStrategy] = Field(min_length=2)
    regret: float = Field(ge=-1e-10, description="Max gain from a unilateral pure deviation")
    symmetric: bool
    iterations: int = Field(ge=0)
    seed: int = Field(ge=0, lt=SEED_BOUND)
    converged: bool = True

    @model_validator(mode="after")
    def _symmetric_profile(self):
        if self.symmetric:
            first = self.profile[0].as_array()
            for strategy in self.profile[1:]:
                if np.max(np.abs(strategy.as_array() - first)) > SIMPLEX_TOL:
                    raise ValueError("profile flagged symmetric but strategies differ")
        return self

    def agent_average(self) -> np.ndarray:
        """Probability that a uniformly random agent picks each option."""
        return np.mean([s.as_array() for s in self.profile], axis=0)


class DiversificationMetric(BaseModel):
    """Ensemble average, over runs and agents, of the chance each option is picked."""

    avg_probs: List[float]
    t: int = Field(ge=1, description="Runs aggregated")
    per_run: List[List[float]]
    dispersion: List[float] = Field(description="Per-option standard deviation across runs")
    seed: int = Field(ge=0, lt=SEED_BOUND)
    requested: int = Field(ge=1, description="Runs attempted")

    @model_validator(mode="after")
    def _normalized(self):
        if abs(math.fsum(self.avg_probs) - 1.0) > 1e-8:
            raise ValueError("average probabilities do not sum to 1")
        if len(self.per_run) != self.t:
            raise ValueError(f"expected {self.t} runs, got {len(self.per_run)}")
        return self

    def entropy(self) -> float:
        """Shannon entropy (nats) of the averaged choice distribution."""
        return float(entropy(self.avg_probs))


class SweepConfig(BaseModel):
    """Parameters of a diversification sweep over agent and process counts."""

    n_range: List[int] = Field(min_length=1)
    m_range: List[int] = Field(min_length=1)
    k: float = Field(gt=0.0, lt=1.0, description="Geometric rate decay")
    offset: float = Field(default=0.0, description="Additive rate shift")
    t: int = Field(default=100, ge=1)
    seed: int = Field(default=0, ge=0, lt=SEED_BOUND)
    samples: Optional[int] = Field(default=None, description="Monte Carlo samples; None for exact tensors")
    exact: bool = True
    layout: Literal["grid", "lines"] = "grid"
    out: Optional[str] = None

    @field_validator("n_range", "m_range")
    @classmethod
    def _at_least_two(cls, value):
        if any(v < 2 for v in value):
            raise ValueError(f"agent and process counts must be >= 2, got {value}")
        return sorted(set(value))

    @model_validator(mode="after")
    def _positive_rates(self):
        for j in range(max(self.m_range)):
            if self.k ** j + self.offset <= 0:
                raise ValueError(f"rate k^{j} + offset = {self.k ** j + self.offset} is not positive")
        if not self.exact and self.samples is None:
            raise ValueError("samples are required when exact is false")
        return self

    def rates_for(self, m: int) -> Rates:
        return Rates(lambdas=tuple(self.k ** j + self.offset for j in range(m)))

    def cells(self) -> List[Tuple[int, int]]:
        """(n, m) pairs to evaluate, in output order."""
        if self.layout == "grid":
            return [(n, m) for m in self.m_range for n in self.n_range]
        n0, m0 = self.n_range[0], self.m_range[0]
        return [(n, m0) for n in self.n_range] + [(n0, m) for m in self.m_range if m != m0]


class PayoffEntry(BaseModel):
    counts: List[int]
    payoffs: Dict[str, float] = Field(description="1-based option label -> expected payoff")
    stderr: Optional[Dict[str, float]] = None


class PayoffTensorDocument(BaseModel):
    """Wire form of a payoff tensor."""

    n: int = Field(ge=2)
    m: int = Field(ge=2)
    entries: List[PayoffEntry]
    config: Optional[dict] = None
