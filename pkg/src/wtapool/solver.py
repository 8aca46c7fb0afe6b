"""
Numerical equilibria of winners-take-all pools.

Symmetric equilibria are searched by multiplicative-weights (mirror descent)
iterations from random simplex starts; asymmetric ones by smoothed best
response dynamics. Both hand near-converged points to a support polish that
solves the indifference system on the current support, and every returned
result carries a regret certificate.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import root
from scipy.special import softmax

from wtapool.config import settings
from wtapool.errors import ConsistencyError, ConvergenceError, DomainError
from wtapool.game import DeviationTable, PayoffTensor, as_simplex, deviation_payoffs, expected_payoff
from wtapool.models import SEED_BOUND, DiversificationMetric, EquilibriumResult, MixedStrategy

logger = logging.getLogger(__name__)

_TINY = np.finfo(float).tiny


def _check_seed(seed: int):
    if not 0 <= seed < SEED_BOUND:
        raise DomainError(f"seed must be a 64-bit unsigned integer, got {seed}")


def _resolve_tol(tol: Optional[float]) -> float:
    tol = settings.solver_tol if tol is None else tol
    if not tol > 0:
        raise DomainError(f"solver tolerance must be positive, got {tol}")
    return tol


def _normalized(probs: np.ndarray) -> np.ndarray:
    probs = np.clip(probs, 0.0, None)
    return probs / probs.sum()


def symmetric_regret(s, tensor: PayoffTensor) -> Tuple[float, np.ndarray]:
    """
    Regret of the symmetric profile where every agent plays s.

    Returns:
        (regret, deviation payoffs) where deviation_payoffs[j] is the
        payoff of pure j against n-1 opponents playing s
    """
    s = _normalized(as_simplex(s, tensor.m))
    dev = deviation_payoffs(tensor, s)
    own = float(s @ dev)
    if abs(own) > settings.zero_sum_tol * tensor.n:
        raise ConsistencyError(f"symmetric profile payoff {own:.3e} is not zero; tensor is not zero-sum")
    return float(dev.max() - own), dev


def profile_regret(profile: Sequence, tensor: PayoffTensor) -> Tuple[float, np.ndarray]:
    """
    Joint regret of an arbitrary profile, evaluated through direct
    expectation over count vectors (independent of the deviation tables the
    dynamics use).

    Returns:
        (max regret over agents, per-agent regret)
    """
    strategies = [as_simplex(s, tensor.m) for s in profile]
    if len(strategies) != tensor.n:
        raise DomainError(f"profile has {len(strategies)} strategies for n={tensor.n}")
    regrets = np.empty(tensor.n)
    for i in range(tensor.n):
        own = expected_payoff(strategies, tensor, i)
        best = -math.inf
        for j in range(tensor.m):
            pure = MixedStrategy.pure(tensor.m, j).as_array()
            best = max(best, expected_payoff(strategies[:i] + [pure] + strategies[i + 1:], tensor, i))
        regrets[i] = best - own
    return float(regrets.max()), regrets


# ---------------------------------------------------------------------------
# Symmetric search
# ---------------------------------------------------------------------------

def _polish_symmetric(tensor: PayoffTensor, s: np.ndarray, tol: float) -> Optional[Tuple[np.ndarray, float]]:
    """Solve u(j) = v on the support of s, sum(s) = 1; keep the point only if its regret is below tol."""
    table = tensor.deviation_table
    support = np.flatnonzero(s > settings.support_threshold)

    def residual(x):
        full = np.zeros(tensor.m)
        full[support] = x[:-1]
        dev = table.against_symmetric(full)
        return np.append(dev[support] - x[-1], full.sum() - 1.0)

    # at a symmetric equilibrium the common value is 0
    x0 = np.append(s[support] / s[support].sum(), 0.0)
    solution = root(residual, x0, method="hybr")
    if not solution.success:
        return None
    candidate = np.zeros(tensor.m)
    candidate[support] = solution.x[:-1]
    if candidate.min() < -settings.simplex_tol:
        return None
    candidate = _normalized(candidate)
    regret, _ = symmetric_regret(candidate, tensor)
    return (candidate, regret) if regret < tol else None


def _mirror_descent(tensor: PayoffTensor, s: np.ndarray, tol: float) -> Tuple[np.ndarray, float, int]:
    average = s.copy()
    regret = math.inf
    for k in range(1, settings.max_iterations + 1):
        regret, dev = symmetric_regret(s, tensor)
        if regret < tol:
            return s, regret, k
        if regret < settings.polish_threshold and k % settings.polish_every == 0:
            for candidate in (s, average):
                polished = _polish_symmetric(tensor, candidate, tol)
                if polished is not None:
                    return polished[0], polished[1], k
        s = softmax(np.log(np.maximum(s, _TINY)) + settings.mirror_step * (dev - dev.max()))
        average += (s - average) / (k + 1)
    return s, regret, settings.max_iterations


def find_symmetric_equilibrium(tensor: PayoffTensor, starts: int = 8, seed: int = 0,
                               tol: Optional[float] = None) -> List[EquilibriumResult]:
    """
    Distinct symmetric equilibria reached from ``starts`` random simplex starts.

    Starts are drawn from a unit-concentration Dirichlet. Only points with
    certified regret below ``tol`` are returned, deduplicated at L-infinity
    distance ``dedup_tol``. The list is empty when no start converges; the
    residual regret of every start is then logged at WARNING.
    """
    if starts < 1:
        raise DomainError(f"starts must be >= 1, got {starts}")
    _check_seed(seed)
    tol = _resolve_tol(tol)
    rng = np.random.Generator(np.random.Philox(seed))

    found: List[EquilibriumResult] = []
    residual_regrets = []
    for start in range(starts):
        s, regret, iterations = _mirror_descent(tensor, rng.dirichlet(np.ones(tensor.m)), tol)
        if regret >= tol:
            logger.debug(f"Start {start}: no convergence after {iterations} iterations (regret {regret:.3e})")
            residual_regrets.append(regret)
            continue
        if any(np.max(np.abs(s - r.profile[0].as_array())) < settings.dedup_tol for r in found):
            continue
        strategy = MixedStrategy.from_array(_normalized(s))
        found.append(EquilibriumResult(
            profile=[strategy] * tensor.n, regret=regret, symmetric=True, iterations=iterations, seed=seed,
        ))

    if not found:
        logger.warning(
            f"No symmetric equilibrium from {starts} starts (n={tensor.n}, m={tensor.m}); "
            f"smallest regret {min(residual_regrets):.3e}; per start {[float(f'{r:.3e}') for r in residual_regrets]}"
        )
    else:
        logger.info(f"Found {len(found)} symmetric equilibria from {starts} starts")
    return found


# ---------------------------------------------------------------------------
# Asymmetric dynamics
# ---------------------------------------------------------------------------

def _others(profile: np.ndarray, i: int) -> List[np.ndarray]:
    return [profile[j] for j in range(len(profile)) if j != i]


def _joint_regret(table: DeviationTable, profile: np.ndarray) -> float:
    regret = 0.0
    for i in range(len(profile)):
        dev = table.against_profile(_others(profile, i))
        regret = max(regret, float(dev.max() - profile[i] @ dev))
    return regret


def _settled_supports(table: DeviationTable, profile: np.ndarray) -> Optional[List[np.ndarray]]:
    """
    Each agent's near-best replies, or None while some agent still puts at
    least ``support_threshold`` of its mass outside them.

    Supports come from payoffs rather than from the strategies: smoothed
    responses never reach exact zeros, so a mass-based support would always be
    full and the polish would only ever find fully mixed points.
    """
    supports = []
    for i in range(len(profile)):
        dev = table.against_profile(_others(profile, i))
        support = np.flatnonzero(dev >= dev.max() - settings.support_gap)
        outside = 1.0 - profile[i, support].sum()
        if outside >= settings.support_threshold:
            return None
        supports.append(support)
    return supports


def _polish_profile(table: DeviationTable, profile: np.ndarray, supports: List[np.ndarray],
                    tol: float) -> Optional[np.ndarray]:
    """Per-agent indifference on the given supports, solved jointly."""
    n, m = profile.shape
    offsets = np.cumsum([0] + [len(s) + 1 for s in supports])

    def unpack(x):
        full = np.zeros((n, m))
        values = np.empty(n)
        for i, support in enumerate(supports):
            full[i, support] = x[offsets[i]:offsets[i + 1] - 1]
            values[i] = x[offsets[i + 1] - 1]
        return full, values

    def residual(x):
        full, values = unpack(x)
        parts = []
        for i, support in enumerate(supports):
            dev = table.against_profile(_others(full, i))
            parts.append(dev[support] - values[i])
            parts.append([full[i].sum() - 1.0])
        return np.concatenate(parts)

    x0 = []
    for i, support in enumerate(supports):
        dev = table.against_profile(_others(profile, i))
        x0.extend(profile[i, support] / profile[i, support].sum())
        x0.append(float(profile[i] @ dev))
    solution = root(residual, np.array(x0), method="hybr")
    if not solution.success:
        return None
    full, _ = unpack(solution.x)
    if full.min() < -settings.simplex_tol:
        return None
    full = np.array([_normalized(row) for row in full])
    return full if _joint_regret(table, full) < tol else None


def _try_polish(table: DeviationTable, candidates: Sequence[np.ndarray], tol: float) -> Optional[np.ndarray]:
    for candidate in candidates:
        supports = _settled_supports(table, candidate)
        if supports is None:
            continue
        polished = _polish_profile(table, candidate, supports, tol)
        if polished is not None:
            return polished
    return None


def best_response_dynamics(tensor: PayoffTensor, seed: int = 0, tol: Optional[float] = None) -> EquilibriumResult:
    """
    One run of smoothed best response dynamics from random mixed strategies.

    Agents update in turn towards the softmax response to the others, with
    temperature max(1/k, temperature_floor) at sweep k. Every
    ``polish_every`` sweeps the joint regret is checked. Once the temperature
    is down to ``polish_temperature`` and regret is below ``polish_threshold``,
    a support polish is tried from the current profile, then from the running
    average, provided every agent has settled on its near-best replies. The
    result may be asymmetric; a run that never gets below ``tol`` is returned
    with ``converged=False``.
    """
    _check_seed(seed)
    tol = _resolve_tol(tol)
    rng = np.random.Generator(np.random.Philox(seed))
    table = tensor.deviation_table
    n, m = tensor.n, tensor.m
    step = settings.response_step

    profile = rng.dirichlet(np.ones(m), size=n)
    average = profile.copy()
    iterations = settings.max_iterations
    for k in range(1, settings.max_iterations + 1):
        temperature = max(1.0 / k, settings.temperature_floor)
        for i in range(n):
            dev = table.against_profile(_others(profile, i))
            profile[i] = (1.0 - step) * profile[i] + step * softmax(dev / temperature)
        average += (profile - average) / (k + 1)
        if k % settings.polish_every:
            continue

        regret = _joint_regret(table, profile)
        if regret < tol:
            iterations = k
            break
        if temperature > settings.polish_temperature:
            continue
        if min(regret, _joint_regret(table, average)) < settings.polish_threshold:
            polished = _try_polish(table, (profile, average), tol)
            if polished is not None:
                profile = polished
                iterations = k
                break

    profile = np.array([_normalized(row) for row in profile])
    regret, _ = profile_regret(profile, tensor)
    converged = regret < tol
    if not converged:
        logger.debug(f"Dynamics with seed {seed} stopped at regret {regret:.3e}")
    symmetric = bool(np.all(np.max(np.abs(profile - profile[0]), axis=1) <= settings.simplex_tol))
    return EquilibriumResult(
        profile=[MixedStrategy.from_array(row) for row in profile],
        regret=max(regret, 0.0),
        symmetric=symmetric,
        iterations=iterations,
        seed=seed,
        converged=converged,
    )


def run_seeds(seed: int, t: int) -> List[int]:
    """Independent 64-bit run seeds derived from one ensemble seed."""
    _check_seed(seed)
    return [int(child.generate_state(1, dtype=np.uint64)[0]) for child in np.random.SeedSequence(seed).spawn(t)]


def diversification_metric(tensor: PayoffTensor, t: Optional[int] = None, seed: int = 0,
                           tol: Optional[float] = None, workers: Optional[int] = None) -> DiversificationMetric:
    """
    Average over t dynamics runs, and over the agents of each run, of the
    chance each option is picked.

    Runs execute in a thread pool but are aggregated in run order, so the
    metric is determined by ``seed`` alone. Non-converged runs are dropped;
    more than ``max_nonconverged_fraction`` of them raises ConvergenceError.
    """
    t = settings.ensemble_runs if t is None else t
    if t < 1:
        raise DomainError(f"t must be >= 1, got {t}")
    seeds = run_seeds(seed, t)
    tensor.deviation_table  # build shared tables before the workers start

    with ThreadPoolExecutor(max_workers=workers or settings.ensemble_workers, thread_name_prefix="ensemble") as executor:
        results = list(executor.map(lambda s: best_response_dynamics(tensor, seed=s, tol=tol), seeds))

    converged = [r for r in results if r.converged]
    failed = t - len(converged)
    if not converged or failed > settings.max_nonconverged_fraction * t:
        raise ConvergenceError(
            f"{failed} of {t} runs did not converge (n={tensor.n}, m={tensor.m}, seed={seed})",
            diagnostics={
                "requested": t,
                "converged": len(converged),
                "failed_seeds": [r.seed for r in results if not r.converged],
                "failed_regrets": [r.regret for r in results if not r.converged],
            },
        )
    if failed:
        logger.warning(f"{failed} of {t} runs did not converge and were excluded")

    per_run = np.array([r.agent_average() for r in converged])
    avg = per_run.mean(axis=0)
    logger.info(f"Ensemble n={tensor.n}, m={tensor.m}: {len(converged)}/{t} runs, avg={np.round(avg, 4).tolist()}")
    return DiversificationMetric(
        avg_probs=avg.tolist(),
        t=len(converged),
        per_run=per_run.tolist(),
        dispersion=per_run.std(axis=0).tolist(),
        seed=seed,
        requested=t,
    )
