"""
MR ordering generators: fault-based greedy, coverage-based greedy, random
baseline, and the optimal-ordering oracle (greedy on the validation matrix).

Tie-breaking uses numpy's default generator (PCG64) seeded with the caller's
u64 seed. A random draw is consumed only when a step has more than one tied
candidate, so tie-free inputs yield the same ordering for every seed.
"""

import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .core_model import (
    SEED_LIMIT,
    Criterion,
    CoverageProfile,
    KillMatrix,
    Method,
    MrId,
    MrOrdering,
    check_seed,
)
from .errors import DataError, EmptyMatrix

logger = logging.getLogger(__name__)

DEFAULT_RANDOM_N = 100


@dataclass(frozen=True)
class GreedyStep:
    chosen: MrId
    marginal_gain: int
    tie_set: Tuple[MrId, ...]
    residual: bool = False


@dataclass(frozen=True)
class GreedyTrace:
    """Audit trail of one greedy run, one step per placed MR"""
    steps: Tuple[GreedyStep, ...]

    @property
    def gains(self) -> List[int]:
        return [s.marginal_gain for s in self.steps]

    @property
    def order(self) -> Tuple[MrId, ...]:
        return tuple(s.chosen for s in self.steps)


def _pick(tied: List[int], rng: np.random.Generator) -> int:
    if len(tied) == 1:
        return tied[0]
    return tied[int(rng.integers(len(tied)))]


def greedy_order(labels: Sequence[MrId], membership: np.ndarray,
                 seed: int) -> Tuple[List[MrId], GreedyTrace]:
    """
    Additional-coverage greedy over a boolean membership table.

    Args:
        labels: Row labels (MRs), in declaration order
        membership: Boolean table, rows = MRs, columns = items to cover
            (faults, statements or branches)
        seed: u64 seed for tie-breaking

    Returns:
        Tuple of (full ordering, trace)
    """
    rng = np.random.default_rng(check_seed(seed))
    membership = np.asarray(membership, dtype=bool)
    remaining = list(range(len(labels)))
    uncovered = np.ones(membership.shape[1], dtype=bool)
    steps: List[GreedyStep] = []

    while remaining:
        gains = (membership[remaining] & uncovered).sum(axis=1)
        best = int(gains.max())
        # Nothing left that any remaining MR can add
        if best == 0:
            break
        tied = [remaining[k] for k in np.flatnonzero(gains == best)]
        pick = _pick(tied, rng)
        steps.append(GreedyStep(labels[pick], best, tuple(labels[t] for t in tied)))
        logger.debug("greedy step %d: %s (+%d, %d tied)", len(steps), labels[pick], best, len(tied))
        uncovered &= ~membership[pick]
        remaining.remove(pick)

    # Residual MRs: descending individual total, ties seeded-random
    totals = membership.sum(axis=1)
    while remaining:
        best = max(int(totals[r]) for r in remaining)
        tied = [r for r in remaining if totals[r] == best]
        pick = _pick(tied, rng)
        steps.append(GreedyStep(labels[pick], 0, tuple(labels[t] for t in tied), residual=True))
        remaining.remove(pick)

    trace = GreedyTrace(tuple(steps))
    return list(trace.order), trace


def fault_based_order(fp: KillMatrix, seed: int) -> Tuple[MrOrdering, GreedyTrace]:
    """
    Order MRs by how many not-yet-revealed faults of the prioritizing matrix each one reveals.

    Args:
        fp: Prioritizing kill matrix
        seed: u64 tie-breaking seed

    Returns:
        Tuple of (MrOrdering, GreedyTrace)
    """
    if fp.num_mrs == 0:
        raise EmptyMatrix("cannot prioritize an empty kill matrix")
    order, trace = greedy_order(fp.mrs, fp.kills, seed)
    return MrOrdering(tuple(order), Method.FAULT_BASED, seed, fp.meta), trace


def coverage_based_order(cov: CoverageProfile, criterion: Criterion,
                         seed: int) -> Tuple[MrOrdering, GreedyTrace]:
    """Order MRs by additional statement or branch coverage"""
    criterion = Criterion(criterion)
    units = cov.units(criterion)
    if not cov.mrs:
        raise EmptyMatrix("cannot prioritize an empty coverage profile")

    universe = sorted(set().union(*units.values()))
    column = {u: k for k, u in enumerate(universe)}
    membership = np.zeros((len(cov.mrs), len(universe)), dtype=bool)
    for i, mr in enumerate(cov.mrs):
        membership[i, [column[u] for u in units[mr]]] = True

    method = Method.STATEMENT_COVERAGE if criterion is Criterion.STATEMENT else Method.BRANCH_COVERAGE
    order, trace = greedy_order(cov.mrs, membership, seed)
    return MrOrdering(tuple(order), method, seed), trace


def sub_seed(seed: int, index: int) -> int:
    """Per-index seed used by random_orders: (seed + index) mod 2**64"""
    return (check_seed(seed) + index) % SEED_LIMIT


def random_orders(mrs: Sequence[MrId], n: int = DEFAULT_RANDOM_N, seed: int = 0) -> List[MrOrdering]:
    """
    Uniformly random permutations for the random baseline.

    Ordering i is drawn from its own generator seeded with sub_seed(seed, i),
    so any subset of indices can be generated independently.
    """
    if n < 1:
        raise DataError(f"number of random orderings must be >= 1, got {n}")
    mrs = tuple(mrs)
    orders = []
    for i in range(n):
        s = sub_seed(seed, i)
        perm = np.random.default_rng(s).permutation(len(mrs))
        orders.append(MrOrdering(tuple(mrs[k] for k in perm), Method.RANDOM, s))
    return orders


def optimal_order(fv: KillMatrix, seed: int) -> Tuple[MrOrdering, GreedyTrace]:
    """Upper-bound oracle: the fault-based greedy applied to the validation matrix itself"""
    if fv.num_mrs == 0:
        raise EmptyMatrix("cannot prioritize an empty kill matrix")
    order, trace = greedy_order(fv.mrs, fv.kills, seed)
    return MrOrdering(tuple(order), Method.OPTIMAL, seed, fv.meta), trace


def select_top(ordering: MrOrdering, n: int) -> Tuple[MrId, ...]:
    """The first n MRs of an ordering (all of them when n exceeds its length)"""
    if n < 1:
        raise DataError(f"top-n must be >= 1, got {n}")
    return ordering.order[:n]

