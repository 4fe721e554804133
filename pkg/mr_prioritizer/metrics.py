"""
Evaluation measures for MR orderings on a validation kill matrix:
detection curves, relative improvement, effective MR set size,
average time-to-detect and time reduction.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .core_model import CostProfile, DetectionCurve, KillMatrix, MrId, MrOrdering
from .errors import (
    CurveTooShort,
    EmptyList,
    InvalidThreshold,
    LengthMismatch,
    MissingCost,
    MrSetMismatch,
    NoKillableFaults,
    ZeroBaseline,
)

logger = logging.getLogger(__name__)

# Relative improvement when the baseline detects nothing but the target does
INFINITE_IMPROVEMENT = math.inf

DEFAULT_THRESHOLDS = (5.0, 2.5)


@dataclass(frozen=True)
class EffectiveSetSize:
    """Smallest prefix after which the next MR adds less than ``threshold`` points; None = NotMet"""
    threshold: float
    size: Optional[int]

    @property
    def met(self) -> bool:
        return self.size is not None

    def display(self) -> str:
        return str(self.size) if self.met else "NotMet"


def _check_same_mrs(order: MrOrdering, km: KillMatrix):
    if not order.is_permutation_of(km.mrs):
        raise MrSetMismatch(
            f"ordering MRs {sorted(order.order)} differ from matrix MRs {sorted(km.mrs)}"
        )


def detection_curve(order: MrOrdering, fv: KillMatrix, killable_only: bool = False) -> DetectionCurve:
    """
    Cumulative percentage of validation faults revealed by each prefix of an ordering.

    Args:
        order: Ordering over exactly the MRs of ``fv``
        fv: Validation kill matrix
        killable_only: Use the killable faults as the denominator instead of all faults

    Returns:
        DetectionCurve with one value per prefix size m = 1..M
    """
    _check_same_mrs(order, fv)
    rows = fv.rows_in(order.order)
    if len(order) == 0:
        return DetectionCurve(())

    denominator = int(fv.killable_mask().sum()) if killable_only else fv.num_faults
    if denominator == 0:
        return DetectionCurve(tuple(0.0 for _ in order.order))

    detected = np.logical_or.accumulate(rows, axis=0).sum(axis=1)
    return DetectionCurve(tuple(100.0 * int(d) / denominator for d in detected))


def mean_curve(curves: Sequence[DetectionCurve]) -> DetectionCurve:
    """Pointwise arithmetic mean of equally long curves"""
    if not curves:
        raise EmptyList("cannot average an empty list of curves")
    length = len(curves[0])
    if any(len(c) != length for c in curves):
        raise LengthMismatch("all curves must have the same length")
    values = np.array([c.values for c in curves], dtype=float).reshape(len(curves), length)
    mean = values.mean(axis=0)
    # Guard the mean against float drift outside the pointwise envelope
    mean = np.clip(mean, values.min(axis=0), values.max(axis=0))
    return DetectionCurve(tuple(float(v) for v in mean))


def relative_improvement(target: DetectionCurve, baseline: DetectionCurve) -> List[float]:
    """
    Signed percentage improvement of ``target`` over ``baseline`` per set size.

    0 when both are 0; INFINITE_IMPROVEMENT when only the baseline is 0.
    """
    if len(target) != len(baseline):
        raise LengthMismatch(f"curve lengths differ ({len(target)} vs {len(baseline)})")
    improvements = []
    for t, b in zip(target.values, baseline.values):
        if b == 0:
            improvements.append(0.0 if t == 0 else INFINITE_IMPROVEMENT)
        else:
            improvements.append(100.0 * (t - b) / b)
    return improvements


def effective_set_size(curve: DetectionCurve, threshold: float) -> EffectiveSetSize:
    """First m whose successor adds strictly less than ``threshold`` percentage points"""
    if len(curve) < 2:
        raise CurveTooShort("effective set size needs a curve of length >= 2")
    if not threshold > 0:
        raise InvalidThreshold(f"threshold must be positive, got {threshold}")
    for m in range(1, len(curve)):
        if curve.at(m + 1) - curve.at(m) < threshold:
            return EffectiveSetSize(threshold, m)
    return EffectiveSetSize(threshold, None)


def times_to_detect(order: MrOrdering, fv: KillMatrix, cost: CostProfile) -> Dict[str, float]:
    """
    Sequential execution time until each killable fault is first revealed.

    The cost of the revealing MR itself is charged in full.
    """
    _check_same_mrs(order, fv)
    missing = cost.missing(order.order)
    if missing:
        raise MissingCost(f"no cost recorded for MRs {missing}")
    if not order.order:
        return {}

    elapsed = np.cumsum([cost.cost_of(mr) for mr in order.order])
    rows = fv.rows_in(order.order)
    killable = fv.killable_mask()
    first_kill = rows.argmax(axis=0)
    return {
        fault: float(elapsed[first_kill[j]])
        for j, fault in enumerate(fv.faults)
        if killable[j]
    }


def avg_time_to_detect(order: MrOrdering, fv: KillMatrix, cost: CostProfile) -> float:
    """Mean of times_to_detect over the killable faults of ``fv``"""
    times = times_to_detect(order, fv, cost)
    if not times:
        raise NoKillableFaults("validation matrix has no killable faults")
    return float(np.mean(list(times.values())))


def time_reduction(target_avg: float, baseline_avg: float) -> float:
    """Percentage of the baseline time saved by the target; full precision"""
    if baseline_avg <= 0:
        raise ZeroBaseline("baseline time must be positive")
    return 100.0 * (baseline_avg - target_avg) / baseline_avg


def mr_kill_rates(km: KillMatrix) -> Dict[MrId, float]:
    """Individual kill percentage of each MR over all faults of the matrix"""
    if km.num_faults == 0:
        return {mr: 0.0 for mr in km.mrs}
    return {mr: 100.0 * count / km.num_faults for mr, count in km.kill_counts().items()}


def kill_rate_summary(km: KillMatrix) -> Tuple[float, float]:
    """Mean and population standard deviation of the per-MR kill percentages"""
    rates = np.array(list(mr_kill_rates(km).values()), dtype=float)
    if rates.size == 0:
        return 0.0, 0.0
    return float(rates.mean()), float(rates.std())


def format_percent(value: Optional[float], digits: int = 2) -> str:
    """Display form of a percentage; never fed back into computation"""
    if value is None:
        return "not computed"
    if math.isinf(value):
        return "+inf" if value > 0 else "-inf"
    return f"{value:.{digits}f}%"
