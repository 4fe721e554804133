"""
Shared data model for MR prioritization.

Kill matrices, coverage and cost profiles, orderings and detection curves.
All types are immutable after construction; operations here are pure.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, Iterable, Iterator, List, Mapping, Optional, Sequence, Set, Tuple

import numpy as np

from .errors import (
    DuplicateId,
    DuplicateRecord,
    EmptyTestCaseList,
    InvalidLabel,
    InvalidSeed,
    MissingCell,
    MissingCost,
    MissingCriterion,
    DataError,
    NegativeCost,
    UnknownId,
)

logger = logging.getLogger(__name__)

MrId = str
FaultId = str

SEED_LIMIT = 2 ** 64
_CURVE_TOLERANCE = 1e-9


class Criterion(str, Enum):
    STATEMENT = "statement"
    BRANCH = "branch"


class Method(str, Enum):
    FAULT_BASED = "fault-based"
    STATEMENT_COVERAGE = "statement-coverage"
    BRANCH_COVERAGE = "branch-coverage"
    RANDOM = "random"
    OPTIMAL = "optimal"
    EXTERNAL = "external"


class Role(str, Enum):
    PRIORITIZING = "prioritizing"
    VALIDATION = "validation"


def validate_label(name: str, kind: str = "id") -> str:
    """
    Check that an MR or fault identifier is CSV-safe.

    Args:
        name: Identifier to check
        kind: Used in the error message ("MR", "fault", ...)

    Returns:
        The identifier unchanged
    """
    if not isinstance(name, str) or not name:
        raise InvalidLabel(f"{kind} identifier must be a non-empty string, got {name!r}")
    if name != name.strip():
        raise InvalidLabel(f"{kind} identifier {name!r} has leading/trailing whitespace")
    if any(ch in name for ch in ",\n\r"):
        raise InvalidLabel(f"{kind} identifier {name!r} contains a comma or line break")
    return name


def _unique_labels(names: Iterable[str], kind: str) -> Tuple[str, ...]:
    labels = tuple(validate_label(n, kind) for n in names)
    seen: Set[str] = set()
    for label in labels:
        if label in seen:
            raise DuplicateId(f"duplicate {kind} identifier {label!r}")
        seen.add(label)
    return labels


def check_seed(seed: int) -> int:
    """Seeds are unsigned 64-bit integers"""
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise InvalidSeed(f"seed must be an integer, got {seed!r}")
    if not 0 <= int(seed) < SEED_LIMIT:
        raise InvalidSeed(f"seed {seed} is outside the unsigned 64-bit range")
    return int(seed)


@dataclass(frozen=True)
class DatasetMeta:
    """Provenance of one test-execution campaign"""
    label: str
    role: Role = Role.VALIDATION
    test_suite_label: str = ""
    fault_tool_label: str = ""

    def __post_init__(self):
        if not self.label:
            raise InvalidLabel("dataset label must be non-empty")
        object.__setattr__(self, "role", Role(self.role))

    def to_dict(self) -> Dict[str, str]:
        return {
            "label": self.label,
            "role": self.role.value,
            "test_suite_label": self.test_suite_label,
            "fault_tool_label": self.fault_tool_label,
        }


@dataclass(frozen=True, eq=False)
class KillMatrix:
    """
    Boolean MR x fault detection table.

    ``kills[i, j]`` is True when MR ``mrs[i]`` revealed fault ``faults[j]``.
    """
    mrs: Tuple[MrId, ...]
    faults: Tuple[FaultId, ...]
    kills: np.ndarray
    meta: Optional[DatasetMeta] = None

    def __post_init__(self):
        object.__setattr__(self, "mrs", _unique_labels(self.mrs, "MR"))
        object.__setattr__(self, "faults", _unique_labels(self.faults, "fault"))
        expected = (len(self.mrs), len(self.faults))
        table = np.array(self.kills, dtype=bool)
        if table.size == 0 and 0 in expected:
            table = np.zeros(expected, dtype=bool)
        if table.shape != expected:
            raise DataError(
                f"kill table shape {table.shape} does not match "
                f"{expected[0]} MRs x {expected[1]} faults"
            )
        table.flags.writeable = False
        object.__setattr__(self, "kills", table)

    def __eq__(self, other):
        if not isinstance(other, KillMatrix):
            return NotImplemented
        return (self.mrs == other.mrs and self.faults == other.faults
                and np.array_equal(self.kills, other.kills))

    __hash__ = None

    @property
    def num_mrs(self) -> int:
        return len(self.mrs)

    @property
    def num_faults(self) -> int:
        return len(self.faults)

    def index_of(self, mr: MrId) -> int:
        try:
            return self.mrs.index(mr)
        except ValueError:
            raise UnknownId(f"MR {mr!r} is not in the kill matrix") from None

    def killed_by(self, mr: MrId) -> FrozenSet[FaultId]:
        row = self.kills[self.index_of(mr)]
        return frozenset(f for f, hit in zip(self.faults, row) if hit)

    def kill_counts(self) -> Dict[MrId, int]:
        return dict(zip(self.mrs, (int(c) for c in self.kills.sum(axis=1))))

    def killable_mask(self) -> np.ndarray:
        return self.kills.any(axis=0)

    def rows_in(self, order: Sequence[MrId]) -> np.ndarray:
        """Kill rows rearranged to follow ``order``"""
        return self.kills[[self.index_of(mr) for mr in order]]

    def select_faults(self, keep: np.ndarray) -> "KillMatrix":
        """New matrix with only the fault columns where ``keep`` is True (order preserved)"""
        keep = np.asarray(keep, dtype=bool)
        faults = tuple(f for f, k in zip(self.faults, keep) if k)
        return KillMatrix(self.mrs, faults, self.kills[:, keep], meta=self.meta)

    def with_meta(self, meta: Optional[DatasetMeta]) -> "KillMatrix":
        return KillMatrix(self.mrs, self.faults, self.kills, meta=meta)


@dataclass(frozen=True)
class CoverageProfile:
    """
    Per-MR sets of covered statement and branch units.

    A criterion map is None when that criterion was not collected; when present
    it holds an entry (possibly empty) for every MR.
    """
    mrs: Tuple[MrId, ...]
    statements: Optional[Mapping[MrId, FrozenSet[str]]] = None
    branches: Optional[Mapping[MrId, FrozenSet[str]]] = None

    def __post_init__(self):
        object.__setattr__(self, "mrs", _unique_labels(self.mrs, "MR"))
        for name in ("statements", "branches"):
            units = getattr(self, name)
            if units is None:
                continue
            if set(units) != set(self.mrs):
                raise DataError(f"{name} coverage keys do not match the declared MRs")
            object.__setattr__(self, name, {mr: frozenset(units[mr]) for mr in self.mrs})

    def units(self, criterion: Criterion) -> Mapping[MrId, FrozenSet[str]]:
        criterion = Criterion(criterion)
        units = self.statements if criterion is Criterion.STATEMENT else self.branches
        if units is None:
            raise MissingCriterion(f"coverage profile has no {criterion.value} data")
        return units

    def has(self, criterion: Criterion) -> bool:
        units = self.statements if Criterion(criterion) is Criterion.STATEMENT else self.branches
        return units is not None


@dataclass(frozen=True)
class CostProfile:
    """Wall-clock seconds to run each MR's source and follow-up test cases"""
    costs: Mapping[MrId, float] = field(default_factory=dict)

    def __post_init__(self):
        checked = {}
        for mr, seconds in self.costs.items():
            validate_label(mr, "MR")
            seconds = float(seconds)
            if not np.isfinite(seconds):
                raise DataError(f"cost for {mr!r} is not finite")
            if seconds < 0:
                raise NegativeCost(f"cost for {mr!r} is negative ({seconds})")
            checked[mr] = seconds
        object.__setattr__(self, "costs", checked)

    def cost_of(self, mr: MrId) -> float:
        try:
            return self.costs[mr]
        except KeyError:
            raise MissingCost(f"no cost recorded for MR {mr!r}") from None

    def missing(self, mrs: Iterable[MrId]) -> List[MrId]:
        return [mr for mr in mrs if mr not in self.costs]


@dataclass(frozen=True)
class MrOrdering:
    """A full permutation of MR identifiers plus how it was produced"""
    order: Tuple[MrId, ...]
    method: Method
    seed: Optional[int] = None
    source_dataset: Optional[DatasetMeta] = None

    def __post_init__(self):
        object.__setattr__(self, "order", _unique_labels(self.order, "MR"))
        object.__setattr__(self, "method", Method(self.method))
        if self.seed is not None:
            object.__setattr__(self, "seed", check_seed(self.seed))

    def __len__(self) -> int:
        return len(self.order)

    def __iter__(self) -> Iterator[MrId]:
        return iter(self.order)

    def is_permutation_of(self, mrs: Iterable[MrId]) -> bool:
        mrs = list(mrs)
        return len(mrs) == len(self.order) and set(mrs) == set(self.order)


@dataclass(frozen=True)
class DetectionCurve:
    """
    Cumulative fault-detection percentages.

    ``values[m - 1]`` is the percentage detected by the first m MRs.
    """
    values: Tuple[float, ...]

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        for v in values:
            if v < -_CURVE_TOLERANCE or v > 100.0 + _CURVE_TOLERANCE:
                raise DataError(f"detection percentage {v} outside [0, 100]")
        for prev, nxt in zip(values, values[1:]):
            if nxt < prev - _CURVE_TOLERANCE:
                raise DataError("detection curve must be non-decreasing")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)

    def at(self, m: int) -> float:
        """Value for prefix size m (1-based)"""
        return self.values[m - 1]

    @property
    def final(self) -> float:
        return self.values[-1]


def build_kill_matrix(mrs: Sequence[MrId], faults: Sequence[FaultId],
                      records: Iterable[Tuple[MrId, FaultId, bool]],
                      dense_default_false: bool = False) -> KillMatrix:
    """
    Assemble a complete kill matrix from individual (mr, fault, killed) records.

    Args:
        mrs: Declared MRs, in row order
        faults: Declared faults, in column order
        records: One entry per observed (mr, fault) pair
        dense_default_false: Treat pairs without a record as "not killed"
            instead of raising MissingCell

    Returns:
        KillMatrix
    """
    mrs = _unique_labels(mrs, "MR")
    faults = _unique_labels(faults, "fault")
    row_of = {mr: i for i, mr in enumerate(mrs)}
    col_of = {f: j for j, f in enumerate(faults)}

    table = np.zeros((len(mrs), len(faults)), dtype=bool)
    seen = np.zeros_like(table)
    for mr, fault, killed in records:
        if mr not in row_of:
            raise UnknownId(f"record references undeclared MR {mr!r}")
        if fault not in col_of:
            raise UnknownId(f"record references undeclared fault {fault!r}")
        i, j = row_of[mr], col_of[fault]
        if seen[i, j]:
            raise DuplicateRecord(f"pair ({mr}, {fault}) recorded twice")
        seen[i, j] = True
        table[i, j] = bool(killed)

    if not dense_default_false and not seen.all():
        i, j = np.argwhere(~seen)[0]
        raise MissingCell(f"no record for pair ({mrs[i]}, {faults[j]})")
    return KillMatrix(mrs, faults, table)


def union_coverage(per_test_case: Mapping[MrId, Sequence[Iterable[str]]],
                   criterion: Criterion) -> CoverageProfile:
    """Union the units executed by each MR's source and follow-up test cases"""
    criterion = Criterion(criterion)
    units: Dict[MrId, FrozenSet[str]] = {}
    for mr, executions in per_test_case.items():
        if len(executions) == 0:
            raise EmptyTestCaseList(f"MR {mr!r} has no test-case executions")
        units[mr] = frozenset().union(*(frozenset(e) for e in executions))

    mrs = tuple(per_test_case)
    if criterion is Criterion.STATEMENT:
        return CoverageProfile(mrs, statements=units)
    return CoverageProfile(mrs, branches=units)


def killable_faults(km: KillMatrix) -> Set[FaultId]:
    """Faults revealed by at least one MR"""
    return {f for f, hit in zip(km.faults, km.killable_mask()) if hit}
