"""
On-disk formats: kill matrices, coverage profiles, cost profiles, paired
samples, synth specs and experiment configs. Also matrix hygiene.

All files are UTF-8; LF and CRLF input are both accepted and output is LF.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, FrozenSet, Iterable, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from .core_model import (
    CostProfile,
    CoverageProfile,
    Criterion,
    DatasetMeta,
    FaultId,
    KillMatrix,
    Role,
    check_seed,
    validate_label,
)
from .errors import (
    BadCell,
    ConfigError,
    DataError,
    DuplicateId,
    DuplicateMr,
    EmptyConfig,
    EmptySample,
    InvalidLabel,
    InvalidSeed,
    MalformedHeader,
    MissingField,
    NegativeCost,
    RaggedRow,
    UnknownFaultId,
)
from .metrics import DEFAULT_THRESHOLDS
from .prioritize import DEFAULT_RANDOM_N
from .stats import DEFAULT_ALPHA, DEFAULT_MAX_EXACT_N, DEFAULT_RESAMPLES, PairedSample
from .synth import SynthSpec

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

KILL_MATRIX_ID_COLUMN = "fault_id"
COST_COLUMNS = ["mr_id", "seconds"]
PAIR_COLUMNS = ["treatment", "control"]


def _read_rows(path: PathLike, empty_error=MalformedHeader) -> List[List[str]]:
    """Raw comma-separated rows as stripped strings; the header is rows[0]"""
    try:
        frame = pd.read_csv(path, header=None, dtype=str, keep_default_na=False, na_values=[""],
                            encoding="utf-8-sig", skip_blank_lines=True)
    except pd.errors.EmptyDataError:
        raise empty_error(f"{path}: file is empty") from None
    except pd.errors.ParserError as e:
        raise RaggedRow(f"{path}: {e}") from None
    except UnicodeDecodeError as e:
        raise DataError(f"{path}: not UTF-8 text ({e})") from None

    rows = []
    for line_no, row in enumerate(frame.values.tolist(), start=1):
        if any(not isinstance(cell, str) for cell in row):
            raise RaggedRow(f"{path}: row {line_no} has an empty or missing field")
        rows.append([cell.strip() for cell in row])
    return rows


def _float_cell(text: str, where: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise BadCell(f"{where}: {text!r} is not a number") from None
    if not math.isfinite(value):
        raise BadCell(f"{where}: {text!r} is not finite")
    return value


def _write_frame(frame: pd.DataFrame, path: PathLike, **kwargs):
    frame.to_csv(path, lineterminator="\n", encoding="utf-8", **kwargs)


# ---------------------------------------------------------------------------
# Kill matrices
# ---------------------------------------------------------------------------

def parse_kill_matrix(path: PathLike, meta: Optional[DatasetMeta] = None) -> KillMatrix:
    """
    Read a kill matrix: header ``fault_id,<MR>...``, then one ``<fault>,0|1,...`` row per fault.

    Args:
        path: CSV file
        meta: Provenance to attach to the matrix

    Returns:
        KillMatrix with rows/columns in file order
    """
    rows = _read_rows(path)
    header, body = rows[0], rows[1:]
    if header[0] != KILL_MATRIX_ID_COLUMN:
        raise MalformedHeader(f"{path}: first header cell must be '{KILL_MATRIX_ID_COLUMN}', got {header[0]!r}")

    mrs = header[1:]
    try:
        mrs = [validate_label(mr, "MR") for mr in mrs]
    except InvalidLabel as e:
        raise MalformedHeader(f"{path}: {e}") from None
    if len(set(mrs)) != len(mrs):
        raise DuplicateId(f"{path}: duplicate MR column in header")

    faults: List[str] = []
    seen = set()
    kills = np.zeros((len(mrs), len(body)), dtype=bool)
    for j, row in enumerate(body):
        fault = row[0]
        try:
            validate_label(fault, "fault")
        except InvalidLabel as e:
            raise BadCell(f"{path}: row {j + 2}: {e}") from None
        if fault in seen:
            raise DuplicateId(f"{path}: duplicate fault row {fault!r}")
        seen.add(fault)
        faults.append(fault)
        for i, cell in enumerate(row[1:]):
            if cell not in ("0", "1"):
                raise BadCell(f"{path}: row {j + 2}, column {mrs[i]!r}: expected 0 or 1, got {cell!r}")
            kills[i, j] = cell == "1"

    logger.info("📊 Loaded kill matrix %s: %d MRs x %d faults", Path(path).name, len(mrs), len(faults))
    return KillMatrix(tuple(mrs), tuple(faults), kills, meta=meta)


def write_kill_matrix(km: KillMatrix, path: PathLike):
    frame = pd.DataFrame(km.kills.T.astype(int), index=list(km.faults), columns=list(km.mrs))
    _write_frame(frame, path, index_label=KILL_MATRIX_ID_COLUMN)


# ---------------------------------------------------------------------------
# Coverage profiles
# ---------------------------------------------------------------------------

class _Pairs(list):
    """JSON object kept as its list of (key, value) pairs, so duplicate keys stay visible"""


def parse_coverage(path: PathLike) -> CoverageProfile:
    """Read ``{"<MR>": {"statements": [...], "branches": [...]}, ...}``"""
    with open(path, "r", encoding="utf-8") as f:
        try:
            document = json.load(f, object_pairs_hook=_Pairs)
        except json.JSONDecodeError as e:
            raise DataError(f"{path}: invalid JSON ({e})") from None
    if not isinstance(document, _Pairs):
        raise DataError(f"{path}: top level must be an object keyed by MR")

    mrs: List[str] = []
    units: Dict[str, Dict[str, FrozenSet[str]]] = {"statements": {}, "branches": {}}
    for mr, body in document:
        validate_label(mr, "MR")
        if mr in mrs:
            raise DuplicateMr(f"{path}: MR {mr!r} appears twice")
        if not isinstance(body, _Pairs):
            raise MissingField(f"{path}: entry for {mr!r} must be an object")
        fields = dict(body)
        for key in units:
            if key not in fields:
                raise MissingField(f"{path}: MR {mr!r} has no {key!r} list")
            ids = fields[key]
            if not isinstance(ids, list) or not all(isinstance(u, str) for u in ids):
                raise BadCell(f"{path}: MR {mr!r} {key!r} must be a list of strings")
            units[key][mr] = frozenset(ids)
        mrs.append(mr)

    return CoverageProfile(tuple(mrs), statements=units["statements"], branches=units["branches"])


def write_coverage(cov: CoverageProfile, path: PathLike):
    statements = cov.units(Criterion.STATEMENT)
    branches = cov.units(Criterion.BRANCH)
    document = {
        mr: {"statements": sorted(statements[mr]), "branches": sorted(branches[mr])}
        for mr in cov.mrs
    }
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(document, f, indent=2, ensure_ascii=False)
        f.write("\n")


# ---------------------------------------------------------------------------
# Cost profiles and paired samples
# ---------------------------------------------------------------------------

def _read_table(path: PathLike, columns: List[str], empty_error=MalformedHeader) -> List[List[str]]:
    rows = _read_rows(path, empty_error)
    if rows[0] != columns:
        raise MalformedHeader(f"{path}: header must be {','.join(columns)}, got {','.join(rows[0])}")
    return rows[1:]


def parse_costs(path: PathLike) -> CostProfile:
    """Read ``mr_id,seconds`` rows (header required)"""
    costs: Dict[str, float] = {}
    for line_no, (mr, seconds) in enumerate(_read_table(path, COST_COLUMNS), start=2):
        validate_label(mr, "MR")
        if mr in costs:
            raise DuplicateMr(f"{path}: MR {mr!r} has two cost rows")
        value = _float_cell(seconds, f"{path}: row {line_no}")
        if value < 0:
            raise NegativeCost(f"{path}: row {line_no}: cost for {mr!r} is negative ({value})")
        costs[mr] = value
    return CostProfile(costs)


def write_costs(cost: CostProfile, path: PathLike):
    frame = pd.DataFrame({"mr_id": list(cost.costs), "seconds": list(cost.costs.values())},
                         columns=COST_COLUMNS)
    _write_frame(frame, path, index=False)


def parse_pairs(path: PathLike) -> PairedSample:
    """Read ``treatment,control`` rows into a PairedSample labelled by the file name"""
    pairs = [
        (_float_cell(t, f"{path}: row {line_no}"), _float_cell(c, f"{path}: row {line_no}"))
        for line_no, (t, c) in enumerate(_read_table(path, PAIR_COLUMNS, EmptySample), start=2)
    ]
    return PairedSample(tuple(pairs), label=Path(path).stem)


def write_pairs(sample: PairedSample, path: PathLike):
    frame = pd.DataFrame(list(sample.pairs), columns=PAIR_COLUMNS)
    _write_frame(frame, path, index=False)


# ---------------------------------------------------------------------------
# Matrix hygiene
# ---------------------------------------------------------------------------

def filter_faults(km: KillMatrix, drop_all_false: bool = False,
                  duplicate_ids: Iterable[FaultId] = ()) -> KillMatrix:
    """
    Remove duplicate faults and, optionally, faults no MR reveals.

    Surviving cells and their order are unchanged.
    """
    duplicates = set(duplicate_ids)
    unknown = duplicates - set(km.faults)
    if unknown:
        raise UnknownFaultId(f"duplicate list names unknown faults {sorted(unknown)}")

    keep = np.array([f not in duplicates for f in km.faults], dtype=bool)
    if drop_all_false:
        keep &= km.killable_mask()
    dropped = int((~keep).sum())
    if dropped:
        logger.info("🧹 Filtered %d of %d faults", dropped, km.num_faults)
    return km.select_faults(keep)


# ---------------------------------------------------------------------------
# Synth specs and experiment configs
# ---------------------------------------------------------------------------

SYNTH_FIELDS = ("num_mrs", "num_faults", "kill_rate_mean", "kill_rate_sd", "overlap_bias", "seed")


def _load_json_object(path: PathLike, what: str) -> Dict[str, Any]:
    with open(path, "r", encoding="utf-8") as f:
        try:
            document = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON ({e})") from None
    if not isinstance(document, dict):
        raise ConfigError(f"{path}: {what} must be a JSON object")
    return document


def _reject_unknown(document: Dict[str, Any], allowed: Iterable[str], where: str):
    unknown = sorted(set(document) - set(allowed))
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")


def synth_spec_from_dict(document: Dict[str, Any], where: str = "synth spec") -> SynthSpec:
    _reject_unknown(document, SYNTH_FIELDS, where)
    missing = [k for k in SYNTH_FIELDS if k not in document and k != "overlap_bias"]
    if missing:
        raise MissingField(f"{where}: missing {missing}")
    return SynthSpec(**document)


def parse_synth_spec(path: PathLike) -> SynthSpec:
    return synth_spec_from_dict(_load_json_object(path, "synth spec"), str(path))


@dataclass(frozen=True)
class DatasetRef:
    path: Path
    meta: DatasetMeta


@dataclass(frozen=True)
class SyntheticRun:
    """A run whose prioritizing/validation pairs are generated, one pair per replicate"""
    spec: SynthSpec
    replicates: int = 20
    cost_mean_seconds: Optional[float] = None
    cost_sd_seconds: float = 0.0


@dataclass(frozen=True)
class RunConfig:
    label: str
    prioritizing: Optional[DatasetRef] = None
    validation: Optional[DatasetRef] = None
    coverage: Optional[Path] = None
    costs: Optional[Path] = None
    drop_all_false: bool = False
    duplicate_faults: Tuple[str, ...] = ()
    synthetic: Optional[SyntheticRun] = None

    @property
    def is_synthetic(self) -> bool:
        return self.synthetic is not None


@dataclass(frozen=True)
class ExperimentConfig:
    runs: Tuple[RunConfig, ...]
    seed: int
    thresholds: Tuple[float, ...] = DEFAULT_THRESHOLDS
    random_n: int = DEFAULT_RANDOM_N
    alpha: float = DEFAULT_ALPHA
    max_exact_n: int = DEFAULT_MAX_EXACT_N
    resamples: int = DEFAULT_RESAMPLES
    killable_only: bool = False
    source: Optional[Path] = field(default=None, compare=False)

    def __post_init__(self):
        if not self.runs:
            raise EmptyConfig("experiment config has no runs")
        try:
            check_seed(self.seed)
        except InvalidSeed as e:
            raise ConfigError(str(e)) from e
        if not self.thresholds or any(not t > 0 for t in self.thresholds):
            raise ConfigError(f"thresholds must be a non-empty list of positive values, got {list(self.thresholds)}")
        if self.random_n < 1:
            raise ConfigError("random_n must be >= 1")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        labels = [r.label for r in self.runs]
        if len(set(labels)) != len(labels):
            raise DuplicateId("run labels must be unique")


_DATASET_KEYS = ("path", "label", "test_suite_label", "fault_tool_label")
_RUN_KEYS = ("label", "prioritizing", "validation", "coverage", "costs",
             "drop_all_false", "duplicate_faults", "synthetic")
_SYNTHETIC_KEYS = ("num_mrs", "num_faults", "kill_rate_mean", "kill_rate_sd", "overlap_bias",
                   "replicates", "cost_mean_seconds", "cost_sd_seconds")
_CONFIG_KEYS = ("runs", "seed", "thresholds", "random_n", "alpha", "max_exact_n",
                "resamples", "killable_only")


def _dataset_ref(document: Any, role: Role, base: Path, where: str) -> DatasetRef:
    if not isinstance(document, dict) or "path" not in document:
        raise MissingField(f"{where}: {role.value} dataset needs a 'path'")
    _reject_unknown(document, _DATASET_KEYS, where)
    path = base / document["path"]
    meta = DatasetMeta(
        label=document.get("label") or path.stem,
        role=role,
        test_suite_label=document.get("test_suite_label", ""),
        fault_tool_label=document.get("fault_tool_label", ""),
    )
    return DatasetRef(path, meta)


def _run_config(document: Any, base: Path, index: int) -> RunConfig:
    where = f"run {index}"
    if not isinstance(document, dict):
        raise ConfigError(f"{where}: must be an object")
    _reject_unknown(document, _RUN_KEYS, where)
    label = document.get("label")
    if not label or not isinstance(label, str):
        raise MissingField(f"{where}: needs a non-empty 'label'")
    where = f"run {label!r}"

    if "synthetic" in document:
        synthetic = document["synthetic"]
        if not isinstance(synthetic, dict):
            raise ConfigError(f"{where}: 'synthetic' must be an object")
        _reject_unknown(synthetic, _SYNTHETIC_KEYS, where)
        spec_fields = {k: v for k, v in synthetic.items() if k in SYNTH_FIELDS}
        spec = synth_spec_from_dict({**spec_fields, "seed": 0}, where)
        run = SyntheticRun(
            spec=spec,
            replicates=int(synthetic.get("replicates", 20)),
            cost_mean_seconds=synthetic.get("cost_mean_seconds"),
            cost_sd_seconds=float(synthetic.get("cost_sd_seconds", 0.0)),
        )
        if run.replicates < 1:
            raise ConfigError(f"{where}: replicates must be >= 1")
        return RunConfig(label=label, synthetic=run)

    for key in ("prioritizing", "validation"):
        if key not in document:
            raise MissingField(f"{where}: missing {key!r} dataset")
    return RunConfig(
        label=label,
        prioritizing=_dataset_ref(document["prioritizing"], Role.PRIORITIZING, base, where),
        validation=_dataset_ref(document["validation"], Role.VALIDATION, base, where),
        coverage=base / document["coverage"] if document.get("coverage") else None,
        costs=base / document["costs"] if document.get("costs") else None,
        drop_all_false=bool(document.get("drop_all_false", False)),
        duplicate_faults=tuple(document.get("duplicate_faults", ())),
    )


def load_config(path: PathLike) -> ExperimentConfig:
    """
    Load an experiment config document.

    Dataset paths inside the document are resolved against the config file's directory.
    """
    path = Path(path)
    document = _load_json_object(path, "experiment config")
    _reject_unknown(document, _CONFIG_KEYS, str(path))
    if "seed" not in document:
        raise MissingField(f"{path}: 'seed' is required")
    runs = document.get("runs") or []
    if not isinstance(runs, list):
        raise ConfigError(f"{path}: 'runs' must be a list")
    if not runs:
        raise EmptyConfig(f"{path}: no runs configured")

    base = path.parent
    return ExperimentConfig(
        runs=tuple(_run_config(r, base, i) for i, r in enumerate(runs, start=1)),
        seed=document["seed"],
        thresholds=tuple(float(t) for t in document.get("thresholds", DEFAULT_THRESHOLDS)),
        random_n=int(document.get("random_n", DEFAULT_RANDOM_N)),
        alpha=float(document.get("alpha", DEFAULT_ALPHA)),
        max_exact_n=int(document.get("max_exact_n", DEFAULT_MAX_EXACT_N)),
        resamples=int(document.get("resamples", DEFAULT_RESAMPLES)),
        killable_only=bool(document.get("killable_only", False)),
        source=path,
    )
