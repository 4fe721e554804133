"""
Evaluation runner: builds every ordering for each configured run, measures it
on the validation matrix, runs the paired permutation tests and writes
plot-ready report tables.
"""

import json
import logging
import os
import re
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from . import __version__
from .core_model import (
    CostProfile,
    CoverageProfile,
    Criterion,
    DetectionCurve,
    KillMatrix,
    MrId,
    MrOrdering,
    Role,
    killable_faults,
)
from .errors import MRPrioError, MrSetMismatch, ReportWriteError, with_context
from .io_formats import (
    ExperimentConfig,
    RunConfig,
    filter_faults,
    parse_costs,
    parse_coverage,
    parse_kill_matrix,
)
from .metrics import (
    EffectiveSetSize,
    avg_time_to_detect,
    detection_curve,
    effective_set_size,
    format_percent,
    kill_rate_summary,
    mean_curve,
    relative_improvement,
    time_reduction,
)
from .prioritize import coverage_based_order, fault_based_order, optimal_order, random_orders
from .stats import PairedSample, min_attainable_p, paired_permutation_test, significance_flag
from .synth import draw_kill_rates, gen_costs, gen_kill_matrix

logger = logging.getLogger(__name__)

FAULT_BASED = "fault-based"
STATEMENT_COVERAGE = "statement-coverage"
BRANCH_COVERAGE = "branch-coverage"
RANDOM_MEAN = "random-mean"
OPTIMAL = "optimal"

METHOD_ORDER = (FAULT_BASED, STATEMENT_COVERAGE, BRANCH_COVERAGE, RANDOM_MEAN, OPTIMAL)

# (treatment, control): prioritized vs random, optimal vs prioritized, fault-based vs coverage
COMPARISONS: Tuple[Tuple[str, str], ...] = (
    (FAULT_BASED, RANDOM_MEAN),
    (STATEMENT_COVERAGE, RANDOM_MEAN),
    (BRANCH_COVERAGE, RANDOM_MEAN),
    (OPTIMAL, FAULT_BASED),
    (OPTIMAL, STATEMENT_COVERAGE),
    (OPTIMAL, BRANCH_COVERAGE),
    (FAULT_BASED, STATEMENT_COVERAGE),
    (FAULT_BASED, BRANCH_COVERAGE),
)

AGGREGATE_LABEL = "aggregate"
_PERMUTATION_TAG = 7


def comparison_name(treatment: str, control: str) -> str:
    return f"{treatment}>{control}"


@dataclass(frozen=True)
class ComparisonTest:
    comparison: str
    set_size: int
    p_value: float
    n: int
    significant: bool


@dataclass
class RunReport:
    """Everything measured for one configured run (or the cross-run aggregate)"""
    label: str
    num_mrs: int
    curves: Dict[str, DetectionCurve]
    not_computed: Tuple[str, ...] = ()
    improvements: Dict[str, List[float]] = field(default_factory=dict)
    effective_sizes: Dict[str, List[EffectiveSetSize]] = field(default_factory=dict)
    avg_times: Dict[str, float] = field(default_factory=dict)
    time_reductions: Dict[str, float] = field(default_factory=dict)
    tests: List[ComparisonTest] = field(default_factory=list)
    kill_rate_mean: float = 0.0
    kill_rate_sd: float = 0.0
    orderings: Dict[str, Tuple[MrId, ...]] = field(default_factory=dict)
    provenance: Dict[str, Any] = field(default_factory=dict)

    def test_for(self, comparison: str, set_size: int) -> Optional[ComparisonTest]:
        for test in self.tests:
            if test.comparison == comparison and test.set_size == set_size:
                return test
        return None


@dataclass
class ExperimentReport:
    """The per-run reports plus the cross-run aggregate (None when runs differ in MR count)"""
    runs: List[RunReport]
    aggregate: Optional[RunReport] = None

    def __iter__(self) -> Iterator[RunReport]:
        return iter(self.runs)

    def __len__(self) -> int:
        return len(self.runs)


@dataclass
class _Evaluation:
    """Measurements of one (F_p, F_v) pair; replicates of a synthetic run each give one"""
    curves: Dict[str, DetectionCurve]
    avg_times: Dict[str, float]
    kill_rates: Tuple[float, float]
    orderings: Dict[str, MrOrdering] = field(default_factory=dict)


@dataclass(frozen=True)
class _Seeds:
    fault: int
    statement: int
    branch: int
    random: int
    optimal: int


def derive_seeds(*key: int, count: int) -> List[int]:
    """Deterministic u64 sub-seeds for a (config seed, run index, ...) key"""
    state = np.random.SeedSequence(list(key)).generate_state(count, dtype=np.uint64)
    return [int(s) for s in state]


def _ordered(values: Dict[str, Any]) -> Dict[str, Any]:
    return {m: values[m] for m in METHOD_ORDER if m in values}


# ---------------------------------------------------------------------------
# Measuring one prioritizing/validation pair
# ---------------------------------------------------------------------------

def _check_mr_sets(fp: KillMatrix, fv: KillMatrix, coverage: Optional[CoverageProfile]):
    if set(fp.mrs) != set(fv.mrs):
        raise MrSetMismatch(
            f"prioritizing and validation matrices disagree on MRs: "
            f"{sorted(set(fp.mrs) ^ set(fv.mrs))}"
        )
    if coverage is not None and set(coverage.mrs) != set(fp.mrs):
        raise MrSetMismatch(f"coverage profile MRs differ: {sorted(set(coverage.mrs) ^ set(fp.mrs))}")


def _evaluate(fp: KillMatrix, fv: KillMatrix, coverage: Optional[CoverageProfile],
              costs: Optional[CostProfile], seeds: _Seeds, config: ExperimentConfig) -> _Evaluation:
    _check_mr_sets(fp, fv, coverage)

    orderings: Dict[str, MrOrdering] = {FAULT_BASED: fault_based_order(fp, seeds.fault)[0]}
    if coverage is not None:
        if coverage.has(Criterion.STATEMENT):
            orderings[STATEMENT_COVERAGE] = coverage_based_order(coverage, Criterion.STATEMENT, seeds.statement)[0]
        if coverage.has(Criterion.BRANCH):
            orderings[BRANCH_COVERAGE] = coverage_based_order(coverage, Criterion.BRANCH, seeds.branch)[0]
    orderings[OPTIMAL] = optimal_order(fv, seeds.optimal)[0]
    randoms = random_orders(fv.mrs, config.random_n, seeds.random)

    curves = {key: detection_curve(o, fv, config.killable_only) for key, o in orderings.items()}
    curves[RANDOM_MEAN] = mean_curve([detection_curve(o, fv, config.killable_only) for o in randoms])

    avg_times: Dict[str, float] = {}
    if costs is not None:
        if killable_faults(fv):
            avg_times = {key: avg_time_to_detect(o, fv, costs) for key, o in orderings.items()}
            avg_times[RANDOM_MEAN] = float(np.mean([avg_time_to_detect(o, fv, costs) for o in randoms]))
        else:
            logger.warning("⚠️ No killable faults in the validation matrix; time-to-detect not computed")

    return _Evaluation(_ordered(curves), _ordered(avg_times), kill_rate_summary(fv), _ordered(orderings))


# ---------------------------------------------------------------------------
# Summarising evaluations into a report
# ---------------------------------------------------------------------------

def _paired_tests(evaluations: Sequence[_Evaluation], methods: Sequence[str], num_mrs: int,
                  config: ExperimentConfig, run_index: int, label: str) -> List[ComparisonTest]:
    n = len(evaluations)
    if n < 2:
        return []
    if min_attainable_p(n, config.max_exact_n, config.resamples) >= config.alpha:
        logger.warning("⚠️ %s: only n=%d paired values per set size; p can never fall below alpha=%g",
                       label, n, config.alpha)
    tests = []
    for c, (treatment, control) in enumerate(COMPARISONS):
        if treatment not in methods or control not in methods:
            continue
        name = comparison_name(treatment, control)
        for m in range(1, num_mrs + 1):
            sample = PairedSample.from_columns(
                [e.curves[treatment].at(m) for e in evaluations],
                [e.curves[control].at(m) for e in evaluations],
                label=f"{label}:{name}@{m}",
            )
            seed = derive_seeds(config.seed, _PERMUTATION_TAG, run_index, c, m, count=1)[0]
            p = paired_permutation_test(sample, max_exact_n=config.max_exact_n,
                                        resamples=config.resamples, seed=seed)
            tests.append(ComparisonTest(name, m, p, n, significance_flag(p, config.alpha)))
    return tests


def _build_report(label: str, num_mrs: int, evaluations: Sequence[_Evaluation],
                  config: ExperimentConfig, run_index: int, provenance: Dict[str, Any]) -> RunReport:
    methods = [m for m in METHOD_ORDER if all(m in e.curves for e in evaluations)]
    curves = {m: mean_curve([e.curves[m] for e in evaluations]) for m in methods}

    improvements = {}
    for treatment, control in COMPARISONS:
        if treatment in curves and control in curves:
            values = relative_improvement(curves[treatment], curves[control])
            if any(np.isinf(values)):
                logger.warning("⚠️ %s: %s has an infinite relative improvement (baseline detects nothing)",
                               label, comparison_name(treatment, control))
            improvements[comparison_name(treatment, control)] = values

    effective_sizes = {}
    if num_mrs >= 2:
        effective_sizes = {
            m: [effective_set_size(curve, t) for t in config.thresholds] for m, curve in curves.items()
        }

    timed = [m for m in METHOD_ORDER if all(m in e.avg_times for e in evaluations)]
    avg_times = {m: float(np.mean([e.avg_times[m] for e in evaluations])) for m in timed}
    time_reductions = {}
    baseline = avg_times.get(RANDOM_MEAN)
    if baseline:
        time_reductions = {m: time_reduction(t, baseline) for m, t in avg_times.items() if m != RANDOM_MEAN}

    orderings = {}
    if len(evaluations) == 1:
        orderings = {m: o.order for m, o in evaluations[0].orderings.items()}

    return RunReport(
        label=label,
        num_mrs=num_mrs,
        curves=curves,
        not_computed=tuple(m for m in METHOD_ORDER if m not in curves),
        improvements=improvements,
        effective_sizes=effective_sizes,
        avg_times=avg_times,
        time_reductions=time_reductions,
        tests=_paired_tests(evaluations, methods, num_mrs, config, run_index, label),
        kill_rate_mean=float(np.mean([e.kill_rates[0] for e in evaluations])),
        kill_rate_sd=float(np.mean([e.kill_rates[1] for e in evaluations])),
        orderings=orderings,
        provenance=provenance,
    )


# ---------------------------------------------------------------------------
# Runs
# ---------------------------------------------------------------------------

def _dataset_run(run: RunConfig, run_index: int, config: ExperimentConfig) -> RunReport:
    fp = parse_kill_matrix(run.prioritizing.path, run.prioritizing.meta)
    fv = parse_kill_matrix(run.validation.path, run.validation.meta)
    fp = filter_faults(fp, run.drop_all_false)
    fv = filter_faults(fv, run.drop_all_false, run.duplicate_faults)
    coverage = parse_coverage(run.coverage) if run.coverage else None
    costs = parse_costs(run.costs) if run.costs else None
    if coverage is None:
        logger.warning("⚠️ %s: no coverage data; coverage-based methods not computed", run.label)

    seeds = _Seeds(*derive_seeds(config.seed, run_index, count=5))
    evaluation = _evaluate(fp, fv, coverage, costs, seeds, config)
    provenance = {
        "prioritizing": {**run.prioritizing.meta.to_dict(), "file": run.prioritizing.path.name,
                         "faults": fp.num_faults},
        "validation": {**run.validation.meta.to_dict(), "file": run.validation.path.name,
                       "faults": fv.num_faults},
        "seeds": {"fault_based": seeds.fault, "statement": seeds.statement, "branch": seeds.branch,
                  "random": seeds.random, "optimal": seeds.optimal},
    }
    return _build_report(run.label, fv.num_mrs, [evaluation], config, run_index, provenance)


def _synthetic_run(run: RunConfig, run_index: int, config: ExperimentConfig) -> RunReport:
    synthetic = run.synthetic
    evaluations = []
    for replicate in range(synthetic.replicates):
        rate_seed, fp_seed, fv_seed, cost_seed, *ordering_seeds = derive_seeds(
            config.seed, run_index, replicate, count=9)
        rates = draw_kill_rates(synthetic.spec.with_seed(rate_seed))
        fp = gen_kill_matrix(synthetic.spec.with_seed(fp_seed), rates, Role.PRIORITIZING)
        fv = gen_kill_matrix(synthetic.spec.with_seed(fv_seed), rates, Role.VALIDATION)
        costs = None
        if synthetic.cost_mean_seconds is not None:
            costs = gen_costs(fv.mrs, synthetic.cost_mean_seconds, synthetic.cost_sd_seconds, cost_seed)
        evaluations.append(_evaluate(fp, fv, None, costs, _Seeds(*ordering_seeds), config))

    spec = synthetic.spec
    provenance = {
        "synthetic": {"num_mrs": spec.num_mrs, "num_faults": spec.num_faults,
                      "kill_rate_mean": spec.kill_rate_mean, "kill_rate_sd": spec.kill_rate_sd,
                      "overlap_bias": spec.overlap_bias, "replicates": synthetic.replicates},
    }
    return _build_report(run.label, spec.num_mrs, evaluations, config, run_index, provenance)


def _aggregate(reports: Sequence[RunReport], config: ExperimentConfig) -> Optional[RunReport]:
    sizes = {r.num_mrs for r in reports}
    if len(sizes) != 1:
        logger.warning("⚠️ Runs differ in MR count %s; no cross-run aggregate", sorted(sizes))
        return None
    evaluations = [
        _Evaluation(r.curves, r.avg_times, (r.kill_rate_mean, r.kill_rate_sd)) for r in reports
    ]
    provenance = {"runs": [r.label for r in reports]}
    return _build_report(AGGREGATE_LABEL, sizes.pop(), evaluations, config, 0, provenance)


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    """
    Execute the validation procedure for every configured run.

    Args:
        config: Loaded experiment configuration

    Returns:
        ExperimentReport with one RunReport per run plus the cross-run aggregate
    """
    shared = {
        "tool_version": __version__,
        "config_seed": config.seed,
        "random_n": config.random_n,
        "killable_only": config.killable_only,
    }
    reports = []
    for run_index, run in enumerate(config.runs, start=1):
        try:
            if run.is_synthetic:
                report = _synthetic_run(run, run_index, config)
            else:
                report = _dataset_run(run, run_index, config)
        except MRPrioError as e:
            raise with_context(e, f"run {run.label!r}") from e
        report.provenance.update(shared)
        logger.info("✅ Run %s evaluated (%d MRs)", run.label, report.num_mrs)
        reports.append(report)
    aggregate = _aggregate(reports, config)
    if aggregate is not None:
        aggregate.provenance.update(shared)
    return ExperimentReport(reports, aggregate)


# ---------------------------------------------------------------------------
# Report emission
# ---------------------------------------------------------------------------

def _slug(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "-", label).strip("-") or "run"


_REPORT_FILE = re.compile(r"^(run\d{2}_.+|aggregate)_(curves|summary|report)\.(csv|json)$")


def _remove_stale(out_dir: Path, written: List[Path]):
    """Drop report files from an earlier emission that this one did not rewrite"""
    keep = {p.name for p in written}
    suffix = written[0].suffix
    for path in sorted(out_dir.iterdir()):
        if path.name not in keep and path.suffix == suffix and _REPORT_FILE.match(path.name):
            path.unlink()
            logger.info("🧹 Removed stale report %s", path.name)


def report_prefixes(report: Union[ExperimentReport, Sequence[RunReport]]) -> List[Tuple[str, RunReport]]:
    """Deterministic file-name prefixes, one per run, plus the aggregate"""
    named = [(f"run{i:02d}_{_slug(r.label)}", r) for i, r in enumerate(report, start=1)]
    aggregate = getattr(report, "aggregate", None)
    if aggregate is not None:
        named.append((AGGREGATE_LABEL, aggregate))
    return named


def _display_number(value: float, suffix: str = "") -> str:
    if np.isinf(value):
        return "+inf" if value > 0 else "-inf"
    return f"{value:.2f}{suffix}"


def curve_rows(report: RunReport) -> List[Dict[str, Any]]:
    return [
        {"set_size": m, "method": method, "value": value, "value_display": _display_number(value, "%")}
        for method, curve in report.curves.items()
        for m, value in enumerate(curve.values, start=1)
    ]


def summary_rows(report: RunReport) -> List[Dict[str, Any]]:
    rows: List[Dict[str, Any]] = []

    def add(section, subject, key, value, display):
        rows.append({"section": section, "subject": subject, "key": key, "value": value,
                     "value_display": display})

    add("kill_rate", "validation", "mean", report.kill_rate_mean, format_percent(report.kill_rate_mean))
    add("kill_rate", "validation", "sd", report.kill_rate_sd, format_percent(report.kill_rate_sd))
    for method in report.not_computed:
        add("not_computed", method, "", None, "not computed")
    for name, values in report.improvements.items():
        for m, value in enumerate(values, start=1):
            test = report.test_for(name, m)
            star = "*" if test is not None and test.significant else ""
            add("relative_improvement", name, m, value, format_percent(value) + star)
    for method, sizes in report.effective_sizes.items():
        for size in sizes:
            add("effective_set_size", method, size.threshold, size.size, size.display())
    for method, seconds in report.avg_times.items():
        add("avg_time_to_detect", method, "seconds", seconds, f"{seconds:.0f}s")
    for method, reduction in report.time_reductions.items():
        add("time_reduction", method, RANDOM_MEAN, reduction, format_percent(reduction, 0))
    for test in report.tests:
        add("p_value", test.comparison, test.set_size, test.p_value,
            f"p={test.p_value:.4g} n={test.n}" + (" *" if test.significant else ""))
    for method, order in report.orderings.items():
        for position, mr in enumerate(order, start=1):
            add("ordering", method, position, position, mr)
    for subject, key, value in _flatten(report.provenance):
        add("provenance", subject, key, value, str(value))
    return rows


def _flatten(provenance: Dict[str, Any], subject: str = "run") -> List[Tuple[str, str, Any]]:
    """(subject, key, value) triples; a nested dict becomes its own subject"""
    triples = []
    for key, value in provenance.items():
        if isinstance(value, dict):
            triples.extend(_flatten(value, key))
        elif isinstance(value, (list, tuple)):
            triples.append((subject, key, ";".join(str(v) for v in value)))
        else:
            triples.append((subject, key, value))
    return triples


def _report_document(report: RunReport) -> Dict[str, Any]:
    def number(value):
        if value is None or not np.isinf(value):
            return value
        return "+inf" if value > 0 else "-inf"

    return {
        "label": report.label,
        "num_mrs": report.num_mrs,
        "curves": {m: list(c.values) for m, c in report.curves.items()},
        "not_computed": list(report.not_computed),
        "relative_improvement": {k: [number(v) for v in vs] for k, vs in report.improvements.items()},
        "effective_set_size": {
            m: [{"threshold": s.threshold, "size": s.size} for s in sizes]
            for m, sizes in report.effective_sizes.items()
        },
        "avg_time_to_detect": report.avg_times,
        "time_reduction": report.time_reductions,
        "permutation_tests": [
            {"comparison": t.comparison, "set_size": t.set_size, "p_value": t.p_value,
             "n": t.n, "significant": t.significant}
            for t in report.tests
        ],
        "kill_rate": {"mean": report.kill_rate_mean, "sd": report.kill_rate_sd},
        "orderings": {m: list(o) for m, o in report.orderings.items()},
        "provenance": report.provenance,
    }


def _atomic_write(path: Path, text: str):
    handle, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(handle, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit_report(report: Union[ExperimentReport, Sequence[RunReport]], fmt: str = "csv",
                out_dir="reports") -> List[Path]:
    """
    Write the report tables into ``out_dir``.

    Args:
        report: Result of run_experiment (a plain list of RunReports is also accepted)
        fmt: "csv" (curve and summary tables) or "json" (one document per run)
        out_dir: Output directory, created if missing; existing files are replaced atomically
            and report files of the same format left by a larger earlier run are removed

    Returns:
        Paths written, in a deterministic order
    """
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown report format {fmt!r}")
    named = report_prefixes(report)
    if not named:
        return []

    out_dir = Path(out_dir)
    written = []
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        for prefix, run_report in named:
            if fmt == "csv":
                curves = pd.DataFrame(curve_rows(run_report),
                                      columns=["set_size", "method", "value", "value_display"])
                summary = pd.DataFrame(summary_rows(run_report),
                                       columns=["section", "subject", "key", "value", "value_display"])
                outputs = {
                    out_dir / f"{prefix}_curves.csv": curves.to_csv(index=False, lineterminator="\n"),
                    out_dir / f"{prefix}_summary.csv": summary.to_csv(index=False, lineterminator="\n"),
                }
            else:
                text = json.dumps(_report_document(run_report), indent=2, allow_nan=False) + "\n"
                outputs = {out_dir / f"{prefix}_report.json": text}
            for path, text in outputs.items():
                _atomic_write(path, text)
                written.append(path)
        _remove_stale(out_dir, written)
    except OSError as e:
        raise ReportWriteError(f"cannot write reports to {out_dir}: {e}") from e

    logger.info("📁 Wrote %d report files to %s", len(written), out_dir)
    return written
