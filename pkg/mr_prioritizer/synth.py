"""
Synthetic kill matrices and cost profiles with controlled per-MR kill rates.

Each MR gets a kill probability drawn from normal(mean, sd) clipped to [0, 1].
A cell is killed when a uniform draw falls below that probability. With
probability ``overlap_bias`` the draw is the fault's shared difficulty instead
of a private one, so MRs agree on which faults are "easy" (0 = independent,
1 = nested kills). Per-cell kill probability is unaffected by the bias.
"""

import logging
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence

import numpy as np

from .core_model import CostProfile, DatasetMeta, KillMatrix, MrId, Role, check_seed
from .errors import InvalidSeed, InvalidSpec

logger = logging.getLogger(__name__)

# Stream tags: one independent generator per concern, all derived from the SynthSpec seed
_RATE_STREAM = 0
_CELL_STREAM = 1


@dataclass(frozen=True)
class SynthSpec:
    num_mrs: int
    num_faults: int
    kill_rate_mean: float
    kill_rate_sd: float
    overlap_bias: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for name in ("num_mrs", "num_faults"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
                raise InvalidSpec(f"{name} must be an integer >= 1, got {value!r}")
        if not 0.0 <= self.kill_rate_mean <= 1.0:
            raise InvalidSpec(f"kill_rate_mean must lie in [0, 1], got {self.kill_rate_mean}")
        if not self.kill_rate_sd >= 0.0:
            raise InvalidSpec(f"kill_rate_sd must be >= 0, got {self.kill_rate_sd}")
        if not 0.0 <= self.overlap_bias <= 1.0:
            raise InvalidSpec(f"overlap_bias must lie in [0, 1], got {self.overlap_bias}")
        try:
            check_seed(self.seed)
        except InvalidSeed as e:
            raise InvalidSpec(str(e)) from e

    def with_seed(self, seed: int) -> "SynthSpec":
        return replace(self, seed=seed)


def _stream(seed: int, tag: int) -> np.random.Generator:
    return np.random.default_rng([check_seed(seed), tag])


def mr_ids(count: int) -> List[MrId]:
    return [f"MR{i}" for i in range(1, count + 1)]


def fault_ids(count: int) -> List[str]:
    width = len(str(count))
    return [f"F{j:0{width}d}" for j in range(1, count + 1)]


def draw_kill_rates(spec: SynthSpec) -> Dict[MrId, float]:
    """The per-MR kill probabilities gen_kill_matrix uses for this spec"""
    draws = _stream(spec.seed, _RATE_STREAM).normal(spec.kill_rate_mean, spec.kill_rate_sd, spec.num_mrs)
    return dict(zip(mr_ids(spec.num_mrs), (float(p) for p in np.clip(draws, 0.0, 1.0))))


def gen_kill_matrix(spec: SynthSpec, kill_rates: Optional[Dict[MrId, float]] = None,
                    role: Role = Role.VALIDATION) -> KillMatrix:
    """
    Generate a kill matrix from ``spec``.

    Args:
        spec: Generator parameters, including the seed
        kill_rates: Per-MR probabilities to use instead of drawing them from the spec
            (lets a prioritizing and a validation matrix share MR behaviour)
        role: Role recorded in the matrix provenance

    Returns:
        KillMatrix whose meta label carries the seed
    """
    rates = kill_rates if kill_rates is not None else draw_kill_rates(spec)
    mrs = mr_ids(spec.num_mrs)
    if set(rates) != set(mrs):
        raise InvalidSpec("kill_rates must name exactly the generated MRs")
    p = np.array([rates[mr] for mr in mrs], dtype=float)[:, None]

    rng = _stream(spec.seed, _CELL_STREAM)
    shape = (spec.num_mrs, spec.num_faults)
    shared = rng.random(spec.num_faults)[None, :]
    private = rng.random(shape)
    use_shared = rng.random(shape) < spec.overlap_bias
    kills = np.where(use_shared, shared, private) < p

    meta = DatasetMeta(f"synthetic-seed{spec.seed}", role, "synthetic", "synth")
    logger.debug("generated %dx%d synthetic matrix (seed %d)", spec.num_mrs, spec.num_faults, spec.seed)
    return KillMatrix(tuple(mrs), tuple(fault_ids(spec.num_faults)), kills, meta=meta)


def gen_costs(mrs: Sequence[MrId], mean_seconds: float, sd_seconds: float, seed: int) -> CostProfile:
    """Per-MR costs drawn from normal(mean, sd) and clipped at zero"""
    if not mean_seconds > 0:
        raise InvalidSpec(f"mean_seconds must be positive, got {mean_seconds}")
    if not sd_seconds >= 0:
        raise InvalidSpec(f"sd_seconds must be >= 0, got {sd_seconds}")
    try:
        rng = np.random.default_rng(check_seed(seed))
    except InvalidSeed as e:
        raise InvalidSpec(str(e)) from e
    draws = np.clip(rng.normal(mean_seconds, sd_seconds, len(mrs)), 0.0, None)
    return CostProfile(dict(zip(mrs, (float(c) for c in draws))))
