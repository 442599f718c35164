"""Monte Carlo experiments: sample shots, decode with the forced gap, sweep thresholds."""

from __future__ import annotations

import math
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field
from multiprocessing import Pool
from pathlib import Path
from typing import Literal

import numpy as np
from scipy.stats import norm

from .codes import PRESET_NAMES, Side, build_preset
from .f2core import BitVec, mat_vec_mul
from .forcedgap import audit_outcome, decoded_class, gap_category, run_forced_gap
from .oracle import class_distribution
from .problem import (
    DecodingProblem,
    LogicalClass,
    Syndrome,
    load_dem,
    logical_class_of,
    with_uniform_priors,
)
from .relaybp import RelayConfig, derive_seed, make_rng

Statistic = Literal["forced", "exact"]
STATISTICS: tuple[str, ...] = ("forced", "exact")

# Substream of a shot seed reserved for fault sampling; decoder runs use 0..K.
SAMPLING_STREAM = 2**32 - 1


class DecodeAuditError(RuntimeError):
    """Raised when a decoded shot fails re-verification."""


@dataclass(frozen=True)
class ShotRecord:
    shot_index: int
    shot_seed: int
    true_class: LogicalClass
    gap: float
    erasure: bool
    decoded_class: LogicalClass | None
    success: bool
    forced_converged_count: int

    @property
    def category(self) -> str:
        return gap_category(self.gap, self.erasure)


@dataclass(frozen=True)
class CurvePoint:
    """One threshold of a post-selection curve.

    ``ps_rate`` is the rejected fraction; ``ler`` and its Wilson interval
    refer to the accepted shots. With no accepted shots ``ler`` is 0 and the
    interval is ``(0, 1)``.
    """

    threshold: float
    ps_rate: float
    ler: float
    ler_per_round: float
    ci_low: float
    ci_high: float
    n_accepted: int


@dataclass(frozen=True)
class ExperimentConfig:
    """What to decode and how.

    Attributes:
        source: Preset name, DEM path, or a ready DecodingProblem
        baseline: Decoder parameters of baseline runs
        forced: Decoder parameters of forced runs
        n_shots: Number of shots
        rounds: Syndrome-extraction rounds, for per-round normalization
        master_seed: Seed from which every shot seed is derived
        worker_count: Worker processes; 1 decodes in-process
        p: Uniform prior for presets, or to override DEM priors
        side: Check side for CSS presets
        statistic: ``forced`` for the decoder-based gap, ``exact`` for the
            exhaustive oracle's gap
    """

    source: str | Path | DecodingProblem
    baseline: RelayConfig = field(default_factory=RelayConfig)
    forced: RelayConfig = field(default_factory=lambda: RelayConfig().for_forced_runs())
    n_shots: int = 1000
    rounds: int = 1
    master_seed: int = 0
    worker_count: int = 1
    p: float | None = None
    side: Side = "Z"
    statistic: Statistic = "forced"

    def __post_init__(self):
        if self.n_shots < 1:
            raise ValueError(f"n_shots must be >= 1, got {self.n_shots}")
        if self.rounds < 1:
            raise ValueError(f"rounds must be >= 1, got {self.rounds}")
        if self.worker_count < 1:
            raise ValueError(f"worker_count must be >= 1, got {self.worker_count}")
        if self.statistic not in STATISTICS:
            raise ValueError(
                f"statistic must be one of {list(STATISTICS)}, got {self.statistic!r}"
            )
        if self.master_seed < 0:
            raise ValueError(f"master_seed must be non-negative, got {self.master_seed}")

    def resolve_problem(self) -> DecodingProblem:
        if isinstance(self.source, DecodingProblem):
            return self.source
        if isinstance(self.source, str) and self.source in PRESET_NAMES:
            if self.p is None:
                raise ValueError(f"Preset {self.source!r} needs a prior p")
            return build_preset(self.source, self.p, self.side)
        prob = load_dem(Path(self.source))
        return prob if self.p is None else with_uniform_priors(prob, self.p)


def sample_shot(
    prob: DecodingProblem, rng: np.random.Generator
) -> tuple[BitVec, Syndrome, LogicalClass]:
    """Draw independent faults and return ``(f, H·f, A·f)``."""
    f = (rng.random(prob.num_faults) < prob.priors).astype(np.uint8)
    return f, mat_vec_mul(prob.H, f), logical_class_of(prob, f)


def decode_shot(prob: DecodingProblem, cfg: ExperimentConfig, index: int) -> ShotRecord:
    """Sample and decode shot ``index``.

    Raises:
        DecodeAuditError: If any decoder candidate fails re-verification
    """
    shot_seed = derive_seed(cfg.master_seed, index)
    _, sigma, true_class = sample_shot(prob, make_rng(derive_seed(shot_seed, SAMPLING_STREAM)))

    if cfg.statistic == "exact":
        ranked = class_distribution(prob, sigma).ranked()
        decoded = ranked[0][0]
        gap = ranked[0][1] - ranked[1][1] if len(ranked) > 1 else math.inf
        return ShotRecord(
            shot_index=index,
            shot_seed=shot_seed,
            true_class=true_class,
            gap=gap,
            erasure=False,
            decoded_class=decoded,
            success=decoded == true_class,
            forced_converged_count=0,
        )

    outcome = run_forced_gap(prob, sigma, cfg.baseline, cfg.forced, shot_seed=shot_seed)
    violations = audit_outcome(prob, sigma, outcome)
    if violations:
        raise DecodeAuditError(f"Shot {index} failed audit: " + "; ".join(violations))
    decoded = None if outcome.erasure else decoded_class(outcome)
    return ShotRecord(
        shot_index=index,
        shot_seed=shot_seed,
        true_class=true_class,
        gap=outcome.gap,
        erasure=outcome.erasure,
        decoded_class=decoded,
        success=decoded is not None and decoded == true_class,
        forced_converged_count=outcome.forced_converged_count,
    )


_worker_problem: DecodingProblem | None = None
_worker_config: ExperimentConfig | None = None


def _init_worker(prob: DecodingProblem, cfg: ExperimentConfig) -> None:
    global _worker_problem, _worker_config
    _worker_problem = prob
    _worker_config = cfg


def _decode_in_worker(index: int) -> ShotRecord:
    return decode_shot(_worker_problem, _worker_config, index)


def run_experiment(
    cfg: ExperimentConfig,
    echo: Callable[[str], None] = print,
) -> list[ShotRecord]:
    """Decode ``cfg.n_shots`` shots.

    Shot ``i`` depends only on ``(master_seed, i)``, so the records are the
    same for every worker count.

    Args:
        cfg: Experiment configuration
        echo: Receives progress lines

    Returns:
        Records ordered by shot index
    """
    echo("[1/3] Loading problem...")
    prob = cfg.resolve_problem()
    echo(
        f"  N={prob.num_faults} faults, M={prob.num_detectors} detectors, "
        f"K={prob.num_observables} observables"
    )

    echo(f"[2/3] Decoding {cfg.n_shots} shots ({cfg.statistic} gap, {cfg.worker_count} workers)...")
    step = max(1, cfg.n_shots // 10)
    records: list[ShotRecord] = []

    def collect(results: Iterable[ShotRecord]) -> None:
        for record in results:
            records.append(record)
            if len(records) % step == 0 or len(records) == cfg.n_shots:
                echo(f"  {len(records)}/{cfg.n_shots} shots")

    if cfg.worker_count == 1:
        collect(decode_shot(prob, cfg, i) for i in range(cfg.n_shots))
    else:
        chunksize = max(1, cfg.n_shots // (cfg.worker_count * 8))
        with Pool(
            processes=cfg.worker_count,
            initializer=_init_worker,
            initargs=(prob, cfg),
        ) as pool:
            collect(pool.imap(_decode_in_worker, range(cfg.n_shots), chunksize=chunksize))

    summary = summarize(records)
    echo(
        f"[3/3] Done: {summary['erasures']} erasures, {summary['zero_gap']} zero gaps, "
        f"{summary['infinite_gap']} infinite gaps, LER at T=0 {summary['ler_at_zero']:.4g}"
    )
    return records


def per_round_ler(p_total: float, rounds: int) -> float:
    """Per-round rate ``1 - (1 - p_total)^(1/rounds)``."""
    if not 0.0 <= p_total <= 1.0:
        raise ValueError(f"p_total must lie in [0, 1], got {p_total!r}")
    if rounds < 1:
        raise ValueError(f"rounds must be >= 1, got {rounds}")
    if p_total == 1.0:
        return 1.0
    return -math.expm1(math.log1p(-p_total) / rounds)


def wilson_ci(failures: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for ``failures / n``."""
    if n <= 0:
        raise ValueError("Wilson interval needs at least one trial")
    if not 0 <= failures <= n:
        raise ValueError(f"failures must lie in [0, {n}], got {failures}")
    if not 0.0 < confidence < 1.0:
        raise ValueError(f"confidence must lie in (0, 1), got {confidence}")
    z = float(norm.ppf(1.0 - (1.0 - confidence) / 2.0))
    phat = failures / n
    denom = 1.0 + z * z / n
    centre = phat + z * z / (2 * n)
    margin = z * math.sqrt(phat * (1.0 - phat) / n + z * z / (4 * n * n))
    low = max(0.0, (centre - margin) / denom)
    high = min(1.0, (centre + margin) / denom)
    return min(low, phat), max(high, phat)


def sweep_thresholds(
    records: Sequence[ShotRecord],
    thresholds: Sequence[float],
    rounds: int = 1,
    confidence: float = 0.95,
) -> list[CurvePoint]:
    """Post-selection curve over ascending thresholds.

    A shot is accepted at ``T`` when its gap is at least ``T``. Erasures are
    failures when accepted, which only happens at ``T = 0``.
    """
    if not records:
        raise ValueError("Cannot sweep an empty record list")
    if any(not t >= 0 for t in thresholds):
        raise ValueError(f"Thresholds must be >= 0: {list(thresholds)}")
    if any(b < a for a, b in zip(thresholds, thresholds[1:])):
        raise ValueError(f"Thresholds must be sorted ascending: {list(thresholds)}")

    gaps = np.asarray([r.gap for r in records], dtype=np.float64)
    failed = np.asarray([not r.success for r in records])
    n = len(records)
    points = []
    for t in thresholds:
        accepted = gaps >= t
        n_accepted = int(accepted.sum())
        if n_accepted:
            failures = int((failed & accepted).sum())
            ler = failures / n_accepted
            ci_low, ci_high = wilson_ci(failures, n_accepted, confidence)
        else:
            ler, ci_low, ci_high = 0.0, 0.0, 1.0
        points.append(
            CurvePoint(
                threshold=float(t),
                ps_rate=(n - n_accepted) / n,
                ler=ler,
                ler_per_round=per_round_ler(ler, rounds),
                ci_low=ci_low,
                ci_high=ci_high,
                n_accepted=n_accepted,
            )
        )
    return points


def summarize(records: Sequence[ShotRecord]) -> dict[str, float | int]:
    """Counts of erasures, exact-zero and infinite gaps, and the LER at ``T = 0``."""
    if not records:
        raise ValueError("Cannot summarize an empty record list")
    categories = [r.category for r in records]
    failures = sum(not r.success for r in records)
    return {
        "shots": len(records),
        "erasures": categories.count("erasure"),
        "zero_gap": categories.count("zero"),
        "finite_gap": categories.count("finite"),
        "infinite_gap": categories.count("infinite"),
        "failures_at_zero": failures,
        "ler_at_zero": failures / len(records),
    }


def threshold_for_rejection(records: Sequence[ShotRecord], target: float) -> float | None:
    """Smallest threshold rejecting at least ``target`` of the shots.

    Only gap values present in ``records`` can change the rejected set, so
    the candidates are 0 and the distinct gaps.

    Returns:
        The threshold, or ``None`` when even ``T = inf`` rejects too few shots
    """
    if not records:
        raise ValueError("Cannot choose a threshold from an empty record list")
    if not 0.0 <= target <= 1.0:
        raise ValueError(f"target must lie in [0, 1], got {target!r}")
    gaps = np.asarray([r.gap for r in records], dtype=np.float64)
    for t in np.unique(np.concatenate([[0.0], gaps])):
        if np.count_nonzero(gaps < t) / gaps.size >= target:
            return float(t)
    return None

