"""Forced-gap post-selection.

A baseline decoder run is followed by one forced run per logical observable.
Forced run ``i`` decodes the problem with row ``i`` of ``A`` appended to ``H``
and the complement of the baseline class bit appended to the syndrome, so any
solution it finds lies in a different logical class. The gap between the two
most likely classes found across all runs decides whether the shot is kept.
"""

from __future__ import annotations

import math
from collections.abc import Iterable
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np
import numpy.typing as npt

from .f2core import BitVec, SparseBitMatrix, mat_vec_mul
from .problem import (
    DecodingProblem,
    LogicalClass,
    Syndrome,
    build_forced,
    extend_syndrome,
    log_likelihood,
    logical_class_of,
)
from .relaybp import (
    CandidateSolution,
    DecodeOutcome,
    RelayConfig,
    derive_seed,
    relay_decode,
)

GapValue = float


class Decoder(Protocol):
    """Anything with the ``relay_decode`` call signature."""

    def __call__(
        self,
        h: SparseBitMatrix,
        a: SparseBitMatrix,
        priors: npt.ArrayLike,
        sigma: Syndrome,
        cfg: RelayConfig,
    ) -> DecodeOutcome: ...


@dataclass(frozen=True, eq=False)
class GapOutcome:
    """Result of the baseline run plus the forced runs for one syndrome.

    ``class_table`` maps each logical class found to the log-likelihood of its
    best correction, most likely class first. ``runs`` holds the baseline
    outcome followed by forced run ``0..K-1``; only the baseline is present
    for an erasure.
    """

    gap: GapValue
    erasure: bool
    lambda0: LogicalClass | None = None
    lambda1: LogicalClass | None = None
    best_correction: BitVec | None = None
    baseline_class: LogicalClass | None = None
    forced_converged_count: int = 0
    class_table: dict[LogicalClass, float] = field(default_factory=dict)
    runs: list[DecodeOutcome] = field(default_factory=list)


@dataclass(frozen=True)
class Decision:
    accepted: bool
    threshold: float


def _best_per_class(
    candidates: Iterable[CandidateSolution],
) -> list[CandidateSolution]:
    best: dict[LogicalClass, CandidateSolution] = {}
    for cand in candidates:
        current = best.get(cand.logical_class)
        if current is None or cand.log_likelihood > current.log_likelihood:
            best[cand.logical_class] = cand
    return sorted(best.values(), key=lambda c: (-c.log_likelihood, c.logical_class))


def pool_classes(candidates: Iterable[CandidateSolution]) -> dict[LogicalClass, float]:
    """Best log-likelihood per logical class, ordered from most to least likely.

    Ties in likelihood are ordered by class bits.
    """
    return {c.logical_class: c.log_likelihood for c in _best_per_class(candidates)}


def run_forced_gap(
    prob: DecodingProblem,
    sigma: Syndrome,
    cfg_baseline: RelayConfig,
    cfg_forced: RelayConfig,
    decoder: Decoder = relay_decode,
    shot_seed: int | None = None,
) -> GapOutcome:
    """Compute the forced gap for one syndrome.

    Args:
        prob: The decoding problem
        sigma: Observed syndrome
        cfg_baseline: Decoder parameters of the baseline run
        cfg_forced: Decoder parameters of the forced runs
        decoder: Decoder to run; the relay decoder by default
        shot_seed: Seed from which the per-run seeds are derived; defaults
            to ``cfg_baseline.seed``

    Returns:
        GapOutcome; an erasure (gap 0) when the baseline run fails, gap
        ``inf`` when only one logical class is found
    """
    sigma = np.asarray(sigma, dtype=np.uint8)
    if sigma.shape != (prob.num_detectors,):
        raise ValueError(
            f"Dimension mismatch: syndrome has shape {sigma.shape}, "
            f"problem has {prob.num_detectors} detectors"
        )
    seed = cfg_baseline.seed if shot_seed is None else shot_seed

    baseline = decoder(
        prob.H, prob.A, prob.priors, sigma, cfg_baseline.with_seed(derive_seed(seed, 0))
    )
    if not baseline.converged:
        return GapOutcome(gap=0.0, erasure=True, runs=[baseline])

    baseline_class = baseline.candidates[0].logical_class
    runs = [baseline]
    forced_converged = 0
    for i in range(prob.num_observables):
        instance = build_forced(prob, i, baseline_class)
        outcome = decoder(
            instance.H_aug,
            prob.A,
            prob.priors,
            extend_syndrome(sigma, instance.forced_bit),
            cfg_forced.with_seed(derive_seed(seed, i + 1)),
        )
        runs.append(outcome)
        forced_converged += int(outcome.converged)

    ranked = _best_per_class(c for run in runs for c in run.candidates)
    top = ranked[0]
    if len(ranked) == 1 or ranked[1].log_likelihood == -math.inf:
        gap = math.inf
    else:
        gap = top.log_likelihood - ranked[1].log_likelihood
    return GapOutcome(
        gap=gap,
        erasure=False,
        lambda0=top.logical_class,
        lambda1=ranked[1].logical_class if len(ranked) > 1 else None,
        best_correction=top.correction,
        baseline_class=baseline_class,
        forced_converged_count=forced_converged,
        class_table={c.logical_class: c.log_likelihood for c in ranked},
        runs=runs,
    )


def decide(gap: GapValue, threshold: float) -> Decision:
    """Reject when ``gap < threshold``; ``threshold == 0`` keeps every shot."""
    if not threshold >= 0:
        raise ValueError(f"Threshold must be >= 0, got {threshold!r}")
    return Decision(accepted=not gap < threshold, threshold=threshold)


def decoded_class(outcome: GapOutcome) -> LogicalClass:
    """The pooled most likely class reported for an accepted shot."""
    if outcome.erasure or outcome.lambda0 is None:
        raise ValueError("An erasure has no decoded class")
    return outcome.lambda0


def gap_category(gap: GapValue, erasure: bool) -> str:
    """One of ``erasure``, ``zero``, ``finite`` or ``infinite``."""
    if erasure:
        return "erasure"
    if math.isinf(gap):
        return "infinite"
    return "zero" if gap == 0.0 else "finite"


def classify_gap(outcome: GapOutcome) -> str:
    return gap_category(outcome.gap, outcome.erasure)


def audit_outcome(
    prob: DecodingProblem, sigma: Syndrome, outcome: GapOutcome
) -> list[str]:
    """Re-verify every candidate of every run.

    Checks that each correction reproduces the syndrome, that its recorded
    class and likelihood match, and that forced-run candidates flip their
    observable relative to the baseline class.

    Returns:
        Human-readable violations; empty when the outcome is valid
    """
    sigma = np.asarray(sigma, dtype=np.uint8)
    problems: list[str] = []
    for run_index, run in enumerate(outcome.runs):
        label = "baseline" if run_index == 0 else f"forced run {run_index - 1}"
        for n, cand in enumerate(run.candidates):
            if not np.array_equal(mat_vec_mul(prob.H, cand.correction), sigma):
                problems.append(f"{label} candidate {n}: H·e does not match the syndrome")
            if logical_class_of(prob, cand.correction) != cand.logical_class:
                problems.append(f"{label} candidate {n}: recorded class is not A·e")
            expected = log_likelihood(prob, cand.correction)
            if not math.isclose(cand.log_likelihood, expected, rel_tol=1e-9, abs_tol=1e-9):
                problems.append(
                    f"{label} candidate {n}: log-likelihood {cand.log_likelihood} != {expected}"
                )
            if run_index > 0 and outcome.baseline_class is not None:
                i = run_index - 1
                if cand.logical_class[i] != 1 ^ outcome.baseline_class[i]:
                    problems.append(
                        f"{label} candidate {n}: observable {i} not flipped from baseline"
                    )
    if not outcome.erasure and outcome.runs and outcome.runs[0].converged:
        table_best = next(iter(outcome.class_table.values()))
        if table_best < outcome.runs[0].candidates[0].log_likelihood:
            problems.append("pooled best class is less likely than the baseline best")
    return problems
