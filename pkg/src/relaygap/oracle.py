"""Exact maximum-likelihood decoding by coset enumeration.

Every correction consistent with a syndrome is the particular solution plus a
kernel vector of ``H``, so the coset is enumerated over the kernel span in
blocks: the low kernel bits are expanded once, and the high bits are walked in
Gray-code order. Class masses are accumulated in log space.
"""

from __future__ import annotations

import math
from collections.abc import Iterator
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt
from scipy.special import logsumexp

from .f2core import BitVec, SparseBitMatrix, kernel_basis, mat_vec_mul, solve
from .problem import (
    DecodingProblem,
    LogicalClass,
    Syndrome,
    build_forced,
    extend_syndrome,
    llr_weights,
    log_likelihood_from_weights,
)
from .relaybp import CandidateSolution, DecodeOutcome, RelayConfig

MAX_KERNEL_DIM = 24
MAX_OBSERVABLES = 62
_LOW_BITS = 12


class EnumerationBudgetError(ValueError):
    """Raised when a coset is too large to enumerate."""


@dataclass(frozen=True, eq=False)
class ClassDistribution:
    """Log probability mass of each logical class within one syndrome coset.

    Classes whose every correction has probability zero are omitted.
    """

    log_masses: dict[LogicalClass, float] = field(default_factory=dict)
    best_corrections: dict[LogicalClass, BitVec] = field(default_factory=dict, repr=False)

    @property
    def entries(self) -> dict[LogicalClass, float]:
        return {cls: math.exp(lm) for cls, lm in self.log_masses.items()}

    @property
    def log_syndrome_mass(self) -> float:
        if not self.log_masses:
            return -math.inf
        return float(logsumexp(list(self.log_masses.values())))

    @property
    def syndrome_mass(self) -> float:
        return math.exp(self.log_syndrome_mass)

    def ranked(self) -> list[tuple[LogicalClass, float]]:
        """Classes by decreasing mass; equal masses in class-bit order."""
        return sorted(self.log_masses.items(), key=lambda kv: (-kv[1], kv[0]))


@dataclass(frozen=True, eq=False)
class MldResult:
    logical_class: LogicalClass
    log_probability: float
    correction: BitVec


def _kernel_dimension_check(basis: list[BitVec]) -> None:
    if len(basis) > MAX_KERNEL_DIM:
        raise EnumerationBudgetError(
            f"Kernel dimension {len(basis)} exceeds the enumeration budget of {MAX_KERNEL_DIM}"
        )


def _span(vectors: list[BitVec], n: int) -> npt.NDArray[np.uint8]:
    """All ``2^len(vectors)`` combinations, combination ``c`` in row ``c``."""
    count = len(vectors)
    if count == 0:
        return np.zeros((1, n), dtype=np.uint8)
    coefficients = (np.arange(1 << count)[:, None] >> np.arange(count)) & 1
    stacked = np.asarray(vectors, dtype=np.int64)
    return ((coefficients @ stacked) & 1).astype(np.uint8)


def iter_coset_blocks(h: SparseBitMatrix, sigma: Syndrome) -> Iterator[npt.NDArray[np.uint8]]:
    """Yield the coset ``{e : H·e = sigma}`` as 2-D blocks of rows.

    Raises:
        EnumerationBudgetError: If the kernel of ``H`` is too large
    """
    sigma = np.asarray(sigma, dtype=np.uint8)
    particular = solve(h, sigma)
    basis = kernel_basis(h)
    _kernel_dimension_check(basis)
    if particular is None:
        return
    low, high = basis[:_LOW_BITS], basis[_LOW_BITS:]
    low_span = _span(low, h.cols)
    offset = particular.copy()
    yield low_span ^ offset
    for step in range(1, 1 << len(high)):
        # Gray code: step flips the bit at the lowest set position
        flip = (step & -step).bit_length() - 1
        offset ^= high[flip]
        yield low_span ^ offset


def enumerate_coset(h: SparseBitMatrix, sigma: Syndrome) -> npt.NDArray[np.uint8]:
    """Every correction consistent with ``sigma``, one per row (no rows if infeasible)."""
    blocks = list(iter_coset_blocks(h, sigma))
    if not blocks:
        return np.zeros((0, h.cols), dtype=np.uint8)
    return np.vstack(blocks)


@dataclass
class _ClassStats:
    partial_log_masses: list[float] = field(default_factory=list)
    best_log_likelihood: float = -math.inf
    best_correction: BitVec | None = None


def _scan_coset(
    h: SparseBitMatrix, a: SparseBitMatrix, priors: npt.ArrayLike, sigma: Syndrome
) -> dict[int, _ClassStats]:
    if a.rows > MAX_OBSERVABLES:
        raise EnumerationBudgetError(
            f"{a.rows} observables exceed the oracle limit of {MAX_OBSERVABLES}"
        )
    priors = np.asarray(priors, dtype=np.float64)
    weights = llr_weights(priors)
    pinned = ~np.isfinite(weights)
    finite_weights = np.where(pinned, 0.0, weights)
    base = math.fsum(np.log1p(-priors))
    a_dense = a.to_dense().T.astype(np.int64)
    place_values = np.left_shift(np.int64(1), np.arange(a.rows, dtype=np.int64))

    stats: dict[int, _ClassStats] = {}
    for block in iter_coset_blocks(h, sigma):
        log_likelihoods = base - block @ finite_weights
        if pinned.any():
            log_likelihoods[block[:, pinned].any(axis=1)] = -np.inf
        keys = ((block.astype(np.int64) @ a_dense) & 1) @ place_values

        order = np.argsort(keys, kind="stable")
        sorted_keys = keys[order]
        cuts = np.flatnonzero(np.diff(sorted_keys)) + 1
        for group in np.split(order, cuts):
            values = log_likelihoods[group]
            finite = values[np.isfinite(values)]
            if finite.size == 0:
                continue
            entry = stats.setdefault(int(keys[group[0]]), _ClassStats())
            entry.partial_log_masses.append(float(logsumexp(finite)))
            # The matrix product is order-dependent; re-sum the winner exactly.
            top = block[group[int(np.argmax(values))]]
            exact = log_likelihood_from_weights(base, weights, top)
            if exact > entry.best_log_likelihood:
                entry.best_log_likelihood = exact
                entry.best_correction = top.copy()
    return stats


def _distribution(
    h: SparseBitMatrix, a: SparseBitMatrix, priors: npt.ArrayLike, sigma: Syndrome
) -> ClassDistribution:
    stats = _scan_coset(h, a, priors, sigma)
    log_masses: dict[LogicalClass, float] = {}
    corrections: dict[LogicalClass, BitVec] = {}
    for key in sorted(stats):
        cls = LogicalClass.from_int(key, a.rows)
        log_masses[cls] = float(logsumexp(stats[key].partial_log_masses))
        corrections[cls] = stats[key].best_correction
    return ClassDistribution(log_masses=log_masses, best_corrections=corrections)


def class_distribution(prob: DecodingProblem, sigma: Syndrome) -> ClassDistribution:
    """Probability of each logical class jointly with syndrome ``sigma``.

    Raises:
        EnumerationBudgetError: If the kernel of ``H`` has dimension above 24
    """
    return _distribution(prob.H, prob.A, prob.priors, sigma)


def mld_decode(prob: DecodingProblem, sigma: Syndrome) -> MldResult:
    """Most likely logical class and its log mass.

    The returned correction is the most likely single correction inside that
    class.

    Raises:
        ValueError: If no correction of nonzero probability reproduces ``sigma``
    """
    distribution = class_distribution(prob, sigma)
    ranked = distribution.ranked()
    if not ranked:
        raise ValueError("Syndrome is infeasible for this problem")
    cls, log_mass = ranked[0]
    return MldResult(
        logical_class=cls,
        log_probability=log_mass,
        correction=distribution.best_corrections[cls],
    )


def exact_gap(prob: DecodingProblem, sigma: Syndrome) -> float:
    """``log P[λ*] - log P[λ**]`` for the two most likely classes.

    Raises:
        ValueError: If fewer than two classes have nonzero mass
    """
    ranked = class_distribution(prob, sigma).ranked()
    if len(ranked) < 2:
        raise ValueError(
            f"Exact gap needs at least two logical classes, found {len(ranked)}"
        )
    return ranked[0][1] - ranked[1][1]


def exact_gap_via_forced(prob: DecodingProblem, sigma: Syndrome) -> float:
    """Exact gap with ``λ**`` found from ``K`` augmented instances.

    The runner-up class differs from ``λ*`` in at least one observable, so
    its mass is the largest class mass over the instances that force each
    observable ``i`` to differ from ``λ*``.
    """
    star = mld_decode(prob, sigma)
    runner_up = -math.inf
    for i in range(prob.num_observables):
        instance = build_forced(prob, i, star.logical_class)
        forced = _distribution(
            instance.H_aug,
            prob.A,
            prob.priors,
            extend_syndrome(sigma, instance.forced_bit),
        ).ranked()
        if forced:
            runner_up = max(runner_up, forced[0][1])
    if runner_up == -math.inf:
        raise ValueError("Exact gap needs at least two logical classes, found 1")
    return star.log_probability - runner_up


def max_likelihood_correction(
    prob: DecodingProblem, sigma: Syndrome
) -> tuple[BitVec, float] | None:
    """Most likely single correction and its log-likelihood, or ``None`` if infeasible."""
    return _max_correction(prob.H, prob.A, prob.priors, sigma)


def _max_correction(
    h: SparseBitMatrix, a: SparseBitMatrix, priors: npt.ArrayLike, sigma: Syndrome
) -> tuple[BitVec, float] | None:
    best: tuple[BitVec, float] | None = None
    stats = _scan_coset(h, a, priors, sigma)
    # Equal likelihoods resolve to the first class in class-bit order.
    for key in sorted(stats, key=lambda k: LogicalClass.from_int(k, a.rows)):
        entry = stats[key]
        if best is None or entry.best_log_likelihood > best[1]:
            best = (entry.best_correction, entry.best_log_likelihood)
    return best


def exhaustive_decoder(
    h: SparseBitMatrix,
    a: SparseBitMatrix,
    priors: npt.ArrayLike,
    sigma: Syndrome,
    cfg: RelayConfig,
) -> DecodeOutcome:
    """Decoder returning the single most likely correction.

    Has the relay decoder's call signature so the forced-gap engine can run
    with an exact decoder. ``cfg`` is ignored.
    """
    del cfg
    found = _max_correction(h, a, priors, sigma)
    if found is None:
        return DecodeOutcome(candidates=[], legs_run=1)
    correction, log_likelihood = found
    cls = LogicalClass.from_vector(mat_vec_mul(a, correction))
    return DecodeOutcome(
        candidates=[
            CandidateSolution(
                correction=correction,
                log_likelihood=log_likelihood,
                logical_class=cls,
                leg_index=0,
                iterations=0,
            )
        ],
        legs_run=1,
    )
