"""Relay belief propagation: min-sum BP with memory, run as a relay of legs.

Leg 0 runs flooding min-sum with a uniform memory strength ``gamma0``. Every
later leg starts from the previous leg's posteriors and draws a fresh memory
strength per variable, uniformly from ``[gamma_min, gamma_max]``. Each leg
that converges contributes its hard decision as a candidate correction.

Per iteration, for every variable ``j``::

    M_j      = Λ_j + Σ ν            (posterior, hard decision M_j < 0)
    Λ_j      ← (1 - γ_j)·w_j + γ_j·M_j
    μ_{j→c}  = Λ_j + Σ ν - ν_{c→j}
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

from .f2core import BitVec, SparseBitMatrix, mat_vec_mul
from .problem import (
    DecodingProblem,
    LogicalClass,
    Syndrome,
    llr_weights,
    log_likelihood_from_weights,
)

LLR_CLIP = 100.0

BASELINE_NUM_SETS = 1201
FORCED_NUM_SETS = 25

# (gamma_min, gamma_max) per circuit
MEMORY_PRESETS: dict[str, tuple[float, float]] = {
    "bb72": (-0.19, 0.26),
    "bb144": (-0.24, 0.66),
    "x1": (-0.16, 0.60),
    "y1": (-0.14, 0.66),
    "x1x1": (-0.14, 0.70),
}

_SEED_LIMIT = 2**64


def derive_seed(*parts: int) -> int:
    """Hash integers into a 64-bit seed.

    Used for per-leg, per-forced-run and per-shot substreams so results do not
    depend on execution order.
    """
    if any(int(p) < 0 for p in parts):
        raise ValueError(f"Seed parts must be non-negative, got {parts}")
    sequence = np.random.SeedSequence([int(p) for p in parts])
    return int(sequence.generate_state(1, np.uint64)[0])


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator for a 64-bit seed."""
    return np.random.Generator(np.random.Philox(seed))


@dataclass(frozen=True)
class RelayConfig:
    """Relay decoder parameters.

    Attributes:
        gamma0: Uniform memory strength of leg 0
        gamma_min: Lower bound of the per-variable memory strengths of later legs
        gamma_max: Upper bound of the per-variable memory strengths of later legs
        pre_iter: Iteration cap of leg 0
        set_max_iter: Iteration cap of every later leg
        num_sets: Maximum number of legs, leg 0 included
        stop_nconv: Stop after this many legs have converged
        seed: 64-bit seed for the memory-strength draws
    """

    gamma0: float = 0.1
    gamma_min: float = -0.24
    gamma_max: float = 0.66
    pre_iter: int = 80
    set_max_iter: int = 60
    num_sets: int = BASELINE_NUM_SETS
    stop_nconv: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.gamma_min > self.gamma_max:
            raise ValueError(
                f"gamma_min ({self.gamma_min}) must not exceed gamma_max ({self.gamma_max})"
            )
        for name in ("pre_iter", "set_max_iter", "num_sets", "stop_nconv"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not 0 <= self.seed < _SEED_LIMIT:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    def for_forced_runs(self) -> RelayConfig:
        """Same parameters with the smaller leg budget used by forced runs."""
        return dataclasses.replace(self, num_sets=FORCED_NUM_SETS)

    def with_memory_preset(self, name: str) -> RelayConfig:
        if name not in MEMORY_PRESETS:
            raise ValueError(
                f"Unknown memory preset {name!r}; choose from {sorted(MEMORY_PRESETS)}"
            )
        gamma_min, gamma_max = MEMORY_PRESETS[name]
        return dataclasses.replace(self, gamma_min=gamma_min, gamma_max=gamma_max)

    def with_seed(self, seed: int) -> RelayConfig:
        return dataclasses.replace(self, seed=seed)


@dataclass(frozen=True, eq=False)
class CandidateSolution:
    """A correction found by one converged leg."""

    correction: BitVec
    log_likelihood: float
    logical_class: LogicalClass
    leg_index: int
    iterations: int


@dataclass(frozen=True, eq=False)
class DecodeOutcome:
    """Candidates from one decoder invocation, most likely first."""

    candidates: list[CandidateSolution] = field(default_factory=list)
    legs_run: int = 0

    @property
    def converged(self) -> bool:
        return bool(self.candidates)

    @property
    def best(self) -> CandidateSolution | None:
        return self.candidates[0] if self.candidates else None


class BpState:
    """Tanner graph and message state of one decoder invocation.

    Faults with infinite weight (zero prior) are pinned to 0 and left out of
    the graph. Edges are stored check-major.
    """

    def __init__(self, h: SparseBitMatrix, weights: npt.NDArray[np.float64], sigma: Syndrome):
        self.num_checks = h.rows
        self.num_vars = h.cols
        self.weights = np.asarray(weights, dtype=np.float64)
        self.sigma = np.asarray(sigma, dtype=np.uint8)
        self.active = np.isfinite(self.weights)

        edge_check: list[int] = []
        edge_var: list[int] = []
        for c in range(h.rows):
            for v in h.row(c):
                if self.active[v]:
                    edge_check.append(c)
                    edge_var.append(v)
        self.edge_check = np.asarray(edge_check, dtype=np.int64)
        self.edge_var = np.asarray(edge_var, dtype=np.int64)
        degrees = np.bincount(self.edge_check, minlength=self.num_checks)
        starts = np.cumsum(degrees) - degrees
        self._nonempty = degrees > 0
        self._starts = starts[self._nonempty]
        self._edge_slot = np.cumsum(self._nonempty)[self.edge_check] - 1
        self._check_sign = np.where(self.sigma[self.edge_check] == 1, -1.0, 1.0)

        self.prior = np.where(self.active, self.weights, np.inf)
        self.posterior = self.prior.copy()
        self.mu = np.zeros(self.edge_var.size)
        self.nu = np.zeros(self.edge_var.size)
        self.hard_decision = np.zeros(self.num_vars, dtype=np.uint8)
        self.reset(self.prior)

    def reset(self, prior_llr: npt.NDArray[np.float64]) -> None:
        """Start a leg from the given effective priors."""
        self.prior = np.where(self.active, prior_llr, np.inf)
        self.mu = self.prior[self.edge_var].copy()
        self.nu = np.zeros(self.edge_var.size)

    def relay(self) -> None:
        """Start the next leg from the current posteriors."""
        self.reset(self.posterior)

    def check_update(self) -> None:
        if self.edge_var.size == 0:
            return
        magnitude = np.abs(self.mu)
        negative = (self.mu < 0).astype(np.int64)
        parity = np.add.reduceat(negative, self._starts)[self._edge_slot] & 1
        min1 = np.minimum.reduceat(magnitude, self._starts)[self._edge_slot]
        is_min = magnitude == min1
        min_count = np.add.reduceat(is_min.astype(np.int64), self._starts)[self._edge_slot]
        without_min = np.where(is_min, np.inf, magnitude)
        min2 = np.minimum.reduceat(without_min, self._starts)[self._edge_slot]
        others = np.where(is_min & (min_count == 1), min2, min1)
        sign = self._check_sign * np.where((parity ^ negative) == 1, -1.0, 1.0)
        self.nu = sign * np.minimum(others, LLR_CLIP)

    def variable_update(self, gamma: npt.NDArray[np.float64]) -> None:
        incoming = np.bincount(self.edge_var, weights=self.nu, minlength=self.num_vars)
        active = self.active
        posterior = np.full(self.num_vars, np.inf)
        posterior[active] = self.prior[active] + incoming[active]
        self.posterior = posterior
        self.hard_decision = (posterior < 0).astype(np.uint8)
        mixed = np.full(self.num_vars, np.inf)
        mixed[active] = (1.0 - gamma[active]) * self.weights[active] + gamma[active] * posterior[active]
        self.prior = mixed
        self.mu = mixed[self.edge_var] + incoming[self.edge_var] - self.nu

    def satisfied(self) -> bool:
        """Whether the hard decision reproduces the syndrome."""
        if self.num_checks == 0:
            return True
        parity = np.bincount(
            self.edge_check,
            weights=self.hard_decision[self.edge_var],
            minlength=self.num_checks,
        ).astype(np.int64) & 1
        return bool(np.array_equal(parity, self.sigma))


def bp_leg(
    state: BpState, gamma: npt.NDArray[np.float64], max_iter: int
) -> tuple[BitVec | None, int]:
    """Run up to ``max_iter`` min-sum iterations with memory strengths ``gamma``.

    Returns:
        Tuple of (hard decision at the first iteration satisfying the
        syndrome or ``None``, iterations run)
    """
    if max_iter < 1:
        raise ValueError(f"max_iter must be >= 1, got {max_iter}")
    gamma = np.broadcast_to(np.asarray(gamma, dtype=np.float64), (state.num_vars,))
    for iteration in range(1, max_iter + 1):
        state.check_update()
        state.variable_update(gamma)
        if state.satisfied():
            return state.hard_decision.copy(), iteration
    return None, max_iter


def sample_gammas(
    cfg: RelayConfig, leg_index: int, rng: np.random.Generator, n: int
) -> npt.NDArray[np.float64]:
    """Per-variable memory strengths for leg ``leg_index >= 1``."""
    if leg_index < 1:
        raise ValueError("Leg 0 uses the uniform strength gamma0")
    return rng.uniform(cfg.gamma_min, cfg.gamma_max, size=n)


def _check_dimensions(
    h: SparseBitMatrix, a: SparseBitMatrix, priors: npt.ArrayLike, sigma: Syndrome
) -> None:
    if a.cols != h.cols:
        raise ValueError(f"H has {h.cols} columns but A has {a.cols}")
    if np.shape(priors) != (h.cols,):
        raise ValueError(f"Expected {h.cols} priors, got shape {np.shape(priors)}")
    if np.shape(sigma) != (h.rows,):
        raise ValueError(
            f"Dimension mismatch: syndrome has shape {np.shape(sigma)}, H has {h.rows} rows"
        )


def relay_decode(
    h: SparseBitMatrix,
    a: SparseBitMatrix,
    priors: npt.ArrayLike,
    sigma: Syndrome,
    cfg: RelayConfig,
) -> DecodeOutcome:
    """Decode syndrome ``sigma`` with the relay of memory-BP legs.

    Args:
        h: Check matrix (M x N)
        a: Action matrix (K x N)
        priors: Fault priors of length N
        sigma: Syndrome of length M
        cfg: Relay parameters, including the seed

    Returns:
        DecodeOutcome with distinct candidates sorted by descending
        log-likelihood (ties keep discovery order)
    """
    _check_dimensions(h, a, priors, sigma)
    priors = np.asarray(priors, dtype=np.float64)
    weights = llr_weights(priors)
    base = math.fsum(np.log1p(-priors))
    state = BpState(h, weights, sigma)

    candidates: list[CandidateSolution] = []
    seen: set[bytes] = set()
    converged_legs = 0
    legs_run = 0
    for leg in range(cfg.num_sets):
        if leg == 0:
            gamma = np.full(state.num_vars, cfg.gamma0)
            max_iter = cfg.pre_iter
        else:
            state.relay()
            gamma = sample_gammas(cfg, leg, make_rng(derive_seed(cfg.seed, leg)), state.num_vars)
            max_iter = cfg.set_max_iter
        correction, iterations = bp_leg(state, gamma, max_iter)
        legs_run += 1
        if correction is None:
            continue
        converged_legs += 1
        key = np.packbits(correction).tobytes()
        if key not in seen:
            seen.add(key)
            candidates.append(
                CandidateSolution(
                    correction=correction,
                    log_likelihood=log_likelihood_from_weights(base, weights, correction),
                    logical_class=LogicalClass.from_vector(mat_vec_mul(a, correction)),
                    leg_index=leg,
                    iterations=iterations,
                )
            )
        if converged_legs >= cfg.stop_nconv:
            break

    candidates.sort(key=lambda c: -c.log_likelihood)
    return DecodeOutcome(candidates=candidates, legs_run=legs_run)


def decode_problem(prob: DecodingProblem, sigma: Syndrome, cfg: RelayConfig) -> DecodeOutcome:
    return relay_decode(prob.H, prob.A, prob.priors, sigma, cfg)
