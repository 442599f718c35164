"""Decoding problems: check matrix, action matrix and fault priors.

A problem ``(H, A, p)`` describes ``N`` independent faults. Column ``j`` of
``H`` lists the detectors fault ``j`` flips, column ``j`` of ``A`` the logical
observables it flips, and ``p[j]`` its prior probability.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import numpy.typing as npt

from .f2core import BitVec, SparseBitMatrix, append_row, mat_vec_mul

Syndrome = BitVec

_INSTRUCTION_RE = re.compile(r"^([A-Za-z_]+)\s*(?:\(([^)]*)\))?\s*(.*)$")
_TARGET_RE = re.compile(r"^([DL])(\d+)$")


class DemParseError(ValueError):
    """Raised when detector-error-model text cannot be parsed."""

    def __init__(self, message: str, line_number: int | None = None):
        self.line_number = line_number
        prefix = f"line {line_number}: " if line_number is not None else ""
        super().__init__(f"{prefix}{message}")


def llr_weights(priors: npt.ArrayLike) -> npt.NDArray[np.float64]:
    """Log-likelihood-ratio weights ``w_j = ln((1 - p_j) / p_j)``.

    Zero priors map to ``+inf``.
    """
    p = np.asarray(priors, dtype=np.float64)
    with np.errstate(divide="ignore"):
        return np.log1p(-p) - np.log(p)


def log_likelihood_from_weights(
    base: float, weights: npt.NDArray[np.float64], e: BitVec
) -> float:
    """``ln P[e]`` given ``base = ln P[0]`` and the LLR weights.

    The weights are summed with ``math.fsum``, so corrections using the same
    multiset of weights get bit-identical likelihoods whatever their order.
    """
    selected = weights[np.asarray(e, dtype=bool)]
    if selected.size == 0:
        return float(base)
    return float(base) - math.fsum(selected)


@dataclass(frozen=True, order=True)
class LogicalClass:
    """The pattern ``A·e`` of observables flipped by a correction.

    Ordering is lexicographic on the bits, which is the tie-break used
    wherever classes of equal likelihood must be ranked.
    """

    bits: tuple[int, ...]

    @classmethod
    def from_vector(cls, v: npt.ArrayLike) -> LogicalClass:
        return cls(tuple(int(b) & 1 for b in np.asarray(v).reshape(-1)))

    @classmethod
    def zeros(cls, k: int) -> LogicalClass:
        return cls((0,) * k)

    def __len__(self) -> int:
        return len(self.bits)

    def __getitem__(self, i: int) -> int:
        return self.bits[i]

    def __str__(self) -> str:
        return "".join(str(b) for b in self.bits)

    def as_array(self) -> BitVec:
        return np.asarray(self.bits, dtype=np.uint8)

    def to_int(self) -> int:
        """Integer with bit ``i`` equal to class bit ``i``."""
        return sum(b << i for i, b in enumerate(self.bits))

    @classmethod
    def from_int(cls, value: int, k: int) -> LogicalClass:
        return cls(tuple((value >> i) & 1 for i in range(k)))

    def to_hex(self) -> str:
        """Fixed-width hex rendering, ``ceil(K/4)`` digits, ``-`` when ``K == 0``."""
        if not self.bits:
            return "-"
        width = math.ceil(len(self.bits) / 4)
        return format(self.to_int(), f"0{width}x")

    @classmethod
    def from_hex(cls, text: str, k: int) -> LogicalClass:
        if text == "-":
            if k != 0:
                raise ValueError(f"Empty class marker '-' given for K={k}")
            return cls(())
        value = int(text, 16)
        if value >> k:
            raise ValueError(f"Class {text!r} does not fit in {k} bits")
        return cls.from_int(value, k)


@dataclass(frozen=True, eq=False)
class DecodingProblem:
    """Decoding problem ``(H, A, p)`` with precomputed LLR weights."""

    H: SparseBitMatrix
    A: SparseBitMatrix
    priors: npt.NDArray[np.float64]
    llr_weights: npt.NDArray[np.float64] = field(init=False, repr=False)
    base_log_likelihood: float = field(init=False, repr=False)

    def __post_init__(self):
        priors = np.array(self.priors, dtype=np.float64).reshape(-1)
        if self.H.cols != self.A.cols:
            raise ValueError(
                f"H has {self.H.cols} columns but A has {self.A.cols}"
            )
        if priors.shape[0] != self.H.cols:
            raise ValueError(
                f"Expected {self.H.cols} priors, got {priors.shape[0]}"
            )
        if not np.all((priors >= 0.0) & (priors < 0.5)):
            bad = int(np.flatnonzero(~((priors >= 0.0) & (priors < 0.5)))[0])
            raise ValueError(
                f"Prior of fault {bad} is {priors[bad]!r}; priors must lie in [0, 0.5)"
            )
        priors.setflags(write=False)
        weights = llr_weights(priors)
        weights.setflags(write=False)
        object.__setattr__(self, "priors", priors)
        object.__setattr__(self, "llr_weights", weights)
        object.__setattr__(self, "base_log_likelihood", math.fsum(np.log1p(-priors)))

    @property
    def num_faults(self) -> int:
        return self.H.cols

    @property
    def num_detectors(self) -> int:
        return self.H.rows

    @property
    def num_observables(self) -> int:
        return self.A.rows

    def same_as(self, other: DecodingProblem) -> bool:
        """Structural equality with exact prior comparison."""
        return (
            self.H == other.H
            and self.A == other.A
            and np.array_equal(self.priors, other.priors)
        )

    def __repr__(self) -> str:
        return (
            f"DecodingProblem(N={self.num_faults}, M={self.num_detectors}, "
            f"K={self.num_observables})"
        )


@dataclass(frozen=True, eq=False)
class ForcedInstance:
    """Problem with observable ``i`` forced to flip relative to a baseline class."""

    base: DecodingProblem
    observable_index: int
    H_aug: SparseBitMatrix
    forced_bit: int


def _check_length(e: BitVec, n: int, what: str = "Correction") -> None:
    if np.ndim(e) != 1 or len(e) != n:
        raise ValueError(
            f"Dimension mismatch: {what} has length {np.shape(e)}, expected {n}"
        )


def log_likelihood(prob: DecodingProblem, e: BitVec) -> float:
    """Natural log of ``P[e] = prod (1 - p_j)^(1 - e_j) p_j^e_j``."""
    _check_length(e, prob.num_faults)
    return log_likelihood_from_weights(prob.base_log_likelihood, prob.llr_weights, e)


def logical_class_of(prob: DecodingProblem, e: BitVec) -> LogicalClass:
    _check_length(e, prob.num_faults)
    return LogicalClass.from_vector(mat_vec_mul(prob.A, e))


def build_forced(
    prob: DecodingProblem, i: int, baseline_class: LogicalClass
) -> ForcedInstance:
    """Append row ``i`` of ``A`` to ``H`` and force observable ``i`` to flip.

    Args:
        prob: The base problem
        i: Observable index in ``[0, K)``
        baseline_class: Class ``L^(0)`` of the baseline decoder's correction

    Returns:
        ForcedInstance whose extra detector requires ``(A·e)_i == 1 ^ L^(0)_i``

    Raises:
        IndexError: If ``i`` is not a valid observable index
    """
    k = prob.num_observables
    if not 0 <= i < k:
        raise IndexError(f"Observable index {i} out of range for K={k}")
    if len(baseline_class) != k:
        raise ValueError(
            f"Baseline class has {len(baseline_class)} bits, expected {k}"
        )
    return ForcedInstance(
        base=prob,
        observable_index=i,
        H_aug=append_row(prob.H, prob.A.row_vector(i)),
        forced_bit=1 ^ baseline_class[i],
    )


def extend_syndrome(sigma: Syndrome, forced_bit: int) -> Syndrome:
    return np.append(np.asarray(sigma, dtype=np.uint8), np.uint8(forced_bit & 1))


def with_uniform_priors(prob: DecodingProblem, p: float) -> DecodingProblem:
    """Same ``(H, A)`` with every prior replaced by ``p``."""
    return DecodingProblem(prob.H, prob.A, np.full(prob.num_faults, p))


# Detector error model text ---------------------------------------------------


def _parse_error_targets(
    tokens: list[str], line_number: int
) -> tuple[set[int], set[int]]:
    detectors: set[int] = set()
    observables: set[int] = set()
    component: set[str] = set()
    for token in tokens:
        if token == "^":
            component = set()
            continue
        match = _TARGET_RE.match(token)
        if not match:
            raise DemParseError(f"Unrecognised target {token!r}", line_number)
        if token in component:
            raise DemParseError(f"Duplicate target {token!r}", line_number)
        component.add(token)
        bucket = detectors if match.group(1) == "D" else observables
        # Targets repeated across '^' components cancel.
        bucket ^= {int(match.group(2))}
    return detectors, observables


def parse_dem(text: str) -> DecodingProblem:
    """Parse detector-error-model text into a DecodingProblem.

    One fault column per ``error(p)`` instruction, in file order. ``detector``
    and ``logical_observable`` declarations only raise the detector and
    observable counts; their coordinate arguments are ignored.

    Raises:
        DemParseError: On malformed lines, bad probabilities, duplicate
            targets, unsupported instructions, or a file with no faults
    """
    priors: list[float] = []
    fault_detectors: list[list[int]] = []
    fault_observables: list[list[int]] = []
    num_detectors = 0
    num_observables = 0

    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        match = _INSTRUCTION_RE.match(line)
        if not match:
            raise DemParseError(f"Malformed line {raw!r}", line_number)
        name, args, rest = match.group(1), match.group(2), match.group(3).split()

        if name == "error":
            if args is None:
                raise DemParseError("error instruction needs a probability", line_number)
            try:
                p = float(args)
            except ValueError as e:
                raise DemParseError(f"Bad probability {args!r}", line_number) from e
            if not 0.0 <= p < 0.5:
                raise DemParseError(
                    f"Probability {p!r} outside [0, 0.5)", line_number
                )
            detectors, observables = _parse_error_targets(rest, line_number)
            priors.append(p)
            fault_detectors.append(sorted(detectors))
            fault_observables.append(sorted(observables))
            if detectors:
                num_detectors = max(num_detectors, max(detectors) + 1)
            if observables:
                num_observables = max(num_observables, max(observables) + 1)
        elif name in ("detector", "logical_observable"):
            prefix = "D" if name == "detector" else "L"
            for token in rest:
                target = _TARGET_RE.match(token)
                if target and target.group(1) == prefix:
                    index = int(target.group(2))
                    if prefix == "D":
                        num_detectors = max(num_detectors, index + 1)
                    else:
                        num_observables = max(num_observables, index + 1)
                elif target:
                    raise DemParseError(
                        f"{name} cannot declare {token!r}", line_number
                    )
        elif name == "repeat":
            raise DemParseError("repeat blocks are not supported", line_number)
        else:
            raise DemParseError(f"Unsupported instruction {name!r}", line_number)

    if not priors:
        raise DemParseError("No error instructions found")

    n = len(priors)
    h = SparseBitMatrix(n, num_detectors, fault_detectors).transpose()
    a = SparseBitMatrix(n, num_observables, fault_observables).transpose()
    return DecodingProblem(h, a, np.asarray(priors))


def serialize_dem(prob: DecodingProblem) -> str:
    """Render a problem as detector-error-model text, one ``error`` per column."""
    h_cols = prob.H.transpose()
    a_cols = prob.A.transpose()
    lines = [
        f"# {prob.num_faults} faults, {prob.num_detectors} detectors, "
        f"{prob.num_observables} observables"
    ]
    max_detector = -1
    max_observable = -1
    for j in range(prob.num_faults):
        detectors = h_cols.row(j)
        observables = a_cols.row(j)
        targets = [f"D{d}" for d in detectors] + [f"L{o}" for o in observables]
        if detectors:
            max_detector = max(max_detector, detectors[-1])
        if observables:
            max_observable = max(max_observable, observables[-1])
        lines.append(" ".join([f"error({float(prob.priors[j])!r})", *targets]))
    if prob.num_detectors - 1 > max_detector:
        lines.append(f"detector D{prob.num_detectors - 1}")
    if prob.num_observables - 1 > max_observable:
        lines.append(f"logical_observable L{prob.num_observables - 1}")
    return "\n".join(lines) + "\n"


def load_dem(path: Path) -> DecodingProblem:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"DEM file not found: {path}")
    return parse_dem(path.read_text(encoding="utf-8"))


def save_dem(prob: DecodingProblem, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(serialize_dem(prob), encoding="utf-8")
    return path
