"""Built-in decoding problems.

Repetition codes (code-capacity and phenomenological) for desk-scale tests,
and bivariate bicycle CSS codes with computed logical action matrices.
"""

from __future__ import annotations

import functools
import re
from dataclasses import dataclass
from typing import Literal

import numpy as np
import numpy.typing as npt

from .f2core import (
    BitVec,
    SparseBitMatrix,
    independent_complement,
    is_zero,
    kernel_basis,
    mat_mul,
    rank,
)
from .problem import DecodingProblem

Side = Literal["X", "Z"]

_FACTOR_RE = re.compile(r"([xy])(?:\^(\d+))?")

# name -> (l, m, A polynomial, B polynomial)
BB_PRESETS: dict[str, tuple[int, int, str, str]] = {
    "bb72": (6, 6, "x^3 + y + y^2", "y^3 + x + x^2"),
    "bb144": (12, 6, "x^3 + y + y^2", "y^3 + x + x^2"),
}
REPETITION_PRESETS: dict[str, int] = {"rep3": 3, "rep5": 5}
PRESET_NAMES: tuple[str, ...] = (*REPETITION_PRESETS, *BB_PRESETS)


def _check_probability(p: float, what: str = "p") -> None:
    if not 0.0 <= p < 0.5:
        raise ValueError(f"{what} must lie in [0, 0.5), got {p!r}")


def _check_code_length(n: int) -> None:
    if n < 3 or n % 2 == 0:
        raise ValueError(f"Repetition code length must be odd and >= 3, got {n}")


@dataclass(frozen=True)
class BivariatePoly:
    """Polynomial in commuting cyclic shifts ``x`` and ``y``.

    ``terms`` holds ``(a, b)`` exponent pairs for monomials ``x^a y^b``.
    """

    terms: frozenset[tuple[int, int]]

    def __post_init__(self):
        if not self.terms:
            raise ValueError("Polynomial must have at least one term")
        if any(a < 0 or b < 0 for a, b in self.terms):
            raise ValueError(f"Exponents must be non-negative: {sorted(self.terms)}")

    @classmethod
    def parse(cls, text: str) -> BivariatePoly:
        """Parse text such as ``"x^3 + y + y^2"`` or ``"1 + x*y^2"``."""
        terms: set[tuple[int, int]] = set()
        for raw in text.split("+"):
            term = raw.replace("*", "").replace(" ", "")
            if not term:
                raise ValueError(f"Empty term in polynomial {text!r}")
            a = b = 0
            if term != "1":
                consumed = 0
                for match in _FACTOR_RE.finditer(term):
                    if match.start() != consumed:
                        break
                    power = int(match.group(2)) if match.group(2) else 1
                    if match.group(1) == "x":
                        a += power
                    else:
                        b += power
                    consumed = match.end()
                if consumed != len(term):
                    raise ValueError(f"Cannot parse term {raw.strip()!r} in {text!r}")
            if (a, b) in terms:
                raise ValueError(f"Duplicate term {raw.strip()!r} in {text!r}")
            terms.add((a, b))
        return cls(frozenset(terms))

    def __str__(self) -> str:
        def monomial(a: int, b: int) -> str:
            parts = []
            if a:
                parts.append("x" if a == 1 else f"x^{a}")
            if b:
                parts.append("y" if b == 1 else f"y^{b}")
            return "*".join(parts) or "1"

        return " + ".join(monomial(a, b) for a, b in sorted(self.terms))

    def matrix(self, l: int, m: int) -> npt.NDArray[np.uint8]:  # noqa: E741
        """Evaluate on ``x = C_l ⊗ I_m`` and ``y = I_l ⊗ C_m``.

        Terms that coincide after reduction modulo ``(l, m)`` cancel.
        """
        if l < 1 or m < 1:
            raise ValueError(f"Lattice sizes must be positive, got l={l}, m={m}")
        shift_l = np.roll(np.eye(l, dtype=np.int64), 1, axis=1)
        shift_m = np.roll(np.eye(m, dtype=np.int64), 1, axis=1)
        x = np.kron(shift_l, np.eye(m, dtype=np.int64))
        y = np.kron(np.eye(l, dtype=np.int64), shift_m)
        total = np.zeros((l * m, l * m), dtype=np.int64)
        for a, b in self.terms:
            total += np.linalg.matrix_power(x, a % l) @ np.linalg.matrix_power(
                y, b % m
            )
        return (total % 2).astype(np.uint8)


@dataclass(frozen=True, eq=False)
class CssCode:
    """CSS code with check matrices and paired logical operators.

    Row ``i`` of ``A_X`` and row ``i`` of ``A_Z`` anticommute; all other
    pairs commute.
    """

    H_X: SparseBitMatrix
    H_Z: SparseBitMatrix
    A_X: SparseBitMatrix
    A_Z: SparseBitMatrix

    @property
    def n(self) -> int:
        return self.H_X.cols

    @property
    def k(self) -> int:
        return self.A_X.rows


def repetition_problem(n: int, p: float) -> DecodingProblem:
    """Code-capacity repetition code: adjacent-parity checks, observable on qubit 0."""
    _check_code_length(n)
    _check_probability(p)
    h = SparseBitMatrix(n - 1, n, [[c, c + 1] for c in range(n - 1)])
    a = SparseBitMatrix(1, n, [[0]])
    return DecodingProblem(h, a, np.full(n, p))


def repetition_phenom_problem(
    n: int, rounds: int, p_data: float, p_meas: float
) -> DecodingProblem:
    """Repetition code measured over several noisy rounds.

    Detector ``r*(n-1) + c`` compares check ``c`` in round ``r`` with the
    previous round (round 0 compares against 0). Per round the columns are
    the ``n`` data faults followed by ``n - 1`` measurement faults; the last
    round's measurements are noiseless.

    Args:
        n: Code length (odd, >= 3)
        rounds: Number of measurement rounds (>= 1)
        p_data: Prior of each data flip
        p_meas: Prior of each measurement flip

    Returns:
        DecodingProblem with ``(n-1)*rounds`` detectors and one observable
    """
    _check_code_length(n)
    if rounds < 1:
        raise ValueError(f"rounds must be >= 1, got {rounds}")
    _check_probability(p_data, "p_data")
    _check_probability(p_meas, "p_meas")

    checks = n - 1
    columns: list[list[int]] = []
    observable_columns: list[int] = []
    priors: list[float] = []
    for r in range(rounds):
        base = r * checks
        for q in range(n):
            if q == 0:
                observable_columns.append(len(columns))
            columns.append([base + c for c in (q - 1, q) if 0 <= c < checks])
            priors.append(p_data)
        if r < rounds - 1:
            for c in range(checks):
                columns.append([base + c, base + checks + c])
                priors.append(p_meas)

    h = SparseBitMatrix(len(columns), checks * rounds, columns).transpose()
    a = SparseBitMatrix(1, len(columns), [observable_columns])
    return DecodingProblem(h, a, np.asarray(priors))


def _parity(u: BitVec, v: BitVec) -> int:
    return int(np.count_nonzero(u & v)) & 1


def _symplectic_pairs(
    xs: list[BitVec], zs: list[BitVec]
) -> tuple[list[BitVec], list[BitVec]]:
    xs = [x.copy() for x in xs]
    zs = [z.copy() for z in zs]
    paired_x: list[BitVec] = []
    paired_z: list[BitVec] = []
    while xs:
        x = xs.pop(0)
        partner = next((j for j, z in enumerate(zs) if _parity(x, z)), None)
        if partner is None:
            raise RuntimeError("Logical operators do not pair; check matrices are degenerate")
        z = zs.pop(partner)
        xs = [xp ^ x if _parity(xp, z) else xp for xp in xs]
        zs = [zp ^ z if _parity(x, zp) else zp for zp in zs]
        paired_x.append(x)
        paired_z.append(z)
    return paired_x, paired_z


def css_logicals(
    h_x: SparseBitMatrix, h_z: SparseBitMatrix
) -> tuple[SparseBitMatrix, SparseBitMatrix]:
    """Compute paired logical operators ``(A_X, A_Z)`` of a CSS code.

    X logicals are kernel vectors of ``H_Z`` independent of the rows of
    ``H_X``, picked in pivot order, and symmetrically for Z. A symplectic
    Gram-Schmidt pass then makes ``A_X·A_Zᵀ`` the identity.

    Raises:
        ValueError: If the check matrices do not commute
    """
    if h_x.cols != h_z.cols:
        raise ValueError(f"H_X has {h_x.cols} columns but H_Z has {h_z.cols}")
    if not is_zero(mat_mul(h_x, h_z.transpose())):
        raise ValueError("H_X·H_Zᵀ != 0; not a CSS code")

    n = h_x.cols
    k = n - rank(h_x) - rank(h_z)
    xs = independent_complement(kernel_basis(h_z), h_x)
    zs = independent_complement(kernel_basis(h_x), h_z)
    if len(xs) != k or len(zs) != k:
        raise RuntimeError(
            f"Found {len(xs)} X and {len(zs)} Z logicals, expected k={k}"
        )
    paired_x, paired_z = _symplectic_pairs(xs, zs)
    return SparseBitMatrix.from_rows(paired_x, n), SparseBitMatrix.from_rows(
        paired_z, n
    )


def css_code(h_x: SparseBitMatrix, h_z: SparseBitMatrix) -> CssCode:
    a_x, a_z = css_logicals(h_x, h_z)
    return CssCode(H_X=h_x, H_Z=h_z, A_X=a_x, A_Z=a_z)


def css_pairing(code: CssCode) -> SparseBitMatrix:
    """The ``A_X·A_Zᵀ`` matrix; the identity for paired logicals."""
    return mat_mul(code.A_X, code.A_Z.transpose())


def bb_code(l: int, m: int, a: BivariatePoly, b: BivariatePoly) -> CssCode:  # noqa: E741
    """Bivariate bicycle code with ``H_X = [A | B]`` and ``H_Z = [Bᵀ | Aᵀ]``."""
    a_mat = a.matrix(l, m)
    b_mat = b.matrix(l, m)
    h_x = SparseBitMatrix.from_dense(np.hstack([a_mat, b_mat]))
    h_z = SparseBitMatrix.from_dense(np.hstack([b_mat.T, a_mat.T]))
    return css_code(h_x, h_z)


@functools.lru_cache(maxsize=None)
def bb_preset_code(name: str) -> CssCode:
    if name not in BB_PRESETS:
        raise ValueError(
            f"Unknown bivariate bicycle preset {name!r}; choose from {sorted(BB_PRESETS)}"
        )
    l, m, a_text, b_text = BB_PRESETS[name]  # noqa: E741
    return bb_code(l, m, BivariatePoly.parse(a_text), BivariatePoly.parse(b_text))


def css_side_problem(code: CssCode, side: Side, p: float) -> DecodingProblem:
    """Code-capacity problem for flips detected by one check side.

    Side ``Z`` decodes X flips: ``H = H_Z`` with the Z logicals as action
    rows. Side ``X`` is the mirror image.
    """
    _check_probability(p)
    if side == "Z":
        h, a = code.H_Z, code.A_Z
    elif side == "X":
        h, a = code.H_X, code.A_X
    else:
        raise ValueError(f"side must be 'X' or 'Z', got {side!r}")
    return DecodingProblem(h, a, np.full(code.n, p))


def build_preset(name: str, p: float, side: Side = "Z") -> DecodingProblem:
    """Resolve a preset name (``rep3``, ``rep5``, ``bb72``, ``bb144``) to a problem."""
    if name in REPETITION_PRESETS:
        return repetition_problem(REPETITION_PRESETS[name], p)
    if name in BB_PRESETS:
        return css_side_problem(bb_preset_code(name), side, p)
    raise ValueError(f"Unknown preset {name!r}; choose from {list(PRESET_NAMES)}")
