"""Linear algebra over GF(2).

Bit vectors are one-dimensional ``numpy`` arrays of dtype ``uint8`` holding
0/1 entries. Matrices are stored row-sparse (CSR with sorted column indices)
in :class:`SparseBitMatrix`; rank, kernel and solve work on a dense ``uint8``
working copy reduced by Gaussian elimination.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence

import numpy as np
import numpy.typing as npt
import scipy.sparse as sp

BitVec = npt.NDArray[np.uint8]


def bitvec(bits: Iterable[int] | str) -> BitVec:
    """Build a bit vector from an iterable of 0/1 values or a string like ``"101"``.

    Args:
        bits: Iterable of integers, or a string of '0'/'1' characters

    Returns:
        A new ``uint8`` array
    """
    if isinstance(bits, str):
        if any(ch not in "01" for ch in bits):
            raise ValueError(f"Bit string may only contain '0' and '1': {bits!r}")
        return np.fromiter((int(ch) for ch in bits), dtype=np.uint8, count=len(bits))
    arr = np.asarray(list(bits) if not isinstance(bits, np.ndarray) else bits)
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise ValueError("Bit vectors may only contain 0 and 1")
    return arr.astype(np.uint8).reshape(-1)


def bits_to_str(v: BitVec) -> str:
    """Render a bit vector as a compact '0'/'1' string."""
    return "".join("1" if b else "0" for b in v)


class SparseBitMatrix:
    """Row-sparse binary matrix over GF(2).

    Immutable after construction. Each row stores the sorted column indices of
    its set bits.
    """

    __slots__ = ("_csr", "cols", "rows")

    def __init__(self, rows: int, cols: int, row_support: Sequence[Sequence[int]]):
        if rows < 0 or cols < 0:
            raise ValueError(f"Matrix shape must be non-negative, got {rows}x{cols}")
        if len(row_support) != rows:
            raise ValueError(
                f"Expected {rows} row supports, got {len(row_support)}"
            )
        indptr = [0]
        indices: list[int] = []
        for r, support in enumerate(row_support):
            previous = -1
            for c in support:
                c = int(c)
                if not 0 <= c < cols:
                    raise ValueError(f"Column index {c} out of range in row {r}")
                if c <= previous:
                    raise ValueError(
                        f"Row {r} support must be strictly increasing: {list(support)}"
                    )
                indices.append(c)
                previous = c
            indptr.append(len(indices))

        self.rows = rows
        self.cols = cols
        self._csr = sp.csr_matrix(
            (
                np.ones(len(indices), dtype=np.int32),
                np.asarray(indices, dtype=np.int64),
                np.asarray(indptr, dtype=np.int64),
            ),
            shape=(rows, cols),
        )

    # Constructors -----------------------------------------------------------

    @classmethod
    def from_dense(cls, dense: npt.ArrayLike) -> SparseBitMatrix:
        """Build from a dense 0/1 array (entries are reduced mod 2)."""
        arr = np.asarray(dense, dtype=np.int64)
        if arr.ndim != 2:
            raise ValueError(f"Expected a 2-D array, got shape {arr.shape}")
        arr = arr & 1
        return cls(
            arr.shape[0],
            arr.shape[1],
            [np.flatnonzero(row).tolist() for row in arr],
        )

    @classmethod
    def from_rows(cls, rows: Sequence[BitVec], cols: int) -> SparseBitMatrix:
        """Stack bit vectors of length ``cols`` as rows."""
        for r in rows:
            if len(r) != cols:
                raise ValueError(f"Row length {len(r)} does not match cols={cols}")
        return cls(len(rows), cols, [np.flatnonzero(r).tolist() for r in rows])

    @classmethod
    def zeros(cls, rows: int, cols: int) -> SparseBitMatrix:
        return cls(rows, cols, [[] for _ in range(rows)])

    @classmethod
    def identity(cls, n: int) -> SparseBitMatrix:
        return cls(n, n, [[i] for i in range(n)])

    # Accessors --------------------------------------------------------------

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def nnz(self) -> int:
        return int(self._csr.nnz)

    @property
    def indptr(self) -> npt.NDArray[np.int64]:
        return self._csr.indptr

    @property
    def indices(self) -> npt.NDArray[np.int64]:
        return self._csr.indices

    def row(self, i: int) -> list[int]:
        """Sorted column indices of row ``i``."""
        if not 0 <= i < self.rows:
            raise IndexError(f"Row {i} out of range for {self.rows} rows")
        start, end = self._csr.indptr[i], self._csr.indptr[i + 1]
        return self._csr.indices[start:end].tolist()

    @property
    def row_support(self) -> list[list[int]]:
        return [self.row(i) for i in range(self.rows)]

    def row_vector(self, i: int) -> BitVec:
        v = np.zeros(self.cols, dtype=np.uint8)
        v[self.row(i)] = 1
        return v

    def to_dense(self) -> npt.NDArray[np.uint8]:
        return self._csr.toarray().astype(np.uint8)

    def transpose(self) -> SparseBitMatrix:
        return _from_scipy(self._csr.T.tocsr(), self.cols, self.rows)

    @property
    def T(self) -> SparseBitMatrix:  # noqa: N802
        return self.transpose()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SparseBitMatrix):
            return NotImplemented
        return (
            self.shape == other.shape
            and np.array_equal(self._csr.indptr, other._csr.indptr)
            and np.array_equal(self._csr.indices, other._csr.indices)
        )

    def __hash__(self) -> int:
        return hash((self.shape, self._csr.indices.tobytes(), self._csr.indptr.tobytes()))

    def __repr__(self) -> str:
        return f"SparseBitMatrix({self.rows}x{self.cols}, nnz={self.nnz})"

    def __getstate__(self) -> dict:
        return {"rows": self.rows, "cols": self.cols, "support": self.row_support}

    def __setstate__(self, state: dict) -> None:
        rebuilt = SparseBitMatrix(state["rows"], state["cols"], state["support"])
        self.rows = rebuilt.rows
        self.cols = rebuilt.cols
        self._csr = rebuilt._csr


def _from_scipy(csr: sp.csr_matrix, rows: int, cols: int) -> SparseBitMatrix:
    csr = csr.tocsr()
    csr.sum_duplicates()
    csr.data %= 2
    csr.eliminate_zeros()
    csr.sort_indices()
    return SparseBitMatrix(
        rows,
        cols,
        [csr.indices[csr.indptr[i] : csr.indptr[i + 1]].tolist() for i in range(rows)],
    )


# Products --------------------------------------------------------------------


def mat_vec_mul(m: SparseBitMatrix, v: BitVec) -> BitVec:
    """Compute ``M·v`` over GF(2).

    Raises:
        ValueError: If ``len(v) != M.cols``
    """
    v = np.asarray(v)
    if v.ndim != 1 or v.shape[0] != m.cols:
        raise ValueError(
            f"Dimension mismatch: matrix has {m.cols} columns, vector has length {v.shape}"
        )
    product = m._csr @ v.astype(np.int64)
    return (np.asarray(product, dtype=np.int64) & 1).astype(np.uint8)


def mat_mul(a: SparseBitMatrix, b: SparseBitMatrix) -> SparseBitMatrix:
    """Compute ``A·B`` over GF(2)."""
    if a.cols != b.rows:
        raise ValueError(f"Dimension mismatch: {a.shape} @ {b.shape}")
    return _from_scipy(a._csr @ b._csr, a.rows, b.cols)


def is_zero(m: SparseBitMatrix) -> bool:
    return m.nnz == 0


# Row operations --------------------------------------------------------------


def append_row(m: SparseBitMatrix, r: BitVec) -> SparseBitMatrix:
    """Return a copy of ``M`` with ``r`` appended as its last row."""
    r = np.asarray(r)
    if r.ndim != 1 or r.shape[0] != m.cols:
        raise ValueError(
            f"Dimension mismatch: matrix has {m.cols} columns, row has length {r.shape}"
        )
    return SparseBitMatrix(
        m.rows + 1, m.cols, [*m.row_support, np.flatnonzero(r).tolist()]
    )


# Elimination -----------------------------------------------------------------


def _as_dense(m: SparseBitMatrix | npt.ArrayLike) -> npt.NDArray[np.uint8]:
    if isinstance(m, SparseBitMatrix):
        return m.to_dense()
    return (np.asarray(m, dtype=np.int64) & 1).astype(np.uint8)


def row_reduce(
    dense: npt.NDArray[np.uint8], ncols: int | None = None
) -> tuple[npt.NDArray[np.uint8], list[int]]:
    """Reduced row echelon form over GF(2).

    Args:
        dense: Matrix to reduce (not modified)
        ncols: Only pivot on the first ``ncols`` columns (for augmented systems)

    Returns:
        Tuple of (reduced matrix, pivot columns in row order)
    """
    a = np.array(dense, dtype=np.uint8, copy=True)
    nrows = a.shape[0]
    limit = a.shape[1] if ncols is None else ncols
    pivots: list[int] = []
    r = 0
    for c in range(limit):
        if r >= nrows:
            break
        candidates = np.flatnonzero(a[r:, c])
        if candidates.size == 0:
            continue
        p = r + int(candidates[0])
        if p != r:
            a[[r, p]] = a[[p, r]]
        ones = np.flatnonzero(a[:, c])
        ones = ones[ones != r]
        if ones.size:
            a[ones] ^= a[r]
        pivots.append(c)
        r += 1
    return a, pivots


def rank(m: SparseBitMatrix | npt.ArrayLike) -> int:
    """GF(2) row rank."""
    dense = _as_dense(m)
    if dense.size == 0:
        return 0
    return len(row_reduce(dense)[1])


def kernel_basis(m: SparseBitMatrix) -> list[BitVec]:
    """Basis of ``{v : M·v = 0}``, one vector per free column in increasing order."""
    dense = _as_dense(m)
    ncols = m.cols
    if dense.shape[0] == 0:
        reduced, pivots = np.zeros((0, ncols), dtype=np.uint8), []
    else:
        reduced, pivots = row_reduce(dense)
    pivot_set = set(pivots)
    basis = []
    for free in range(ncols):
        if free in pivot_set:
            continue
        v = np.zeros(ncols, dtype=np.uint8)
        v[free] = 1
        for row_idx, pc in enumerate(pivots):
            v[pc] = reduced[row_idx, free]
        basis.append(v)
    return basis


def solve(m: SparseBitMatrix, b: BitVec) -> BitVec | None:
    """Find ``x`` with ``M·x = b``.

    Free variables are set to 0, so the returned particular solution is
    deterministic.

    Returns:
        A solution, or ``None`` when ``b`` lies outside the column space

    Raises:
        ValueError: If ``len(b) != M.rows``
    """
    b = np.asarray(b)
    if b.ndim != 1 or b.shape[0] != m.rows:
        raise ValueError(
            f"Dimension mismatch: matrix has {m.rows} rows, right-hand side has length {b.shape}"
        )
    x = np.zeros(m.cols, dtype=np.uint8)
    if m.rows == 0:
        return x
    augmented = np.hstack([m.to_dense(), (b.astype(np.uint8) & 1)[:, None]])
    reduced, pivots = row_reduce(augmented, ncols=m.cols)
    if reduced[len(pivots) :, -1].any():
        return None
    for row_idx, pc in enumerate(pivots):
        x[pc] = reduced[row_idx, -1]
    return x


def independent_complement(
    candidates: Sequence[BitVec], span: SparseBitMatrix, limit: int | None = None
) -> list[BitVec]:
    """Pick candidates, in order, that are independent of ``span`` and of each other.

    Args:
        candidates: Vectors to draw from
        span: Rows spanning the subspace to complement
        limit: Stop after this many vectors

    Returns:
        Selected candidate vectors (unmodified copies)
    """
    ncols = span.cols
    # Reduced rows keyed by pivot column; new vectors are reduced against them.
    reduced_rows: dict[int, BitVec] = {}

    def reduce(v: BitVec) -> BitVec:
        v = v.copy()
        for pc in sorted(reduced_rows):
            if v[pc]:
                v ^= reduced_rows[pc]
        return v

    def insert(v: BitVec) -> None:
        pc = int(np.flatnonzero(v)[0])
        for key, row in reduced_rows.items():
            if row[pc]:
                reduced_rows[key] = row ^ v
        reduced_rows[pc] = v

    for i in range(span.rows):
        v = reduce(span.row_vector(i))
        if v.any():
            insert(v)

    chosen: list[BitVec] = []
    for cand in candidates:
        if limit is not None and len(chosen) >= limit:
            break
        if len(cand) != ncols:
            raise ValueError("Candidate length does not match span width")
        v = reduce(np.asarray(cand, dtype=np.uint8))
        if v.any():
            insert(v)
            chosen.append(np.asarray(cand, dtype=np.uint8).copy())
    return chosen
