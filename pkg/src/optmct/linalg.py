"""Exact rational matrices.

Matrices are stored column-sparse: one ``{row: value}`` dict per column,
zeros never stored.  Every value is a :class:`fractions.Fraction`.  The
structure is treated as immutable once built; operations always return new
matrices.
"""

from __future__ import annotations

from fractions import Fraction
from numbers import Rational
from typing import Iterable, Iterator, Sequence

__all__ = ["QMatrix", "to_q"]


def to_q(value) -> Fraction:
    """Coerce ``value`` to an exact rational.

    Accepts ints, Fractions, and strings such as ``"3/4"``, ``"-2"`` or
    ``"0.25"``.  Floats are rejected since they are almost never exact.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(value, (int, Rational)):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"cannot convert {value!r} to an exact rational")


class QMatrix:
    __slots__ = ("nrows", "ncols", "_cols", "_hash")

    def __init__(self, nrows: int, ncols: int, cols: Sequence[dict] | None = None):
        if nrows < 0 or ncols < 0:
            raise ValueError("matrix dimensions must be non-negative")
        self.nrows = nrows
        self.ncols = ncols
        if cols is None:
            cols = tuple({} for _ in range(ncols))
        elif len(cols) != ncols:
            raise ValueError(f"expected {ncols} columns, got {len(cols)}")
        self._cols = tuple(cols)
        self._hash = None

    # -- construction -------------------------------------------------
    @classmethod
    def from_rows(cls, rows: Iterable[Iterable]) -> "QMatrix":
        rows = [[to_q(v) for v in row] for row in rows]
        nrows = len(rows)
        ncols = len(rows[0]) if rows else 0
        cols = [dict() for _ in range(ncols)]
        for i, row in enumerate(rows):
            if len(row) != ncols:
                raise ValueError("ragged rows")
            for j, v in enumerate(row):
                if v:
                    cols[j][i] = v
        return cls(nrows, ncols, cols)

    @classmethod
    def column(cls, values: Iterable) -> "QMatrix":
        return cls.from_rows([[v] for v in values])

    @classmethod
    def row(cls, values: Iterable) -> "QMatrix":
        return cls.from_rows([list(values)])

    @classmethod
    def zeros(cls, nrows: int, ncols: int) -> "QMatrix":
        return cls(nrows, ncols)

    @classmethod
    def identity(cls, n: int) -> "QMatrix":
        one = Fraction(1)
        return cls(n, n, [{j: one} for j in range(n)])

    @classmethod
    def from_index_map(cls, mapping: Sequence[int], nrows: int | None = None) -> "QMatrix":
        """0/1 matrix sending basis column ``j`` to basis row ``mapping[j]``."""
        one = Fraction(1)
        nrows = len(mapping) if nrows is None else nrows
        return cls(nrows, len(mapping), [{m: one} for m in mapping])

    # -- access --------------------------------------------------------
    @property
    def shape(self) -> tuple[int, int]:
        return (self.nrows, self.ncols)

    def __getitem__(self, key) -> Fraction:
        i, j = key
        if not (0 <= i < self.nrows and 0 <= j < self.ncols):
            raise IndexError(f"index {key} out of range for shape {self.shape}")
        return self._cols[j].get(i, Fraction(0))

    def col(self, j: int) -> dict:
        """Copy of column ``j`` as a sparse ``{row: value}`` dict."""
        return dict(self._cols[j])

    def entries(self) -> Iterator[tuple[int, int, Fraction]]:
        """Non-zero entries as ``(row, col, value)`` in column order."""
        for j, col in enumerate(self._cols):
            for i in sorted(col):
                yield i, j, col[i]

    def rows(self) -> list[list[Fraction]]:
        out = [[Fraction(0)] * self.ncols for _ in range(self.nrows)]
        for j, col in enumerate(self._cols):
            for i, v in col.items():
                out[i][j] = v
        return out

    def flat(self) -> list[Fraction]:
        """Entries of a row or column vector, in index order."""
        if self.ncols == 1:
            col = self._cols[0]
            return [col.get(i, Fraction(0)) for i in range(self.nrows)]
        if self.nrows == 1:
            return [c.get(0, Fraction(0)) for c in self._cols]
        raise ValueError(f"shape {self.shape} is not a vector")

    def nnz(self) -> int:
        return sum(len(c) for c in self._cols)

    def column_sums(self) -> list[Fraction]:
        return [sum(col.values(), Fraction(0)) for col in self._cols]

    def is_zero(self) -> bool:
        return not any(self._cols)

    def is_nonnegative(self) -> bool:
        return all(v > 0 for col in self._cols for v in col.values())

    # -- algebra -------------------------------------------------------
    def __matmul__(self, other: "QMatrix") -> "QMatrix":
        if self.ncols != other.nrows:
            raise ValueError(f"cannot multiply {self.shape} by {other.shape}")
        mine = self._cols
        cols = []
        for ocol in other._cols:
            acc: dict = {}
            for k, b in ocol.items():
                for i, a in mine[k].items():
                    acc[i] = acc.get(i, 0) + a * b
            cols.append({i: v for i, v in acc.items() if v})
        return QMatrix(self.nrows, other.ncols, cols)

    def kron(self, other: "QMatrix") -> "QMatrix":
        """Kronecker product, left factor most significant."""
        r2, c2 = other.nrows, other.ncols
        cols = []
        for acol in self._cols:
            for bcol in other._cols:
                cols.append({i1 * r2 + i2: a * b
                             for i1, a in acol.items() for i2, b in bcol.items()})
        return QMatrix(self.nrows * r2, self.ncols * c2, cols)

    def __add__(self, other: "QMatrix") -> "QMatrix":
        if self.shape != other.shape:
            raise ValueError(f"shape mismatch {self.shape} vs {other.shape}")
        cols = []
        for a, b in zip(self._cols, other._cols):
            acc = dict(a)
            for i, v in b.items():
                acc[i] = acc.get(i, 0) + v
            cols.append({i: v for i, v in acc.items() if v})
        return QMatrix(self.nrows, self.ncols, cols)

    def __neg__(self) -> "QMatrix":
        return QMatrix(self.nrows, self.ncols,
                       [{i: -v for i, v in c.items()} for c in self._cols])

    def __sub__(self, other: "QMatrix") -> "QMatrix":
        return self + (-other)

    def scale(self, factor) -> "QMatrix":
        factor = to_q(factor)
        if not factor:
            return QMatrix(self.nrows, self.ncols)
        return QMatrix(self.nrows, self.ncols,
                       [{i: v * factor for i, v in c.items()} for c in self._cols])

    def __rmul__(self, factor) -> "QMatrix":
        return self.scale(factor)

    def transpose(self) -> "QMatrix":
        cols = [dict() for _ in range(self.nrows)]
        for j, col in enumerate(self._cols):
            for i, v in col.items():
                cols[i][j] = v
        return QMatrix(self.ncols, self.nrows, cols)

    def remap(self, row_map: Sequence[int] | None = None,
              col_map: Sequence[int] | None = None) -> "QMatrix":
        """Relabel indices: entry ``(i, j)`` moves to ``(row_map[i], col_map[j])``.

        Both maps must be bijections; this is conjugation by permutation
        matrices without doing any arithmetic.
        """
        cols = [None] * self.ncols
        for j, col in enumerate(self._cols):
            target = j if col_map is None else col_map[j]
            if row_map is None:
                cols[target] = dict(col)
            else:
                cols[target] = {row_map[i]: v for i, v in col.items()}
        return QMatrix(self.nrows, self.ncols, cols)

    # -- comparison ----------------------------------------------------
    def __eq__(self, other) -> bool:
        if not isinstance(other, QMatrix):
            return NotImplemented
        return self.shape == other.shape and self._cols == other._cols

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.shape, tuple(self.entries())))
        return self._hash

    def is_proportional_to(self, other: "QMatrix") -> Fraction | None:
        """Return ``c`` with ``self == c * other``, or None if there is none.

        ``other`` must be non-zero.
        """
        if self.shape != other.shape:
            return None
        ratio = None
        for j in range(self.ncols):
            a, b = self._cols[j], other._cols[j]
            if a.keys() - b.keys():
                return None
            for i, v in b.items():
                w = a.get(i, Fraction(0))
                r = w / v
                if ratio is None:
                    ratio = r
                elif r != ratio:
                    return None
        return Fraction(0) if ratio is None else ratio

    def __repr__(self) -> str:
        body = "; ".join(" ".join(str(v) for v in row) for row in self.rows())
        return f"QMatrix({self.nrows}x{self.ncols}: {body})"
