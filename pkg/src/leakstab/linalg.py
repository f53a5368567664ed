"""Small dense linear algebra with an exact rational path and a floating-point path."""

from __future__ import annotations

from collections.abc import Sequence
from fractions import Fraction
from numbers import Rational

import numpy as np
import scipy.linalg

from leakstab.errors import DomainError, ShapeError

Scalar = Fraction | float
Matrix = list[list[Scalar]]


def is_exact_scalar(value: object) -> bool:
    """Fractions and ints are exact; bools and floats are not."""
    return isinstance(value, Rational) and not isinstance(value, bool)


def is_exact(matrix: Sequence[Sequence[object]]) -> bool:
    return all(is_exact_scalar(v) for row in matrix for v in row)


def check_square(matrix: Sequence[Sequence[object]]) -> int:
    n = len(matrix)
    if n == 0 or any(len(row) != n for row in matrix):
        raise ShapeError(f"Expected a non-empty square matrix, got {len(matrix)} rows")
    return n


def to_fractions(matrix: Sequence[Sequence[Scalar]]) -> list[list[Fraction]]:
    return [[Fraction(v) for v in row] for row in matrix]


def to_array(matrix: Sequence[Sequence[Scalar]]) -> np.ndarray:
    return np.array([[float(v) for v in row] for row in matrix], dtype=float)


def is_z_matrix(matrix: Sequence[Sequence[Scalar]]) -> bool:
    """All off-diagonal entries are <= 0."""
    n = check_square(matrix)
    return all(matrix[i][j] <= 0 for i in range(n) for j in range(n) if i != j)


def exact_determinant(matrix: Sequence[Sequence[Fraction]]) -> Fraction:
    """Determinant by Gaussian elimination over the rationals."""
    n = check_square(matrix)
    a = [list(row) for row in matrix]
    det = Fraction(1)
    for col in range(n):
        pivot = next((row for row in range(col, n) if a[row][col] != 0), None)
        if pivot is None:
            return Fraction(0)
        if pivot != col:
            a[col], a[pivot] = a[pivot], a[col]
            det = -det
        det *= a[col][col]
        for row in range(col + 1, n):
            f = a[row][col] / a[col][col]
            if f:
                for c in range(col, n):
                    a[row][c] -= f * a[col][c]
    return det


def exact_leading_minors(matrix: Sequence[Sequence[Scalar]]) -> list[Fraction]:
    n = check_square(matrix)
    a = to_fractions(matrix)
    return [exact_determinant([row[:k] for row in a[:k]]) for k in range(1, n + 1)]


def float_leading_minors(matrix: Sequence[Sequence[Scalar]]) -> list[float]:
    """Leading principal minors via LU with partial pivoting (numpy.linalg.det)."""
    n = check_square(matrix)
    a = to_array(matrix)
    return [float(np.linalg.det(a[:k, :k])) for k in range(1, n + 1)]


def exact_solve(matrix: Sequence[Sequence[Scalar]], rhs: Sequence[Scalar]) -> list[Fraction]:
    """Solve A x = b over the rationals by Gauss-Jordan elimination."""
    n = check_square(matrix)
    if len(rhs) != n:
        raise ShapeError(f"Right-hand side has length {len(rhs)}, expected {n}")
    a = to_fractions(matrix)
    b = [Fraction(v) for v in rhs]
    for col in range(n):
        pivot = next((row for row in range(col, n) if a[row][col] != 0), None)
        if pivot is None:
            raise DomainError("Matrix is singular")
        a[col], a[pivot] = a[pivot], a[col]
        b[col], b[pivot] = b[pivot], b[col]
        for row in range(n):
            if row != col and a[row][col] != 0:
                f = a[row][col] / a[col][col]
                b[row] -= f * b[col]
                for c in range(col, n):
                    a[row][c] -= f * a[col][c]
    return [b[i] / a[i][i] for i in range(n)]


def float_solve(matrix: Sequence[Sequence[Scalar]], rhs: Sequence[Scalar]) -> list[float]:
    x = scipy.linalg.solve(to_array(matrix), np.array([float(v) for v in rhs]))
    return [float(v) for v in x]


def matvec(matrix: Sequence[Sequence[Scalar]], vector: Sequence[Scalar]) -> list[Scalar]:
    """Matrix-vector product preserving the scalar type of the inputs."""
    return [sum((a * v for a, v in zip(row, vector, strict=True)), Fraction(0)) for row in matrix]


def infinity_norm(matrix: Sequence[Sequence[Scalar]]) -> float:
    return max(sum(abs(float(v)) for v in row) for row in matrix)


def format_scalar(value: Scalar) -> str | float:
    """Exact values as "p/q" strings, floats unchanged."""
    if is_exact_scalar(value):
        frac = Fraction(value)
        if frac.denominator == 1:
            return str(frac.numerator)
        return f"{frac.numerator}/{frac.denominator}"
    return float(value)
