"""Tangent spaces, codimensions and miniversal deformation patterns."""
from __future__ import annotations

import logging
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from typing import Any

import numpy as np

from src.core.canonical import CanonicalClass, ClassTag, canonical_matrix
from src.core.matrixcore import DEFAULT_TOLERANCE, ComplexMatrix, Tolerance, as_matrix, pivoted_rank

logger = logging.getLogger(__name__)

Star = tuple[int, int]

# Star positions of the miniversal deformations, 1-based (row, column).
_PRINTED_STARS: dict[ClassTag, tuple[Star, ...]] = {
    ClassTag.I: ((1, 1), (1, 2), (2, 1), (2, 2)),
    ClassTag.II: ((1, 1), (2, 1), (2, 2)),
    ClassTag.III: ((2, 1), (2, 2)),
    ClassTag.IV: ((1, 1),),
    ClassTag.V: ((2, 1),),
    ClassTag.VI: ((2, 1),),
    ClassTag.T1: tuple((i, j) for i in range(1, 4) for j in range(1, 4)),
    ClassTag.T2: ((1, 1), (2, 1), (2, 2), (3, 1), (3, 2), (3, 3)),
    ClassTag.T3: ((2, 1), (2, 2), (2, 3), (3, 1), (3, 2), (3, 3)),
    ClassTag.T4: ((1, 1), (3, 1), (3, 2), (3, 3)),
    ClassTag.T5: ((2, 1), (3, 1), (3, 2), (3, 3)),
    ClassTag.T6: ((2, 1), (3, 1), (3, 2), (3, 3)),
    ClassTag.T7: ((1, 1), (2, 1), (2, 2)),
    ClassTag.T8: ((2, 1), (3, 1), (3, 2)),
    ClassTag.T9: ((3, 1), (3, 3)),
    ClassTag.T10: ((1, 1),),
    ClassTag.T11: ((2, 1),),
    ClassTag.T12: ((2, 1),),
}

# At λ = 0 the (3, 2) direction is tangent to the class of 5_λ.
_T5_AT_ZERO: tuple[Star, ...] = ((2, 1), (2, 3), (3, 1), (3, 3))


@dataclass(frozen=True)
class TangentMap:
    """Matrix of C ↦ CᵀA + AC on vec(C), basis E_ij in lexicographic (i, j) order."""

    n: int
    matrix: np.ndarray

    def rank(self, tol: Tolerance = DEFAULT_TOLERANCE) -> int:
        return pivoted_rank(self.matrix, tol)


@dataclass(frozen=True)
class DeformationPattern:
    base: CanonicalClass
    # 0-based (row, column) positions
    stars: tuple[Star, ...]

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def star_count(self) -> int:
        return len(self.stars)

    @property
    def mask(self) -> np.ndarray:
        mask = np.zeros((self.n, self.n), dtype=bool)
        for row, column in self.stars:
            mask[row, column] = True
        return mask

    def with_stars(self, stars: Iterable[Star]) -> DeformationPattern:
        return DeformationPattern(base=self.base, stars=tuple(stars))

    def render(self) -> str:
        mask = self.mask
        return "\n".join(" ".join("*" if cell else "0" for cell in row) for row in mask)


def tangent_map(a: Any) -> TangentMap:
    matrix = as_matrix(a)
    n = matrix.shape[0]
    columns = []
    for i in range(n):
        for j in range(n):
            basis = np.zeros((n, n), dtype=complex)
            basis[i, j] = 1
            columns.append((basis.T @ matrix + matrix @ basis).reshape(-1))
    return TangentMap(n=n, matrix=np.column_stack(columns))


def codimension(a: Any, tol: Tolerance = DEFAULT_TOLERANCE) -> int:
    """n² minus the dimension of the tangent space {CᵀA + AC} of the congruence class."""
    tangent = tangent_map(a)
    return tangent.n**2 - tangent.rank(tol)


def miniversal_pattern(c: CanonicalClass) -> DeformationPattern:
    printed = _PRINTED_STARS[c.tag]
    if c.tag is ClassTag.T5 and c.param == 0:
        printed = _T5_AT_ZERO
    return DeformationPattern(base=c, stars=tuple((row - 1, col - 1) for row, col in printed))


def verify_transversality(
    c: CanonicalClass,
    tol: Tolerance = DEFAULT_TOLERANCE,
    pattern: DeformationPattern | None = None,
) -> bool:
    """True iff the star directions complement the tangent space as a direct sum."""
    pattern = pattern if pattern is not None else miniversal_pattern(c)
    tangent = tangent_map(canonical_matrix(c))
    size = tangent.n**2

    star_columns = np.zeros((size, pattern.star_count), dtype=complex)
    for index, (row, column) in enumerate(pattern.stars):
        star_columns[row * tangent.n + column, index] = 1

    spanning = pivoted_rank(np.hstack([tangent.matrix, star_columns]), tol) == size
    direct = tangent.rank(tol) + pattern.star_count == size
    logger.debug(
        "transversality_checked class=%s stars=%d spanning=%s direct=%s",
        c,
        pattern.star_count,
        spanning,
        direct,
    )
    return spanning and direct


def deformation_family(
    c: CanonicalClass,
    values: Mapping[Star, complex] | Iterable[complex],
) -> ComplexMatrix:
    """A_c + D: the canonical matrix with *values* placed at the star positions.

    *values* is either a mapping from 0-based star positions or a sequence in
    star order.
    """
    pattern = miniversal_pattern(c)
    result = np.array(canonical_matrix(c))
    if isinstance(values, Mapping):
        unknown = set(values) - set(pattern.stars)
        if unknown:
            raise ValueError(f"positions {sorted(unknown)} are not stars of class {c}")
        assignments = list(values.items())
    else:
        entries = list(values)
        if len(entries) != pattern.star_count:
            raise ValueError(
                f"class {c} has {pattern.star_count} stars, got {len(entries)} values"
            )
        assignments = list(zip(pattern.stars, entries, strict=True))

    for (row, column), value in assignments:
        result[row, column] += complex(value)
    return as_matrix(result)
