"""Fixed-shape complex matrix arithmetic for 2x2 and 3x3 congruence work.

Every transpose in this module is the plain transpose. Conjugation only
appears inside the singular value decomposition used for rank decisions.
"""
from __future__ import annotations

import cmath
import logging
import math
from collections import Counter
from dataclasses import dataclass
from itertools import permutations
from typing import Any

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy import linalg as sla

logger = logging.getLogger(__name__)

SUPPORTED_DIMENSIONS = (2, 3)

ComplexMatrix = np.ndarray


class MatrixCoreError(Exception):
    pass


class InvalidMatrix(MatrixCoreError, ValueError):
    pass


class RankMismatch(MatrixCoreError):
    pass


class SingularMatrix(MatrixCoreError):
    pass


class DegenerateLeadingCoefficient(MatrixCoreError):
    pass


class SpectrumNotReciprocal(MatrixCoreError):
    pass


@dataclass(frozen=True)
class Tolerance:
    rank_tol: float = 1e-8
    eig_tol: float = 1e-6

    def __post_init__(self) -> None:
        if not 0 < self.rank_tol < 1:
            raise ValueError("rank_tol must be in (0, 1)")
        if not 0 < self.eig_tol < 1:
            raise ValueError("eig_tol must be in (0, 1)")


DEFAULT_TOLERANCE = Tolerance()


@dataclass(frozen=True)
class PolyCoeffs:
    """Coefficients c0..cd of a polynomial, lowest degree first."""

    coeffs: tuple[complex, ...]

    def __post_init__(self) -> None:
        if not 1 <= len(self.coeffs) <= 4:
            raise ValueError("PolyCoeffs supports degree 0..3")

    @classmethod
    def from_array(cls, values: Any) -> PolyCoeffs:
        return cls(tuple(complex(value) for value in np.asarray(values, dtype=complex)))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def leading(self) -> complex:
        return self.coeffs[-1]

    @property
    def scale(self) -> float:
        return max(abs(value) for value in self.coeffs)

    def __call__(self, x: complex) -> complex:
        return complex(npoly.polyval(x, np.asarray(self.coeffs)))

    def monic(self) -> PolyCoeffs:
        return PolyCoeffs(tuple(value / self.leading for value in self.coeffs))


@dataclass(frozen=True)
class CosquareStructure:
    spectrum: tuple[complex, ...]
    geo_mult: dict[complex, int]
    # distance moved by each eigenvalue that was snapped onto +1 or -1
    snapped: tuple[float, ...] = ()


def as_matrix(values: Any) -> ComplexMatrix:
    """Validate and copy *values* into an immutable complex128 n×n array."""
    try:
        matrix = np.array(values, dtype=complex)
    except (TypeError, ValueError) as error:
        raise InvalidMatrix("matrix entries must be complex numbers") from error

    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise InvalidMatrix(f"matrix must be square, got shape {matrix.shape}")
    if matrix.shape[0] not in SUPPORTED_DIMENSIONS:
        raise InvalidMatrix(f"matrix dimension must be 2 or 3, got {matrix.shape[0]}")
    if not np.all(np.isfinite(matrix)):
        raise InvalidMatrix("matrix entries must be finite")

    matrix.setflags(write=False)
    return matrix


def direct_sum(*blocks: Any) -> ComplexMatrix:
    arrays = [np.atleast_2d(np.asarray(block, dtype=complex)) for block in blocks]
    size = sum(block.shape[0] for block in arrays)
    result = np.zeros((size, size), dtype=complex)
    offset = 0
    for block in arrays:
        k = block.shape[0]
        result[offset : offset + k, offset : offset + k] = block
        offset += k
    return result


def sym_skew_parts(a: Any) -> tuple[ComplexMatrix, ComplexMatrix]:
    matrix = as_matrix(a)
    return (matrix + matrix.T) / 2, (matrix - matrix.T) / 2


def singular_values(a: Any) -> np.ndarray:
    return np.linalg.svd(np.asarray(a, dtype=complex), compute_uv=False)


def unit_scaled(a: Any) -> ComplexMatrix:
    """*a* times the power of two that brings σ_max into [1/2, 1).

    Multiplying by a power of two is exact, so ranks and spectra are unchanged
    while determinant expansions stay clear of overflow and underflow.
    """
    matrix = as_matrix(a)
    sigma_max = float(singular_values(matrix)[0])
    if sigma_max == 0.0:
        return matrix
    _, exponent = math.frexp(sigma_max)
    return as_matrix(matrix * 2.0**-exponent)


def rank_tol(
    a: Any,
    tol: Tolerance = DEFAULT_TOLERANCE,
    reference: float | None = None,
) -> int:
    """Numerical rank: singular values above ``rank_tol`` times the scale.

    The scale is the largest singular value of *a*, or *reference* when that
    is larger; measuring a part of a matrix against the whole keeps round-off
    in an exactly vanishing part from counting as rank.
    """
    sigma = singular_values(a)
    scale = float(sigma[0]) if sigma.size else 0.0
    if reference is not None:
        scale = max(scale, float(reference))
    if scale == 0.0:
        return 0
    return int(np.count_nonzero(sigma > tol.rank_tol * scale))


def pivoted_rank(a: Any, tol: Tolerance = DEFAULT_TOLERANCE) -> int:
    """Rank from a column-pivoted QR factorisation with a relative threshold."""
    matrix = np.asarray(a, dtype=complex)
    if not matrix.size or not np.any(matrix):
        return 0
    r, _ = sla.qr(matrix, mode="r", pivoting=True)
    diagonal = np.abs(np.diag(r))
    return int(np.count_nonzero(diagonal > tol.rank_tol * diagonal[0]))


def _normalize_phase(vector: np.ndarray, cutoff: float) -> np.ndarray:
    vector = vector / np.linalg.norm(vector)
    for component in vector:
        if abs(component) > cutoff:
            return vector * (abs(component) / component)
    return vector


def null_pair(a: Any, tol: Tolerance = DEFAULT_TOLERANCE) -> tuple[np.ndarray, np.ndarray]:
    """Unit vectors v, u with ``A v = 0`` and ``uᵀ A = 0`` for a corank-one matrix.

    Each vector has its first non-negligible component real and positive.
    """
    matrix = as_matrix(a)
    n = matrix.shape[0]
    rank = rank_tol(matrix, tol)
    if rank != n - 1:
        raise RankMismatch(f"null_pair needs rank {n - 1}, got {rank}")

    u_svd, _, vh = np.linalg.svd(matrix)
    right = vh[-1].conj()
    # Aᴴ w = 0 for the last left singular vector w, hence Aᵀ conj(w) = 0
    left = u_svd[:, -1].conj()
    cutoff = np.sqrt(tol.rank_tol)
    return _normalize_phase(right, cutoff), _normalize_phase(left, cutoff)


def sin_angle(u: np.ndarray, v: np.ndarray) -> float:
    """Sine of the angle between two complex lines."""
    u = u / np.linalg.norm(u)
    v = v / np.linalg.norm(v)
    return float(np.linalg.norm(u - np.vdot(v, u) * v))


def _permutation_sign(perm: tuple[int, ...]) -> int:
    sign = 1
    seen = list(perm)
    for i in range(len(seen)):
        while seen[i] != i:
            j = seen[i]
            seen[i], seen[j] = seen[j], seen[i]
            sign = -sign
    return sign


def pencil_charpoly(a: Any) -> PolyCoeffs:
    """Coefficients of det(x Aᵀ − A), expanded entrywise by the Leibniz rule."""
    matrix = as_matrix(a)
    n = matrix.shape[0]
    # entry (i, j) of x Aᵀ − A is the linear polynomial −a_ij + a_ji x
    entries = [[np.array([-matrix[i, j], matrix[j, i]]) for j in range(n)] for i in range(n)]

    total = np.zeros(n + 1, dtype=complex)
    for perm in permutations(range(n)):
        term = np.array([1.0 + 0j])
        for row, column in enumerate(perm):
            term = npoly.polymul(term, entries[row][column])
        total[: term.size] += _permutation_sign(perm) * term
    return PolyCoeffs.from_array(total)


def _quadratic_roots(b: complex, c: complex) -> list[complex]:
    """Roots of the monic x² + b x + c without cancellation."""
    disc = cmath.sqrt(b * b - 4 * c)
    q = -(b + disc) / 2 if abs(b + disc) >= abs(b - disc) else -(b - disc) / 2
    if q == 0:
        return [0j, 0j]
    return [q, c / q]


def _cubic_roots(a: complex, b: complex, c: complex) -> list[complex]:
    """Cardano's formula for the monic x³ + a x² + b x + c."""
    shift = a / 3
    p = b - a * a / 3
    q = 2 * a**3 / 27 - a * b / 3 + c

    disc = cmath.sqrt(q * q / 4 + p**3 / 27)
    w = -q / 2 + disc if abs(-q / 2 + disc) >= abs(-q / 2 - disc) else -q / 2 - disc
    if w == 0:
        return [-shift] * 3

    u = w ** (1 / 3)
    omega = cmath.exp(2j * cmath.pi / 3)
    roots = []
    for k in range(3):
        uk = u * omega**k
        roots.append(uk - p / (3 * uk) - shift)
    return roots


def _polish(poly: PolyCoeffs, root: complex) -> complex:
    """One Newton step, kept only when it lowers the residual."""
    derivative = npoly.polyder(np.asarray(poly.coeffs))
    slope = complex(npoly.polyval(root, derivative))
    if slope == 0:
        return root
    candidate = root - poly(root) / slope
    return candidate if abs(poly(candidate)) < abs(poly(root)) else root


def poly_roots(poly: PolyCoeffs, tol: Tolerance = DEFAULT_TOLERANCE) -> list[complex]:
    """All roots with multiplicity, from closed-form solvers up to degree three."""
    if poly.scale == 0 or abs(poly.leading) <= tol.rank_tol * poly.scale:
        raise DegenerateLeadingCoefficient(
            f"leading coefficient {poly.leading!r} vanishes at scale {poly.scale:g}"
        )

    monic = poly.monic()
    c = monic.coeffs
    if poly.degree == 0:
        return []
    if poly.degree == 1:
        return [-c[0]]
    if poly.degree == 2:
        roots = _quadratic_roots(c[1], c[0])
    else:
        roots = _cubic_roots(c[2], c[1], c[0])
    return [_polish(monic, root) for root in roots]


def _snap_pair(pair: list[complex], tol: Tolerance) -> tuple[list[complex], float | None]:
    """Move a reciprocal pair μ, 1/μ onto ±1 together when either root is that close."""
    for target in (1.0, -1.0):
        distance = min(abs(value - target) for value in pair)
        if distance <= tol.eig_tol:
            return [complex(target), complex(target)], distance
    return pair, None


def cosquare_structure(a: Any, tol: Tolerance = DEFAULT_TOLERANCE) -> CosquareStructure:
    """Spectrum of the cosquare A⁻ᵀA with geometric multiplicities.

    det(x Aᵀ − A) is self-reciprocal: c_k = (−1)^n c_{n−k}. The coefficients
    are symmetrised before solving and, for n = 3, the root x = 1 is divided
    out exactly, leaving a reciprocal quadratic with roots μ and 1/μ.
    """
    matrix = as_matrix(a)
    n = matrix.shape[0]
    if rank_tol(matrix, tol) != n:
        raise SingularMatrix("cosquare is defined for nonsingular matrices only")
    # (sA)⁻ᵀ(sA) = A⁻ᵀA
    matrix = unit_scaled(matrix)
    sigma_max = float(singular_values(matrix)[0])

    poly = pencil_charpoly(matrix)
    c = np.asarray(poly.coeffs)
    mirrored = (-1) ** n * c[::-1]
    asymmetry = float(np.max(np.abs(c - mirrored)))
    if asymmetry > tol.eig_tol * poly.scale:
        raise SpectrumNotReciprocal(
            f"pencil polynomial is not self-reciprocal (defect {asymmetry:g}); "
            "spectrum not closed under inversion"
        )
    c = (c + mirrored) / 2

    if n == 3:
        # c3 x³ + c2 x² − c2 x − c3 = (x − 1)(c3 x² + (c3 + c2) x + c3)
        reciprocal = PolyCoeffs.from_array([c[3], c[3] + c[2], c[3]])
    else:
        reciprocal = PolyCoeffs.from_array(c)

    pair, distance = _snap_pair(poly_roots(reciprocal, tol), tol)
    spectrum = [1 + 0j, *pair] if n == 3 else pair
    snapped = () if distance is None else (distance,)

    geo_mult: dict[complex, int] = {}
    for value, count in Counter(spectrum).items():
        if count > 1:
            # A⁻ᵀA − μI = A⁻ᵀ(A − μAᵀ): same rank, no inverse needed. The threshold
            # is eig_tol so that a pair snapped onto ±1 is judged at the same scale.
            pencil = matrix - value * matrix.T
            sigma = singular_values(pencil)
            geo_mult[value] = n - int(np.count_nonzero(sigma > tol.eig_tol * sigma_max))
        else:
            geo_mult[value] = 1

    logger.debug("cosquare_structure n=%d spectrum=%s geo_mult=%s", n, spectrum, geo_mult)
    return CosquareStructure(spectrum=tuple(spectrum), geo_mult=geo_mult, snapped=snapped)
