"""Canonical congruence classes of 2x2 and 3x3 complex matrices.

Every square complex matrix is congruent to a direct sum of blocks
``H_m(λ)``, ``Γ_k`` and ``J_k(0)`` that is unique up to permuting the
summands. For n ≤ 3 this leaves six classes of 2x2 matrices (``i``..``vi``)
and twelve classes of 3x3 matrices (``1``..``12``); ``v``, ``5`` and ``11``
are one-parameter families.
"""
from __future__ import annotations

import cmath
import logging
import math
from dataclasses import InitVar, dataclass, field
from enum import Enum, StrEnum
from typing import Any

import numpy as np
from scipy import linalg as sla

from src.core.matrixcore import (
    DEFAULT_TOLERANCE,
    ComplexMatrix,
    CosquareStructure,
    DegenerateLeadingCoefficient,
    SpectrumNotReciprocal,
    Tolerance,
    as_matrix,
    cosquare_structure,
    direct_sum,
    null_pair,
    rank_tol,
    sin_angle,
    singular_values,
    sym_skew_parts,
    unit_scaled,
)

logger = logging.getLogger(__name__)

# Parameter values at which families are exercised by the checks and suites.
PARAMETER_SAMPLES: tuple[complex, ...] = (0j, 2 + 0j, -3 + 0j, 0.5j, 1 + 1j)
# A singular value within this factor of the rank threshold is reported as ambiguous.
RANK_MARGIN = 10.0


class CanonicalFormError(Exception):
    pass


class InvalidBlockParameter(CanonicalFormError, ValueError):
    pass


class ExcludedParameter(CanonicalFormError, ValueError):
    pass


class UnknownClassTag(CanonicalFormError, ValueError):
    pass


class UnclassifiableStructure(CanonicalFormError):
    pass


class ClassTag(StrEnum):
    I = "i"  # noqa: E741
    II = "ii"
    III = "iii"
    IV = "iv"
    V = "v"
    VI = "vi"
    T1 = "1"
    T2 = "2"
    T3 = "3"
    T4 = "4"
    T5 = "5"
    T6 = "6"
    T7 = "7"
    T8 = "8"
    T9 = "9"
    T10 = "10"
    T11 = "11"
    T12 = "12"

    @property
    def n(self) -> int:
        return 3 if self.value.isdigit() else 2

    @property
    def is_family(self) -> bool:
        return self in _FAMILY_SYMBOLS

    @property
    def label(self) -> str:
        symbol = _FAMILY_SYMBOLS.get(self)
        return f"{self.value}_{symbol}" if symbol else self.value

    @classmethod
    def members(cls, n: int) -> tuple[ClassTag, ...]:
        return tuple(tag for tag in cls if tag.n == n)


_FAMILY_SYMBOLS = {ClassTag.V: "lambda", ClassTag.T5: "lambda", ClassTag.T11: "mu"}


class BundleTag(StrEnum):
    I = "i"  # noqa: E741
    II = "ii"
    III = "iii"
    IV = "iv"
    V_VI = "v&vi"
    B1 = "1"
    B2 = "2"
    B3 = "3"
    B4 = "4"
    B5 = "5"
    B6 = "6"
    B7 = "7"
    B8 = "8"
    B9 = "9"
    B10 = "10"
    B11 = "11"
    B12 = "12"

    @property
    def n(self) -> int:
        return 3 if self.value.isdigit() else 2

    @property
    def is_family(self) -> bool:
        return self in {BundleTag.V_VI, BundleTag.B5, BundleTag.B11}

    @property
    def label(self) -> str:
        return self.value

    @classmethod
    def members(cls, n: int) -> tuple[BundleTag, ...]:
        return tuple(tag for tag in cls if tag.n == n)


_BUNDLE_OF = {
    ClassTag.I: BundleTag.I,
    ClassTag.II: BundleTag.II,
    ClassTag.III: BundleTag.III,
    ClassTag.IV: BundleTag.IV,
    ClassTag.V: BundleTag.V_VI,
    ClassTag.VI: BundleTag.V_VI,
    **{ClassTag(str(k)): BundleTag(str(k)) for k in range(1, 13)},
}


class BlockKind(Enum):
    H = "H"
    GAMMA = "Gamma"
    J = "J"


def _storage_tolerance() -> Tolerance:
    return Tolerance(rank_tol=DEFAULT_TOLERANCE.rank_tol, eig_tol=1e-12)


@dataclass(frozen=True)
class CanonicalClass:
    """A class tag plus, for the families, its parameter in normalized form."""

    tag: ClassTag
    param: complex | None = None
    # tolerance for choosing the representative of {λ, 1/λ}; exact by default
    tol: InitVar[Tolerance | None] = None

    def __post_init__(self, tol: Tolerance | None) -> None:
        if self.tag.is_family:
            if self.param is None:
                raise InvalidBlockParameter(f"class {self.tag.label} requires a parameter")
            normalized = normalize_lambda(self.param, tol or _storage_tolerance())
            object.__setattr__(self, "param", normalized)
        elif self.param is not None:
            raise InvalidBlockParameter(f"class {self.tag.value} takes no parameter")

    @property
    def n(self) -> int:
        return self.tag.n

    @property
    def label(self) -> str:
        return self.tag.label

    def matches(self, other: CanonicalClass, param_tol: float = 1e-6) -> bool:
        if self.tag is not other.tag:
            return False
        if self.param is None or other.param is None:
            return self.param is other.param
        return parameter_distance(self.param, other.param) <= param_tol

    def __str__(self) -> str:
        if self.param is None:
            return self.tag.value
        return f"{self.tag.value}[{format_param(self.param)}]"


def format_param(value: complex) -> str:
    value = complex(value)
    # adding 0.0 turns -0.0 into 0.0
    real, imag = value.real + 0.0, value.imag + 0.0
    if imag == 0:
        return f"{real:.6g}"
    return f"{real:.6g}{imag:+.6g}i"


def parse_tag(text: str) -> ClassTag:
    """Accept ``ii``, ``II``, ``v_lambda``, ``5``, ``T5``, ``11_mu`` and similar spellings."""
    token = text.strip().lower()
    for suffix in ("_lambda", "_mu", "_λ", "_μ"):
        if token.endswith(suffix):
            token = token[: -len(suffix)]
            break
    if token.startswith("t") and token[1:].isdigit():
        token = token[1:]
    try:
        return ClassTag(token)
    except ValueError as error:
        raise UnknownClassTag(f"unknown class tag: {text!r}") from error


def parse_bundle_tag(text: str) -> BundleTag:
    token = text.strip().lower().replace(" ", "")
    if token in {"v", "vi", "v_lambda", "v&vi"}:
        return BundleTag.V_VI
    if token.startswith("b") and token[1:].isdigit():
        token = token[1:]
    try:
        return BundleTag(parse_tag(token).value)
    except (UnknownClassTag, ValueError) as error:
        raise UnknownClassTag(f"unknown bundle tag: {text!r}") from error


def normalize_lambda(value: complex, tol: Tolerance = DEFAULT_TOLERANCE) -> complex:
    """Representative of ``{λ, 1/λ}``.

    The member with modulus above one, or on the unit circle the member with
    positive imaginary part. Zero has no partner and is returned as is.
    """
    lam = complex(value)
    if not cmath.isfinite(lam):
        raise InvalidBlockParameter(f"parameter must be finite, got {lam!r}")
    if min(abs(lam - 1), abs(lam + 1)) <= tol.eig_tol:
        raise ExcludedParameter(f"parameter {format_param(lam)} is excluded: must differ from ±1")
    if lam == 0:
        return 0j

    modulus = abs(lam)
    if abs(modulus - 1) <= tol.eig_tol:
        return lam if lam.imag > 0 else 1 / lam
    return lam if modulus > 1 else 1 / lam


def parameter_distance(a: complex, b: complex) -> float:
    """Chordal distance between parameters, taken modulo ``λ ~ 1/λ``."""
    a, b = complex(a), complex(b)
    denominator = math.sqrt(1 + abs(a) ** 2) * math.sqrt(1 + abs(b) ** 2)
    return min(abs(a - b), abs(a * b - 1)) / denominator


def block(kind: BlockKind, size: int, lam: complex | None = None) -> ComplexMatrix:
    if size < 1:
        raise InvalidBlockParameter("block size must be positive")

    if kind is BlockKind.H:
        if 2 * size > 3:
            raise InvalidBlockParameter(f"H_{size} does not fit in a 3x3 matrix")
        if lam is None:
            raise InvalidBlockParameter("H_m(λ) requires λ")
        if complex(lam) == (-1) ** (size + 1):
            raise InvalidBlockParameter(f"H_{size}(λ) requires λ ≠ {(-1) ** (size + 1)}")
        jordan = complex(lam) * np.eye(size, dtype=complex) + np.eye(size, k=1, dtype=complex)
        result = np.zeros((2 * size, 2 * size), dtype=complex)
        result[:size, size:] = np.eye(size)
        result[size:, :size] = jordan
        return result

    if size > 3:
        raise InvalidBlockParameter(f"{kind.value}_{size} does not fit in a 3x3 matrix")

    if kind is BlockKind.GAMMA:
        result = np.zeros((size, size), dtype=complex)
        for i in range(size):
            sign = (-1) ** (size - 1 - i)
            result[i, size - 1 - i] = sign
            if i >= 1:
                result[i, size - i] = sign
        return result

    if size % 2 == 0:
        raise InvalidBlockParameter(f"J_{size}(0) requires an odd size")
    return np.eye(size, k=1, dtype=complex)


def _h(lam: complex) -> ComplexMatrix:
    return block(BlockKind.H, 1, lam)


def _gamma(size: int) -> ComplexMatrix:
    return block(BlockKind.GAMMA, size)


def _j(size: int) -> ComplexMatrix:
    return block(BlockKind.J, size)


def canonical_matrix(c: CanonicalClass) -> ComplexMatrix:
    tag, param = c.tag, c.param
    builders = {
        ClassTag.I: lambda: direct_sum(_j(1), _j(1)),
        ClassTag.II: lambda: _h(-1),
        ClassTag.III: lambda: direct_sum(_gamma(1), _j(1)),
        ClassTag.IV: lambda: _gamma(2),
        ClassTag.V: lambda: _h(param),
        ClassTag.VI: lambda: direct_sum(_gamma(1), _gamma(1)),
        ClassTag.T1: lambda: direct_sum(_j(1), _j(1), _j(1)),
        ClassTag.T2: lambda: direct_sum(_h(-1), _j(1)),
        ClassTag.T3: lambda: direct_sum(_gamma(1), _j(1), _j(1)),
        ClassTag.T4: lambda: direct_sum(_gamma(2), _j(1)),
        ClassTag.T5: lambda: direct_sum(_h(param), _j(1)),
        ClassTag.T6: lambda: direct_sum(_gamma(1), _gamma(1), _j(1)),
        ClassTag.T7: lambda: direct_sum(_h(-1), _gamma(1)),
        ClassTag.T8: lambda: direct_sum(_gamma(1), _gamma(1), _gamma(1)),
        ClassTag.T9: lambda: _j(3),
        ClassTag.T10: lambda: direct_sum(_gamma(2), _gamma(1)),
        ClassTag.T11: lambda: direct_sum(_h(param), _gamma(1)),
        ClassTag.T12: lambda: _gamma(3),
    }
    return as_matrix(builders[tag]())


def bundle_of(c: CanonicalClass | ClassTag) -> BundleTag:
    tag = c.tag if isinstance(c, CanonicalClass) else c
    return _BUNDLE_OF[tag]


@dataclass(frozen=True)
class RankProfile:
    rank: int
    sym_rank: int
    skew_rank: int


def rank_profile(a: Any, tol: Tolerance = DEFAULT_TOLERANCE) -> RankProfile:
    """Ranks of A and of its symmetric and skew parts, all measured against σ_max(A)."""
    matrix = as_matrix(a)
    sym, skew = sym_skew_parts(matrix)
    reference = float(singular_values(matrix)[0])
    return RankProfile(
        rank=rank_tol(matrix, tol),
        sym_rank=rank_tol(sym, tol, reference=reference),
        skew_rank=rank_tol(skew, tol, reference=reference),
    )


@dataclass(frozen=True)
class ClassificationReport:
    cls: CanonicalClass
    profile: RankProfile
    spectrum: tuple[complex, ...] | None = None
    null_vectors_parallel: bool | None = None
    warnings: tuple[str, ...] = field(default_factory=tuple)

    @property
    def tag(self) -> ClassTag:
        return self.cls.tag

    @property
    def flagged(self) -> bool:
        return bool(self.warnings)

    def to_dict(self) -> dict[str, Any]:
        param = self.cls.param
        return {
            "class": self.cls.label,
            "param": None if param is None else [param.real, param.imag],
            "diagnostics": {
                "rank": self.profile.rank,
                "sym_rank": self.profile.sym_rank,
                "skew_rank": self.profile.skew_rank,
                "spectrum": (
                    None
                    if self.spectrum is None
                    else [[value.real, value.imag] for value in self.spectrum]
                ),
                "null_vectors_parallel": self.null_vectors_parallel,
            },
            "warnings": list(self.warnings),
        }


class _Findings:
    def __init__(self) -> None:
        self.warnings: list[str] = []

    def add(self, message: str) -> None:
        if message not in self.warnings:
            self.warnings.append(message)


def _check_rank_margin(a: Any, tol: Tolerance, findings: _Findings) -> None:
    sigma = singular_values(a)
    if not sigma.size or sigma[0] == 0:
        return
    threshold = tol.rank_tol * sigma[0]
    near = (sigma > threshold / RANK_MARGIN) & (sigma < threshold * RANK_MARGIN)
    if np.any(near):
        findings.add(
            "rank_near_threshold: a singular value lies within a factor "
            f"{RANK_MARGIN:g} of rank_tol"
        )


def _cosquare(a: ComplexMatrix, tol: Tolerance, findings: _Findings) -> CosquareStructure:
    try:
        structure = cosquare_structure(a, tol)
    except (SpectrumNotReciprocal, DegenerateLeadingCoefficient) as error:
        raise UnclassifiableStructure(str(error)) from error
    for distance in structure.snapped:
        if distance > tol.eig_tol / 10:
            findings.add(f"eigenvalue_snapped: moved {distance:.3g} onto ±1")
    return structure


def _family_class(
    tag: ClassTag, mu: complex, tol: Tolerance, findings: _Findings
) -> CanonicalClass:
    try:
        lam = normalize_lambda(mu, tol)
    except (ExcludedParameter, InvalidBlockParameter) as error:
        raise UnclassifiableStructure(str(error)) from error
    if lam != 0 and min(abs(lam - 1), abs(lam + 1)) <= 10 * tol.eig_tol:
        findings.add(f"parameter_near_boundary: {format_param(lam)} is within 10*eig_tol of ±1")
    return CanonicalClass(tag, lam, tol)


def _nonsingular_2x2(
    a: ComplexMatrix, tol: Tolerance, findings: _Findings
) -> tuple[CanonicalClass, tuple[complex, ...]]:
    structure = _cosquare(a, tol, findings)
    first, second = structure.spectrum
    if first == second == 1:
        if structure.geo_mult[1] == 2:
            return CanonicalClass(ClassTag.VI), structure.spectrum
    elif first == second == -1:
        geo = structure.geo_mult[-1]
        if geo == 2:
            return CanonicalClass(ClassTag.II), structure.spectrum
        if geo == 1:
            return CanonicalClass(ClassTag.IV), structure.spectrum
    else:
        return _family_class(ClassTag.V, first, tol, findings), structure.spectrum
    raise UnclassifiableStructure(
        f"cosquare spectrum {structure.spectrum} with multiplicities {structure.geo_mult} "
        "matches no 2x2 canonical form"
    )


def _classify_2(
    a: ComplexMatrix, profile: RankProfile, tol: Tolerance, findings: _Findings
) -> tuple[CanonicalClass, tuple[complex, ...] | None]:
    if profile.rank == 0:
        return CanonicalClass(ClassTag.I), None
    if profile.rank == 1:
        if profile.skew_rank == 0:
            return CanonicalClass(ClassTag.III), None
        return CanonicalClass(ClassTag.V, 0j), None
    return _nonsingular_2x2(a, tol, findings)


_LIFT_FROM_CORE = {
    ClassTag.II: ClassTag.T2,
    ClassTag.IV: ClassTag.T4,
    ClassTag.V: ClassTag.T5,
    ClassTag.VI: ClassTag.T6,
}


def _classify_corank_one_3(
    a: ComplexMatrix, profile: RankProfile, tol: Tolerance, findings: _Findings
) -> tuple[CanonicalClass, bool]:
    right, left = null_pair(a, tol)
    sine = sin_angle(right, left)
    if tol.eig_tol < sine <= 10 * tol.eig_tol:
        findings.add(f"null_vectors_near_parallel: sin(angle)={sine:.3g}")

    if sine > tol.eig_tol:
        # 11_0 = H_1(0) + Γ_1 also has independent null vectors; its symmetric part is nonsingular
        if profile.sym_rank == 3:
            return CanonicalClass(ClassTag.T11, 0j), False
        return CanonicalClass(ClassTag.T9), False

    # [W | v] is invertible and reduces A to (WᵀAW) ⊕ [0]
    complement = sla.null_space(right.conj()[None, :])
    core = complement.T @ a @ complement
    if rank_tol(core, tol) != 2:
        raise UnclassifiableStructure("deflated 2x2 core is singular")
    core_class, _ = _nonsingular_2x2(as_matrix(core), tol, findings)
    lifted = _LIFT_FROM_CORE[core_class.tag]
    return CanonicalClass(lifted, core_class.param, tol), True


def _nonsingular_3x3(
    a: ComplexMatrix, tol: Tolerance, findings: _Findings
) -> tuple[CanonicalClass, tuple[complex, ...]]:
    structure = _cosquare(a, tol, findings)
    _, first, second = structure.spectrum
    if first == second == 1:
        geo = structure.geo_mult[1]
        if geo == 3:
            return CanonicalClass(ClassTag.T8), structure.spectrum
        if geo == 1:
            return CanonicalClass(ClassTag.T12), structure.spectrum
    elif first == second == -1:
        geo = structure.geo_mult[-1]
        if geo == 2:
            return CanonicalClass(ClassTag.T7), structure.spectrum
        if geo == 1:
            return CanonicalClass(ClassTag.T10), structure.spectrum
    else:
        return _family_class(ClassTag.T11, first, tol, findings), structure.spectrum
    raise UnclassifiableStructure(
        f"cosquare spectrum {structure.spectrum} with multiplicities {structure.geo_mult} "
        "matches no 3x3 canonical form"
    )


def classify(a: Any, tol: Tolerance = DEFAULT_TOLERANCE) -> ClassificationReport:
    """Canonical congruence class of *a* with the invariants used to decide it."""
    matrix = as_matrix(a)
    n = matrix.shape[0]
    # congruence by sI maps A to s²A, so the class does not depend on scale
    matrix = unit_scaled(matrix)
    profile = rank_profile(matrix, tol)
    findings = _Findings()
    _check_rank_margin(matrix, tol, findings)

    spectrum: tuple[complex, ...] | None = None
    parallel: bool | None = None
    if n == 2:
        cls, spectrum = _classify_2(matrix, profile, tol, findings)
    elif profile.rank == 0:
        cls = CanonicalClass(ClassTag.T1)
    elif profile.rank == 1:
        if profile.skew_rank == 0:
            cls = CanonicalClass(ClassTag.T3)
        else:
            cls = CanonicalClass(ClassTag.T5, 0j)
    elif profile.rank == 2:
        cls, parallel = _classify_corank_one_3(matrix, profile, tol, findings)
    else:
        cls, spectrum = _nonsingular_3x3(matrix, tol, findings)

    logger.debug(
        "classify_done n=%d tag=%s rank=%d sym_rank=%d skew_rank=%d warnings=%d",
        n,
        cls,
        profile.rank,
        profile.sym_rank,
        profile.skew_rank,
        len(findings.warnings),
    )
    return ClassificationReport(
        cls=cls,
        profile=profile,
        spectrum=spectrum,
        null_vectors_parallel=parallel,
        warnings=tuple(findings.warnings),
    )
