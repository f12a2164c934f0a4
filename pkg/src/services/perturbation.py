"""Perturbation witnesses, random samplers and the Monte-Carlo verifier.

A witness is a closed-form matrix path ε ↦ M(ε) with M(0) in the source class
and M(ε) in the target class for every small ε > 0; it proves an arrow of a
closure graph. The samplers draw random members of a class and random small
perturbations, and the verifier checks that what the classifier observes
never leaves the up-set of the source vertex.
"""
from __future__ import annotations

import cmath
import logging
import math
from collections import Counter
from collections.abc import Callable, Iterable
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from src.core.canonical import (
    PARAMETER_SAMPLES,
    BundleTag,
    CanonicalClass,
    CanonicalFormError,
    ClassTag,
    UnclassifiableStructure,
    bundle_of,
    canonical_matrix,
    classify,
    parameter_distance,
)
from src.core.closure_graph import Direction, Level, bundle_graph, class_graph, reach_set
from src.core.deformation import deformation_family, miniversal_pattern
from src.core.matrixcore import DEFAULT_TOLERANCE, ComplexMatrix, Tolerance, as_matrix, direct_sum

logger = logging.getLogger(__name__)

# ── Calibration ───────────────────────────────────────────────────────────────
# Perturbations of ii that land in the v family stay this close to λ = −1 at ε = 1e-3.
DRIFT_LIMIT_II = 0.1
# A family observation counts as a hit of a probed family target within this distance.
PROBE_PARAMETER_TOLERANCE = 1e-3
MAX_WITNESS_EPSILON = 0.1
_MAX_CONDITION_ATTEMPTS = 10_000


class PerturbationError(Exception):
    pass


class UnknownEdge(PerturbationError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "unknown edge"


class InvalidEpsilon(PerturbationError, ValueError):
    pass


@dataclass(frozen=True)
class RngConfig:
    seed: int = 42
    condition_bound: float = 10.0

    def __post_init__(self) -> None:
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit non-negative integer")
        if self.condition_bound < 1:
            raise ValueError("condition_bound must be >= 1")

    def generator(self, *key: int) -> np.random.Generator:
        """Independent stream for ``key``; the same (seed, key) always gives the same stream."""
        return np.random.default_rng(np.random.SeedSequence([self.seed, *key]))


def drift_bound(eps: float) -> float:
    """How far a family parameter may drift from its limit under a perturbation of size ε.

    A perturbed double eigenvalue splits like √ε, so the bound scales the
    same way with a floor for very small ε.
    """
    return max(10 * math.sqrt(eps), 1e-2)


def boundary_distance(lam: complex) -> float:
    """Distance from ``{λ, 1/λ}`` to the excluded values ±1."""
    lam = complex(lam)
    candidates = [lam] if lam == 0 else [lam, 1 / lam]
    return min(abs(value - sign) for value in candidates for sign in (1, -1))


# ── Witness catalog ───────────────────────────────────────────────────────────
Path = Callable[[float], np.ndarray]


@dataclass(frozen=True)
class Witness:
    source: CanonicalClass
    target: CanonicalClass | BundleTag
    level: Level
    path: Path
    note: str = ""

    @property
    def name(self) -> str:
        return f"{self.source}->{self.target}"

    def matrix(self, eps: float) -> ComplexMatrix:
        if not 0 < eps <= MAX_WITNESS_EPSILON:
            raise InvalidEpsilon(f"witness needs 0 < eps <= {MAX_WITNESS_EPSILON}, got {eps}")
        return as_matrix(self.path(eps))

    def start(self) -> ComplexMatrix:
        return as_matrix(self.path(0.0))

    def reaches_target(self, observed: CanonicalClass, param_tol: float = 1e-6) -> bool:
        if isinstance(self.target, BundleTag):
            return bundle_of(observed) is self.target
        return observed.matches(self.target, param_tol)


def _m(rows: list[list[complex]]) -> np.ndarray:
    return np.array(rows, dtype=complex)


def _i_to_ii(e: float) -> np.ndarray:
    return _m([[0, e], [-e, 0]])


def _i_to_iii(e: float) -> np.ndarray:
    return _m([[e, 0], [0, 0]])


def _ii_to_iv(e: float) -> np.ndarray:
    return _m([[0, 1], [-1, e]])


def _iii_to_iv(e: float) -> np.ndarray:
    # the curve [[1, t], [-t, 0]] traced with t = √ε keeps det = ε above the rank threshold
    t = math.sqrt(e)
    return _m([[1, t], [-t, 0]])


def _iii_to_vi(e: float) -> np.ndarray:
    return _m([[1, 0], [0, e]])


def _iii_to_v(lam: complex) -> Path:
    if lam == 0:
        return lambda e: _m([[1, e], [0, 0]])

    def path(e: float) -> np.ndarray:
        # det(x Aᵀ − A) = δ(x − λ)(x − 1/λ) once ζ² = δ(2 − λ − 1/λ)
        zeta = cmath.sqrt(e * (2 - lam - 1 / lam))
        return _m([[1, 0], [zeta, e]])

    return path


def _pad_zero(path: Path) -> Path:
    return lambda e: direct_sum(path(e), [[0]])


def _pad_one(path: Path) -> Path:
    return lambda e: direct_sum(path(e), [[1]])


def _nine_to_eleven(mu: complex) -> Path:
    if mu == 0:
        return lambda e: _m([[0, 1, 0], [0, 0, 1], [0, 0, e]])
    # det(x Aᵀ − A) = ε(x − 1)(x² + (δ/ε + 1)x + 1) for A = J_3(0) + ε E31 + δ E33
    return lambda e: _m([[0, 1, 0], [0, 0, 1], [e, 0, -e * (1 + mu + 1 / mu)]])


def _cls(tag: ClassTag, param: complex | None = None) -> CanonicalClass:
    return CanonicalClass(tag, param)


def _class_witnesses(samples: Iterable[complex]) -> list[Witness]:
    samples = tuple(samples)
    level = Level.CLASSES
    witnesses = [
        Witness(_cls(ClassTag.I), _cls(ClassTag.II), level, _i_to_ii),
        Witness(_cls(ClassTag.I), _cls(ClassTag.III), level, _i_to_iii),
        Witness(_cls(ClassTag.II), _cls(ClassTag.IV), level, _ii_to_iv),
        Witness(_cls(ClassTag.III), _cls(ClassTag.IV), level, _iii_to_iv),
        Witness(_cls(ClassTag.III), _cls(ClassTag.VI), level, _iii_to_vi),
        Witness(_cls(ClassTag.T1), _cls(ClassTag.T2), level, _pad_zero(_i_to_ii)),
        Witness(_cls(ClassTag.T1), _cls(ClassTag.T3), level, _pad_zero(_i_to_iii)),
        Witness(_cls(ClassTag.T2), _cls(ClassTag.T4), level, _pad_zero(_ii_to_iv)),
        Witness(
            _cls(ClassTag.T2),
            _cls(ClassTag.T7),
            level,
            lambda e: direct_sum(_m([[0, 1], [-1, 0]]), [[e]]),
        ),
        Witness(_cls(ClassTag.T3), _cls(ClassTag.T4), level, _pad_zero(_iii_to_iv)),
        Witness(_cls(ClassTag.T3), _cls(ClassTag.T6), level, _pad_zero(_iii_to_vi)),
        Witness(_cls(ClassTag.T3), _cls(ClassTag.T7), level, _pad_one(_i_to_ii)),
        Witness(
            _cls(ClassTag.T4),
            _cls(ClassTag.T9),
            level,
            lambda e: _m([[0, -1, 0], [1, 1, e], [0, 0, 0]]),
        ),
        Witness(
            _cls(ClassTag.T6),
            _cls(ClassTag.T8),
            level,
            _pad_one(_iii_to_vi),
            note="starts from diag(1, 0, 1), a permuted copy of matrix 6",
        ),
        Witness(
            _cls(ClassTag.T6),
            _cls(ClassTag.T9),
            level,
            lambda e: _m([[1, 0, -1j * e], [0, 1, e], [0, 0, 0]]),
        ),
        Witness(_cls(ClassTag.T7), _cls(ClassTag.T10), level, _pad_one(_ii_to_iv)),
        Witness(
            _cls(ClassTag.T8),
            _cls(ClassTag.T12),
            level,
            lambda e: _m([[0, 0, 1], [0, -1, -e], [1, e, 0]]),
            note="starts from a symmetric matrix congruent to the identity",
        ),
        Witness(
            _cls(ClassTag.T9),
            _cls(ClassTag.T10),
            level,
            lambda e: _m([[0, 1, 0], [0, 0, 1], [e, 0, e]]),
        ),
        Witness(
            _cls(ClassTag.T9),
            _cls(ClassTag.T12),
            level,
            lambda e: _m([[0, 1, 0], [0, 0, 1], [e, 0, -3 * e]]),
        ),
    ]
    for lam in samples:
        witnesses.extend(
            [
                Witness(_cls(ClassTag.III), _cls(ClassTag.V, lam), level, _iii_to_v(lam)),
                Witness(
                    _cls(ClassTag.T3), _cls(ClassTag.T5, lam), level, _pad_zero(_iii_to_v(lam))
                ),
                Witness(
                    _cls(ClassTag.T5, lam),
                    _cls(ClassTag.T9),
                    level,
                    lambda e, lam=lam: _m([[0, 1, 0], [lam, 0, e], [0, 0, 0]]),
                ),
                Witness(_cls(ClassTag.T9), _cls(ClassTag.T11, lam), level, _nine_to_eleven(lam)),
            ]
        )
    return witnesses


def _bundle_witnesses() -> list[Witness]:
    level = Level.BUNDLES

    def iv_to_v(e: float) -> np.ndarray:
        return _m([[0, -1 + e], [1, 1]])

    return [
        Witness(_cls(ClassTag.IV), BundleTag.V_VI, level, iv_to_v),
        Witness(_cls(ClassTag.T4), BundleTag.B5, level, _pad_zero(iv_to_v)),
        Witness(_cls(ClassTag.T10), BundleTag.B11, level, _pad_one(iv_to_v)),
        Witness(
            _cls(ClassTag.T6),
            BundleTag.B5,
            level,
            lambda e: _m([[1, 0, 0], [e, 1, 0], [0, 0, 0]]),
        ),
        Witness(
            _cls(ClassTag.T12),
            BundleTag.B11,
            level,
            lambda e: _m([[0, 0, 1], [e, -1, -1], [1, 1, 0]]),
            note="the star direction of the miniversal deformation of matrix 12",
        ),
    ]


def witness_catalog(
    n: int | None = None,
    samples: Iterable[complex] = PARAMETER_SAMPLES,
) -> list[Witness]:
    """All witnesses, families instantiated at *samples*; optionally only those for one n."""
    catalog = [*_class_witnesses(samples), *_bundle_witnesses()]
    if n is None:
        return catalog
    return [item for item in catalog if item.source.n == n]


def find_witness(
    source: CanonicalClass,
    target: CanonicalClass | BundleTag,
) -> Witness:
    """The catalog witness for an arrow; family members are built for the requested parameter."""
    params = [
        c.param for c in (source, target) if isinstance(c, CanonicalClass) and c.param is not None
    ]
    for item in witness_catalog(samples=params or PARAMETER_SAMPLES[:1]):
        same_target = (
            item.target is target
            if isinstance(target, BundleTag)
            else isinstance(item.target, CanonicalClass) and item.target == target
        )
        if item.source == source and same_target:
            return item
    raise UnknownEdge(f"no witness for {source} -> {target}")


def witness(
    source: CanonicalClass,
    target: CanonicalClass | BundleTag,
    eps: float,
) -> ComplexMatrix:
    return find_witness(source, target).matrix(eps)


# ── Samplers ──────────────────────────────────────────────────────────────────
def _complex_gaussian(stream: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    return (stream.standard_normal(shape) + 1j * stream.standard_normal(shape)) / math.sqrt(2)


def random_congruence(n: int, rng: RngConfig, stream: np.random.Generator) -> np.ndarray:
    """Random S with cond(S) ≤ condition_bound, scaled to smallest singular value 1."""
    for _ in range(_MAX_CONDITION_ATTEMPTS):
        candidate = _complex_gaussian(stream, (n, n))
        sigma = np.linalg.svd(candidate, compute_uv=False)
        if sigma[-1] > 0 and sigma[0] / sigma[-1] <= rng.condition_bound:
            return candidate / sigma[-1]
    raise PerturbationError(
        f"no random transform with condition <= {rng.condition_bound} after "
        f"{_MAX_CONDITION_ATTEMPTS} attempts"
    )


def sample_class_member(
    c: CanonicalClass,
    rng: RngConfig,
    stream: np.random.Generator | None = None,
) -> ComplexMatrix:
    stream = stream if stream is not None else rng.generator()
    base = canonical_matrix(c)
    congruence = random_congruence(c.n, rng, stream)
    return as_matrix(congruence.T @ base @ congruence)


def random_perturbation(
    a: Any,
    eps: float,
    rng: RngConfig,
    stream: np.random.Generator | None = None,
) -> ComplexMatrix:
    """A + E with complex Gaussian E scaled to Frobenius norm ε."""
    matrix = as_matrix(a)
    if eps < 0:
        raise InvalidEpsilon(f"eps must be non-negative, got {eps}")
    if eps == 0:
        return matrix
    stream = stream if stream is not None else rng.generator()
    direction = _complex_gaussian(stream, matrix.shape)
    return as_matrix(matrix + eps * direction / np.linalg.norm(direction))


def source_classes(n: int, samples: Iterable[complex] = PARAMETER_SAMPLES) -> list[CanonicalClass]:
    samples = tuple(samples)
    sources: list[CanonicalClass] = []
    for tag in ClassTag.members(n):
        if tag.is_family:
            sources.extend(CanonicalClass(tag, value) for value in samples)
        else:
            sources.append(CanonicalClass(tag))
    return sources


# ── Monte-Carlo verification ──────────────────────────────────────────────────
@dataclass(frozen=True)
class Violation:
    source: str
    observed: str
    trial: int
    detail: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "source": self.source,
            "observed": self.observed,
            "trial": self.trial,
            "detail": self.detail,
        }


@dataclass(frozen=True)
class DriftRecord:
    source: str
    observed: str
    distance: float
    limit: float


@dataclass
class VerificationReport:
    n: int
    level: Level
    eps: float
    trials: int = 0
    tallies: dict[str, Counter[str]] = field(default_factory=dict)
    violations: list[Violation] = field(default_factory=list)
    flagged: int = 0
    drift: list[DriftRecord] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def clean_fraction(self) -> float:
        if self.trials == 0:
            return 1.0
        return 1 - (self.flagged + len(self.violations)) / self.trials

    def merge(self, other: VerificationReport) -> VerificationReport:
        if (self.n, self.level) != (other.n, other.level):
            raise ValueError("cannot merge reports of different graphs")
        tallies = {source: Counter(counts) for source, counts in self.tallies.items()}
        for source, counts in other.tallies.items():
            tallies.setdefault(source, Counter()).update(counts)
        return VerificationReport(
            n=self.n,
            level=self.level,
            eps=self.eps,
            trials=self.trials + other.trials,
            tallies=tallies,
            violations=[*self.violations, *other.violations],
            flagged=self.flagged + other.flagged,
            drift=[*self.drift, *other.drift],
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "level": self.level.value,
            "eps": self.eps,
            "trials": self.trials,
            "flagged": self.flagged,
            "clean_fraction": self.clean_fraction,
            "tallies": {
                source: dict(sorted(counts.items()))
                for source, counts in sorted(self.tallies.items())
            },
            "violations": [violation.to_dict() for violation in self.violations],
            "max_drift": max((record.distance for record in self.drift), default=0.0),
        }


def _observed_label(c: CanonicalClass | BundleTag) -> str:
    return c.value if isinstance(c, BundleTag) else str(c)


def _class_level_verdict(
    source: CanonicalClass,
    observed: CanonicalClass,
    eps: float,
) -> tuple[bool, DriftRecord | None, str]:
    up = reach_set(class_graph(source.n), source.tag, Direction.UP)
    if not observed.tag.is_family:
        return observed.tag in up, None, "class outside the up-set"

    if observed.tag is source.tag:
        assert source.param is not None and observed.param is not None
        distance = parameter_distance(source.param, observed.param)
        record = DriftRecord(str(source), str(observed), distance, drift_bound(eps))
        return distance <= drift_bound(eps), record, "parameter drifted from the source"

    if observed.tag in up:
        return True, None, ""

    assert observed.param is not None
    distance = boundary_distance(observed.param)
    record = DriftRecord(str(source), str(observed), distance, drift_bound(eps))
    return distance <= drift_bound(eps), record, "family member away from the ±1 boundary"


def _verify_source(
    source: CanonicalClass,
    index: int,
    level: Level,
    trials: int,
    eps: float,
    rng: RngConfig,
    tol: Tolerance,
) -> VerificationReport:
    report = VerificationReport(n=source.n, level=level, eps=eps, trials=trials)
    counts: Counter[str] = Counter()
    bundle_up = reach_set(bundle_graph(source.n), bundle_of(source), Direction.UP)

    for trial in range(trials):
        stream = rng.generator(index, trial)
        member = sample_class_member(source, rng, stream)
        perturbed = random_perturbation(member, eps, rng, stream)
        try:
            result = classify(perturbed, tol)
        except UnclassifiableStructure:
            report.flagged += 1
            counts["unclassifiable"] += 1
            continue

        observed = result.cls
        counts[_observed_label(bundle_of(observed) if level is Level.BUNDLES else observed)] += 1

        allowed = bundle_of(observed) in bundle_up
        detail = "bundle outside the up-set"
        if allowed and level is Level.CLASSES:
            allowed, record, detail = _class_level_verdict(source, observed, eps)
            if record is not None:
                report.drift.append(record)

        if result.flagged:
            report.flagged += 1
        elif not allowed:
            report.violations.append(Violation(str(source), str(observed), trial, detail))

    report.tallies[str(source)] = counts
    logger.info(
        "montecarlo_source_done source=%s level=%s trials=%d violations=%d flagged=%d",
        source,
        level,
        trials,
        len(report.violations),
        report.flagged,
    )
    return report


def monte_carlo_verify(
    n: int,
    level: Level | str,
    trials: int,
    eps: float,
    rng: RngConfig,
    tol: Tolerance = DEFAULT_TOLERANCE,
    sources: Iterable[CanonicalClass] | None = None,
) -> VerificationReport:
    """Perturb random members of every source class and check the observed classes.

    Violations are collected, not raised. Classifications that carry a
    tolerance warning or fail as unclassifiable are counted as flagged.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    level = Level(level)
    chosen = list(sources) if sources is not None else source_classes(n)

    report = VerificationReport(n=n, level=level, eps=eps)
    for index, source in enumerate(chosen):
        report = report.merge(_verify_source(source, index, level, trials, eps, rng, tol))
    return report


# ── Non-edge probing ──────────────────────────────────────────────────────────
@dataclass(frozen=True)
class ProbeReport:
    source: str
    target: str
    trials: int
    hits: int
    closest: str | None
    tallies: dict[str, int]
    note: str = "statistical corroboration only; a probe cannot certify that an arrow is absent"

    @property
    def ok(self) -> bool:
        return self.hits == 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "source": self.source,
            "target": self.target,
            "trials": self.trials,
            "hits": self.hits,
            "closest": self.closest,
            "tallies": dict(sorted(self.tallies.items())),
            "note": self.note,
        }


def _star_perturbation(
    source: CanonicalClass, eps: float, stream: np.random.Generator
) -> ComplexMatrix:
    stars = miniversal_pattern(source).stars
    chosen = stream.random(len(stars)) < 0.5
    if not chosen.any():
        chosen[stream.integers(len(stars))] = True
    values = _complex_gaussian(stream, (len(stars),)) * chosen
    values *= eps / np.linalg.norm(values)
    return deformation_family(source, values)


def nonedge_probe(
    v: CanonicalClass,
    w: CanonicalClass,
    trials: int,
    eps: float,
    rng: RngConfig,
    tol: Tolerance = DEFAULT_TOLERANCE,
) -> ProbeReport:
    """Look for perturbations of v that classify as w.

    Even trials perturb a random member of v in a random direction; odd
    trials move the canonical matrix of v along a random subset of its
    miniversal star positions. Random streams are keyed by the (v, w) tags
    and the trial, so different pairs never share draws.
    """
    on_edge = w.tag in reach_set(class_graph(v.n), v.tag, Direction.UP)
    if on_edge:
        logger.warning("nonedge_probe_on_edge source=%s target=%s", v, w)

    members = list(ClassTag)
    pair_key = (members.index(v.tag), members.index(w.tag))
    counts: Counter[str] = Counter()
    hits = 0
    closest: tuple[float, str] | None = None
    for trial in range(trials):
        stream = rng.generator(*pair_key, trial)
        if trial % 2 == 0:
            candidate = random_perturbation(sample_class_member(v, rng, stream), eps, rng, stream)
        else:
            candidate = _star_perturbation(v, eps, stream)
        try:
            observed = classify(candidate, tol).cls
        except CanonicalFormError:
            counts["unclassifiable"] += 1
            continue
        counts[str(observed) if observed.param is None else observed.label] += 1

        if observed.tag is not w.tag:
            continue
        if w.param is None or observed.param is None:
            hits += 1
            closest = (0.0, str(observed))
            continue
        distance = parameter_distance(observed.param, w.param)
        if closest is None or distance < closest[0]:
            closest = (distance, str(observed))
        if distance <= PROBE_PARAMETER_TOLERANCE and boundary_distance(w.param) > drift_bound(eps):
            hits += 1

    if closest is None and counts:
        closest = (math.inf, counts.most_common(1)[0][0])

    logger.info(
        "nonedge_probe_done source=%s target=%s trials=%d hits=%d on_edge=%s",
        v,
        w,
        trials,
        hits,
        on_edge,
    )
    return ProbeReport(
        source=str(v),
        target=str(w),
        trials=trials,
        hits=hits,
        closest=None if closest is None else closest[1],
        tallies=dict(counts),
    )


# ── Genericity and drift ──────────────────────────────────────────────────────
@dataclass(frozen=True)
class GenericityReport:
    n: int
    samples: int
    hits: int
    tallies: dict[str, int]

    @property
    def fraction(self) -> float:
        return self.hits / self.samples if self.samples else 0.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "samples": self.samples,
            "hits": self.hits,
            "fraction": self.fraction,
            "tallies": dict(sorted(self.tallies.items())),
        }


def genericity(
    n: int,
    samples: int,
    rng: RngConfig,
    tol: Tolerance = DEFAULT_TOLERANCE,
) -> GenericityReport:
    """How often a complex Gaussian matrix lands in the generic family (v for n=2, 11 for n=3)."""
    generic = ClassTag.V if n == 2 else ClassTag.T11
    counts: Counter[str] = Counter()
    hits = 0
    for index in range(samples):
        stream = rng.generator(n, index)
        try:
            observed = classify(_complex_gaussian(stream, (n, n)), tol).cls
        except CanonicalFormError:
            counts["unclassifiable"] += 1
            continue
        counts[observed.label] += 1
        hits += observed.tag is generic
    logger.info("genericity_done n=%d samples=%d hits=%d", n, samples, hits)
    return GenericityReport(n=n, samples=samples, hits=hits, tallies=dict(counts))


@dataclass(frozen=True)
class DriftReport:
    eps: float
    trials: int
    family_hits: int
    max_distance: float
    limit: float
    outside: int
    tallies: dict[str, int]

    @property
    def ok(self) -> bool:
        return self.outside == 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "eps": self.eps,
            "trials": self.trials,
            "family_hits": self.family_hits,
            "max_distance": self.max_distance,
            "limit": self.limit,
            "outside": self.outside,
            "tallies": dict(sorted(self.tallies.items())),
        }


def drift_law(
    trials: int,
    eps: float,
    rng: RngConfig,
    tol: Tolerance = DEFAULT_TOLERANCE,
    limit: float = DRIFT_LIMIT_II,
) -> DriftReport:
    """Perturb ii and measure how far v_λ observations sit from λ = −1.

    Observations outside {ii, iv, v_λ} also count as outside the law.
    """
    source = CanonicalClass(ClassTag.II)
    base = canonical_matrix(source)
    counts: Counter[str] = Counter()
    family_hits = 0
    outside = 0
    max_distance = 0.0
    for trial in range(trials):
        stream = rng.generator(trial)
        try:
            observed = classify(random_perturbation(base, eps, rng, stream), tol).cls
        except CanonicalFormError:
            counts["unclassifiable"] += 1
            continue
        counts[observed.label] += 1
        if observed.tag is ClassTag.V:
            assert observed.param is not None
            family_hits += 1
            lam = observed.param
            distance = min(abs(lam + 1), abs(1 / lam + 1)) if lam != 0 else 1.0
            max_distance = max(max_distance, distance)
            outside += distance > limit
        elif observed.tag not in (ClassTag.II, ClassTag.IV):
            outside += 1
    logger.info(
        "drift_law_done trials=%d family_hits=%d max_distance=%.3g outside=%d",
        trials,
        family_hits,
        max_distance,
        outside,
    )
    return DriftReport(
        eps=eps,
        trials=trials,
        family_hits=family_hits,
        max_distance=max_distance,
        limit=limit,
        outside=outside,
        tallies=dict(counts),
    )
