"""Acceptance suites run by ``congrua verify``.

Each suite returns a ``SuiteReport`` of named checks. A check fails only on
a genuine violation; classifier results that carry tolerance warnings are
reported with status ``flagged``.
"""
from __future__ import annotations

import logging
from collections.abc import Callable, Iterable
from dataclasses import dataclass, field
from enum import StrEnum
from typing import Any

from src.core.canonical import (
    PARAMETER_SAMPLES,
    BundleTag,
    CanonicalClass,
    CanonicalFormError,
    ClassTag,
    bundle_of,
    canonical_matrix,
    classify,
)
from src.core.closure_graph import (
    BUNDLE_CODIM,
    CLASS_CODIM,
    Level,
    bundle_graph,
    class_graph,
    derive_bundles,
    export,
    load_graph,
    necessary_conditions,
    validate,
)
from src.core.deformation import codimension, miniversal_pattern, verify_transversality
from src.core.matrixcore import DEFAULT_TOLERANCE, Tolerance
from src.services.perturbation import (
    RngConfig,
    Witness,
    drift_law,
    genericity,
    monte_carlo_verify,
    nonedge_probe,
    sample_class_member,
    source_classes,
    witness_catalog,
)

logger = logging.getLogger(__name__)

WITNESS_EPSILONS = (1e-2, 1e-3, 1e-4)
# Genericity, drift and non-edge probes draw this many samples per requested trial.
SAMPLES_PER_TRIAL = 10
GENERICITY_THRESHOLD = 0.99
# Share of bundle-level Monte Carlo trials that must classify without a tolerance warning.
CLEAN_FRACTION_THRESHOLD = 0.999
# Family members of non-edge queries are taken at this parameter.
PROBE_PARAMETER = 2 + 0j

NON_EDGES: tuple[tuple[ClassTag, ClassTag], ...] = (
    (ClassTag.II, ClassTag.V),
    (ClassTag.II, ClassTag.VI),
    (ClassTag.T2, ClassTag.T5),
    (ClassTag.T4, ClassTag.T7),
    (ClassTag.T5, ClassTag.T7),
    (ClassTag.T6, ClassTag.T7),
    (ClassTag.T4, ClassTag.T8),
    (ClassTag.T5, ClassTag.T8),
    (ClassTag.T7, ClassTag.T9),
    (ClassTag.T8, ClassTag.T9),
)


class Suite(StrEnum):
    WITNESS = "witness"
    MONTECARLO = "montecarlo"
    NONEDGE = "nonedge"
    DEFORMATION = "deformation"
    BUNDLES = "bundles"
    GRAPHS = "graphs"
    ALL = "all"


class Status(StrEnum):
    PASS = "pass"
    FLAGGED = "flagged"
    FAIL = "fail"


@dataclass(frozen=True)
class Check:
    name: str
    status: Status
    detail: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {"name": self.name, "status": self.status.value, "detail": self.detail}


@dataclass(frozen=True)
class SuiteReport:
    suite: str
    checks: tuple[Check, ...] = field(default_factory=tuple)

    @property
    def violations(self) -> int:
        return sum(check.status is Status.FAIL for check in self.checks)

    @property
    def ok(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "suite": self.suite,
            "checks": [check.to_dict() for check in self.checks],
            "violations": self.violations,
        }


@dataclass(frozen=True)
class VerifyConfig:
    trials: int = 1000
    eps: float = 1e-3
    rng: RngConfig = field(default_factory=RngConfig)
    tol: Tolerance = DEFAULT_TOLERANCE


def _instance(tag: ClassTag, param: complex = PROBE_PARAMETER) -> CanonicalClass:
    return CanonicalClass(tag, param if tag.is_family else None)


def _status(passed: bool, flagged: bool = False) -> Status:
    if not passed:
        return Status.FAIL
    return Status.FLAGGED if flagged else Status.PASS


# ── Witnesses ─────────────────────────────────────────────────────────────────
def _run_witness(item: Witness, tol: Tolerance, name: str | None = None) -> Check:
    name = name or f"witness:{item.name}"
    try:
        start = classify(item.start(), tol).cls
        if not start.matches(item.source):
            return Check(name, Status.FAIL, f"path starts in {start}, not {item.source}")
        flagged = False
        for eps in WITNESS_EPSILONS:
            result = classify(item.matrix(eps), tol)
            if not item.reaches_target(result.cls):
                return Check(name, Status.FAIL, f"eps={eps:g} classified as {result.cls}")
            flagged = flagged or result.flagged
    except CanonicalFormError as error:
        return Check(name, Status.FAIL, str(error))
    eps_list = ",".join(f"{eps:g}" for eps in WITNESS_EPSILONS)
    return Check(name, _status(True, flagged), f"reached at eps={eps_list}")


def witness_suite(config: VerifyConfig) -> SuiteReport:
    checks = [_run_witness(item, config.tol) for item in witness_catalog()]
    return SuiteReport(Suite.WITNESS.value, tuple(checks))


def _covers_bundle_edge(item: Witness, source: BundleTag, target: BundleTag) -> bool:
    reached = item.target if isinstance(item.target, BundleTag) else bundle_of(item.target)
    return bundle_of(item.source) is source and reached is target


# ── Deformation ───────────────────────────────────────────────────────────────
def _instances(tag: ClassTag) -> list[CanonicalClass]:
    if tag.is_family:
        return [CanonicalClass(tag, value) for value in PARAMETER_SAMPLES]
    return [CanonicalClass(tag)]


def deformation_suite(config: VerifyConfig) -> SuiteReport:
    checks: list[Check] = []
    for n in (2, 3):
        for tag in ClassTag.members(n):
            instances = _instances(tag)
            expected = CLASS_CODIM[tag]
            codims = [codimension(canonical_matrix(c), config.tol) for c in instances]
            stars = [miniversal_pattern(c).star_count for c in instances]
            transversal = [verify_transversality(c, config.tol) for c in instances]
            passed = all(value == expected for value in [*codims, *stars])
            checks.append(
                Check(
                    f"transversality:{tag.label}",
                    _status(passed and all(transversal)),
                    f"codim={sorted(set(codims))} stars={sorted(set(stars))} expected={expected}",
                )
            )

            observed = [classify(canonical_matrix(c), config.tol).cls for c in instances]
            mismatched = [
                str(c) for c, seen in zip(instances, observed, strict=True) if not seen.matches(c)
            ]
            checks.append(
                Check(
                    f"self_classification:{tag.label}",
                    _status(not mismatched),
                    f"misclassified: {', '.join(mismatched)}" if mismatched else "",
                )
            )
    return SuiteReport(Suite.DEFORMATION.value, tuple(checks))


# ── Monte Carlo ───────────────────────────────────────────────────────────────
def _congruence_invariance(n: int, config: VerifyConfig) -> Check:
    failures: list[str] = []
    flagged = 0
    for index, source in enumerate(source_classes(n)):
        for trial in range(config.trials):
            stream = config.rng.generator(n, index, trial)
            member = sample_class_member(source, config.rng, stream)
            try:
                result = classify(member, config.tol)
            except CanonicalFormError:
                flagged += 1
                continue
            if not result.cls.matches(source):
                failures.append(f"{source}->{result.cls}")
            flagged += result.flagged
    detail = f"trials={config.trials} per class, flagged={flagged}"
    if failures:
        detail += f", failures: {', '.join(failures[:5])}"
    return Check(f"congruence_invariance:n={n}", _status(not failures, flagged > 0), detail)


def montecarlo_suite(config: VerifyConfig) -> SuiteReport:
    checks: list[Check] = []
    for n in (2, 3):
        checks.append(_congruence_invariance(n, config))
        for level in (Level.CLASSES, Level.BUNDLES):
            report = monte_carlo_verify(n, level, config.trials, config.eps, config.rng, config.tol)
            detail = (
                f"trials={report.trials} violations={len(report.violations)} "
                f"flagged={report.flagged} clean={report.clean_fraction:.4f}"
            )
            passed = report.ok
            if level is Level.BUNDLES:
                passed = passed and report.clean_fraction >= CLEAN_FRACTION_THRESHOLD
                detail += f" required_clean={CLEAN_FRACTION_THRESHOLD:g}"
            checks.append(
                Check(
                    f"containment:{level.value}:n={n}",
                    _status(passed, report.flagged > 0),
                    detail,
                )
            )

        samples = config.trials * SAMPLES_PER_TRIAL
        generic = genericity(n, samples, config.rng, config.tol)
        checks.append(
            Check(
                f"genericity:n={n}",
                _status(generic.fraction >= GENERICITY_THRESHOLD),
                f"fraction={generic.fraction:.4f} samples={samples}",
            )
        )

    drift = drift_law(config.trials * SAMPLES_PER_TRIAL, config.eps, config.rng, config.tol)
    checks.append(
        Check(
            "drift_law:ii",
            _status(drift.ok),
            f"family_hits={drift.family_hits} max_distance={drift.max_distance:.3g} "
            f"limit={drift.limit:g} outside={drift.outside}",
        )
    )
    return SuiteReport(Suite.MONTECARLO.value, tuple(checks))


# ── Non-edges ─────────────────────────────────────────────────────────────────
def nonedge_suite(config: VerifyConfig) -> SuiteReport:
    checks: list[Check] = []
    for source_tag, target_tag in NON_EDGES:
        v, w = _instance(source_tag), _instance(target_tag)
        conditions = necessary_conditions(v, w, Level.CLASSES, config.tol)
        trials = config.trials * SAMPLES_PER_TRIAL
        probe = nonedge_probe(v, w, trials, config.eps, config.rng, config.tol)
        reasons = ",".join(conditions.violated)
        checks.append(
            Check(
                f"nonedge:{source_tag.label}->{target_tag.label}",
                _status(conditions.refuted and probe.ok),
                f"refuted_by={reasons or 'none'} probe_hits={probe.hits} closest={probe.closest}",
            )
        )
    return SuiteReport(Suite.NONEDGE.value, tuple(checks))


# ── Bundles ───────────────────────────────────────────────────────────────────
def _expected_partition(n: int) -> set[frozenset[ClassTag]]:
    grouped: dict[BundleTag, set[ClassTag]] = {}
    for tag in ClassTag.members(n):
        grouped.setdefault(bundle_of(tag), set()).add(tag)
    return {frozenset(members) for members in grouped.values()}


def bundles_suite(config: VerifyConfig) -> SuiteReport:
    checks: list[Check] = []
    catalog = witness_catalog()
    for n in (2, 3):
        partition = derive_bundles(class_graph(n))
        derived = set(partition.blocks)
        checks.append(
            Check(
                f"partition:n={n}",
                _status(derived == _expected_partition(n)),
                f"blocks={len(derived)}",
            )
        )

        graph = bundle_graph(n)
        for source, target in graph.edges:
            assert isinstance(source, BundleTag) and isinstance(target, BundleTag)
            edge = f"{source.value}->{target.value}"
            conditions = necessary_conditions(source, target, Level.BUNDLES, config.tol)
            covering = [item for item in catalog if _covers_bundle_edge(item, source, target)]
            if not covering:
                checks.append(Check(f"bundle_edge:{edge}", Status.FAIL, "no witness"))
                continue
            results = [_run_witness(item, config.tol) for item in covering]
            failed = [check for check in results if check.status is Status.FAIL]
            flagged = any(check.status is Status.FLAGGED for check in results)
            violated = ",".join(conditions.violated) or "none"
            detail = f"witnesses={len(covering)} conditions_violated={violated}"
            if failed:
                detail += f" failed={failed[0].name}: {failed[0].detail}"
            checks.append(
                Check(
                    f"bundle_edge:{edge}",
                    _status(not failed and not conditions.refuted, flagged),
                    detail,
                )
            )
    return SuiteReport(Suite.BUNDLES.value, tuple(checks))


# ── Graphs ────────────────────────────────────────────────────────────────────
def graphs_suite(config: VerifyConfig) -> SuiteReport:
    checks: list[Check] = []
    for level, build, codims in (
        (Level.CLASSES, class_graph, CLASS_CODIM),
        (Level.BUNDLES, bundle_graph, BUNDLE_CODIM),
    ):
        for n in (2, 3):
            graph = build(n)
            report = validate(graph)
            checks.append(
                Check(
                    f"validate:{level.value}:n={n}",
                    _status(report.ok),
                    f"vertices={len(graph.vertices)} edges={len(graph.edges)}",
                )
            )
            restored = load_graph(export(graph, "json"))
            checks.append(Check(f"round_trip:{level.value}:n={n}", _status(restored == graph)))
            stale = [v.label for v in graph.vertices if v.codim != codims[v.tag]]
            checks.append(
                Check(f"codim_table:{level.value}:n={n}", _status(not stale), ", ".join(stale))
            )

        if level is Level.CLASSES:
            for n in (2, 3):
                refuted = [
                    f"{s.label}->{t.label}"
                    for s, t in class_graph(n).edges
                    if necessary_conditions(_instance(s), _instance(t), level, config.tol).refuted
                ]
                checks.append(
                    Check(
                        f"edge_conditions:n={n}",
                        _status(not refuted),
                        f"refuted edges: {', '.join(refuted)}" if refuted else "",
                    )
                )
    return SuiteReport(Suite.GRAPHS.value, tuple(checks))


_SUITES: dict[Suite, Callable[[VerifyConfig], SuiteReport]] = {
    Suite.WITNESS: witness_suite,
    Suite.DEFORMATION: deformation_suite,
    Suite.GRAPHS: graphs_suite,
    Suite.BUNDLES: bundles_suite,
    Suite.NONEDGE: nonedge_suite,
    Suite.MONTECARLO: montecarlo_suite,
}


def _combine(name: str, reports: Iterable[SuiteReport]) -> SuiteReport:
    checks = tuple(check for report in reports for check in report.checks)
    return SuiteReport(name, checks)


def run_suite(suite: Suite | str, config: VerifyConfig) -> SuiteReport:
    suite = Suite(suite)
    if suite is Suite.ALL:
        report = _combine(suite.value, (run(config) for run in _SUITES.values()))
    else:
        report = _SUITES[suite](config)
    logger.info(
        "verify_suite_done suite=%s checks=%d violations=%d",
        suite,
        len(report.checks),
        report.violations,
    )
    return report
