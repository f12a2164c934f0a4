from __future__ import annotations

import logging

import numpy as np
import pytest

from src.core.canonical import BundleTag, CanonicalClass, ClassTag, canonical_matrix, classify
from src.core.closure_graph import Level
from src.services.perturbation import (
    InvalidEpsilon,
    RngConfig,
    UnknownEdge,
    VerificationReport,
    Witness,
    boundary_distance,
    drift_bound,
    drift_law,
    find_witness,
    genericity,
    monte_carlo_verify,
    nonedge_probe,
    random_congruence,
    random_perturbation,
    sample_class_member,
    source_classes,
    witness,
    witness_catalog,
)

CATALOG = witness_catalog()


@pytest.mark.parametrize("item", CATALOG, ids=lambda item: item.name)
def test_witness_starts_in_source_and_reaches_target(item: Witness) -> None:
    assert classify(item.start()).cls.matches(item.source)
    for eps in (1e-2, 1e-3, 1e-4):
        observed = classify(item.matrix(eps)).cls

        assert item.reaches_target(observed), (eps, str(observed))


def test_catalog_covers_every_arrow() -> None:
    class_edges = {
        (item.source.tag, item.target.tag)
        for item in CATALOG
        if isinstance(item.target, CanonicalClass)
    }
    bundle_edges = {
        (item.source.tag, item.target) for item in CATALOG if isinstance(item.target, BundleTag)
    }

    assert len(class_edges) == 23
    assert (ClassTag.T12, BundleTag.B11) in bundle_edges
    assert len(bundle_edges) == 5
    assert len(witness_catalog(n=2)) < len(CATALOG)


def test_find_witness_builds_family_member_on_demand() -> None:
    target = CanonicalClass(ClassTag.T11, 3)

    item = find_witness(CanonicalClass(ClassTag.T9), target)
    observed = classify(witness(CanonicalClass(ClassTag.T9), target, 1e-3)).cls

    assert item.target == target
    assert observed.matches(target)


def test_find_witness_rejects_non_edges() -> None:
    with pytest.raises(UnknownEdge) as error:
        find_witness(CanonicalClass(ClassTag.II), CanonicalClass(ClassTag.V, 2))

    assert isinstance(error.value, KeyError)
    assert "ii" in str(error.value)


@pytest.mark.parametrize("eps", [0.0, -1e-3, 0.5])
def test_witness_rejects_epsilon_out_of_range(eps: float) -> None:
    with pytest.raises(InvalidEpsilon):
        witness(CanonicalClass(ClassTag.I), CanonicalClass(ClassTag.II), eps)


def test_drift_bound_and_boundary_distance() -> None:
    assert drift_bound(1e-4) == pytest.approx(0.1)
    assert drift_bound(1e-8) == pytest.approx(1e-2)
    assert boundary_distance(2) == pytest.approx(0.5)
    assert boundary_distance(0) == pytest.approx(1)
    assert boundary_distance(-1.01) == pytest.approx(0.01 / 1.01)


def test_rng_config_streams_are_reproducible() -> None:
    rng = RngConfig(seed=7)

    first = rng.generator(1, 2).standard_normal(4)
    second = RngConfig(seed=7).generator(1, 2).standard_normal(4)
    other = rng.generator(2, 1).standard_normal(4)

    assert np.array_equal(first, second)
    assert not np.array_equal(first, other)


def test_rng_config_validates_fields() -> None:
    with pytest.raises(ValueError, match="seed"):
        RngConfig(seed=-1)
    with pytest.raises(ValueError, match="condition_bound"):
        RngConfig(condition_bound=0.5)


def test_random_congruence_respects_condition_bound() -> None:
    rng = RngConfig(condition_bound=4)
    stream = rng.generator()

    for _ in range(20):
        sigma = np.linalg.svd(random_congruence(3, rng, stream), compute_uv=False)

        assert sigma[-1] == pytest.approx(1)
        assert sigma[0] <= 4 + 1e-9


@pytest.mark.parametrize(
    "cls",
    [
        CanonicalClass(ClassTag.IV),
        CanonicalClass(ClassTag.V, 1 + 1j),
        CanonicalClass(ClassTag.T4),
        CanonicalClass(ClassTag.T9),
        CanonicalClass(ClassTag.T11, -3),
        CanonicalClass(ClassTag.T12),
    ],
    ids=str,
)
def test_sampled_members_stay_in_their_class(cls: CanonicalClass) -> None:
    rng = RngConfig(seed=11)

    for index in range(10):
        member = sample_class_member(cls, rng, rng.generator(index))

        assert classify(member).cls.matches(cls)


def test_random_perturbation_has_requested_size() -> None:
    rng = RngConfig()
    base = canonical_matrix(CanonicalClass(ClassTag.T9))

    perturbed = random_perturbation(base, 1e-3, rng)

    assert np.linalg.norm(perturbed - base) == pytest.approx(1e-3)
    assert np.array_equal(random_perturbation(base, 0.0, rng), base)
    with pytest.raises(InvalidEpsilon):
        random_perturbation(base, -1e-3, rng)


def test_source_classes_instantiate_families() -> None:
    sources = source_classes(3, samples=(0, 2))

    assert len(sources) == 10 + 2 * 2
    assert CanonicalClass(ClassTag.T11, 2) in sources


def test_monte_carlo_finds_no_violations_for_two_by_two() -> None:
    report = monte_carlo_verify(2, "classes", trials=3, eps=1e-6, rng=RngConfig())

    assert report.ok
    assert report.trials == 3 * len(source_classes(2))
    assert set(report.tallies) == {str(source) for source in source_classes(2)}
    assert 0 <= report.clean_fraction <= 1


@pytest.mark.parametrize("level", [Level.CLASSES, Level.BUNDLES])
def test_monte_carlo_finds_no_violations_for_selected_sources(level: Level) -> None:
    sources = [
        CanonicalClass(ClassTag.T1),
        CanonicalClass(ClassTag.T5, 2),
        CanonicalClass(ClassTag.T8),
        CanonicalClass(ClassTag.T9),
    ]

    report = monte_carlo_verify(3, level, trials=3, eps=1e-3, rng=RngConfig(), sources=sources)

    assert report.ok
    assert report.to_dict()["level"] == level.value


def test_monte_carlo_is_reproducible() -> None:
    sources = [CanonicalClass(ClassTag.III)]

    first = monte_carlo_verify(2, "classes", 4, 1e-3, RngConfig(seed=5), sources=sources)
    second = monte_carlo_verify(2, "classes", 4, 1e-3, RngConfig(seed=5), sources=sources)

    assert first.to_dict() == second.to_dict()


def test_monte_carlo_rejects_zero_trials() -> None:
    with pytest.raises(ValueError, match="trials"):
        monte_carlo_verify(2, "classes", 0, 1e-3, RngConfig())


def test_verification_reports_merge_only_within_one_graph() -> None:
    classes = VerificationReport(n=2, level=Level.CLASSES, eps=1e-3, trials=2, flagged=1)
    bundles = VerificationReport(n=2, level=Level.BUNDLES, eps=1e-3)

    merged = classes.merge(VerificationReport(n=2, level=Level.CLASSES, eps=1e-3, trials=2))

    assert merged.trials == 4
    assert merged.flagged == 1
    assert merged.clean_fraction == pytest.approx(0.75)
    with pytest.raises(ValueError):
        classes.merge(bundles)


def test_nonedge_probe_finds_no_hits() -> None:
    report = nonedge_probe(
        CanonicalClass(ClassTag.T4), CanonicalClass(ClassTag.T7), 20, 1e-3, RngConfig()
    )

    assert report.ok
    assert report.trials == 20
    assert sum(report.tallies.values()) == 20
    assert "cannot certify" in report.to_dict()["note"]


def test_nonedge_probe_for_family_target() -> None:
    report = nonedge_probe(
        CanonicalClass(ClassTag.II), CanonicalClass(ClassTag.V, 2), 20, 1e-3, RngConfig()
    )

    assert report.ok
    assert report.closest is not None


def test_nonedge_probe_warns_when_an_arrow_exists(caplog: pytest.LogCaptureFixture) -> None:
    with caplog.at_level(logging.WARNING):
        nonedge_probe(
            CanonicalClass(ClassTag.III), CanonicalClass(ClassTag.IV), 2, 1e-3, RngConfig()
        )

    assert "nonedge_probe_on_edge" in caplog.text


@pytest.mark.parametrize(("n", "label"), [(2, "v_lambda"), (3, "11_mu")])
def test_random_matrices_are_generic(n: int, label: str) -> None:
    report = genericity(n, 50, RngConfig())

    assert report.fraction >= 0.98
    assert report.tallies.get(label, 0) == report.hits
    assert report.to_dict()["samples"] == 50


def test_drift_law_for_skew_block() -> None:
    report = drift_law(trials=50, eps=1e-4, rng=RngConfig())

    assert report.ok
    assert report.family_hits > 0
    assert report.max_distance <= report.limit
    assert report.to_dict()["trials"] == 50


def test_nonedge_pairs_draw_independent_streams(
    monkeypatch: pytest.MonkeyPatch,
) -> None:
    keys: list[tuple[int, ...]] = []
    original = RngConfig.generator

    def recording(self: RngConfig, *key: int) -> np.random.Generator:
        keys.append(key)
        return original(self, *key)

    monkeypatch.setattr(RngConfig, "generator", recording)
    rng = RngConfig()

    nonedge_probe(CanonicalClass(ClassTag.T4), CanonicalClass(ClassTag.T7), 2, 1e-3, rng)
    first = list(keys)
    keys.clear()
    nonedge_probe(CanonicalClass(ClassTag.T5, 2), CanonicalClass(ClassTag.T7), 2, 1e-3, rng)

    assert len(first) == len(keys) == 2
    assert not set(first) & set(keys)
    assert [key[-1] for key in first] == [0, 1]


@pytest.mark.slow
def test_monte_carlo_bundle_containment_is_clean_at_full_scale() -> None:
    for n in (2, 3):
        report = monte_carlo_verify(n, Level.BUNDLES, trials=1000, eps=1e-3, rng=RngConfig())

        assert report.ok
        assert report.clean_fraction >= 0.999, report.to_dict()["tallies"]
