from __future__ import annotations

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from src.core.canonical import PARAMETER_SAMPLES, CanonicalClass, ClassTag, canonical_matrix
from src.core.closure_graph import CLASS_CODIM
from src.core.deformation import (
    codimension,
    deformation_family,
    miniversal_pattern,
    tangent_map,
    verify_transversality,
)


def _instances() -> list[CanonicalClass]:
    classes = []
    for tag in ClassTag:
        if tag.is_family:
            classes.extend(CanonicalClass(tag, value) for value in PARAMETER_SAMPLES)
        else:
            classes.append(CanonicalClass(tag))
    return classes


INSTANCES = _instances()


def test_tangent_map_of_zero_matrix_vanishes() -> None:
    tangent = tangent_map(np.zeros((2, 2)))

    assert tangent.matrix.shape == (4, 4)
    assert not tangent.matrix.any()
    assert tangent.rank() == 0


def test_tangent_map_of_identity_spans_symmetric_matrices() -> None:
    tangent = tangent_map(np.eye(2))

    assert tangent.rank() == 3
    image = tangent.matrix @ np.arange(1, 5)
    assert np.allclose(image.reshape(2, 2), image.reshape(2, 2).T)


def test_tangent_map_of_skew_block_has_rank_one() -> None:
    assert tangent_map([[0, 1], [-1, 0]]).rank() == 1


def test_tangent_map_applies_the_linearised_action() -> None:
    rng = np.random.default_rng(3)
    a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    c = rng.normal(size=(3, 3))

    image = tangent_map(a).matrix @ c.reshape(-1)

    assert np.allclose(image.reshape(3, 3), c.T @ a + a @ c)


@pytest.mark.parametrize(
    ("tag", "expected"),
    [(ClassTag.II, 3), (ClassTag.T1, 9), (ClassTag.T12, 1), (ClassTag.I, 4), (ClassTag.T9, 2)],
)
def test_codimension_examples(tag: ClassTag, expected: int) -> None:
    assert codimension(canonical_matrix(CanonicalClass(tag))) == expected


@pytest.mark.parametrize("cls", INSTANCES, ids=str)
def test_codimension_matches_table_and_star_count(cls: CanonicalClass) -> None:
    codim = codimension(canonical_matrix(cls))

    assert codim == CLASS_CODIM[cls.tag]
    assert codim == miniversal_pattern(cls).star_count


@pytest.mark.parametrize("cls", INSTANCES, ids=str)
def test_every_pattern_is_transversal(cls: CanonicalClass) -> None:
    assert verify_transversality(cls)


def test_miniversal_pattern_examples() -> None:
    assert miniversal_pattern(CanonicalClass(ClassTag.II)).stars == ((0, 0), (1, 0), (1, 1))
    assert miniversal_pattern(CanonicalClass(ClassTag.T9)).stars == ((2, 0), (2, 2))
    assert miniversal_pattern(CanonicalClass(ClassTag.T8)).stars == ((1, 0), (2, 0), (2, 1))
    assert miniversal_pattern(CanonicalClass(ClassTag.T12)).stars == ((1, 0),)


def test_miniversal_pattern_of_five_at_zero_moves_a_star() -> None:
    generic = miniversal_pattern(CanonicalClass(ClassTag.T5, 2))
    at_zero = miniversal_pattern(CanonicalClass(ClassTag.T5, 0))

    assert (2, 1) in generic.stars
    assert (2, 1) not in at_zero.stars
    assert at_zero.star_count == generic.star_count == 4


def test_pattern_mask_and_render() -> None:
    pattern = miniversal_pattern(CanonicalClass(ClassTag.II))

    assert pattern.mask.tolist() == [[True, False], [True, True]]
    assert pattern.render() == "* 0\n* *"


def test_reduced_pattern_is_not_transversal() -> None:
    cls = CanonicalClass(ClassTag.II)
    reduced = miniversal_pattern(cls).with_stars([(0, 0)])

    assert not verify_transversality(cls, pattern=reduced)


def test_pattern_with_tangent_star_is_not_transversal() -> None:
    cls = CanonicalClass(ClassTag.T5, 0)
    generic = miniversal_pattern(CanonicalClass(ClassTag.T5, 2))
    tangent_star = miniversal_pattern(cls).with_stars(generic.stars)

    assert not verify_transversality(cls, pattern=tangent_star)


def test_deformation_family_places_values_on_stars() -> None:
    cls = CanonicalClass(ClassTag.II)

    matrix = deformation_family(cls, [1, 2, 3])
    by_position = deformation_family(cls, {(1, 0): 5})

    assert np.array_equal(matrix, [[1, 1], [1, 3]])
    assert np.array_equal(by_position, [[0, 1], [4, 0]])


def test_deformation_family_rejects_bad_values() -> None:
    cls = CanonicalClass(ClassTag.T12)

    with pytest.raises(ValueError, match="stars"):
        deformation_family(cls, [1, 2])
    with pytest.raises(ValueError, match="not stars"):
        deformation_family(cls, {(0, 0): 1})


@settings(max_examples=100, deadline=None)
@given(
    cls=st.sampled_from(INSTANCES),
    entries=arrays(np.int64, (3, 3), elements=st.integers(min_value=-2, max_value=2)),
)
def test_codimension_is_congruence_invariant(cls: CanonicalClass, entries: np.ndarray) -> None:
    s = entries[: cls.n, : cls.n]
    assume(round(np.linalg.det(s)) != 0)
    a = canonical_matrix(cls)

    assert codimension(s.T @ a @ s) == codimension(a)
