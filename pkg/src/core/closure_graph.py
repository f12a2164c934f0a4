"""Closure graphs of congruence classes and bundles for n = 2 and n = 3.

An arrow v → w means that the canonical matrix of v can be turned into a
matrix of class w by an arbitrarily small perturbation. The graphs are the
Hasse diagrams of the closure order; family vertices (``v_lambda``,
``5_lambda``, ``11_mu``) stand for one vertex per parameter value.
"""
from __future__ import annotations

import json
import logging
from collections import defaultdict
from collections.abc import Iterable
from dataclasses import dataclass, field
from enum import StrEnum
from functools import lru_cache
from typing import Any

import networkx as nx
import numpy as np

from src.core.canonical import (
    PARAMETER_SAMPLES,
    BundleTag,
    CanonicalClass,
    ClassTag,
    UnknownClassTag,
    bundle_of,
    canonical_matrix,
    parse_bundle_tag,
    parse_tag,
    rank_profile,
)
from src.core.matrixcore import DEFAULT_TOLERANCE, Tolerance, cosquare_structure

logger = logging.getLogger(__name__)

Tag = ClassTag | BundleTag


class ClosureGraphError(Exception):
    pass


class UnknownVertex(ClosureGraphError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "unknown vertex"


class UnknownFormat(ClosureGraphError, ValueError):
    pass


class InvalidDimension(ClosureGraphError, ValueError):
    pass


class Level(StrEnum):
    CLASSES = "classes"
    BUNDLES = "bundles"


CLASS_CODIM: dict[ClassTag, int] = {
    ClassTag.I: 4,
    ClassTag.II: 3,
    ClassTag.III: 2,
    ClassTag.IV: 1,
    ClassTag.V: 1,
    ClassTag.VI: 1,
    ClassTag.T1: 9,
    ClassTag.T2: 6,
    ClassTag.T3: 6,
    ClassTag.T4: 4,
    ClassTag.T5: 4,
    ClassTag.T6: 4,
    ClassTag.T7: 3,
    ClassTag.T8: 3,
    ClassTag.T9: 2,
    ClassTag.T10: 1,
    ClassTag.T11: 1,
    ClassTag.T12: 1,
}

# a bundle sheds one dimension per free parameter of its family
BUNDLE_CODIM: dict[BundleTag, int] = {
    **{bundle_of(tag): CLASS_CODIM[tag] for tag in ClassTag if not tag.is_family},
    BundleTag.V_VI: 0,
    BundleTag.B5: 3,
    BundleTag.B11: 0,
}

CLASS_EDGES: dict[int, tuple[tuple[str, str], ...]] = {
    2: (
        ("i", "ii"),
        ("i", "iii"),
        ("ii", "iv"),
        ("iii", "iv"),
        ("iii", "v"),
        ("iii", "vi"),
    ),
    3: (
        ("1", "2"),
        ("1", "3"),
        ("2", "4"),
        ("2", "7"),
        ("3", "4"),
        ("3", "5"),
        ("3", "6"),
        ("3", "7"),
        ("4", "9"),
        ("5", "9"),
        ("6", "8"),
        ("6", "9"),
        ("7", "10"),
        ("8", "12"),
        ("9", "10"),
        ("9", "11"),
        ("9", "12"),
    ),
}

BUNDLE_EDGES: dict[int, tuple[tuple[str, str], ...]] = {
    2: (
        ("i", "ii"),
        ("i", "iii"),
        ("ii", "iv"),
        ("iii", "iv"),
        ("iv", "v&vi"),
    ),
    3: (
        ("1", "2"),
        ("1", "3"),
        ("2", "4"),
        ("2", "7"),
        ("3", "4"),
        ("3", "6"),
        ("3", "7"),
        ("4", "5"),
        ("6", "5"),
        ("6", "8"),
        ("5", "9"),
        ("7", "10"),
        ("8", "12"),
        ("9", "10"),
        ("9", "12"),
        ("10", "11"),
        ("12", "11"),
    ),
}

# Non-arrows established by an explicit deformation argument rather than by an invariant.
DEFORMATION_ARGUMENTS: dict[tuple[ClassTag, ClassTag], str] = {
    (ClassTag.T4, ClassTag.T7): "sym_rank_of_deformation",
    (ClassTag.II, ClassTag.V): "cosquare_limit",
    (ClassTag.II, ClassTag.VI): "cosquare_limit",
    (ClassTag.T2, ClassTag.T5): "cosquare_limit",
}


@dataclass(frozen=True)
class Vertex:
    tag: Tag
    family: bool
    codim: int

    @property
    def label(self) -> str:
        return self.tag.label

    @property
    def display(self) -> str:
        if isinstance(self.tag, ClassTag) and self.family:
            symbol = "μ" if self.tag is ClassTag.T11 else "λ"
            return f"{self.tag.value}_{symbol}"
        return self.tag.value

    def to_dict(self) -> dict[str, Any]:
        return {"tag": self.label, "family": self.family, "codim": self.codim}


class ClosureGraph:
    """Immutable vertex/edge data on top of a frozen ``networkx.DiGraph``."""

    def __init__(
        self,
        level: Level,
        n: int,
        vertices: Iterable[Vertex],
        edges: Iterable[tuple[Tag, Tag]],
    ) -> None:
        self.level = Level(level)
        self.n = n
        graph = nx.DiGraph()
        for vertex in vertices:
            graph.add_node(vertex.tag, vertex=vertex)
        for source, target in edges:
            if source not in graph or target not in graph:
                raise UnknownVertex(f"edge {source}->{target} names a vertex outside the graph")
            graph.add_edge(source, target)
        self._graph = nx.freeze(graph)
        self._order = {tag: index for index, tag in enumerate(graph.nodes)}

    @property
    def graph(self) -> nx.DiGraph:
        return self._graph

    @property
    def vertices(self) -> tuple[Vertex, ...]:
        return tuple(self._graph.nodes[tag]["vertex"] for tag in self._graph.nodes)

    @property
    def edges(self) -> tuple[tuple[Tag, Tag], ...]:
        return tuple(
            sorted(
                self._graph.edges,
                key=lambda edge: (self._order[edge[0]], self._order[edge[1]]),
            )
        )

    def vertex(self, key: Tag | str) -> Vertex:
        return self._graph.nodes[self.key(key)]["vertex"]

    def key(self, key: Tag | str) -> Tag:
        """The node key for a tag or its text spelling in this graph's level."""
        try:
            tag: Tag
            if self.level is Level.CLASSES:
                tag = key if isinstance(key, ClassTag) else parse_tag(str(key))
            else:
                tag = key if isinstance(key, BundleTag) else parse_bundle_tag(str(key))
        except UnknownClassTag as error:
            raise UnknownVertex(f"{key!r} is not a vertex of the {self.level} graph") from error
        if tag not in self._graph:
            raise UnknownVertex(
                f"{key!r} is not a vertex of the {self.level} graph for n={self.n}"
            )
        return tag

    def with_edges(self, extra: Iterable[tuple[Tag | str, Tag | str]]) -> ClosureGraph:
        added = [(self.key(source), self.key(target)) for source, target in extra]
        return ClosureGraph(self.level, self.n, self.vertices, [*self.edges, *added])

    def __contains__(self, key: object) -> bool:
        try:
            self.key(key)  # type: ignore[arg-type]
        except UnknownVertex:
            return False
        return True

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ClosureGraph):
            return NotImplemented
        return (
            self.level is other.level
            and self.n == other.n
            and set(self.vertices) == set(other.vertices)
            and set(self.edges) == set(other.edges)
        )

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return (
            f"ClosureGraph(level={self.level.value}, n={self.n}, "
            f"vertices={len(self.vertices)}, edges={len(self.edges)})"
        )


def _check_dimension(n: int) -> None:
    if n not in (2, 3):
        raise InvalidDimension(f"closure graphs exist for n=2 and n=3, got n={n}")


@lru_cache(maxsize=None)
def class_graph(n: int) -> ClosureGraph:
    _check_dimension(n)
    vertices = [
        Vertex(tag=tag, family=tag.is_family, codim=CLASS_CODIM[tag])
        for tag in ClassTag.members(n)
    ]
    edges = [(ClassTag(source), ClassTag(target)) for source, target in CLASS_EDGES[n]]
    return ClosureGraph(Level.CLASSES, n, vertices, edges)


@lru_cache(maxsize=None)
def bundle_graph(n: int) -> ClosureGraph:
    _check_dimension(n)
    vertices = [
        Vertex(tag=tag, family=tag.is_family, codim=BUNDLE_CODIM[tag])
        for tag in BundleTag.members(n)
    ]
    edges = [(BundleTag(source), BundleTag(target)) for source, target in BUNDLE_EDGES[n]]
    return ClosureGraph(Level.BUNDLES, n, vertices, edges)


def graph_for(level: Level | str, n: int) -> ClosureGraph:
    return class_graph(n) if Level(level) is Level.CLASSES else bundle_graph(n)


@dataclass(frozen=True)
class BundlePartition:
    """Blocks of vertices with identical in- and out-neighbourhoods."""

    blocks: tuple[frozenset[Tag], ...]

    def block_of(self, tag: Tag) -> frozenset[Tag]:
        for block in self.blocks:
            if tag in block:
                return block
        raise UnknownVertex(f"{tag} is not covered by the partition")

    def bundles(self) -> dict[frozenset[Tag], BundleTag]:
        """Name each block by the bundle its members belong to."""
        named: dict[frozenset[Tag], BundleTag] = {}
        for block in self.blocks:
            names = {bundle_of(parse_tag(tag.value)) for tag in block}
            if len(names) != 1:
                raise ClosureGraphError(f"block {sorted(block)} spans bundles {sorted(names)}")
            named[block] = names.pop()
        return named


def derive_bundles(g: ClosureGraph) -> BundlePartition:
    """Partition vertices: v ~ w iff no arrow joins them and their neighbourhoods agree.

    In an acyclic graph identical predecessor sets already rule out an arrow
    between the two vertices. A family vertex is one unit of the partition.
    """
    graph = g.graph
    grouped: dict[tuple[frozenset[Tag], frozenset[Tag]], list[Tag]] = defaultdict(list)
    for tag in graph.nodes:
        key = (frozenset(graph.predecessors(tag)), frozenset(graph.successors(tag)))
        grouped[key].append(tag)

    blocks: list[frozenset[Tag]] = []
    for members in grouped.values():
        for tag in members:
            if any(graph.has_edge(tag, other) for other in members):
                raise ClosureGraphError(f"vertex {tag} has an arrow inside its own block")
        blocks.append(frozenset(members))

    order = {tag: index for index, tag in enumerate(graph.nodes)}
    blocks.sort(key=lambda block: min(order[tag] for tag in block))
    logger.debug("bundles_derived level=%s n=%d blocks=%d", g.level, g.n, len(blocks))
    return BundlePartition(blocks=tuple(blocks))


class Direction(StrEnum):
    UP = "up"
    DOWN = "down"


def reach_set(
    g: ClosureGraph, v: Tag | str, direction: Direction | str = Direction.UP
) -> frozenset[Tag]:
    """Vertices reachable from *v* (up) or reaching *v* (down), *v* included."""
    tag = g.key(v)
    if Direction(direction) is Direction.UP:
        reached = nx.descendants(g.graph, tag)
    else:
        reached = nx.ancestors(g.graph, tag)
    return frozenset({tag, *reached})


def has_path(g: ClosureGraph, v: Tag | str, w: Tag | str) -> bool:
    return g.key(w) in reach_set(g, v, Direction.UP)


def sorted_tags(g: ClosureGraph, tags: Iterable[Tag]) -> list[Tag]:
    order = {vertex.tag: index for index, vertex in enumerate(g.vertices)}
    return sorted(tags, key=order.__getitem__)


@dataclass(frozen=True)
class Resolution:
    vertex: Vertex
    param: complex | None = None


def resolve(g: ClosureGraph, c: CanonicalClass) -> Resolution:
    """The vertex standing for a concrete class; family vertices carry the parameter."""
    if c.n != g.n:
        raise UnknownVertex(f"class {c} has n={c.n}, graph has n={g.n}")
    if g.level is Level.CLASSES:
        return Resolution(vertex=g.vertex(c.tag), param=c.param)
    bundle = bundle_of(c)
    return Resolution(vertex=g.vertex(bundle), param=c.param if bundle.is_family else None)


@dataclass(frozen=True)
class ConditionCheck:
    name: str
    passed: bool
    detail: str

    def to_dict(self) -> dict[str, Any]:
        return {"name": self.name, "passed": self.passed, "detail": self.detail}


@dataclass(frozen=True)
class ConditionReport:
    source: str
    target: str
    checks: tuple[ConditionCheck, ...] = field(default_factory=tuple)

    @property
    def violated(self) -> tuple[str, ...]:
        return tuple(check.name for check in self.checks if not check.passed)

    @property
    def refuted(self) -> bool:
        return bool(self.violated)

    def argument(self) -> str | None:
        for check in self.checks:
            if check.name == "deformation_argument" and not check.passed:
                return check.detail
        return None


def _bundle_members(bundle: BundleTag) -> list[CanonicalClass]:
    members = [tag for tag in ClassTag.members(bundle.n) if bundle_of(tag) is bundle]
    result: list[CanonicalClass] = []
    for tag in members:
        if tag.is_family:
            result.extend(CanonicalClass(tag, value) for value in PARAMETER_SAMPLES)
        else:
            result.append(CanonicalClass(tag))
    return result


def _spectrum_key(spectrum: tuple[complex, ...], digits: int = 6) -> list[tuple[float, float]]:
    return sorted((round(value.real, digits), round(value.imag, digits)) for value in spectrum)


def _compare(name: str, low: int, high: int, detail: str) -> ConditionCheck:
    return ConditionCheck(name=name, passed=low <= high, detail=f"{detail}: {low} <= {high}")


def necessary_conditions(
    v: CanonicalClass | BundleTag,
    w: CanonicalClass | BundleTag,
    level: Level | str = Level.CLASSES,
    tol: Tolerance = DEFAULT_TOLERANCE,
) -> ConditionReport:
    """Semicontinuity checks that any arrow v → w has to pass.

    Ranks of the matrix and of its symmetric and skew parts cannot drop under
    small perturbations, codimension must drop strictly, and the cosquare
    spectrum of a nonsingular matrix moves continuously. At bundle level the
    source is represented by its smallest and the target by its largest
    ranks over the bundle members.
    """
    level = Level(level)
    if level is Level.CLASSES:
        if not isinstance(v, CanonicalClass) or not isinstance(w, CanonicalClass):
            raise TypeError("class-level conditions take CanonicalClass arguments")
        sources, targets = [v], [w]
        source_codim, target_codim = CLASS_CODIM[v.tag], CLASS_CODIM[w.tag]
        source_name, target_name = str(v), str(w)
        spectra_comparable = True
    else:
        source_bundle = v if isinstance(v, BundleTag) else bundle_of(v)
        target_bundle = w if isinstance(w, BundleTag) else bundle_of(w)
        sources, targets = _bundle_members(source_bundle), _bundle_members(target_bundle)
        source_codim, target_codim = BUNDLE_CODIM[source_bundle], BUNDLE_CODIM[target_bundle]
        source_name, target_name = source_bundle.value, target_bundle.value
        spectra_comparable = not (source_bundle.is_family or target_bundle.is_family)

    if sources[0].n != targets[0].n:
        raise InvalidDimension("both classes must have the same dimension")

    source_profiles = [rank_profile(canonical_matrix(c), tol) for c in sources]
    target_profiles = [rank_profile(canonical_matrix(c), tol) for c in targets]
    checks = [
        _compare(
            "rank",
            min(p.rank for p in source_profiles),
            max(p.rank for p in target_profiles),
            "rank cannot drop",
        ),
        _compare(
            "sym_rank",
            min(p.sym_rank for p in source_profiles),
            max(p.sym_rank for p in target_profiles),
            "symmetric-part rank cannot drop",
        ),
        _compare(
            "skew_rank",
            min(p.skew_rank for p in source_profiles),
            max(p.skew_rank for p in target_profiles),
            "skew-part rank cannot drop",
        ),
        ConditionCheck(
            name="codim",
            passed=source_codim > target_codim,
            detail=f"codimension must drop: {source_codim} > {target_codim}",
        ),
    ]

    n = sources[0].n
    if (
        spectra_comparable
        and source_profiles[0].rank == n
        and target_profiles[0].rank == n
    ):
        source_spectrum = cosquare_structure(canonical_matrix(sources[0]), tol).spectrum
        target_spectrum = cosquare_structure(canonical_matrix(targets[0]), tol).spectrum
        equal = np.allclose(
            np.array(_spectrum_key(source_spectrum)),
            np.array(_spectrum_key(target_spectrum)),
            atol=tol.eig_tol,
        )
        checks.append(
            ConditionCheck(
                name="cosquare_spectrum",
                passed=bool(equal),
                detail="cosquare spectrum of a nonsingular matrix is continuous",
            )
        )

    if level is Level.CLASSES:
        argument = DEFORMATION_ARGUMENTS.get((sources[0].tag, targets[0].tag))
        if argument is not None:
            checks.append(
                ConditionCheck(name="deformation_argument", passed=False, detail=argument)
            )

    report = ConditionReport(source=source_name, target=target_name, checks=tuple(checks))
    logger.debug(
        "necessary_conditions source=%s target=%s level=%s violated=%s",
        source_name,
        target_name,
        level,
        ",".join(report.violated) or "none",
    )
    return report


@dataclass(frozen=True)
class ValidationReport:
    acyclic: bool
    codim_violations: tuple[tuple[str, str], ...]
    redundant_edges: tuple[tuple[str, str], ...]

    @property
    def ok(self) -> bool:
        return self.acyclic and not self.codim_violations and not self.redundant_edges

    def to_dict(self) -> dict[str, Any]:
        return {
            "acyclic": self.acyclic,
            "codim_violations": [list(edge) for edge in self.codim_violations],
            "redundant_edges": [list(edge) for edge in self.redundant_edges],
        }


def validate(g: ClosureGraph) -> ValidationReport:
    graph = g.graph
    acyclic = nx.is_directed_acyclic_graph(graph)

    codim_violations = tuple(
        (source.label, target.label)
        for source, target in ((g.vertex(s), g.vertex(t)) for s, t in g.edges)
        if not source.codim > target.codim
    )

    redundant: tuple[tuple[str, str], ...] = ()
    if acyclic:
        reduced = nx.transitive_reduction(graph)
        redundant = tuple(
            (g.vertex(source).label, g.vertex(target).label)
            for source, target in g.edges
            if not reduced.has_edge(source, target)
        )

    report = ValidationReport(
        acyclic=acyclic,
        codim_violations=codim_violations,
        redundant_edges=redundant,
    )
    logger.debug(
        "graph_validated level=%s n=%d acyclic=%s codim_violations=%d redundant=%d",
        g.level,
        g.n,
        acyclic,
        len(codim_violations),
        len(redundant),
    )
    return report


def _to_json(g: ClosureGraph) -> str:
    payload = {
        "level": g.level.value,
        "n": g.n,
        "vertices": [vertex.to_dict() for vertex in g.vertices],
        "edges": [[source.label, target.label] for source, target in g.edges],
    }
    return json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _to_dot(g: ClosureGraph) -> str:
    lines = [f'digraph "{g.level.value}_n{g.n}" {{', "  rankdir=TB;"]
    by_codim: dict[int, list[Vertex]] = defaultdict(list)
    for vertex in g.vertices:
        by_codim[vertex.codim].append(vertex)

    for codim in sorted(by_codim, reverse=True):
        members = " ".join(f'"{vertex.label}";' for vertex in by_codim[codim])
        lines.append(f"  {{ rank=same; {members} }}")
    for vertex in g.vertices:
        attributes = [f'label="{vertex.display}"', f"codim={vertex.codim}"]
        if vertex.family:
            attributes.append("family=true")
        lines.append(f'  "{vertex.label}" [{", ".join(attributes)}];')
    for source, target in g.edges:
        lines.append(f'  "{source.label}" -> "{target.label}";')
    lines.append("}")
    return "\n".join(lines) + "\n"


def export(g: ClosureGraph, fmt: str) -> str:
    """Deterministic serialization as Graphviz ``dot`` or ``json``."""
    if fmt == "json":
        return _to_json(g)
    if fmt == "dot":
        return _to_dot(g)
    raise UnknownFormat(f"unknown graph format {fmt!r}; expected 'dot' or 'json'")


def load_graph(text: str) -> ClosureGraph:
    """Inverse of ``export(g, "json")``."""
    try:
        payload = json.loads(text)
        level = Level(payload["level"])
        n = int(payload["n"])
        _check_dimension(n)
        parse = parse_tag if level is Level.CLASSES else parse_bundle_tag
        vertices = [
            Vertex(tag=parse(item["tag"]), family=bool(item["family"]), codim=int(item["codim"]))
            for item in payload["vertices"]
        ]
        edges = [(parse(source), parse(target)) for source, target in payload["edges"]]
    except (KeyError, TypeError, ValueError) as error:
        raise UnknownFormat(f"not a closure graph document: {error}") from error
    return ClosureGraph(level, n, vertices, edges)
