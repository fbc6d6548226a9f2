"""Distortion graph data model, validation, and canonical serialization.

A distortion graph describes a pair of images (anchor and target) as two
aligned sets of region nodes plus one comparative edge per matched region
pair. Graphs are immutable after construction and safe to share across
threads.

File format (UTF-8 JSON, one object):

    version          1
    pair_id          string
    anchor_image     string reference
    target_image     string reference
    label_map        string reference
    regions          array of {index, class, side, distortion{family,subtype},
                     severity, score [, mask_ref] [, scene_attributes]}
    distortion_edges array of {index, relation}
    scene_edges      optional array of {subject, predicate, object, side}

Canonical form: keys in the order above, regions sorted by (index, side
with "A" before "T"), edges sorted by index, scores printed with exactly
six fractional digits. Equal graphs serialize to identical bytes.

A lenient reader additionally accepts, on edge objects, the optional keys
``subject_side``, ``object_side``, and ``object_index``. These can never
appear in canonical output; they exist so that hand-edited files carrying
rule-breaking edges (reversed or intra-image) can still be loaded with
``deserialize(..., lenient=True)`` and inspected with ``validate``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Sequence

from .errors import (
    EdgeViolation,
    IndexMismatch,
    InvalidCombination,
    ParseError,
    ScoreOutOfRange,
    UnknownRegion,
    ValidationError,
)

FORMAT_VERSION = 1


class ImageSide(Enum):
    ANCHOR = "A"
    TARGET = "T"


class RelationLabel(Enum):
    """Comparative relation of the anchor region relative to the target."""

    SAME = "same"
    SLIGHTLY_BETTER = "slightly_better"
    SLIGHTLY_WORSE = "slightly_worse"
    SIGNIFICANTLY_BETTER = "significantly_better"
    SIGNIFICANTLY_WORSE = "significantly_worse"


class Family(Enum):
    """Distortion family; CLEAN marks an undegraded region."""

    BLUR = "blur"
    BRIGHTNESS = "brightness"
    COMPRESSION = "compression"
    CONTRAST_STRENGTHEN = "contrast_strengthen"
    CONTRAST_WEAKEN = "contrast_weaken"
    DARKEN = "darken"
    HAZE = "haze"
    NOISE = "noise"
    OVERSHARPEN = "oversharpen"
    PIXELATE = "pixelate"
    RAIN = "rain"
    SATURATION_STRENGTHEN = "saturation_strengthen"
    SATURATION_WEAKEN = "saturation_weaken"
    SNOW = "snow"
    CLEAN = "clean"


DEGRADING_FAMILIES: tuple[Family, ...] = tuple(
    f for f in Family if f is not Family.CLEAN
)

CLEAN_SUBTYPE = "none"

# Known sub-type identifiers per family. Synthesis operators register here;
# additional names may be registered for externally produced graphs.
_SUBTYPES: dict[Family, set[str]] = {
    Family.BLUR: {"gaussian"},
    Family.BRIGHTNESS: {"gain"},
    Family.COMPRESSION: {"block_dct"},
    Family.CONTRAST_STRENGTHEN: {"affine"},
    Family.CONTRAST_WEAKEN: {"affine"},
    Family.DARKEN: {"gain"},
    Family.HAZE: {"uniform_scattering"},
    Family.NOISE: {"gaussian"},
    Family.OVERSHARPEN: {"unsharp_mask"},
    Family.PIXELATE: {"block"},
    Family.RAIN: {"procedural_streaks"},
    Family.SATURATION_STRENGTHEN: {"chroma_scale"},
    Family.SATURATION_WEAKEN: {"chroma_scale"},
    Family.SNOW: {"procedural_flakes"},
    Family.CLEAN: {CLEAN_SUBTYPE},
}


def register_subtype(family: Family, name: str) -> None:
    """Register a sub-type identifier as valid for a family."""
    if family is Family.CLEAN:
        raise InvalidCombination("the clean family has only the reserved sub-type")
    if not name or name == CLEAN_SUBTYPE:
        raise InvalidCombination(f"sub-type name {name!r} is reserved")
    _SUBTYPES[family].add(name)


def registered_subtypes(family: Family) -> frozenset[str]:
    return frozenset(_SUBTYPES[family])


def default_subtype(family: Family) -> str:
    return sorted(_SUBTYPES[family])[0]


class SeverityLabel(Enum):
    NONE = "none"
    MINOR = "minor"
    MODERATE = "moderate"
    SEVERE = "severe"


DEGRADING_SEVERITIES: tuple[SeverityLabel, ...] = (
    SeverityLabel.MINOR,
    SeverityLabel.MODERATE,
    SeverityLabel.SEVERE,
)


@dataclass(frozen=True)
class DistortionLabel:
    family: Family
    subtype: str

    def __post_init__(self):
        if self.family is Family.CLEAN and self.subtype != CLEAN_SUBTYPE:
            raise InvalidCombination(
                f"clean regions use sub-type {CLEAN_SUBTYPE!r}, got {self.subtype!r}"
            )


CLEAN_LABEL = DistortionLabel(Family.CLEAN, CLEAN_SUBTYPE)


def quantize_score(value: float) -> float:
    """Quantize a score to six fractional digits (round half to even)."""
    return float(format(float(value), ".6f"))


@dataclass(frozen=True)
class RegionNode:
    """One region on one side of the pair.

    ``mask_ref`` is the pixel value in the pair's label map that selects
    this region. It defaults to the region index and stays fixed when a
    node is carried into a renumbered subgraph.
    """

    region_index: int
    class_name: str
    side: ImageSide
    distortion: DistortionLabel
    severity: SeverityLabel
    score: float
    mask_ref: int = -1
    scene_attributes: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        if self.mask_ref < 0:
            object.__setattr__(self, "mask_ref", self.region_index)
        if self.scene_attributes is not None:
            object.__setattr__(
                self, "scene_attributes", tuple(self.scene_attributes) or None
            )


@dataclass(frozen=True)
class EdgeEndpoint:
    side: ImageSide
    index: int


@dataclass(frozen=True)
class DistortionEdge:
    """Comparative edge, written subject -> object.

    Canonical edges run from the anchor-side region to the target-side
    region of one matched pair; the constructors below only build those.
    The general subject/object form exists so rule-breaking edges read
    from lenient input remain representable and checkable.
    """

    subject: EdgeEndpoint
    relation: RelationLabel
    object: EdgeEndpoint

    @property
    def anchor_region(self) -> int:
        return self.subject.index

    @property
    def target_region(self) -> int:
        return self.object.index

    def is_canonical(self) -> bool:
        return (
            self.subject.side is ImageSide.ANCHOR
            and self.object.side is ImageSide.TARGET
            and self.subject.index == self.object.index
        )

    def is_reversed_pair(self) -> bool:
        return (
            self.subject.side is ImageSide.TARGET
            and self.object.side is ImageSide.ANCHOR
            and self.subject.index == self.object.index
        )


def distortion_edge(index: int, relation: RelationLabel) -> DistortionEdge:
    """Canonical edge for matched region pair ``index``."""
    return DistortionEdge(
        subject=EdgeEndpoint(ImageSide.ANCHOR, index),
        relation=relation,
        object=EdgeEndpoint(ImageSide.TARGET, index),
    )


@dataclass(frozen=True)
class SceneEdge:
    """Intra-image scene relation; carried verbatim, never scored."""

    subject_region: int
    predicate: str
    object_region: int
    side: ImageSide


@dataclass(frozen=True)
class DistortionGraph:
    pair_id: str
    anchor_image_ref: str
    target_image_ref: str
    label_map_ref: str
    anchor_nodes: tuple[RegionNode, ...]
    target_nodes: tuple[RegionNode, ...]
    distortion_edges: tuple[DistortionEdge, ...]
    scene_edges: tuple[SceneEdge, ...] = ()

    @property
    def n_regions(self) -> int:
        return len(self.anchor_nodes)

    def node(self, side: ImageSide, index: int) -> RegionNode:
        nodes = self.anchor_nodes if side is ImageSide.ANCHOR else self.target_nodes
        for n in nodes:
            if n.region_index == index:
                return n
        raise UnknownRegion(f"no region {index} on side {side.value}")

    def edge(self, index: int) -> DistortionEdge:
        for e in self.distortion_edges:
            if e.is_canonical() and e.anchor_region == index:
                return e
        raise UnknownRegion(f"no distortion edge for region {index}")


class ViolationKind(Enum):
    VALIDITY = "VALIDITY"        # edge is not anchor->target over one matched pair
    ORDERING = "ORDERING"        # edge written target->anchor
    FUNCTIONAL = "FUNCTIONAL"    # a matched pair compared zero or >1 times
    STRUCTURAL = "STRUCTURAL"    # node sets or attributes malformed


@dataclass(frozen=True)
class Violation:
    kind: ViolationKind
    element: str
    detail: str

    def __str__(self) -> str:
        return f"{self.kind.value} at {self.element}: {self.detail}"


def _check_nodes(
    nodes: Sequence[RegionNode], side: ImageSide, out: list[Violation]
) -> None:
    seen: set[int] = set()
    for n in nodes:
        el = f"region {n.region_index} side {side.value}"
        if n.side is not side:
            out.append(
                Violation(ViolationKind.STRUCTURAL, el, "node stored on wrong side")
            )
        if n.region_index < 1:
            out.append(
                Violation(ViolationKind.STRUCTURAL, el, "region index must be >= 1")
            )
        elif n.region_index in seen:
            out.append(
                Violation(ViolationKind.STRUCTURAL, el, "duplicate region index")
            )
        seen.add(n.region_index)
        if not 0.0 <= n.score <= 1.0:
            out.append(
                Violation(ViolationKind.STRUCTURAL, el, f"score {n.score} not in [0,1]")
            )
        clean = n.distortion.family is Family.CLEAN
        none_sev = n.severity is SeverityLabel.NONE
        if clean != none_sev:
            out.append(
                Violation(
                    ViolationKind.STRUCTURAL,
                    el,
                    "severity none is required for clean and forbidden otherwise",
                )
            )
        if n.distortion.subtype not in _SUBTYPES[n.distortion.family]:
            out.append(
                Violation(
                    ViolationKind.STRUCTURAL,
                    el,
                    f"sub-type {n.distortion.subtype!r} not registered for "
                    f"{n.distortion.family.value}",
                )
            )
    expected = set(range(1, len(nodes) + 1))
    if seen != expected:
        out.append(
            Violation(
                ViolationKind.STRUCTURAL,
                f"side {side.value}",
                f"region indices {sorted(seen)} do not form 1..{len(nodes)}",
            )
        )


def validate(graph: DistortionGraph) -> list[Violation]:
    """Check every graph law; returns one record per breach (total function)."""
    out: list[Violation] = []

    _check_nodes(graph.anchor_nodes, ImageSide.ANCHOR, out)
    _check_nodes(graph.target_nodes, ImageSide.TARGET, out)
    if len(graph.anchor_nodes) != len(graph.target_nodes):
        out.append(
            Violation(
                ViolationKind.STRUCTURAL,
                "node sets",
                f"{len(graph.anchor_nodes)} anchor vs "
                f"{len(graph.target_nodes)} target regions",
            )
        )

    anchor_ids = {n.region_index for n in graph.anchor_nodes}
    target_ids = {n.region_index for n in graph.target_nodes}

    def endpoint_exists(p: EdgeEndpoint) -> bool:
        ids = anchor_ids if p.side is ImageSide.ANCHOR else target_ids
        return p.index in ids

    # Edges that legitimately compare pair i, in either written direction,
    # count toward functional coverage; reversal is flagged separately.
    coverage: dict[int, int] = {i: 0 for i in anchor_ids | target_ids}
    for k, e in enumerate(graph.distortion_edges):
        el = f"edge {k}"
        if e.is_canonical():
            if endpoint_exists(e.subject) and endpoint_exists(e.object):
                coverage[e.subject.index] = coverage.get(e.subject.index, 0) + 1
            else:
                out.append(
                    Violation(
                        ViolationKind.VALIDITY,
                        el,
                        f"edge references unknown region {e.subject.index}",
                    )
                )
        elif e.is_reversed_pair():
            out.append(
                Violation(
                    ViolationKind.ORDERING,
                    el,
                    f"edge for region {e.subject.index} written target->anchor",
                )
            )
            if endpoint_exists(e.subject) and endpoint_exists(e.object):
                coverage[e.subject.index] = coverage.get(e.subject.index, 0) + 1
        elif e.subject.side is e.object.side:
            out.append(
                Violation(
                    ViolationKind.VALIDITY,
                    el,
                    f"intra-image edge on side {e.subject.side.value} "
                    f"({e.subject.index}->{e.object.index})",
                )
            )
        else:
            out.append(
                Violation(
                    ViolationKind.VALIDITY,
                    el,
                    f"edge joins unmatched regions "
                    f"{e.subject.index}->{e.object.index}",
                )
            )

    for i in sorted(anchor_ids & target_ids):
        n = coverage.get(i, 0)
        if n != 1:
            out.append(
                Violation(
                    ViolationKind.FUNCTIONAL,
                    f"region {i}",
                    f"matched pair compared {n} times, expected exactly once",
                )
            )

    for k, s in enumerate(graph.scene_edges):
        ids = anchor_ids if s.side is ImageSide.ANCHOR else target_ids
        if s.subject_region not in ids or s.object_region not in ids:
            out.append(
                Violation(
                    ViolationKind.STRUCTURAL,
                    f"scene edge {k}",
                    f"endpoint missing on side {s.side.value}",
                )
            )

    return out


def build_graph(
    pair_id: str,
    nodes_anchor: Iterable[RegionNode],
    nodes_target: Iterable[RegionNode],
    edges: Iterable[DistortionEdge],
    scene_edges: Iterable[SceneEdge] = (),
    *,
    anchor_image_ref: str = "",
    target_image_ref: str = "",
    label_map_ref: str = "",
) -> DistortionGraph:
    """Assemble and fully check a graph; scores are quantized to 6 digits.

    Node and edge order in the inputs is irrelevant: the result is stored
    in canonical order, so structurally equal graphs compare (and
    serialize) equal.
    """
    a_nodes = tuple(
        sorted(_quantized(nodes_anchor), key=lambda n: n.region_index)
    )
    t_nodes = tuple(
        sorted(_quantized(nodes_target), key=lambda n: n.region_index)
    )
    edge_list = tuple(sorted(edges, key=lambda e: (e.subject.index, e.object.index)))
    graph = DistortionGraph(
        pair_id=pair_id,
        anchor_image_ref=anchor_image_ref,
        target_image_ref=target_image_ref,
        label_map_ref=label_map_ref,
        anchor_nodes=a_nodes,
        target_nodes=t_nodes,
        distortion_edges=edge_list,
        scene_edges=tuple(scene_edges),
    )
    violations = validate(graph)
    if violations:
        raise _to_error(violations)
    return graph


def _quantized(nodes: Iterable[RegionNode]) -> list[RegionNode]:
    out = []
    for n in nodes:
        q = quantize_score(n.score)
        out.append(n if q == n.score else _replace_score(n, q))
    return out


def _replace_score(node: RegionNode, score: float) -> RegionNode:
    return RegionNode(
        region_index=node.region_index,
        class_name=node.class_name,
        side=node.side,
        distortion=node.distortion,
        severity=node.severity,
        score=score,
        mask_ref=node.mask_ref,
        scene_attributes=node.scene_attributes,
    )


def _to_error(violations: list[Violation]) -> Exception:
    kinds = {v.kind for v in violations}
    if kinds & {ViolationKind.VALIDITY, ViolationKind.ORDERING, ViolationKind.FUNCTIONAL}:
        return EdgeViolation(ValidationError(violations).args[0])
    if any("score" in v.detail for v in violations):
        return ScoreOutOfRange(ValidationError(violations).args[0])
    if any("severity" in v.detail for v in violations):
        return InvalidCombination(ValidationError(violations).args[0])
    return IndexMismatch(ValidationError(violations).args[0])


def grounded_subgraph(graph: DistortionGraph, region_index: int) -> DistortionGraph:
    """Restrict a graph to one matched region pair (renumbered to index 1)."""
    if not 1 <= region_index <= graph.n_regions:
        raise UnknownRegion(
            f"region {region_index} outside 1..{graph.n_regions}"
        )
    a = graph.node(ImageSide.ANCHOR, region_index)
    t = graph.node(ImageSide.TARGET, region_index)
    e = graph.edge(region_index)
    return build_graph(
        graph.pair_id,
        [_renumber(a, 1)],
        [_renumber(t, 1)],
        [distortion_edge(1, e.relation)],
        anchor_image_ref=graph.anchor_image_ref,
        target_image_ref=graph.target_image_ref,
        label_map_ref=graph.label_map_ref,
    )


def _renumber(node: RegionNode, index: int) -> RegionNode:
    return RegionNode(
        region_index=index,
        class_name=node.class_name,
        side=node.side,
        distortion=node.distortion,
        severity=node.severity,
        score=node.score,
        mask_ref=node.mask_ref,
        scene_attributes=node.scene_attributes,
    )


# --- serialization ---------------------------------------------------------


def _json_str(s: str) -> str:
    return json.dumps(s, ensure_ascii=True)


def _region_json(n: RegionNode) -> str:
    parts = [
        f'"index":{n.region_index}',
        f'"class":{_json_str(n.class_name)}',
        f'"side":{_json_str(n.side.value)}',
        '"distortion":{'
        f'"family":{_json_str(n.distortion.family.value)},'
        f'"subtype":{_json_str(n.distortion.subtype)}'
        "}",
        f'"severity":{_json_str(n.severity.value)}',
        f'"score":{format(n.score, ".6f")}',
    ]
    if n.mask_ref != n.region_index:
        parts.append(f'"mask_ref":{n.mask_ref}')
    if n.scene_attributes:
        attrs = ",".join(_json_str(a) for a in n.scene_attributes)
        parts.append(f'"scene_attributes":[{attrs}]')
    return "{" + ",".join(parts) + "}"


def serialize(graph: DistortionGraph) -> bytes:
    """Canonical bytes for a valid graph; equal graphs give equal bytes."""
    violations = validate(graph)
    if violations:
        raise ValidationError(violations)

    regions = []
    for i in range(1, graph.n_regions + 1):
        regions.append(_region_json(graph.node(ImageSide.ANCHOR, i)))
        regions.append(_region_json(graph.node(ImageSide.TARGET, i)))
    edges = []
    for i in range(1, graph.n_regions + 1):
        e = graph.edge(i)
        edges.append(
            f'{{"index":{i},"relation":{_json_str(e.relation.value)}}}'
        )
    parts = [
        f'"version":{FORMAT_VERSION}',
        f'"pair_id":{_json_str(graph.pair_id)}',
        f'"anchor_image":{_json_str(graph.anchor_image_ref)}',
        f'"target_image":{_json_str(graph.target_image_ref)}',
        f'"label_map":{_json_str(graph.label_map_ref)}',
        f'"regions":[{",".join(regions)}]',
        f'"distortion_edges":[{",".join(edges)}]',
    ]
    if graph.scene_edges:
        scene = ",".join(
            "{"
            + f'"subject":{s.subject_region},'
            + f'"predicate":{_json_str(s.predicate)},'
            + f'"object":{s.object_region},'
            + f'"side":{_json_str(s.side.value)}'
            + "}"
            for s in graph.scene_edges
        )
        parts.append(f'"scene_edges":[{scene}]')
    return ("{" + ",".join(parts) + "}\n").encode("utf-8")


def _enum(cls, value, what: str):
    try:
        return cls(value)
    except ValueError:
        raise ParseError(f"unknown {what}: {value!r}") from None


def _require(obj: dict, key: str, what: str):
    if key not in obj:
        raise ParseError(f"{what} is missing key {key!r}")
    return obj[key]


def deserialize(data: bytes, *, lenient: bool = False) -> DistortionGraph:
    """Parse graph bytes; rejects rule-breaking graphs unless ``lenient``."""
    try:
        doc = json.loads(data.decode("utf-8"))
    except UnicodeDecodeError as exc:
        raise ParseError(f"not UTF-8: {exc}", offset=exc.start) from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"bad JSON: {exc.msg}", offset=exc.pos) from None
    if not isinstance(doc, dict):
        raise ParseError("top level must be an object")
    version = _require(doc, "version", "document")
    if version != FORMAT_VERSION:
        raise ParseError(f"unsupported version {version!r}")

    anchors: list[RegionNode] = []
    targets: list[RegionNode] = []
    for r in _require(doc, "regions", "document"):
        side = _enum(ImageSide, _require(r, "side", "region"), "side")
        dist = _require(r, "distortion", "region")
        index = int(_require(r, "index", "region"))
        attrs = r.get("scene_attributes")
        node = RegionNode(
            region_index=index,
            class_name=str(_require(r, "class", "region")),
            side=side,
            distortion=DistortionLabel(
                family=_enum(Family, _require(dist, "family", "distortion"), "family"),
                subtype=str(_require(dist, "subtype", "distortion")),
            ),
            severity=_enum(
                SeverityLabel, _require(r, "severity", "region"), "severity"
            ),
            score=float(_require(r, "score", "region")),
            mask_ref=int(r.get("mask_ref", index)),
            scene_attributes=tuple(attrs) if attrs else None,
        )
        (anchors if side is ImageSide.ANCHOR else targets).append(node)

    edges = []
    for e in _require(doc, "distortion_edges", "document"):
        index = int(_require(e, "index", "edge"))
        relation = _enum(RelationLabel, _require(e, "relation", "edge"), "relation")
        subject_side = _enum(ImageSide, e.get("subject_side", "A"), "side")
        object_side = _enum(ImageSide, e.get("object_side", "T"), "side")
        edges.append(
            DistortionEdge(
                subject=EdgeEndpoint(subject_side, index),
                relation=relation,
                object=EdgeEndpoint(object_side, int(e.get("object_index", index))),
            )
        )

    scene = []
    for s in doc.get("scene_edges", []):
        scene.append(
            SceneEdge(
                subject_region=int(_require(s, "subject", "scene edge")),
                predicate=str(_require(s, "predicate", "scene edge")),
                object_region=int(_require(s, "object", "scene edge")),
                side=_enum(ImageSide, _require(s, "side", "scene edge"), "side"),
            )
        )

    graph = DistortionGraph(
        pair_id=str(_require(doc, "pair_id", "document")),
        anchor_image_ref=str(_require(doc, "anchor_image", "document")),
        target_image_ref=str(_require(doc, "target_image", "document")),
        label_map_ref=str(_require(doc, "label_map", "document")),
        anchor_nodes=tuple(sorted(anchors, key=lambda n: n.region_index)),
        target_nodes=tuple(sorted(targets, key=lambda n: n.region_index)),
        distortion_edges=tuple(
            sorted(edges, key=lambda e: (e.subject.index, e.object.index))
        ),
        scene_edges=tuple(scene),
    )
    if not lenient:
        violations = validate(graph)
        if violations:
            raise ValidationError(violations)
    return graph
