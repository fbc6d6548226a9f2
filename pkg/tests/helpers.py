"""Shared constructors for tests: random valid graphs and graph mutations."""

from __future__ import annotations

import numpy as np

from distgraph import (
    DistortionGraph,
    Family,
    ImageSide,
    RegionNode,
    RelationLabel,
    SeverityLabel,
    build_graph,
    distortion_edge,
)
from distgraph.graph import (
    DistortionEdge,
    DistortionLabel,
    EdgeEndpoint,
    default_subtype,
)

_CLASSES = ("sky", "tree", "car", "wall", "road", "dog")

DEGRADING = [f for f in Family if f is not Family.CLEAN]


def random_node(rng: np.random.Generator, index: int, side: ImageSide) -> RegionNode:
    if rng.random() < 0.25:
        family, severity = Family.CLEAN, SeverityLabel.NONE
    else:
        family = DEGRADING[int(rng.integers(len(DEGRADING)))]
        severity = (
            SeverityLabel.MINOR,
            SeverityLabel.MODERATE,
            SeverityLabel.SEVERE,
        )[int(rng.integers(3))]
    return RegionNode(
        region_index=index,
        class_name=_CLASSES[int(rng.integers(len(_CLASSES)))],
        side=side,
        distortion=DistortionLabel(family, default_subtype(family)),
        severity=severity,
        score=float(rng.random()),
    )


def make_random_graph(
    rng: np.random.Generator, n_regions: int | None = None
) -> DistortionGraph:
    n = int(n_regions) if n_regions else int(rng.integers(1, 13))
    relations = list(RelationLabel)
    return build_graph(
        f"pair-{int(rng.integers(1 << 30)):08d}",
        [random_node(rng, i, ImageSide.ANCHOR) for i in range(1, n + 1)],
        [random_node(rng, i, ImageSide.TARGET) for i in range(1, n + 1)],
        [
            distortion_edge(i, relations[int(rng.integers(len(relations)))])
            for i in range(1, n + 1)
        ],
        anchor_image_ref="a.ppm",
        target_image_ref="t.ppm",
        label_map_ref="m.pgm",
    )


def _with_edges(graph: DistortionGraph, edges) -> DistortionGraph:
    return DistortionGraph(
        pair_id=graph.pair_id,
        anchor_image_ref=graph.anchor_image_ref,
        target_image_ref=graph.target_image_ref,
        label_map_ref=graph.label_map_ref,
        anchor_nodes=graph.anchor_nodes,
        target_nodes=graph.target_nodes,
        distortion_edges=tuple(edges),
        scene_edges=graph.scene_edges,
    )


def mutate_reverse_edge(graph: DistortionGraph, index: int) -> DistortionGraph:
    edges = []
    for e in graph.distortion_edges:
        if e.anchor_region == index:
            edges.append(
                DistortionEdge(
                    subject=EdgeEndpoint(ImageSide.TARGET, index),
                    relation=e.relation,
                    object=EdgeEndpoint(ImageSide.ANCHOR, index),
                )
            )
        else:
            edges.append(e)
    return _with_edges(graph, edges)


def mutate_duplicate_edge(graph: DistortionGraph, index: int) -> DistortionGraph:
    extra = graph.edge(index)
    return _with_edges(graph, graph.distortion_edges + (extra,))


def mutate_drop_edge(graph: DistortionGraph, index: int) -> DistortionGraph:
    return _with_edges(
        graph,
        [e for e in graph.distortion_edges if e.anchor_region != index],
    )


def mutate_add_intra_edge(graph: DistortionGraph, index: int) -> DistortionGraph:
    intra = DistortionEdge(
        subject=EdgeEndpoint(ImageSide.ANCHOR, index),
        relation=RelationLabel.SAME,
        object=EdgeEndpoint(ImageSide.ANCHOR, index),
    )
    return _with_edges(graph, graph.distortion_edges + (intra,))
