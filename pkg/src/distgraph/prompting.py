"""Plain-text rendering of a graph, for pasting into a reasoning prompt."""

from __future__ import annotations

from enum import Enum

from .graph import DistortionGraph, ImageSide, RegionNode


class PromptStyle(Enum):
    COMPACT = "compact"
    PER_REGION = "per-region"


def _node_text(node: RegionNode) -> str:
    return (
        f"{node.distortion.family.value}/{node.distortion.subtype} "
        f"{node.severity.value} {node.score:.6f}"
    )


def render_prompt(graph: DistortionGraph, style: PromptStyle) -> str:
    """Deterministic region-by-region listing of a graph."""
    lines = []
    for i in range(1, graph.n_regions + 1):
        anchor = graph.node(ImageSide.ANCHOR, i)
        target = graph.node(ImageSide.TARGET, i)
        relation = graph.edge(i).relation.value
        if style is PromptStyle.COMPACT:
            lines.append(
                f"{i} {anchor.class_name} | A: {_node_text(anchor)} | "
                f"T: {_node_text(target)} | {relation}"
            )
        else:
            lines.extend(
                [
                    f"region {i} ({anchor.class_name})",
                    f"  anchor: {_node_text(anchor)}",
                    f"  target: {_node_text(target)}",
                    f"  relation: {relation}",
                ]
            )
    return "\n".join(lines) + "\n"
