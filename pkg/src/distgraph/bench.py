"""Pair corpus construction and the Easy/Medium/Hard benchmark splits.

Split membership:

    Easy    both sides uniform single-family settings
    Medium  exactly one side mixed, the other uniform
    Hard    both sides mixed (plans sampled independently)

Everything is a pure function of (scenes, split, n_pairs, global_seed),
so a rebuild with the same inputs reproduces every byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ._version import __version__ as toolkit_version
from .errors import InsufficientScenes, InvalidCombination, MissingGraph, ParseError
from .graph import (
    DistortionGraph,
    Family,
    ImageSide,
    RegionNode,
    SeverityLabel,
    build_graph,
    deserialize,
    distortion_edge,
    validate,
)
from .imageio import RasterImage
from .scenes import Scene
from .scoring import label_relation
from .seeds import SIDE_CODE, mix64, string_key
from .synth import (
    RegionPlan,
    Setting,
    SettingKind,
    all_settings,
    sample_region_plan,
    synthesize_pair,
)

MANIFEST_VERSION = 1


def enumerate_setting_pairs() -> list[tuple[Setting, Setting]]:
    """All 240 ordered pairs of distinct settings, in canonical order."""
    settings = all_settings()
    return [(a, b) for a in settings for b in settings if a != b]


class Split(Enum):
    EASY = "easy"
    MEDIUM = "medium"
    HARD = "hard"


def admissible_setting_pairs(split: Split) -> list[tuple[Setting, Setting]]:
    uniforms = [s for s in all_settings() if s.kind is SettingKind.UNIFORM]
    mixed = Setting.mixed()
    if split is Split.EASY:
        return [(a, b) for a in uniforms for b in uniforms if a != b]
    if split is Split.MEDIUM:
        return [(mixed, u) for u in uniforms] + [(u, mixed) for u in uniforms]
    return [(mixed, mixed)]


def pair_matches_split(split: Split, setting_a: Setting, setting_t: Setting) -> bool:
    if split is Split.EASY:
        return (
            setting_a.kind is SettingKind.UNIFORM
            and setting_t.kind is SettingKind.UNIFORM
        )
    if split is Split.MEDIUM:
        kinds = (setting_a.kind, setting_t.kind)
        return kinds.count(SettingKind.MIXED) == 1 and SettingKind.UNIFORM in kinds
    return (
        setting_a.kind is SettingKind.MIXED and setting_t.kind is SettingKind.MIXED
    )


@dataclass(frozen=True)
class PairRecord:
    pair_id: str
    scene_id: str
    setting_anchor: Setting
    setting_target: Setting
    seed: int
    graph_ref: str
    anchor_image_ref: str
    target_image_ref: str
    label_map_ref: str


@dataclass(frozen=True)
class BenchmarkManifest:
    split: Split
    global_seed: int
    pairs: tuple[PairRecord, ...]
    toolkit_version: str = toolkit_version


@dataclass(frozen=True)
class BuiltPair:
    record: PairRecord
    graph: DistortionGraph
    anchor_image: RasterImage
    target_image: RasterImage


def _plan_scores(
    scorer,
    pair_id: str,
    side: str,
    scene: Scene,
    image: RasterImage,
) -> list[float]:
    return [
        scorer.score_region(pair_id, side, scene.image, image, scene.label_map, i)
        for i in range(1, scene.n_regions + 1)
    ]


def _nodes_from_plan(
    scene: Scene, side: ImageSide, plan: RegionPlan, scores: Sequence[float]
) -> list[RegionNode]:
    return [
        RegionNode(
            region_index=i,
            class_name=scene.class_names[i - 1],
            side=side,
            distortion=spec.label,
            severity=spec.severity,
            score=scores[i - 1],
        )
        for i, spec in enumerate(plan, start=1)
    ]


def build_pair(
    scene: Scene,
    setting_anchor: Setting,
    setting_target: Setting,
    seed: int,
    scorer,
    *,
    pair_id: str,
    graph_ref: str = "",
    anchor_image_ref: str = "",
    target_image_ref: str = "",
    label_map_ref: str = "",
) -> BuiltPair:
    """Synthesize, score, and label one pair; the graph is revalidated.

    Equal settings are rejected except (mixed, mixed), whose two sides
    draw independent plans.
    """
    if setting_anchor == setting_target and setting_anchor.kind is not SettingKind.MIXED:
        raise InvalidCombination(
            f"anchor and target settings must differ, both are "
            f"{setting_anchor.as_string()}"
        )
    n = scene.n_regions
    for i in range(1, n + 1):
        scene.label_map.require_region(i)

    key = string_key(pair_id)
    plans: dict[str, RegionPlan] = {}
    for side, setting in (("A", setting_anchor), ("T", setting_target)):
        rng = np.random.default_rng(mix64(seed, key, SIDE_CODE[side], 0))
        seeds = [mix64(seed, key, SIDE_CODE[side], i) for i in range(1, n + 1)]
        plans[side] = sample_region_plan(rng, n, setting, seeds=seeds)

    anchor_img, target_img = synthesize_pair(
        scene.image, scene.label_map, plans["A"], plans["T"]
    )
    scores_a = _plan_scores(scorer, pair_id, "A", scene, anchor_img)
    scores_t = _plan_scores(scorer, pair_id, "T", scene, target_img)

    edges = [
        distortion_edge(i, label_relation(scores_a[i - 1], scores_t[i - 1]))
        for i in range(1, n + 1)
    ]
    graph = build_graph(
        pair_id,
        _nodes_from_plan(scene, ImageSide.ANCHOR, plans["A"], scores_a),
        _nodes_from_plan(scene, ImageSide.TARGET, plans["T"], scores_t),
        edges,
        anchor_image_ref=anchor_image_ref,
        target_image_ref=target_image_ref,
        label_map_ref=label_map_ref,
    )
    assert not validate(graph)

    record = PairRecord(
        pair_id=pair_id,
        scene_id=scene.scene_id,
        setting_anchor=setting_anchor,
        setting_target=setting_target,
        seed=seed,
        graph_ref=graph_ref,
        anchor_image_ref=anchor_image_ref,
        target_image_ref=target_image_ref,
        label_map_ref=label_map_ref,
    )
    return BuiltPair(record, graph, anchor_img, target_img)


@dataclass(frozen=True)
class PairJob:
    pair_id: str
    scene: Scene
    setting_anchor: Setting
    setting_target: Setting
    seed: int


def plan_split(
    split: Split,
    scenes: Sequence[Scene],
    n_pairs: int,
    global_seed: int,
) -> list[PairJob]:
    """Sample which (scene, settings) each pair uses; no synthesis yet."""
    if n_pairs < 0:
        raise ValueError("n_pairs must be >= 0")
    if not scenes and n_pairs > 0:
        raise InsufficientScenes("at least one scene is required")
    admissible = admissible_setting_pairs(split)
    rng = np.random.default_rng(mix64(global_seed, string_key(split.value)))
    jobs = []
    for k in range(n_pairs):
        scene = scenes[int(rng.integers(len(scenes)))]
        setting_a, setting_t = admissible[int(rng.integers(len(admissible)))]
        pair_id = f"{split.value}-{k:05d}"
        jobs.append(
            PairJob(
                pair_id=pair_id,
                scene=scene,
                setting_anchor=setting_a,
                setting_target=setting_t,
                seed=mix64(global_seed, string_key(pair_id)),
            )
        )
    return jobs


def run_pair_job(job: PairJob, scorer, *, image_format: str = "ppm") -> BuiltPair:
    return build_pair(
        job.scene,
        job.setting_anchor,
        job.setting_target,
        job.seed,
        scorer,
        pair_id=job.pair_id,
        graph_ref=f"graphs/{job.pair_id}.json",
        anchor_image_ref=f"images/{job.pair_id}_A.{image_format}",
        target_image_ref=f"images/{job.pair_id}_T.{image_format}",
        label_map_ref=f"maps/{job.scene.scene_id}.pgm",
    )


def build_split(
    split: Split,
    scenes: Sequence[Scene],
    n_pairs: int,
    global_seed: int,
    scorer,
    *,
    image_format: str = "ppm",
) -> tuple[BenchmarkManifest, list[BuiltPair]]:
    """Build a whole split in memory; see the cli module for disk layout."""
    jobs = plan_split(split, scenes, n_pairs, global_seed)
    built = [run_pair_job(job, scorer, image_format=image_format) for job in jobs]
    manifest = BenchmarkManifest(
        split=split,
        global_seed=global_seed,
        pairs=tuple(b.record for b in built),
    )
    return manifest, built


# --- manifest format ---------------------------------------------------------


def manifest_to_bytes(manifest: BenchmarkManifest) -> bytes:
    doc = {
        "version": MANIFEST_VERSION,
        "toolkit_version": manifest.toolkit_version,
        "split": manifest.split.value,
        "global_seed": manifest.global_seed,
        "pairs": [
            {
                "pair_id": p.pair_id,
                "scene_id": p.scene_id,
                "setting_anchor": p.setting_anchor.as_string(),
                "setting_target": p.setting_target.as_string(),
                "seed": p.seed,
                "graph": p.graph_ref,
                "anchor_image": p.anchor_image_ref,
                "target_image": p.target_image_ref,
                "label_map": p.label_map_ref,
            }
            for p in manifest.pairs
        ],
    }
    return (json.dumps(doc, separators=(",", ":")) + "\n").encode("utf-8")


def manifest_from_bytes(data: bytes) -> BenchmarkManifest:
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"bad manifest: {exc}") from None
    if doc.get("version") != MANIFEST_VERSION:
        raise ParseError(f"unsupported manifest version {doc.get('version')!r}")
    try:
        pairs = tuple(
            PairRecord(
                pair_id=p["pair_id"],
                scene_id=p["scene_id"],
                setting_anchor=Setting.from_string(p["setting_anchor"]),
                setting_target=Setting.from_string(p["setting_target"]),
                seed=int(p["seed"]),
                graph_ref=p["graph"],
                anchor_image_ref=p["anchor_image"],
                target_image_ref=p["target_image"],
                label_map_ref=p["label_map"],
            )
            for p in doc["pairs"]
        )
        return BenchmarkManifest(
            split=Split(doc["split"]),
            global_seed=int(doc["global_seed"]),
            pairs=pairs,
            toolkit_version=str(doc.get("toolkit_version", "")),
        )
    except (KeyError, ValueError) as exc:
        raise ParseError(f"bad manifest record: {exc}") from None


def load_manifest(path: str | Path) -> BenchmarkManifest:
    return manifest_from_bytes(Path(path).read_bytes())


def check_split_membership(manifest: BenchmarkManifest) -> list[str]:
    """Re-verify the split predicate for every pair, from the manifest alone."""
    problems = []
    for p in manifest.pairs:
        if not pair_matches_split(manifest.split, p.setting_anchor, p.setting_target):
            problems.append(
                f"{p.pair_id}: settings ({p.setting_anchor.as_string()}, "
                f"{p.setting_target.as_string()}) do not belong to "
                f"{manifest.split.value}"
            )
    return problems


def load_graphs(
    manifest: BenchmarkManifest, base_dir: str | Path
) -> dict[str, DistortionGraph]:
    base = Path(base_dir)
    graphs = {}
    for p in manifest.pairs:
        path = base / p.graph_ref
        try:
            graphs[p.pair_id] = deserialize(path.read_bytes())
        except (OSError, ParseError) as exc:
            raise MissingGraph(f"{p.pair_id}: cannot load {path}: {exc}") from None
    return graphs


# --- corpus summary ----------------------------------------------------------

MIXED_CLEAN_FRACTION = 0.2


@dataclass(frozen=True)
class CorpusSummary:
    n_regions: int
    family_fractions: dict[Family, float]
    severity_fractions: dict[SeverityLabel, float]
    flags: tuple[str, ...]


def summarize_graphs(
    graphs: Iterable[DistortionGraph],
    *,
    expect_mixed: bool = False,
    tolerance: float = 0.01,
) -> CorpusSummary:
    family_counts = {f: 0 for f in Family}
    severity_counts = {s: 0 for s in SeverityLabel}
    total = 0
    for g in graphs:
        for node in g.anchor_nodes + g.target_nodes:
            family_counts[node.distortion.family] += 1
            severity_counts[node.severity] += 1
            total += 1
    if total == 0:
        return CorpusSummary(0, {}, {}, ())
    family_fractions = {f: c / total for f, c in family_counts.items()}
    severity_fractions = {s: c / total for s, c in severity_counts.items()}
    flags: list[str] = []
    if expect_mixed:
        expected_family = (1.0 - MIXED_CLEAN_FRACTION) / 14.0
        for f, frac in family_fractions.items():
            want = MIXED_CLEAN_FRACTION if f is Family.CLEAN else expected_family
            if abs(frac - want) > tolerance:
                flags.append(
                    f"{f.value}: fraction {frac:.4f} deviates from "
                    f"{want:.4f} by more than {tolerance}"
                )
    return CorpusSummary(total, family_fractions, severity_fractions, tuple(flags))


def summarize_corpus(
    manifests: Sequence[tuple[BenchmarkManifest, str | Path]],
    *,
    expect_mixed: bool = False,
    tolerance: float = 0.01,
) -> CorpusSummary:
    """Distribution report across whole manifests (graphs read from disk)."""
    graphs: list[DistortionGraph] = []
    for manifest, base_dir in manifests:
        graphs.extend(load_graphs(manifest, base_dir).values())
    return summarize_graphs(
        graphs, expect_mixed=expect_mixed, tolerance=tolerance
    )
