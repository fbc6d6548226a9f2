"""Region-first pairwise image assessment toolkit.

Builds region-wise degraded image pairs with ground-truth distortion
graphs, validates the graph laws, scores and labels region comparisons,
assembles benchmark splits, and evaluates predictions.
"""

from ._version import __version__
from .graph import (
    DistortionEdge,
    DistortionGraph,
    DistortionLabel,
    Family,
    ImageSide,
    RegionNode,
    RelationLabel,
    SceneEdge,
    SeverityLabel,
    Violation,
    ViolationKind,
    build_graph,
    deserialize,
    distortion_edge,
    grounded_subgraph,
    serialize,
    validate,
)
from .labelmap import LabelMap, load_label_map, store_label_map
from .imageio import RasterImage, load_image, save_image
from .distortions import (
    DistortionSpec,
    apply_distortion,
    clean_spec,
    make_spec,
    severity_params,
)
from .synth import (
    RegionPlan,
    Setting,
    SettingKind,
    all_settings,
    composite_region,
    sample_region_plan,
    synthesize_pair,
)
from .scoring import (
    DefaultScorer,
    ScoreTable,
    TableScorer,
    default_score_region,
    label_relation,
    load_score_table,
    store_score_table,
)
from .scenes import Scene, generate_scene, generate_scenes
from .bench import (
    BenchmarkManifest,
    BuiltPair,
    PairRecord,
    Split,
    build_pair,
    build_split,
    check_split_membership,
    enumerate_setting_pairs,
    load_manifest,
    summarize_corpus,
    summarize_graphs,
)
from .evaluation import (
    MetricsReport,
    PairVerdict,
    RankMode,
    RegionPrediction,
    evaluate,
    load_predictions,
    random_baseline,
    rank_pair,
    ranking_accuracy,
    store_predictions,
)
from .prompting import PromptStyle, render_prompt

__all__ = [name for name in dir() if not name.startswith("_")]
