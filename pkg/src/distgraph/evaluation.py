"""Scoring predictions against ground-truth graphs.

Classification tasks pool instances across the corpus (relations per
matched pair, distortion and severity per region per side) and report
accuracy plus macro precision/recall/F1 over classes with ground-truth
support. Quality scores pool per region per side and report Spearman
rank correlation (average ranks on ties) and Pearson linear correlation.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import MissingPrediction, ParseError, ScoreOutOfRange
from .graph import (
    DistortionGraph,
    Family,
    ImageSide,
    RelationLabel,
    SeverityLabel,
)
from .seeds import mix64, string_key

MISSING = "__missing__"

PREDICTION_HEADER = (
    "pair_id",
    "region_index",
    "relation",
    "dist_A",
    "dist_T",
    "sev_A",
    "sev_T",
    "score_A",
    "score_T",
)


@dataclass(frozen=True)
class RegionPrediction:
    relation: RelationLabel
    distortion_anchor: Family
    distortion_target: Family
    severity_anchor: SeverityLabel
    severity_target: SeverityLabel
    score_anchor: float
    score_target: float


PredictionSet = dict[tuple[str, int], RegionPrediction]


def load_predictions(data: bytes) -> PredictionSet:
    reader = csv.reader(io.StringIO(data.decode("utf-8")))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty prediction file") from None
    if tuple(header) != PREDICTION_HEADER:
        raise ParseError(f"bad header {header!r}")
    out: PredictionSet = {}
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(PREDICTION_HEADER):
            raise ParseError(
                f"line {lineno}: expected {len(PREDICTION_HEADER)} fields, "
                f"got {len(row)}"
            )
        try:
            key = (row[0], int(row[1]))
            pred = RegionPrediction(
                relation=RelationLabel(row[2]),
                distortion_anchor=Family(row[3]),
                distortion_target=Family(row[4]),
                severity_anchor=SeverityLabel(row[5]),
                severity_target=SeverityLabel(row[6]),
                score_anchor=float(row[7]),
                score_target=float(row[8]),
            )
        except ValueError as exc:
            raise ParseError(f"line {lineno}: {exc}") from None
        for s in (pred.score_anchor, pred.score_target):
            if not 0.0 <= s <= 1.0:
                raise ScoreOutOfRange(f"line {lineno}: score {s} not in [0,1]")
        if key in out:
            raise ParseError(f"line {lineno}: duplicate key {key}")
        out[key] = pred
    return out


def store_predictions(predictions: PredictionSet) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(PREDICTION_HEADER)
    for (pair_id, index), p in sorted(predictions.items()):
        writer.writerow(
            [
                pair_id,
                index,
                p.relation.value,
                p.distortion_anchor.value,
                p.distortion_target.value,
                p.severity_anchor.value,
                p.severity_target.value,
                format(p.score_anchor, ".6f"),
                format(p.score_target, ".6f"),
            ]
        )
    return buf.getvalue().encode("utf-8")


# --- correlation -------------------------------------------------------------


def average_ranks(values: Sequence[float]) -> np.ndarray:
    a = np.asarray(values, dtype=np.float64)
    order = np.argsort(a, kind="mergesort")
    ranks = np.empty(a.size, dtype=np.float64)
    i = 0
    while i < a.size:
        j = i
        while j + 1 < a.size and a[order[j + 1]] == a[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def pearson(x: Sequence[float], y: Sequence[float]) -> tuple[float, bool]:
    """(coefficient, degenerate); zero-variance inputs report (0, True)."""
    a = np.asarray(x, dtype=np.float64)
    b = np.asarray(y, dtype=np.float64)
    if a.size < 2:
        return 0.0, True
    a = a - a.mean()
    b = b - b.mean()
    denom = float(np.sqrt(np.sum(a * a) * np.sum(b * b)))
    if denom == 0.0 or not np.isfinite(denom):
        return 0.0, True
    return float(np.sum(a * b) / denom), False


def spearman(x: Sequence[float], y: Sequence[float]) -> tuple[float, bool]:
    a = np.asarray(x, dtype=np.float64)
    if a.size < 2:
        return 0.0, True
    return pearson(average_ranks(x), average_ranks(y))


# --- metrics -----------------------------------------------------------------


@dataclass(frozen=True)
class ClassificationResult:
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    n: int
    confusion: dict[str, dict[str, int]]  # confusion[gt][pred] = count

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "n": self.n,
            "confusion": self.confusion,
        }


def classification_metrics(
    instances: Iterable[tuple[str, Optional[str]]]
) -> ClassificationResult:
    """Metrics from (ground_truth, predicted-or-None) label pairs."""
    confusion: dict[str, dict[str, int]] = {}
    n = 0
    correct = 0
    for gt, pred in instances:
        shown = MISSING if pred is None else pred
        confusion.setdefault(gt, {})
        confusion[gt][shown] = confusion[gt].get(shown, 0) + 1
        n += 1
        correct += int(gt == shown)
    if n == 0:
        return ClassificationResult(0.0, 0.0, 0.0, 0.0, 0, {})
    supported = sorted(confusion)
    precisions, recalls, f1s = [], [], []
    for cls in supported:
        tp = confusion.get(cls, {}).get(cls, 0)
        support = sum(confusion[cls].values())
        predicted = sum(row.get(cls, 0) for row in confusion.values())
        precision = tp / predicted if predicted else 0.0
        recall = tp / support if support else 0.0
        f1 = (
            2.0 * precision * recall / (precision + recall)
            if precision + recall > 0
            else 0.0
        )
        precisions.append(precision)
        recalls.append(recall)
        f1s.append(f1)
    return ClassificationResult(
        accuracy=correct / n,
        macro_precision=float(np.mean(precisions)),
        macro_recall=float(np.mean(recalls)),
        macro_f1=float(np.mean(f1s)),
        n=n,
        confusion=confusion,
    )


@dataclass(frozen=True)
class ScoreResult:
    srcc: float
    plcc: float
    n: int
    degenerate: bool

    def to_dict(self) -> dict:
        return {
            "srcc": self.srcc,
            "plcc": self.plcc,
            "n": self.n,
            "degenerate": self.degenerate,
        }


@dataclass(frozen=True)
class MetricsReport:
    comparison: ClassificationResult
    distortion: ClassificationResult
    severity: ClassificationResult
    scores: ScoreResult

    def to_dict(self) -> dict:
        return {
            "comparison": self.comparison.to_dict(),
            "distortion": self.distortion.to_dict(),
            "severity": self.severity.to_dict(),
            "scores": self.scores.to_dict(),
        }

    def to_table(self) -> str:
        rows = [
            ("task", "accuracy", "precision", "recall", "f1", "n"),
        ]
        for name, r in (
            ("comparison", self.comparison),
            ("distortion", self.distortion),
            ("severity", self.severity),
        ):
            rows.append(
                (
                    name,
                    f"{r.accuracy:.4f}",
                    f"{r.macro_precision:.4f}",
                    f"{r.macro_recall:.4f}",
                    f"{r.macro_f1:.4f}",
                    str(r.n),
                )
            )
        widths = [max(len(row[c]) for row in rows) for c in range(len(rows[0]))]
        lines = [
            "  ".join(cell.ljust(widths[c]) for c, cell in enumerate(row)).rstrip()
            for row in rows
        ]
        suffix = " (degenerate)" if self.scores.degenerate else ""
        lines.append(
            f"scores      SRCC {self.scores.srcc:.4f}  PLCC {self.scores.plcc:.4f}"
            f"  n {self.scores.n}{suffix}"
        )
        return "\n".join(lines) + "\n"


def evaluate(
    graphs: Mapping[str, DistortionGraph],
    predictions: PredictionSet,
    *,
    lenient: bool = False,
) -> MetricsReport:
    """Score a prediction set against ground-truth graphs.

    Strict mode raises on the first pass listing every missing key;
    lenient mode counts missing predictions as wrong (classification)
    and skips them for the correlation task.
    """
    missing = [
        (pair_id, i)
        for pair_id, g in sorted(graphs.items())
        for i in range(1, g.n_regions + 1)
        if (pair_id, i) not in predictions
    ]
    if missing and not lenient:
        listed = ", ".join(f"({p}, {i})" for p, i in missing[:20])
        more = "" if len(missing) <= 20 else f" and {len(missing) - 20} more"
        raise MissingPrediction(f"{len(missing)} missing: {listed}{more}")

    comparison: list[tuple[str, Optional[str]]] = []
    distortion: list[tuple[str, Optional[str]]] = []
    severity: list[tuple[str, Optional[str]]] = []
    gt_scores: list[float] = []
    pred_scores: list[float] = []

    for pair_id in sorted(graphs):
        g = graphs[pair_id]
        for i in range(1, g.n_regions + 1):
            pred = predictions.get((pair_id, i))
            edge = g.edge(i)
            comparison.append(
                (edge.relation.value, pred.relation.value if pred else None)
            )
            for side, dist_of, sev_of, score_of in (
                (
                    ImageSide.ANCHOR,
                    lambda p: p.distortion_anchor,
                    lambda p: p.severity_anchor,
                    lambda p: p.score_anchor,
                ),
                (
                    ImageSide.TARGET,
                    lambda p: p.distortion_target,
                    lambda p: p.severity_target,
                    lambda p: p.score_target,
                ),
            ):
                node = g.node(side, i)
                distortion.append(
                    (node.distortion.family.value, dist_of(pred).value if pred else None)
                )
                severity.append(
                    (node.severity.value, sev_of(pred).value if pred else None)
                )
                if pred:
                    gt_scores.append(node.score)
                    pred_scores.append(score_of(pred))

    srcc, deg_s = spearman(pred_scores, gt_scores)
    plcc, deg_p = pearson(pred_scores, gt_scores)
    return MetricsReport(
        comparison=classification_metrics(comparison),
        distortion=classification_metrics(distortion),
        severity=classification_metrics(severity),
        scores=ScoreResult(srcc, plcc, len(gt_scores), deg_s or deg_p),
    )


def predictions_from_graph(graph: DistortionGraph) -> dict[tuple[str, int], RegionPrediction]:
    """Read a graph back as a (perfect) prediction set for its pair."""
    out = {}
    for i in range(1, graph.n_regions + 1):
        a = graph.node(ImageSide.ANCHOR, i)
        t = graph.node(ImageSide.TARGET, i)
        out[(graph.pair_id, i)] = RegionPrediction(
            relation=graph.edge(i).relation,
            distortion_anchor=a.distortion.family,
            distortion_target=t.distortion.family,
            severity_anchor=a.severity,
            severity_target=t.severity,
            score_anchor=a.score,
            score_target=t.score,
        )
    return out


def random_baseline(
    graphs: Mapping[str, DistortionGraph], seed: int
) -> PredictionSet:
    """Uniform random predictions sized by the ground-truth graphs."""
    relations = list(RelationLabel)
    families = list(Family)
    severities = list(SeverityLabel)
    out: PredictionSet = {}
    for pair_id in sorted(graphs):
        rng = np.random.default_rng(mix64(seed, string_key(pair_id)))
        for i in range(1, graphs[pair_id].n_regions + 1):
            out[(pair_id, i)] = RegionPrediction(
                relation=relations[int(rng.integers(len(relations)))],
                distortion_anchor=families[int(rng.integers(len(families)))],
                distortion_target=families[int(rng.integers(len(families)))],
                severity_anchor=severities[int(rng.integers(len(severities)))],
                severity_target=severities[int(rng.integers(len(severities)))],
                score_anchor=float(rng.random()),
                score_target=float(rng.random()),
            )
    return out


# --- whole-image ranking -----------------------------------------------------


class RankMode(Enum):
    PREDICATE_BASED = "predicate"
    SCORE_BASED = "score"


class PairVerdict(Enum):
    ANCHOR_BETTER = "anchor_better"
    TARGET_BETTER = "target_better"
    TIE = "tie"


@dataclass(frozen=True)
class RegionComparison:
    relation: RelationLabel
    score_anchor: float
    score_target: float


def graph_comparisons(graph: DistortionGraph) -> list[RegionComparison]:
    return [
        RegionComparison(
            relation=graph.edge(i).relation,
            score_anchor=graph.node(ImageSide.ANCHOR, i).score,
            score_target=graph.node(ImageSide.TARGET, i).score,
        )
        for i in range(1, graph.n_regions + 1)
    ]


_BETTER = {RelationLabel.SLIGHTLY_BETTER, RelationLabel.SIGNIFICANTLY_BETTER}
_WORSE = {RelationLabel.SLIGHTLY_WORSE, RelationLabel.SIGNIFICANTLY_WORSE}


def rank_pair(
    source: DistortionGraph | Sequence[RegionComparison],
    mode: RankMode,
) -> PairVerdict:
    """Aggregate region comparisons into a whole-image verdict.

    Majority of better vs worse regions wins (predicate mode) or of
    higher- vs lower-scoring regions (score mode). Count ties fall back
    to the sign of the summed score difference; a zero sum is a tie.
    """
    items = (
        graph_comparisons(source)
        if isinstance(source, DistortionGraph)
        else list(source)
    )
    if not items:
        raise ValueError("cannot rank an empty graph")
    if mode is RankMode.PREDICATE_BASED:
        better = sum(1 for c in items if c.relation in _BETTER)
        worse = sum(1 for c in items if c.relation in _WORSE)
    else:
        better = sum(1 for c in items if c.score_anchor > c.score_target)
        worse = sum(1 for c in items if c.score_anchor < c.score_target)
    if better > worse:
        return PairVerdict.ANCHOR_BETTER
    if worse > better:
        return PairVerdict.TARGET_BETTER
    delta = sum(c.score_anchor - c.score_target for c in items)
    if delta > 0:
        return PairVerdict.ANCHOR_BETTER
    if delta < 0:
        return PairVerdict.TARGET_BETTER
    return PairVerdict.TIE


def ranking_accuracy(
    items: Sequence[tuple[DistortionGraph | Sequence[RegionComparison], PairVerdict]],
    mode: RankMode,
) -> float:
    """Fraction of pairs whose verdict matches the ground-truth side.

    A predicted tie only counts when the ground truth is a tie.
    """
    if not items:
        return 0.0
    correct = sum(1 for source, truth in items if rank_pair(source, mode) is truth)
    return correct / len(items)
