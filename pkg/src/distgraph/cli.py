"""Batch command surface: synthesis, validation, scoring, evaluation.

Exit codes: 0 success, 1 domain failure (bad data, violations), 2 usage
or I/O failure. All outputs are deterministic given the configuration;
files are written atomically (temp file, then rename).
"""

from __future__ import annotations

import json
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click

from ._version import __version__
from .bench import (
    BenchmarkManifest,
    Split,
    check_split_membership,
    load_graphs,
    load_manifest,
    manifest_to_bytes,
    plan_split,
    run_pair_job,
    summarize_graphs,
)
from .distortions import override_severity_params
from .errors import DistGraphError, ParseError
from .evaluation import (
    RankMode,
    evaluate,
    load_predictions,
    random_baseline,
    rank_pair,
    store_predictions,
)
from .graph import Family, deserialize, serialize, validate
from .imageio import load_image, save_image, store_ppm, store_png
from .labelmap import load_label_map, store_label_map
from .prompting import PromptStyle, render_prompt
from .scenes import Scene, generate_scenes
from .scoring import (
    DefaultScorer,
    ScoreTable,
    TableScorer,
    load_score_table,
    store_score_table,
)


def write_atomic(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_config(path: str | None) -> dict:
    """UTF-8 config file, either JSON or key=value lines; flags win."""
    if path is None:
        return {}
    text = Path(path).read_text(encoding="utf-8")
    stripped = text.lstrip()
    if stripped.startswith("{"):
        return json.loads(text)
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError(f"config line {lineno}: expected key=value")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _pick(flag_value, config: dict, key: str, default, convert=lambda v: v):
    if flag_value is not None:
        return flag_value
    if key in config:
        return convert(config[key])
    return default


def _apply_severity_overrides(config: dict) -> None:
    overrides = config.get("severity_overrides")
    if not overrides:
        return
    if isinstance(overrides, str):
        overrides = json.loads(overrides)
    for family_name, params in overrides.items():
        for param_name, triple in params.items():
            override_severity_params(
                Family(family_name), param_name, tuple(float(v) for v in triple)
            )


def _make_scorer(spec_text: str):
    if spec_text == "default":
        return DefaultScorer()
    if spec_text.startswith("score-table:"):
        path = spec_text.split(":", 1)[1]
        return TableScorer(load_score_table(Path(path).read_bytes()))
    raise click.UsageError(f"unknown scorer {spec_text!r}")


def _load_scenes_dir(directory: Path) -> list[Scene]:
    scenes = []
    for map_path in sorted(directory.glob("*.pgm")):
        stem = map_path.stem
        image_path = None
        for suffix in (".ppm", ".png"):
            candidate = directory / f"{stem}{suffix}"
            if candidate.exists():
                image_path = candidate
                break
        if image_path is None:
            continue
        label_map, _ = load_label_map(map_path.read_bytes())
        names_path = directory / f"{stem}.classes.txt"
        if names_path.exists():
            names = tuple(
                line.strip()
                for line in names_path.read_text(encoding="utf-8").splitlines()
                if line.strip()
            )
        else:
            names = tuple(f"region_{i}" for i in range(1, label_map.n_regions + 1))
        scenes.append(
            Scene(
                scene_id=stem,
                image=load_image(image_path),
                label_map=label_map,
                class_names=names,
            )
        )
    if not scenes:
        raise click.UsageError(f"no scenes found in {directory}")
    return scenes


def _write_corpus(out_dir: Path, manifest, built, scenes, image_format: str) -> None:
    for scene in scenes:
        write_atomic(
            out_dir / "maps" / f"{scene.scene_id}.pgm",
            store_label_map(scene.label_map),
        )
    encode = store_ppm if image_format == "ppm" else store_png
    for b in built:
        write_atomic(out_dir / b.record.anchor_image_ref, encode(b.anchor_image))
        write_atomic(out_dir / b.record.target_image_ref, encode(b.target_image))
        write_atomic(out_dir / b.record.graph_ref, serialize(b.graph))
    write_atomic(out_dir / "manifest.json", manifest_to_bytes(manifest))


def _build_split_to_dir(
    out_dir: Path,
    split: Split,
    scenes,
    n_pairs: int,
    seed: int,
    scorer,
    image_format: str,
    threads: int,
) -> BenchmarkManifest:
    jobs = plan_split(split, scenes, n_pairs, seed)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            built = list(
                pool.map(
                    lambda job: run_pair_job(job, scorer, image_format=image_format),
                    jobs,
                )
            )
    else:
        built = [run_pair_job(job, scorer, image_format=image_format) for job in jobs]
    manifest = BenchmarkManifest(
        split=split,
        global_seed=seed,
        pairs=tuple(b.record for b in built),
    )
    used = {job.scene.scene_id: job.scene for job in jobs}
    _write_corpus(out_dir, manifest, built, used.values(), image_format)
    return manifest


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


@click.group()
@click.version_option(version=__version__)
def main():
    """Region-first pairwise image assessment toolkit."""


_common = [
    click.option("--seed", type=int, default=None, help="Global seed."),
    click.option("--threads", type=int, default=None, help="Worker threads."),
    click.option(
        "--config",
        "config_path",
        type=click.Path(exists=True, dir_okay=False),
        default=None,
        help="Config file (JSON or key=value); flags win.",
    ),
]


def common_options(fn):
    for option in reversed(_common):
        fn = option(fn)
    return fn


@main.command()
@common_options
@click.option("--out", type=click.Path(), default=None, help="Output directory.")
@click.option(
    "--split",
    type=click.Choice([s.value for s in Split]),
    default=None,
)
@click.option("--pairs", type=int, default=None, help="Number of pairs.")
@click.option("--scene-count", type=int, default=None)
@click.option("--scene-size", type=int, default=None)
@click.option(
    "--scenes-dir",
    type=click.Path(exists=True, file_okay=False),
    default=None,
    help="Use scenes from a directory instead of procedural ones.",
)
@click.option(
    "--image-format", type=click.Choice(["ppm", "png"]), default=None
)
@click.option("--scorer", "scorer_spec", type=str, default=None)
def synth(
    seed, threads, config_path, out, split, pairs, scene_count, scene_size,
    scenes_dir, image_format, scorer_spec,
):
    """Generate one split's corpus: images, label maps, graphs, manifest."""
    config = read_config(config_path)
    try:
        _apply_severity_overrides(config)
    except DistGraphError as exc:
        _fail(str(exc))
    seed = _pick(seed, config, "seed", 0, int)
    threads = _pick(threads, config, "threads", 1, int)
    out = _pick(out, config, "out", None)
    if out is None:
        raise click.UsageError("missing --out")
    out = Path(out)
    split = Split(_pick(split, config, "split", "hard"))
    pairs = _pick(pairs, config, "pairs", 10, int)
    scene_count = _pick(scene_count, config, "scene_count", 8, int)
    scene_size = _pick(scene_size, config, "scene_size", 64, int)
    image_format = _pick(image_format, config, "image_format", "ppm")
    scorer = _make_scorer(_pick(scorer_spec, config, "scorer", "default"))
    scenes_dir = _pick(scenes_dir, config, "scenes_dir", None)

    try:
        scenes = (
            _load_scenes_dir(Path(scenes_dir))
            if scenes_dir
            else generate_scenes(seed, scene_count, size=scene_size)
        )
        _build_split_to_dir(
            out, split, scenes, pairs, seed, scorer, image_format, threads
        )
    except DistGraphError as exc:
        _fail(str(exc))
    click.echo(f"wrote {pairs} {split.value} pairs to {out}")


@main.command("build-bench")
@common_options
@click.option("--out", type=click.Path(), required=True)
@click.option("--pairs", type=int, default=None, help="Pairs per split.")
@click.option("--scene-count", type=int, default=None)
@click.option("--scene-size", type=int, default=None)
@click.option(
    "--image-format", type=click.Choice(["ppm", "png"]), default=None
)
@click.option("--scorer", "scorer_spec", type=str, default=None)
def build_bench(
    seed, threads, config_path, out, pairs, scene_count, scene_size,
    image_format, scorer_spec,
):
    """Build all three benchmark splits under one output root."""
    config = read_config(config_path)
    try:
        _apply_severity_overrides(config)
    except DistGraphError as exc:
        _fail(str(exc))
    seed = _pick(seed, config, "seed", 0, int)
    threads = _pick(threads, config, "threads", 1, int)
    pairs = _pick(pairs, config, "pairs", 300, int)
    scene_count = _pick(scene_count, config, "scene_count", 16, int)
    scene_size = _pick(scene_size, config, "scene_size", 64, int)
    image_format = _pick(image_format, config, "image_format", "ppm")
    scorer = _make_scorer(_pick(scorer_spec, config, "scorer", "default"))

    out = Path(out)
    try:
        scenes = generate_scenes(seed, scene_count, size=scene_size)
        for split in Split:
            _build_split_to_dir(
                out / split.value, split, scenes, pairs, seed, scorer,
                image_format, threads,
            )
            click.echo(f"{split.value}: {pairs} pairs")
    except DistGraphError as exc:
        _fail(str(exc))


@main.command("validate")
@click.argument("paths", nargs=-1, type=click.Path(exists=True, dir_okay=True))
def validate_cmd(paths):
    """Check graph files (or directories of them) against the graph laws."""
    files: list[Path] = []
    for p in paths:
        p = Path(p)
        files.extend(sorted(p.glob("**/*.json")) if p.is_dir() else [p])
    failures = 0
    for path in files:
        try:
            graph = deserialize(path.read_bytes(), lenient=True)
        except ParseError as exc:
            click.echo(f"{path}: parse error: {exc}")
            failures += 1
            continue
        violations = validate(graph)
        if violations:
            failures += 1
            for v in violations:
                click.echo(f"{path}: {v}")
        else:
            click.echo(f"{path}: ok")
    if failures:
        _fail(f"{failures} of {len(files)} file(s) failed validation")
    click.echo(f"{len(files)} file(s) clean")


@main.command("score")
@common_options
@click.option(
    "--manifest",
    "manifest_path",
    type=click.Path(exists=True, dir_okay=False),
    required=True,
)
@click.option("--out", type=click.Path(), required=True, help="Score CSV path.")
def score_cmd(seed, threads, config_path, manifest_path, out):
    """Recompute default region scores for a corpus into a score table."""
    manifest_path = Path(manifest_path)
    base = manifest_path.parent
    try:
        manifest = load_manifest(manifest_path)
        scores = {}
        for record in manifest.pairs:
            label_map, _ = load_label_map((base / record.label_map_ref).read_bytes())
            ref_image = _scene_reference(base, record, label_map)
            for side, image_ref in (
                ("A", record.anchor_image_ref),
                ("T", record.target_image_ref),
            ):
                image = load_image(base / image_ref)
                scorer = DefaultScorer()
                for i in range(1, label_map.n_regions + 1):
                    scores[(record.pair_id, side, i)] = scorer.score_region(
                        record.pair_id, side, ref_image, image, label_map, i
                    )
        write_atomic(Path(out), store_score_table(ScoreTable(scores)))
    except (DistGraphError, OSError) as exc:
        _fail(str(exc))
    click.echo(f"wrote {len(scores)} scores to {out}")


def _scene_reference(base, record, label_map):
    # Corpus trees do not keep the clean scene; fall back to scoring each
    # degraded image against itself when no reference file is present.
    candidate = base / "scenes" / f"{record.scene_id}.ppm"
    if candidate.exists():
        return load_image(candidate)
    return load_image(base / record.anchor_image_ref)


@main.command("eval")
@common_options
@click.option(
    "--manifest",
    "manifest_path",
    type=click.Path(exists=True, dir_okay=False),
    required=True,
)
@click.option(
    "--predictions",
    "predictions_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
)
@click.option(
    "--random-baseline",
    "use_random",
    is_flag=True,
    help="Evaluate the seeded uniform-random baseline instead of a file.",
)
@click.option("--lenient", is_flag=True, help="Missing predictions count wrong.")
@click.option("--out", type=click.Path(), default=None, help="Report directory.")
def eval_cmd(
    seed, threads, config_path, manifest_path, predictions_path, use_random,
    lenient, out,
):
    """Score a prediction set against a corpus and emit the metric report."""
    if predictions_path is None and not use_random:
        raise click.UsageError("provide --predictions or --random-baseline")
    manifest_path = Path(manifest_path)
    try:
        manifest = load_manifest(manifest_path)
        graphs = load_graphs(manifest, manifest_path.parent)
        if use_random:
            predictions = random_baseline(graphs, seed or 0)
        else:
            predictions = load_predictions(Path(predictions_path).read_bytes())
        report = evaluate(graphs, predictions, lenient=lenient)
    except (DistGraphError, OSError) as exc:
        _fail(str(exc))
    text = report.to_table()
    click.echo(text, nl=False)
    if out:
        out = Path(out)
        write_atomic(
            out / "report.json",
            (json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n").encode(),
        )
        write_atomic(out / "report.txt", text.encode())


@main.command("rank")
@common_options
@click.option(
    "--manifest",
    "manifest_path",
    type=click.Path(exists=True, dir_okay=False),
    required=True,
)
@click.option(
    "--mode",
    type=click.Choice([m.value for m in RankMode]),
    default=RankMode.SCORE_BASED.value,
)
@click.option(
    "--predictions",
    "predictions_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
)
def rank_cmd(seed, threads, config_path, manifest_path, mode, predictions_path):
    """Whole-image verdicts per pair; accuracy when predictions are given."""
    mode = RankMode(mode)
    manifest_path = Path(manifest_path)
    try:
        manifest = load_manifest(manifest_path)
        graphs = load_graphs(manifest, manifest_path.parent)
        predictions = (
            load_predictions(Path(predictions_path).read_bytes())
            if predictions_path
            else None
        )
        correct = 0
        scored = 0
        for pair_id in sorted(graphs):
            truth = rank_pair(graphs[pair_id], mode)
            line = f"{pair_id}: {truth.value}"
            if predictions is not None:
                rows = [
                    _comparison_from_prediction(predictions[(pair_id, i)])
                    for i in range(1, graphs[pair_id].n_regions + 1)
                    if (pair_id, i) in predictions
                ]
                if len(rows) != graphs[pair_id].n_regions:
                    _fail(f"{pair_id}: predictions incomplete")
                predicted = rank_pair(rows, mode)
                scored += 1
                correct += int(predicted is truth)
                line += f" predicted {predicted.value}"
            click.echo(line)
        if predictions is not None and scored:
            click.echo(f"ranking accuracy: {correct / scored:.4f}")
    except (DistGraphError, OSError) as exc:
        _fail(str(exc))


def _comparison_from_prediction(pred):
    from .evaluation import RegionComparison

    return RegionComparison(
        relation=pred.relation,
        score_anchor=pred.score_anchor,
        score_target=pred.score_target,
    )


@main.command("prompt")
@click.argument("graph_path", type=click.Path(exists=True, dir_okay=False))
@click.option(
    "--style",
    type=click.Choice([s.value for s in PromptStyle]),
    default=PromptStyle.PER_REGION.value,
)
def prompt_cmd(graph_path, style):
    """Render a graph file as prompt text on standard output."""
    try:
        graph = deserialize(Path(graph_path).read_bytes())
    except DistGraphError as exc:
        _fail(str(exc))
    click.echo(render_prompt(graph, PromptStyle(style)), nl=False)


@main.command("baseline")
@common_options
@click.option(
    "--manifest",
    "manifest_path",
    type=click.Path(exists=True, dir_okay=False),
    required=True,
)
@click.option("--out", type=click.Path(), required=True)
def baseline_cmd(seed, threads, config_path, manifest_path, out):
    """Write the seeded uniform-random prediction set for a corpus."""
    manifest_path = Path(manifest_path)
    try:
        manifest = load_manifest(manifest_path)
        graphs = load_graphs(manifest, manifest_path.parent)
        predictions = random_baseline(graphs, seed or 0)
        write_atomic(Path(out), store_predictions(predictions))
    except (DistGraphError, OSError) as exc:
        _fail(str(exc))
    click.echo(f"wrote {len(predictions)} predictions to {out}")


@main.command("summarize")
@click.argument(
    "manifest_paths", nargs=-1, type=click.Path(exists=True, dir_okay=False)
)
@click.option("--expect-mixed", is_flag=True)
@click.option("--tolerance", type=float, default=0.01)
def summarize_cmd(manifest_paths, expect_mixed, tolerance):
    """Region label distribution across one or more corpora."""
    try:
        graphs = []
        for mp in manifest_paths:
            mp = Path(mp)
            manifest = load_manifest(mp)
            problems = check_split_membership(manifest)
            for problem in problems:
                click.echo(f"{mp}: {problem}")
            if problems:
                _fail("split membership check failed")
            graphs.extend(load_graphs(manifest, mp.parent).values())
        summary = summarize_graphs(
            graphs, expect_mixed=expect_mixed, tolerance=tolerance
        )
    except (DistGraphError, OSError) as exc:
        _fail(str(exc))
    click.echo(f"regions: {summary.n_regions}")
    for family, fraction in sorted(
        summary.family_fractions.items(), key=lambda kv: kv[0].value
    ):
        click.echo(f"  {family.value}: {fraction:.4f}")
    for severity, fraction in sorted(
        summary.severity_fractions.items(), key=lambda kv: kv[0].value
    ):
        click.echo(f"  severity {severity.value}: {fraction:.4f}")
    for flag in summary.flags:
        click.echo(f"flag: {flag}")
    if summary.flags:
        sys.exit(1)


if __name__ == "__main__":
    main()
