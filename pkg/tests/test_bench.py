import numpy as np
import pytest

from distgraph import (
    Family,
    Setting,
    Split,
    build_pair,
    build_split,
    check_split_membership,
    enumerate_setting_pairs,
    generate_scenes,
    summarize_graphs,
    validate,
)
from distgraph.bench import (
    admissible_setting_pairs,
    load_graphs,
    manifest_from_bytes,
    manifest_to_bytes,
    pair_matches_split,
    plan_split,
)
from distgraph.errors import InsufficientScenes, InvalidCombination, MissingGraph
from distgraph.scoring import DefaultScorer
from distgraph.synth import SettingKind


@pytest.fixture(scope="module")
def scenes():
    return generate_scenes(77, 3, size=64)


class TestEnumerateSettingPairs:
    def test_exactly_240(self):
        assert len(enumerate_setting_pairs()) == 240

    def test_both_orders_present(self):
        pairs = enumerate_setting_pairs()
        blur = Setting.uniform(Family.BLUR)
        clean = Setting.clean()
        assert (blur, clean) in pairs
        assert (clean, blur) in pairs

    def test_no_equal_components(self):
        assert all(a != b for a, b in enumerate_setting_pairs())

    def test_deterministic_order(self):
        assert enumerate_setting_pairs() == enumerate_setting_pairs()


class TestBuildPair:
    def test_equal_settings_rejected(self, scenes):
        with pytest.raises(InvalidCombination):
            build_pair(
                scenes[0],
                Setting.clean(),
                Setting.clean(),
                1,
                DefaultScorer(),
                pair_id="x",
            )

    def test_clean_anchor_side_forced(self, scenes):
        built = build_pair(
            scenes[0],
            Setting.clean(),
            Setting.uniform(Family.NOISE),
            3,
            DefaultScorer(),
            pair_id="p-clean",
        )
        for node in built.graph.anchor_nodes:
            assert node.distortion.family is Family.CLEAN
            assert node.score == 1.0
        assert built.anchor_image == scenes[0].image

    def test_mixed_mixed_allowed_with_independent_plans(self, scenes):
        built = build_pair(
            scenes[1],
            Setting.mixed(),
            Setting.mixed(),
            9,
            DefaultScorer(),
            pair_id="p-mm",
        )
        assert validate(built.graph) == []

    def test_generated_graph_always_validates(self, scenes):
        built = build_pair(
            scenes[2],
            Setting.uniform(Family.BLUR),
            Setting.uniform(Family.SNOW),
            4,
            DefaultScorer(),
            pair_id="p-bs",
        )
        assert validate(built.graph) == []
        assert built.graph.n_regions == scenes[2].n_regions


class TestBuildSplit:
    def test_easy_all_uniform(self, scenes):
        manifest, _ = build_split(Split.EASY, scenes, 30, 5, DefaultScorer())
        for p in manifest.pairs:
            assert p.setting_anchor.kind is SettingKind.UNIFORM
            assert p.setting_target.kind is SettingKind.UNIFORM
            assert p.setting_anchor != p.setting_target
        assert check_split_membership(manifest) == []

    def test_medium_exactly_one_mixed(self, scenes):
        manifest, _ = build_split(Split.MEDIUM, scenes, 30, 6, DefaultScorer())
        for p in manifest.pairs:
            kinds = (p.setting_anchor.kind, p.setting_target.kind)
            assert kinds.count(SettingKind.MIXED) == 1
            assert SettingKind.UNIFORM in kinds
        assert check_split_membership(manifest) == []

    def test_hard_both_mixed(self, scenes):
        manifest, built = build_split(Split.HARD, scenes, 10, 7, DefaultScorer())
        for p in manifest.pairs:
            assert p.setting_anchor.kind is SettingKind.MIXED
            assert p.setting_target.kind is SettingKind.MIXED
        # both sides really got independent plans
        assert any(
            b.graph.anchor_nodes != b.graph.target_nodes for b in built
        )

    def test_deterministic_manifests(self, scenes):
        m1, _ = build_split(Split.HARD, scenes, 10, 42, DefaultScorer())
        m2, _ = build_split(Split.HARD, scenes, 10, 42, DefaultScorer())
        assert manifest_to_bytes(m1) == manifest_to_bytes(m2)

    def test_every_graph_validates(self, scenes):
        _, built = build_split(Split.MEDIUM, scenes, 15, 8, DefaultScorer())
        assert all(validate(b.graph) == [] for b in built)

    def test_insufficient_scenes(self):
        with pytest.raises(InsufficientScenes):
            plan_split(Split.EASY, [], 5, 0)

    def test_zero_pairs_allowed(self, scenes):
        manifest, built = build_split(Split.EASY, scenes, 0, 0, DefaultScorer())
        assert manifest.pairs == () and built == []


class TestSplitPredicates:
    def test_admissible_pair_counts(self):
        assert len(admissible_setting_pairs(Split.EASY)) == 14 * 13
        assert len(admissible_setting_pairs(Split.MEDIUM)) == 28
        assert admissible_setting_pairs(Split.HARD) == [
            (Setting.mixed(), Setting.mixed())
        ]

    def test_predicates(self):
        blur = Setting.uniform(Family.BLUR)
        rain = Setting.uniform(Family.RAIN)
        mixed = Setting.mixed()
        clean = Setting.clean()
        assert pair_matches_split(Split.EASY, blur, rain)
        assert not pair_matches_split(Split.EASY, blur, mixed)
        assert not pair_matches_split(Split.EASY, clean, rain)
        assert pair_matches_split(Split.MEDIUM, mixed, rain)
        assert pair_matches_split(Split.MEDIUM, blur, mixed)
        assert not pair_matches_split(Split.MEDIUM, mixed, mixed)
        assert not pair_matches_split(Split.MEDIUM, mixed, clean)
        assert pair_matches_split(Split.HARD, mixed, mixed)
        assert not pair_matches_split(Split.HARD, mixed, blur)


class TestManifestFormat:
    def test_round_trip(self, scenes):
        manifest, _ = build_split(Split.MEDIUM, scenes, 5, 11, DefaultScorer())
        data = manifest_to_bytes(manifest)
        back = manifest_from_bytes(data)
        assert back == manifest
        assert manifest_to_bytes(back) == data

    def test_corpus_on_disk(self, scenes, tmp_path):
        from distgraph.cli import _build_split_to_dir
        from distgraph.bench import load_manifest

        manifest = _build_split_to_dir(
            tmp_path, Split.HARD, scenes, 4, 3, DefaultScorer(), "ppm", 1
        )
        loaded = load_manifest(tmp_path / "manifest.json")
        assert loaded == manifest
        graphs = load_graphs(loaded, tmp_path)
        assert len(graphs) == 4
        assert all(validate(g) == [] for g in graphs.values())

    def test_missing_graph(self, scenes, tmp_path):
        manifest, _ = build_split(Split.EASY, scenes, 2, 1, DefaultScorer())
        with pytest.raises(MissingGraph):
            load_graphs(manifest, tmp_path)


class TestSummaries:
    def test_empty_report(self):
        summary = summarize_graphs([])
        assert summary.n_regions == 0
        assert summary.family_fractions == {}

    def test_counts_and_flags(self, scenes):
        _, built = build_split(Split.HARD, scenes, 40, 13, DefaultScorer())
        summary = summarize_graphs([b.graph for b in built])
        assert summary.n_regions == sum(2 * b.graph.n_regions for b in built)
        assert abs(sum(summary.family_fractions.values()) - 1.0) < 1e-9
        # tiny corpus with a tight tolerance must raise flags
        strict = summarize_graphs(
            [built[0].graph], expect_mixed=True, tolerance=1e-6
        )
        assert strict.flags

    def test_uniform_corpus_forced_family(self, scenes):
        built = build_pair(
            scenes[0],
            Setting.uniform(Family.BLUR),
            Setting.uniform(Family.PIXELATE),
            2,
            DefaultScorer(),
            pair_id="p-forced",
        )
        summary = summarize_graphs([built.graph])
        observed = {
            f for f, v in summary.family_fractions.items() if v > 0
        }
        assert observed <= {Family.BLUR, Family.PIXELATE, Family.CLEAN}
