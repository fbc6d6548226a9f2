import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from distgraph import (
    Family,
    ImageSide,
    RegionNode,
    RelationLabel,
    SeverityLabel,
    build_graph,
    deserialize,
    distortion_edge,
    grounded_subgraph,
    serialize,
    validate,
)
from distgraph.errors import (
    EdgeViolation,
    InvalidCombination,
    ParseError,
    ScoreOutOfRange,
    UnknownRegion,
    ValidationError,
)
from distgraph.graph import (
    CLEAN_LABEL,
    DistortionEdge,
    DistortionLabel,
    EdgeEndpoint,
    ViolationKind,
    quantize_score,
)
from helpers import (
    make_random_graph,
    mutate_add_intra_edge,
    mutate_drop_edge,
    mutate_duplicate_edge,
    mutate_reverse_edge,
)


def node(i, side, family=Family.CLEAN, severity=SeverityLabel.NONE, score=1.0, **kw):
    subtype = "none" if family is Family.CLEAN else kw.pop("subtype", None)
    if subtype is None and family is not Family.CLEAN:
        from distgraph.graph import default_subtype

        subtype = default_subtype(family)
    return RegionNode(
        region_index=i,
        class_name=kw.pop("class_name", "thing"),
        side=side,
        distortion=DistortionLabel(family, subtype),
        severity=severity,
        score=score,
        **kw,
    )


def simple_graph(n=3):
    return build_graph(
        "p1",
        [node(i, ImageSide.ANCHOR) for i in range(1, n + 1)],
        [node(i, ImageSide.TARGET) for i in range(1, n + 1)],
        [distortion_edge(i, RelationLabel.SAME) for i in range(1, n + 1)],
        anchor_image_ref="a.ppm",
        target_image_ref="t.ppm",
        label_map_ref="m.pgm",
    )


class TestBuildGraph:
    def test_minimal_three_region_graph(self):
        g = simple_graph(3)
        assert g.n_regions == 3
        assert len(g.distortion_edges) == 3
        assert validate(g) == []

    def test_two_edges_on_one_index_rejected(self):
        with pytest.raises(EdgeViolation):
            build_graph(
                "p1",
                [node(1, ImageSide.ANCHOR)],
                [node(1, ImageSide.TARGET)],
                [
                    distortion_edge(1, RelationLabel.SAME),
                    distortion_edge(1, RelationLabel.SLIGHTLY_BETTER),
                ],
            )

    def test_reversed_edge_rejected(self):
        reversed_edge = DistortionEdge(
            subject=EdgeEndpoint(ImageSide.TARGET, 1),
            relation=RelationLabel.SAME,
            object=EdgeEndpoint(ImageSide.ANCHOR, 1),
        )
        with pytest.raises(EdgeViolation):
            build_graph(
                "p1",
                [node(1, ImageSide.ANCHOR)],
                [node(1, ImageSide.TARGET)],
                [reversed_edge],
            )

    def test_score_out_of_range(self):
        with pytest.raises(ScoreOutOfRange):
            build_graph(
                "p1",
                [node(1, ImageSide.ANCHOR, score=1.5)],
                [node(1, ImageSide.TARGET)],
                [distortion_edge(1, RelationLabel.SAME)],
            )

    def test_clean_requires_severity_none(self):
        with pytest.raises(InvalidCombination):
            build_graph(
                "p1",
                [node(1, ImageSide.ANCHOR, severity=SeverityLabel.MINOR)],
                [node(1, ImageSide.TARGET)],
                [distortion_edge(1, RelationLabel.SAME)],
            )

    def test_scores_quantized_on_build(self):
        g = build_graph(
            "p1",
            [node(1, ImageSide.ANCHOR, score=0.12345678)],
            [node(1, ImageSide.TARGET)],
            [distortion_edge(1, RelationLabel.SAME)],
        )
        assert g.anchor_nodes[0].score == 0.123457


class TestValidate:
    def test_well_formed_graph_validates_clean(self):
        assert validate(simple_graph(5)) == []

    def test_missing_edge_reports_functional(self):
        g = mutate_drop_edge(simple_graph(5), 4)
        violations = validate(g)
        assert [v.kind for v in violations] == [ViolationKind.FUNCTIONAL]
        assert "region 4" in violations[0].element

    def test_injected_intra_image_edge_in_serialized_form(self):
        doc = json.loads(serialize(simple_graph(3)))
        doc["distortion_edges"].append(
            {"index": 2, "relation": "same", "object_side": "A"}
        )
        g = deserialize(json.dumps(doc).encode(), lenient=True)
        violations = validate(g)
        assert [v.kind for v in violations] == [ViolationKind.VALIDITY]
        assert violations[0].element.startswith("edge ")
        assert "intra-image" in violations[0].detail

    def test_strict_deserialize_rejects_violations(self):
        doc = json.loads(serialize(simple_graph(3)))
        del doc["distortion_edges"][0]
        with pytest.raises(ValidationError):
            deserialize(json.dumps(doc).encode())

    @pytest.mark.parametrize(
        "mutate,kind",
        [
            (mutate_reverse_edge, ViolationKind.ORDERING),
            (mutate_duplicate_edge, ViolationKind.FUNCTIONAL),
            (mutate_drop_edge, ViolationKind.FUNCTIONAL),
            (mutate_add_intra_edge, ViolationKind.VALIDITY),
        ],
    )
    def test_single_mutations_detected(self, mutate, kind):
        g = simple_graph(4)
        violations = validate(mutate(g, 2))
        assert violations
        assert {v.kind for v in violations} == {kind}


class TestSerialization:
    def test_round_trip_field_equality(self):
        g = make_random_graph(np.random.default_rng(0))
        assert deserialize(serialize(g)) == g

    def test_node_order_does_not_change_bytes(self):
        nodes_a = [node(i, ImageSide.ANCHOR, score=0.5) for i in (1, 2, 3)]
        nodes_t = [node(i, ImageSide.TARGET) for i in (1, 2, 3)]
        edges = [distortion_edge(i, RelationLabel.SLIGHTLY_WORSE) for i in (1, 2, 3)]
        g1 = build_graph("p", nodes_a, nodes_t, edges)
        g2 = build_graph("p", nodes_a[::-1], nodes_t[::-1], edges[::-1])
        assert serialize(g1) == serialize(g2)

    def test_truncated_stream_is_parse_error(self):
        data = serialize(simple_graph(2))
        with pytest.raises(ParseError) as err:
            deserialize(data[: len(data) // 2])
        assert err.value.offset >= 0

    def test_score_formatting_six_digits(self):
        g = build_graph(
            "p",
            [node(1, ImageSide.ANCHOR, score=0.5)],
            [node(1, ImageSide.TARGET, score=0.1239999)],
            [distortion_edge(1, RelationLabel.SAME)],
        )
        text = serialize(g).decode()
        assert '"score":0.500000' in text
        assert '"score":0.124000' in text

    def test_mask_ref_and_scene_attributes_round_trip(self):
        g = build_graph(
            "p",
            [node(1, ImageSide.ANCHOR, mask_ref=7, scene_attributes=("wet",))],
            [node(1, ImageSide.TARGET)],
            [distortion_edge(1, RelationLabel.SAME)],
        )
        back = deserialize(serialize(g))
        assert back.anchor_nodes[0].mask_ref == 7
        assert back.anchor_nodes[0].scene_attributes == ("wet",)

    def test_unknown_relation_is_parse_error(self):
        doc = json.loads(serialize(simple_graph(1)))
        doc["distortion_edges"][0]["relation"] = "way_better"
        with pytest.raises(ParseError):
            deserialize(json.dumps(doc).encode(), lenient=True)

    def test_version_checked(self):
        doc = json.loads(serialize(simple_graph(1)))
        doc["version"] = 2
        with pytest.raises(ParseError):
            deserialize(json.dumps(doc).encode())


class TestGroundedSubgraph:
    def test_restriction_keeps_attributes(self):
        rng = np.random.default_rng(3)
        g = make_random_graph(rng, n_regions=5)
        sub = grounded_subgraph(g, 2)
        assert sub.n_regions == 1
        original = g.node(ImageSide.ANCHOR, 2)
        kept = sub.node(ImageSide.ANCHOR, 1)
        assert kept.distortion == original.distortion
        assert kept.severity == original.severity
        assert kept.score == original.score
        assert kept.mask_ref == 2
        assert sub.edge(1).relation == g.edge(2).relation

    def test_unknown_region(self):
        g = simple_graph(5)
        with pytest.raises(UnknownRegion):
            grounded_subgraph(g, 9)

    def test_idempotence(self):
        g = make_random_graph(np.random.default_rng(4), n_regions=4)
        sub = grounded_subgraph(g, 3)
        assert grounded_subgraph(sub, 1) == sub


class TestQuantize:
    def test_half_even(self):
        assert quantize_score(0.1234565) in (0.123456, 0.123457)
        assert quantize_score(0.5) == 0.5
        assert quantize_score(1.0) == 1.0

    def test_idempotent(self):
        for x in np.random.default_rng(1).random(100):
            assert quantize_score(quantize_score(x)) == quantize_score(float(x))


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_random_graphs_validate_clean_and_round_trip(seed):
    g = make_random_graph(np.random.default_rng(seed))
    assert validate(g) == []
    assert deserialize(serialize(g)) == g


@settings(max_examples=40, deadline=None)
@given(
    st.integers(min_value=0, max_value=2**32 - 1),
    st.integers(min_value=0, max_value=2**32 - 1),
)
def test_byte_equality_iff_structural_equality(seed_a, seed_b):
    ga = make_random_graph(np.random.default_rng(seed_a))
    gb = make_random_graph(np.random.default_rng(seed_b))
    assert (serialize(ga) == serialize(gb)) == (ga == gb)


def test_clean_label_constant():
    assert CLEAN_LABEL.family is Family.CLEAN
    assert CLEAN_LABEL.subtype == "none"
    with pytest.raises(InvalidCombination):
        DistortionLabel(Family.CLEAN, "gaussian")
